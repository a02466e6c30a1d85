"""Integer polynomial arithmetic in Z_q[x]/(x^N + 1).

Polynomials are numpy object arrays of Python ints.  Negacyclic
multiplication uses Kronecker substitution: pack coefficients into one
huge integer, multiply with GMP, slice the product digits back out and
fold the upper half with a sign flip.  Packing width is derived from
per-operand coefficient bounds, so small-coefficient operands (digit
polynomials, ternary noise, plaintexts) multiply much faster than full
ciphertext polynomials.

Signed small operands are handled with an offset: shift into the
non-negative range, multiply, then subtract the closed-form product of
the offset with the all-ones polynomial (a prefix-sum expression).
"""

from __future__ import annotations

from functools import lru_cache

import gmpy2
import numpy as np


def poly(coeffs) -> np.ndarray:
    arr = np.empty(len(coeffs), dtype=object)
    arr[:] = [int(c) for c in coeffs]
    return arr


def zero_poly(n: int) -> np.ndarray:
    arr = np.empty(n, dtype=object)
    arr[:] = [0] * n
    return arr


def poly_mod(a: np.ndarray, q: int) -> np.ndarray:
    return a % q


def poly_add(a: np.ndarray, b: np.ndarray, q: int) -> np.ndarray:
    return (a + b) % q


def poly_sub(a: np.ndarray, b: np.ndarray, q: int) -> np.ndarray:
    return (a - b) % q


def poly_neg(a: np.ndarray, q: int) -> np.ndarray:
    return (-a) % q


def centered(a: np.ndarray, q: int) -> np.ndarray:
    """Representatives in (-q/2, q/2]."""
    half = q // 2
    return np.where(a > half, a - q, a)


def _pack(coeffs: np.ndarray, width_bytes: int) -> int:
    buf = b"".join(int(c).to_bytes(width_bytes, "little") for c in coeffs)
    return int.from_bytes(buf, "little")


def _unpack_digits(value: int, count: int, width_bytes: int) -> list[int]:
    buf = value.to_bytes(count * width_bytes, "little")
    return [int.from_bytes(buf[i * width_bytes:(i + 1) * width_bytes], "little")
            for i in range(count)]


def _ones_product(b: np.ndarray, q: int) -> np.ndarray:
    """Negacyclic product of the all-ones polynomial with ``b`` (mod q)."""
    total = 0
    prefix = []
    for c in b:
        total += int(c)
        prefix.append(total)
    out = np.empty(len(b), dtype=object)
    out[:] = [(2 * p - total) % q for p in prefix]
    return out


def negacyclic_mul(a: np.ndarray, b: np.ndarray, q: int,
                   a_bits: int, b_bits: int, a_signed: bool = False) -> np.ndarray:
    """``a * b mod (x^N + 1, q)``.

    ``a_bits``/``b_bits`` bound the coefficient magnitudes (canonical
    representatives for unsigned operands, absolute values for a signed
    ``a``).  Only ``a`` may be signed.
    """
    n = len(a)
    offset = 0
    if a_signed:
        offset = 1 << a_bits
        a = a + offset
        a_bits += 2
    width_bits = n.bit_length() + a_bits + b_bits + 2
    width_bytes = (width_bits + 7) // 8
    big = int(gmpy2.mpz(_pack(a, width_bytes)) * gmpy2.mpz(_pack(b, width_bytes)))
    digits = _unpack_digits(big, 2 * n, width_bytes)
    out = np.empty(n, dtype=object)
    out[:] = [(digits[i] - digits[i + n]) % q for i in range(n)]
    if offset:
        out = (out - offset * _ones_product(b, q)) % q
    return out


def div_round(a: np.ndarray, q: int, divisor: int, new_q: int) -> np.ndarray:
    """Centered rounding division: round(a / divisor) mod new_q."""
    half = q // 2
    shift = divisor >> 1
    out = np.empty(len(a), dtype=object)
    vals = []
    for c in a:
        c = int(c)
        if c > half:
            c -= q
        vals.append(((c + shift) // divisor) % new_q)
    out[:] = vals
    return out


@lru_cache(maxsize=None)
def automorphism_tables(n: int, g: int):
    """Destination index and sign for x -> x^g over x^N + 1."""
    idx = np.empty(n, dtype=np.int64)
    sign = np.empty(n, dtype=bool)
    for i in range(n):
        e = (i * g) % (2 * n)
        if e < n:
            idx[i] = e
            sign[i] = True
        else:
            idx[i] = e - n
            sign[i] = False
    return idx, sign


def apply_automorphism(a: np.ndarray, g: int, q: int) -> np.ndarray:
    idx, sign = automorphism_tables(len(a), g)
    vals = np.where(sign, a, (-a) % q)
    out = np.empty(len(a), dtype=object)
    out[idx] = vals
    return out
