"""Encryption parameters: ring degree, coefficient-modulus chain, scale.

The modulus chain is declared as a list of prime bit sizes.  The first
entry is the base prime (consumed last), the middle entries are the
rescaling primes, and the final entry is the key-switching prime, which
is never part of a ciphertext modulus.  A chain of length L therefore
supports L - 2 multiplications.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import gmpy2

SIMULATOR = "simulator"
CKKS = "ckks"

DESK_CHAIN = (60, 40, 40, 40, 40, 60)

# Published parameter profiles: total coefficient-modulus bit budget
# mapped to (ring degree, chain). Middle primes are 40-bit to match the
# default scale; base/key-switch primes absorb the remainder.
PAPER_PROFILES = {
    420: (16384, (50,) + (40,) * 8 + (50,)),
    580: (32768, (50,) + (40,) * 12 + (50,)),
    860: (32768, (50,) + (40,) * 19 + (50,)),
}


class ParameterError(ValueError):
    """Invalid or inconsistent encryption parameters."""


@lru_cache(maxsize=None)
def _chain_primes(ring_degree: int, chain_bits: tuple[int, ...]) -> tuple[int, ...]:
    """Distinct primes p == 1 (mod 2N), one per requested bit size.

    For each bit size the smallest admissible prime above 2**bits is
    chosen, so middle primes sit just above the scale and rescaling
    keeps the scale nearly constant.  Deterministic for given inputs.
    """
    step = 2 * ring_degree
    used: set[int] = set()
    primes = []
    for bits in chain_bits:
        candidate = (1 << bits) + 1
        rem = candidate % step
        if rem != 1:
            candidate += step - rem + 1
        while candidate in used or not gmpy2.is_prime(candidate):
            candidate += step
        used.add(candidate)
        primes.append(candidate)
    return tuple(primes)


@dataclass(frozen=True)
class HeParams:
    """Parameter set shared by both backends.

    ``chain_bits`` lists prime bit sizes; the last prime is reserved for
    key switching.  ``backend`` selects the faithful CKKS implementation
    or the exact slot simulator.  ``seed`` makes key generation and
    encryption randomness reproducible; ``None`` draws OS entropy.
    """

    ring_degree: int
    chain_bits: tuple[int, ...] = DESK_CHAIN
    scale_bits: int = 40
    backend: str = SIMULATOR
    seed: int | None = None

    def __post_init__(self):
        n = self.ring_degree
        if n < 8 or n & (n - 1):
            raise ParameterError(f"ring degree must be a power of two >= 8, got {n}")
        if self.backend not in (SIMULATOR, CKKS):
            raise ParameterError(f"unknown backend {self.backend!r}")
        if len(self.chain_bits) < 2:
            raise ParameterError("modulus chain needs at least base + key-switch primes")
        object.__setattr__(self, "chain_bits", tuple(int(b) for b in self.chain_bits))
        # Primes are generated strictly above 2**bits, so equality still
        # leaves the default scale strictly inside every middle prime.
        for bits in self.chain_bits[1:-1]:
            if bits < self.scale_bits:
                raise ParameterError(
                    f"default scale 2^{self.scale_bits} must fit strictly inside "
                    f"every middle prime; found {bits}-bit prime"
                )

    @property
    def slot_count(self) -> int:
        return self.ring_degree // 2

    @property
    def max_depth(self) -> int:
        """Number of multiplications a fresh ciphertext supports."""
        return len(self.chain_bits) - 2

    @property
    def default_scale(self) -> Fraction:
        return Fraction(1 << self.scale_bits)

    @property
    def primes(self) -> tuple[int, ...]:
        """All chain primes, key-switch prime last."""
        return _chain_primes(self.ring_degree, self.chain_bits)

    @property
    def keyswitch_prime(self) -> int:
        return self.primes[-1]

    def prime_at_level(self, level: int) -> int:
        """Prime dropped when rescaling from ``level``."""
        if not 1 <= level <= self.max_depth:
            raise ParameterError(f"no rescaling prime at level {level}")
        return self.primes[level]

    def modulus_at_level(self, level: int) -> int:
        """Ciphertext coefficient modulus at ``level``."""
        if not 0 <= level <= self.max_depth:
            raise ParameterError(f"level {level} outside chain (max {self.max_depth})")
        q = 1
        for p in self.primes[: level + 1]:
            q *= p
        return q

    @property
    def total_bits(self) -> int:
        return sum(self.chain_bits)

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        h.update(f"{self.ring_degree}|{self.chain_bits}|{self.scale_bits}".encode())
        for p in self.primes:
            h.update(p.to_bytes((p.bit_length() + 7) // 8, "little"))
        return h.hexdigest()

    def with_backend(self, backend: str) -> "HeParams":
        return HeParams(self.ring_degree, self.chain_bits, self.scale_bits, backend, self.seed)


def desk_profile(backend: str = SIMULATOR, seed: int | None = None) -> HeParams:
    """Fast default: N=8192, 280-bit chain, depth 4."""
    return HeParams(8192, DESK_CHAIN, 40, backend, seed)


def paper_profile(total_bits: int, backend: str = CKKS, seed: int | None = None) -> HeParams:
    """One of the published budgets: 420, 580 or 860 total bits."""
    try:
        n, chain = PAPER_PROFILES[total_bits]
    except KeyError:
        raise ParameterError(
            f"no profile totalling {total_bits} bits; choose from {sorted(PAPER_PROFILES)}"
        ) from None
    params = HeParams(n, chain, 40, backend, seed)
    assert params.total_bits == total_bits
    return params


def test_profile(depth: int, ring_degree: int = 1024, backend: str = CKKS,
                 seed: int | None = None) -> HeParams:
    """Small insecure parameters for unit tests: exact semantics, fast ops."""
    chain = (60,) + (40,) * depth + (60,)
    return HeParams(ring_degree, chain, 40, backend, seed)


def pipeline_profile(depth: int, ring_degree: int = 8192, backend: str = CKKS,
                     seed: int | None = None) -> HeParams:
    """Desk-scale chain sized for a given pipeline depth (not security-reviewed)."""
    chain = (60,) + (40,) * depth + (60,)
    return HeParams(ring_degree, chain, 40, backend, seed)
