"""Leveled CKKS-style homomorphic encryption at desk scale.

Textbook (non-RNS) construction over Z_q[x]/(x^N + 1) with
arbitrary-precision coefficients:

* canonical-embedding encode/decode via FFT, real slots only;
* uniform-ternary secret, discrete Gaussian noise (sigma = 3.2);
* every multiplication is immediately rescaled, so ciphertexts carry an
  exact rational scale and additions demand exact scale equality;
* relinearization and rotation use hybrid key switching: a dedicated
  key-switch prime plus 56-bit digit decomposition of the switched
  polynomial, keeping the injected noise far below one scale unit.

Security caveat: parameter sets here follow standard shapes but are not
certified; small test profiles are deliberately insecure.
"""

from __future__ import annotations

import secrets
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from . import polymath as pm
from .backend import EngineBase, as_scale
from .core import CipherVector, KeyError_, KeySet, LevelError, PlainVector
from .params import HeParams

NOISE_SIGMA = 3.2
DIGIT_BITS = 56


@lru_cache(maxsize=None)
def _embedding_tables(n: int):
    """Twist vector and slot index maps for the canonical embedding."""
    m = n // 2
    zeta = np.exp(1j * np.pi / n)
    twist = zeta ** np.arange(n)
    kidx = np.empty(m, dtype=np.int64)
    e = 1
    for j in range(m):
        kidx[j] = (e - 1) // 2
        e = (e * 5) % (2 * n)
    kconj = (n - 1 - kidx) % n
    return twist, kidx, kconj


def embed_decode(coeffs: np.ndarray, n: int) -> np.ndarray:
    """Evaluate a real polynomial at the slot roots of unity."""
    twist, kidx, _ = _embedding_tables(n)
    f = n * np.fft.ifft(coeffs.astype(np.float64) * twist)
    return np.real(f[kidx])


def embed_encode(slots: np.ndarray, n: int) -> np.ndarray:
    """Inverse embedding: slot values to real polynomial coefficients."""
    twist, kidx, kconj = _embedding_tables(n)
    f = np.zeros(n, dtype=np.complex128)
    f[kidx] = slots
    f[kconj] = np.conj(slots)
    return np.real(np.fft.fft(f) / n / twist)


@dataclass
class KskKey:
    """Hybrid key-switching key: one (b, a) pair per 2^56 digit."""

    digits: list[tuple[np.ndarray, np.ndarray]]
    tag: int


class CkksEngine(EngineBase):
    name = "ckks"

    _tag_counter = 0

    def __init__(self, params: HeParams):
        super().__init__(params)
        self.n = params.ring_degree
        seed = params.seed if params.seed is not None else secrets.randbits(63)
        self._rng = np.random.default_rng(seed)
        self._ksp = params.keyswitch_prime
        self._ksk_cache: dict[tuple[int, int], list] = {}
        self._pk_cache: dict[int, tuple[np.ndarray, np.ndarray]] = {}

    # -- randomness --------------------------------------------------------

    def _ternary(self) -> np.ndarray:
        return pm.poly(self._rng.integers(-1, 2, self.n))

    def _gaussian(self) -> np.ndarray:
        return pm.poly(np.rint(self._rng.normal(0.0, NOISE_SIGMA, self.n)).astype(np.int64))

    def _uniform(self, q: int) -> np.ndarray:
        nbytes = (q.bit_length() + 7) // 8 + 8
        raw = self._rng.bytes(self.n * nbytes)
        return pm.poly([int.from_bytes(raw[i * nbytes:(i + 1) * nbytes], "little") % q
                        for i in range(self.n)])

    # -- key generation ------------------------------------------------------

    def keygen(self, rotation_steps=(), seed: int | None = None) -> KeySet:
        """Secret/public/evaluation keys plus Galois keys for the given steps."""
        if seed is not None:
            self._rng = np.random.default_rng(seed)
        q_top = self.params.modulus_at_level(self.top_level())
        s = self._ternary()
        a = self._uniform(q_top)
        e = self._gaussian()
        b = (e - pm.negacyclic_mul(s, a, q_top, 1, q_top.bit_length(), a_signed=True)) % q_top
        s_sq = pm.centered(
            pm.negacyclic_mul(s, (s % q_top), q_top, 1, q_top.bit_length(), a_signed=True),
            q_top)
        evk = self._make_ksk(s_sq, s, q_top)
        galois = {}
        steps = frozenset(self.canonical_step(k) for k in rotation_steps) - {0}
        for step in steps:
            g = pow(5, step, 2 * self.n)
            s_g = pm.apply_automorphism(s % q_top, g, q_top)
            galois[step] = (g, self._make_ksk(pm.centered(s_g, q_top), s, q_top))
        return KeySet(self._fingerprint, steps, secret=s, public=(b, a),
                      evaluation=evk, galois=galois)

    def _make_ksk(self, target: np.ndarray, s: np.ndarray, q_top: int) -> KskKey:
        """Key switching from ``target`` to ``s`` over P * q_top."""
        qp = self._ksp * q_top
        levels = (q_top.bit_length() + DIGIT_BITS - 1) // DIGIT_BITS
        digits = []
        for i in range(levels):
            a_i = self._uniform(qp)
            e_i = self._gaussian()
            b_i = (e_i + (self._ksp << (DIGIT_BITS * i)) * target
                   - pm.negacyclic_mul(s, a_i, qp, 1, qp.bit_length(), a_signed=True)) % qp
            digits.append((b_i, a_i))
        CkksEngine._tag_counter += 1
        return KskKey(digits, CkksEngine._tag_counter)

    # -- encode / decode -------------------------------------------------------

    def encode(self, values, level: int | None = None, scale=None) -> PlainVector:
        values = np.asarray(values, dtype=np.float64).ravel()
        m = self.slot_count
        if values.size > m:
            raise ValueError(f"{values.size} values exceed {m} slots")
        slots = np.zeros(m)
        slots[: values.size] = values
        level = self.top_level() if level is None else level
        if not 0 <= level <= self.top_level():
            raise LevelError(f"encode level {level} outside chain")
        scale = self.default_scale() if scale is None else as_scale(scale)
        coeffs = embed_encode(slots, self.n) * float(scale)
        ints = pm.poly(np.rint(coeffs).astype(object))
        return PlainVector(ints, level, scale, self.name)

    def decode(self, pt: PlainVector) -> np.ndarray:
        coeffs = np.asarray([float(c) for c in pt.payload])
        return embed_decode(coeffs, self.n) / float(pt.scale)

    # -- encrypt / decrypt -------------------------------------------------------

    def _public_at(self, keys: KeySet, level: int):
        key = (id(keys), level)
        if key not in self._pk_cache:
            q = self.params.modulus_at_level(level)
            b, a = keys.public
            self._pk_cache[key] = (b % q, a % q)
        return self._pk_cache[key]

    def encrypt(self, pt: PlainVector, keys: KeySet) -> CipherVector:
        self._check_keys(keys)
        if keys.public is None:
            raise KeyError_("encryption requires the public key")
        q = self.params.modulus_at_level(pt.level)
        qbits = q.bit_length()
        b, a = self._public_at(keys, pt.level)
        v = self._ternary()
        c0 = (pm.negacyclic_mul(v, b, q, 1, qbits, a_signed=True)
              + self._gaussian() + pt.payload) % q
        c1 = (pm.negacyclic_mul(v, a, q, 1, qbits, a_signed=True) + self._gaussian()) % q
        return CipherVector((c0, c1), pt.level, pt.scale, self.name)

    def decrypt(self, ct: CipherVector, keys: KeySet) -> PlainVector:
        """Recover the plaintext polynomial.

        Decrypting with a key from another key set yields garbage values
        rather than an error; only parameter mismatch is detectable.
        """
        self._check_keys(keys)
        if not keys.has_secret:
            raise KeyError_("decryption requires the secret key")
        q = self.params.modulus_at_level(ct.level)
        c0, c1 = ct.payload
        msg = (c0 + pm.negacyclic_mul(keys.secret, c1, q, 1, q.bit_length(), a_signed=True)) % q
        return PlainVector(pm.centered(msg, q), ct.level, ct.scale, self.name)

    # -- additive ops -----------------------------------------------------------

    def add(self, a: CipherVector, b: CipherVector) -> CipherVector:
        self._check_add(a, b)
        self.counters.additions += 1
        q = self.params.modulus_at_level(a.level)
        payload = ((a.payload[0] + b.payload[0]) % q, (a.payload[1] + b.payload[1]) % q)
        return CipherVector(payload, a.level, a.scale, self.name, a.layout)

    def sub(self, a: CipherVector, b: CipherVector) -> CipherVector:
        self._check_add(a, b)
        self.counters.additions += 1
        q = self.params.modulus_at_level(a.level)
        payload = ((a.payload[0] - b.payload[0]) % q, (a.payload[1] - b.payload[1]) % q)
        return CipherVector(payload, a.level, a.scale, self.name, a.layout)

    def add_plain(self, a: CipherVector, p: PlainVector) -> CipherVector:
        self._check_add(a, p)
        self.counters.additions += 1
        q = self.params.modulus_at_level(a.level)
        payload = ((a.payload[0] + p.payload) % q, a.payload[1])
        return CipherVector(payload, a.level, a.scale, self.name, a.layout)

    def negate(self, a: CipherVector) -> CipherVector:
        q = self.params.modulus_at_level(a.level)
        return CipherVector(((-a.payload[0]) % q, (-a.payload[1]) % q),
                            a.level, a.scale, self.name, a.layout)

    # -- multiplicative ops -------------------------------------------------------

    def _rescale(self, payload, level: int, scale: Fraction):
        q = self.params.modulus_at_level(level)
        p = self.params.prime_at_level(level)
        q_next = self.params.modulus_at_level(level - 1)
        self.counters.rescales += 1
        return (tuple(pm.div_round(c, q, p, q_next) for c in payload),
                level - 1, scale / p)

    def mul_plain(self, a: CipherVector, p: PlainVector) -> CipherVector:
        self._check_mul_levels(a, p)
        self.counters.plain_mults += 1
        q = self.params.modulus_at_level(a.level)
        qbits = q.bit_length()
        bound = max(1, int(max(np.max(p.payload), -np.min(p.payload)))).bit_length() + 1
        prod = tuple(pm.negacyclic_mul(p.payload, c, q, bound, qbits, a_signed=True)
                     for c in a.payload)
        payload, level, scale = self._rescale(prod, a.level, a.scale * p.scale)
        return CipherVector(payload, level, scale, self.name, a.layout)

    def mul(self, a: CipherVector, b: CipherVector, keys: KeySet) -> CipherVector:
        self._check_keys(keys)
        if keys.evaluation is None:
            raise KeyError_("cipher-cipher multiplication requires the evaluation key")
        self._check_mul_levels(a, b)
        self.counters.cipher_mults += 1
        q = self.params.modulus_at_level(a.level)
        qb = q.bit_length()
        a0, a1 = a.payload
        b0, b1 = b.payload
        d0 = pm.negacyclic_mul(a0, b0, q, qb, qb)
        d1 = (pm.negacyclic_mul(a0, b1, q, qb, qb) + pm.negacyclic_mul(a1, b0, q, qb, qb)) % q
        d2 = pm.negacyclic_mul(a1, b1, q, qb, qb)
        u0, u1 = self._keyswitch(d2, keys.evaluation, a.level)
        payload, level, scale = self._rescale(((d0 + u0) % q, (d1 + u1) % q),
                                              a.level, a.scale * b.scale)
        return CipherVector(payload, level, scale, self.name, a.layout)

    def rotate(self, a: CipherVector, k: int, keys: KeySet) -> CipherVector:
        self._check_keys(keys)
        plan = self._rotation_plan(k, keys)
        if not plan:
            return a
        q = self.params.modulus_at_level(a.level)
        c0, c1 = a.payload
        for step in plan:
            g, ksk = keys.galois[step]
            c0g = pm.apply_automorphism(c0, g, q)
            c1g = pm.apply_automorphism(c1, g, q)
            u0, u1 = self._keyswitch(c1g, ksk, a.level)
            c0, c1 = (c0g + u0) % q, u1
            self.counters.rotations += 1
        return CipherVector((c0, c1), a.level, a.scale, self.name, a.layout)

    def mod_drop(self, a: CipherVector, target_level: int) -> CipherVector:
        """Lower the level without rescaling; values and scale unchanged."""
        if target_level > a.level:
            raise LevelError("cannot raise a ciphertext level")
        if target_level < 0:
            raise LevelError("negative level")
        if target_level == a.level:
            return a
        self.counters.level_drops += 1
        q = self.params.modulus_at_level(target_level)
        return CipherVector((a.payload[0] % q, a.payload[1] % q),
                            target_level, a.scale, self.name, a.layout)

    # -- key switching -------------------------------------------------------------

    def _ksk_at_level(self, ksk: KskKey, level: int, levels_needed: int):
        key = (ksk.tag, level)
        cached = self._ksk_cache.get(key)
        if cached is None or len(cached) < levels_needed:
            qp = self._ksp * self.params.modulus_at_level(level)
            cached = [(b % qp, a % qp) for b, a in ksk.digits[:levels_needed]]
            self._ksk_cache[key] = cached
        return cached

    def _keyswitch(self, d: np.ndarray, ksk: KskKey, level: int):
        """Switch polynomial ``d`` (mod Q_level) onto the main secret key."""
        q = self.params.modulus_at_level(level)
        qp = self._ksp * q
        qpbits = qp.bit_length()
        levels_needed = (q.bit_length() + DIGIT_BITS - 1) // DIGIT_BITS
        pairs = self._ksk_at_level(ksk, level, levels_needed)
        mask = (1 << DIGIT_BITS) - 1
        coeffs = [int(c) for c in d]
        u0 = pm.zero_poly(self.n)
        u1 = pm.zero_poly(self.n)
        for i in range(levels_needed):
            shift = DIGIT_BITS * i
            digit = pm.poly([(c >> shift) & mask for c in coeffs])
            b_i, a_i = pairs[i]
            u0 = u0 + pm.negacyclic_mul(digit, b_i, qp, DIGIT_BITS, qpbits)
            u1 = u1 + pm.negacyclic_mul(digit, a_i, qp, DIGIT_BITS, qpbits)
        u0 %= qp
        u1 %= qp
        return (pm.div_round(u0, qp, self._ksp, q),
                pm.div_round(u1, qp, self._ksp, q))
