"""Exact slot-level simulator mirroring CKKS semantics without noise.

Payloads are plain float64 slot arrays.  Levels, scales, rescaling,
rotation-key coverage and the secret-key requirement for decryption all
behave exactly as in the CKKS backend, so the simulator doubles as the
ledger for multiplicative-depth and operation-count assertions.
"""

from __future__ import annotations

import secrets
from fractions import Fraction

import numpy as np

from .backend import EngineBase, as_scale
from .core import CipherVector, KeyError_, KeySet, LevelError, PlainVector
from .params import HeParams


class SlotSimulator(EngineBase):
    name = "simulator"

    def __init__(self, params: HeParams):
        super().__init__(params)

    # -- keys --------------------------------------------------------------

    def keygen(self, rotation_steps=(), seed: int | None = None) -> KeySet:
        steps = frozenset(self.canonical_step(k) for k in rotation_steps) - {0}
        return KeySet(self._fingerprint, steps,
                      secret="sim-secret", public="sim-public", evaluation="sim-evk",
                      galois={k: "sim-galois" for k in steps})

    # -- encode / encrypt ----------------------------------------------------

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
        return PlainVector(slots, level, scale, self.name)

    def decode(self, pt: PlainVector) -> np.ndarray:
        return pt.payload.copy()

    def encrypt(self, pt: PlainVector, keys: KeySet) -> CipherVector:
        self._check_keys(keys)
        return CipherVector(pt.payload.copy(), pt.level, pt.scale, self.name)

    def decrypt(self, ct: CipherVector, keys: KeySet) -> PlainVector:
        self._check_keys(keys)
        if not keys.has_secret:
            raise KeyError_("decryption requires the secret key")
        return PlainVector(ct.payload.copy(), ct.level, ct.scale, self.name)

    # -- arithmetic ----------------------------------------------------------

    def add(self, a: CipherVector, b: CipherVector) -> CipherVector:
        self._check_add(a, b)
        self.counters.additions += 1
        return CipherVector(a.payload + b.payload, a.level, a.scale, self.name, a.layout)

    def sub(self, a: CipherVector, b: CipherVector) -> CipherVector:
        self._check_add(a, b)
        self.counters.additions += 1
        return CipherVector(a.payload - b.payload, a.level, a.scale, self.name, a.layout)

    def add_plain(self, a: CipherVector, p: PlainVector) -> CipherVector:
        self._check_add(a, p)
        self.counters.additions += 1
        return CipherVector(a.payload + p.payload, a.level, a.scale, self.name, a.layout)

    def negate(self, a: CipherVector) -> CipherVector:
        return CipherVector(-a.payload, a.level, a.scale, self.name, a.layout)

    def mul(self, a: CipherVector, b: CipherVector, keys: KeySet) -> CipherVector:
        self._check_keys(keys)
        if keys.evaluation is None:
            raise KeyError_("cipher-cipher multiplication requires the evaluation key")
        self._check_mul_levels(a, b)
        self.counters.cipher_mults += 1
        self.counters.rescales += 1
        prime = self.params.prime_at_level(a.level)
        scale = a.scale * b.scale / prime
        return CipherVector(a.payload * b.payload, a.level - 1, scale, self.name, a.layout)

    def mul_plain(self, a: CipherVector, p: PlainVector) -> CipherVector:
        self._check_mul_levels(a, p)
        self.counters.plain_mults += 1
        self.counters.rescales += 1
        prime = self.params.prime_at_level(a.level)
        scale = a.scale * p.scale / prime
        return CipherVector(a.payload * p.payload, a.level - 1, scale, self.name, a.layout)

    def rotate(self, a: CipherVector, k: int, keys: KeySet) -> CipherVector:
        self._check_keys(keys)
        plan = self._rotation_plan(k, keys)
        if not plan:
            return a
        out = a.payload
        for step in plan:
            out = np.roll(out, -step)
            self.counters.rotations += 1
        return CipherVector(out, a.level, a.scale, self.name, a.layout)

    def mod_drop(self, a: CipherVector, target_level: int) -> CipherVector:
        """Lower the level without rescaling; values and scale unchanged."""
        if target_level > a.level:
            raise LevelError("cannot raise a ciphertext level")
        if target_level < 0:
            raise LevelError("negative level")
        if target_level == a.level:
            return a
        self.counters.level_drops += 1
        return CipherVector(a.payload.copy(), target_level, a.scale, self.name, a.layout)
