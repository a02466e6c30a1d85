"""Common engine behaviour shared by the CKKS backend and the simulator.

Both engines expose the same operation set with identical level/scale
bookkeeping, so any pipeline built against one runs unchanged on the
other.  Alignment rules:

* addition requires operands at equal level and exactly equal scale;
* multiplication requires equal level (>= 1) and rescales immediately,
  so the result scale is ``s_a * s_b / prime``;
* ``mod_drop`` lowers the level without touching values or scale and is
  the helper callers use to align operands from different depths.
"""

from __future__ import annotations

from fractions import Fraction

from .core import CipherVector, KeySet, KeyError_, LevelError, OpCounter, PlainVector, ScaleError
from .params import HeParams


def as_scale(scale) -> Fraction:
    if isinstance(scale, Fraction):
        return scale
    if isinstance(scale, int):
        return Fraction(scale)
    if isinstance(scale, float):
        return Fraction(scale)
    raise TypeError(f"bad scale type {type(scale)}")


class EngineBase:
    name = "base"

    def __init__(self, params: HeParams):
        self.params = params
        self.counters = OpCounter()
        self._fingerprint = params.fingerprint()

    # -- bookkeeping -----------------------------------------------------

    @property
    def slot_count(self) -> int:
        return self.params.slot_count

    def _check_keys(self, keys: KeySet):
        if keys.params_fingerprint != self._fingerprint:
            raise KeyError_("key set was generated under different parameters")

    def _check_add(self, a, b):
        if a.level != b.level:
            raise LevelError(f"addition level mismatch: {a.level} vs {b.level}")
        if a.scale != b.scale:
            raise ScaleError("addition requires exactly equal scales; "
                             "align operands with mod_drop/mul_plain first")

    def _check_mul_levels(self, a, b):
        if a.level != b.level:
            raise LevelError(f"multiplication level mismatch: {a.level} vs {b.level}")
        if a.level < 1:
            raise LevelError("level exhausted: modulus chain too short for this circuit")

    def canonical_step(self, k: int) -> int:
        return k % self.slot_count

    def _rotation_plan(self, k: int, keys: KeySet) -> list[int]:
        """Sequence of held steps composing a rotation by ``k``.

        Uses the exact key when present, otherwise greedily decomposes
        into held steps.  Raises if no decomposition exists.
        """
        k = self.canonical_step(k)
        if k == 0:
            return []
        if keys.covers_step(k):
            return [k]
        plan = []
        remaining = k
        for step in sorted(keys.rotation_steps, reverse=True):
            if step == 0:
                continue
            while remaining >= step:
                plan.append(step)
                remaining -= step
        if remaining != 0:
            raise KeyError_(f"no Galois key covers rotation step {k} "
                            f"and no decomposition exists from {sorted(keys.rotation_steps)}")
        return plan

    # -- default-scale helpers -------------------------------------------

    def default_scale(self) -> Fraction:
        return self.params.default_scale

    def top_level(self) -> int:
        return self.params.max_depth


def make_engine(params: HeParams):
    """Instantiate the engine selected by ``params.backend``."""
    from .ckks import CkksEngine
    from .simulator import SlotSimulator

    if params.backend == "ckks":
        return CkksEngine(params)
    return SlotSimulator(params)
