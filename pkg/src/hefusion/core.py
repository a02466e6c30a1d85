"""Shared value types for both homomorphic backends.

``CipherVector`` and ``PlainVector`` are immutable: every operation
returns a fresh instance, so independent ciphertext computations can be
evaluated concurrently without locking.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Any


class HeError(Exception):
    """Base class for homomorphic-evaluation errors."""


class LevelError(HeError):
    """Rescale budget exhausted or operand levels inconsistent."""


class ScaleError(HeError):
    """Operand scales differ where exact equality is required."""


class KeyError_(HeError):
    """Missing or mismatched key material."""


@dataclass(frozen=True)
class PlainVector:
    """Encoded plaintext: ``m`` slots at a given level and scale.

    ``payload`` is backend specific (slot array for the simulator,
    integer coefficient polynomial for CKKS).
    """

    payload: Any
    level: int
    scale: Fraction
    backend: str

    def __repr__(self):
        return f"PlainVector(level={self.level}, scale~2^{float(self.scale).hex()}, {self.backend})"


@dataclass(frozen=True)
class CipherVector:
    """Encrypted slot vector.

    ``level`` is the remaining rescale budget; it never increases, and
    every multiplication (cipher-cipher or plain-cipher) decreases it by
    exactly one.  ``layout`` optionally records how logical feature
    vectors map onto the slots.
    """

    payload: Any
    level: int
    scale: Fraction
    backend: str
    layout: Any = None

    def with_layout(self, layout) -> "CipherVector":
        return replace(self, layout=layout)

    def __repr__(self):
        return (f"CipherVector(level={self.level}, scale={float(self.scale):.6g}, "
                f"{self.backend}, layout={self.layout})")


@dataclass
class KeySet:
    """Key material produced by ``keygen``.

    The simulator carries no actual key data but still records which
    rotation steps were requested, so uncovered rotations fail on both
    backends alike.  ``secret`` is ``None`` in a public view.
    """

    params_fingerprint: str
    rotation_steps: frozenset[int]
    secret: Any = None
    public: Any = None
    evaluation: Any = None
    galois: dict[int, Any] = field(default_factory=dict)

    @property
    def has_secret(self) -> bool:
        return self.secret is not None

    def public_view(self) -> "KeySet":
        """Everything a server needs: no secret key."""
        return KeySet(self.params_fingerprint, self.rotation_steps,
                      None, self.public, self.evaluation, self.galois)

    def covers_step(self, step: int) -> bool:
        return step in self.rotation_steps


@dataclass
class OpCounter:
    """Running tally of atomic homomorphic operations."""

    additions: int = 0
    plain_mults: int = 0
    cipher_mults: int = 0
    rotations: int = 0
    rescales: int = 0
    level_drops: int = 0

    def snapshot(self) -> "OpCounter":
        return OpCounter(self.additions, self.plain_mults, self.cipher_mults,
                         self.rotations, self.rescales, self.level_drops)

    def since(self, before: "OpCounter") -> "OpCounter":
        return OpCounter(
            self.additions - before.additions,
            self.plain_mults - before.plain_mults,
            self.cipher_mults - before.cipher_mults,
            self.rotations - before.rotations,
            self.rescales - before.rescales,
            self.level_drops - before.level_drops,
        )

    def as_dict(self) -> dict[int, int]:
        return {
            "additions": self.additions,
            "plain_mults": self.plain_mults,
            "cipher_mults": self.cipher_mults,
            "rotations": self.rotations,
        }
