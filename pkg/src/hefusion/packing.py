"""Slot layouts: Dense and SIMD packing, concatenation, gallery repacking.

Dense packing places each logical vector twice inside a ``2*dim`` block,
``[v | v]``, so rotations up to ``dim`` slots always see a valid cyclic
window of the vector.  SIMD packing dedicates one ciphertext per feature
dimension and packs samples across slots.

The gallery repack ("preprocessing") compacts fused Dense ciphertexts,
whose blocks carry only ``gamma`` meaningful slots, into contiguous
``gamma``-slot blocks.  Each source contributes one masking
multiplication and at most one rotation, which interleaves the vector
order; the resulting permutation is recorded in the layout so labels can
follow it.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import ceil

import numpy as np

from .core import CipherVector, PlainVector

DENSE = "dense"
SIMD = "simd"


def _is_pow2(x: int) -> bool:
    return x > 0 and x & (x - 1) == 0


@dataclass(frozen=True)
class PackingLayout:
    """How logical vectors map onto ciphertext slots."""

    scheme: str
    dim: int            # padded vector width (power of two)
    slot_count: int
    valid_count: int    # number of real vectors; trailing slots are zero padding
    duplicated: bool = True

    def __post_init__(self):
        if self.scheme not in (DENSE, SIMD):
            raise ValueError(f"unknown packing scheme {self.scheme!r}")
        if self.scheme == DENSE:
            if not _is_pow2(self.dim):
                raise ValueError("dense packing requires a power-of-two vector width")
            if self.block_size > self.slot_count:
                raise ValueError(
                    f"vector width {self.dim} too wide: block {self.block_size} "
                    f"exceeds {self.slot_count} slots")

    @property
    def block_size(self) -> int:
        return 2 * self.dim

    @property
    def vectors_per_ct(self) -> int:
        if self.scheme != DENSE:
            raise ValueError("vectors_per_ct is a dense-scheme quantity")
        return self.slot_count // self.block_size

    @property
    def ciphertext_count(self) -> int:
        if self.scheme == DENSE:
            return ceil(self.valid_count / self.vectors_per_ct)
        return self.dim * ceil(self.valid_count / self.slot_count)

    @property
    def chunk_count(self) -> int:
        """SIMD: ciphertexts per dimension."""
        return ceil(self.valid_count / self.slot_count)


@dataclass(frozen=True)
class RepackedLayout:
    """Gallery form after preprocessing: contiguous gamma-slot blocks.

    ``interleave`` is the number of source ciphertexts merged per output;
    vector order is interleaved accordingly (see ``vector_at``).
    """

    fused_dim: int
    slot_count: int
    valid_count: int
    interleave: int          # sources per output = 2*dim/gamma
    source_vectors_per_ct: int

    @property
    def blocks_per_ct(self) -> int:
        return self.slot_count // self.fused_dim

    @property
    def ciphertext_count(self) -> int:
        return ceil(self.valid_count * self.fused_dim / self.slot_count)

    def position_of(self, vec_index: int) -> tuple[int, int]:
        """(ciphertext index, block index) of a pre-repack vector index."""
        f, j = divmod(vec_index, self.source_vectors_per_ct)
        o, i = divmod(f, self.interleave)
        return o, j * self.interleave + i

    def vector_at(self, ct_index: int, block: int) -> int:
        j, i = divmod(block, self.interleave)
        return (ct_index * self.interleave + i) * self.source_vectors_per_ct + j

    def slot_of(self, vec_index: int) -> tuple[int, int]:
        o, k = self.position_of(vec_index)
        return o, k * self.fused_dim


# -- packing -----------------------------------------------------------------


def pack_dense(vectors, engine, level=None, scale=None) -> tuple[list[PlainVector], PackingLayout]:
    """Pack an ``n x dim`` matrix into duplicated Dense blocks."""
    vectors = np.atleast_2d(np.asarray(vectors, dtype=np.float64))
    n, dim = vectors.shape
    m = engine.slot_count
    layout = PackingLayout(DENSE, dim, m, n)
    l = layout.vectors_per_ct
    plains = []
    for c in range(layout.ciphertext_count):
        slots = np.zeros(m)
        for j in range(l):
            idx = c * l + j
            if idx >= n:
                break
            base = j * layout.block_size
            slots[base:base + dim] = vectors[idx]
            slots[base + dim:base + 2 * dim] = vectors[idx]
        plains.append(engine.encode(slots, level, scale))
    return plains, layout


def unpack_dense(slot_arrays, layout: PackingLayout) -> np.ndarray:
    """Inverse of ``pack_dense`` on decoded slot arrays (primary copies)."""
    out = np.zeros((layout.valid_count, layout.dim))
    l = layout.vectors_per_ct
    for idx in range(layout.valid_count):
        c, j = divmod(idx, l)
        base = j * layout.block_size
        out[idx] = slot_arrays[c][base:base + layout.dim]
    return out


def pack_simd(vectors, engine, level=None, scale=None) -> tuple[list[list[PlainVector]], PackingLayout]:
    """Pack an ``n x dim`` matrix as one plaintext per dimension per m-chunk.

    Returns a nested list indexed ``[dimension][chunk]``.
    """
    vectors = np.atleast_2d(np.asarray(vectors, dtype=np.float64))
    n, dim = vectors.shape
    m = engine.slot_count
    layout = PackingLayout(SIMD, dim, m, n, duplicated=False)
    plains = []
    for i in range(dim):
        per_dim = []
        for c in range(layout.chunk_count):
            per_dim.append(engine.encode(vectors[c * m:(c + 1) * m, i], level, scale))
        plains.append(per_dim)
    return plains, layout


def unpack_simd(slot_arrays, layout: PackingLayout) -> np.ndarray:
    out = np.zeros((layout.valid_count, layout.dim))
    m = layout.slot_count
    for i in range(layout.dim):
        for c in range(layout.chunk_count):
            lo = c * m
            hi = min(lo + m, layout.valid_count)
            out[lo:hi, i] = slot_arrays[i][c][: hi - lo]
    return out


# -- concatenation -------------------------------------------------------------


def concat_steps(alpha: int, slot_count: int) -> set[int]:
    return {(-alpha) % slot_count}


def concat_dense(engine, ct_x: CipherVector, ct_y: CipherVector,
                 alpha: int, beta: int, dim: int, keys) -> CipherVector:
    """Concatenate zero-padded Dense blocks: right-rotate Y by alpha, add.

    Both the primary and the duplicate copy land at the correct offsets,
    so the result blocks are ``[x||y | x||y]``.  No multiplications.
    """
    lx, ly = ct_x.layout, ct_y.layout
    if lx is None or ly is None or lx.scheme != DENSE or ly.scheme != DENSE:
        raise ValueError("concat_dense requires dense-packed operands")
    if lx.dim != dim or ly.dim != dim or lx.valid_count != ly.valid_count:
        raise ValueError("concat_dense operands have mismatched layouts")
    if alpha + beta != dim:
        raise ValueError(f"modality widths {alpha}+{beta} must equal the packed width {dim}")
    shifted = engine.rotate(ct_y, -alpha, keys)
    return engine.add(ct_x, shifted)


def concat_simd(cts_x: list, cts_y: list) -> list:
    """SIMD concatenation is free: one ordered array of per-dimension cts."""
    if cts_x and cts_y and len(cts_x[0]) != len(cts_y[0]):
        raise ValueError("SIMD operands pack different sample counts")
    return list(cts_x) + list(cts_y)


# -- gallery repacking ------------------------------------------------------------


def repack_steps(gamma: int, dim: int, slot_count: int) -> set[int]:
    g = (2 * dim) // gamma
    return {(-i * gamma) % slot_count for i in range(1, g)}


def block_mask(layout: PackingLayout, gamma: int) -> np.ndarray:
    """Ones over the first ``gamma`` slots of every block."""
    mask = np.zeros(layout.slot_count)
    for j in range(layout.vectors_per_ct):
        base = j * layout.block_size
        mask[base:base + gamma] = 1.0
    return mask


def repack_for_matching(engine, fused_cts: list[CipherVector], gamma: int,
                        layout: PackingLayout, keys) -> tuple[list[CipherVector], RepackedLayout]:
    """Compact fused Dense ciphertexts into contiguous gamma-blocks.

    One masking plain-mult per source (depth 1), then a single rotation
    and addition per source beyond the first in each output group.
    """
    if not _is_pow2(gamma):
        raise ValueError("gamma must be a power of two")
    if gamma > 2 * layout.dim:
        raise ValueError(f"gamma {gamma} exceeds block size {2 * layout.dim}")
    m = layout.slot_count
    g = (2 * layout.dim) // gamma
    mask = block_mask(layout, gamma)
    repacked = RepackedLayout(gamma, m, layout.valid_count, g, layout.vectors_per_ct)
    outputs = []
    for o in range(repacked.ciphertext_count):
        acc = None
        for i in range(g):
            f = o * g + i
            if f >= len(fused_cts):
                break
            pt = engine.encode(mask, fused_cts[f].level, engine.default_scale())
            masked = engine.mul_plain(fused_cts[f], pt)
            if i:
                masked = engine.rotate(masked, -i * gamma, keys)
            acc = masked if acc is None else engine.add(acc, masked)
        outputs.append(acc)
    return outputs, repacked
