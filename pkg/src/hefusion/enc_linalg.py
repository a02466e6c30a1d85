"""Encrypted linear algebra over packed vectors.

Four plaintext-matrix x ciphertext-vector strategies, the rotate-and-sum
fold, probe replication and encrypted dot-product scoring.

The hybrid method's diagonal plaintexts are extended over the full
duplicated block, reading column indices mod the vector width.  With the
``[v | v]`` layout this replicates the projection result periodically
through the first half of every block, which is what lets normalization
broadcast the squared norm without spending a masking level.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import CipherVector, LevelError
from .packing import DENSE, PackingLayout, RepackedLayout, _is_pow2


@dataclass(frozen=True)
class ProjectionMatrix:
    """A fusion matrix with its encrypted-domain encodings.

    ``matrix`` is ``out_dim x in_dim`` (gamma x delta).  All encodings
    are derived views of the same matrix; decoding any of them recovers
    ``matrix`` exactly.
    """

    matrix: np.ndarray

    def __post_init__(self):
        m = np.atleast_2d(np.asarray(self.matrix, dtype=np.float64))
        object.__setattr__(self, "matrix", m)
        gamma, delta = m.shape
        if gamma > delta:
            raise ValueError(f"projection must not raise dimension: {gamma} > {delta}")

    @property
    def out_dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def in_dim(self) -> int:
        return self.matrix.shape[1]

    def require_pow2(self):
        if not (_is_pow2(self.out_dim) and _is_pow2(self.in_dim)):
            raise ValueError("this method needs power-of-two dimensions "
                             f"(got {self.matrix.shape}); zero-pad first")

    def padded(self, gamma: int | None = None, delta: int | None = None) -> "ProjectionMatrix":
        gamma = gamma or 1 << (self.out_dim - 1).bit_length()
        delta = delta or 1 << (self.in_dim - 1).bit_length()
        out = np.zeros((gamma, delta))
        out[: self.out_dim, : self.in_dim] = self.matrix
        return ProjectionMatrix(out)

    def hybrid_diagonals(self) -> np.ndarray:
        """gamma extended diagonals of length delta: d_t[j] = P[j % gamma, (j+t) % delta]."""
        gamma, delta = self.matrix.shape
        j = np.arange(delta)
        return np.stack([self.matrix[j % gamma, (j + t) % delta] for t in range(gamma)])

    def square_diagonals(self) -> np.ndarray:
        """delta diagonals of the zero-padded square matrix."""
        gamma, delta = self.matrix.shape
        sq = np.zeros((delta, delta))
        sq[:gamma] = self.matrix
        j = np.arange(delta)
        return np.stack([sq[j, (j + t) % delta] for t in range(delta)])

    def rows(self) -> np.ndarray:
        return self.matrix.copy()

    def simd_elements(self) -> np.ndarray:
        """Scalar grid for repeated-element SIMD encoding."""
        return self.matrix.copy()


@dataclass
class ScoreBlock:
    """Encrypted match scores plus the slot positions that carry them."""

    ciphertexts: list[CipherVector]
    positions: list[tuple[int, int]]   # (ciphertext index, slot) per gallery entry
    valid_count: int


# -- primitives ---------------------------------------------------------------


def rotate_sum_steps(span: int) -> set[int]:
    return {1 << k for k in range((span - 1).bit_length())}


def rotate_sum(engine, ct: CipherVector, span: int, keys) -> CipherVector:
    """Fold so each slot j holds the sum of slots j..j+span-1 (cyclic).

    Slot 0 of every aligned span window contractually holds that
    window's total; other slots hold shifted window sums.
    """
    if not _is_pow2(span):
        raise ValueError("rotate_sum span must be a power of two")
    for k in range((span - 1).bit_length()):
        ct = engine.add(ct, engine.rotate(ct, 1 << k, keys))
    return ct


def _tile_blocks(pattern: np.ndarray, layout: PackingLayout) -> np.ndarray:
    return np.tile(pattern, layout.vectors_per_ct)


def _require_dense(ct: CipherVector) -> PackingLayout:
    layout = ct.layout
    if layout is None or layout.scheme != DENSE or not layout.duplicated:
        raise ValueError("this method requires duplicated dense packing")
    return layout


# -- matrix-vector strategies ----------------------------------------------------


def hybrid_steps(gamma: int, delta: int) -> set[int]:
    steps = set(range(1, gamma))
    steps |= {gamma << k for k in range((delta // gamma - 1).bit_length())}
    return steps


def matvec_hybrid(engine, ct: CipherVector, proj: ProjectionMatrix, keys) -> CipherVector:
    """Diagonal-encoded product for short wide matrices (1 level).

    Leaves ``P v`` replicated through slots ``0..delta`` of every block
    (period gamma), garbage beyond.
    """
    layout = _require_dense(ct)
    proj.require_pow2()
    gamma, delta = proj.matrix.shape
    if delta != layout.dim:
        raise ValueError(f"matrix width {delta} != packed width {layout.dim}")
    diags = proj.hybrid_diagonals()
    acc = None
    for t in range(gamma):
        rotated = engine.rotate(ct, t, keys)
        pattern = np.concatenate([diags[t], diags[t]])
        pt = engine.encode(_tile_blocks(pattern, layout), ct.level, engine.default_scale())
        term = engine.mul_plain(rotated, pt)
        acc = term if acc is None else engine.add(acc, term)
    for k in range((delta // gamma - 1).bit_length()):
        acc = engine.add(acc, engine.rotate(acc, gamma << k, keys))
    return acc


def matvec_simd(engine, cts: list[list[CipherVector]], proj: ProjectionMatrix) -> list[list[CipherVector]]:
    """Repeated-element product: gamma*delta plain mults, no rotations."""
    gamma, delta = proj.matrix.shape
    if len(cts) != delta:
        raise ValueError(f"expected {delta} per-dimension ciphertexts, got {len(cts)}")
    m = engine.slot_count
    chunks = len(cts[0])
    out = []
    for i in range(gamma):
        per_dim = []
        for c in range(chunks):
            acc = None
            for j in range(delta):
                pt = engine.encode(np.full(m, proj.matrix[i, j]),
                                   cts[j][c].level, engine.default_scale())
                term = engine.mul_plain(cts[j][c], pt)
                acc = term if acc is None else engine.add(acc, term)
            per_dim.append(acc)
        out.append(per_dim)
    return out


def naive_steps(delta: int) -> set[int]:
    return rotate_sum_steps(delta)


def matvec_naive(engine, ct: CipherVector, proj: ProjectionMatrix, keys) -> CipherVector:
    """Row-wise inner products, then mask-and-add (2 levels)."""
    layout = _require_dense(ct)
    proj.require_pow2()
    gamma, delta = proj.matrix.shape
    if delta != layout.dim:
        raise ValueError(f"matrix width {delta} != packed width {layout.dim}")
    if ct.level < 2:
        raise LevelError("naive method consumes two levels")
    acc = None
    for i in range(gamma):
        pattern = np.concatenate([proj.matrix[i], proj.matrix[i]])
        pt = engine.encode(_tile_blocks(pattern, layout), ct.level, engine.default_scale())
        prod = engine.mul_plain(ct, pt)
        prod = rotate_sum(engine, prod, delta, keys)
        onehot = np.zeros(layout.block_size)
        onehot[i] = 1.0
        mask = engine.encode(_tile_blocks(onehot, layout), prod.level, engine.default_scale())
        term = engine.mul_plain(prod, mask)
        acc = term if acc is None else engine.add(acc, term)
    return acc


def diagonal_steps(delta: int) -> set[int]:
    return set(range(1, delta))


def matvec_diagonal(engine, ct: CipherVector, proj: ProjectionMatrix, keys) -> CipherVector:
    """Square diagonal method on the zero-padded matrix (1 level).

    Output rows beyond the true output dimension come from zero-pad rows
    and are exactly zero on the simulator.
    """
    layout = _require_dense(ct)
    proj.require_pow2()
    gamma, delta = proj.matrix.shape
    if delta != layout.dim:
        raise ValueError(f"matrix width {delta} != packed width {layout.dim}")
    diags = proj.square_diagonals()
    acc = None
    for t in range(delta):
        rotated = engine.rotate(ct, t, keys)
        pattern = np.concatenate([diags[t], diags[t]])
        pt = engine.encode(_tile_blocks(pattern, layout), ct.level, engine.default_scale())
        term = engine.mul_plain(rotated, pt)
        acc = term if acc is None else engine.add(acc, term)
    return acc


# -- matching -----------------------------------------------------------------


def replicate_steps(gamma: int, slot_count: int) -> set[int]:
    return {(-(gamma << k)) % slot_count for k in range((slot_count // gamma - 1).bit_length())}


def replicate_probe(engine, ct: CipherVector, gamma: int, keys) -> CipherVector:
    """Broadcast the first gamma slots into every gamma block (1 level).

    Run once per authentication; the masking level plays the same role
    as the gallery-side preprocessing level.
    """
    m = engine.slot_count
    if not _is_pow2(gamma) or gamma > m:
        raise ValueError("gamma must be a power of two within the slot count")
    mask = np.zeros(m)
    mask[:gamma] = 1.0
    out = engine.mul_plain(ct, engine.encode(mask, ct.level, engine.default_scale()))
    for k in range((m // gamma - 1).bit_length()):
        out = engine.add(out, engine.rotate(out, -(gamma << k), keys))
    return out


def dot_scores_dense(engine, probe: CipherVector, gallery_cts: list[CipherVector],
                     gamma: int, repacked: RepackedLayout, keys) -> ScoreBlock:
    """One cipher mult plus a gamma fold per gallery ciphertext (1 level).

    The probe must be replicated into every gamma block; the gallery must
    be in repacked matching form.  Inputs are taken as already
    normalized; otherwise the outputs are plain dot products.
    """
    cts = []
    for g_ct in gallery_cts:
        prod = engine.mul(probe, g_ct, keys)
        cts.append(rotate_sum(engine, prod, gamma, keys))
    positions = [repacked.slot_of(i) for i in range(repacked.valid_count)]
    return ScoreBlock(cts, positions, repacked.valid_count)


def dot_scores_simd(engine, probe_cts: list[list[CipherVector]],
                    gallery_cts: list[list[CipherVector]], gamma: int, keys,
                    valid_count: int) -> ScoreBlock:
    """gamma cipher mults and gamma-1 additions per chunk; score per slot."""
    if len(probe_cts) != gamma or len(gallery_cts) != gamma:
        raise ValueError(f"expected {gamma} per-dimension ciphertexts")
    chunks = len(gallery_cts[0])
    cts = []
    for c in range(chunks):
        acc = None
        for i in range(gamma):
            term = engine.mul(probe_cts[i][c], gallery_cts[i][c], keys)
            acc = term if acc is None else engine.add(acc, term)
        cts.append(acc)
    m = engine.slot_count
    positions = [(i // m, i % m) for i in range(valid_count)]
    return ScoreBlock(cts, positions, valid_count)


def extract_scores(engine, block: ScoreBlock, keys) -> np.ndarray:
    """Client-side helper: decrypt and gather the score slots."""
    decoded = [engine.decode(engine.decrypt(ct, keys)) for ct in block.ciphertexts]
    return np.array([decoded[c][s] for c, s in block.positions])
