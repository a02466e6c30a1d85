"""Inverse square root on a fixed interval, and encrypted normalization.

``1/sqrt(x)`` is approximated on ``[a, b]`` by a composition of
low-degree polynomials fitted either by relative-error weighted least
squares on Chebyshev nodes or by a discrete minimax exchange.  The
encrypted evaluator builds ciphertext powers as a sequential chain, so a
stage of degree d consumes exactly d levels and the whole normalization
stage consumes 2 + d: one squaring to form the squared norm, d for the
polynomial, one final Hadamard product.

Goldschmidt's iteration is provided for comparison: a linear initial fit
plus one Newton step (4 levels), then three levels per iteration.  It is
more accurate than the polynomials but much deeper.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np

from .core import CipherVector, LevelError
from .enc_linalg import rotate_sum

DEFAULT_INTERVAL = (0.05, 3.0)
FIT_NODES = 512
ERROR_GRID = 10_000


def _chebyshev_nodes(a: float, b: float, n: int) -> np.ndarray:
    j = np.arange(n)
    return (a + b) / 2 + (b - a) / 2 * np.cos(np.pi * (2 * j + 1) / (2 * n))


def _weighted_lstsq(x: np.ndarray, t: np.ndarray, degree: int) -> np.ndarray:
    """Least squares with relative-error weighting; monomial coefficients."""
    w = 1.0 / np.abs(t)
    v = np.vander(x, degree + 1, increasing=True)
    coeffs, _, rank, _ = np.linalg.lstsq(v * w[:, None], t * w, rcond=None)
    if rank < degree + 1:
        raise ValueError("singular normal equations: nodes do not determine the fit")
    return coeffs


def _remez_discrete(x: np.ndarray, t: np.ndarray, degree: int,
                    iterations: int = 60) -> np.ndarray:
    """Minimax (relative error) polynomial on a discrete node set.

    Classic exchange: solve the alternation system on degree+2
    references, move references to the error extrema, repeat.
    """
    order = np.argsort(x)
    x, t = x[order], t[order]
    w = np.abs(t)
    n = len(x)
    refs = np.unique(np.linspace(0, n - 1, degree + 2).round().astype(int))
    if len(refs) < degree + 2:
        raise ValueError("not enough distinct nodes for minimax fit")
    coeffs = None
    last_e = None
    for _ in range(iterations):
        a_mat = np.vander(x[refs], degree + 1, increasing=True)
        signs = (-1.0) ** np.arange(len(refs))
        sys = np.hstack([a_mat, (signs * w[refs])[:, None]])
        try:
            sol = np.linalg.solve(sys, t[refs])
        except np.linalg.LinAlgError:
            raise ValueError("singular alternation system") from None
        coeffs, e = sol[:-1], sol[-1]
        err = (np.vander(x, degree + 1, increasing=True) @ coeffs - t) / w
        # extremum of each constant-sign run; runs alternate by construction
        sign = np.sign(err)
        run_start = np.flatnonzero(np.diff(sign) != 0) + 1
        bounds = np.concatenate([[0], run_start, [n]])
        extrema = []
        for lo, hi in zip(bounds[:-1], bounds[1:]):
            seg = np.arange(lo, hi)
            extrema.append(seg[np.argmax(np.abs(err[seg]))])
        extrema = np.array(extrema)
        while len(extrema) > degree + 2:
            mags = np.abs(err[extrema])
            k = np.argmin(mags)
            if k == 0 or k == len(extrema) - 1:
                extrema = np.delete(extrema, k)
            else:
                drop = k - 1 if mags[k - 1] <= mags[k + 1] else k + 1
                extrema = np.delete(extrema, [min(k, drop), max(k, drop)])
        if len(extrema) < degree + 2:
            break
        refs = extrema
        if last_e is not None and abs(abs(e) - last_e) <= 1e-13 * max(abs(e), 1e-30):
            break
        last_e = abs(e)
    return coeffs


@dataclass(frozen=True)
class InvSqrtApprox:
    """Composite polynomial approximation of 1/sqrt(x) on an interval."""

    interval: tuple[float, float]
    stages: tuple[tuple[float, ...], ...]
    fit_method: str
    max_rel_error: float
    nodes: int = FIT_NODES

    @property
    def total_degree(self) -> int:
        d = 1
        for c in self.stages:
            d *= len(c) - 1
        return d

    @property
    def declared_depth(self) -> int:
        """Levels the encrypted evaluator consumes (sequential power chains)."""
        return sum(len(c) - 1 for c in self.stages)

    def evaluate(self, x):
        y = np.asarray(x, dtype=np.float64)
        for coeffs in self.stages:
            y = np.polynomial.polynomial.polyval(y, coeffs)
        return y

    __call__ = evaluate

    def derivative(self, x):
        """d/dx of the composition, by the chain rule."""
        y = np.asarray(x, dtype=np.float64)
        grad = np.ones_like(y)
        for coeffs in self.stages:
            dcoeffs = np.polynomial.polynomial.polyder(coeffs)
            grad = grad * np.polynomial.polynomial.polyval(y, dcoeffs)
            y = np.polynomial.polynomial.polyval(y, coeffs)
        return grad

    def grid_max_rel_error(self, points: int = ERROR_GRID) -> float:
        a, b = self.interval
        x = np.linspace(a, b, points)
        truth = 1.0 / np.sqrt(x)
        return float(np.max(np.abs(self.evaluate(x) - truth) / truth))

    def to_record(self) -> str:
        """Text record shared bit-for-bit between trainer and inference."""
        doc = {
            "kind": "inv_sqrt_approx",
            "interval": [float.hex(float(v)) for v in self.interval],
            "stages": [[float.hex(float(c)) for c in stage] for stage in self.stages],
            "fit_method": self.fit_method,
            "max_rel_error": float.hex(float(self.max_rel_error)),
            "nodes": self.nodes,
        }
        return json.dumps(doc, indent=1, sort_keys=True)

    @classmethod
    def from_record(cls, text: str) -> "InvSqrtApprox":
        doc = json.loads(text)
        if doc.get("kind") != "inv_sqrt_approx":
            raise ValueError("not an inverse-sqrt approximation record")
        return cls(
            interval=tuple(float.fromhex(v) for v in doc["interval"]),
            stages=tuple(tuple(float.fromhex(c) for c in stage) for stage in doc["stages"]),
            fit_method=doc["fit_method"],
            max_rel_error=float.fromhex(doc["max_rel_error"]),
            nodes=doc["nodes"],
        )

    def record_hash(self) -> str:
        return hashlib.sha256(self.to_record().encode()).hexdigest()


def fit_inv_sqrt(degree: int, k: int = 1, interval=DEFAULT_INTERVAL,
                 method: str = "least_squares", nodes: int = FIT_NODES) -> InvSqrtApprox:
    """Fit a k-stage composition of degree-``degree`` polynomials to 1/sqrt.

    Stages are fitted greedily: each maps the previous composition's
    outputs onto the true target, so adding a stage never increases the
    error (the identity is in the search space).
    """
    a, b = float(interval[0]), float(interval[1])
    if not (b > a > 0):
        raise ValueError(f"degenerate interval [{a}, {b}]: need b > a > 0")
    if degree < 1 or k < 1:
        raise ValueError("degree and stage count must be at least 1")
    if method not in ("least_squares", "minimax"):
        raise ValueError(f"unknown fit method {method!r}")
    x = _chebyshev_nodes(a, b, nodes)
    target = 1.0 / np.sqrt(x)
    current = x.copy()
    stages = []
    for _ in range(k):
        if method == "least_squares":
            coeffs = _weighted_lstsq(current, target, degree)
        else:
            coeffs = _remez_discrete(current, target, degree)
        stages.append(tuple(float(c) for c in coeffs))
        current = np.polynomial.polynomial.polyval(current, coeffs)
    approx = InvSqrtApprox((a, b), tuple(stages), method, 0.0, nodes)
    err = approx.grid_max_rel_error()
    return InvSqrtApprox((a, b), tuple(stages), method, err, nodes)


# -- Goldschmidt ---------------------------------------------------------------


@dataclass(frozen=True)
class GoldschmidtConfig:
    """Iterative inverse-sqrt: linear init + one Newton step, then
    multiplicative refinement r=(3-b)/2, y<-y*r, b<-b*r^2."""

    iterations: int
    interval: tuple[float, float]
    init_coeffs: tuple[float, float]   # (constant, slope)

    @property
    def depth(self) -> int:
        """Levels consumed by the encrypted evaluation."""
        return 4 if self.iterations == 0 else 5 + 3 * self.iterations

    def evaluate(self, s):
        s = np.asarray(s, dtype=np.float64)
        c0, c1 = self.init_coeffs
        y = c1 * s + c0
        y = y * (1.5 - 0.5 * s * y * y)
        if self.iterations == 0:
            return y
        b = s * y * y
        for _ in range(self.iterations):
            r = (3.0 - b) / 2.0
            y = y * r
            b = b * r * r
        return y

    __call__ = evaluate

    def grid_max_rel_error(self, points: int = ERROR_GRID) -> float:
        a, b = self.interval
        x = np.linspace(a, b, points)
        truth = 1.0 / np.sqrt(x)
        return float(np.max(np.abs(self.evaluate(x) - truth) / truth))


def fit_goldschmidt(iterations: int = 3, interval=DEFAULT_INTERVAL,
                    nodes: int = FIT_NODES) -> GoldschmidtConfig:
    a, b = float(interval[0]), float(interval[1])
    if not (b > a > 0):
        raise ValueError(f"degenerate interval [{a}, {b}]: need b > a > 0")
    if iterations < 0:
        raise ValueError("iteration count must be non-negative")
    x = _chebyshev_nodes(a, b, nodes)
    coeffs = _weighted_lstsq(x, 1.0 / np.sqrt(x), 1)
    return GoldschmidtConfig(iterations, (a, b), (float(coeffs[0]), float(coeffs[1])))


# -- encrypted evaluation ---------------------------------------------------------


def _broadcast(engine, value: float, level: int, scale) -> "PlainVector":
    return engine.encode(np.full(engine.slot_count, value), level, scale)


def _eval_stage_encrypted(engine, y: CipherVector, coeffs, keys) -> CipherVector:
    degree = len(coeffs) - 1
    if y.level < degree:
        raise LevelError(f"stage of degree {degree} needs {degree} levels, have {y.level}")
    scale = engine.default_scale()
    target_level = y.level - degree
    powers = [y]
    for _ in range(2, degree + 1):
        prev = powers[-1]
        powers.append(engine.mul(prev, engine.mod_drop(y, prev.level), keys))
    acc = None
    for k in range(1, degree + 1):
        p = powers[k - 1]
        prime = engine.params.prime_at_level(p.level)
        coeff_scale = scale * prime / p.scale
        term = engine.mul_plain(p, _broadcast(engine, coeffs[k], p.level, coeff_scale))
        term = engine.mod_drop(term, target_level)
        acc = term if acc is None else engine.add(acc, term)
    return engine.add_plain(acc, _broadcast(engine, coeffs[0], target_level, scale))


def eval_poly_encrypted(engine, ct_s: CipherVector, approx: InvSqrtApprox, keys) -> CipherVector:
    """Apply the composite polynomial slotwise.

    Coefficient plaintexts are encoded at scales chosen so every term
    lands at the default scale; each stage consumes exactly its degree
    in levels and emits its output at the default scale.
    """
    if ct_s.level < approx.declared_depth:
        raise LevelError(f"approximation needs {approx.declared_depth} levels, "
                         f"ciphertext has {ct_s.level}")
    out = ct_s
    for coeffs in approx.stages:
        out = _eval_stage_encrypted(engine, out, coeffs, keys)
    return out


def goldschmidt_inv_sqrt(engine, ct_s: CipherVector, cfg: GoldschmidtConfig, keys) -> CipherVector:
    """Encrypted Goldschmidt refinement of 1/sqrt(s)."""
    if ct_s.level < cfg.depth:
        raise LevelError(f"goldschmidt needs {cfg.depth} levels, ciphertext has {ct_s.level}")
    scale = engine.default_scale()
    c0, c1 = cfg.init_coeffs
    y = engine.mul_plain(ct_s, _broadcast(engine, c1, ct_s.level, scale))
    y = engine.add_plain(y, _broadcast(engine, c0, y.level, y.scale))
    y_sq = engine.mul(y, y, keys)
    half_s = engine.mul_plain(ct_s, _broadcast(engine, 0.5, ct_s.level, scale))
    t = engine.mul(y_sq, engine.mod_drop(half_s, y_sq.level), keys)
    w = engine.add_plain(engine.negate(t), _broadcast(engine, 1.5, t.level, t.scale))
    y = engine.mul(engine.mod_drop(y, w.level), w, keys)
    if cfg.iterations == 0:
        return y
    y_sq = engine.mul(y, y, keys)
    b = engine.mul(y_sq, engine.mod_drop(ct_s, y_sq.level), keys)
    for _ in range(cfg.iterations):
        r = engine.mul_plain(b, _broadcast(engine, -0.5, b.level, scale))
        r = engine.add_plain(r, _broadcast(engine, 1.5, r.level, r.scale))
        y = engine.mul(engine.mod_drop(y, r.level), r, keys)
        r_sq = engine.mul(r, r, keys)
        b = engine.mul(engine.mod_drop(b, r_sq.level), r_sq, keys)
    return y


def normalizer_depth(normalizer) -> int:
    if isinstance(normalizer, InvSqrtApprox):
        return normalizer.declared_depth
    return normalizer.depth


def stage_depth(normalizer) -> int:
    """Levels the whole normalization stage consumes: 2 + d."""
    return 2 + normalizer_depth(normalizer)


def _apply_inv_sqrt(engine, ct_s, normalizer, keys) -> CipherVector:
    if isinstance(normalizer, InvSqrtApprox):
        return eval_poly_encrypted(engine, ct_s, normalizer, keys)
    return goldschmidt_inv_sqrt(engine, ct_s, normalizer, keys)


def normalize_encrypted(engine, ct_z: CipherVector, normalizer, gamma: int, keys) -> CipherVector:
    """Scale fused Dense blocks to approximately unit norm.

    Relies on the projection having replicated the fused vector through
    each block's first half, so the squared-norm fold lands valid sums
    on every slot the final product reads.  Accuracy holds for squared
    norms inside the fitted interval; out-of-range inputs are processed
    without clamping and carry no guarantee.
    """
    sq = engine.mul(ct_z, ct_z, keys)
    s = rotate_sum(engine, sq, gamma, keys)
    fs = _apply_inv_sqrt(engine, s, normalizer, keys)
    return engine.mul(engine.mod_drop(ct_z, fs.level), fs, keys)


def normalize_encrypted_simd(engine, cts: list[list[CipherVector]], normalizer, keys) -> list:
    """SIMD variant: per-chunk squared-norm sum, then per-dimension product."""
    gamma = len(cts)
    chunks = len(cts[0])
    out = [[None] * chunks for _ in range(gamma)]
    for c in range(chunks):
        s = None
        for i in range(gamma):
            sq = engine.mul(cts[i][c], cts[i][c], keys)
            s = sq if s is None else engine.add(s, sq)
        fs = _apply_inv_sqrt(engine, s, normalizer, keys)
        for i in range(gamma):
            out[i][c] = engine.mul(engine.mod_drop(cts[i][c], fs.level), fs, keys)
    return out
