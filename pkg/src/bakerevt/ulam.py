"""Grid discretization of the transfer operator for the classical map.

On a dyadic 2^m x 2^m grid every cell maps onto exactly two cells with
weight 1/2, so the transition operator is applied matrix-free by index
arithmetic; the weights are exact dyadic rationals and the closed operator
is doubly stochastic.  Punching a hole multiplies by the indicator of the
complement before transferring, which zeroes the hole rows; sup-metric
balls with dyadic center and radius align exactly with the grid.  Only the
measure-preserving parameter choice is discretized here: for a dissipative
map the invariant measure is singular and a naive cell discretization does
not converge to its spectrum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .measure import Ball
from .symbolic import Metric

MAX_RESOLUTION = 14


@dataclass(frozen=True)
class UlamOperator:
    """Transition operator on the dyadic grid, optionally with a hole.

    ``hole`` is a boolean (2^m, 2^m) cell mask indexed [ix, iy]; mass on
    marked cells is removed before each transfer step.
    """

    m: int
    hole: np.ndarray | None = None
    hole_measure: float = 0.0

    def __post_init__(self):
        if not 1 <= self.m <= MAX_RESOLUTION:
            raise ValueError(f"resolution m must lie in 1..{MAX_RESOLUTION}")
        if self.hole is not None:
            if self.hole.shape != (2 ** self.m, 2 ** self.m):
                raise ValueError("hole mask shape does not match the grid")
            object.__setattr__(self, "hole_measure",
                               float(self.hole.sum()) * 4.0 ** -self.m)

    @property
    def size(self) -> int:
        return 4 ** self.m

    @property
    def closed(self) -> bool:
        return self.hole is None or not self.hole.any()

    def uniform_density(self) -> np.ndarray:
        edge = 2 ** self.m
        return np.full((edge, edge), 4.0 ** -self.m)

    def kill(self, v: np.ndarray) -> np.ndarray:
        if self.hole is None:
            return v
        out = v.copy()
        out[self.hole] = 0.0
        return out

    def push(self, v: np.ndarray) -> np.ndarray:
        """Mass transfer of the closed operator: cell (ix, iy) sends half
        its mass to each of the two cells its image covers."""
        edge = 2 ** self.m
        half = edge // 2
        out = np.empty_like(v)
        low = v[0::2, :half] + v[1::2, :half]
        out[:half, :] = np.repeat(low, 2, axis=1) * 0.5
        up = v[0::2, half:] + v[1::2, half:]
        out[half:, :] = np.repeat(up, 2, axis=1) * 0.5
        return out

    def apply(self, v: np.ndarray) -> np.ndarray:
        """One application of the (possibly holed) operator."""
        return self.push(self.kill(v))


def build_ulam(m: int) -> UlamOperator:
    """Closed grid operator at resolution m (2^m x 2^m cells)."""
    return UlamOperator(m)


def _aligned_cells(lo: float, hi: float, m: int):
    """Cell index range covering (lo, hi) when both edges are dyadic at
    resolution m; None if not aligned."""
    edge = 2 ** m
    a = lo * edge
    b = hi * edge
    if abs(a - round(a)) > 1e-9 or abs(b - round(b)) > 1e-9:
        return None
    return int(round(a)), int(round(b))


def punch_hole(op: UlamOperator, ball: Ball, cover: str = "exact") -> UlamOperator:
    """Operator with the ball removed.

    ``cover="exact"`` needs a sup ball aligned with the grid (the hole is
    then the exact indicator); ``"inner"``/``"outer"`` take the cells
    contained in / intersecting the ball, bracketing the eigenvalue.
    """
    edge = 2 ** op.m
    cx, cy = ball.center
    r = ball.radius
    if cover == "exact":
        if ball.metric is not Metric.SUP:
            raise ValueError("exact holes need a sup-metric ball; use "
                             "punch_hole_bracket for euclidean balls")
        xr = _aligned_cells(max(cx - r, 0.0), min(cx + r, 1.0), op.m)
        yr = _aligned_cells(max(cy - r, 0.0), min(cy + r, 1.0), op.m)
        if xr is None or yr is None:
            raise ValueError("ball edges are not dyadic at this resolution; "
                             "use cover='inner'/'outer'")
        mask = np.zeros((edge, edge), dtype=bool)
        mask[xr[0]:xr[1], yr[0]:yr[1]] = True
    else:
        if cover not in ("inner", "outer"):
            raise ValueError(f"unknown cover {cover!r}")
        h = 1.0 / edge
        centers = (np.arange(edge) + 0.5) * h
        dx = np.abs(centers[:, None] - cx)
        dy = np.abs(centers[None, :] - cy)
        if ball.metric is Metric.SUP:
            far = np.maximum(dx + h / 2, dy + h / 2)
            near = np.maximum(dx - h / 2, dy - h / 2)
        else:
            far = np.hypot(dx + h / 2, dy + h / 2)
            near = np.hypot(np.maximum(dx - h / 2, 0.0),
                            np.maximum(dy - h / 2, 0.0))
        mask = (far <= r) if cover == "inner" else (near < r)
    if mask.all():
        raise ValueError("hole covers the whole grid")
    return UlamOperator(op.m, mask)


def punch_hole_bracket(op: UlamOperator, ball: Ball) -> tuple[UlamOperator, UlamOperator]:
    """(inner, outer) cell-cover operators; their eigenvalues bracket the
    true leading eigenvalue for the given ball."""
    return punch_hole(op, ball, "inner"), punch_hole(op, ball, "outer")


@dataclass(frozen=True)
class SpectralResult:
    lam: float
    iterations: int
    residual: float
    theta_spectral: float


def leading_eigenvalue(op: UlamOperator, tol: float = 1e-12,
                       max_iter: int = 20000) -> SpectralResult:
    """Leading eigenvalue by power iteration from the uniform density.

    The estimate is the per-step total-mass ratio; the residual is its last
    change.  theta_spectral reads (1 - lambda) / hole_measure.
    """
    if tol <= 0.0:
        raise ValueError("tolerance must be positive")
    v = op.uniform_density()
    lam_prev = None
    trace = []
    for it in range(1, max_iter + 1):
        w = op.apply(v)
        mass = float(w.sum())
        if mass == 0.0:
            return SpectralResult(0.0, it, 0.0, _theta(0.0, op))
        lam = mass  # v is normalized to total mass 1 before each step
        v = w / mass
        if lam_prev is not None:
            res = abs(lam - lam_prev)
            trace.append(res)
            if res <= tol * max(lam, 1e-300):
                return SpectralResult(lam, it, res, _theta(lam, op))
        lam_prev = lam
    raise RuntimeError(
        f"power iteration did not converge in {max_iter} steps; last "
        f"residuals {['%.3e' % r for r in trace[-5:]]}")


def _theta(lam: float, op: UlamOperator) -> float:
    if op.hole_measure == 0.0:
        return math.nan
    return (1.0 - lam) / op.hole_measure


def survival_probability(op: UlamOperator, n: int) -> float:
    """Total mass of the holed operator applied n times to the uniform
    density: the grid estimate of P(the orbit avoids the hole for n steps)."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    v = op.uniform_density()
    for _ in range(n):
        v = op.apply(v)
    return float(v.sum())


def to_csr(op: UlamOperator) -> sp.csr_matrix:
    """Explicit sparse matrix (row = source cell, flat index ix*2^m + iy).

    Rows of hole cells are zeroed, matching the kill-then-push application;
    all stored weights are exactly 1/2.
    """
    edge = 2 ** op.m
    half = edge // 2
    ix, iy = np.meshgrid(np.arange(edge), np.arange(edge), indexing="ij")
    ix = ix.ravel()
    iy = iy.ravel()
    lower = iy < half
    jx = np.where(lower, ix >> 1, half + (ix >> 1))
    jy = np.where(lower, 2 * iy, 2 * (iy - half))
    rows = np.repeat(ix * edge + iy, 2)
    cols = np.empty_like(rows)
    cols[0::2] = jx * edge + jy
    cols[1::2] = jx * edge + jy + 1
    data = np.full(rows.size, 0.5)
    if op.hole is not None:
        keep = ~np.repeat(op.hole.ravel(), 2)
        rows, cols, data = rows[keep], cols[keep], data[keep]
    return sp.csr_matrix((data, (rows, cols)), shape=(op.size, op.size))


def dump_operator(op: UlamOperator, path) -> None:
    """Binary dump: int64 row pointers, int64 column indices, float64
    values, all little-endian, concatenated after a 3-int64 header with
    the array lengths."""
    mat = to_csr(op)
    indptr = mat.indptr.astype("<i8")
    indices = mat.indices.astype("<i8")
    data = mat.data.astype("<f8")
    with open(path, "wb") as fh:
        np.array([indptr.size, indices.size, data.size], dtype="<i8").tofile(fh)
        indptr.tofile(fh)
        indices.tofile(fh)
        data.tofile(fh)


def load_operator_arrays(path):
    """Inverse of ``dump_operator``: (indptr, indices, values)."""
    with open(path, "rb") as fh:
        sizes = np.fromfile(fh, dtype="<i8", count=3)
        indptr = np.fromfile(fh, dtype="<i8", count=sizes[0])
        indices = np.fromfile(fh, dtype="<i8", count=sizes[1])
        data = np.fromfile(fh, dtype="<f8", count=sizes[2])
    return indptr, indices, data
