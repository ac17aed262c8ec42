"""Natural-measure sampling and measure-theoretic estimators.

Symbols are drawn i.i.d. with P(0) = alpha, P(1) = 1 - alpha; the future
side gives the expanding-direction conditional (Lebesgue on vertical
leaves), the past side the transverse self-similar measure.  For classical
parameters the invariant measure is Lebesgue on the square and ball
measures have closed forms; Monte Carlo is authoritative otherwise.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import orbits
from .quadrature import clipped_disk_area
from .symbolic import (DEFAULT_DEPTH, BakerParams, Metric, SymbolicPoint,
                       evaluate_coords)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class EstimatorResult:
    """Point estimate with its Monte Carlo standard error."""

    estimate: float
    std_error: float
    n_samples: int

    def __post_init__(self):
        if self.std_error < 0:
            raise ValueError("std_error must be nonnegative")
        if self.n_samples < 1:
            raise ValueError("n_samples must be positive")


def binomial_result(hits: int, n: int) -> EstimatorResult:
    p = hits / n
    return EstimatorResult(p, math.sqrt(p * (1.0 - p) / n), n)


@dataclass(frozen=True)
class Ball:
    """Target set: center, radius, metric.  Balls are clipped to the unit
    square; keep the symbolic coding of the center around so experiments
    can be reproduced exactly."""

    center: tuple[float, float]
    radius: float
    metric: Metric
    center_point: SymbolicPoint | None = None

    def __post_init__(self):
        if not 0.0 < self.radius < 0.5:
            raise ValueError(f"radius must lie in (0, 1/2), got {self.radius}")
        cx, cy = self.center
        if not (0.0 <= cx <= 1.0 and 0.0 <= cy <= 1.0):
            raise ValueError(f"center {self.center} outside the unit square")
        clip = lebesgue_clip_fraction(self.center, self.radius, self.metric)
        if clip > 0.0:
            log.info("ball at %s r=%g clipped by the square boundary "
                     "(Lebesgue fraction %.3g)", self.center, self.radius, clip)

    def contains(self, x, y):
        """Strict-interior membership; works on scalars and arrays."""
        cx, cy = self.center
        if self.metric is Metric.SUP:
            return np.maximum(np.abs(x - cx), np.abs(y - cy)) < self.radius
        return (x - cx) ** 2 + (y - cy) ** 2 < self.radius ** 2


def lebesgue_clip_fraction(center, radius: float, metric: Metric) -> float:
    """Fraction of the ball's Lebesgue area lost to the square boundary."""
    cx, cy = center
    if metric is Metric.SUP:
        full = 4.0 * radius * radius
        w = min(cx + radius, 1.0) - max(cx - radius, 0.0)
        h = min(cy + radius, 1.0) - max(cy - radius, 0.0)
        inside = max(w, 0.0) * max(h, 0.0)
    else:
        full = math.pi * radius * radius
        inside = clipped_disk_area(cx, cy, radius)
    return max(0.0, 1.0 - inside / full)


def exact_ball_measure(ball: Ball, params: BakerParams) -> float:
    """Closed-form invariant measure of the clipped ball (classical only)."""
    if not params.classical():
        raise ValueError("closed-form ball measure needs classical parameters")
    cx, cy = ball.center
    r = ball.radius
    if ball.metric is Metric.SUP:
        w = min(cx + r, 1.0) - max(cx - r, 0.0)
        h = min(cy + r, 1.0) - max(cy - r, 0.0)
        return max(w, 0.0) * max(h, 0.0)
    return clipped_disk_area(cx, cy, r)


@dataclass
class SRBSampler:
    """Seeded source of natural-measure samples.

    Single-point draws advance an internal counter (successive calls give
    fresh points, reproducible from the seed); the vectorized estimators
    key their own deterministic sub-streams off the same seed.
    """

    params: BakerParams
    seed: int
    depth: int = DEFAULT_DEPTH
    _draws: int = field(default=0, repr=False, compare=False)

    def coords(self, n: int, *, stream: int = 0, op: int = orbits.OP_BALL):
        """n coordinate pairs, batched deterministically."""
        xs = np.empty(n)
        ys = np.empty(n)
        pos = 0
        for b, size in orbits._batches(n, orbits.BATCH):
            rng = orbits.child_rng(self.seed, op, stream, b)
            x, y = orbits.srb_coords(self.params, size, rng, self.depth)
            xs[pos:pos + size] = x
            ys[pos:pos + size] = y
            pos += size
        return xs, ys


def sample_srb(sampler: SRBSampler) -> SymbolicPoint:
    """One symbolically-coded point distributed per the natural measure."""
    rng = orbits.child_rng(sampler.seed, orbits.OP_POINT, sampler._draws)
    sampler._draws += 1
    sym = (rng.random(2 * sampler.depth) < sampler.params.beta).astype(np.uint8)
    return SymbolicPoint(sym, sampler.depth, sampler.params)


def draw_typical_center(sampler: SRBSampler, r_max: float,
                        metric: Metric = Metric.SUP, max_clip: float = 0.01,
                        max_tries: int = 1000) -> SymbolicPoint:
    """Draw a measure-typical center whose ball of radius ``r_max`` loses at
    most ``max_clip`` of its area to the boundary; rejected draws are logged."""
    for _ in range(max_tries):
        p = sample_srb(sampler)
        c = evaluate_coords(p, sampler.depth)
        clip = lebesgue_clip_fraction(c, r_max, metric)
        if clip <= max_clip:
            return p
        log.info("resampled center %s (clip %.3g > %.3g)", c, clip, max_clip)
    raise RuntimeError(f"no admissible center after {max_tries} draws")


def _distance_counts(sampler: SRBSampler, center, metric: Metric,
                     thresholds, n: int, *, stream: int = 0,
                     op: int = orbits.OP_BALL) -> np.ndarray:
    """Number of natural-measure samples with distance(sample, center) < u
    for each threshold u, over one shared sample set."""
    thresholds = np.asarray(thresholds, dtype=float)
    counts = np.zeros(thresholds.size, dtype=np.int64)
    cx, cy = center
    pos = 0
    for b, size in orbits._batches(n, orbits.BATCH):
        rng = orbits.child_rng(sampler.seed, op, stream, b)
        x, y = orbits.srb_coords(sampler.params, size, rng, sampler.depth)
        if metric is Metric.SUP:
            d = np.maximum(np.abs(x - cx), np.abs(y - cy))
        else:
            d = np.hypot(x - cx, y - cy)
        for i, u in enumerate(thresholds):
            counts[i] += int((d < u).sum())
        pos += size
    return counts


def distance_quantile(sampler: SRBSampler, center, metric: Metric, q: float,
                      n: int, *, stream: int = 0) -> float:
    """Empirical q-quantile of the distance to ``center`` under the
    natural measure (monotone surrogate for inverting the ball measure)."""
    cx, cy = center
    ds = np.empty(n)
    pos = 0
    for b, size in orbits._batches(n, orbits.BATCH):
        rng = orbits.child_rng(sampler.seed, orbits.OP_THRESHOLD, stream, b)
        x, y = orbits.srb_coords(sampler.params, size, rng, sampler.depth)
        if metric is Metric.SUP:
            ds[pos:pos + size] = np.maximum(np.abs(x - cx), np.abs(y - cy))
        else:
            ds[pos:pos + size] = np.hypot(x - cx, y - cy)
        pos += size
    return float(np.quantile(ds, q))


def _center_coords(center) -> tuple[float, float]:
    if isinstance(center, SymbolicPoint):
        return evaluate_coords(center)
    return float(center[0]), float(center[1])


def ball_measure(ball: Ball, sampler: SRBSampler, n: int, *,
                 stream: int = 0) -> EstimatorResult:
    """Monte Carlo hit-frequency estimate of the ball's invariant measure."""
    if n < 1000:
        raise ValueError("ball_measure needs n >= 1000 samples")
    hits = _distance_counts(sampler, ball.center, ball.metric,
                            [ball.radius], n, stream=stream)[0]
    return binomial_result(int(hits), n)


def ball_measure_profile(center, radii, metric: Metric, sampler: SRBSampler,
                         n: int, *, stream: int = 0) -> list[EstimatorResult]:
    """Ball-measure estimates for several radii over one shared sample set."""
    counts = _distance_counts(sampler, _center_coords(center), metric,
                              radii, n, stream=stream, op=orbits.OP_LOCAL_DIM)
    return [binomial_result(int(c), n) for c in counts]


def dimension_formula(params: BakerParams) -> tuple[float, float]:
    """Transverse dimension d_s = h / log(1/gamma) and d = 1 + d_s, where h
    is the symbol entropy.  Needs gamma_a = gamma_b."""
    if params.gamma_a != params.gamma_b:
        raise ValueError("dimension formula unsupported for gamma_a != gamma_b")
    a, b = params.alpha, params.beta
    h = a * math.log(1.0 / a) + b * math.log(1.0 / b)
    d_s = h / math.log(1.0 / params.gamma_a)
    return d_s, 1.0 + d_s


def local_dimension(center, radii, sampler: SRBSampler, n: int,
                    metric: Metric = Metric.SUP, *,
                    stream: int = 0) -> EstimatorResult:
    """Least-squares slope of log mu(B(center, r)) against log r.

    Radii must span at least two dyadic octaves; radii with zero hits are
    dropped with a warning.  One sample set is shared across all radii.
    """
    radii = np.asarray(sorted(radii, reverse=True), dtype=float)
    if radii.size < 4:
        raise ValueError("need at least 4 radii")
    if radii[0] / radii[-1] < 4.0:
        raise ValueError("radii must span at least two octaves")
    c = _center_coords(center)
    counts = _distance_counts(sampler, c, metric, radii, n,
                              stream=stream, op=orbits.OP_LOCAL_DIM)
    keep = counts > 0
    if not keep.all():
        warnings.warn(f"dropping {int((~keep).sum())} radii with zero hits")
    if keep.sum() < 2:
        raise ValueError("fewer than two radii with hits")
    r = radii[keep]
    p = counts[keep] / n
    log_r = np.log(r)
    log_p = np.log(p)
    # per-point noise on log p is se(p)/p for a binomial count
    sigma = np.sqrt((1.0 - p) / (n * p))
    slope, se = _ols_slope(log_r, log_p, sigma)
    return EstimatorResult(slope, se, n)


def _ols_slope(xs: np.ndarray, ys: np.ndarray, sigma: np.ndarray):
    """Ordinary least-squares slope and its propagated standard error."""
    xc = xs - xs.mean()
    denom = float((xc * xc).sum())
    slope = float((xc * ys).sum() / denom)
    se = float(np.sqrt(((xc / denom) ** 2 * sigma ** 2).sum()))
    return slope, se


def annulus_ratio(center, r: float, w: float, sampler: SRBSampler, n: int,
                  metric: Metric = Metric.EUCLIDEAN, *,
                  stream: int = 0) -> EstimatorResult:
    """Hit-frequency estimate of mu(B(r + r^w) \\ B(r)) / mu(B(r))."""
    if w <= 1.0:
        raise ValueError("w must exceed 1")
    if r + r ** w >= 0.5:
        raise ValueError("outer radius must stay below 1/2")
    c = _center_coords(center)
    inner, outer = _distance_counts(sampler, c, metric, [r, r + r ** w], n,
                                    stream=stream, op=orbits.OP_ANNULUS)
    if inner == 0:
        raise ValueError("no ball hits; increase n or the radius")
    ann = int(outer - inner)
    ratio = ann / inner
    if ann == 0:
        se = 1.0 / inner  # one-hit scale; ratio resolution floor
    else:
        se = ratio * math.sqrt(1.0 / ann + 1.0 / inner)
    return EstimatorResult(ratio, se, n)


def annulus_exponent(center, radii, w: float, sampler: SRBSampler, n: int,
                     metric: Metric = Metric.EUCLIDEAN, *, stream: int = 0):
    """Fit ratio(r) ~ r^delta over a radius schedule.

    Returns (slope EstimatorResult, per-radius EstimatorResult list); the
    sample set is shared across radii.
    """
    radii = sorted(radii, reverse=True)
    if len(radii) < 3:
        raise ValueError("need at least 3 radii for the exponent fit")
    edges = []
    for r in radii:
        edges.extend([r, r + r ** w])
    counts = _distance_counts(sampler, _center_coords(center), metric,
                              edges, n, stream=stream, op=orbits.OP_ANNULUS)
    rows = []
    pts = []
    for i, r in enumerate(radii):
        inner = int(counts[2 * i])
        ann = int(counts[2 * i + 1] - counts[2 * i])
        if inner == 0 or ann == 0:
            warnings.warn(f"radius {r}: empty ball or annulus, dropped")
            continue
        ratio = ann / inner
        se = ratio * math.sqrt(1.0 / ann + 1.0 / inner)
        rows.append((r, EstimatorResult(ratio, se, n)))
        pts.append((math.log(r), math.log(ratio), se / ratio))
    if len(pts) < 3:
        raise ValueError("fewer than 3 usable radii for the fit")
    arr = np.array(pts)
    slope, se = _ols_slope(arr[:, 0], arr[:, 1], arr[:, 2])
    return EstimatorResult(slope, se, n), rows
