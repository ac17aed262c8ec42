"""Block-maxima experiments: thresholds, survival probabilities, and
extremal-index estimators.

The block maximum of phi = -log(distance to center) stays below the level u
exactly when the orbit avoids the ball of radius e^{-u} for the whole
block, so survival probabilities are estimated from the minimum distance
along vectorized orbits.  Levels are calibrated so that
n * mu(ball) = tau: in closed form for classical parameters, through the
empirical distance quantile otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from . import orbits
from .measure import (Ball, EstimatorResult, SRBSampler, binomial_result,
                      exact_ball_measure, distance_quantile, _center_coords)
from .symbolic import (DEFAULT_DEPTH, BakerParams, Metric, SymbolicPoint,
                       apply_shift, evaluate_coords)


@dataclass(frozen=True)
class EvtConfig:
    """One block-maxima experiment: target center, level parameter tau,
    block length n, and the sampling budget."""

    params: BakerParams
    center: SymbolicPoint
    metric: Metric
    tau: float
    n: int
    n_samples: int
    seed: int

    def __post_init__(self):
        if self.tau < 0:
            raise ValueError("tau must be nonnegative")
        if self.n < 2:
            raise ValueError("block length n must be at least 2")
        if self.n_samples < 1:
            raise ValueError("n_samples must be positive")


@dataclass(frozen=True)
class EIEstimate:
    """Extremal-index estimate; ``q[k]`` is the estimated probability of
    re-entering the ball at step k+1 after k steps outside."""

    q: np.ndarray
    theta: float
    std_error: float
    method: str  # "qk" | "alpha_hat" | "block"


@dataclass(frozen=True)
class GumbelResult:
    """Empirical survival P(M_n <= u_n) with its calibrated level and the
    e^{-theta*tau} reference."""

    survival: EstimatorResult
    u_n: float
    radius: float
    tau: float
    n: int
    theta_ref: float
    reference: float


def observable_phi(point, center, metric: Metric) -> float:
    """-log distance(point, center); +inf at the center itself (callers
    reject that sentinel)."""
    px, py = point
    cx, cy = center
    if metric is Metric.SUP:
        d = max(abs(px - cx), abs(py - cy))
    else:
        d = math.hypot(px - cx, py - cy)
    if d == 0.0:
        return math.inf
    return -math.log(d)


def block_maximum(p: SymbolicPoint, n: int, center, metric: Metric,
                  depth: int = DEFAULT_DEPTH) -> float:
    """Maximum of the observable along the first n orbit positions."""
    if n < 1:
        raise ValueError("block length must be positive")
    cc = _center_coords(center)
    best = -math.inf
    q = p
    for j in range(n):
        best = max(best, observable_phi(evaluate_coords(q, depth), cc, metric))
        if j < n - 1:
            q = apply_shift(q, 1)
    return best


def calibrate_radius(params: BakerParams, center, metric: Metric, tau: float,
                     n: int, seed: int, *, calibration_samples: int = 2_000_000,
                     stream: int = 0) -> tuple[float, float]:
    """Radius r and level u = -log r with n * mu(B(center, r)) = tau."""
    if tau == 0.0:
        return math.inf, 0.0
    target = tau / n
    if target >= 1.0:
        raise ValueError(f"tau/n = {target} leaves no admissible level")
    c = _center_coords(center)
    if params.classical():
        def gap(r):
            return exact_ball_measure(Ball(c, r, metric), params) - target
        lo, hi = 1e-12, 0.5 - 1e-12
        if gap(hi) < 0.0:
            raise ValueError(
                f"level not bracketed: mu at r=1/2 is {gap(hi) + target:.3g} "
                f"< target {target:.3g} (center {c}, metric {metric.value})")
        r = brentq(gap, lo, hi, xtol=1e-16, rtol=1e-15)
    else:
        sampler = SRBSampler(params, seed)
        r = distance_quantile(sampler, c, metric, target,
                              calibration_samples, stream=stream)
        if not 0.0 < r < 0.5:
            raise ValueError(
                f"calibrated radius {r} outside (0, 1/2); tau/n = {target} "
                "is not resolvable at this center")
    return -math.log(r), r


def survival_curve(params: BakerParams, center, metric: Metric, taus, n: int,
                   n_samples: int, seed: int, *, start: str = "srb",
                   burn_in: int = 0, theta_ref: float | None = None,
                   stream: int = 0,
                   calibration_samples: int = 2_000_000) -> list[GumbelResult]:
    """Survival estimates over a tau grid, sharing one orbit ensemble.

    Levels for different tau only move the radius, so a single pass
    recording each orbit's minimum distance serves the whole grid.
    """
    c = _center_coords(center)
    theta = 1.0 if theta_ref is None else theta_ref
    levels = [calibrate_radius(params, c, metric, t, n, seed,
                               calibration_samples=calibration_samples)
              for t in taus]
    if any(r > 0.0 for _, r in levels):
        min_d = orbits.orbit_min_distance(params, c, metric, n, n_samples,
                                          seed, stream=stream, start=start,
                                          burn_in=burn_in)
    out = []
    for tau, (u, r) in zip(taus, levels):
        if r == 0.0:
            est = EstimatorResult(1.0, 0.0, n_samples)
        else:
            est = binomial_result(int((min_d >= r).sum()), n_samples)
        out.append(GumbelResult(est, u, r, tau, n, theta,
                                math.exp(-theta * tau)))
    return out


def threshold_for_tau(config: EvtConfig, *,
                      calibration_samples: int = 2_000_000) -> float:
    """Level u_n with n * mu(B(center, e^{-u_n})) = tau."""
    u, _ = calibrate_radius(config.params, config.center, config.metric,
                            config.tau, config.n, config.seed,
                            calibration_samples=calibration_samples)
    return u


def gumbel_experiment(config: EvtConfig, theta_ref: float | None = None,
                      *, stream: int = 0) -> GumbelResult:
    """Empirical P(M_n <= u_n) from natural-measure starts, with the
    e^{-theta*tau} reference attached."""
    return survival_curve(config.params, config.center, config.metric,
                          [config.tau], config.n, config.n_samples,
                          config.seed, theta_ref=theta_ref, stream=stream)[0]


def lebesgue_start_experiment(config: EvtConfig, burn_in: int = 0,
                              theta_ref: float | None = None,
                              *, stream: int = 0) -> GumbelResult:
    """Same experiment started from uniform draws on the square, after
    ``burn_in`` relaxation steps.  The level is calibrated against the
    invariant measure exactly as in ``gumbel_experiment``."""
    if burn_in < 0:
        raise ValueError("burn_in must be nonnegative")
    return survival_curve(config.params, config.center, config.metric,
                          [config.tau], config.n, config.n_samples,
                          config.seed, start="lebesgue", burn_in=burn_in,
                          theta_ref=theta_ref, stream=stream)[0]


@dataclass(frozen=True)
class ReturnTimeDistribution:
    """Empirical first-return histogram from ball-conditioned starts;
    ``q[k]`` estimates a return at step k+1, ``tail`` is the unreturned
    fraction within the horizon."""

    q: np.ndarray
    tail: float
    n: int
    max_steps: int

    @property
    def total(self) -> float:
        return float(self.q.sum())

    @property
    def sum_std_error(self) -> float:
        return math.sqrt(max(self.tail * (1.0 - self.tail), 1e-300) / self.n)


def first_return_distribution(ball: Ball, sampler: SRBSampler, n: int, *,
                              max_steps: int, stop_fraction: float = 0.0,
                              stream: int = 0) -> ReturnTimeDistribution:
    """First-return-time histogram for starts distributed as the invariant
    measure conditioned on the ball."""
    rt = orbits.first_return_times(sampler.params, ball.center, ball.radius,
                                   ball.metric, n, sampler.seed,
                                   max_steps=max_steps, stream=stream,
                                   stop_fraction=stop_fraction)
    returned = rt[rt > 0]
    kmax = int(returned.max()) if returned.size else 0
    q = np.bincount(returned - 1, minlength=kmax)[:kmax] / n if kmax else np.zeros(0)
    tail = 1.0 - returned.size / n
    return ReturnTimeDistribution(q, tail, n, max_steps)


def _qk_symbolic(ball: Ball, sampler: SRBSampler, n: int,
                 k_max: int) -> np.ndarray:
    """Rejection fallback for dissipative parameters: draw symbolic points,
    keep ball hits, follow them exactly.  Returns first-return counts."""
    from .measure import sample_srb
    counts = np.zeros(k_max + 2, dtype=np.int64)
    hits = 0
    budget = 500 * n + 10_000
    while hits < n and budget > 0:
        budget -= 1
        p = sample_srb(sampler)
        if not bool(ball.contains(*evaluate_coords(p, sampler.depth))):
            continue
        hits += 1
        q = p
        rt = 0
        for k in range(1, k_max + 2):
            if q.n_future <= sampler.depth:
                break
            q = apply_shift(q, 1)
            if bool(ball.contains(*evaluate_coords(q, sampler.depth))):
                rt = k
                break
        counts[rt] += 1  # index 0 collects the unreturned tail
    if hits < n:
        raise ValueError("rejection sampling exhausted its budget; "
                         "enlarge the ball or lower n")
    out = np.zeros(k_max + 1, dtype=np.int64)
    for k in range(1, k_max + 2):
        out[k - 1] = counts[k]
    return out


def qk_estimator(ball: Ball, k_max: int, sampler: SRBSampler, n: int, *,
                 stream: int = 0) -> EIEstimate:
    """Conditional exit/re-entry frequencies q_k for k = 0..k_max and the
    extremal index 1 - sum(q).

    Starts are exact conditional draws on the ball for classical
    parameters, rejection-filtered symbolic samples otherwise.
    """
    if k_max < 0:
        raise ValueError("k_max must be nonnegative")
    if n < 1:
        raise ValueError("need a positive sample budget")
    if sampler.params.classical():
        rt = orbits.first_return_times(sampler.params, ball.center,
                                       ball.radius, ball.metric, n,
                                       sampler.seed, max_steps=k_max + 1,
                                       stream=stream)
        counts = np.bincount(rt, minlength=k_max + 2)
        q_counts = counts[1:k_max + 2]
    else:
        q_counts = _qk_symbolic(ball, sampler, n, k_max)
    q = q_counts / n
    p_return = float(q.sum())
    theta = 1.0 - p_return
    se = math.sqrt(max(p_return * (1.0 - p_return), 0.0) / n)
    return EIEstimate(q, theta, se, "qk")


def theta_from_survival(result: GumbelResult) -> EIEstimate:
    """Extremal index read off a survival estimate: -log(p) / tau."""
    p = result.survival.estimate
    if not 0.0 < p <= 1.0 or result.tau <= 0.0:
        raise ValueError("survival estimate unusable for a theta read-off")
    theta = -math.log(p) / result.tau
    se = result.survival.std_error / (result.tau * p)
    return EIEstimate(np.zeros(0), theta, se, "block")
