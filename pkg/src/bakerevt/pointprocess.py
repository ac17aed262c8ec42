"""Visit-count statistics and compound-Poisson reference laws.

The number of visits an orbit makes to a small ball over a horizon of
t / mu(ball) steps tends to a Poisson law at non-periodic centers and to a
geometric compound Poisson (Polya-Aeppli) law at periodic centers under the
sup metric; the cluster-size quantities alpha_hat_k expose when the
Polya-Aeppli form fails (Euclidean balls at periodic points).  The second
parameter of the compound law is taken to be t itself, which is the unique
reading that normalizes the mass function and gives it mean t.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import orbits
from .measure import (Ball, EstimatorResult, SRBSampler, ball_measure,
                      exact_ball_measure)
from .symbolic import Metric, apply_shift, evaluate_coords

#: guard against horizons that would exceed any sane symbol budget
MAX_HORIZON = 1 << 24


@dataclass(frozen=True)
class VisitHistogram:
    """Empirical law of the visit count N over ``horizon + 1`` orbit
    positions; ``counts`` maps k to its relative frequency."""

    counts: dict[int, float]
    t: float
    ball: Ball
    horizon: int
    n_samples: int
    mu: float
    mu_se: float
    counts_se: dict[int, float]

    def frequency(self, k: int) -> float:
        return self.counts.get(k, 0.0)

    @property
    def mean(self) -> float:
        return sum(k * f for k, f in self.counts.items())


@dataclass(frozen=True)
class ClusterLaw:
    """Cluster-size data at a candidate period p.

    ``alpha_hat[k]`` estimates the probability that the first k returns
    under T^p all hit the ball (so ``alpha_hat[0] = 1``); ``alpha`` and
    ``lam`` are its first and normalized second differences, and
    ``theta = alpha[0]`` is the extremal index.
    """

    alpha_hat: np.ndarray
    alpha: np.ndarray
    lam: np.ndarray
    theta: float
    std_error: float
    n_samples: int
    period: int

    @classmethod
    def from_alpha_hat(cls, alpha_hat, n_samples: int, period: int) -> "ClusterLaw":
        ah = np.asarray(alpha_hat, dtype=float)
        if ah[0] != 1.0:
            raise ValueError("alpha_hat[0] must be 1 (conditioning on a hit)")
        alpha = ah[:-1] - ah[1:]
        if alpha.size < 2:
            raise ValueError("need alpha_hat out to order 3 at least")
        lam = (alpha[:-1] - alpha[1:]) / alpha[0] if alpha[0] > 0 else \
            np.zeros(alpha.size - 1)
        theta = float(alpha[0])
        se = math.sqrt(max(ah[1] * (1.0 - ah[1]), 0.0) / n_samples)
        return cls(ah, alpha, lam, theta, se, n_samples, period)


@dataclass(frozen=True)
class ClusterVerdict:
    verdict: str          # "consistent" | "violated"
    max_abs_z: float
    z: np.ndarray         # deviation scores for k = 2..k_max


def poisson_pmf(t: float, k: int) -> float:
    """P(N = k) for N ~ Poisson(t)."""
    if t <= 0.0:
        raise ValueError("t must be positive")
    if k < 0:
        raise ValueError("k must be nonnegative")
    return math.exp(k * math.log(t) - t - math.lgamma(k + 1))


def polya_aeppli_pmf(theta: float, t: float, k: int) -> float:
    """Geometric compound-Poisson mass: intensity theta*t, cluster sizes
    geometric with parameter theta.  theta = 1 degenerates to Poisson(t)
    exactly, term by term."""
    if not 0.0 < theta <= 1.0:
        raise ValueError("theta must lie in (0, 1]")
    if t <= 0.0:
        raise ValueError("t must be positive")
    if k < 0:
        raise ValueError("k must be nonnegative")
    if theta == 1.0:
        return poisson_pmf(t, k)
    if k == 0:
        return math.exp(-theta * t)
    log1m = math.log1p(-theta)
    logth = math.log(theta)
    logt = math.log(t)
    terms = []
    for j in range(1, k + 1):
        terms.append((k - j) * log1m + 2 * j * logth + j * logt
                     - math.lgamma(j + 1)
                     + math.lgamma(k) - math.lgamma(j) - math.lgamma(k - j + 1))
    m = max(terms)
    s = sum(math.exp(v - m) for v in terms)
    return math.exp(-theta * t + m) * s


def visit_statistics(ball: Ball, ts, sampler: SRBSampler, n: int, *,
                     stream: int = 0,
                     mu_samples: int = 2_000_000) -> list[VisitHistogram]:
    """Visit-count histograms for several t values over one orbit ensemble.

    The horizon floor(t / mu) uses the closed-form ball measure for
    classical parameters; otherwise mu is estimated first and its standard
    error is propagated by recounting at the shifted horizons.
    """
    ts = sorted(ts)
    if ts[0] <= 0.0:
        raise ValueError("t values must be positive")
    if sampler.params.classical():
        mu, mu_se = exact_ball_measure(ball, sampler.params), 0.0
    else:
        est = ball_measure(ball, sampler, mu_samples, stream=stream + 1)
        mu, mu_se = est.estimate, est.std_error
        if mu == 0.0:
            raise ValueError("ball measure estimate is zero; enlarge the ball")
    horizon_sets = []
    for t in ts:
        h = int(t / mu)
        if h < 1:
            raise ValueError(f"horizon floor(t/mu) = {h} < 1 at t = {t}")
        if h > MAX_HORIZON:
            raise ValueError(
                f"horizon {h} exceeds {MAX_HORIZON}; this run would need a "
                "deeper symbol budget than the kernels allocate")
        hs = {h}
        if mu_se > 0.0:
            hs.add(max(1, int(t / (mu + mu_se))))
            hs.add(min(MAX_HORIZON, int(t / (mu - mu_se))))
        horizon_sets.append(sorted(hs))
    checkpoints = sorted({h for hs in horizon_sets for h in hs})
    counts = orbits.orbit_hit_counts(sampler.params, ball.center, ball.metric,
                                     ball.radius, checkpoints, n,
                                     sampler.seed, stream=stream)
    out = []
    for t, hs in zip(ts, horizon_sets):
        h = int(t / mu)
        freq = {}
        for col, hh in ((checkpoints.index(x), x) for x in hs):
            c = np.bincount(counts[:, col])
            freq[hh] = c / n
        base = freq[h]
        main = {k: float(v) for k, v in enumerate(base) if v > 0.0}
        se = {}
        for k in main:
            binom = math.sqrt(main[k] * (1.0 - main[k]) / n)
            spread = 0.0
            if len(freq) > 1:
                vals = [f[k] if k < f.size else 0.0 for f in freq.values()]
                spread = (max(vals) - min(vals)) / 2.0
            se[k] = math.hypot(binom, spread)
        out.append(VisitHistogram(main, t, ball, h, n, mu, mu_se, se))
    return out


def visit_counts(ball: Ball, t: float, sampler: SRBSampler, n: int, *,
                 stream: int = 0, mu_samples: int = 2_000_000) -> VisitHistogram:
    """Histogram of visit counts over the horizon floor(t / mu(ball))."""
    return visit_statistics(ball, [t], sampler, n, stream=stream,
                            mu_samples=mu_samples)[0]


def _cluster_symbolic(ball: Ball, period: int, sampler: SRBSampler, n: int,
                      k_max: int) -> np.ndarray:
    """Rejection fallback for dissipative parameters."""
    from .measure import sample_srb
    ind = np.zeros((n, k_max), dtype=bool)
    hits = 0
    budget = 500 * n + 10_000
    while hits < n and budget > 0:
        budget -= 1
        p = sample_srb(sampler)
        if not bool(ball.contains(*evaluate_coords(p, sampler.depth))):
            continue
        q = p
        for i in range(k_max):
            if q.n_future < period + sampler.depth:
                break
            q = apply_shift(q, period)
            ind[hits, i] = bool(ball.contains(*evaluate_coords(q, sampler.depth)))
        hits += 1
    if hits < n:
        raise ValueError("rejection sampling exhausted its budget; "
                         "enlarge the ball or lower n")
    return ind


def estimate_cluster_law(ball: Ball, p: int, sampler: SRBSampler, n: int,
                         k_max: int, *, stream: int = 0) -> ClusterLaw:
    """Estimate alpha_hat_{k+1} as the fraction of ball-conditioned samples
    whose first k iterates under T^p all hit the ball again."""
    if p < 1:
        raise ValueError("period must be at least 1")
    if k_max < 2:
        raise ValueError("need k_max >= 2 to resolve the cluster law")
    if sampler.params.classical():
        ind = orbits.cluster_indicators(sampler.params, ball.center,
                                        ball.radius, ball.metric, p, k_max,
                                        n, sampler.seed, stream=stream)
    else:
        ind = _cluster_symbolic(ball, p, sampler, n, k_max)
    if not ind[:, 0].any() and ind.shape[0] == 0:
        raise ValueError("no ball hits recorded")
    cum = np.logical_and.accumulate(ind, axis=1)
    alpha_hat = np.concatenate([[1.0], cum.mean(axis=0)])
    return ClusterLaw.from_alpha_hat(alpha_hat, n, p)


def run_length_cluster_sizes(ball: Ball, p: int, sampler: SRBSampler, n: int,
                             k_max: int, *, stream: int = 0):
    """Cross-check estimator: cluster-size frequencies from run lengths.

    Conditions on cluster heads (ball points whose p-th preimage lies
    outside) and measures how many consecutive T^p iterates stay inside.
    Returns (lam_hat, n_heads, censored_fraction).
    """
    params = sampler.params
    rng = orbits.child_rng(sampler.seed, orbits.OP_RUNLEN, stream)
    x, W = orbits.uniform_ball_starts(params, ball.center, ball.radius,
                                      ball.metric, n, rng)
    xb, Wb = x.copy(), W.copy()
    for _ in range(p):
        xb, Wb = orbits.step_backward(params, xb, Wb)
    yb = Wb.astype(np.float64) * 2.0 ** -64
    heads = ~orbits._in_ball(xb, yb, ball.center[0], ball.center[1],
                             ball.radius, ball.metric)
    x, W = x[heads], W[heads]
    m = x.size
    if m == 0:
        raise ValueError("no cluster heads found; ball too large?")
    total = p * k_max
    words = rng.integers(0, 2 ** 64, size=((total + 63) // 64, m),
                         dtype=np.uint64)
    runs = np.ones(m, dtype=np.int64)
    alive = np.ones(m, dtype=bool)
    for i in range(k_max):
        for t in range(p):
            x, W = orbits.step_forward(params, x, W,
                                       orbits._fresh_bits(words, i * p + t))
        y = W.astype(np.float64) * 2.0 ** -64
        alive &= orbits._in_ball(x, y, ball.center[0], ball.center[1],
                                 ball.radius, ball.metric)
        runs[alive] = i + 2
    censored = float((runs > k_max).mean())
    lam_hat = np.array([(runs == k).mean() for k in range(1, k_max + 1)])
    return lam_hat, m, censored


def geometric_cluster_test(law: ClusterLaw, z_cut: float = 5.0) -> ClusterVerdict:
    """Test alpha_hat_{k+1} = (1 - theta)^k jointly over k.

    Deviations are scored against their delta-method errors (the hit
    indicators are nested, which fixes the covariances); any score beyond
    ``z_cut`` yields the verdict "violated".
    """
    if law.lam.size < 3:
        raise ValueError("need at least 3 resolved cluster-size entries")
    a = law.alpha_hat[1]          # (1 - theta) by definition
    n = law.n_samples
    zs = []
    for k in range(2, law.alpha_hat.size):
        ak = law.alpha_hat[k]
        d = ak - a ** k
        var_ak = ak * (1.0 - ak) / n
        var_a = a * (1.0 - a) / n
        cov = (ak - a * ak) / n    # E[I_1 I_k] = alpha_hat[k] (nested events)
        g = k * a ** (k - 1)
        var = max(var_ak + g * g * var_a - 2.0 * g * cov, 0.0)
        zs.append(d / math.sqrt(var) if var > 0 else 0.0)
    z = np.array(zs)
    max_abs = float(np.abs(z).max()) if z.size else 0.0
    verdict = "violated" if max_abs > z_cut else "consistent"
    return ClusterVerdict(verdict, max_abs, z)


def gof_distance(hist: VisitHistogram, pmf) -> float:
    """Total-variation distance between the empirical histogram and the
    reference law ``pmf(k)``, charging the reference mass beyond the
    observed support."""
    if not hist.counts:
        raise ValueError("empty histogram")
    kmax = max(hist.counts)
    total = 0.0
    ref_mass = 0.0
    for k in range(kmax + 1):
        pk = pmf(k)
        ref_mass += pk
        total += abs(hist.frequency(k) - pk)
    return 0.5 * (total + max(1.0 - ref_mass, 0.0))
