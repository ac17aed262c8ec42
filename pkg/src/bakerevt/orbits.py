"""Vectorized orbit kernels shared by the statistical estimators.

All sampling is driven by i.i.d. symbols with P(1) = 1 - alpha.  When the
vertical split is 1/2 the expanding coordinate is carried as a sliding
64-bit window of future symbols (an exact integer shift register, so y is
correct to one ulp at every step); the contracting coordinate is iterated
directly, which is numerically stable.  For general alpha the kernels
materialize a symbol block per batch and reconstruct y by a backward fold,
which contracts truncation error instead of amplifying it.

Streams are deterministic: batch b of an estimator draws from
``SeedSequence(seed, spawn_key=(op, stream, b))`` with a fixed batch size,
so results are bit-reproducible regardless of how batches are executed.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .symbolic import BakerParams, Metric, DEFAULT_DEPTH

#: Fixed batch size; part of the stream layout, do not change casually.
BATCH = 1 << 15

#: Worker processes for the heavy orbit scans.  Batches own fixed
#: sub-streams and are reduced in index order, so results are identical
#: for any worker count.
WORKERS = 1


def set_workers(n: int) -> None:
    global WORKERS
    WORKERS = max(1, int(n))

_ONE = np.uint64(1)
_S63 = np.uint64(63)
_TWO64 = 2 ** 64
_INV64 = 2.0 ** -64

# operation codes keying the deterministic sub-streams
OP_POINT = 1
OP_BALL = 2
OP_LOCAL_DIM = 3
OP_ANNULUS = 4
OP_ORBIT = 5
OP_RETURN = 6
OP_CLUSTER = 7
OP_THRESHOLD = 8
OP_RUNLEN = 9


def child_rng(seed: int, *key: int) -> np.random.Generator:
    """Generator for the sub-stream identified by ``key``."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(key)))


def _batches(n: int, batch: int):
    """Yield (batch_index, size) covering n samples."""
    b = 0
    while n > 0:
        size = min(batch, n)
        yield b, size
        n -= size
        b += 1


def _fold_x(bits_words: np.ndarray, params: BakerParams) -> np.ndarray:
    """x from 64 past symbols packed MSB-first in one word per sample."""
    ga, gb = params.gamma_a, params.gamma_b
    x = np.zeros(bits_words.shape, dtype=np.float64)
    # most remote symbol first: bit 0 (MSB) is s_{-64}, bit 63 is s_{-1}
    for i in range(64):
        s = (bits_words >> np.uint64(63 - i)) & _ONE
        x = np.where(s.astype(bool), 1.0 - gb + gb * x, ga * x)
    return x


def srb_coords(params: BakerParams, n: int, rng: np.random.Generator,
               depth: int = DEFAULT_DEPTH) -> tuple[np.ndarray, np.ndarray]:
    """Sample n coordinate pairs from the natural measure."""
    if params.alpha == 0.5 and depth == 64:
        wy = rng.integers(0, _TWO64, size=n, dtype=np.uint64)
        y = wy.astype(np.float64) * _INV64
        wx = rng.integers(0, _TWO64, size=n, dtype=np.uint64)
        if params.gamma_a == 0.5 and params.gamma_b == 0.5:
            x = wx.astype(np.float64) * _INV64
        else:
            x = _fold_x(wx, params)
        return x, y
    a, be = params.alpha, params.beta
    ga, gb = params.gamma_a, params.gamma_b
    x = np.zeros(n)
    for _ in range(depth):
        s = rng.random(n) < be
        x = np.where(s, 1.0 - gb + gb * x, ga * x)
    y = np.zeros(n)
    for _ in range(depth):
        s = rng.random(n) < be
        y = np.where(s, a + be * y, a * y)
    return x, y


def _fresh_bits(words: np.ndarray, t: int) -> np.ndarray:
    """Bit t of the packed stream, one per sample (words laid out
    (n_words, batch), MSB-first within each word)."""
    return (words[t >> 6] >> np.uint64(63 - (t & 63))) & _ONE


def _scan_batch_halfsplit(params, zx, zy, metric, n_steps, size, rng, *,
                          start, burn_in, radius, checkpoints, out_counts,
                          out_min):
    """One batch of the alpha = 1/2 orbit scan.

    Draw order: future symbol words, then the x initializer.
    """
    ga, gb = params.gamma_a, params.gamma_b
    classical_x = ga == 0.5 and gb == 0.5
    total_bits = burn_in + n_steps - 1 + 64
    n_words = (total_bits + 63) // 64
    words = rng.integers(0, _TWO64, size=(n_words, size), dtype=np.uint64)
    W = words[0].copy()
    if start == "srb":
        wx = rng.integers(0, _TWO64, size=size, dtype=np.uint64)
        x = wx.astype(np.float64) * _INV64 if classical_x else _fold_x(wx, params)
    elif start == "lebesgue":
        x = rng.random(size)
    else:
        raise ValueError(f"unknown start {start!r}")

    def step(t):
        nonlocal x, W
        s = W >> _S63
        if classical_x:
            x = 0.5 * (x + s.astype(np.float64))
        else:
            x = np.where(s.astype(bool), 1.0 - gb + gb * x, ga * x)
        W = (W << _ONE) | _fresh_bits(words, t + 64)

    for t in range(burn_in):
        step(t)

    sup = metric is Metric.SUP
    if out_min is not None:
        best = np.full(size, np.inf)
    if out_counts is not None:
        counts = np.zeros(size, dtype=np.int64)
        r_cmp = radius if sup else radius * radius
        cp_iter = iter(enumerate(checkpoints))
        cp_idx, cp_next = next(cp_iter)

    for j in range(n_steps):
        y = W.astype(np.float64) * _INV64
        dx = np.abs(x - zx)
        dy = np.abs(y - zy)
        if sup:
            d = np.maximum(dx, dy)
        else:
            d = dx * dx + dy * dy
        if out_min is not None:
            np.minimum(best, d, out=best)
        if out_counts is not None:
            counts += d < r_cmp
            while j == cp_next:
                out_counts[:, cp_idx] = counts
                try:
                    cp_idx, cp_next = next(cp_iter)
                except StopIteration:
                    cp_next = -1
        if j < n_steps - 1:
            step(burn_in + j)

    if out_min is not None:
        out_min[:] = best if sup else np.sqrt(best)


def _scan_batch_generic(params, zx, zy, metric, n_steps, size, rng, *,
                        start, burn_in, radius, checkpoints, out_counts,
                        out_min, depth=DEFAULT_DEPTH):
    """General-alpha batch: symbol block plus backward y reconstruction."""
    a, be = params.alpha, params.beta
    ga, gb = params.gamma_a, params.gamma_b
    total_bits = burn_in + n_steps - 1 + depth
    bits = (rng.random((total_bits, size)) < be)
    if start == "srb":
        x = np.zeros(size)
        past = rng.random((depth, size)) < be
        for i in range(depth):
            x = np.where(past[i], 1.0 - gb + gb * x, ga * x)
    elif start == "lebesgue":
        x = rng.random(size)
    else:
        raise ValueError(f"unknown start {start!r}")

    # y at positions burn_in .. burn_in + n_steps - 1 via a backward fold
    ys = np.empty((n_steps, size))
    y = np.zeros(size)
    for t in range(total_bits - 1, -1, -1):
        y = np.where(bits[t], a + be * y, a * y)
        k = t - burn_in
        if 0 <= k < n_steps:
            ys[k] = y

    for t in range(burn_in):
        x = np.where(bits[t], 1.0 - gb + gb * x, ga * x)

    sup = metric is Metric.SUP
    if out_min is not None:
        best = np.full(size, np.inf)
    if out_counts is not None:
        counts = np.zeros(size, dtype=np.int64)
        r_cmp = radius if sup else radius * radius
        cp_iter = iter(enumerate(checkpoints))
        cp_idx, cp_next = next(cp_iter)

    for j in range(n_steps):
        dx = np.abs(x - zx)
        dy = np.abs(ys[j] - zy)
        d = np.maximum(dx, dy) if sup else dx * dx + dy * dy
        if out_min is not None:
            np.minimum(best, d, out=best)
        if out_counts is not None:
            counts += d < r_cmp
            while j == cp_next:
                out_counts[:, cp_idx] = counts
                try:
                    cp_idx, cp_next = next(cp_iter)
                except StopIteration:
                    cp_next = -1
        if j < n_steps - 1:
            x = np.where(bits[burn_in + j], 1.0 - gb + gb * x, ga * x)

    if out_min is not None:
        out_min[:] = best if sup else np.sqrt(best)


def _generic_batch_size(n_steps: int) -> int:
    # cap the (n_steps, batch) float64 block at ~256 MB
    return max(256, min(BATCH, (1 << 25) // max(n_steps, 1)))


def _scan_job(args):
    """Top-level batch job (picklable for the worker pool)."""
    (params, zx, zy, metric, n_steps, size, seed, stream, b, start,
     burn_in, radius, checkpoints) = args
    rng = child_rng(seed, OP_ORBIT, stream, b)
    halfsplit = params.alpha == 0.5
    scan = _scan_batch_halfsplit if halfsplit else _scan_batch_generic
    if checkpoints is None:
        out_min = np.empty(size)
        scan(params, zx, zy, metric, n_steps, size, rng, start=start,
             burn_in=burn_in, radius=None, checkpoints=None,
             out_counts=None, out_min=out_min)
        return out_min
    out_counts = np.empty((size, len(checkpoints)), dtype=np.int64)
    scan(params, zx, zy, metric, n_steps, size, rng, start=start,
         burn_in=burn_in, radius=radius, checkpoints=checkpoints,
         out_counts=out_counts, out_min=None)
    return out_counts


def _run_scan(params, center, metric, n_steps, n_samples, seed, stream,
              start, burn_in, radius, checkpoints):
    zx, zy = center
    halfsplit = params.alpha == 0.5
    batch = BATCH if halfsplit else _generic_batch_size(n_steps)
    jobs = [(params, zx, zy, metric, n_steps, size, seed, stream, b, start,
             burn_in, radius, checkpoints)
            for b, size in _batches(n_samples, batch)]
    if WORKERS > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=WORKERS) as pool:
            parts = list(pool.map(_scan_job, jobs))
    else:
        parts = [_scan_job(j) for j in jobs]
    return np.concatenate(parts, axis=0)


def orbit_min_distance(params: BakerParams, center: tuple[float, float],
                       metric: Metric, n_steps: int, n_samples: int,
                       seed: int, *, stream: int = 0, start: str = "srb",
                       burn_in: int = 0) -> np.ndarray:
    """Minimum distance to ``center`` along each orbit's first ``n_steps``
    positions (position 0 included), one entry per sample."""
    return _run_scan(params, center, metric, n_steps, n_samples, seed,
                     stream, start, burn_in, None, None)


def orbit_hit_counts(params: BakerParams, center: tuple[float, float],
                     metric: Metric, radius: float, horizons,
                     n_samples: int, seed: int, *, stream: int = 0,
                     start: str = "srb", burn_in: int = 0) -> np.ndarray:
    """Number of orbit positions 0..H falling in the open ball, for each
    horizon H in ``horizons`` (must be sorted).  Shape (n_samples, len(horizons))."""
    horizons = list(horizons)
    if horizons != sorted(horizons):
        raise ValueError("horizons must be sorted ascending")
    return _run_scan(params, center, metric, horizons[-1] + 1, n_samples,
                     seed, stream, start, burn_in, radius, horizons)


# ---------------------------------------------------------------------------
# conditioned starts inside a ball (classical parameters: the invariant
# measure is Lebesgue, so the conditional law on a ball is uniform)

def _require_classical(params: BakerParams, what: str):
    if not params.classical():
        raise NotImplementedError(
            f"{what} requires classical parameters (conditional sampling in "
            "closed form); use the rejection path for dissipative maps")


def uniform_ball_starts(params: BakerParams, center, radius, metric: Metric,
                        n: int, rng: np.random.Generator):
    """Uniform draws on ball∩[0,1]^2 as (x, W) with W the 64-bit y window."""
    _require_classical(params, "uniform ball sampling")
    zx, zy = center
    x_lo, x_hi = max(zx - radius, 0.0), min(zx + radius, 1.0)
    y_lo, y_hi = max(zy - radius, 0.0), min(zy + radius, 1.0)
    w_lo = int(np.ceil(y_lo * _TWO64))
    w_hi = max(int(np.floor(y_hi * _TWO64)), w_lo + 1)
    if metric is Metric.SUP:
        x = rng.uniform(x_lo, x_hi, size=n)
        W = rng.integers(w_lo, w_hi, size=n, dtype=np.uint64)
        return x, W
    # euclidean: rejection from the bounding box
    xs = np.empty(n)
    Ws = np.empty(n, dtype=np.uint64)
    have = 0
    r2 = radius * radius
    while have < n:
        m = int((n - have) * 1.6) + 16
        x = rng.uniform(x_lo, x_hi, size=m)
        W = rng.integers(w_lo, w_hi, size=m, dtype=np.uint64)
        y = W.astype(np.float64) * _INV64
        keep = (x - zx) ** 2 + (y - zy) ** 2 < r2
        k = int(keep.sum())
        take = min(k, n - have)
        xs[have:have + take] = x[keep][:take]
        Ws[have:have + take] = W[keep][:take]
        have += take
    return xs, Ws


def step_forward(params: BakerParams, x, W, fresh):
    """One classical-split map application on (x, W) states."""
    s = W >> _S63
    if params.gamma_a == 0.5 and params.gamma_b == 0.5:
        x = 0.5 * (x + s.astype(np.float64))
    else:
        x = np.where(s.astype(bool), 1.0 - params.gamma_b + params.gamma_b * x,
                     params.gamma_a * x)
    W = (W << _ONE) | fresh
    return x, W


def step_backward(params: BakerParams, x, W):
    """One classical inverse application; the branch symbol comes off x."""
    _require_classical(params, "backward iteration")
    s = (x >= 0.5).astype(np.uint64)
    x = 2.0 * x - s.astype(np.float64)
    W = (W >> _ONE) | (s << _S63)
    return x, W


def _in_ball(x, y, zx, zy, radius, metric: Metric):
    if metric is Metric.SUP:
        return np.maximum(np.abs(x - zx), np.abs(y - zy)) < radius
    return (x - zx) ** 2 + (y - zy) ** 2 < radius * radius


def first_return_times(params: BakerParams, center, radius, metric: Metric,
                       n: int, seed: int, *, max_steps: int,
                       stream: int = 0, chunk: int = 4096,
                       stop_fraction: float = 0.0) -> np.ndarray:
    """First k >= 1 with T^k(w) in the ball, for w uniform on the ball.

    Entries are 0 for samples that never return within ``max_steps``.
    Runs in chunks, compacting away returned samples; stops early once the
    unreturned fraction drops to ``stop_fraction``.
    """
    zx, zy = center
    out = np.zeros(n, dtype=np.int64)
    posmap = np.arange(n)
    rng = child_rng(seed, OP_RETURN, stream)
    x, W = uniform_ball_starts(params, center, radius, metric, n, rng)
    k = 0
    while posmap.size > stop_fraction * n and k < max_steps:
        steps = min(chunk, max_steps - k)
        n_words = (steps + 63) // 64
        words = rng.integers(0, _TWO64, size=(n_words, posmap.size),
                             dtype=np.uint64)
        alive = np.ones(posmap.size, dtype=bool)
        for t in range(steps):
            x, W = step_forward(params, x, W, _fresh_bits(words, t))
            k += 1
            y = W.astype(np.float64) * _INV64
            hit = _in_ball(x, y, zx, zy, radius, metric) & alive
            if hit.any():
                out[posmap[hit]] = k
                alive &= ~hit
        if not alive.all():
            x, W, posmap = x[alive], W[alive], posmap[alive]
    return out


def cluster_indicators(params: BakerParams, center, radius, metric: Metric,
                       period: int, k_max: int, n: int, seed: int, *,
                       stream: int = 0) -> np.ndarray:
    """Boolean matrix (n, k_max): column i says whether T^{(i+1)p}(w) is
    still in the ball, for w uniform on the ball."""
    zx, zy = center
    out = np.empty((n, k_max), dtype=bool)
    total = period * k_max
    pos = 0
    for b, size in _batches(n, BATCH):
        rng = child_rng(seed, OP_CLUSTER, stream, b)
        x, W = uniform_ball_starts(params, center, radius, metric, size, rng)
        n_words = (total + 63) // 64
        words = rng.integers(0, _TWO64, size=(n_words, size), dtype=np.uint64)
        for i in range(k_max):
            for t in range(period):
                x, W = step_forward(params, x, W,
                                    _fresh_bits(words, i * period + t))
            y = W.astype(np.float64) * _INV64
            out[pos:pos + size, i] = _in_ball(x, y, zx, zy, radius, metric)
        pos += size
    return out
