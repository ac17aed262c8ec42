"""Exact symbolic coding of the two-branch baker family.

A point of the attractor is a bi-infinite 0/1 sequence; the map is a cursor
shift.  Coordinates are evaluated on demand from a finite symbol window:
past symbols drive the horizontal contractions (x), future symbols are the
itinerary of the expanding base map (y).  Truncating the window at depth K
perturbs x by at most max(gamma_a, gamma_b)**K and y by at most
max(alpha, 1-alpha)**K.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

#: Default symbol depth; 2**-64 truncation error is below double resolution.
DEFAULT_DEPTH = 64

#: Orbits passing closer than this to the discontinuity line y = alpha are
#: rejected and resampled by the statistical drivers.
GAMMA_TOLERANCE = 2.0 ** -50


class InsufficientDepthError(ValueError):
    """Requested more symbols than the stored window provides."""


class GammaSingularityError(ValueError):
    """Coordinate map evaluated on the discontinuity line y = alpha."""


class Metric(Enum):
    EUCLIDEAN = "euclidean"
    SUP = "sup"


def distance(a, b, metric: Metric) -> float:
    """Distance between coordinate pairs ``a`` and ``b``."""
    dx = abs(a[0] - b[0])
    dy = abs(a[1] - b[1])
    if metric is Metric.SUP:
        return max(dx, dy)
    return math.hypot(dx, dy)


@dataclass(frozen=True)
class BakerParams:
    """Map parameters: vertical split ``alpha`` and the two horizontal
    contraction ratios.  ``gamma_a + gamma_b <= 1`` keeps the image strips
    disjoint."""

    alpha: float
    gamma_a: float
    gamma_b: float

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0,1), got {self.alpha}")
        for name in ("gamma_a", "gamma_b"):
            g = getattr(self, name)
            if not 0.0 < g < 1.0:
                raise ValueError(f"{name} must lie in (0,1), got {g}")
        if self.gamma_a + self.gamma_b > 1.0 + 1e-15:
            raise ValueError("gamma_a + gamma_b must not exceed 1")

    @property
    def beta(self) -> float:
        return 1.0 - self.alpha

    def classical(self) -> bool:
        """True for the measure-preserving case alpha = gamma_a = gamma_b = 1/2."""
        return self.alpha == 0.5 and self.gamma_a == 0.5 and self.gamma_b == 0.5

    @classmethod
    def symmetric(cls, gamma: float = 0.5, alpha: float = 0.5) -> "BakerParams":
        """Equal horizontal contractions (the usual configuration)."""
        return cls(alpha=alpha, gamma_a=gamma, gamma_b=gamma)


@dataclass(frozen=True)
class SymbolicPoint:
    """A point encoded as a window into a 0/1 symbol buffer.

    ``symbols[cursor]`` is the symbol at time 0.  Entries before the cursor
    are the past (most remote first), entries from the cursor on are the
    future.  Shifted copies share the buffer, so a shift is O(1) and an
    orbit of length n costs one up-front allocation of n + 2*depth symbols.

    ``padding`` selects what happens when an evaluation asks for more
    symbols than stored: ``"strict"`` raises, ``"zero"`` treats missing
    symbols as 0 (bias at most contraction**depth).
    """

    symbols: np.ndarray
    cursor: int
    params: BakerParams
    padding: str = "strict"

    def __post_init__(self):
        sym = np.ascontiguousarray(self.symbols, dtype=np.uint8)
        if sym.ndim != 1:
            raise ValueError("symbol buffer must be one-dimensional")
        if sym.size and sym.max() > 1:
            raise ValueError("symbols must be 0 or 1")
        if not 0 <= self.cursor <= sym.size:
            raise ValueError("cursor outside symbol buffer")
        if self.padding not in ("strict", "zero"):
            raise ValueError(f"unknown padding mode {self.padding!r}")
        sym.setflags(write=False)
        object.__setattr__(self, "symbols", sym)

    @property
    def n_past(self) -> int:
        return self.cursor

    @property
    def n_future(self) -> int:
        return self.symbols.size - self.cursor

    def past_window(self, depth: int) -> np.ndarray:
        """Symbols s_{-depth} .. s_{-1} in chronological order."""
        if depth <= self.n_past:
            return self.symbols[self.cursor - depth:self.cursor]
        if self.padding == "strict":
            raise InsufficientDepthError(
                f"need {depth} past symbols, have {self.n_past}")
        out = np.zeros(depth, dtype=np.uint8)
        out[depth - self.n_past:] = self.symbols[:self.cursor]
        return out

    def future_window(self, depth: int) -> np.ndarray:
        """Symbols s_0 .. s_{depth-1}."""
        if depth <= self.n_future:
            return self.symbols[self.cursor:self.cursor + depth]
        if self.padding == "strict":
            raise InsufficientDepthError(
                f"need {depth} future symbols, have {self.n_future}")
        out = np.zeros(depth, dtype=np.uint8)
        out[:self.n_future] = self.symbols[self.cursor:]
        return out

    def coords(self, depth: int = DEFAULT_DEPTH) -> tuple[float, float]:
        return evaluate_coords(self, depth)


def evaluate_coords(p: SymbolicPoint, depth: int = DEFAULT_DEPTH) -> tuple[float, float]:
    """Coordinates of ``p`` from ``depth`` symbols on each side.

    x folds the past through the contractions f0(x) = gamma_a*x,
    f1(x) = 1 - gamma_b + gamma_b*x (most remote symbol innermost); y folds
    the future through the inverse branches of the expanding base map.
    """
    if depth < 1:
        raise ValueError("depth must be positive")
    pr = p.params
    x = 0.0
    for s in p.past_window(depth):
        x = 1.0 - pr.gamma_b + pr.gamma_b * x if s else pr.gamma_a * x
    y = 0.0
    for s in p.future_window(depth)[::-1]:
        y = pr.alpha + pr.beta * y if s else pr.alpha * y
    return x, y


def apply_shift(p: SymbolicPoint, steps: int = 1) -> SymbolicPoint:
    """Advance the cursor by ``steps``; realizes that many map applications."""
    if steps < 0:
        raise ValueError("steps must be nonnegative")
    if steps > p.n_future:
        raise InsufficientDepthError(
            f"shift by {steps} exceeds {p.n_future} stored future symbols")
    if steps == 0:
        return p
    return dataclasses.replace(p, cursor=p.cursor + steps)


def apply_map_coords(params: BakerParams, x: float, y: float) -> tuple[float, float]:
    """One application of the two-branch coordinate map."""
    if not (0.0 <= x <= 1.0 and 0.0 <= y <= 1.0):
        raise ValueError(f"point ({x}, {y}) outside the unit square")
    if y == params.alpha:
        raise GammaSingularityError("point on singularity line y = alpha")
    if y < params.alpha:
        return params.gamma_a * x, y / params.alpha
    return 1.0 - params.gamma_b + params.gamma_b * x, (y - params.alpha) / params.beta


def minimal_period(word: str) -> int:
    """Smallest p such that ``word`` is a repetition of its first p symbols."""
    n = len(word)
    for p in range(1, n + 1):
        if n % p == 0 and word == word[:p] * (n // p):
            return p
    return n


def periodic_point(params: BakerParams, word: str, depth: int = DEFAULT_DEPTH,
                   steps: int = 0) -> tuple[SymbolicPoint, int]:
    """Point coded by the bi-infinite repetition of ``word``.

    Returns the point together with the minimal period (``word`` may be a
    power of a shorter word).  The buffer holds ``depth`` past symbols and
    ``depth + steps`` future symbols so the point can be shifted ``steps``
    times and still evaluated at full depth.
    """
    if not word or any(c not in "01" for c in word):
        raise ValueError("word must be a nonempty string over {0,1}")
    p = minimal_period(word)
    bits = np.fromiter((int(c) for c in word), dtype=np.uint8)
    total = depth + depth + steps
    idx = (np.arange(total) - depth) % len(word)
    return SymbolicPoint(bits[idx], depth, params), p
