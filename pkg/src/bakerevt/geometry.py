"""Closed-form and quadrature references for periodic-point clustering.

The sup-metric extremal index at a periodic point is one minus the vertical
contraction accumulated over one period.  With the Euclidean metric the
corresponding ratios are areas of a disk intersected with its images under
the diagonal scalings diag(2^{ip}, 2^{-ip}); these are computed by a 1-D
adaptive-Simpson reduction (the intersection is symmetric in x and
vertically convex, so integrating the minimum vertical extent is exact).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from importlib import resources

from .quadrature import adaptive_simpson
from .symbolic import BakerParams, minimal_period

#: absolute tolerance used for the shipped reference constants
QUADRATURE_TOL = 1e-9


@dataclass(frozen=True)
class PeriodicGeometry:
    """Per-period contraction data of a periodic itinerary."""

    params: BakerParams
    word: str
    p: int                     # minimal period
    y_contraction: float       # product of alpha/beta along the word
    x_expansion: float         # product of 1/gamma along the word

    @classmethod
    def from_word(cls, params: BakerParams, word: str) -> "PeriodicGeometry":
        if not word or any(c not in "01" for c in word):
            raise ValueError("word must be a nonempty string over {0,1}")
        p = minimal_period(word)
        w = word[:p]
        y = 1.0
        xinv = 1.0
        for c in w:
            y *= params.beta if c == "1" else params.alpha
            xinv *= params.gamma_b if c == "1" else params.gamma_a
        return cls(params, w, p, y, 1.0 / xinv)

    @property
    def uniform_split(self) -> bool:
        """True when alpha = beta, the setting with the clean closed form."""
        return self.params.alpha == 0.5


def theta_sup(geom: PeriodicGeometry) -> float:
    """Sup-metric extremal index at the periodic point: 1 minus the
    per-period vertical contraction (1 - alpha^p when alpha = beta; the
    general word-product value is an extension, see ``uniform_split``)."""
    return 1.0 - geom.y_contraction


def _min_height(u: float, p: int, k: int) -> float:
    """Smallest vertical half-extent at abscissa u over the unit disk and
    its k diagonal-scaled images (semi-axes 2^{ip} by 2^{-ip})."""
    best = math.inf
    for i in range(k + 1):
        s = 2.0 ** (-i * p)
        t = 1.0 - (u * s) ** 2
        h = s * math.sqrt(t) if t > 0.0 else 0.0
        if h < best:
            best = h
    return best


def ellipse_disk_ratio(p: int, k: int, tol: float = QUADRATURE_TOL) -> float:
    """area(D ∩ E_1 ∩ ... ∩ E_k) / area(D) for the unit disk D and
    E_i = diag(2^{ip}, 2^{-ip}) D.  Classical parameters; k = 0 gives 1."""
    if p < 1 or k < 0:
        raise ValueError("need p >= 1 and k >= 0")
    if k == 0:
        return 1.0
    integral = adaptive_simpson(lambda u: _min_height(u, p, k), 0.0, 1.0,
                                tol=tol * math.pi / 4.0)
    return 4.0 / math.pi * integral


def leading_order_ratio(p: int, k: int) -> float:
    """First-order value (4/pi) 2^{-kp} of the intersection ratio."""
    return 4.0 / math.pi * 2.0 ** (-k * p)


def hat_alpha_reference(p: int, k: int,
                        tol: float = QUADRATURE_TOL) -> tuple[float, float]:
    """Quadrature reference for the order-(k+1) self-intersection ratio of
    Euclidean balls at a period-p point, plus its leading-order value."""
    return ellipse_disk_ratio(p, k, tol), leading_order_ratio(p, k)


def strip_ratio_bound(h: float) -> float:
    """Area fraction of the unit disk within the strip |y| <= h; upper
    bound for the intersection ratio with h = 2^{-kp}."""
    h = min(max(h, 0.0), 1.0)
    return 2.0 * (h * math.sqrt(1.0 - h * h) + math.asin(h)) / math.pi


def write_reference_table(path, ps, ks, tol: float = QUADRATURE_TOL) -> list[dict]:
    """Compute intersection ratios over a (p, k) grid and write the
    constants CSV: (p, k, ratio, leading_order, quadrature_tol)."""
    rows = []
    for p in ps:
        for k in ks:
            rows.append({
                "p": p,
                "k": k,
                "ratio": repr(ellipse_disk_ratio(p, k, tol)),
                "leading_order": repr(leading_order_ratio(p, k)),
                "quadrature_tol": repr(tol),
            })
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(
            fh, fieldnames=["p", "k", "ratio", "leading_order", "quadrature_tol"])
        writer.writeheader()
        writer.writerows(rows)
    return rows


def load_reference_table() -> dict[tuple[int, int], float]:
    """Frozen quadrature constants shipped with the package."""
    out = {}
    ref = resources.files("bakerevt").joinpath("data/ellipse_ratios.csv")
    with ref.open("r") as fh:
        for row in csv.DictReader(fh):
            out[(int(row["p"]), int(row["k"]))] = float(row["ratio"])
    return out
