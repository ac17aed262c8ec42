"""Adaptive Simpson quadrature for the closed-form geometry helpers."""

from __future__ import annotations

import math


class QuadratureError(RuntimeError):
    """Adaptive refinement hit the depth limit before reaching tolerance."""


def _simpson(fa: float, fm: float, fb: float, h: float) -> float:
    return h / 6.0 * (fa + 4.0 * fm + fb)


def adaptive_simpson(f, a: float, b: float, tol: float = 1e-9,
                     max_depth: int = 60) -> float:
    """Integrate ``f`` on [a, b] to absolute tolerance ``tol``.

    Standard recursive Simpson with the 1/15 error estimate; raises
    QuadratureError with the offending subinterval if refinement stalls.
    """
    if b <= a:
        return 0.0
    fa, fb = f(a), f(b)
    m = 0.5 * (a + b)
    fm = f(m)
    whole = _simpson(fa, fm, fb, b - a)
    return _recurse(f, a, b, fa, fm, fb, whole, tol, max_depth)


def _recurse(f, a, b, fa, fm, fb, whole, tol, depth):
    m = 0.5 * (a + b)
    lm = 0.5 * (a + m)
    rm = 0.5 * (m + b)
    flm, frm = f(lm), f(rm)
    left = _simpson(fa, flm, fm, m - a)
    right = _simpson(fm, frm, fb, b - m)
    err = left + right - whole
    if abs(err) <= 15.0 * tol or (b - a) < 1e-15 * max(abs(a), abs(b), 1.0):
        return left + right + err / 15.0
    if depth <= 0:
        raise QuadratureError(
            f"no convergence on [{a}, {b}]: estimate {left + right}, "
            f"error {err:.3e}, tolerance {tol:.3e}")
    half = 0.5 * tol
    return (_recurse(f, a, m, fa, flm, fm, left, half, depth - 1)
            + _recurse(f, m, b, fm, frm, fb, right, half, depth - 1))


def clipped_disk_area(cx: float, cy: float, r: float, tol: float = 1e-12) -> float:
    """Area of the disk of radius r at (cx, cy) intersected with [0,1]^2.

    Parametrized as x = cx + r*sin(t) so the integrand has no square-root
    singularity at the disk edge.
    """
    if r <= 0.0:
        return 0.0
    # restrict t to the part of the disk with x in [0, 1]
    def asin_clip(v):
        return math.asin(min(1.0, max(-1.0, v)))

    t_lo = asin_clip((0.0 - cx) / r)
    t_hi = asin_clip((1.0 - cx) / r)
    if t_hi <= t_lo:
        return 0.0

    def height(t):
        h = r * math.cos(t)
        y_lo = max(cy - h, 0.0)
        y_hi = min(cy + h, 1.0)
        return max(y_hi - y_lo, 0.0) * h  # dx = r*cos(t) dt

    return adaptive_simpson(height, t_lo, t_hi, tol=tol)
