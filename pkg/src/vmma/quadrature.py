"""Adaptive 2D quadrature over rectangles, plus radial helpers on squares.

The integrands we meet are smooth away from a single known algebraic
singularity (a power of the distance to a grid point), so a tensor
Gauss-Legendre panel rule with adaptive bisection of the worst panel is both
simple and fast.  Panels never straddle the singular point: the initial
subdivision splits the rectangle there, so every panel sees a smooth (though
possibly steep) integrand.

Error control is the classic embedded-rule estimate: each panel is evaluated
with 16- and 24-point tensor rules and the difference is taken as the panel
error.  Panels are refined worst-first until the summed estimate meets the
absolute tolerance or the panel budget is exhausted.
"""

from __future__ import annotations

import heapq
import math
from functools import lru_cache

import numpy as np
from scipy import integrate as _integrate

from .errors import QuadratureError

__all__ = [
    "integrate_box",
    "radial_unit_box_integral",
    "square_exterior_radial_integral",
    "gauss_nodes",
]


@lru_cache(maxsize=32)
def gauss_nodes(m: int):
    """Gauss-Legendre nodes/weights on [0, 1], cached."""
    x, w = np.polynomial.legendre.leggauss(m)
    return (x + 1.0) / 2.0, w / 2.0


def _panel_pair(f, x0, x1, y0, y1):
    """Return (fine, fine-coarse) tensor-Gauss estimates on one rectangle."""
    est = []
    for m in (16, 24):
        xn, xw = gauss_nodes(m)
        X = x0 + (x1 - x0) * xn
        Y = y0 + (y1 - y0) * xn
        XX, YY = np.meshgrid(X, Y, indexing="ij")
        vals = f(XX, YY)
        est.append((x1 - x0) * (y1 - y0) * (xw[:, None] * xw[None, :] * vals).sum())
    return est[1], abs(est[1] - est[0])


def integrate_box(
    f,
    rect,
    tol_abs: float = 1e-12,
    max_panels: int = 4096,
    singular_point=None,
):
    """Integrate f(x, y) over rect = (x0, x1, y0, y1).

    f must accept broadcast 2D arrays.  If `singular_point` lies strictly
    inside the rectangle the initial mesh is split so the point sits on panel
    corners (the integrand is then evaluated only in panel interiors, never at
    the singularity itself).  Raises QuadratureError if the summed error
    estimate is still above tol_abs after max_panels panel evaluations.

    Returns (value, est_abs_error).
    """
    x0, x1, y0, y1 = (float(v) for v in rect)
    if not (x1 > x0 and y1 > y0):
        raise QuadratureError(f"degenerate rectangle {rect}")

    xs = [x0, x1]
    ys = [y0, y1]
    if singular_point is not None:
        sx, sy = (float(v) for v in singular_point)
        if x0 < sx < x1:
            xs = [x0, sx, x1]
        if y0 < sy < y1:
            ys = [y0, sy, y1]

    # Max-heap on the error estimate (negated for heapq).
    heap = []
    total = 0.0
    err = 0.0
    n_panels = 0
    counter = 0  # tie-breaker so heapq never compares tuples of floats only
    for i in range(len(xs) - 1):
        for j in range(len(ys) - 1):
            v, e = _panel_pair(f, xs[i], xs[i + 1], ys[j], ys[j + 1])
            total += v
            err += e
            heapq.heappush(heap, (-e, counter, xs[i], xs[i + 1], ys[j], ys[j + 1], v, e))
            counter += 1
            n_panels += 1

    while err > tol_abs and heap:
        if n_panels >= max_panels:
            raise QuadratureError(
                f"integrate_box: {n_panels} panels, est error {err:.3e} > tol {tol_abs:.3e}"
            )
        _, _, px0, px1, py0, py1, pv, pe = heapq.heappop(heap)
        total -= pv
        err -= pe
        # Bisect the longer side.
        if (px1 - px0) >= (py1 - py0):
            mid = 0.5 * (px0 + px1)
            kids = [(px0, mid, py0, py1), (mid, px1, py0, py1)]
        else:
            mid = 0.5 * (py0 + py1)
            kids = [(px0, px1, py0, mid), (px0, px1, mid, py1)]
        for kx0, kx1, ky0, ky1 in kids:
            v, e = _panel_pair(f, kx0, kx1, ky0, ky1)
            total += v
            err += e
            heapq.heappush(heap, (-e, counter, kx0, kx1, ky0, ky1, v, e))
            counter += 1
            n_panels += 1

    return total, err


def radial_unit_box_integral(fr, tol: float = 1e-12, breakpoints=()):
    """Integral of fr(||u||) over the unit square [-1/2, 1/2]^2, by radius.

    Uses octant symmetry: the angular measure of the circle of radius r inside
    the square is 8*ang8(r)*r dr with

        ang8(r) = pi/4                      for r <= 1/2
        ang8(r) = pi/4 - arccos(1/(2r))     for 1/2 < r <= 1/sqrt(2).

    `breakpoints` lists extra radii where fr is not smooth.  Returns
    (value, est_abs_error).  fr must accept array input.
    """

    def integrand(r):
        r = np.asarray(r, dtype=float)
        ang = np.full_like(r, np.pi / 4.0)
        m = r > 0.5
        if np.any(m):
            ang[m] -= np.arccos(1.0 / (2.0 * r[m]))
        return 8.0 * fr(r) * r * ang

    hi = 1.0 / np.sqrt(2.0)
    pts = sorted({0.5, *(float(b) for b in breakpoints if 0.0 < b < hi)})
    val, err = _integrate.quad(
        lambda r: float(integrand(np.asarray([r]))[0]),
        0.0,
        hi,
        points=pts,
        epsabs=tol,
        epsrel=1e-13,
        limit=200,
    )
    return val, err


def square_exterior_radial_integral(fr, half_side: float, tol: float = 1e-12,
                                    upper: float = np.inf, breakpoints=()):
    """Integral of fr(||u||) over the region outside the square [-a, a]^2.

    a = half_side.  Split by radius: for a < r < a*sqrt(2) the circle meets
    the square and the angular measure (whole circle) is 8*arccos(a/r); past
    a*sqrt(2) the full circle 2*pi contributes.  `upper` bounds the radial
    integral (np.inf by default; fr must then be integrable at infinity).
    `breakpoints` lists radii where fr is not smooth; the quadrature splits
    there (needed because QUADPACK ignores interior points on infinite
    intervals).

    Returns (value, est_abs_error).
    """
    a = float(half_side)
    if a <= 0:
        raise QuadratureError("square_exterior_radial_integral needs half_side > 0")
    diag = a * np.sqrt(2.0)

    v1 = e1 = 0.0
    if upper > a:
        hi = min(upper, diag)
        pts = sorted(float(b) for b in breakpoints if a < b < hi)
        v1, e1 = _integrate.quad(
            lambda r: 8.0 * np.arccos(a / r) * fr(r) * r,
            a,
            hi,
            points=pts,
            epsabs=tol,
            epsrel=1e-13,
            limit=200,
        )
    v2 = e2 = 0.0
    if upper > diag:
        cuts = [diag] + sorted(float(b) for b in breakpoints if diag < b < upper)
        cuts.append(upper)
        for lo, hi in zip(cuts[:-1], cuts[1:]):
            v, e = _integrate.quad(
                lambda r: 2.0 * np.pi * fr(r) * r,
                lo,
                hi,
                epsabs=tol,
                epsrel=1e-13,
                limit=200,
            )
            v2 += v
            e2 += e
    return v1 + v2, e1 + e2


def _theta_first_quadrant(r: float, x0: float, x1: float, y0: float, y1: float) -> float:
    """Angular measure of {theta in [0, pi/2]: r*(cos t, sin t) in
    [x0,x1]x[y0,y1]} for nonnegative bounds with x0 > 0."""
    if r <= 0.0:
        return 0.0
    hi = min(math.acos(min(x0 / r, 1.0)), math.asin(min(y1 / r, 1.0)))
    lo = max(math.acos(min(x1 / r, 1.0)), math.asin(min(y0 / r, 1.0)))
    return max(0.0, hi - lo)


def radial_cell_integral(fr, a: int, b: int, tol: float = 1e-12, breakpoints=()):
    """Integral of fr(||u||) over the unit cell centred at (a, b), a >= b >= 0,
    a >= 1, by radial reduction.

    The integral becomes int fr(r) * theta(r) * r dr with theta(r) the
    angular measure of the radius-r circle inside the cell — piecewise-smooth
    with kinks only at the corner and edge-foot radii, which (plus any
    caller-supplied fr breakpoints, e.g. a kernel cutoff) are passed to the
    1D adaptive quadrature.  This handles integrands with circular
    discontinuities exactly, where tensor-panel 2D quadrature stalls.

    fr must accept scalar input.  Returns (value, est_abs_error).
    """
    a = int(a)
    b = int(b)
    if not (a >= 1 and 0 <= b <= a):
        raise QuadratureError(
            f"radial_cell_integral needs an octant cell with a >= 1, got {(a, b)}"
        )
    x0, x1 = a - 0.5, a + 0.5
    y0, y1 = b - 0.5, b + 0.5
    if y0 < 0.0:
        # cell straddles the axis: integrate the upper half and mirror it
        parts = ((0.0, y1), (0.0, -y0))
    else:
        parts = ((y0, y1),)

    rmin = x0 if y0 <= 0.0 else math.hypot(x0, y0)
    rmax = math.hypot(x1, y1)

    def theta(r: float) -> float:
        return sum(_theta_first_quadrant(r, x0, x1, lo, hi) for lo, hi in parts)

    corners = {math.hypot(xx, yy) for xx in (x0, x1) for yy in (y0, y1)}
    feet = {x0, x1} if y0 <= 0.0 else set()
    pts = sorted(
        p for p in corners | feet | {float(bp) for bp in breakpoints}
        if rmin < p < rmax
    )
    val, err = _integrate.quad(
        lambda r: fr(r) * theta(r) * r,
        rmin,
        rmax,
        points=pts,
        epsabs=tol,
        epsrel=1e-13,
        limit=200,
    )
    return val, err
