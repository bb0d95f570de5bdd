"""Tests for the adaptive and radial quadrature helpers.

Oracles: elementary closed forms (polynomials, powers of the radius over
squares and annular regions) plus scipy.integrate.dblquad as an independent
adaptive routine.
"""

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import dblquad

from vmma.errors import QuadratureError
from vmma.quadrature import (
    gauss_nodes,
    integrate_box,
    radial_cell_integral,
    radial_unit_box_integral,
    square_exterior_radial_integral,
)

# int over the unit square of ||u||^-1: 8 * int_0^{pi/4} int_0^{sec(t)/2} dr dt
# = 4*asinh(1) = 4*ln(1+sqrt(2)).
CENTRAL_INVERSE_RADIUS = 4.0 * math.asinh(1.0)


# ---------------------------------------------------------------------------
# gauss_nodes / integrate_box
# ---------------------------------------------------------------------------


def test_gauss_nodes_integrate_polynomials_exactly():
    # m-point Gauss-Legendre is exact through degree 2m-1 on [0, 1].
    x, w = gauss_nodes(6)
    for k in range(0, 12):
        assert np.dot(w, x**k) == pytest.approx(1.0 / (k + 1), rel=1e-14)


def test_integrate_box_separable_polynomial():
    val, err = integrate_box(lambda x, y: x * y, (0.0, 1.0, 0.0, 1.0))
    assert val == pytest.approx(0.25, abs=1e-13)
    assert err <= 1e-12


def test_integrate_box_smooth_vs_dblquad():
    f = lambda x, y: np.exp(-(x**2) - 0.5 * y**2) * np.cos(x + y)
    val, _ = integrate_box(f, (-1.0, 2.0, 0.0, 1.5), tol_abs=1e-11)
    ref, _ = dblquad(lambda y, x: f(x, y), -1.0, 2.0, 0.0, 1.5, epsabs=1e-12)
    assert val == pytest.approx(ref, abs=1e-10)


def test_integrate_box_corner_singularity():
    # ||u||^-1 over the unit square, singular point at the origin placed on
    # panel corners; closed form 4*asinh(1).
    def f(x, y):
        return 1.0 / np.hypot(x, y)

    val, err = integrate_box(
        f, (-0.5, 0.5, -0.5, 0.5), tol_abs=1e-9, max_panels=200000,
        singular_point=(0.0, 0.0),
    )
    assert val == pytest.approx(CENTRAL_INVERSE_RADIUS, abs=5e-9)


def test_integrate_box_budget_exhaustion_raises():
    def f(x, y):
        return 1.0 / np.hypot(x, y)

    with pytest.raises(QuadratureError):
        integrate_box(
            f, (-0.5, 0.5, -0.5, 0.5), tol_abs=1e-14, max_panels=64,
            singular_point=(0.0, 0.0),
        )


def test_integrate_box_rejects_degenerate_rectangle():
    with pytest.raises(QuadratureError):
        integrate_box(lambda x, y: x, (1.0, 1.0, 0.0, 1.0))


# ---------------------------------------------------------------------------
# radial_unit_box_integral
# ---------------------------------------------------------------------------


def test_radial_unit_box_constant_gives_area():
    val, err = radial_unit_box_integral(lambda r: np.ones_like(r))
    assert val == pytest.approx(1.0, abs=1e-12)


def test_radial_unit_box_r_squared():
    # int_{[-1/2,1/2]^2} (x^2 + y^2) = 2 * 1/12 = 1/6.
    val, _ = radial_unit_box_integral(lambda r: r**2)
    assert val == pytest.approx(1.0 / 6.0, abs=1e-12)


def test_radial_unit_box_inverse_radius():
    val, _ = radial_unit_box_integral(lambda r: 1.0 / r)
    assert val == pytest.approx(CENTRAL_INVERSE_RADIUS, abs=1e-11)


def test_radial_unit_box_indicator_breakpoint():
    # Disc of radius 0.4 inside the square: area pi * 0.16.
    val, _ = radial_unit_box_integral(
        lambda r: (r <= 0.4).astype(float), breakpoints=(0.4,)
    )
    assert val == pytest.approx(math.pi * 0.16, abs=1e-10)


# ---------------------------------------------------------------------------
# square_exterior_radial_integral
# ---------------------------------------------------------------------------


def test_square_exterior_area_closed_form():
    # fr = 1 up to radius U > a*sqrt(2): area = pi U^2 - (2a)^2.
    val, _ = square_exterior_radial_integral(
        lambda r: 1.0, half_side=1.0, upper=3.0
    )
    assert val == pytest.approx(math.pi * 9.0 - 4.0, abs=1e-10)


def test_square_exterior_inverse_quartic():
    # fr = r^-4 outside [-a,a]^2.  Octant polar reduction gives the closed
    # form 8 * int_0^{pi/4} cos^2(t)/(2 a^2) dt = pi/(2 a^2) + 1/a^2.
    for a in (1.0, 2.5):
        ref = math.pi / (2.0 * a * a) + 1.0 / (a * a)
        val, _ = square_exterior_radial_integral(lambda r: r**-4.0, half_side=a)
        assert val == pytest.approx(ref, rel=1e-11)


def test_square_exterior_breakpoint_on_infinite_leg():
    # Piecewise fr with a kink beyond the diagonal: fr = 1 on [a*sqrt2, 5],
    # 0 after.  Area = pi * 25 - 4 a^2  with a*sqrt(2) < 5.
    a = 1.0

    def fr(r):
        return 1.0 if r <= 5.0 else 0.0

    val, _ = square_exterior_radial_integral(fr, half_side=a, breakpoints=(5.0,))
    assert val == pytest.approx(math.pi * 25.0 - 4.0, abs=1e-8)


def test_square_exterior_rejects_bad_half_side():
    with pytest.raises(QuadratureError):
        square_exterior_radial_integral(lambda r: 1.0, half_side=0.0)


# ---------------------------------------------------------------------------
# radial_cell_integral
# ---------------------------------------------------------------------------


def _cell_rect(a, b):
    return (a - 0.5, a + 0.5, b - 0.5, b + 0.5)


def test_radial_cell_constant_gives_cell_area():
    for a, b in [(1, 0), (1, 1), (3, 2)]:
        val, _ = radial_cell_integral(lambda r: 1.0, a, b)
        assert val == pytest.approx(1.0, abs=1e-12), (a, b)


def test_radial_cell_vs_dblquad_smooth():
    for a, b in [(1, 0), (2, 1), (3, 3)]:
        fr = lambda r: math.exp(-r) * r**-0.5
        val, _ = radial_cell_integral(fr, a, b)
        x0, x1, y0, y1 = _cell_rect(a, b)
        if b == 0:
            # off-axis cells are mirrored about y=0 inside the octant
            # representative, matching the covariance cell convention
            ref1, _ = dblquad(
                lambda y, x: fr(math.hypot(x, y)), x0, x1, 0.0, y1, epsabs=1e-12
            )
            ref2, _ = dblquad(
                lambda y, x: fr(math.hypot(x, y)), x0, x1, y0, 0.0, epsabs=1e-12
            )
            ref = ref1 + ref2
        else:
            ref, _ = dblquad(
                lambda y, x: fr(math.hypot(x, y)), x0, x1, y0, y1, epsabs=1e-12
            )
        assert val == pytest.approx(ref, rel=1e-10), (a, b)


def test_radial_cell_power_law_vs_dblquad():
    # Negative powers, including strongly singular-ish decay near cell (1,0).
    for e in (-1.8, -1.0, -0.2):
        val, _ = radial_cell_integral(lambda r: r**e, 1, 0)
        x0, x1, y0, y1 = _cell_rect(1, 0)
        ref, _ = dblquad(
            lambda y, x: (x * x + y * y) ** (e / 2.0), x0, x1, y0, y1,
            epsabs=1e-12,
        )
        assert val == pytest.approx(ref, rel=1e-9), e


def test_radial_cell_indicator_disc_area():
    # Disc of radius 2.2 clipped to the cell centred at (2, 0): compare the
    # angular-measure construction against dblquad of the indicator.
    R = 2.2
    val, _ = radial_cell_integral(
        lambda r: 1.0 if r <= R else 0.0, 2, 0, breakpoints=(R,)
    )
    x0, x1, y0, y1 = _cell_rect(2, 0)
    # Exact area of {x in [1.5, 2.5], |y| <= ..., x^2+y^2 <= R^2}:
    # integrate width 2*sqrt(R^2-x^2) clipped to the cell height 1.
    from scipy.integrate import quad

    def width(x):
        if x >= R:
            return 0.0
        return min(1.0, 2.0 * math.sqrt(R * R - x * x))

    ref, _ = quad(width, x0, min(x1, R), epsabs=1e-13, points=[math.sqrt(R * R - 0.25)])
    assert val == pytest.approx(ref, abs=1e-10)


@given(
    a=st.integers(1, 6),
    b=st.integers(0, 6),
    e=st.floats(-1.9, -0.1),
)
def test_radial_cell_power_law_property(a, b, e):
    if b > a:
        a, b = b, a
    val, err = radial_cell_integral(lambda r: r**e, a, b)
    assert val > 0.0
    assert err < 1e-9
    # The integrand is bounded by the min/max radius over the cell.
    rmax = math.hypot(a + 0.5, b + 0.5)
    rmin = max(a - 0.5, 1e-9) if b == 0 else math.hypot(a - 0.5, max(b - 0.5, 0.0))
    assert rmax**e <= val <= rmin**e


def test_radial_cell_rejects_central_cell():
    with pytest.raises(Exception):
        radial_cell_integral(lambda r: 1.0, 0, 0)
