"""Closed-form cell integrals and the per-cell Gaussian covariance block.

Everything in the simulation scheme reduces to integrals of powers of the
distance over unit grid cells.  With box(j, e) = integral of ||x||**e over the
unit square centred at the integer point j, the covariances of the cell-local
Gaussian family are

    Var(plain cell mass)               = n**-2
    Cov(plain, power integral at j)     = n**(-2-a) * box(j, a)
    Var(power integral at j)            = n**(-2-2a) * box(j, 2a)
    Cov(power at j, power at k), j!=k   = n**(-2-2a) * cross integral (numeric)

where a is the roughness exponent.  box() itself has a closed form built from
integrals of ||x||**e over right triangles, which reduce to the Gauss
hypergeometric 2F1(1/2, 3/2 + e/2; 3/2; z); that is the only special function
the closed forms need.

The module also provides the per-cell evaluation-point policy (midpoint vs
L2-optimal radius), the optimal central-cell coefficient, and the
discretization constant J that the scaled mean-squared error converges to.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import NotPositiveDefiniteError, ValidationError
from .quadrature import (
    integrate_box,
    radial_unit_box_integral,
    square_exterior_radial_integral,
)
from .specfun import hyp2f1_half

__all__ = [
    "EvaluationPolicy",
    "DEFAULT_POLICY",
    "triangle_integral",
    "box_power_integral",
    "cross_covariance_integral",
    "CovarianceBlock",
    "build_block",
    "optimal_b_norm",
    "representative_radius",
    "central_L_coefficient",
    "j_constant",
]


# ---------------------------------------------------------------------------
# Evaluation-point policy

_MODES = ("midpoint", "optimal")
_CENTRAL_MODES = ("optimal_norm", "optimal_L")


@dataclass(frozen=True)
class EvaluationPolicy:
    """Where the kernel's slowly varying factor is evaluated on each cell.

    mode: radius representing a non-central cell j --
        "midpoint"  uses ||j||
        "optimal"   uses the L2-optimal radius box(j, a)**(1/a)
    central_mode: treatment of the central cell's weight --
        "optimal_norm" evaluates L at the optimal radius of the central cell
        "optimal_L"    uses the exact L2-optimal constant (a weighted average
                       of L over the cell); this is the default and is what
                       the error analysis assumes for the central cell
    """

    mode: str = "midpoint"
    central_mode: str = "optimal_L"

    def __post_init__(self):
        if self.mode not in _MODES:
            raise ValidationError(f"policy mode must be one of {_MODES}")
        if self.central_mode not in _CENTRAL_MODES:
            raise ValidationError(
                f"policy central_mode must be one of {_CENTRAL_MODES}"
            )


DEFAULT_POLICY = EvaluationPolicy()


# ---------------------------------------------------------------------------
# Triangle and box integrals (closed form)


def _check_exponent(e: float):
    if not -2.0 < e <= 0.0:
        raise ValidationError(
            f"power-integral exponent must be in (-2, 0] (integrable singular "
            f"powers), got {e}"
        )


def _tr_array(p, q, e: float):
    """Integral of ||x||**e over the triangle {q <= y <= x <= p}, vectorized.

    Requires 0 <= q <= p elementwise (p == q gives 0).  Derivation: in polar
    coordinates the ray at angle t crosses y = q at r = q/sin(t) and x = p at
    r = p/cos(t), and the angular antiderivative of cos(t)**-(e+2) (resp. sin)
    is s*2F1(1/2, (e+3)/2; 3/2; s**2) with s = sin(t) (resp. -, s = cos(t)).
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    p, q = np.broadcast_arrays(p, q)
    out = np.zeros(p.shape, dtype=float)

    c = 1.5 + e / 2.0
    f_half = hyp2f1_half(c, 0.5)
    s2 = math.sqrt(2.0)

    nz = p > q  # p == q is a zero-area triangle
    if np.any(nz):
        pp, qq = p[nz], q[nz]
        rho2 = pp * pp + qq * qq
        term1 = (pp ** (e + 2.0) + qq ** (e + 2.0)) * (f_half / (s2 * (e + 2.0)))
        # q = 0: the angular lower limit is 0 and only term1 survives.
        res = term1
        pos = qq > 0.0
        if np.any(pos):
            pq, qv, r2 = pp[pos], qq[pos], rho2[pos]
            rho = np.sqrt(r2)
            f_p = hyp2f1_half(c, pq * pq / r2)  # z in (1/2, 1)
            f_q = hyp2f1_half(c, qv * qv / r2)  # z in [0, 1/2)
            res = res.copy()
            res[pos] -= (pq * qv ** (e + 2.0) * f_p + qv * pq ** (e + 2.0) * f_q) / (
                rho * (e + 2.0)
            )
        out[nz] = res
    return out


def triangle_integral(p: float, q: float, exponent: float) -> float:
    """Integral of ||x||**e over the triangle {q <= y <= x <= p}.

    Requires 0 <= q < p (a proper triangle) and exponent in (-2, 0].
    """
    _check_exponent(exponent)
    if not (0.0 <= q < p):
        raise ValidationError(f"triangle_integral needs 0 <= q < p, got {p}, {q}")
    return float(_tr_array(p, q, exponent)[()])


def _box_array(j1, j2, e: float):
    """box((j1, j2), e) for canonical integer cells j1 >= j2 >= 0, vectorized.

    Assembles the unit square centred at (j1, j2) from triangle integrals,
    using the dihedral symmetry of ||.||:
      origin          8 * tr(1/2, 0)
      diagonal j1=j2  2 * tr(j1+1/2, j1-1/2)
      axis j2=0       2 * [tr+ - tr- on the half strip [j1-+1/2] x [0, 1/2]]
      interior        four-corner difference of triangles
    """
    j1 = np.asarray(j1, dtype=float)
    j2 = np.asarray(j2, dtype=float)
    j1, j2 = np.broadcast_arrays(j1, j2)
    out = np.empty(j1.shape, dtype=float)

    origin = (j1 == 0) & (j2 == 0)
    diag = (j1 == j2) & ~origin
    axis = (j2 == 0) & ~origin
    interior = ~(origin | diag | axis)

    if np.any(origin):
        out[origin] = 8.0 * _tr_array(0.5, 0.0, e)[()]
    if np.any(diag):
        a = j1[diag]
        out[diag] = 2.0 * _tr_array(a + 0.5, a - 0.5, e)
    if np.any(axis):
        a = j1[axis]
        out[axis] = 2.0 * (
            _tr_array(a + 0.5, 0.0, e)
            - _tr_array(a - 0.5, 0.0, e)
            - _tr_array(a + 0.5, 0.5, e)
            + _tr_array(a - 0.5, 0.5, e)
        )
    if np.any(interior):
        a, b = j1[interior], j2[interior]
        out[interior] = (
            _tr_array(a + 0.5, b - 0.5, e)
            - _tr_array(a - 0.5, b - 0.5, e)
            - _tr_array(a + 0.5, b + 0.5, e)
            + _tr_array(a - 0.5, b + 0.5, e)
        )
    return out


def _canonical_cell(j) -> tuple[int, int]:
    a, b = int(j[0]), int(j[1])
    a, b = abs(a), abs(b)
    return (a, b) if a >= b else (b, a)


@lru_cache(maxsize=None)
def _box_cached(j1: int, j2: int, e: float) -> float:
    return float(_box_array(j1, j2, e)[()])


def box_power_integral(j, exponent: float) -> float:
    """Integral of ||x||**exponent over the unit square centred at integer j.

    Exact closed form (hypergeometric); exponent in (-2, 0].  j must already
    be an octant representative 0 <= j2 <= j1 — callers reduce by the eight
    grid symmetries first (see _canonical_cell).  The integrand is singular
    only on the central cell, where the integral is still finite.
    """
    _check_exponent(exponent)
    a, b = int(j[0]), int(j[1])
    if not 0 <= b <= a:
        raise ValidationError(
            f"box_power_integral needs an octant representative 0 <= j2 <= j1, "
            f"got {tuple(j)}; reduce by symmetry first"
        )
    return _box_cached(a, b, float(exponent))


# ---------------------------------------------------------------------------
# Cross covariance of two power integrals on the same cell (numeric)

_D4 = (
    (1, 0, 0, 1),
    (-1, 0, 0, 1),
    (1, 0, 0, -1),
    (-1, 0, 0, -1),
    (0, 1, 1, 0),
    (0, -1, 1, 0),
    (0, 1, -1, 0),
    (0, -1, -1, 0),
)


def _canonical_pair(ja, jb):
    """Canonical representative of {ja, jb} under the square's symmetries.

    The cross integral is invariant under applying one dihedral map to both
    offsets and under swapping them; the representative is the lexicographic
    minimum over those 16 images, which keys the cache.
    """
    best = None
    for m in _D4:
        pa = (m[0] * ja[0] + m[1] * ja[1], m[2] * ja[0] + m[3] * ja[1])
        pb = (m[0] * jb[0] + m[1] * jb[1], m[2] * jb[0] + m[3] * jb[1])
        cand = (pa, pb) if pa <= pb else (pb, pa)
        if best is None or cand < best:
            best = cand
    return best


@lru_cache(maxsize=None)
def _cross_cached(pair, alpha: float, tol_abs: float) -> float:
    (a1, a2), (b1, b2) = pair
    singular = (a1 == 0 and a2 == 0) or (b1 == 0 and b2 == 0)

    def f(x, y):
        ra = np.sqrt((a1 - x) ** 2 + (a2 - y) ** 2)
        rb = np.sqrt((b1 - x) ** 2 + (b2 - y) ** 2)
        return ra**alpha * rb**alpha

    val, _ = integrate_box(
        f,
        (-0.5, 0.5, -0.5, 0.5),
        tol_abs=tol_abs,
        singular_point=(0.0, 0.0) if singular else None,
    )
    return val


def cross_covariance_integral(ja, jb, alpha: float, tol_abs: float = 1e-10) -> float:
    """Integral over the unit cell at 0 of ||ja - u||**a * ||jb - u||**a du.

    This is the unscaled covariance of the two power integrals anchored at
    offsets ja != jb over the same cell.  Singular (integrably) at u = 0 when
    one offset is the origin; adaptive panels split there.
    """
    if not -1.0 < alpha < 0.0:
        raise ValidationError(f"alpha must be in (-1, 0), got {alpha}")
    ja = (int(ja[0]), int(ja[1]))
    jb = (int(jb[0]), int(jb[1]))
    if ja == jb:
        # Equal offsets are the diagonal entries, which have the closed form
        # box_power_integral(j, 2*alpha) — not this routine's job.
        raise ValidationError("cross_covariance_integral requires ja != jb")
    return _cross_cached(_canonical_pair(ja, jb), float(alpha), float(tol_abs))


# ---------------------------------------------------------------------------
# Covariance block of the cell-local Gaussian family


@dataclass(frozen=True)
class CovarianceBlock:
    """Joint covariance of one cell's Gaussian integrals, with its factor.

    offsets lists the anchor offsets of the power integrals in row order; the
    final row/column belongs to the plain cell mass.  matrix is the full
    covariance at grid resolution n; chol is its lower Cholesky factor.
    """

    alpha: float
    kappa: int
    n: int
    offsets: tuple
    matrix: np.ndarray
    chol: np.ndarray

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


def _block_offsets(kappa: int):
    rng = range(-kappa, kappa + 1)
    return tuple((a, b) for a in rng for b in rng)


@lru_cache(maxsize=32)
def _base_matrix(alpha: float, kappa: int, tol: float) -> np.ndarray:
    """Unscaled (n = 1) covariance of ((power integrals)_j, plain mass)."""
    offs = _block_offsets(kappa)
    d = len(offs) + 1
    m = np.empty((d, d), dtype=float)
    for i, ja in enumerate(offs):
        m[i, i] = box_power_integral(_canonical_cell(ja), 2.0 * alpha)
        for k in range(i + 1, len(offs)):
            v = cross_covariance_integral(ja, offs[k], alpha, tol_abs=tol)
            m[i, k] = m[k, i] = v
        v = box_power_integral(_canonical_cell(ja), alpha)
        m[i, -1] = m[-1, i] = v
    m[-1, -1] = 1.0
    return m


def build_block(alpha: float, kappa: int, n: int, tol: float = 1e-10) -> CovarianceBlock:
    """Covariance block and Cholesky factor for grid resolution n.

    The n-dependence is a diagonal similarity: scaling each power integral by
    n**(-1-alpha) and the plain mass by n**(-1) maps the unit-resolution
    matrix to the resolution-n one exactly, and the Cholesky factor scales the
    same way.
    """
    if not -1.0 < alpha < 0.0:
        raise ValidationError(f"alpha must be in (-1, 0), got {alpha}")
    if not (isinstance(kappa, (int, np.integer)) and 0 <= kappa <= 5):
        raise ValidationError(f"kappa must be an integer in 0..5, got {kappa}")
    if not (isinstance(n, (int, np.integer)) and n >= 1):
        raise ValidationError(f"n must be a positive integer, got {n}")
    if not tol > 0.0:
        raise ValidationError(f"tol must be positive, got {tol}")

    base = _base_matrix(float(alpha), int(kappa), float(tol))
    offs = _block_offsets(int(kappa))
    d = base.shape[0]
    scale = np.full(d, float(n) ** (-1.0 - alpha))
    scale[-1] = 1.0 / float(n)
    matrix = base * scale[:, None] * scale[None, :]
    # The two scale multiplications associate differently above and below the
    # diagonal (1-ulp asymmetry); store the symmetrized matrix so callers see
    # exactly what gets factored.
    matrix = 0.5 * (matrix + matrix.T)

    sym = matrix
    try:
        chol = np.linalg.cholesky(sym)
    except np.linalg.LinAlgError:
        jitter = 1e-12 * np.trace(sym) / d
        try:
            chol = np.linalg.cholesky(sym + jitter * np.eye(d))
        except np.linalg.LinAlgError as exc:
            raise NotPositiveDefiniteError(
                f"covariance block (alpha={alpha}, kappa={kappa}, n={n}) "
                f"failed Cholesky even with jitter {jitter:.3e}"
            ) from exc

    return CovarianceBlock(
        alpha=float(alpha),
        kappa=int(kappa),
        n=int(n),
        offsets=offs,
        matrix=matrix,
        chol=chol,
    )


# ---------------------------------------------------------------------------
# Evaluation radii and the central-cell coefficient


def optimal_b_norm(j, alpha: float) -> float:
    """L2-optimal evaluation radius for cell j: box(j, alpha)**(1/alpha).

    Matching the cell average of ||x||**alpha exactly: the power evaluated at
    this radius equals the cell mean of the power.  Lies within 1/sqrt(2) of
    ||j|| (the cell's circumradius).
    """
    if not -1.0 < alpha < 0.0:
        raise ValidationError(f"alpha must be in (-1, 0), got {alpha}")
    return box_power_integral(_canonical_cell(j), alpha) ** (1.0 / alpha)


def representative_radius(j, alpha: float, policy: EvaluationPolicy) -> float:
    """Radius standing in for cell j under the policy (non-central cells).

    For the central cell under central_mode="optimal_norm" this is the
    optimal radius; under "optimal_L" the weight is not a radius evaluation
    at all -- see central_L_coefficient.
    """
    a, b = int(j[0]), int(j[1])
    if a == 0 and b == 0:
        return optimal_b_norm(j, alpha)
    if policy.mode == "midpoint":
        return math.hypot(a, b)
    return optimal_b_norm(j, alpha)


def central_L_coefficient(kernel, n: int, tol: float = 1e-12) -> float:
    """L2-optimal constant weight for the central cell.

    Minimizing the central-cell contribution to the squared error over a
    constant weight w gives the power-weighted average of L over the cell:

        w* = int ||u||**(2a) L(||u||/n) du  /  int ||u||**(2a) du,

    both integrals over the unit cell (the denominator is box(0, 2a)).
    """
    alpha = kernel.alpha
    breaks = ()
    R = getattr(kernel, "R", None)
    if R is not None and n * R < 1.0 / math.sqrt(2.0):
        breaks = (n * R,)  # hard-cutoff kernels kink inside the cell

    def fr(r):
        return r ** (2.0 * alpha) * kernel.eval_L(r / n)

    num, _ = radial_unit_box_integral(fr, tol=tol, breakpoints=breaks)
    return num / box_power_integral((0, 0), 2.0 * alpha)


# ---------------------------------------------------------------------------
# Discretization constant J


def j_constant(
    alpha: float,
    kappa: int,
    policy: EvaluationPolicy = DEFAULT_POLICY,
    truncation: int | None = None,
) -> float:
    """Limit constant of the scaled mean-squared simulation error.

    J = sum over cells j outside the inner (2*kappa+1)^2 block of
        int over the cell of (||x||**alpha - r_j**alpha)**2 dx,
    with r_j the policy's representative radius.  Closed form per cell:
        midpoint: box(j,2a) - 2*||j||**a * box(j,a) + ||j||**(2a)
        optimal:  box(j,2a) - box(j,a)**2
    The sum is truncated at ||j||_inf <= T and completed with the leading
    gradient term of the tail, (alpha**2/12) * int_{||x||_inf > T+1/2}
    ||x||**(2a-2) dx, whose relative error is O(T**-2).
    """
    if not -1.0 < alpha < 0.0:
        raise ValidationError(f"alpha must be in (-1, 0), got {alpha}")
    if not 0 <= int(kappa) == kappa:
        raise ValidationError(f"kappa must be a nonnegative integer, got {kappa}")
    T = int(truncation) if truncation is not None else max(64, 10 * int(kappa) + 10)
    if T < 10 * kappa + 10:
        raise ValidationError(
            f"truncation {T} too small: need >= 10*kappa+10 = {10 * kappa + 10} "
            f"for the tail estimate to hold"
        )

    # Octant representatives j1 >= j2 >= 0 with kappa < j1 <= T.
    j1s, j2s, mult = [], [], []
    for a in range(int(kappa) + 1, T + 1):
        for b in range(0, a + 1):
            j1s.append(a)
            j2s.append(b)
            mult.append(4.0 if (b == 0 or b == a) else 8.0)
    j1 = np.array(j1s, dtype=float)
    j2 = np.array(j2s, dtype=float)
    mult = np.array(mult)

    box2a = _box_array(j1, j2, 2.0 * alpha)
    boxa = _box_array(j1, j2, alpha)
    if policy.mode == "midpoint":
        r_a = np.hypot(j1, j2) ** alpha
        per_cell = box2a - 2.0 * r_a * boxa + r_a**2
    else:
        per_cell = box2a - boxa**2

    body = float(np.sum(mult * per_cell))

    tail, _ = square_exterior_radial_integral(
        lambda r: r ** (2.0 * alpha - 2.0), T + 0.5
    )
    return body + (alpha**2 / 12.0) * tail
