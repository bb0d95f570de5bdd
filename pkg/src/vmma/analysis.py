"""Statistics on simulated grids and deterministic error analysis.

Three groups of tools:

* empirical second moments — empirical_variogram, square_increment_dim —
  estimate smoothness from a single grid; the square-increment estimator is
  the two-scale (lags 1 and 2) log2-ratio form, returning a surface-dimension
  estimate in [2, 3] (2 - alpha for the fields simulated here).
* roughness_study — Monte-Carlo comparison of the simulation schemes: for
  each roughness exponent and scheme it averages the dimension estimator over
  replicates, the protocol behind the `vmma roughness` command.
* hybrid_mse / mse_study / rate_fit — deterministic quadrature decomposition
  of the hybrid scheme's one-point mean squared error into the inner-cell
  weight error (D1), the step-kernel error inside (D2) and outside (D3) the
  unit window, and the truncation tail (D4); n**(2(1+alpha)) * L(1/n)**(-2) *
  E_n converges to the j_constant of the covariance module, and rate_fit
  extracts the empirical convergence exponent.
"""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass

import numpy as np

from .covariance import (
    DEFAULT_POLICY,
    EvaluationPolicy,
    _box_array,
    central_L_coefficient,
    j_constant,
    representative_radius,
)
from .errors import DegenerateDataError, QuadratureError, ValidationError
from .fields import (
    ConstantVol,
    FieldGrid,
    SchemeParams,
    hybrid_simulate,
    prepare_hybrid,
    prepare_riemann,
    riemann_simulate,
    rng_stream,
)
from .kernels import KernelSpec, Matern
from .quadrature import (
    gauss_nodes,
    radial_cell_integral,
    radial_unit_box_integral,
    square_exterior_radial_integral,
)

__all__ = [
    "empirical_variogram",
    "square_increment_dim",
    "SchemeChoice",
    "parse_scheme",
    "RoughnessRow",
    "RoughnessReport",
    "roughness_study",
    "MseEntry",
    "MseReport",
    "hybrid_mse",
    "mse_study",
    "rate_fit",
]


# ---------------------------------------------------------------------------
# Single-grid statistics


def empirical_variogram(grid: FieldGrid, max_lag_cells: int):
    """Mean squared difference at integer cell lags, pooled over both axes.

    Returns a list of (lag, value) pairs with lag = l * spacing for
    l = 1..max_lag_cells; value = average of (X_{s+l*e} - X_s)^2 over all
    positions s and both axis directions e.  Requires max_lag_cells <
    side/2 so every lag keeps at least half the grid as sample pairs.
    """
    if not isinstance(grid, FieldGrid):
        raise ValidationError("empirical_variogram needs a FieldGrid")
    side = grid.side
    if not (isinstance(max_lag_cells, (int, np.integer)) and max_lag_cells >= 1):
        raise ValidationError(f"max_lag_cells must be a positive integer, got {max_lag_cells}")
    if not max_lag_cells < side / 2:
        raise ValidationError(
            f"max_lag_cells={max_lag_cells} too large for side {side} "
            f"(need < side/2)"
        )
    v = grid.values
    out = []
    for l in range(1, max_lag_cells + 1):
        dx = v[:, l:] - v[:, :-l]
        dy = v[l:, :] - v[:-l, :]
        # both arrays have side*(side-l) entries: pooling = plain mean
        val = 0.5 * (np.mean(dx * dx) + np.mean(dy * dy))
        out.append((l * grid.spacing, float(val)))
    return out


def square_increment_dim(grid: FieldGrid) -> float:
    """Surface-dimension estimate from square increments at lags 1 and 2.

    Z_l(i,j) = X[i+l,j+l] - X[i+l,j] - X[i,j+l] + X[i,j];  V(l) = mean Z_l^2;
    estimate = 3 - log2(V(2)/V(1)) / 2, clamped to [2, 3].  Square increments
    annihilate affine surfaces, so V(1) at the rounding floor means the grid
    carries no curvature information (DegenerateDataError).
    """
    if not isinstance(grid, FieldGrid):
        raise ValidationError("square_increment_dim needs a FieldGrid")
    if grid.side < 8:
        raise ValidationError(f"grid side {grid.side} too small (need >= 8)")
    v = grid.values
    vhat = []
    for l in (1, 2):
        z = v[l:, l:] - v[l:, :-l] - v[:-l, l:] + v[:-l, :-l]
        vhat.append(float(np.mean(z * z)))
    # An affine surface evaluated in floating point leaves increments at the
    # rounding level (a few ulp of the values), not exactly zero; compare
    # against that floor rather than 0.
    floor = (16.0 * np.finfo(float).eps * max(1e-300, float(np.abs(v).max()))) ** 2
    if vhat[0] <= floor or vhat[1] <= floor:
        raise DegenerateDataError(
            "square increments vanish (affine or constant surface); "
            "dimension estimate undefined"
        )
    d = 3.0 - 0.5 * math.log2(vhat[1] / vhat[0])
    return min(3.0, max(2.0, d))


# ---------------------------------------------------------------------------
# Roughness study


@dataclass(frozen=True)
class SchemeChoice:
    """A simulation scheme for a study: 'hybrid' (with its inner-block
    half-width) or 'riemann' (kappa meaningless, stored as None)."""

    kind: str
    kappa: int | None = None

    def __post_init__(self):
        if self.kind == "hybrid":
            if not (isinstance(self.kappa, (int, np.integer)) and 0 <= self.kappa <= 5):
                raise ValidationError(
                    f"hybrid scheme needs kappa in 0..5, got {self.kappa}"
                )
        elif self.kind == "riemann":
            if self.kappa is not None:
                raise ValidationError("riemann scheme takes no kappa")
        else:
            raise ValidationError(f"unknown scheme kind {self.kind!r}")

    @property
    def label(self) -> str:
        if self.kind == "hybrid":
            return f"hybrid:{self.kappa}"
        return "riemann"


def parse_scheme(text: str) -> SchemeChoice:
    """Parse 'hybrid', 'hybrid:<kappa>', or 'riemann'."""
    s = text.strip().lower()
    if s == "riemann":
        return SchemeChoice("riemann")
    if s == "hybrid":
        return SchemeChoice("hybrid", 1)
    if s.startswith("hybrid:"):
        try:
            k = int(s.split(":", 1)[1])
        except ValueError:
            raise ValidationError(f"bad scheme {text!r}: kappa must be an integer") from None
        return SchemeChoice("hybrid", k)
    raise ValidationError(
        f"unknown scheme {text!r} (expected hybrid[:kappa] or riemann)"
    )


@dataclass(frozen=True)
class RoughnessRow:
    """One (alpha, scheme) cell of a roughness study."""

    alpha: float
    scheme: str                 # "hybrid" | "riemann"
    kappa: int | None
    mean_dim: float
    var_dim: float              # sample variance (ddof=1) of the estimates
    replicates: int             # valid (non-degenerate) estimates used
    skipped: int = 0
    seconds_first: float = 0.0  # wall time through the first replicate (incl. setup)
    seconds_total: float = 0.0
    estimates: tuple = ()       # per-replicate estimates if requested


@dataclass(frozen=True)
class RoughnessReport:
    """Roughness-study results: one row per (alpha, scheme) pair."""

    rows: tuple
    n: int
    gamma: float
    replicates: int
    seed: int

    CSV_HEADER = "alpha,scheme,kappa,mean_dim,var_dim,replicates"

    def to_csv_lines(self):
        lines = [self.CSV_HEADER]
        for r in self.rows:
            kap = "" if r.kappa is None else str(r.kappa)
            lines.append(
                f"{r.alpha:.17g},{r.scheme},{kap},"
                f"{r.mean_dim:.17g},{r.var_dim:.17g},{r.replicates}"
            )
        return lines


def _default_kernel_factory(alpha: float) -> KernelSpec:
    # nu = 1 + alpha gives a kernel with the requested roughness exponent
    return Matern(nu=1.0 + alpha, lam=1.0)


def roughness_study(
    alphas,
    schemes,
    n: int = 100,
    gamma: float = 0.3,
    replicates: int = 100,
    seed: int = 0,
    kernel_factory=None,
    keep_estimates: bool = False,
    workers: int | None = None,
) -> RoughnessReport:
    """Monte-Carlo roughness comparison across exponents and schemes.

    For each alpha and scheme, simulates `replicates` unit-volatility fields
    with independent substreams rng_stream(seed, 0, alpha_index,
    scheme_index, replicate), applies square_increment_dim, and reports the
    mean and sample variance of the estimates.  Degenerate replicates are
    skipped and counted.  schemes may be SchemeChoice objects or strings
    accepted by parse_scheme.
    """
    alphas = [float(a) for a in alphas]
    if not alphas:
        raise ValidationError("alphas must be non-empty")
    scheme_objs = [s if isinstance(s, SchemeChoice) else parse_scheme(s) for s in schemes]
    if not scheme_objs:
        raise ValidationError("schemes must be non-empty")
    if not (isinstance(replicates, (int, np.integer)) and replicates >= 2):
        raise ValidationError(f"replicates must be >= 2, got {replicates}")
    if kernel_factory is None:
        kernel_factory = _default_kernel_factory

    rows = []
    for ai, alpha in enumerate(alphas):
        kernel = kernel_factory(alpha)
        if not isinstance(kernel, KernelSpec):
            raise ValidationError("kernel_factory must return a KernelSpec")
        for si, sc in enumerate(scheme_objs):
            t0 = time.perf_counter()
            params = SchemeParams(
                n=n, gamma=gamma,
                kappa=sc.kappa if sc.kind == "hybrid" else 0,
                seed=seed,
            )
            if sc.kind == "hybrid":
                plan = prepare_hybrid(kernel, params, workers=workers)
                simulate = hybrid_simulate
            else:
                plan = prepare_riemann(kernel, params, workers=workers)
                simulate = riemann_simulate
            ests = []
            skipped = 0
            t_first = 0.0
            for rep in range(replicates):
                rng = rng_stream(seed, 0, ai, si, rep)
                grid = simulate(kernel, params, ConstantVol(1.0),
                                plan=plan, rng_noise=rng, workers=workers)
                try:
                    ests.append(square_increment_dim(grid))
                except DegenerateDataError:
                    skipped += 1
                if rep == 0:
                    t_first = time.perf_counter() - t0
            if len(ests) < 2:
                raise DegenerateDataError(
                    f"fewer than two usable estimates for alpha={alpha}, "
                    f"scheme={sc.label} ({skipped} degenerate replicates)"
                )
            arr = np.asarray(ests)
            rows.append(RoughnessRow(
                alpha=alpha, scheme=sc.kind, kappa=sc.kappa,
                mean_dim=float(arr.mean()), var_dim=float(arr.var(ddof=1)),
                replicates=len(ests), skipped=skipped,
                seconds_first=t_first,
                seconds_total=time.perf_counter() - t0,
                estimates=tuple(ests) if keep_estimates else (),
            ))
            if skipped:
                warnings.warn(
                    f"roughness_study: skipped {skipped} degenerate replicate(s) "
                    f"at alpha={alpha}, scheme={sc.label}"
                )
    return RoughnessReport(rows=tuple(rows), n=n, gamma=gamma,
                           replicates=replicates, seed=seed)


# ---------------------------------------------------------------------------
# Deterministic MSE decomposition


@dataclass(frozen=True)
class MseEntry:
    """One-point mean squared error of the hybrid scheme at one resolution,
    split into its four quadrature-computed parts."""

    n: int
    d1: float   # inner cells: weighted-power vs true kernel
    d2: float   # step-kernel cells inside the unit window
    d3: float   # step-kernel cells out to the truncation window
    d4: float   # tail outside the truncation square
    e_n: float  # sigma^2 * (d1 + d2 + d3 + d4)
    scaled: float  # n^(2(1+alpha)) * L(1/n)^(-2) * e_n


@dataclass(frozen=True)
class MseReport:
    """MSE decomposition along an n-list plus the limiting reference."""

    kernel: KernelSpec
    gamma: float
    kappa: int
    policy: EvaluationPolicy
    sigma: float
    entries: tuple
    j_ref: float
    rate: float
    intercept: float

    CSV_HEADER = "n,D1,D2,D3,D4,E_n,scaled,J_ref"

    def to_csv_lines(self):
        lines = [self.CSV_HEADER]
        for e in self.entries:
            lines.append(
                f"{e.n},{e.d1:.17g},{e.d2:.17g},{e.d3:.17g},{e.d4:.17g},"
                f"{e.e_n:.17g},{e.scaled:.17g},{self.j_ref:.17g}"
            )
        lines.append(f"# rate,{self.rate:.17g},intercept,{self.intercept:.17g}")
        return lines


# cells whose octant representative lies within this many cells of the origin
# get adaptive per-cell quadrature; farther cells use a fixed tensor-Gauss
# rule, which is exact to machine precision once the kernel is smooth on the
# scale of one cell
_NEAR_CUTOFF = 12
_FAR_ORDER = 12


def _step_cell_errors(kernel, n, a_arr, b_arr, r_arr, tol_cell, kinks_cells):
    """Sum over octant-representative cells of
    mult * integral over the unit cell at (a, b) of (g((j+u)/n) - g(r_j/n))^2,
    in units of the unit cell (caller divides by n^2).

    a_arr >= b_arr >= 0 integer arrays; r_arr the representative radii (in
    cells); kinks_cells lists kernel kink radii in cell units.  Near cells —
    and every cell the kink circle may cross — use the exact radial
    reduction (adaptive 1D with breakpoints); the remaining far cells use a
    fixed tensor-Gauss rule, exact to roundoff for g smooth across one cell.
    Returns (weighted sum, accumulated error estimate).
    """
    a_arr = np.asarray(a_arr)
    b_arr = np.asarray(b_arr)
    r_arr = np.asarray(r_arr, dtype=float)
    mult = np.where((a_arr == b_arr) | (b_arr == 0), 4.0, 8.0)
    g_rep = kernel.eval_g(r_arr / n)

    near = a_arr <= _NEAR_CUTOFF
    if kinks_cells:
        d = np.hypot(a_arr, b_arr)
        for q in kinks_cells:
            near |= np.abs(d - q) <= 0.7072  # within a cell circumradius
    total = 0.0
    err = 0.0

    if np.any(near):
        for a, b, g0, m in zip(a_arr[near], b_arr[near], g_rep[near], mult[near]):
            g0 = float(g0)

            def fr(r):
                d = float(kernel.eval_g(np.asarray([r / n]))[0]) - g0
                return d * d

            v, e = radial_cell_integral(fr, int(a), int(b), tol=tol_cell,
                                        breakpoints=kinks_cells)
            total += m * v
            err += m * e

    if np.any(~near):
        af = a_arr[~near].astype(float)
        bf = b_arr[~near].astype(float)
        g0 = g_rep[~near]
        m = mult[~near]
        nodes, wts = gauss_nodes(_FAR_ORDER)  # on [0, 1]
        x = nodes - 0.5
        acc = np.zeros_like(af)
        for i in range(_FAR_ORDER):
            for k in range(_FAR_ORDER):
                r = np.hypot(af + x[i], bf + x[k]) / n
                d = kernel.eval_g(r) - g0
                acc += (wts[i] * wts[k]) * d * d
        total += float(np.sum(m * acc))
        # far-cell rule error is far below tol_cell per cell for smooth g;
        # charge a conservative epsilon-level estimate
        err += float(np.sum(m * acc)) * 1e-14

    return total, err


def hybrid_mse(
    kernel: KernelSpec,
    params: SchemeParams,
    tol: float = 1e-9,
    sigma: float = 1.0,
) -> MseEntry:
    """Deterministic one-point MSE of the hybrid scheme at constant
    volatility sigma, by quadrature (no simulation).

    The error field splits over disjoint cell families, giving
    E_n = sigma^2 * (D1 + D2 + D3 + D4):

      D1: inner cells j with max|j| <= kappa, integral of
          (w_j * |s|^alpha - g(|s|))^2 over the physical cell; w_j are
          exactly the engine's inner weights (central cell included).
      D2: step-kernel cells with kappa < max|j| <= n.
      D3: step-kernel cells with n < max|j| <= n_trunc.
      D4: integral of g^2 outside the truncation square (radial).

    Emits the rate-hypothesis warning when the kernel's decay exponent makes
    the truncation growth too slow (same check as the engine).
    """
    if not isinstance(params, SchemeParams):
        raise ValidationError("hybrid_mse needs SchemeParams")
    if not (math.isfinite(sigma) and sigma > 0.0):
        raise ValidationError(f"sigma must be positive, got {sigma}")
    if not tol > 0.0:
        raise ValidationError(f"tol must be positive, got {tol}")
    from .fields import _check_rate_hypothesis  # shared warning logic
    _check_rate_hypothesis(kernel, params)

    alpha = kernel.alpha
    n, kappa, N = params.n, params.kappa, params.n_trunc
    policy = params.policy

    # ---- D1: inner cells, octant representatives.  The integrand
    # (w * |s|^alpha - g(|s|))^2 is radial, so every cell reduces to a 1D
    # radial quadrature (in cell units; the n^-2 Jacobian is applied at the
    # end).  Kink radii are passed through in cell units.
    kinks_cells = tuple(q * n for q in kernel.kink_radii)
    d1 = 0.0
    err1 = 0.0
    n_inner = (2 * kappa + 1) ** 2
    tol_inner = tol * n**2 / (4.0 * max(n_inner, 1))
    for a in range(0, kappa + 1):
        for b in range(0, a + 1):
            if a == 0 and b == 0:
                if policy.central_mode == "optimal_L":
                    w = central_L_coefficient(kernel, n)
                else:
                    w = float(kernel.eval_L(np.asarray(
                        representative_radius((0, 0), alpha, policy) / n)))
                mult = 1.0

                def fr0(r, _w=w):
                    r = np.asarray(r, dtype=float)
                    rp = r / n
                    out = np.zeros_like(r)
                    pos = r > 0.0
                    d = _w * rp[pos] ** alpha - kernel.eval_g(rp[pos])
                    out[pos] = d * d
                    return out

                v, e = radial_unit_box_integral(fr0, tol=tol_inner,
                                                breakpoints=kinks_cells)
            else:
                rrep = representative_radius((a, b), alpha, policy)
                w = float(kernel.eval_L(np.asarray(rrep / n)))
                mult = 4.0 if (a == b or b == 0) else 8.0

                def fr(r, _w=w):
                    rp = r / n
                    d = _w * rp**alpha - float(kernel.eval_g(np.asarray([rp]))[0])
                    return d * d

                v, e = radial_cell_integral(fr, a, b, tol=tol_inner,
                                            breakpoints=kinks_cells)
            d1 += mult * v
            err1 += mult * e
    d1 /= n**2
    err1 /= n**2

    # ---- D2 and D3: step-kernel cells, octant representatives
    def _octant(lo, hi):
        """Representatives (a, b), 0 <= b <= a, with lo < max = a <= hi."""
        pairs = [(a, b) for a in range(lo + 1, hi + 1) for b in range(0, a + 1)]
        if not pairs:
            return (np.empty(0, int), np.empty(0, int))
        arr = np.asarray(pairs, dtype=int)
        return arr[:, 0], arr[:, 1]

    def _rep_radii(a_arr, b_arr):
        if policy.mode == "midpoint":
            return np.hypot(a_arr.astype(float), b_arr.astype(float))
        return _box_array(a_arr.astype(float), b_arr.astype(float),
                          alpha) ** (1.0 / alpha)

    # the adaptive budget is split over the near cells only: the far cells'
    # fixed tensor-Gauss rule is exact to roundoff once g is smooth on the
    # scale of one cell, so charging them would starve the near cells.  Cell
    # integrals are computed in cell units, hence the n^2 Jacobian factor.
    near_half = min(_NEAR_CUTOFF, N)
    n_near = (2 * near_half + 1) ** 2 - n_inner
    tol_cell = tol * n**2 / (4.0 * max(n_near, 1))

    a2, b2 = _octant(kappa, min(n, N))
    d2 = err2 = 0.0
    if a2.size:
        v, e = _step_cell_errors(kernel, n, a2, b2, _rep_radii(a2, b2),
                                 tol_cell, kinks_cells)
        d2, err2 = v / n**2, e / n**2

    a3, b3 = _octant(min(n, N), N)
    d3 = err3 = 0.0
    if a3.size:
        v, e = _step_cell_errors(kernel, n, a3, b3, _rep_radii(a3, b3),
                                 tol_cell, kinks_cells)
        d3, err3 = v / n**2, e / n**2

    # ---- D4: tail outside the truncation square
    def g2(r):
        return np.asarray(kernel.eval_g(np.asarray(r))) ** 2

    d4, err4 = square_exterior_radial_integral(g2, params.c_n, tol=tol / 4.0,
                                               breakpoints=kernel.kink_radii)

    if err1 + err2 + err3 + err4 > tol:
        raise QuadratureError(
            f"MSE quadrature error estimate {err1 + err2 + err3 + err4:.2e} "
            f"exceeds tol {tol:.2e}"
        )

    e_n = sigma**2 * (d1 + d2 + d3 + d4)
    l_inv_n = float(kernel.eval_L(np.asarray(1.0 / n)))
    scaled = float(n) ** (2.0 * (1.0 + alpha)) * l_inv_n ** (-2.0) * e_n
    return MseEntry(n=n, d1=d1, d2=d2, d3=d3, d4=d4, e_n=float(e_n),
                    scaled=scaled)


def mse_study(
    kernel: KernelSpec,
    ns,
    gamma: float = 0.5,
    kappa: int = 1,
    policy: EvaluationPolicy | None = None,
    tol: float = 1e-9,
    sigma: float = 1.0,
) -> MseReport:
    """hybrid_mse along an n-list plus the limiting j_constant and the
    fitted convergence rate of E_n."""
    ns = [int(n) for n in ns]
    if len(ns) < 3:
        raise ValidationError("need at least three n values for the rate fit")
    if policy is None:
        policy = DEFAULT_POLICY
    entries = []
    for n in ns:
        params = SchemeParams(n=n, gamma=gamma, kappa=kappa, policy=policy)
        entries.append(hybrid_mse(kernel, params, tol=tol, sigma=sigma))
    j_ref = sigma**2 * j_constant(kernel.alpha, kappa, policy=policy)
    rate, intercept = rate_fit(ns, [e.e_n for e in entries])
    return MseReport(kernel=kernel, gamma=gamma, kappa=kappa, policy=policy,
                     sigma=sigma, entries=tuple(entries), j_ref=j_ref,
                     rate=rate, intercept=intercept)


def rate_fit(ns, errors):
    """Least-squares slope and intercept of log(error) against log(n).

    Both lists must have equal length >= 3 and positive entries; all-equal
    ns leave the slope undefined.
    """
    ns = np.asarray(ns, dtype=float)
    errs = np.asarray(errors, dtype=float)
    if ns.ndim != 1 or ns.shape != errs.shape:
        raise ValidationError("ns and errors must be 1D lists of equal length")
    if ns.size < 3:
        raise ValidationError(f"need at least 3 points for a rate fit, got {ns.size}")
    if not (np.all(ns > 0) and np.all(errs > 0)):
        raise ValidationError("rate_fit needs strictly positive ns and errors")
    x = np.log(ns)
    if np.ptp(x) == 0.0:
        raise ValidationError("all ns equal; rate undefined")
    slope, intercept = np.polyfit(x, np.log(errs), 1)
    return float(slope), float(intercept)
