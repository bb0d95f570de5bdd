"""Simulation engines for volatility-modulated moving-average fields.

Three engines produce (2n+1) x (2n+1) grids over [-1, 1]^2 with spacing 1/n:

* hybrid_simulate   — the two-part scheme: on the (2*kappa+1)^2 cells nearest
  each output point the power part of the kernel is integrated exactly
  against the noise (correlated Gaussian family, Cholesky per cell), and the
  remaining cells up to the truncation window use a step-function kernel via
  one FFT convolution.
* riemann_simulate  — the pure step-function discretization over the whole
  truncation window (one FFT convolution; known to underestimate roughness).
* circulant_simulate — exact stationary Gaussian baseline via circulant
  embedding, used as the ground-truth oracle in tests and studies.

Index conventions: an integer grid index pair (i1, i2) denotes the physical
point (i1/n, i2/n); arrays are laid out [row, col] with the ROW tracking the
SECOND coordinate i2 and the column tracking i1.  All index windows below are
centred: an array of side 2m+1 covers indices -m..m with index 0 at the
middle.

Noise layout (fixed, part of the determinism contract): for one replicate,
the correlated family is drawn first as z ~ N(0,1) of shape (s1, s1, d) with
s1 = 2*(half+kappa)+1 and d = (2*kappa+1)^2 + 1, mapped through the block's
Cholesky factor; then the plain cell masses are drawn as an (S, S) standard
normal sheet scaled by 1/n with S = 2*(N+half)+1, whose central s1 x s1 block
is REPLACED by the plain components of the correlated family (the overdraw
keeps the layout independent of kappa).
"""

from __future__ import annotations

import math
import os
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import fft as _fft

from .covariance import (
    DEFAULT_POLICY,
    CovarianceBlock,
    EvaluationPolicy,
    box_power_integral,
    build_block,
    central_L_coefficient,
    optimal_b_norm,
    representative_radius,
)
from .errors import EmbeddingError, RateHypothesisWarning, ValidationError
from .kernels import KernelSpec

__all__ = [
    "SchemeParams",
    "FieldGrid",
    "VolatilityModel",
    "ConstantVol",
    "ProvidedGridVol",
    "ExpVmmaVolatility",
    "volatility_from_log_field",
    "rng_stream",
    "sample_noise",
    "conv2_fft",
    "HybridPlan",
    "prepare_hybrid",
    "hybrid_simulate",
    "RiemannPlan",
    "prepare_riemann",
    "riemann_simulate",
    "circulant_simulate",
    "scheme_variance",
    "fft_workers",
]


# ---------------------------------------------------------------------------
# Parameters and grids


@dataclass(frozen=True)
class SchemeParams:
    """Resolution and discretization controls shared by hybrid and Riemann.

    n sets the grid spacing 1/n; the kernel is truncated after n_trunc =
    floor(n**(1+gamma)) cells (physical radius c_n = (n_trunc + 1/2)/n);
    kappa is the half-width of the exactly-integrated block around each
    output point.
    """

    n: int
    gamma: float = 0.3
    kappa: int = 1
    seed: int = 0
    policy: EvaluationPolicy = field(default_factory=lambda: DEFAULT_POLICY)

    def __post_init__(self):
        if not (isinstance(self.n, (int, np.integer)) and self.n >= 1):
            raise ValidationError(f"n must be a positive integer, got {self.n}")
        if not (math.isfinite(self.gamma) and self.gamma > 0.0):
            raise ValidationError(f"gamma must be positive, got {self.gamma}")
        if not (isinstance(self.kappa, (int, np.integer)) and 0 <= self.kappa <= 5):
            raise ValidationError(f"kappa must be an integer in 0..5, got {self.kappa}")
        if not (isinstance(self.seed, (int, np.integer)) and 0 <= self.seed < 2**64):
            raise ValidationError(f"seed must fit in u64, got {self.seed}")
        if not isinstance(self.policy, EvaluationPolicy):
            raise ValidationError("policy must be an EvaluationPolicy")
        if self.n_trunc < self.kappa:
            raise ValidationError(
                f"truncation window n_trunc={self.n_trunc} smaller than "
                f"kappa={self.kappa}; increase n or gamma"
            )

    @property
    def n_trunc(self) -> int:
        """Truncation half-width in cells: floor(n**(1+gamma))."""
        return int(math.floor(float(self.n) ** (1.0 + self.gamma)))

    @property
    def c_n(self) -> float:
        """Physical truncation radius (n_trunc + 1/2)/n."""
        return (self.n_trunc + 0.5) / self.n

    @property
    def grid_side(self) -> int:
        return 2 * self.n + 1


@dataclass(frozen=True)
class FieldGrid:
    """Square grid of field values.

    values[r, c] is the field at (origin[0] + c*spacing, origin[1] +
    r*spacing): the row index moves along the SECOND coordinate.  Sides are
    odd (2n+1 for the simulation engines).
    """

    values: np.ndarray
    spacing: float
    origin: tuple = (-1.0, -1.0)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ValidationError(f"values must be a square 2D array, got {v.shape}")
        if v.shape[0] % 2 != 1:
            raise ValidationError(f"grid side must be odd, got {v.shape[0]}")
        if not np.all(np.isfinite(v)):
            raise ValidationError("grid values must all be finite")
        if not (math.isfinite(self.spacing) and self.spacing > 0):
            raise ValidationError(f"spacing must be positive, got {self.spacing}")
        object.__setattr__(self, "values", np.ascontiguousarray(v))
        object.__setattr__(self, "origin", (float(self.origin[0]), float(self.origin[1])))

    @property
    def side(self) -> int:
        return self.values.shape[0]

    def coords(self):
        """(x, y) 1D coordinate arrays along columns and rows."""
        k = np.arange(self.side)
        return (self.origin[0] + k * self.spacing,
                self.origin[1] + k * self.spacing)


def rng_stream(seed: int, *path: int) -> np.random.Generator:
    """Deterministic named substream: Philox keyed by (seed, *path).

    Stream names used by the engines: (seed, 0, replicate) for field noise
    and (seed, 1, replicate) for volatility noise, so the same field noise is
    paired with every volatility model.  Studies extend the path with their
    own task indices.
    """
    ss = np.random.SeedSequence((int(seed),) + tuple(int(p) for p in path))
    return np.random.Generator(np.random.Philox(ss))


def fft_workers(workers: int | None = None) -> int:
    """Worker count for FFT calls: explicit argument, else VMMA_THREADS, else 1."""
    if workers is not None:
        return max(1, int(workers))
    env = os.environ.get("VMMA_THREADS", "").strip()
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            warnings.warn(f"ignoring non-integer VMMA_THREADS={env!r}")
    return 1


# ---------------------------------------------------------------------------
# Volatility models


class VolatilityModel:
    """Positive volatility field sigma on the extended cell-index window.

    realize(n, half, rng) returns sigma as an (S, S) array, S = 2*half+1,
    covering cell indices -half..half at spacing 1/n.  constant_value is the
    scalar c when sigma is deterministic-constant, else None (engines exploit
    constants by simulating at sigma=1 and scaling once at the end, which
    makes the linearity in sigma exact to the last bit).
    """

    constant_value: float | None = None

    def realize(self, n: int, half: int, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def validate_against(self, kernel: KernelSpec):
        """Hook for model-vs-kernel compatibility checks (default: none)."""


@dataclass(frozen=True)
class ConstantVol(VolatilityModel):
    """sigma identically equal to a positive constant."""

    c: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.c) and self.c > 0.0):
            raise ValidationError(f"constant volatility must be > 0, got {self.c}")

    @property
    def constant_value(self) -> float:
        return self.c

    def realize(self, n, half, rng):
        return np.full((2 * half + 1, 2 * half + 1), self.c)


@dataclass(frozen=True)
class ProvidedGridVol(VolatilityModel):
    """User-supplied sigma values on the full extended index window."""

    sigma: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.sigma, dtype=float)
        if s.ndim != 2 or s.shape[0] != s.shape[1]:
            raise ValidationError("provided sigma grid must be square")
        if not np.all(np.isfinite(s)) or np.any(s <= 0.0):
            raise ValidationError("provided sigma values must be finite and > 0")
        object.__setattr__(self, "sigma", s)

    def realize(self, n, half, rng):
        S = 2 * half + 1
        if self.sigma.shape != (S, S):
            raise ValidationError(
                f"provided sigma grid has side {self.sigma.shape[0]}, "
                f"need {S} to cover the extended index window"
            )
        return self.sigma


def volatility_from_log_field(log_field: np.ndarray) -> np.ndarray:
    """Map a log-variance field x to sigma = exp(x/2), so sigma^2 = exp(x)."""
    return np.exp(0.5 * np.asarray(log_field, dtype=float))


@dataclass(frozen=True)
class ExpVmmaVolatility(VolatilityModel):
    """Lognormal volatility: sigma^2 = exp(X') with X' itself a simulated
    rough field (hybrid scheme, unit volatility) on the extended window.

    The inner field's roughness exponent must be strictly larger than the
    host kernel's (smoother volatility than field), which engines check at
    simulation time via validate_against.
    """

    inner_kernel: KernelSpec
    gamma: float = 0.3
    kappa: int = 1

    def __post_init__(self):
        if not isinstance(self.inner_kernel, KernelSpec):
            raise ValidationError("inner_kernel must be a KernelSpec")
        if not (math.isfinite(self.gamma) and self.gamma > 0.0):
            raise ValidationError(f"gamma must be positive, got {self.gamma}")
        if not (isinstance(self.kappa, (int, np.integer)) and 0 <= self.kappa <= 5):
            raise ValidationError(f"kappa must be an integer in 0..5, got {self.kappa}")

    def validate_against(self, kernel: KernelSpec):
        if not self.inner_kernel.alpha > kernel.alpha:
            raise ValidationError(
                f"volatility roughness alpha'={self.inner_kernel.alpha} must "
                f"exceed the host kernel's alpha={kernel.alpha}"
            )

    def realize(self, n, half, rng):
        params = SchemeParams(n=n, gamma=self.gamma, kappa=self.kappa)
        grid = hybrid_simulate(
            self.inner_kernel, params, ConstantVol(1.0),
            rng_noise=rng, half=half,
        )
        return volatility_from_log_field(grid.values)


# ---------------------------------------------------------------------------
# Noise sampling


def sample_noise(
    params: SchemeParams,
    block: CovarianceBlock,
    rng: np.random.Generator,
    half: int | None = None,
):
    """Draw one replicate of the two Gaussian noise families.

    Returns (w1, plain):
      w1    (s1, s1, (2k+1)^2) — the power-kernel cell integrals; component
            order follows block.offsets.  s1 = 2*(half+kappa)+1.
      plain (S, S) — plain cell masses on the extended window, S =
            2*(n_trunc+half)+1.  The central s1 x s1 block holds the plain
            member of the correlated family (same cells, jointly drawn); the
            annulus outside is the independent N(0, 1/n^2) family.

    The draw order is fixed and documented in the module docstring; with a
    fixed rng state the output is bit-identical, which the determinism
    contract of the engines relies on.
    """
    n, kappa = params.n, params.kappa
    m0 = params.n if half is None else int(half)
    s1 = 2 * (m0 + kappa) + 1
    S = 2 * (params.n_trunc + m0) + 1
    d = (2 * kappa + 1) ** 2 + 1
    if block.dim != d or block.n != n:
        raise ValidationError(
            f"covariance block (dim {block.dim}, n {block.n}) does not match "
            f"params (kappa {kappa} -> dim {d}, n {n})"
        )

    z = rng.standard_normal((s1, s1, d))
    w1_full = z @ block.chol.T
    plain = rng.standard_normal((S, S)) / n
    lo = params.n_trunc - kappa
    plain[lo:lo + s1, lo:lo + s1] = w1_full[:, :, -1]
    return w1_full[:, :, :-1], plain


# ---------------------------------------------------------------------------
# FFT convolution


def conv2_fft(a: np.ndarray, b: np.ndarray, workers: int | None = None) -> np.ndarray:
    """Full 2D linear convolution of two real square matrices via FFT.

    Output side = side(a) + side(b) - 1.  Zero-pads to the next fast FFT
    length; equals direct summation to ~1e-12 relative.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValidationError(f"conv2_fft: first matrix not square 2D, got {a.shape}")
    if b.ndim != 2 or b.shape[0] != b.shape[1]:
        raise ValidationError(f"conv2_fft: second matrix not square 2D, got {b.shape}")
    out = a.shape[0] + b.shape[0] - 1
    fsh = _fft.next_fast_len(out, real=True)
    w = fft_workers(workers)
    fa = _fft.rfft2(a, s=(fsh, fsh), workers=w)
    fb = _fft.rfft2(b, s=(fsh, fsh), workers=w)
    full = _fft.irfft2(fa * fb, s=(fsh, fsh), workers=w)
    return full[:out, :out]


def _centered_crop(full: np.ndarray, side: int) -> np.ndarray:
    start = (full.shape[0] - side) // 2
    return full[start:start + side, start:start + side]


# ---------------------------------------------------------------------------
# Hybrid scheme


def _check_rate_hypothesis(kernel: KernelSpec, params: SchemeParams):
    beta = getattr(kernel, "beta_decay", -math.inf)
    if math.isfinite(beta):
        threshold = -(1.0 + kernel.alpha) / (1.0 + beta)
        if params.gamma <= threshold:
            warnings.warn(
                f"gamma={params.gamma} is not above the convergence-rate "
                f"threshold -(1+alpha)/(1+beta) = {threshold:.4g}; the scheme "
                f"still runs but the asymptotic error guarantee does not apply",
                RateHypothesisWarning,
                stacklevel=3,
            )


def _inner_weights(kernel: KernelSpec, params: SchemeParams) -> np.ndarray:
    """Weights multiplying the exactly-integrated power cells.

    w_j = L(r_j / n) at the policy's representative radius; the central cell
    uses either the optimal radius or the L2-optimal averaged coefficient.
    """
    n, kappa, policy = params.n, params.kappa, params.policy
    offs = [(a, b) for a in range(-kappa, kappa + 1) for b in range(-kappa, kappa + 1)]
    w = np.empty(len(offs))
    for idx, j in enumerate(offs):
        if j == (0, 0) and policy.central_mode == "optimal_L":
            w[idx] = central_L_coefficient(kernel, n)
        else:
            r = representative_radius(j, kernel.alpha, policy)
            w[idx] = kernel.eval_L(np.asarray(r / n))
    return w


def _outer_kernel_matrix(kernel: KernelSpec, params: SchemeParams) -> np.ndarray:
    """Step-kernel matrix A: zero on the inner block, g(r_k/n) outside, up to
    the truncation window.  Side 2*n_trunc+1."""
    n, N, kappa = params.n, params.n_trunc, params.kappa
    k = np.arange(-N, N + 1)
    k1 = k[None, :]  # columns: first coordinate
    k2 = k[:, None]  # rows: second coordinate
    if params.policy.mode == "midpoint":
        r = np.hypot(k1, k2).astype(float)
    else:
        r = np.empty((2 * N + 1, 2 * N + 1))
        # optimal radii depend on |k| only through the octant representative;
        # build a lookup over the canonical (a >= b >= 0) pairs
        lut = {}
        for a in range(0, N + 1):
            for b in range(0, a + 1):
                lut[(a, b)] = optimal_b_norm((a, b), kernel.alpha)
        aa = np.maximum(np.abs(k1), np.abs(k2))
        bb = np.minimum(np.abs(k1), np.abs(k2))
        for (a, b), v in lut.items():
            r[(aa == a) & (bb == b)] = v
    A = np.zeros_like(r)
    outside = np.maximum(np.abs(k1), np.abs(k2)) > kappa
    A[outside] = kernel.eval_g(r[outside] / n)
    return A


@dataclass(frozen=True)
class HybridPlan:
    """Replicate-independent precomputation for the hybrid engine."""

    kernel: KernelSpec
    params: SchemeParams
    half: int
    block: CovarianceBlock
    weights: np.ndarray          # aligned with block.offsets
    a_matrix: np.ndarray         # (2N+1)^2 step kernel
    fft_a: np.ndarray            # rfft2 of a_matrix at conv shape
    fshape: int

    @property
    def out_side(self) -> int:
        return 2 * self.half + 1


def prepare_hybrid(
    kernel: KernelSpec,
    params: SchemeParams,
    half: int | None = None,
    workers: int | None = None,
) -> HybridPlan:
    """Build the reusable parts of the hybrid scheme (block, weights, FFT of
    the step kernel).  `half` widens the output window to indices -half..half
    (default n, i.e. the grid over [-1,1]^2); the discretization itself (cell
    size, truncation) is unchanged."""
    m0 = params.n if half is None else int(half)
    if m0 < 1:
        raise ValidationError(f"output half-width must be >= 1, got {m0}")
    _check_rate_hypothesis(kernel, params)
    block = build_block(kernel.alpha, params.kappa, params.n)
    weights = _inner_weights(kernel, params)
    A = _outer_kernel_matrix(kernel, params)
    S = 2 * (params.n_trunc + m0) + 1
    out = A.shape[0] + S - 1
    fsh = _fft.next_fast_len(out, real=True)
    fa = _fft.rfft2(A, s=(fsh, fsh), workers=fft_workers(workers))
    return HybridPlan(
        kernel=kernel, params=params, half=m0, block=block, weights=weights,
        a_matrix=A, fft_a=fa, fshape=fsh,
    )


def _convolve_outer(plan: HybridPlan, B: np.ndarray, workers: int | None) -> np.ndarray:
    """conv(A, B) cropped to the output window -half..half."""
    w = fft_workers(workers)
    fb = _fft.rfft2(B, s=(plan.fshape, plan.fshape), workers=w)
    out = plan.a_matrix.shape[0] + B.shape[0] - 1
    full = _fft.irfft2(plan.fft_a * fb, s=(plan.fshape, plan.fshape), workers=w)
    return _centered_crop(full[:out, :out], plan.out_side)


def hybrid_simulate(
    kernel: KernelSpec,
    params: SchemeParams,
    vol: VolatilityModel | None = None,
    replicate: int = 0,
    *,
    plan: HybridPlan | None = None,
    rng_noise: np.random.Generator | None = None,
    rng_vol: np.random.Generator | None = None,
    half: int | None = None,
    workers: int | None = None,
) -> FieldGrid:
    """Simulate one replicate of the field by the hybrid scheme.

    The inner part sums the exactly-integrated power cells with the policy's
    L-weights (direct summation, O(n^2) per offset); the outer part is one
    FFT convolution of the step kernel with sigma-modulated plain noise.
    Noise streams: rng_stream(seed, 0, replicate) for the field and
    rng_stream(seed, 1, replicate) for the volatility, unless explicit
    generators are passed.
    """
    if vol is None:
        vol = ConstantVol(1.0)
    vol.validate_against(kernel)
    if plan is None:
        plan = prepare_hybrid(kernel, params, half=half, workers=workers)
    elif plan.kernel != kernel or plan.params != params or (
        half is not None and plan.half != int(half)
    ):
        raise ValidationError("plan was prepared for different settings")
    m0 = plan.half
    n, kappa, N = params.n, params.kappa, params.n_trunc

    if rng_noise is None:
        rng_noise = rng_stream(params.seed, 0, replicate)
    w1, plain = sample_noise(params, plan.block, rng_noise, half=m0)

    const = vol.constant_value
    if const is not None:
        sigma = None
        B = plain
    else:
        if rng_vol is None:
            rng_vol = rng_stream(params.seed, 1, replicate)
        sigma = vol.realize(n, N + m0, rng_vol)
        B = sigma * plain

    side = 2 * m0 + 1
    x_hat = _convolve_outer(plan, B, workers)

    x_tilde = np.zeros((side, side))
    for idx, (j1, j2) in enumerate(plan.block.offsets):
        w = plan.weights[idx]
        # noise cell i - j for output i: shift the (s1,s1) sheet by -j
        r0 = kappa - j2
        c0 = kappa - j1
        contrib = w1[r0:r0 + side, c0:c0 + side, idx]
        if sigma is not None:
            sr0 = N - j2
            sc0 = N - j1
            contrib = contrib * sigma[sr0:sr0 + side, sc0:sc0 + side]
        x_tilde += w * contrib

    values = x_tilde + x_hat
    if const is not None and const != 1.0:
        values = const * values
    return FieldGrid(values=values, spacing=1.0 / n,
                     origin=(-m0 / n, -m0 / n))


# ---------------------------------------------------------------------------
# Riemann-sum scheme


@dataclass(frozen=True)
class RiemannPlan:
    """Replicate-independent precomputation for the Riemann-sum engine."""

    kernel: KernelSpec
    params: SchemeParams
    half: int
    a_matrix: np.ndarray
    fft_a: np.ndarray
    fshape: int

    @property
    def out_side(self) -> int:
        return 2 * self.half + 1


def riemann_kernel_matrix(kernel: KernelSpec, params: SchemeParams) -> np.ndarray:
    """Step-kernel matrix of the Riemann scheme: g at cell midpoints for all
    cells in the truncation window, with the central cell evaluated at its
    optimal radius (the midpoint would sit on the singularity)."""
    N = params.n_trunc
    k = np.arange(-N, N + 1)
    r = np.hypot(k[None, :], k[:, None]).astype(float)
    r[N, N] = optimal_b_norm((0, 0), kernel.alpha)
    return kernel.eval_g(r / params.n)


def prepare_riemann(
    kernel: KernelSpec,
    params: SchemeParams,
    half: int | None = None,
    workers: int | None = None,
) -> RiemannPlan:
    m0 = params.n if half is None else int(half)
    if m0 < 1:
        raise ValidationError(f"output half-width must be >= 1, got {m0}")
    _check_rate_hypothesis(kernel, params)
    A = riemann_kernel_matrix(kernel, params)
    S = 2 * (params.n_trunc + m0) + 1
    out = A.shape[0] + S - 1
    fsh = _fft.next_fast_len(out, real=True)
    fa = _fft.rfft2(A, s=(fsh, fsh), workers=fft_workers(workers))
    return RiemannPlan(kernel=kernel, params=params, half=m0,
                       a_matrix=A, fft_a=fa, fshape=fsh)


def riemann_simulate(
    kernel: KernelSpec,
    params: SchemeParams,
    vol: VolatilityModel | None = None,
    replicate: int = 0,
    *,
    plan: RiemannPlan | None = None,
    rng_noise: np.random.Generator | None = None,
    rng_vol: np.random.Generator | None = None,
    half: int | None = None,
    workers: int | None = None,
) -> FieldGrid:
    """Simulate one replicate by the pure step-function (Riemann-sum) scheme.

    All cells use iid plain noise N(0, 1/n^2); kappa plays no role.  The
    output depends only on (kernel, n, gamma, seed/replicate, vol).
    """
    if vol is None:
        vol = ConstantVol(1.0)
    vol.validate_against(kernel)
    if plan is None:
        plan = prepare_riemann(kernel, params, half=half, workers=workers)
    elif plan.kernel != kernel or plan.params != params or (
        half is not None and plan.half != int(half)
    ):
        raise ValidationError("plan was prepared for different settings")
    m0 = plan.half
    n, N = params.n, params.n_trunc
    S = 2 * (N + m0) + 1

    if rng_noise is None:
        rng_noise = rng_stream(params.seed, 0, replicate)
    plain = rng_noise.standard_normal((S, S)) / n

    const = vol.constant_value
    if const is not None:
        B = plain
    else:
        if rng_vol is None:
            rng_vol = rng_stream(params.seed, 1, replicate)
        sigma = vol.realize(n, N + m0, rng_vol)
        B = sigma * plain

    w = fft_workers(workers)
    fb = _fft.rfft2(B, s=(plan.fshape, plan.fshape), workers=w)
    out = plan.a_matrix.shape[0] + S - 1
    full = _fft.irfft2(plan.fft_a * fb, s=(plan.fshape, plan.fshape), workers=w)
    values = _centered_crop(full[:out, :out], plan.out_side)
    if const is not None and const != 1.0:
        values = const * values
    return FieldGrid(values=values, spacing=1.0 / n, origin=(-m0 / n, -m0 / n))


# ---------------------------------------------------------------------------
# Circulant-embedding baseline (exact stationary Gaussian)


def circulant_simulate(
    correlation,
    variance: float,
    n: int,
    seed: int = 0,
    replicate: int = 0,
    rng: np.random.Generator | None = None,
    max_doublings: int = 3,
    workers: int | None = None,
) -> FieldGrid:
    """Exact stationary Gaussian field on the (2n+1)^2 grid over [-1,1]^2.

    correlation(r) must be an isotropic correlation function accepting array
    arguments (correlation(0) = 1); the target covariance is variance *
    correlation(distance).  The covariance is embedded on a torus of side
    >= 2*(2n+1); if the embedding spectrum has an eigenvalue below
    -1e-10 * max, the torus is doubled (up to max_doublings) and then an
    EmbeddingError reports the most negative eigenvalue.  Within-tolerance
    negative eigenvalues (roundoff) are zeroed, not clipped from a truly
    indefinite spectrum.
    """
    if not (isinstance(n, (int, np.integer)) and n >= 1):
        raise ValidationError(f"n must be a positive integer, got {n}")
    if not (math.isfinite(variance) and variance > 0.0):
        raise ValidationError(f"variance must be positive, got {variance}")
    side = 2 * n + 1
    w = fft_workers(workers)

    M = _fft.next_fast_len(2 * side, real=True)
    lam = None
    worst = None
    for _ in range(max_doublings + 1):
        idx = np.arange(M)
        d = np.minimum(idx, M - idx).astype(float)
        r = np.hypot(d[None, :], d[:, None]) / n
        base = variance * np.asarray(correlation(r), dtype=float)
        spec = _fft.fft2(base, workers=w).real
        mx = spec.max()
        mn = spec.min()
        if mn >= -1e-10 * mx:
            lam = np.where(spec < 0.0, 0.0, spec)
            break
        worst = mn
        M = _fft.next_fast_len(2 * M, real=True)
    if lam is None:
        raise EmbeddingError(
            f"circulant embedding not nonnegative definite after "
            f"{max_doublings} doublings (most negative eigenvalue {worst:.6e})"
        )

    if rng is None:
        rng = rng_stream(seed, 0, replicate)
    zr = rng.standard_normal((M, M))
    zi = rng.standard_normal((M, M))
    f = _fft.fft2(np.sqrt(lam) * (zr + 1j * zi), workers=w)
    values = f.real[:side, :side] / M
    return FieldGrid(values=values, spacing=1.0 / n, origin=(-1.0, -1.0))


# ---------------------------------------------------------------------------
# Deterministic second-moment helper


def scheme_variance(plan: HybridPlan | RiemannPlan) -> float:
    """Exact pointwise variance of the scheme's output at unit volatility.

    The inner and outer parts use disjoint cells, so the variance is the sum
    of the weighted power-cell variances and the step-kernel energy:

        sum_j w_j^2 n^(-2-2a) box(j, 2a)  +  n^(-2) sum_k A_k^2.
    """
    params = plan.params
    n = params.n
    outer = float(np.sum(plan.a_matrix**2)) / n**2
    if isinstance(plan, RiemannPlan):
        return outer
    alpha = plan.kernel.alpha
    inner = 0.0
    for idx, j in enumerate(plan.block.offsets):
        a, b = abs(j[0]), abs(j[1])
        box = box_power_integral((max(a, b), min(a, b)), 2.0 * alpha)
        inner += plan.weights[idx] ** 2 * box
    inner *= float(n) ** (-2.0 - 2.0 * alpha)
    return inner + outer
