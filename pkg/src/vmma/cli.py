"""Command-line front end.

Four subcommands:

* ``vmma simulate``   — one field realization, written in any of the three
  grid formats (VMG1 binary, CSV, PGM heatmap).
* ``vmma roughness``  — the Monte-Carlo roughness study (dimension estimates
  per exponent and scheme), CSV report plus optional plot/timing data.
* ``vmma mse``        — deterministic error decomposition of the hybrid
  scheme along an n-list, CSV with the limiting constant and fitted rate.
* ``vmma covariance`` — dump of the inner-block covariance matrix.

Every command accepts ``--config FILE`` (JSON with long option names as
keys; explicit flags always win) and ``--verbose`` (echoes the effective
configuration to stderr).  ``--threads`` (or the VMMA_THREADS environment
variable) caps FFT worker counts without changing any output value.

Exit codes: 0 success, 2 argument/usage errors, 3 numeric failures.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import asdict, dataclass

from .analysis import (
    mse_study,
    parse_scheme,
    roughness_study,
)
from .covariance import DEFAULT_POLICY, EvaluationPolicy, build_block
from .errors import NumericError, ValidationError, VmmaError
from .fields import (
    ConstantVol,
    ExpVmmaVolatility,
    SchemeParams,
    VolatilityModel,
    circulant_simulate,
    hybrid_simulate,
    riemann_simulate,
)
from .gridio import write_grid
from .kernels import Matern, format_kernel, matern_correlation, parse_kernel

__all__ = ["main", "StudyConfig", "parse_volatility", "format_volatility"]

_PROG = "vmma"


# ---------------------------------------------------------------------------
# Volatility grammar


def parse_volatility(text: str) -> VolatilityModel:
    """Parse 'const:<value>' or 'expvmma:<kernel grammar>'."""
    s = text.strip()
    head, sep, rest = s.partition(":")
    head = head.lower()
    if head == "const":
        if not sep:
            raise ValidationError("volatility 'const' needs a value: const:<v>")
        try:
            c = float(rest)
        except ValueError:
            raise ValidationError(f"bad constant volatility {rest!r}") from None
        return ConstantVol(c)
    if head == "expvmma":
        if not sep or not rest:
            raise ValidationError(
                "volatility 'expvmma' needs an inner kernel: expvmma:<kernel>"
            )
        return ExpVmmaVolatility(inner_kernel=parse_kernel(rest))
    raise ValidationError(
        f"unknown volatility {text!r} (expected const:<v> or expvmma:<kernel>)"
    )


def format_volatility(vol: VolatilityModel) -> str:
    if isinstance(vol, ConstantVol):
        return f"const:{vol.c:g}"
    if isinstance(vol, ExpVmmaVolatility):
        return f"expvmma:{format_kernel(vol.inner_kernel)}"
    raise ValidationError(f"cannot format volatility of type {type(vol).__name__}")


def _parse_policy(name: str) -> EvaluationPolicy:
    name = name.strip().lower()
    if name == "midpoint":
        return DEFAULT_POLICY
    if name == "optimal":
        return EvaluationPolicy(mode="optimal", central_mode="optimal_L")
    raise ValidationError(f"unknown policy {name!r} (midpoint or optimal)")


# ---------------------------------------------------------------------------
# Configuration plumbing


@dataclass(frozen=True)
class StudyConfig:
    """Effective configuration of one CLI invocation.

    Keys mirror the long option names; to_dict/from_dict round-trip exactly,
    so a config echoed by --verbose can be fed back via --config.
    """

    command: str
    kernel: str | None = None
    scheme: str = "hybrid"
    schemes: tuple = ()
    alphas: tuple = ()
    n: int = 100
    n_list: tuple = ()
    gamma: float = 0.3
    kappa: int = 1
    alpha: float | None = None
    seed: int = 0
    replicate: int = 0
    replicates: int = 100
    vol: str = "const:1"
    policy: str = "midpoint"
    out: str | None = None
    formats: tuple = ("vmg",)
    plot_data: str | None = None
    timing_out: str | None = None
    threads: int | None = None
    verbose: bool = False

    def to_dict(self) -> dict:
        d = asdict(self)
        for k in ("schemes", "alphas", "n_list", "formats"):
            d[k] = list(d[k])
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "StudyConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ValidationError(f"unknown config keys: {sorted(unknown)}")
        dd = dict(d)
        for k in ("schemes", "alphas", "n_list", "formats"):
            if k in dd and dd[k] is not None:
                dd[k] = tuple(dd[k])
        return cls(**dd)


def _load_config(path) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ValidationError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ValidationError(f"config {path} must hold a JSON object")
    return cfg


def _effective(args: argparse.Namespace, defaults: dict) -> dict:
    """Merge precedence: explicit flag > config file > command default.

    Flags parse with None sentinels so 'explicitly given' is detectable.
    """
    cfg = _load_config(args.config) if args.config else {}
    unknown = set(cfg) - set(defaults)
    if unknown:
        raise ValidationError(
            f"config keys not used by this command: {sorted(unknown)}"
        )
    eff = {}
    for key, default in defaults.items():
        flag_val = getattr(args, key, None)
        if flag_val is not None:
            eff[key] = flag_val
        elif key in cfg:
            eff[key] = cfg[key]
        else:
            eff[key] = default
    return eff


def _echo_config(eff: dict, command: str, verbose: bool):
    if verbose:
        payload = {"command": command}
        payload.update(eff)
        print(json.dumps(payload, sort_keys=True, default=str), file=sys.stderr)


def _apply_threads(threads):
    if threads is not None:
        if int(threads) < 1:
            raise ValidationError(f"--threads must be >= 1, got {threads}")
        os.environ["VMMA_THREADS"] = str(int(threads))


def _csv_floats(text) -> tuple:
    if isinstance(text, (list, tuple)):
        return tuple(float(x) for x in text)
    try:
        return tuple(float(x) for x in str(text).split(",") if x.strip())
    except ValueError:
        raise ValidationError(f"bad number list {text!r}") from None


def _csv_ints(text) -> tuple:
    if isinstance(text, (list, tuple)):
        return tuple(int(x) for x in text)
    try:
        return tuple(int(x) for x in str(text).split(",") if x.strip())
    except ValueError:
        raise ValidationError(f"bad integer list {text!r}") from None


def _csv_strs(text) -> tuple:
    if isinstance(text, (list, tuple)):
        return tuple(str(x) for x in text)
    return tuple(x.strip() for x in str(text).split(",") if x.strip())


def _write_lines(lines, out):
    if out is None or out == "-":
        for ln in lines:
            print(ln)
    else:
        with open(out, "w", newline="") as fh:
            fh.write("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# Subcommands


def cmd_simulate(args) -> int:
    defaults = dict(kernel=None, scheme="hybrid", n=100, gamma=0.3, kappa=1,
                    vol="const:1", seed=0, replicate=0, out="field.vmg",
                    formats=["vmg"], policy="midpoint", threads=None)
    eff = _effective(args, defaults)
    _echo_config(eff, "simulate", args.verbose)
    _apply_threads(eff["threads"])
    if not eff["kernel"]:
        raise ValidationError("--kernel is required")
    kernel = parse_kernel(eff["kernel"])
    vol = parse_volatility(eff["vol"]) if isinstance(eff["vol"], str) else eff["vol"]
    scheme = str(eff["scheme"]).lower()
    n = int(eff["n"])
    seed = int(eff["seed"])
    replicate = int(eff["replicate"])
    formats = _csv_strs(eff["formats"])

    t0 = time.perf_counter()
    if scheme == "circulant":
        # the exact baseline is defined by a closed-form correlation, which
        # exists here for the Matern family at constant volatility only
        if not isinstance(kernel, Matern):
            raise ValidationError(
                "circulant baseline needs a matern kernel (closed-form correlation)"
            )
        if not isinstance(vol, ConstantVol):
            raise ValidationError("circulant baseline supports const volatility only")
        variance = vol.c**2 * kernel.g_squared_integral()
        grid = circulant_simulate(
            lambda r: matern_correlation(kernel.nu, kernel.lam, r),
            variance, n, seed=seed, replicate=replicate,
        )
        n_trunc = 0
    else:
        params = SchemeParams(n=n, gamma=float(eff["gamma"]),
                              kappa=int(eff["kappa"]), seed=seed,
                              policy=_parse_policy(str(eff["policy"])))
        n_trunc = params.n_trunc
        if scheme == "hybrid":
            grid = hybrid_simulate(kernel, params, vol, replicate=replicate)
        elif scheme == "riemann":
            grid = riemann_simulate(kernel, params, vol, replicate=replicate)
        else:
            raise ValidationError(
                f"unknown scheme {eff['scheme']!r} (hybrid, riemann, circulant)"
            )
    wall = time.perf_counter() - t0

    written = [str(write_grid(grid, eff["out"], fmt)) for fmt in formats]
    print(f"scheme={scheme} n={n} n_trunc={n_trunc} wall={wall:.3f}s "
          f"wrote {' '.join(written)}")
    return 0


def cmd_roughness(args) -> int:
    defaults = dict(
        alphas=[-0.8, -0.7, -0.6, -0.5, -0.4, -0.3, -0.2, -0.1],
        schemes=["hybrid:0", "hybrid:1", "hybrid:2", "hybrid:3", "riemann"],
        n=100, gamma=0.3, replicates=100, seed=0,
        out=None, plot_data=None, timing_out=None, threads=None,
    )
    eff = _effective(args, defaults)
    _echo_config(eff, "roughness", args.verbose)
    _apply_threads(eff["threads"])
    alphas = _csv_floats(eff["alphas"])
    schemes = [parse_scheme(s) for s in _csv_strs(eff["schemes"])]

    report = roughness_study(
        alphas, schemes, n=int(eff["n"]), gamma=float(eff["gamma"]),
        replicates=int(eff["replicates"]), seed=int(eff["seed"]),
    )
    _write_lines(report.to_csv_lines(), eff["out"])

    if eff["plot_data"]:
        lines = ["scheme,kappa,alpha,mean_dim"]
        for sc in schemes:
            for row in report.rows:
                if row.scheme == sc.kind and row.kappa == sc.kappa:
                    kap = "" if row.kappa is None else str(row.kappa)
                    lines.append(f"{row.scheme},{kap},{row.alpha:.17g},{row.mean_dim:.17g}")
        _write_lines(lines, eff["plot_data"])

    if eff["timing_out"]:
        lines = ["scheme,kappa,replicates,seconds"]
        for sc in schemes:
            rows = [r for r in report.rows
                    if r.scheme == sc.kind and r.kappa == sc.kappa]
            kap = "" if sc.kappa is None else str(sc.kappa)
            t_first = sum(r.seconds_first for r in rows)
            t_total = sum(r.seconds_total for r in rows)
            lines.append(f"{sc.kind},{kap},1,{t_first:.6f}")
            lines.append(f"{sc.kind},{kap},{report.replicates},{t_total:.6f}")
        _write_lines(lines, eff["timing_out"])
    return 0


def cmd_mse(args) -> int:
    defaults = dict(kernel=None, n_list=[20, 40, 80], gamma=0.5, kappa=1,
                    policy="midpoint", out=None, threads=None)
    eff = _effective(args, defaults)
    _echo_config(eff, "mse", args.verbose)
    _apply_threads(eff["threads"])
    if not eff["kernel"]:
        raise ValidationError("--kernel is required")
    kernel = parse_kernel(eff["kernel"])
    ns = _csv_ints(eff["n_list"])
    report = mse_study(kernel, ns, gamma=float(eff["gamma"]),
                       kappa=int(eff["kappa"]),
                       policy=_parse_policy(str(eff["policy"])))
    _write_lines(report.to_csv_lines(), eff["out"])
    return 0


def cmd_covariance(args) -> int:
    defaults = dict(alpha=None, kappa=1, n=1, out=None, threads=None)
    eff = _effective(args, defaults)
    _echo_config(eff, "covariance", args.verbose)
    _apply_threads(eff["threads"])
    if eff["alpha"] is None:
        raise ValidationError("--alpha is required")
    block = build_block(float(eff["alpha"]), int(eff["kappa"]), int(eff["n"]))
    lines = ["i,j,value"]
    for i in range(block.dim):
        for j in range(block.dim):
            lines.append(f"{i},{j},{block.matrix[i, j]:.17g}")
    _write_lines(lines, eff["out"])
    return 0


# ---------------------------------------------------------------------------
# Parser


def _add_common(sp):
    sp.add_argument("--config", default=None, metavar="FILE",
                    help="JSON file with long option names as keys; flags win")
    sp.add_argument("--verbose", action="store_true",
                    help="echo the effective configuration to stderr")
    sp.add_argument("--threads", type=int, default=None,
                    help="cap FFT worker count (fallback: VMMA_THREADS); "
                         "never changes results")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog=_PROG,
        description="Simulation and analysis of rough volatility-modulated "
                    "moving-average random fields on 2D grids.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    ps = sub.add_parser("simulate", help="simulate one field and write grid files")
    ps.add_argument("--kernel", help="kernel grammar, e.g. matern:nu=0.5,lambda=1")
    ps.add_argument("--scheme", choices=["hybrid", "riemann", "circulant"],
                    default=None)
    ps.add_argument("--n", type=int, default=None, help="grid half-resolution (side 2n+1)")
    ps.add_argument("--gamma", type=float, default=None,
                    help="truncation growth exponent")
    ps.add_argument("--kappa", type=int, default=None,
                    help="half-width of the exactly-integrated inner block")
    ps.add_argument("--vol", default=None,
                    help="volatility: const:<v> or expvmma:<kernel>")
    ps.add_argument("--seed", type=int, default=None)
    ps.add_argument("--replicate", type=int, default=None)
    ps.add_argument("--policy", choices=["midpoint", "optimal"], default=None)
    ps.add_argument("--out", default=None, help="output path (extension follows format)")
    ps.add_argument("--format", dest="formats", action="append",
                    choices=["vmg", "csv", "pgm"], default=None,
                    help="output format; repeatable")
    _add_common(ps)
    ps.set_defaults(func=cmd_simulate)

    pr = sub.add_parser("roughness", help="Monte-Carlo roughness study")
    pr.add_argument("--alphas", default=None, help="comma-separated exponents")
    pr.add_argument("--schemes", default=None,
                    help="comma-separated: hybrid[:kappa] or riemann")
    pr.add_argument("--n", type=int, default=None)
    pr.add_argument("--gamma", type=float, default=None)
    pr.add_argument("--replicates", type=int, default=None)
    pr.add_argument("--seed", type=int, default=None)
    pr.add_argument("--out", default=None, help="report CSV path (default stdout)")
    pr.add_argument("--plot-data", dest="plot_data", default=None,
                    help="write (alpha, mean_dim) pairs per scheme to this CSV")
    pr.add_argument("--timing-out", dest="timing_out", default=None,
                    help="write per-scheme wall times (1 and all replicates)")
    _add_common(pr)
    pr.set_defaults(func=cmd_roughness)

    pm = sub.add_parser("mse", help="deterministic hybrid-scheme error decomposition")
    pm.add_argument("--kernel", help="kernel grammar")
    pm.add_argument("--n-list", dest="n_list", default=None,
                    help="comma-separated resolutions (>= 3 for the rate fit)")
    pm.add_argument("--gamma", type=float, default=None)
    pm.add_argument("--kappa", type=int, default=None)
    pm.add_argument("--policy", choices=["midpoint", "optimal"], default=None)
    pm.add_argument("--out", default=None, help="CSV path (default stdout)")
    _add_common(pm)
    pm.set_defaults(func=cmd_mse)

    pc = sub.add_parser("covariance", help="dump an inner-block covariance matrix")
    pc.add_argument("--alpha", type=float, default=None)
    pc.add_argument("--kappa", type=int, default=None)
    pc.add_argument("--n", type=int, default=None)
    pc.add_argument("--out", default=None, help="CSV path (default stdout)")
    _add_common(pc)
    pc.set_defaults(func=cmd_covariance)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"{_PROG}: error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"{_PROG}: numeric failure: {exc}", file=sys.stderr)
        return 3
    except VmmaError as exc:
        print(f"{_PROG}: error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
