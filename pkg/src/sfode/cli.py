"""Command-line front end: simulate | ensemble | picard | converge | weights.

Runs are described by a flat key=value config file plus command-line flag
overrides (flags win).  Every output file embeds the tool version and the
fully resolved configuration, and a given (config, seed) pair always produces
byte-identical files, whatever the worker count.

Exit codes: 0 ok, 2 config error, 3 divergence, 4 convergence-diagnostic
failure.
"""

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass, fields, replace

from . import __version__
from .analysis import (
    bounded_attractor_check,
    convergence_order,
    ensemble_run,
    write_stats_csv,
)
from .picard import cauchy_diagnostic, write_distance_csv
from .solver import (
    DivergenceError,
    NoiseHistory,
    SolverConfig,
    solve,
    write_trajectory_csv,
)
from .special import gamma
from .stochastic import SeedSpec, generate_path, make_grid
from .systems import (
    DEFAULT_MU,
    LorenzParams,
    NewtonLeipnikParams,
    linear_test,
    lorenz,
    newton_leipnik,
)
from .weights import WeightMode, corrector_weights, predictor_weights

__all__ = ["ConfigError", "RunConfig", "main"]

_SYSTEMS = ("newton_leipnik", "lorenz", "linear_test")
_SYSTEM_ALIASES = {"custom-linear-test": "linear_test", "custom_linear_test": "linear_test"}

_FLOAT_KEYS = ("alpha", "h", "T", "mu", "beta", "rho", "a", "b", "c", "lam", "sigma0")
_INT_KEYS = ("seed", "paths", "workers")
_STR_KEYS = ("system", "noise_history", "weight_mode", "format")


class ConfigError(ValueError):
    """One or more configuration constraints are violated."""


@dataclass
class RunConfig:
    system: str = "newton_leipnik"
    alpha: float = 0.9
    h: float = 0.01
    T: float = 1.0
    mu: float | None = None   # resolved to DEFAULT_MU for the built-in systems
    beta: float = 0.4
    rho: float = 0.175
    a: float = 10.0
    b: float = 8.0 / 3.0
    c: float = 28.0
    lam: float = 1.0
    sigma0: float = 0.0
    seed: int = 0
    paths: int = 1
    workers: int = 0          # 0 = one worker per available core
    noise_history: str = NoiseHistory.PER_STEP.value
    weight_mode: str = WeightMode.STANDARD.value

    def resolved(self) -> "RunConfig":
        cfg = replace(self)
        cfg.system = _SYSTEM_ALIASES.get(cfg.system, cfg.system)
        if cfg.mu is None:
            cfg.mu = DEFAULT_MU
        if cfg.workers == 0:
            cfg.workers = os.cpu_count() or 1
        return cfg

    def stochastic(self) -> bool:
        if self.system == "linear_test":
            return self.sigma0 != 0.0
        return (self.mu if self.mu is not None else DEFAULT_MU) != 0.0


def _validate(cfg: RunConfig) -> None:
    """Check every constraint and report all violations at once."""
    problems = []
    if cfg.system not in _SYSTEMS:
        problems.append(
            f"system must be one of {', '.join(_SYSTEMS)}; got {cfg.system!r}"
        )
    if not 0.0 < cfg.alpha <= 1.0:
        problems.append(f"alpha must be in (0, 1]; got {cfg.alpha!r}")
    if not cfg.h > 0:
        problems.append(f"h must be > 0; got {cfg.h!r}")
    if not cfg.T > 0:
        problems.append(f"T must be > 0; got {cfg.T!r}")
    if cfg.h > 0 and cfg.T > 0:
        ratio = cfg.T / cfg.h
        if round(ratio) < 2 or abs(ratio - round(ratio)) > 1e-9:
            problems.append(
                f"T/h must be an integer >= 2; got T/h = {ratio!r}"
            )
    if cfg.stochastic() and not cfg.alpha > 0.5:
        problems.append(
            f"stochastic runs (nonzero noise) require alpha > 1/2; got alpha={cfg.alpha!r}"
        )
    if cfg.system == "newton_leipnik" and not cfg.beta > 0:
        problems.append(f"beta must be > 0; got {cfg.beta!r}")
    if not 0 <= cfg.seed < 2**64:
        problems.append(f"seed must be a 64-bit unsigned integer; got {cfg.seed!r}")
    if cfg.paths < 1:
        problems.append(f"paths must be >= 1; got {cfg.paths!r}")
    if cfg.workers < 0:
        problems.append(f"workers must be >= 0 (0 = auto); got {cfg.workers!r}")
    try:
        NoiseHistory(cfg.noise_history)
    except ValueError:
        problems.append(
            f"noise_history must be one of "
            f"{', '.join(m.value for m in NoiseHistory)}; got {cfg.noise_history!r}"
        )
    try:
        WeightMode(cfg.weight_mode)
    except ValueError:
        problems.append(
            f"weight_mode must be one of "
            f"{', '.join(m.value for m in WeightMode)}; got {cfg.weight_mode!r}"
        )
    if problems:
        raise ConfigError("\n".join(problems))


def parse_config_file(path: str) -> dict:
    """Read flat key=value lines; '#' starts a comment."""
    values = {}
    problems = []
    known = {f.name for f in fields(RunConfig)}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                problems.append(f"{path}:{lineno}: expected key=value, got {line!r}")
                continue
            key, _, value = line.partition("=")
            key, value = key.strip(), value.strip()
            if key not in known:
                problems.append(f"{path}:{lineno}: unknown key {key!r}")
                continue
            values[key] = value
    if problems:
        raise ConfigError("\n".join(problems))
    return values


def _coerce(key: str, value):
    if isinstance(value, str):
        try:
            if key in _FLOAT_KEYS:
                return float(value)
            if key in _INT_KEYS:
                return int(value)
        except ValueError:
            raise ConfigError(f"could not parse {key}={value!r}") from None
    return value


def _build_config(args) -> RunConfig:
    cfg = RunConfig()
    if args.config:
        for key, value in parse_config_file(args.config).items():
            setattr(cfg, key, _coerce(key, value))
    for f in fields(RunConfig):
        flag = getattr(args, f.name, None)
        if flag is not None:
            setattr(cfg, f.name, _coerce(f.name, flag))
    cfg = cfg.resolved()
    _validate(cfg)
    return cfg


def _build_model(cfg: RunConfig):
    if cfg.system == "newton_leipnik":
        return newton_leipnik(NewtonLeipnikParams(beta=cfg.beta, rho=cfg.rho, mu=cfg.mu))
    if cfg.system == "lorenz":
        return lorenz(LorenzParams(a=cfg.a, b=cfg.b, c=cfg.c, mu=cfg.mu))
    return linear_test(lam=cfg.lam, sigma0=cfg.sigma0)


def _solver_config(cfg: RunConfig) -> SolverConfig:
    return SolverConfig(
        alpha=cfg.alpha,
        grid=make_grid(cfg.T, cfg.h),
        stochastic=cfg.stochastic(),
        noise_history=NoiseHistory(cfg.noise_history),
        weight_mode=WeightMode(cfg.weight_mode),
    )


def _metadata(cfg: RunConfig, model) -> dict:
    meta = {"version": __version__, "system": cfg.system}
    meta.update({k: v for k, v in sorted(model.params.items())})
    meta.update(
        alpha=cfg.alpha, h=cfg.h, T=cfg.T, seed=cfg.seed, paths=cfg.paths,
        stochastic=cfg.stochastic(), noise_history=cfg.noise_history,
        weight_mode=cfg.weight_mode,
    )
    return meta


def _open_output(path):
    if path is None:
        return sys.stdout, False
    return open(path, "w", encoding="utf-8", newline="\n"), True


def _write(path, writer) -> None:
    stream, close = _open_output(path)
    try:
        writer(stream)
    finally:
        if close:
            stream.close()


def cmd_simulate(args) -> int:
    cfg = _build_config(args)
    model = _build_model(cfg)
    scfg = _solver_config(cfg)
    path = None
    if scfg.stochastic:
        path = generate_path(SeedSpec(cfg.seed, 0, 0), scfg.grid, model.noise_dim)
    traj = solve(model, scfg, path)
    meta = _metadata(cfg, model)
    check = bounded_attractor_check(traj, float("inf"))
    meta["max_abs_state"] = format(check.max_abs, ".17g")
    _write(args.output, lambda s: write_trajectory_csv(traj, s, meta))
    return 0


def cmd_ensemble(args) -> int:
    cfg = _build_config(args)
    model = _build_model(cfg)
    scfg = _solver_config(cfg)
    stats = ensemble_run(model, scfg, cfg.seed, cfg.paths, workers=cfg.workers)
    meta = _metadata(cfg, model)

    if args.format == "json":
        summary = {
            "version": __version__,
            "config": {k: meta[k] for k in meta if k != "version"},
            "num_paths": stats.num_paths,
            "terminal": {
                "t": scfg.grid.T,
                "mean": stats.mean[:, -1].tolist(),
                "variance": stats.variance[:, -1].tolist(),
                "l2sq": float(stats.l2sq[-1]),
            },
        }
        if cfg.system == "linear_test" and cfg.lam == 0.0 and cfg.sigma0 != 0.0:
            expected = (
                cfg.sigma0**2 * cfg.T ** (2 * cfg.alpha - 1)
                / ((2 * cfg.alpha - 1) * gamma(cfg.alpha) ** 2)
            )
            observed = float(stats.variance[0, -1])
            rel = abs(observed - expected) / expected
            summary["variance_law"] = {
                "expected": expected,
                "observed": observed,
                "rel_error": rel,
                "passed": bool(rel <= 0.10),
            }
        _write(args.output, lambda s: s.write(json.dumps(summary, indent=2) + "\n"))
    else:
        _write(args.output, lambda s: write_stats_csv(stats, s, meta))
    return 0


def cmd_picard(args) -> int:
    cfg = _build_config(args)
    if cfg.paths < 100:
        raise ConfigError(f"picard diagnostic needs paths >= 100; got {cfg.paths}")
    model = _build_model(cfg)
    grid = make_grid(cfg.T, cfg.h)
    report = cauchy_diagnostic(
        model, cfg.alpha, grid, cfg.seed, cfg.paths, args.iterations,
        sup_mode=args.sup,
    )
    meta = _metadata(cfg, model)
    meta["iterations"] = args.iterations
    meta["converged"] = report.converged
    meta["max_terminal_l2"] = format(report.max_terminal_l2, ".17g")
    _write(args.output, lambda s: write_distance_csv(report, s, meta))
    return 0 if report.converged else 4


def cmd_converge(args) -> int:
    cfg = _build_config(args)
    if args.levels < 3:
        raise ConfigError(f"converge needs at least 3 levels; got {args.levels}")
    model = _build_model(cfg)
    h_list = [cfg.h / 2**i for i in range(args.levels)]
    report = convergence_order(
        model, cfg.alpha, cfg.T, h_list,
        master_seed=cfg.seed, stochastic=cfg.stochastic(),
        cfg_kwargs={
            "noise_history": NoiseHistory(cfg.noise_history),
            "weight_mode": WeightMode(cfg.weight_mode),
        },
    )
    meta = _metadata(cfg, model)
    summary = {
        "version": __version__,
        "config": {k: meta[k] for k in meta if k != "version"},
        "levels": [
            {"h": float(h), "error": float(e)}
            for h, e in zip(report.h, report.errors)
        ],
        "order": None if report.degenerate else report.order,
        "degenerate": report.degenerate,
    }
    _write(args.output, lambda s: s.write(json.dumps(summary, indent=2) + "\n"))
    return 4 if report.degenerate else 0


def cmd_weights(args) -> int:
    try:
        mode = WeightMode(args.mode)
    except ValueError:
        raise ConfigError(
            f"mode must be one of {', '.join(m.value for m in WeightMode)}; "
            f"got {args.mode!r}"
        ) from None
    if args.step < 0:
        raise ConfigError(f"step index must be >= 0; got {args.step}")
    if not 0.0 < args.alpha <= 1.0:
        raise ConfigError(f"alpha must be in (0, 1]; got {args.alpha!r}")
    if not args.h > 0:
        raise ConfigError(f"h must be > 0; got {args.h!r}")
    a = corrector_weights(args.step, args.alpha, mode)
    b = predictor_weights(args.step, args.alpha, args.h)

    def writer(stream):
        stream.write(f"# version={__version__}\n")
        stream.write(f"# n={args.step} alpha={args.alpha} h={args.h} mode={mode.value}\n")
        stream.write("j,a_j,b_j\n")
        for j in range(args.step + 2):
            bj = format(b[j], ".17g") if j <= args.step else ""
            stream.write(f"{j},{format(a[j], '.17g')},{bj}\n")

    _write(args.output, writer)
    return 0


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key=value config file")
    p.add_argument("--system", choices=_SYSTEMS + tuple(_SYSTEM_ALIASES))
    for key in _FLOAT_KEYS:
        p.add_argument(f"--{key}", type=float)
    for key in _INT_KEYS:
        p.add_argument(f"--{key}", type=int)
    p.add_argument("--noise-history", dest="noise_history",
                   choices=[m.value for m in NoiseHistory])
    p.add_argument("--weight-mode", dest="weight_mode",
                   choices=[m.value for m in WeightMode])
    p.add_argument("--output", "-o", help="output file (default: stdout)")


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sfode",
        description="Predictor-corrector solver for stochastic fractional-order systems",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="integrate a single path and export the trajectory")
    _add_run_flags(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("ensemble", help="Monte Carlo ensemble statistics")
    _add_run_flags(p)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.set_defaults(func=cmd_ensemble)

    p = sub.add_parser("picard", help="fixed-point contraction diagnostic")
    _add_run_flags(p)
    p.add_argument("--iterations", "-K", type=int, default=6)
    p.add_argument("--sup", action="store_true",
                   help="measure gaps over the whole grid instead of at T")
    p.set_defaults(func=cmd_picard)

    p = sub.add_parser("converge", help="empirical convergence order over dyadic grids")
    _add_run_flags(p)
    p.add_argument("--levels", type=int, default=3,
                   help="number of dyadic refinements starting from --h")
    p.set_defaults(func=cmd_converge)

    p = sub.add_parser("weights", help="dump predictor/corrector weight tables")
    p.add_argument("--step", "-n", type=int, required=True, help="step index n")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--h", type=float, default=1.0)
    p.add_argument("--mode", default=WeightMode.STANDARD.value)
    p.add_argument("--output", "-o")
    p.set_defaults(func=cmd_weights)

    return parser


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"sfode: configuration error:\n{exc}", file=sys.stderr)
        return 2
    except DivergenceError as exc:
        print(f"sfode: divergence: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
