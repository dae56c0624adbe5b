"""Ensemble statistics, noise-integral checks, and convergence measurement.

The Monte Carlo machinery here works path-by-path with counter-based seeds
(path i of a run is SeedSpec(master_seed, path_offset + i, 0)), and all
reductions run in path-index order, so every statistic is bit-reproducible
and independent of how many workers computed the trajectories.
"""

import math
import multiprocessing
from dataclasses import dataclass

import numpy as np

from .solver import SolverConfig, Trajectory, solve
from .stochastic import SeedSpec, TimeGrid, generate_path, make_grid, restrict_path
from .systems import SystemModel

__all__ = [
    "EnsembleStats",
    "ConvergenceReport",
    "BoundedCheck",
    "accumulate_stats",
    "ensemble_run",
    "ito_isometry_check",
    "convergence_order",
    "bounded_attractor_check",
    "write_stats_csv",
]


@dataclass
class EnsembleStats:
    """Per-node moments across M paths on one shared grid.

    ``variance`` is the population (1/M) estimator; ``l2sq`` is the mean
    squared Euclidean norm (1/M) sum |y(t)|**2, i.e. the squared L2 norm of
    the random state, with the square root left to consumers.
    """

    grid: TimeGrid
    mean: np.ndarray       # (dim, num_nodes)
    variance: np.ndarray   # (dim, num_nodes)
    l2sq: np.ndarray       # (num_nodes,)
    num_paths: int
    trajectories: list | None = None


def accumulate_stats(grid: TimeGrid, states_seq, keep: bool = False) -> EnsembleStats:
    """Reduce an ordered sequence of state arrays to ensemble statistics.

    Welford accumulation in sequence order: deterministic, single-pass, and
    the second-moment accumulator is non-negative term by term, so variance
    can never round below zero.
    """
    mean = None
    m2 = None
    l2 = None
    kept = [] if keep else None
    count = 0
    for states in states_seq:
        count += 1
        if kept is not None:
            kept.append(states)
        if mean is None:
            mean = np.array(states, dtype=float)
            m2 = np.zeros_like(mean)
            l2 = np.sum(states**2, axis=0)
            continue
        delta = states - mean
        mean += delta / count
        m2 += delta * (states - mean)
        l2 += np.sum(states**2, axis=0)
    if count == 0:
        raise ValueError("accumulate_stats needs at least one trajectory")
    return EnsembleStats(
        grid=grid,
        mean=mean,
        variance=m2 / count,
        l2sq=l2 / count,
        num_paths=count,
        trajectories=kept,
    )


# Worker state is installed before the fork so the (possibly closure-holding)
# model never needs to be pickled; children inherit it by memory copy.
_WORKER_STATE = None


def _path_worker(index: int) -> np.ndarray:
    model, cfg, master_seed, path_offset = _WORKER_STATE
    path = generate_path(
        SeedSpec(master_seed, path_offset + index, 0), cfg.grid, model.noise_dim
    )
    try:
        return solve(model, cfg, path).states
    except Exception as exc:
        # annotate with the path index before the error crosses the process
        # boundary; DivergenceError keeps its fields through pickling
        if hasattr(exc, "path_index"):
            raise type(exc)(
                f"path {path_offset + index}: {exc}",
                getattr(exc, "step", None),
                getattr(exc, "time", None),
                path_offset + index,
            ) from None
        raise


def ensemble_run(model: SystemModel, cfg: SolverConfig, master_seed: int, M: int,
                 workers: int = 1, keep_paths: bool = False,
                 path_offset: int = 0) -> EnsembleStats:
    """Solve M independent paths and reduce them to EnsembleStats.

    Results are identical for any worker count: path i depends only on its
    own seed triple and the reduction always runs in index order.  Parallel
    execution uses fork-based processes (falls back to serial where fork is
    unavailable).
    """
    global _WORKER_STATE
    if M < 1:
        raise ValueError(f"M must be >= 1, got {M}")
    _WORKER_STATE = (model, cfg, master_seed, path_offset)
    try:
        if workers > 1:
            try:
                ctx = multiprocessing.get_context("fork")
            except ValueError:
                ctx = None
            if ctx is not None:
                chunk = max(1, M // (4 * workers))
                with ctx.Pool(processes=workers) as pool:
                    all_states = pool.map(_path_worker, range(M), chunksize=chunk)
                return accumulate_stats(cfg.grid, all_states, keep=keep_paths)
        return accumulate_stats(
            cfg.grid, (_path_worker(i) for i in range(M)), keep=keep_paths
        )
    finally:
        _WORKER_STATE = None


def ito_isometry_check(alpha: float, grid: TimeGrid, M: int,
                       master_seed: int = 0) -> float:
    """Empirical check of E|int v dW|**2 = int E|v|**2 ds for the scheme's
    kernel v(s) = (T - s)**(alpha - 1).

    Left-point Monte Carlo estimate against the closed form
    T**(2*alpha-1) / (2*alpha-1); returns the relative error.
    """
    if not 0.5 < alpha <= 1.0:
        raise ValueError(f"alpha must be in (1/2, 1], got {alpha!r}")
    if M < 1000:
        raise ValueError(f"ito_isometry_check needs M >= 1000, got {M}")
    T = grid.T
    t = grid.nodes()[:-1]
    v = (T - t)**(alpha - 1.0)
    ss = np.random.SeedSequence(entropy=master_seed, spawn_key=(0, 0))
    rng = np.random.Generator(np.random.Philox(ss))
    dW = rng.standard_normal((M, grid.num_steps)) * math.sqrt(grid.h)
    mc = float(np.mean((dW @ v)**2))
    exact = T**(2.0 * alpha - 1.0) / (2.0 * alpha - 1.0)
    return abs(mc - exact) / exact


@dataclass
class ConvergenceReport:
    h: np.ndarray        # step sizes, coarse to fine, that carry an error
    errors: np.ndarray   # discrete sup-norm errors per step size
    order: float         # least-squares slope of log error vs log h
    degenerate: bool     # all errors vanished; no rate can be fitted


def convergence_order(model: SystemModel, alpha: float, T: float, h_list,
                      master_seed: int | None = None, reference=None,
                      stochastic: bool = False,
                      cfg_kwargs: dict | None = None) -> ConvergenceReport:
    """Empirical convergence rate over a dyadic chain of step sizes.

    With a ``reference`` callable (t -> exact state) errors are measured
    against it on every grid; otherwise the finest run is the reference and
    errors are measured for the coarser grids at their (nested) nodes.  In
    stochastic mode one fine path is drawn and restricted to each coarse grid
    by summing increments, so the measurement sees discretization error, not
    noise resampling.
    """
    hs = sorted(set(float(h) for h in h_list), reverse=True)
    if len(hs) < 3:
        raise ValueError(f"need at least 3 grid levels, got {len(hs)}")
    for coarse, fine in zip(hs, hs[1:]):
        ratio = coarse / fine
        if abs(ratio - round(ratio)) > 1e-9 or round(ratio) != 2:
            raise ValueError(f"h_list must be a dyadic refinement chain, got {hs}")
    if stochastic and master_seed is None:
        raise ValueError("stochastic convergence measurement needs a master_seed")

    grids = [make_grid(T, h) for h in hs]
    fine_grid = grids[-1]
    fine_path = None
    if stochastic:
        fine_path = generate_path(SeedSpec(master_seed, 0, 0), fine_grid, model.noise_dim)

    kwargs = dict(cfg_kwargs or {})
    runs = []
    for grid in grids:
        cfg = SolverConfig(alpha=alpha, grid=grid, stochastic=stochastic, **kwargs)
        path = None
        if stochastic:
            path = restrict_path(fine_path, fine_path.grid.num_steps // grid.num_steps)
        runs.append(solve(model, cfg, path))

    if reference is not None:
        errs, err_h = [], []
        for grid, run in zip(grids, runs):
            exact = np.stack([np.asarray(reference(t), dtype=float)
                              for t in grid.nodes()], axis=1)
            errs.append(float(np.max(np.abs(run.states - exact))))
            err_h.append(grid.h)
    else:
        fine = runs[-1]
        errs, err_h = [], []
        for grid, run in zip(grids[:-1], runs[:-1]):
            factor = fine_grid.num_steps // grid.num_steps
            restricted = fine.states[:, ::factor]
            errs.append(float(np.max(np.abs(run.states - restricted))))
            err_h.append(grid.h)

    errors = np.array(errs)
    if np.all(errors < 1e-300):
        return ConvergenceReport(
            h=np.array(err_h), errors=errors, order=float("nan"), degenerate=True
        )
    slope = np.polyfit(np.log(err_h), np.log(errors), 1)[0]
    return ConvergenceReport(
        h=np.array(err_h), errors=errors, order=float(slope), degenerate=False
    )


@dataclass
class BoundedCheck:
    passed: bool
    max_abs: float
    radius: float


def bounded_attractor_check(traj: Trajectory, radius: float) -> BoundedCheck:
    """Did the trajectory stay inside the sup-norm ball of the given radius?

    A cheap qualitative stand-in for eyeballing phase portraits: chaotic but
    bounded dynamics must pass, escapes must fail.
    """
    max_abs = float(np.max(np.abs(traj.states)))
    return BoundedCheck(passed=bool(max_abs <= radius), max_abs=max_abs, radius=radius)


def write_stats_csv(stats: EnsembleStats, stream, metadata: dict | None = None) -> None:
    """Rows t, mean_1..d, var_1..d, l2sq with 17 significant digits."""
    for key in sorted(metadata or {}):
        stream.write(f"# {key}={metadata[key]}\n")
    d = stats.mean.shape[0]
    header = ["t"]
    header += [f"mean_{i + 1}" for i in range(d)]
    header += [f"var_{i + 1}" for i in range(d)]
    header += ["l2sq"]
    stream.write(",".join(header) + "\n")
    t = stats.grid.nodes()
    for j in range(stats.grid.num_nodes):
        row = [format(t[j], ".17g")]
        row += [format(stats.mean[i, j], ".17g") for i in range(d)]
        row += [format(stats.variance[i, j], ".17g") for i in range(d)]
        row.append(format(stats.l2sq[j], ".17g"))
        stream.write(",".join(row) + "\n")
