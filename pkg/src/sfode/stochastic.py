"""Equidistant time grids and reproducible Wiener paths.

Noise streams are counter-based: the generator for a given (master seed,
path index, channel index) triple is a Philox engine keyed through
``numpy.random.SeedSequence`` with the triple as entropy + spawn key, so an
ensemble produces the same paths no matter in which order (or on how many
workers) its members run.  Gaussians come from numpy's ziggurat sampler on
that stream, which is deterministic for a fixed numpy build.
"""

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "TimeGrid",
    "SeedSpec",
    "WienerPath",
    "make_grid",
    "generate_path",
    "restrict_path",
    "write_path_csv",
]

_REL_TOL = 1e-9


@dataclass(frozen=True)
class TimeGrid:
    """Nodes 0 = t_0 < t_1 < ... < t_{N+1} = T with uniform spacing h.

    ``num_steps`` is the number of increments N+1, so there are
    ``num_steps + 1`` nodes.  ``N`` follows the convention that the last node
    index is N+1.
    """

    T: float
    h: float
    num_steps: int

    def __post_init__(self):
        if not (self.T > 0 and self.h > 0):
            raise ValueError(f"TimeGrid needs T > 0 and h > 0, got T={self.T}, h={self.h}")
        if self.num_steps < 2:
            raise ValueError(f"TimeGrid needs at least 2 steps, got {self.num_steps}")
        if abs(self.num_steps * self.h - self.T) > self.h * _REL_TOL:
            raise ValueError(
                f"TimeGrid is inconsistent: {self.num_steps} steps of h={self.h} "
                f"do not reach T={self.T}"
            )

    @property
    def N(self) -> int:
        return self.num_steps - 1

    @property
    def num_nodes(self) -> int:
        return self.num_steps + 1

    def nodes(self) -> np.ndarray:
        return np.arange(self.num_nodes) * self.h


def make_grid(T: float, h: float) -> TimeGrid:
    """Build the uniform grid on [0, T]; T/h must be an integer >= 2.

    Non-commensurate (T, h) pairs are rejected rather than silently rounded,
    so a run always covers exactly the horizon it was asked for.
    """
    if not (T > 0 and h > 0):
        raise ValueError(f"make_grid needs T > 0 and h > 0, got T={T}, h={h}")
    ratio = T / h
    num_steps = round(ratio)
    if num_steps < 2 or abs(ratio - num_steps) > _REL_TOL:
        raise ValueError(
            f"T/h = {ratio!r} is not an integer >= 2; pick h commensurate with T"
        )
    return TimeGrid(T=float(T), h=float(h), num_steps=num_steps)


@dataclass(frozen=True)
class SeedSpec:
    """Identifies one independent noise stream within an ensemble.

    Distinct (master_seed, path_index, channel_index) triples key distinct
    counter-based streams.  For multi-channel paths, ``channel_index`` is the
    index of the first channel.
    """

    master_seed: int
    path_index: int = 0
    channel_index: int = 0

    def __post_init__(self):
        if not 0 <= self.master_seed < 2**64:
            raise ValueError(f"master_seed must be a 64-bit unsigned int, got {self.master_seed}")
        if self.path_index < 0 or self.channel_index < 0:
            raise ValueError("path_index and channel_index must be >= 0")


@dataclass
class WienerPath:
    """Sampled Brownian motion on a grid; immutable after construction.

    ``cumulative`` (shape (d_w, num_steps + 1), W(0) = 0) is the primary
    record; ``increments`` (shape (d_w, num_steps)) are stored as its exact
    floating-point differences so the two views agree bitwise.
    """

    grid: TimeGrid
    increments: np.ndarray
    cumulative: np.ndarray
    seed: SeedSpec | None = None

    def __post_init__(self):
        self.increments = np.asarray(self.increments, dtype=float)
        self.cumulative = np.asarray(self.cumulative, dtype=float)
        if self.cumulative.shape != (self.increments.shape[0], self.grid.num_steps + 1):
            raise ValueError("cumulative shape does not match grid/increments")
        if self.increments.shape[1] != self.grid.num_steps:
            raise ValueError("increments shape does not match grid")
        if np.any(self.cumulative[:, 0] != 0.0):
            raise ValueError("W(0) must be 0")
        self.increments.flags.writeable = False
        self.cumulative.flags.writeable = False

    @property
    def num_channels(self) -> int:
        return self.increments.shape[0]


def _from_cumulative(grid: TimeGrid, cumulative: np.ndarray, seed=None) -> WienerPath:
    return WienerPath(
        grid=grid,
        increments=np.diff(cumulative, axis=1),
        cumulative=cumulative,
        seed=seed,
    )


def generate_path(seed: SeedSpec, grid: TimeGrid, num_channels: int = 1) -> WienerPath:
    """Draw a Wiener path with i.i.d. Normal(0, h) increments per channel.

    Channel c of the path uses the stream keyed by
    (master_seed, path_index, channel_index + c), so channels are mutually
    independent and the whole path is reproducible bit-for-bit from its
    SeedSpec.
    """
    if num_channels < 1:
        raise ValueError(f"num_channels must be >= 1, got {num_channels}")
    sqrt_h = math.sqrt(grid.h)
    draws = np.empty((num_channels, grid.num_steps))
    for c in range(num_channels):
        ss = np.random.SeedSequence(
            entropy=seed.master_seed,
            spawn_key=(seed.path_index, seed.channel_index + c),
        )
        rng = np.random.Generator(np.random.Philox(ss))
        draws[c] = rng.standard_normal(grid.num_steps) * sqrt_h
    cumulative = np.concatenate(
        [np.zeros((num_channels, 1)), np.cumsum(draws, axis=1)], axis=1
    )
    return _from_cumulative(grid, cumulative, seed=seed)


def restrict_path(path: WienerPath, factor: int) -> WienerPath:
    """Restrict a fine path to a grid coarsened by an integer factor.

    The coarse cumulative values are taken directly from the fine ones
    (every ``factor``-th node), so the coarse path's endpoint W(T) equals the
    fine endpoint bitwise and each coarse increment is the exact sum of the
    fine increments it spans.
    """
    if factor < 1:
        raise ValueError(f"factor must be >= 1, got {factor}")
    if path.grid.num_steps % factor != 0:
        raise ValueError(
            f"cannot coarsen {path.grid.num_steps} steps by factor {factor}"
        )
    if factor == 1:
        return path
    coarse = TimeGrid(
        T=path.grid.T,
        h=path.grid.h * factor,
        num_steps=path.grid.num_steps // factor,
    )
    cumulative = path.cumulative[:, ::factor].copy()
    return _from_cumulative(coarse, cumulative, seed=path.seed)


def write_path_csv(path: WienerPath, stream) -> None:
    """Debug dump: one row per step with the increment and running sum."""
    d = path.num_channels
    header = ["n", "t_n"]
    header += [f"dW{c + 1}" for c in range(d)]
    header += [f"W{c + 1}" for c in range(d)]
    stream.write(",".join(header) + "\n")
    t = path.grid.nodes()
    for n in range(path.grid.num_steps):
        row = [str(n), format(t[n], ".17g")]
        row += [format(path.increments[c, n], ".17g") for c in range(d)]
        row += [format(path.cumulative[c, n], ".17g") for c in range(d)]
        stream.write(",".join(row) + "\n")
