"""Time grids, path containers, ensemble simulation and path-functional transforms.

Paths live on a uniform grid over ``[0, T]``. Ensembles are simulated with
one counter-based RNG substream per path, keyed by ``(seed, path index)``,
so regenerating with the same seed is bit-exact and growing the path count
never perturbs earlier paths. All containers are immutable after
construction and safe for concurrent reads.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

_SEED_LIMIT = 1 << 64


class FunctionalKind(str, Enum):
    """Closed enumeration of supported path-to-path transforms."""

    IDENTITY = "identity"
    TIME_INTEGRAL = "time_integral"
    TIME_AVERAGE = "time_average"
    RUNNING_MAX = "running_max"
    RUNNING_MIN = "running_min"
    RANGE = "range"


@dataclass(frozen=True, eq=False)
class TimeGrid:
    """Uniform partition of ``[0, horizon]`` into ``n_steps`` subintervals."""

    horizon: float
    n_steps: int
    nodes: np.ndarray
    dt: float

    def matches(self, other: "TimeGrid") -> bool:
        return self.n_steps == other.n_steps and self.horizon == other.horizon

    @property
    def n_nodes(self) -> int:
        return self.n_steps + 1

    def trapezoid_weights(self) -> np.ndarray:
        """Quadrature weights: ``dt`` per node, halved at both endpoints."""
        w = np.full(self.n_nodes, self.dt)
        w[0] *= 0.5
        w[-1] *= 0.5
        return w

    def node_index(self, t: float, rtol: float = 1e-9) -> int:
        """Index of the grid node equal to ``t`` (tiny tolerance, no interpolation)."""
        idx = int(round(t / self.dt))
        if idx < 0 or idx > self.n_steps or abs(self.nodes[idx] - t) > rtol * max(self.horizon, 1.0):
            raise ValueError(f"time {t} is not a grid node (N={self.n_steps}, T={self.horizon})")
        return idx


@dataclass(frozen=True, eq=False)
class DiscretePath:
    """A single trajectory sampled on a grid."""

    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.grid.n_nodes,):
            raise ValueError(f"path needs {self.grid.n_nodes} values, got {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("path values must be finite")
        object.__setattr__(self, "values", values)


@dataclass(frozen=True, eq=False)
class PathEnsemble:
    """A ``(n_paths, n_nodes)`` matrix of trajectories sharing one grid."""

    grid: TimeGrid
    values: np.ndarray
    seed: int
    label: str

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2 or values.shape[1] != self.grid.n_nodes:
            raise ValueError(f"ensemble values must be (J, {self.grid.n_nodes}), got {values.shape}")
        object.__setattr__(self, "values", values)

    @property
    def n_paths(self) -> int:
        return self.values.shape[0]

    def path(self, j: int) -> DiscretePath:
        return DiscretePath(self.grid, self.values[j])


def make_uniform_grid(horizon: float, n_steps: int) -> TimeGrid:
    """Build the uniform grid ``t_n = n * horizon / n_steps``, ``n = 0..n_steps``."""
    if not horizon > 0:
        raise ValueError(f"horizon must be positive, got {horizon}")
    if n_steps < 1:
        raise ValueError(f"n_steps must be >= 1, got {n_steps}")
    nodes = np.linspace(0.0, horizon, n_steps + 1)
    return TimeGrid(horizon=float(horizon), n_steps=int(n_steps), nodes=nodes, dt=horizon / n_steps)


def path_substream(seed: int, j: int) -> np.random.Generator:
    """Independent RNG substream for path ``j`` of an ensemble seeded with ``seed``."""
    if not 0 <= seed < _SEED_LIMIT:
        raise ValueError("seed must be a 64-bit unsigned integer")
    return np.random.Generator(np.random.Philox(key=(seed << 64) | j))


def _standard_normal_block(seed: int, j0: int, n_paths: int, n_draws: int) -> np.ndarray:
    out = np.empty((n_paths, n_draws))
    for i in range(n_paths):
        out[i] = path_substream(seed, j0 + i).standard_normal(n_draws)
    return out


def simulate_brownian(grid: TimeGrid, n_paths: int, seed: int) -> PathEnsemble:
    """Simulate standard Brownian paths started at 0.

    Increments over each subinterval are i.i.d. normal with variance ``dt``,
    drawn from the per-path substream.
    """
    if n_paths < 1:
        raise ValueError(f"n_paths must be >= 1, got {n_paths}")
    z = _standard_normal_block(seed, 0, n_paths, grid.n_steps)
    values = np.empty((n_paths, grid.n_nodes))
    values[:, 0] = 0.0
    np.cumsum(z * np.sqrt(grid.dt), axis=1, out=values[:, 1:])
    return PathEnsemble(grid=grid, values=values, seed=seed, label="brownian")


def simulate_black_scholes(
    grid: TimeGrid, x0: float, sigma: float, n_paths: int, seed: int
) -> PathEnsemble:
    """Simulate zero-rate Black-Scholes paths with the exact log-normal step.

    ``x_{n+1} = x_n * exp(sigma * dW - sigma^2 * dt / 2)``, so the paths are
    martingales with no discretization bias in the marginal law.
    """
    if not x0 > 0:
        raise ValueError(f"x0 must be positive, got {x0}")
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    if n_paths < 1:
        raise ValueError(f"n_paths must be >= 1, got {n_paths}")
    z = _standard_normal_block(seed, 0, n_paths, grid.n_steps)
    log_increments = sigma * np.sqrt(grid.dt) * z - 0.5 * sigma * sigma * grid.dt
    values = np.empty((n_paths, grid.n_nodes))
    values[:, 0] = 0.0
    np.cumsum(log_increments, axis=1, out=values[:, 1:])
    values = x0 * np.exp(values)
    return PathEnsemble(grid=grid, values=values, seed=seed, label="bs")


def transform_values(kind: FunctionalKind, values: np.ndarray, grid: TimeGrid) -> np.ndarray:
    """Apply a path functional row-wise to a ``(J, n_nodes)`` value matrix.

    Every output column ``n`` depends only on input columns ``0..n``. The
    time integral uses the cumulative trapezoid rule; the time average is
    the integral divided by ``t`` with the value at ``t=0`` set to the
    path's starting value (its continuous limit).
    """
    kind = FunctionalKind(kind)
    if kind is FunctionalKind.IDENTITY:
        return values.copy()
    if kind is FunctionalKind.RUNNING_MAX:
        return np.maximum.accumulate(values, axis=1)
    if kind is FunctionalKind.RUNNING_MIN:
        return np.minimum.accumulate(values, axis=1)
    if kind is FunctionalKind.RANGE:
        return np.maximum.accumulate(values, axis=1) - np.minimum.accumulate(values, axis=1)
    integral = np.empty_like(values)
    integral[:, 0] = 0.0
    np.cumsum((values[:, :-1] + values[:, 1:]) * (0.5 * grid.dt), axis=1, out=integral[:, 1:])
    if kind is FunctionalKind.TIME_INTEGRAL:
        return integral
    out = np.empty_like(values)
    out[:, 0] = values[:, 0]
    out[:, 1:] = integral[:, 1:] / grid.nodes[1:]
    return out


def apply_functional(kind: FunctionalKind, ensemble: PathEnsemble) -> PathEnsemble:
    """Transform every path of an ensemble, ``y_t = f(x restricted to [0, t])``."""
    if ensemble.n_paths < 1:
        raise ValueError("ensemble is empty")
    kind = FunctionalKind(kind)
    values = transform_values(kind, ensemble.values, ensemble.grid)
    label = ensemble.label if kind is FunctionalKind.IDENTITY else f"{kind.value}({ensemble.label})"
    return PathEnsemble(grid=ensemble.grid, values=values, seed=ensemble.seed, label=label)


def center_ensemble(ensemble: PathEnsemble) -> tuple[PathEnsemble, DiscretePath]:
    """Subtract the cross-sectional mean curve; return (centered, mean function)."""
    if ensemble.n_paths < 2:
        raise ValueError("centering needs at least 2 paths")
    mean = ensemble.values.mean(axis=0)
    centered = PathEnsemble(
        grid=ensemble.grid,
        values=ensemble.values - mean,
        seed=ensemble.seed,
        label=f"centered({ensemble.label})",
    )
    return centered, DiscretePath(ensemble.grid, mean)


def write_ensemble_csv(ensemble: PathEnsemble, path: str) -> None:
    """Write one row per path; the header row holds the grid nodes."""
    with open(path, "w") as fh:
        fh.write(",".join(f"{t:.17g}" for t in ensemble.grid.nodes) + "\n")
        for row in ensemble.values:
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")
