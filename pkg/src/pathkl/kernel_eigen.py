"""Covariance kernels and the discretized Fredholm eigenproblem.

Analytic kernels are available for Brownian motion, the Brownian bridge and
three Brownian path functionals (time integral, time average, running
maximum, the last one centered with its mean curve kept separate). Any
centered path ensemble yields a sample covariance kernel. Eigenpairs come
from the trapezoid-weighted eigenproblem

    sum_n'' kappa(t_n, t_m) F_k(t_n) dt = lambda_k F_k(t_m),

symmetrized with the square roots of the quadrature weights so the solve is
an ordinary symmetric eigendecomposition with a real spectrum.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .bases import Basis, BasisFamily
from .errors import NotPositiveSemidefiniteError
from .grid_paths import DiscretePath, PathEnsemble, TimeGrid

#: negative eigenvalues larger than this fraction of the top eigenvalue are
#: a genuine failure, not rounding noise
_NEGATIVE_EIGENVALUE_LIMIT = 1e-6


class KernelTag(str, Enum):
    BROWNIAN = "brownian"
    BROWNIAN_BRIDGE = "brownian_bridge"
    TIME_INTEGRAL = "time_integral"
    TIME_AVERAGE = "time_average"
    RUNNING_MAX = "running_max"
    EMPIRICAL = "empirical"


@dataclass(frozen=True, eq=False)
class KernelSpec:
    """Which covariance to tabulate.

    Analytic tags evaluate closed forms on ``[0, horizon]^2`` (the Brownian
    scaling of the unit-horizon formulas). The empirical tag requires an
    attached ensemble with at least two paths.
    """

    tag: KernelTag
    ensemble: PathEnsemble | None = None
    horizon: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "tag", KernelTag(self.tag))
        if self.tag is KernelTag.EMPIRICAL:
            if self.ensemble is None or self.ensemble.n_paths < 2:
                raise ValueError("empirical kernel needs an ensemble with >= 2 paths")
        elif self.horizon <= 0:
            raise ValueError("horizon must be positive")


@dataclass(frozen=True, eq=False)
class KernelMatrix:
    """Symmetric covariance evaluations on the grid, plus the mean curve.

    The mean is zero for the (centered) analytic kernels and the sample mean
    for empirical kernels.
    """

    grid: TimeGrid
    entries: np.ndarray
    mean_function: DiscretePath

    def __post_init__(self):
        entries = np.asarray(self.entries, dtype=float)
        n = self.grid.n_nodes
        if entries.shape != (n, n):
            raise ValueError(f"kernel matrix must be {n}x{n}")
        scale = np.abs(entries).max()
        if scale > 0 and np.abs(entries - entries.T).max() > 1e-12 * scale:
            raise ValueError("kernel matrix is not symmetric")
        object.__setattr__(self, "entries", entries)


@dataclass(frozen=True, eq=False)
class EigenPairs:
    """Leading eigenvalues with quadrature-orthonormal eigenfunctions."""

    grid: TimeGrid
    eigenvalues: np.ndarray
    basis: Basis

    @property
    def size(self) -> int:
        return len(self.eigenvalues)


def analytic_kernel(spec: KernelSpec, s, t):
    """Evaluate the analytic covariance at ``(s, t)``; symmetric by construction.

    Accepts scalars or broadcastable arrays. The time-average and
    running-max kernels take their continuous-limit value 0 on the axes.
    """
    if spec.tag is KernelTag.EMPIRICAL:
        raise ValueError("empirical kernels have no closed form; use build_kernel_matrix")
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    T = spec.horizon
    if np.any(s < 0) or np.any(t < 0) or np.any(s > T) or np.any(t > T):
        raise ValueError(f"times must lie in [0, {T}]")
    lo = np.minimum(s, t)
    hi = np.maximum(s, t)
    if spec.tag is KernelTag.BROWNIAN:
        out = lo
    elif spec.tag is KernelTag.BROWNIAN_BRIDGE:
        out = lo - lo * hi / T
    elif spec.tag is KernelTag.TIME_INTEGRAL:
        out = 0.5 * lo * lo * hi - lo**3 / 6.0
    elif spec.tag is KernelTag.TIME_AVERAGE:
        safe_hi = np.where(hi > 0, hi, 1.0)
        out = np.where(hi > 0, 0.5 * lo - lo * lo / (6.0 * safe_hi), 0.0)
    else:  # running max
        safe_hi = np.where(hi > 0, hi, 1.0)
        root = np.sqrt(np.maximum(lo * (hi - lo), 0.0))
        angle = np.arcsin(np.clip(np.sqrt(np.where(hi > 0, lo / safe_hi, 0.0)), 0.0, 1.0))
        out = np.where(
            lo > 0,
            0.5 * lo + (root - 2.0 * np.sqrt(lo * hi) + hi * angle) / np.pi,
            0.0,
        )
    if out.ndim == 0:
        return float(out)
    return out


def analytic_mean_function(tag: KernelTag, grid: TimeGrid) -> DiscretePath:
    """Mean curve of the process whose centered covariance ``tag`` describes.

    Zero for all tags except the running maximum, whose Brownian mean is
    ``sqrt(2 t / pi)``.
    """
    tag = KernelTag(tag)
    if tag is KernelTag.EMPIRICAL:
        raise ValueError("empirical kernels carry their own sample mean")
    if tag is KernelTag.RUNNING_MAX:
        return DiscretePath(grid, np.sqrt(2.0 * grid.nodes / np.pi))
    return DiscretePath(grid, np.zeros(grid.n_nodes))


def build_kernel_matrix(spec: KernelSpec, grid: TimeGrid) -> KernelMatrix:
    """Tabulate the kernel on the grid.

    The empirical branch uses the ``1/J``-normalized sample covariance of the
    attached ensemble and stores its sample mean as the mean function.
    """
    if spec.tag is KernelTag.EMPIRICAL:
        ensemble = spec.ensemble
        if not ensemble.grid.matches(grid):
            raise ValueError("ensemble grid does not match the requested grid")
        mean = ensemble.values.mean(axis=0)
        centered = ensemble.values - mean
        entries = centered.T @ centered / ensemble.n_paths
        entries = 0.5 * (entries + entries.T)
        return KernelMatrix(grid=grid, entries=entries, mean_function=DiscretePath(grid, mean))
    if abs(spec.horizon - grid.horizon) > 1e-12 * max(grid.horizon, 1.0):
        spec = KernelSpec(tag=spec.tag, horizon=grid.horizon)
    entries = analytic_kernel(spec, grid.nodes[:, None], grid.nodes[None, :])
    entries = 0.5 * (entries + entries.T)
    return KernelMatrix(
        grid=grid, entries=entries, mean_function=DiscretePath(grid, np.zeros(grid.n_nodes))
    )


def solve_eigen(kernel: KernelMatrix, size: int) -> EigenPairs:
    """Solve the trapezoid-weighted eigenproblem and retain ``size`` pairs.

    With ``W`` the diagonal of quadrature weights, the symmetric matrix
    ``W^{1/2} kappa W^{1/2}`` is decomposed and eigenvectors are mapped back
    through ``W^{-1/2}``, which makes them quadrature orthonormal. Signs are
    fixed so each eigenfunction has positive trapezoid integral, falling
    back to a positive first nonzero sample when that integral vanishes.
    Eigenvalues that dip below zero by more than rounding noise raise
    :class:`NotPositiveSemidefiniteError`.
    """
    grid = kernel.grid
    if size < 1 or size > grid.n_nodes:
        raise ValueError(f"size must be in [1, {grid.n_nodes}], got {size}")
    w = grid.trapezoid_weights()
    sw = np.sqrt(w)
    symmetric = sw[:, None] * kernel.entries * sw[None, :]
    symmetric = 0.5 * (symmetric + symmetric.T)
    eigenvalues, vectors = np.linalg.eigh(symmetric)
    eigenvalues = eigenvalues[::-1]
    vectors = vectors[:, ::-1]
    top = max(float(eigenvalues[0]), 0.0)
    if top > 0 and eigenvalues[-1] < -_NEGATIVE_EIGENVALUE_LIMIT * top:
        raise NotPositiveSemidefiniteError(
            f"smallest eigenvalue {eigenvalues[-1]:.3e} is significantly negative "
            f"(top eigenvalue {top:.3e}); for sample kernels, raise the path count"
        )
    eigenvalues = np.maximum(eigenvalues, 0.0)[:size]
    functions = vectors[:, :size].T / sw
    integrals = functions @ w
    for i in range(size):
        if abs(integrals[i]) > 1e-10:
            sign = np.sign(integrals[i])
        else:
            row = functions[i]
            nonzero = np.nonzero(np.abs(row) > 1e-12 * max(np.abs(row).max(), 1.0))[0]
            sign = np.sign(row[nonzero[0]]) if len(nonzero) else 1.0
        functions[i] *= sign
    basis = Basis(
        grid=grid,
        family=BasisFamily.EMPIRICAL_KL,
        functions=functions,
        eigenvalues=eigenvalues,
        ordering="k = 1..size, decreasing eigenvalue",
    )
    return EigenPairs(grid=grid, eigenvalues=eigenvalues, basis=basis)


def mercer_residual(kernel: KernelMatrix, pairs: EigenPairs) -> float:
    """Max-abs gap between the kernel and its rank-``size`` eigenexpansion."""
    if not pairs.grid.matches(kernel.grid):
        raise ValueError("eigenpairs were computed on a different grid")
    functions = pairs.basis.functions
    approx = (functions.T * pairs.eigenvalues) @ functions
    return float(np.abs(kernel.entries - approx).max())


def write_eigen_csv(pairs: EigenPairs, path: str) -> None:
    """One row per eigenpair: eigenvalue first, then the sampled eigenfunction."""
    with open(path, "w") as fh:
        for lam, row in zip(pairs.eigenvalues, pairs.basis.functions):
            fh.write(f"{lam:.17g}," + ",".join(f"{v:.17g}" for v in row) + "\n")
