"""Orthonormal basis families on ``[0, T]``, projection and reconstruction.

Four analytic families are provided next to the data-driven eigenbasis
produced by :mod:`pathkl.kernel_eigen`:

* ``bm_kl``: sine eigenbasis of the Brownian covariance, with eigenvalues.
* ``bb_kl_cosine``: sine eigenbasis of the Brownian bridge, with eigenvalues.
* ``cm_cosine``: antiderivatives of the Fourier cosine basis. Orthonormal in
  the Cameron-Martin inner product (derivatives in L2), not in L2 itself.
* ``haar_schauder``: the terminal slope function plus Schauder triangles
  (running integrals of the Haar wavelets), also Cameron-Martin orthonormal.
* ``shifted_legendre``: normalized Legendre polynomials mapped to ``[0, T]``,
  evaluated from exact integer coefficients.

L2 inner products use the trapezoid rule throughout (node weights ``dt``,
halved at the endpoints). Cameron-Martin projections integrate the stored
per-interval derivative against path increments, which is the exact
Stieltjes sum for piecewise-constant derivatives.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction

import numpy as np

from .errors import DegenerateInputError, UnsupportedOrderError
from .grid_paths import DiscretePath, PathEnsemble, TimeGrid

MAX_LEGENDRE_ORDER = 40


class BasisFamily(str, Enum):
    BM_KL = "bm_kl"
    BB_KL_COSINE = "bb_kl_cosine"
    CM_COSINE = "cm_cosine"
    HAAR_SCHAUDER = "haar_schauder"
    SHIFTED_LEGENDRE = "shifted_legendre"
    EMPIRICAL_KL = "empirical_kl"


#: families whose rows are orthonormal in the Cameron-Martin inner product
#: (derivative pairing) rather than in L2
CAMERON_MARTIN_FAMILIES = frozenset({BasisFamily.CM_COSINE, BasisFamily.HAAR_SCHAUDER})


@dataclass(frozen=True, eq=False)
class Basis:
    """``size`` ordered functions sampled on a grid, one per row.

    ``eigenvalues`` is present for KL-type families and sorted nonincreasing.
    ``deriv_midpoints`` holds per-interval derivative values for
    Cameron-Martin families and is ``None`` otherwise.
    """

    grid: TimeGrid
    family: BasisFamily
    functions: np.ndarray
    ordering: str
    eigenvalues: np.ndarray | None = None
    deriv_midpoints: np.ndarray | None = None

    def __post_init__(self):
        functions = np.asarray(self.functions, dtype=float)
        if functions.ndim != 2 or functions.shape[1] != self.grid.n_nodes:
            raise ValueError(f"basis rows must have {self.grid.n_nodes} samples")
        object.__setattr__(self, "functions", functions)
        if self.eigenvalues is not None:
            ev = np.asarray(self.eigenvalues, dtype=float)
            if ev.shape != (functions.shape[0],):
                raise ValueError("need one eigenvalue per basis function")
            if np.any(ev < 0) or np.any(np.diff(ev) > 0):
                raise ValueError("eigenvalues must be nonnegative and nonincreasing")
            object.__setattr__(self, "eigenvalues", ev)

    @property
    def size(self) -> int:
        return self.functions.shape[0]

    @property
    def is_cameron_martin(self) -> bool:
        return self.family in CAMERON_MARTIN_FAMILIES


@dataclass(frozen=True, eq=False)
class Coefficients:
    """Projection coefficients of one path onto a basis."""

    values: np.ndarray
    basis: Basis

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.basis.size,):
            raise ValueError(f"need {self.basis.size} coefficients, got {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("coefficients must be finite")
        object.__setattr__(self, "values", values)


def bm_kl_basis(grid: TimeGrid, size: int) -> Basis:
    """Karhunen-Loeve basis of Brownian motion on ``[0, T]``.

    Row ``k`` (1-based) samples ``sqrt(2/T) sin((k - 1/2) pi t / T)``; the
    attached eigenvalue is ``T^2 / (pi^2 (k - 1/2)^2)``.
    """
    if size < 1:
        raise ValueError("size must be >= 1")
    T = grid.horizon
    k = np.arange(1, size + 1)
    ratio = np.arange(grid.n_nodes) / grid.n_steps
    functions = np.sqrt(2.0 / T) * np.sin(np.outer((k - 0.5) * np.pi, ratio))
    eigenvalues = T * T / (np.pi * np.pi * (k - 0.5) ** 2)
    return Basis(
        grid=grid,
        family=BasisFamily.BM_KL,
        functions=functions,
        eigenvalues=eigenvalues,
        ordering="k = 1..size, decreasing eigenvalue",
    )


def bb_cosine_bases(grid: TimeGrid, size: int) -> tuple[Basis, Basis]:
    """Sine antiderivatives of the cosine basis, twice.

    Returns ``(cameron_martin, bb_kl)``. The first family has rows
    ``sqrt(2T) sin(pi k t / T) / (pi k)`` whose derivatives form the cosine
    orthonormal basis of L2; it carries no eigenvalues. The second rescales
    the same shapes to unit L2 norm, which is the Karhunen-Loeve basis of
    the Brownian bridge with eigenvalues ``T^2 / (pi^2 k^2)``.
    """
    if size < 1:
        raise ValueError("size must be >= 1")
    T = grid.horizon
    k = np.arange(1, size + 1)
    ratio = np.arange(grid.n_nodes) / grid.n_steps
    sines = np.sin(np.outer(k * np.pi, ratio))
    mid = (np.arange(grid.n_steps) + 0.5) / grid.n_steps
    deriv = np.sqrt(2.0 / T) * np.cos(np.outer(k * np.pi, mid))
    cameron_martin = Basis(
        grid=grid,
        family=BasisFamily.CM_COSINE,
        functions=np.sqrt(2.0 * T) / (np.pi * k[:, None]) * sines,
        deriv_midpoints=deriv,
        ordering="k = 1..size, increasing frequency",
    )
    bb_kl = Basis(
        grid=grid,
        family=BasisFamily.BB_KL_COSINE,
        functions=np.sqrt(2.0 / T) * sines,
        eigenvalues=T * T / (np.pi * np.pi * k.astype(float) ** 2),
        ordering="k = 1..size, decreasing eigenvalue",
    )
    return cameron_martin, bb_kl


def haar_schauder_basis(grid: TimeGrid, levels: int) -> Basis:
    """Schauder triangle basis: ``2**levels`` functions, level ordered.

    Row 0 is the terminal slope function ``t / sqrt(T)`` (integral of the
    constant scaling function). Then, for each dyadic level
    ``k = 0..levels-1`` and shift ``l = 0..2^k - 1``, the running integral
    of the Haar wavelet ``2^{k/2} psi(2^k t/T - l) / sqrt(T)``: a triangle
    supported on ``[l T / 2^k, (l+1) T / 2^k]``. The grid step must divide
    the finest wavelet breakpoints, so ``n_steps`` must be a multiple of
    ``2**(levels + 1)``; anything else silently biases the quadrature and
    is rejected.
    """
    if levels < 0:
        raise ValueError("levels must be >= 0")
    block = 1 << (levels + 1)
    if grid.n_steps % block != 0:
        raise ValueError(
            f"n_steps={grid.n_steps} must be divisible by 2**(levels+1)={block} "
            "so wavelet breakpoints sit on grid nodes"
        )
    T = grid.horizon
    n = grid.n_steps
    size = 1 << levels
    deriv = np.zeros((size, n))
    deriv[0] = 1.0 / np.sqrt(T)
    row = 1
    for k in range(levels):
        span = n // (1 << k)          # grid intervals per wavelet support
        half = span // 2
        height = (2.0**(0.5 * k)) / np.sqrt(T)
        for shift in range(1 << k):
            start = shift * span
            deriv[row, start : start + half] = height
            deriv[row, start + half : start + span] = -height
            row += 1
    functions = np.zeros((size, grid.n_nodes))
    np.cumsum(deriv * grid.dt, axis=1, out=functions[:, 1:])
    return Basis(
        grid=grid,
        family=BasisFamily.HAAR_SCHAUDER,
        functions=functions,
        deriv_midpoints=deriv,
        ordering="terminal slope, then dyadic levels coarse to fine, left to right",
    )


def shifted_legendre_coefficients(order: int) -> list[int]:
    """Exact monomial coefficients of the degree-``order`` shifted Legendre polynomial.

    ``q_k(t) = sum_j a_{k,j} t^j`` with
    ``a_{k,j} = (-1)^{k+j} C(k, j) C(k+j, j)``, all integers.
    """
    return [
        (-1) ** (order + j) * math.comb(order, j) * math.comb(order + j, j)
        for j in range(order + 1)
    ]


def _ratio_to_float(num: int, den: int) -> float:
    try:
        return num / den
    except OverflowError:
        return float(Fraction(num, den))


def _evaluate_legendre_rows(max_order: int, n_steps: int) -> np.ndarray:
    """Sample ``q_0..q_max_order`` at the rational nodes ``n / n_steps``.

    Monomial evaluation of high-order Legendre polynomials in floating point
    loses all accuracy to cancellation, so the Horner sum runs over exact
    integers: ``q_k(n/N) = (sum_j a_j n^j N^(k-j)) / N^k``, rounded once.
    """
    rows = np.empty((max_order + 1, n_steps + 1))
    for k in range(max_order + 1):
        coeffs = shifted_legendre_coefficients(k)
        # scale a_j by N^(k-j) so Horner in the integer node index is exact
        scaled = [a * n_steps ** (k - j) for j, a in enumerate(coeffs)]
        den = n_steps**k
        for n in range(n_steps + 1):
            acc = scaled[k]
            for j in range(k - 1, -1, -1):
                acc = acc * n + scaled[j]
            rows[k, n] = _ratio_to_float(acc, den)
    return rows


def shifted_legendre_basis(grid: TimeGrid, size: int) -> Basis:
    """Normalized shifted Legendre polynomials, degrees ``0..size-1``.

    Row ``k`` samples ``sqrt((2k+1)/T) q_k(t/T)``; unit L2 norm on ``[0, T]``.
    """
    if size < 1:
        raise ValueError("size must be >= 1")
    if size - 1 > MAX_LEGENDRE_ORDER:
        raise UnsupportedOrderError(
            f"maximum polynomial degree is {MAX_LEGENDRE_ORDER}, requested {size - 1}"
        )
    rows = _evaluate_legendre_rows(size - 1, grid.n_steps)
    scale = np.sqrt((2.0 * np.arange(size) + 1.0) / grid.horizon)
    return Basis(
        grid=grid,
        family=BasisFamily.SHIFTED_LEGENDRE,
        functions=scale[:, None] * rows,
        ordering="polynomial degree k = 0..size-1",
    )


def coefficient_matrix(values: np.ndarray, basis: Basis) -> np.ndarray:
    """Project each row of a ``(J, n_nodes)`` matrix; returns ``(J, size)``.

    L2 families use the trapezoid inner product; Cameron-Martin families
    pair the stored derivative with path increments.
    """
    if basis.is_cameron_martin:
        increments = np.diff(values, axis=1)
        return increments @ basis.deriv_midpoints.T
    w = basis.grid.trapezoid_weights()
    return (values * w) @ basis.functions.T


def project(path: DiscretePath, basis: Basis) -> Coefficients:
    """Coefficients of one path in the basis inner product."""
    if not path.grid.matches(basis.grid):
        raise ValueError("path and basis live on different grids")
    coeffs = coefficient_matrix(path.values[None, :], basis)[0]
    return Coefficients(values=coeffs, basis=basis)


def reconstruct(coeffs: Coefficients, upto: int | None = None) -> DiscretePath:
    """Partial sum of the first ``upto`` basis terms (all terms by default)."""
    upto = coeffs.basis.size if upto is None else upto
    if upto < 0 or upto > coeffs.basis.size:
        raise ValueError(f"upto must be in [0, {coeffs.basis.size}], got {upto}")
    values = coeffs.values[:upto] @ coeffs.basis.functions[:upto]
    if upto == 0:
        values = np.zeros(coeffs.basis.grid.n_nodes)
    return DiscretePath(coeffs.basis.grid, values)


def _check_same_grid(ensemble: PathEnsemble, basis: Basis) -> None:
    if not ensemble.grid.matches(basis.grid):
        raise ValueError("ensemble and basis live on different grids")


def l2_error_ensemble(ensemble: PathEnsemble, basis: Basis, upto: int) -> float:
    """Monte Carlo estimate of the squared L2(Q x dt) truncation error.

    Mean over paths of the trapezoid time integral of the squared residual
    after projecting onto the first ``upto`` basis functions.
    """
    _check_same_grid(ensemble, basis)
    if upto < 0 or upto > basis.size:
        raise ValueError(f"upto must be in [0, {basis.size}]")
    coeffs = coefficient_matrix(ensemble.values, basis)
    residual = ensemble.values - coeffs[:, :upto] @ basis.functions[:upto]
    w = ensemble.grid.trapezoid_weights()
    return float(((residual * residual) @ w).mean())


def variance_explained(ensemble: PathEnsemble, basis: Basis, upto: int) -> float:
    """Ratio of projected-path to full-path total variance, in ``[0, 1]``."""
    _check_same_grid(ensemble, basis)
    if upto < 0 or upto > basis.size:
        raise ValueError(f"upto must be in [0, {basis.size}]")
    w = ensemble.grid.trapezoid_weights()
    total = float(((ensemble.values * ensemble.values) @ w).mean())
    if total == 0.0:
        raise DegenerateInputError("ensemble has zero total variance")
    coeffs = coefficient_matrix(ensemble.values, basis)
    projected = coeffs[:, :upto] @ basis.functions[:upto]
    return float(((projected * projected) @ w).mean()) / total


def gram_matrix(basis: Basis) -> np.ndarray:
    """Discrete Gram matrix in the basis's own inner product.

    Identity within quadrature error for every family: trapezoid products
    of the rows for L2 families, interval sums of the derivatives for
    Cameron-Martin families.
    """
    if basis.is_cameron_martin:
        return (basis.deriv_midpoints * basis.grid.dt) @ basis.deriv_midpoints.T
    w = basis.grid.trapezoid_weights()
    return (basis.functions * w) @ basis.functions.T


def write_basis_csv(basis: Basis, path: str) -> None:
    """First row: grid nodes. Then one row per basis function."""
    with open(path, "w") as fh:
        fh.write(",".join(f"{t:.17g}" for t in basis.grid.nodes) + "\n")
        for row in basis.functions:
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")
