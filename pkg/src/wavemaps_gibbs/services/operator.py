"""The linearised operator ``A = -d^2/dr^2 + k(k+1) cos(2 Q_{n,k}) / r^2`` on ``[1, R]``.

The operator acts on interior nodes with Dirichlet rows eliminated, so its
matrix is symmetric tridiagonal. Green's functions are normalised so that
``sum_j G(r_i, r_j) h f(r_j)`` approximates ``(A^{-1} f)(r_i)``; eigenvectors are
orthonormal for the ``h``-weighted inner product.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Any, Iterable, Literal, Optional

import numpy as np
from scipy.integrate import trapezoid
from scipy.linalg import LinAlgError, eigh_tridiagonal, eigvalsh_tridiagonal, solveh_banded

from wavemaps_gibbs.core.grid import Field, ModelParams, RadialGrid
from wavemaps_gibbs.services.soliton import SolitonProfile, load_soliton

logger = logging.getLogger(__name__)

COERCIVITY_FLOOR = 1e-3
EigenBackend = Literal["lapack", "tqli"]


class EigensolverError(RuntimeError):
    """The tridiagonal eigensolver exhausted its iteration budget."""


class NotPositiveDefiniteError(RuntimeError):
    """Green's functions were requested for an operator with a non-positive eigenvalue."""

    def __init__(self, smallest: float) -> None:
        super().__init__(f"operator is not positive definite: smallest eigenvalue {smallest:.6e}")
        self.smallest = smallest


class NoAdmissibleRadiusError(RuntimeError):
    """No radius up to ``Rmax`` passes the coercivity floor."""


@dataclass(frozen=True, eq=False)
class DiscreteOperator:
    params: ModelParams
    grid: RadialGrid
    potential: Field
    diagonal: np.ndarray
    off_diagonal: np.ndarray

    @property
    def dimension(self) -> int:
        return self.grid.M - 1

    def matrix(self) -> np.ndarray:
        """Dense interior matrix (mainly for tests and small grids)."""

        return np.diag(self.diagonal) + np.diag(self.off_diagonal, 1) + np.diag(self.off_diagonal, -1)

    def apply(self, values: np.ndarray) -> np.ndarray:
        """Apply ``A`` to node values (last axis) with zero Dirichlet data; boundary entries are 0."""

        values = np.asarray(values, dtype=float)
        h2 = self.grid.h**2
        out = np.zeros_like(values)
        out[..., 1:-1] = (
            (2.0 * values[..., 1:-1] - values[..., :-2] - values[..., 2:]) / h2
            + self.potential.values[1:-1] * values[..., 1:-1]
        )
        return out

    def quadratic_form(self, values: np.ndarray) -> np.ndarray:
        """``<zeta, A zeta> = int (d_r zeta)^2 + q zeta^2`` in its summation-by-parts form."""

        values = np.asarray(values, dtype=float)
        h = self.grid.h
        gradient = np.diff(values, axis=-1) / h
        return h * np.sum(gradient**2, axis=-1) + h * np.sum(self.potential.values * values**2, axis=-1)

    def smallest_eigenvalue(self) -> float:
        return float(eigvalsh_tridiagonal(self.diagonal, self.off_diagonal, select="i", select_range=(0, 0))[0])


@dataclass(frozen=True, eq=False)
class SpectralBasis:
    """Eigenvalues ``lambda_m^2`` ascending; eigenvector columns on all nodes (zero boundary rows)."""

    grid: RadialGrid
    eigenvalues: np.ndarray
    vectors: np.ndarray
    params: Optional[ModelParams] = None

    @property
    def lambdas(self) -> np.ndarray:
        return np.sqrt(self.eigenvalues)

    @property
    def size(self) -> int:
        return int(self.eigenvalues.shape[0])

    def mode(self, index: int) -> Field:
        return Field(self.grid, self.vectors[:, index])

    def reconstruct(self) -> np.ndarray:
        """``h E diag(lambda^2) E^T`` on interior nodes; reproduces the operator matrix."""

        inner = self.vectors[1:-1]
        return self.grid.h * (inner * self.eigenvalues) @ inner.T

    def gram(self) -> np.ndarray:
        inner = self.vectors[1:-1]
        return self.grid.h * inner.T @ inner

    @classmethod
    def canonical(cls, grid: RadialGrid) -> "SpectralBasis":
        """Unit eigenvalues with node indicator eigenvectors; its Gaussian has covariance ``I / h``."""

        vectors = np.zeros((grid.size, grid.M - 1))
        vectors[1:-1] = np.eye(grid.M - 1) / math.sqrt(grid.h)
        return cls(grid=grid, eigenvalues=np.ones(grid.M - 1), vectors=vectors)

    @classmethod
    def dirichlet(cls, grid: RadialGrid) -> "SpectralBasis":
        """Exact eigenpairs of the discrete ``-d^2/dr^2``: sampled sines ``sqrt(2/(R-1)) sin(pi m (r-1)/(R-1))``."""

        width = grid.R - 1.0
        m = np.arange(1, grid.M)
        eigenvalues = 4.0 / grid.h**2 * np.sin(np.pi * m * grid.h / (2.0 * width)) ** 2
        vectors = math.sqrt(2.0 / width) * np.sin(np.pi * np.outer(grid.nodes - 1.0, m) / width)
        vectors[[0, -1]] = 0.0
        return cls(grid=grid, eigenvalues=eigenvalues, vectors=vectors, params=ModelParams(n=0, k=0, R=grid.R, M=grid.M))


@dataclass(frozen=True, eq=False)
class GreensMatrix:
    grid: RadialGrid
    values: np.ndarray
    params: Optional[ModelParams] = None

    @property
    def interior(self) -> np.ndarray:
        return self.values[1:-1, 1:-1]

    def diagonal(self) -> np.ndarray:
        return np.diag(self.values).copy()


def potential_values(params: ModelParams, profile: SolitonProfile, grid: RadialGrid) -> np.ndarray:
    """``k(k+1) cos(2Q) / r^2`` at the grid nodes."""

    Q = profile.on_grid(grid).values
    return params.coupling * np.cos(2.0 * Q) / grid.nodes**2


def assemble(params: ModelParams, profile: SolitonProfile) -> DiscreteOperator:
    """Second-order finite-difference operator with the soliton potential."""

    if (profile.n, profile.k) != (params.n, params.k):
        raise ValueError(
            f"profile is for (n, k)=({profile.n}, {profile.k}), operator wants ({params.n}, {params.k})"
        )
    grid = params.grid()
    if grid.R > profile.R_far * (1.0 + 1e-12):
        raise ValueError(f"profile stops at R_far={profile.R_far} short of R={grid.R}")
    q = potential_values(params, profile, grid)
    h2 = grid.h**2
    diagonal = 2.0 / h2 + q[1:-1]
    off_diagonal = np.full(grid.M - 2, -1.0 / h2)
    return DiscreteOperator(params=params, grid=grid, potential=Field(grid, q), diagonal=diagonal, off_diagonal=off_diagonal)


def tqli(
    diagonal: np.ndarray,
    off_diagonal: np.ndarray,
    max_iter: int = 60,
    tol: float = float(np.finfo(float).eps),
) -> tuple[np.ndarray, np.ndarray]:
    """Implicit-shift QL on a symmetric tridiagonal matrix.

    Returns ascending eigenvalues and Euclidean-orthonormal eigenvector columns.
    An off-diagonal entry is deflated once it falls below ``tol`` times the sum
    of its neighbouring diagonal magnitudes.
    """

    d = np.array(diagonal, dtype=float)
    size = d.shape[0]
    e = np.zeros(size)
    e[: size - 1] = off_diagonal
    Z = np.eye(size)

    for l in range(size):
        iterations = 0
        while True:
            m = l
            while m < size - 1:
                dd = abs(d[m]) + abs(d[m + 1])
                if abs(e[m]) <= tol * dd:
                    break
                m += 1
            if m == l:
                break
            if iterations == max_iter:
                raise EigensolverError(f"no convergence for eigenvalue {l} after {max_iter} QL sweeps")
            iterations += 1
            g = (d[l + 1] - d[l]) / (2.0 * e[l])
            r = math.hypot(g, 1.0)
            g = d[m] - d[l] + e[l] / (g + math.copysign(r, g))
            s = c = 1.0
            p = 0.0
            underflow = False
            for i in range(m - 1, l - 1, -1):
                f = s * e[i]
                b = c * e[i]
                r = math.hypot(f, g)
                e[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= p
                    e[m] = 0.0
                    underflow = True
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * b
                p = s * r
                d[i + 1] = g + p
                g = c * r - b
                column = Z[:, i + 1].copy()
                Z[:, i + 1] = s * Z[:, i] + c * column
                Z[:, i] = c * Z[:, i] - s * column
            if underflow:
                continue
            d[l] -= p
            e[l] = g
            e[m] = 0.0

    order = np.argsort(d)
    return d[order], Z[:, order]


def eigendecompose(op: DiscreteOperator, backend: EigenBackend = "lapack") -> SpectralBasis:
    """Full eigendecomposition; eigenvectors are rescaled to ``h``-orthonormality."""

    if backend == "lapack":
        try:
            eigenvalues, inner = eigh_tridiagonal(op.diagonal, op.off_diagonal)
        except LinAlgError as exc:
            raise EigensolverError(str(exc)) from exc
    elif backend == "tqli":
        eigenvalues, inner = tqli(op.diagonal, op.off_diagonal)
    else:
        raise ValueError(f"unknown eigensolver backend {backend!r}")

    vectors = np.zeros((op.grid.size, eigenvalues.shape[0]))
    vectors[1:-1] = inner / math.sqrt(op.grid.h)
    # fix the sign so each mode starts positive next to r = 1
    signs = np.sign(vectors[1])
    signs[signs == 0.0] = 1.0
    vectors *= signs
    logger.debug("eigendecomposed %d modes, lambda_1^2=%.6e", eigenvalues.shape[0], eigenvalues[0])
    return SpectralBasis(grid=op.grid, eigenvalues=eigenvalues, vectors=vectors, params=op.params)


def gamma_exponent(k: int) -> float:
    return math.sqrt(0.25 + k * (k + 1)) - 0.5


def greens_explicit(k: int, R: float, r: Any, rho: Any) -> Any:
    """Closed-form Green's function of the degree-zero operator (broadcasts over arrays)."""

    r = np.asarray(r, dtype=float)
    rho = np.asarray(rho, dtype=float)
    lo = np.minimum(r, rho)
    hi = np.maximum(r, rho)
    gamma = gamma_exponent(k)
    power = 1.0 + 2.0 * gamma
    value = (
        (R**power - hi**power)
        / (R**power - 1.0)
        * (hi ** (-gamma) * lo ** (1.0 + gamma) - hi ** (-gamma) * lo ** (-gamma))
        / power
    )
    return float(value) if value.ndim == 0 else value


def greens_explicit_matrix(k: int, grid: RadialGrid) -> GreensMatrix:
    nodes = grid.nodes
    values = greens_explicit(k, grid.R, nodes[:, None], nodes[None, :])
    values[0, :] = values[-1, :] = 0.0
    values[:, 0] = values[:, -1] = 0.0
    return GreensMatrix(grid=grid, values=values, params=ModelParams(n=0, k=k, R=grid.R, M=grid.M))


def greens_numeric(op: DiscreteOperator) -> GreensMatrix:
    """Solve ``A g_j = e_j / h`` for every interior node via a banded Cholesky factorisation."""

    smallest = op.smallest_eigenvalue()
    if smallest <= 0.0:
        raise NotPositiveDefiniteError(smallest)
    size = op.dimension
    banded = np.zeros((2, size))
    banded[0, 1:] = op.off_diagonal
    banded[1, :] = op.diagonal
    inverse = solveh_banded(banded, np.eye(size) / op.grid.h)
    values = np.zeros((op.grid.size, op.grid.size))
    values[1:-1, 1:-1] = inverse
    return GreensMatrix(grid=op.grid, values=values, params=op.params)


def resolvent_check(
    op0: DiscreteOperator,
    opn: DiscreteOperator,
    G0: GreensMatrix,
    Gn: GreensMatrix,
) -> float:
    """Relative max-norm mismatch of the twice-iterated resolvent identity.

    With ``D = k(k+1) (cos 2Q - 1) / r^2`` the identity reads
    ``G_n = G_0 - G_0 D G_0 + G_0 D G_n D G_0`` with integrals as ``h``-weighted
    sums over nodes. Discrete kernels satisfy it to round-off; with the
    closed-form ``G_0`` the mismatch measures discretisation error.
    """

    if op0.params.k != opn.params.k or not op0.grid.matches(opn.grid):
        raise ValueError("resolvent check needs the same (k, R, M) for both operators")
    if not (G0.grid.matches(op0.grid) and Gn.grid.matches(op0.grid)):
        raise ValueError("Green's matrices must live on the operators' grid")
    h = op0.grid.h
    D = (opn.potential.values - op0.potential.values)[1:-1]
    g0 = G0.interior
    gn = Gn.interior
    g0_d = g0 * D
    expansion = g0 - h * g0_d @ g0 + h**2 * g0_d @ (gn * D) @ g0
    scale = float(np.max(np.abs(gn))) or 1.0
    return float(np.max(np.abs(expansion - gn))) / scale


def green_bounds(G: GreensMatrix) -> dict[str, float]:
    """Symmetry defect, growth and derivative constants, and the fitted diagonal lower constant."""

    grid = G.grid
    values = G.values
    nodes = grid.nodes
    scale = float(np.max(np.abs(values))) or 1.0
    smaller = np.minimum(nodes[:, None], nodes[None, :])
    derivative = np.abs(np.diff(values, axis=0)) / grid.h
    interior = nodes[1:-1]
    envelope = (1.0 - interior / grid.R) * (interior - 1.0)
    return {
        "symmetry_defect": float(np.max(np.abs(values - values.T))) / scale,
        "growth_constant": float(np.max(np.abs(values) / smaller)),
        "derivative_constant": float(np.max(derivative)),
        "diagonal_lower_constant": float(np.min(np.diag(values)[1:-1] / envelope)),
        "diagonal_min": float(np.min(np.diag(values)[1:-1])),
    }


def _laplacian_floor(grid: RadialGrid) -> float:
    return 4.0 / grid.h**2 * math.sin(math.pi * grid.h / (2.0 * (grid.R - 1.0))) ** 2


def coercivity_ratio(params: ModelParams, profile: SolitonProfile) -> float:
    """``lambda_min(A) / lambda_min(-d^2/dr^2)`` on the same grid."""

    op = assemble(params, profile)
    return op.smallest_eigenvalue() / _laplacian_floor(op.grid)


def default_radii(params: ModelParams, Rmax: float, count: int = 12) -> list[float]:
    raw = np.geomspace(1.0 + 2.0 * max(params.h, 0.5), Rmax, num=count)
    snapped = {1.0 + round((radius - 1.0) / params.h) * params.h for radius in raw}
    return sorted(radius for radius in snapped if radius <= Rmax + 1e-9)


def find_R0(
    params: ModelParams,
    Rmax: float,
    profile: SolitonProfile,
    radii: Optional[Iterable[float]] = None,
    floor: float = COERCIVITY_FLOOR,
) -> float:
    """Smallest tested radius from which every larger tested radius is coercive.

    Radii are scanned at the spacing of ``params``; coercivity means
    ``lambda_min(A) >= floor * lambda_min(-d^2/dr^2)``.
    """

    candidates = sorted(radii) if radii is not None else default_radii(params, Rmax)
    if not candidates:
        raise ValueError("no radii to scan")
    ratios = []
    for radius in candidates:
        trial = params.with_radius(radius)
        ratios.append(coercivity_ratio(trial, profile))
    logger.debug("coercivity ratios %s", dict(zip(candidates, ratios)))
    R0: Optional[float] = None
    for radius, ratio in zip(reversed(candidates), reversed(ratios)):
        if ratio < floor:
            break
        R0 = radius
    if R0 is None:
        raise NoAdmissibleRadiusError(f"coercivity floor {floor} fails at every radius up to {Rmax}")
    return float(params.with_radius(R0).R)


def hardy_ratio(grid: RadialGrid, count: int = 100, seed: int = 0) -> float:
    """Largest ``int zeta^2 / r^2 / int (d_r zeta)^2`` over random walks and power laws with ``zeta(1) = 0``."""

    rng = np.random.default_rng(seed)
    nodes = grid.nodes
    steps = rng.normal(size=(count, grid.M))
    walks = np.concatenate([np.zeros((count, 1)), np.cumsum(steps, axis=1)], axis=1)
    powers = np.stack([nodes**a - 1.0 for a in (0.5, 0.6, 0.75, 1.0)])
    candidates = np.concatenate([walks, powers])
    weighted = trapezoid(candidates**2 / nodes**2, nodes, axis=1)
    dirichlet = grid.h * np.sum((np.diff(candidates, axis=1) / grid.h) ** 2, axis=1)
    return float(np.max(weighted / dirichlet))


def _restricted_block(G: GreensMatrix, L: float) -> tuple[np.ndarray, np.ndarray]:
    index = G.grid.index_of(L)
    return G.grid.nodes[: index + 1], G.values[: index + 1, : index + 1]


def kernel_l1_distance(first: GreensMatrix, second: GreensMatrix, L: float) -> float:
    """``int_1^L int_1^L |G - G'|`` by the two-dimensional trapezoid rule."""

    if not math.isclose(first.grid.h, second.grid.h, rel_tol=1e-9):
        raise ValueError("kernels must share a grid spacing")
    nodes, block_a = _restricted_block(first, L)
    _, block_b = _restricted_block(second, L)
    difference = np.abs(block_a - block_b)
    return float(trapezoid(trapezoid(difference, nodes, axis=1), nodes))


def _step_count(length: float, h: float) -> int:
    count = (length - 1.0) / h
    M = int(round(count))
    if not math.isclose(count, M, rel_tol=1e-9, abs_tol=1e-9):
        raise ValueError(f"grid step h={h} does not divide the interval [1, {length}]")
    return M


def greens_distance(
    k: int,
    n: int,
    L: float,
    R: float,
    Rp: float,
    *,
    h: float,
    profile: Optional[SolitonProfile] = None,
) -> float:
    """``L^1`` distance on ``[1, L]^2`` between the Green's functions on ``[1, R]`` and ``[1, Rp]``.

    Both kernels are assembled on the grid of step ``h``, which must divide ``L - 1``,
    ``R - 1`` and ``Rp - 1``. The soliton is loaded for ``max(R, Rp)`` unless given.
    """

    if not (min(R, Rp) >= L >= 1.0):
        raise ValueError(f"need R, Rp >= L >= 1, got L={L}, R={R}, Rp={Rp}")
    if h <= 0.0:
        raise ValueError(f"grid step must be positive, got h={h}")
    counts = [_step_count(radius, h) for radius in (L, R, Rp)][1:]
    if math.isclose(R, Rp):
        return 0.0
    if profile is None:
        widest = max(R, Rp)
        profile = load_soliton(ModelParams(n=n, k=k, R=widest, M=_step_count(widest, h)))
    kernels = [
        greens_numeric(assemble(ModelParams(n=n, k=k, R=radius, M=M), profile))
        for radius, M in zip((R, Rp), counts)
    ]
    logger.debug("greens distance on [1, %s] with h=%s between R=%s and R'=%s", L, h, R, Rp)
    return kernel_l1_distance(kernels[0], kernels[1], L)


def build_greens_report(
    params: ModelParams,
    profile: SolitonProfile,
    *,
    Rmax: Optional[float] = None,
    hardy_seed: int = 0,
    corrupt_symmetry: bool = False,
) -> tuple[dict[str, Any], GreensMatrix]:
    """Green's matrix plus the report payload (symmetry, bound constants, R0, Hardy probe)."""

    op = assemble(params, profile)
    G = greens_numeric(op)
    if corrupt_symmetry:
        corrupted = G.values.copy()
        corrupted[1, 2] += 1e-6 * float(np.max(np.abs(corrupted)))
        G = GreensMatrix(grid=G.grid, values=corrupted, params=G.params)
    bounds = green_bounds(G)
    Rmax = float(Rmax if Rmax is not None else min(profile.R_far, 2.0 * params.R))
    try:
        R0: Optional[float] = find_R0(params, Rmax, profile)
    except NoAdmissibleRadiusError as exc:
        logger.warning("%s", exc)
        R0 = None
    payload = {
        "params": params.to_dict(),
        "smallest_eigenvalue": op.smallest_eigenvalue(),
        "coercivity_floor": COERCIVITY_FLOOR,
        "R0": R0,
        "Rmax": Rmax,
        "hardy_ratio": hardy_ratio(params.grid(), seed=hardy_seed),
        "hardy_bound": 4.0 * (1.0 + 5.0 * params.h),
        **bounds,
    }
    return payload, G


__all__ = [
    "COERCIVITY_FLOOR",
    "DiscreteOperator",
    "EigensolverError",
    "GreensMatrix",
    "NoAdmissibleRadiusError",
    "NotPositiveDefiniteError",
    "SpectralBasis",
    "assemble",
    "build_greens_report",
    "coercivity_ratio",
    "default_radii",
    "eigendecompose",
    "find_R0",
    "gamma_exponent",
    "green_bounds",
    "greens_distance",
    "greens_explicit",
    "greens_explicit_matrix",
    "greens_numeric",
    "hardy_ratio",
    "kernel_l1_distance",
    "potential_values",
    "resolvent_check",
    "tqli",
]
