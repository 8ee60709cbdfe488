"""
Per-mode radial eigenproblems and the orthonormal 2D basis

    Φ_{b}(θ, r) = Θ_b(θ) R_{n,k}(r),  Θ = cos nθ/√(π(1+[n=0])) or sin nθ/√π

Coefficient arrays (ModalCoeffs) have shape (2N+1, k_max). Row s is the
angular slot in the order cos0, cos1, sin1, cos2, sin2, ..., column k−1 the
radial index k.
"""

from dataclasses import dataclass, field
from functools import cached_property
from typing import Literal, Optional

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.linalg import LinAlgError, eigh_tridiagonal

from src.core.cache import SpectrumCache, cached
from src.core.discretization import (
    DiscretizationError,
    ModeOperator,
    RadialGrid,
    angular_grid,
    assemble_mode_operator,
    boundary_derivative,
    build_radial_grid,
    check_field,
)
from src.models import ModelParams
from src.utils.logging_config import get_logger

logger = get_logger(__name__)

FloatArray = NDArray[np.float64]
ModalCoeffs = FloatArray

Branch = Literal["cos", "sin"]

COLLISION_TOL = 1e-9

spectrum_cache = SpectrumCache(max_size=32)


class SpectrumError(RuntimeError):
    """Eigensolver failure; never replaced by a silent wrong answer"""


@dataclass(frozen=True, eq=False)
class RadialEigenSystem:
    n: int
    lambdas: FloatArray
    vectors: FloatArray  # (k_max, M), Σ_j R_j² h = 1
    boundary_slopes: FloatArray

    @property
    def k_max(self) -> int:
        return int(self.lambdas.shape[0])

    def shifted(self, n: int) -> "RadialEigenSystem":
        """The system of mode n, which differs from this one by (n² − self.n²)·I"""
        if n == self.n:
            return self
        return RadialEigenSystem(
            n=n,
            lambdas=self.lambdas + float(n * n - self.n * self.n),
            vectors=self.vectors,
            boundary_slopes=self.boundary_slopes,
        )


@dataclass(frozen=True)
class BasisElement:
    branch: Branch
    n: int
    k: int

    @property
    def label(self) -> str:
        return f"{self.branch}{self.n}_{self.k}"


def solve_mode_spectrum(op: ModeOperator, k_max: int) -> RadialEigenSystem:
    """The k_max smallest eigenpairs of the mode operator"""
    M = op.grid.M
    if not 1 <= k_max <= M:
        raise SpectrumError(f"k_max={k_max} outside [1, {M}]")

    # Bisection + inverse iteration for a few low modes, implicit QL otherwise
    driver = "stebz" if k_max <= M // 8 else "stev"
    try:
        if driver == "stebz":
            lambdas, vecs = eigh_tridiagonal(
                op.diag,
                op.offdiag,
                select="i",
                select_range=(0, k_max - 1),
                lapack_driver="stebz",
            )
        else:
            lambdas, vecs = eigh_tridiagonal(op.diag, op.offdiag, lapack_driver="stev")
            lambdas, vecs = lambdas[:k_max], vecs[:, :k_max]
    except (LinAlgError, ValueError) as e:
        logger.error(f"Eigensolver {driver} failed for n={op.n}, M={M}: {str(e)}")
        raise SpectrumError(f"eigensolver {driver} did not converge: {e}") from e

    if lambdas.shape[0] != k_max or not np.all(np.isfinite(lambdas)):
        logger.error(f"Eigensolver {driver} returned an incomplete spectrum for n={op.n}")
        raise SpectrumError(
            f"eigensolver {driver} returned {lambdas.shape[0]} of {k_max} eigenpairs"
        )
    if np.any(np.diff(lambdas) <= 0.0):
        raise SpectrumError(f"radial spectrum of mode {op.n} is not simple")

    vectors = vecs.T / np.sqrt(op.grid.h)
    signs = np.where(vectors[:, 0] < 0.0, -1.0, 1.0)
    vectors = vectors * signs[:, None]

    logger.debug(
        f"Solved mode n={op.n} with {driver}: lambda_1={lambdas[0]:.10g}, M={M}"
    )
    return RadialEigenSystem(
        n=op.n,
        lambdas=np.ascontiguousarray(lambdas),
        vectors=np.ascontiguousarray(vectors),
        boundary_slopes=boundary_derivative(vectors, op.grid),
    )


@cached(spectrum_cache)
def radial_system(alpha: float, M: int, k_max: int) -> RadialEigenSystem:
    """n = 0 eigensystem for (alpha, M, k_max); every other mode is a shift of it"""
    grid = build_radial_grid(M)
    return solve_mode_spectrum(assemble_mode_operator(grid, alpha, 0), k_max)


def angular_slots(n_theta: int) -> tuple[tuple[Branch, int], ...]:
    slots: list[tuple[Branch, int]] = [("cos", 0)]
    for n in range(1, n_theta + 1):
        slots.extend((("cos", n), ("sin", n)))
    return tuple(slots)


def angular_factor_values(
    slots: tuple[tuple[Branch, int], ...], theta: ArrayLike, order: int = 0
) -> FloatArray:
    """d^order/dθ^order of the normalized angular factors, shape (len θ, slots)"""
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    out = np.empty((theta.shape[0], len(slots)))
    for s, (branch, n) in enumerate(slots):
        norm = 1.0 / np.sqrt(2.0 * np.pi) if n == 0 else 1.0 / np.sqrt(np.pi)
        # d^m cos(nθ) = n^m cos(nθ + mπ/2), likewise for sin
        phase = n * theta + order * np.pi / 2.0
        trig = np.cos(phase) if branch == "cos" else np.sin(phase)
        out[:, s] = norm * float(n) ** order * trig
    return out


@dataclass(frozen=True, eq=False)
class SpectralBasis:
    """Truncated eigenbasis of −div(A∇·) for modes n = 0..N, k = 1..k_max"""

    systems: tuple[RadialEigenSystem, ...]
    grid: RadialGrid
    alpha: float
    n_theta: int
    P: int
    collisions: tuple[tuple[tuple[int, int], tuple[int, int]], ...] = field(default=())

    @property
    def k_max(self) -> int:
        return self.systems[0].k_max

    @cached_property
    def slots(self) -> tuple[tuple[Branch, int], ...]:
        return angular_slots(self.n_theta)

    @property
    def n_slots(self) -> int:
        return 2 * self.n_theta + 1

    @property
    def size(self) -> int:
        return self.n_slots * self.k_max

    @cached_property
    def slot_modes(self) -> NDArray[np.int_]:
        return np.array([n for _, n in self.slots], dtype=int)

    @cached_property
    def lambdas(self) -> FloatArray:
        """λ per coefficient, shape (slots, k_max)"""
        return np.stack([self.systems[n].lambdas for n in self.slot_modes])

    @cached_property
    def radial_lambdas(self) -> FloatArray:
        """λ − n², the eigenvalue of the radial part alone"""
        return self.lambdas - (self.slot_modes**2)[:, None].astype(float)

    @cached_property
    def slopes(self) -> FloatArray:
        return np.stack([self.systems[n].boundary_slopes for n in self.slot_modes])

    @cached_property
    def radial(self) -> FloatArray:
        """Radial factors per slot, shape (slots, k_max, M)"""
        return np.stack([self.systems[n].vectors for n in self.slot_modes])

    @cached_property
    def thetas(self) -> FloatArray:
        return angular_grid(self.P)

    @cached_property
    def elements(self) -> tuple[BasisElement, ...]:
        return tuple(
            BasisElement(branch=branch, n=n, k=k + 1)
            for branch, n in self.slots
            for k in range(self.k_max)
        )

    def angular_factors(self, theta: Optional[ArrayLike] = None, order: int = 0) -> FloatArray:
        return angular_factor_values(
            self.slots, self.thetas if theta is None else theta, order
        )

    def index(self, element: BasisElement) -> tuple[int, int]:
        if not 1 <= element.k <= self.k_max:
            raise DiscretizationError(f"radial index {element.k} outside 1..{self.k_max}")
        try:
            s = self.slots.index((element.branch, element.n))
        except ValueError as e:
            raise DiscretizationError(f"{element.label} is not in the basis") from e
        return s, element.k - 1

    def lambda_of(self, element: BasisElement) -> float:
        return float(self.lambdas[self.index(element)])

    def zeros(self) -> ModalCoeffs:
        return np.zeros((self.n_slots, self.k_max))

    def unit(self, element: BasisElement) -> ModalCoeffs:
        c = self.zeros()
        c[self.index(element)] = 1.0
        return c

    def check_coeffs(self, c: ModalCoeffs) -> FloatArray:
        c = np.asarray(c, dtype=float)
        if c.shape != (self.n_slots, self.k_max):
            raise DiscretizationError(
                f"coefficient shape {c.shape} does not match ({self.n_slots}, {self.k_max})"
            )
        if not np.all(np.isfinite(c)):
            raise DiscretizationError("modal coefficients must be finite")
        return c


def find_collisions(
    systems: tuple[RadialEigenSystem, ...], tol: float = COLLISION_TOL
) -> tuple[tuple[tuple[int, int], tuple[int, int]], ...]:
    """Pairs (n,k), (n',k') with n ≠ n' whose eigenvalues agree within tol"""
    entries = sorted(
        (float(lam), sys.n, k + 1) for sys in systems for k, lam in enumerate(sys.lambdas)
    )
    found = []
    for (lam_a, n_a, k_a), (lam_b, n_b, k_b) in zip(entries, entries[1:]):
        if n_a != n_b and lam_b - lam_a < tol:
            found.append(((n_a, k_a), (n_b, k_b)))
    return tuple(found)


def assemble_basis(params: ModelParams, grid: Optional[RadialGrid] = None) -> SpectralBasis:
    """Eigenbasis for modes 0..n_theta with k_max radial functions each"""
    grid = grid if grid is not None else build_radial_grid(params.n_r)
    if params.k_max > grid.M:
        raise SpectrumError(f"k_max={params.k_max} exceeds the {grid.M} radial cells")

    base = radial_system(float(params.alpha), grid.M, params.k_max)
    systems = tuple(base.shifted(n) for n in range(params.n_theta + 1))

    collisions = find_collisions(systems)
    if collisions:
        logger.with_context(collisions=collisions).warning(
            f"{len(collisions)} cross-mode eigenvalue collisions within {COLLISION_TOL}"
        )

    basis = SpectralBasis(
        systems=systems,
        grid=grid,
        alpha=params.alpha,
        n_theta=params.n_theta,
        P=params.n_angular,
        collisions=collisions,
    )
    logger.debug(
        f"Assembled basis with {basis.size} elements (N={params.n_theta}, "
        f"k_max={params.k_max}, M={grid.M})"
    )
    return basis


# Transforms


def to_modal(u: FloatArray, basis: SpectralBasis) -> ModalCoeffs:
    """Discrete L² inner products ⟨u, Φ_b⟩ for every basis element"""
    u = np.asarray(u, dtype=float)
    check_field(u, basis.P, basis.grid)
    weight = (2.0 * np.pi / basis.P) * basis.grid.h
    angular = basis.angular_factors().T @ u
    return np.einsum("sj,skj->sk", angular, basis.radial) * weight


def from_modal(
    c: ModalCoeffs,
    basis: SpectralBasis,
    theta: Optional[ArrayLike] = None,
    order: int = 0,
) -> FloatArray:
    """Σ_b c_b ∂_θ^order Φ_b at the angles theta (the uniform grid by default)"""
    c = basis.check_coeffs(c)
    radial = np.einsum("sk,skj->sj", c, basis.radial)
    return basis.angular_factors(theta, order) @ radial


def boundary_trace(c: ModalCoeffs, basis: SpectralBasis) -> FloatArray:
    """∂_r of the synthesized field at r = 1 on the uniform angular grid"""
    c = basis.check_coeffs(c)
    return basis.angular_factors() @ np.sum(c * basis.slopes, axis=1)
