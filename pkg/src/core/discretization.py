"""
Flux-form discretization of −div(A∇·) on 𝕋 × (0,1).

Radial direction: cell-centered staggered grid, face fluxes weighted by
r_{j+1/2}^α. The face r = 0 carries weight 0^α = 0, which is the weighted
Neumann condition; the Dirichlet condition at r = 1 uses the ghost value
R_{M+1} = −R_M. Angular direction: uniform periodic samples differentiated
exactly in Fourier space.
"""

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray
from scipy import fft

from src.utils.logging_config import get_logger

logger = get_logger(__name__)

FloatArray = NDArray[np.float64]


class DiscretizationError(ValueError):
    """Invalid grid or mismatched field dimensions"""


@dataclass(frozen=True, eq=False)
class RadialGrid:
    M: int
    h: float
    centers: FloatArray
    faces: FloatArray


@dataclass(frozen=True, eq=False)
class ModeOperator:
    """Symmetric tridiagonal L_n = −(r^α ∂_r ·)′ + n² for one angular mode"""

    n: int
    diag: FloatArray
    offdiag: FloatArray
    alpha: float
    grid: RadialGrid

    @property
    def norm_1(self) -> float:
        """Induced 1-norm (max column sum)"""
        col = np.abs(self.diag).copy()
        col[:-1] += np.abs(self.offdiag)
        col[1:] += np.abs(self.offdiag)
        return float(np.max(col))

    def dense(self) -> FloatArray:
        return (
            np.diag(self.diag)
            + np.diag(self.offdiag, k=1)
            + np.diag(self.offdiag, k=-1)
        )


def build_radial_grid(M: int) -> RadialGrid:
    if M < 4:
        raise DiscretizationError(f"radial grid needs at least 4 cells, got {M}")

    h = 1.0 / M
    centers = (np.arange(1, M + 1) - 0.5) * h
    faces = np.arange(M + 1) * h
    faces[-1] = 1.0
    return RadialGrid(M=M, h=h, centers=centers, faces=faces)


def face_weights(grid: RadialGrid, alpha: float) -> FloatArray:
    """r_{j+1/2}^α for j = 0..M; the first entry is exactly 0"""
    weights = np.power(grid.faces, alpha)
    weights[0] = 0.0
    return weights


def assemble_mode_operator(grid: RadialGrid, alpha: float, n: int) -> ModeOperator:
    if n < 0:
        raise DiscretizationError(f"angular mode index must be non-negative, got {n}")

    h2 = grid.h**2
    w = face_weights(grid, alpha)
    # (L R)_j = −(F_{j+1/2} − F_{j−1/2})/h + n² R_j, F_{M+1/2} = w_M (−2 R_M)/h
    diag = (w[:-1] + w[1:]) / h2
    diag[-1] = (w[-2] + 2.0 * w[-1]) / h2
    diag = diag + float(n * n)
    offdiag = -w[1:-1] / h2

    logger.debug(f"Assembled mode operator n={n}, M={grid.M}, alpha={alpha}")
    return ModeOperator(n=n, diag=diag, offdiag=offdiag, alpha=alpha, grid=grid)


def apply_mode_operator(op: ModeOperator, v: FloatArray) -> FloatArray:
    """Matrix–vector product along the last axis"""
    v = np.asarray(v, dtype=float)
    if v.shape[-1] != op.grid.M:
        raise DiscretizationError(
            f"vector length {v.shape[-1]} does not match M={op.grid.M}"
        )

    out = op.diag * v
    out[..., :-1] += op.offdiag * v[..., 1:]
    out[..., 1:] += op.offdiag * v[..., :-1]
    return out


# Angular samples and Fourier differentiation


def angular_grid(P: int) -> FloatArray:
    """θ_i = 2πi/P"""
    return 2.0 * np.pi * np.arange(P) / P


def angular_derivative(u: FloatArray, order: int = 1, axis: int = 0) -> FloatArray:
    """Exact Fourier derivative along a uniform periodic axis"""
    u = np.asarray(u, dtype=float)
    P = u.shape[axis]
    coeffs = fft.rfft(u, axis=axis)
    k = np.arange(coeffs.shape[axis], dtype=float)
    factor = (1j * k) ** order
    if P % 2 == 0 and order % 2:
        factor[-1] = 0.0  # Nyquist mode has no odd derivative on the grid
    shape = [1] * u.ndim
    shape[axis] = -1
    return fft.irfft(coeffs * factor.reshape(shape), n=P, axis=axis)


def check_field(u: FloatArray, P: int, grid: RadialGrid) -> None:
    if np.shape(u) != (P, grid.M):
        raise DiscretizationError(
            f"field shape {np.shape(u)} does not match (P, M) = ({P}, {grid.M})"
        )


def _check_pair(u: FloatArray, v: FloatArray, grid: RadialGrid) -> None:
    if np.shape(u) != np.shape(v):
        raise DiscretizationError(f"shape mismatch {np.shape(u)} vs {np.shape(v)}")
    if np.ndim(u) != 2 or np.shape(u)[1] != grid.M:
        raise DiscretizationError(f"field shape {np.shape(u)} is not (P, {grid.M})")


# Radial differences


def radial_face_gradient(u: FloatArray, grid: RadialGrid) -> FloatArray:
    """∂_r u at faces j = 1..M along the last axis, ghost value at r = 1"""
    u = np.asarray(u, dtype=float)
    grad = np.empty_like(u)
    grad[..., :-1] = np.diff(u, axis=-1) / grid.h
    grad[..., -1] = -2.0 * u[..., -1] / grid.h
    return grad


def face_quadrature(grid: RadialGrid, alpha: float) -> FloatArray:
    """Weights r_{j+1/2}^α · (face cell length) matching radial_face_gradient"""
    w = face_weights(grid, alpha)[1:].copy()
    lengths = np.full(grid.M, grid.h)
    lengths[-1] = 0.5 * grid.h
    return w * lengths


def radial_energy(u: FloatArray, v: FloatArray, grid: RadialGrid, alpha: float) -> FloatArray:
    """Σ_faces r^α ∂_r u ∂_r v dr along the last axis (equals ⟨L_0 u, v⟩ h)"""
    weights = face_quadrature(grid, alpha)
    return np.sum(
        radial_face_gradient(u, grid) * radial_face_gradient(v, grid) * weights,
        axis=-1,
    )


def center_gradient(u: FloatArray, grid: RadialGrid) -> FloatArray:
    """Centered ∂_r u at cell centers: mirror value at r = 0, ghost at r = 1"""
    u = np.asarray(u, dtype=float)
    padded = np.concatenate([u[..., :1], u, -u[..., -1:]], axis=-1)
    return (padded[..., 2:] - padded[..., :-2]) / (2.0 * grid.h)


def center_second_derivative(u: FloatArray, grid: RadialGrid) -> FloatArray:
    u = np.asarray(u, dtype=float)
    padded = np.concatenate([u[..., :1], u, -u[..., -1:]], axis=-1)
    return (padded[..., 2:] - 2.0 * u + padded[..., :-2]) / grid.h**2


# Inner products and traces


def inner_l2(u: FloatArray, v: FloatArray, grid: RadialGrid) -> float:
    """Σ u v (2π/P) h"""
    _check_pair(u, v, grid)
    P = np.shape(u)[0]
    return float(np.sum(np.asarray(u) * np.asarray(v)) * (2.0 * np.pi / P) * grid.h)


def inner_h1w(u: FloatArray, v: FloatArray, grid: RadialGrid, alpha: float) -> float:
    """Discrete ∫ (∂_θu ∂_θv + r^α ∂_ru ∂_rv) dz"""
    _check_pair(u, v, grid)
    P = np.shape(u)[0]
    dtheta = 2.0 * np.pi / P
    angular = np.sum(angular_derivative(u) * angular_derivative(v)) * dtheta * grid.h
    radial = np.sum(radial_energy(u, v, grid, alpha)) * dtheta
    return float(angular + radial)


def boundary_derivative(u: FloatArray, grid: RadialGrid) -> FloatArray:
    """∂_r u at r = 1 per angular sample: (0 − u_M)/(h/2)"""
    u = np.asarray(u, dtype=float)
    if u.shape[-1] != grid.M:
        raise DiscretizationError(f"field has {u.shape[-1]} radial cells, expected {grid.M}")
    return -u[..., -1] / (0.5 * grid.h)
