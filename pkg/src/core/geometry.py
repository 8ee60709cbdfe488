"""
Geometry of the cylinder 𝕋 × (0,1), the weight r^α, the angular cut-off ζ,
the radial bump η_ε and the quasimode family u = η_ε(r) sin n(θ − t).

All functions accept scalars or numpy arrays and are pure.
"""

from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from src.models import QuasimodeSpec

TWO_PI = 2.0 * np.pi

CHI_PROFILE = "chi(x)=exp(-1/(x(2-x))) on (0,2)"
ZETA_PROFILE = (
    "zeta(t)=S((t-2d0)/d0)*S((2pi-2d0-t)/d0), S(x)=s(x)/(s(x)+s(1-x)), s(x)=exp(-1/x)"
)

FloatArray = NDArray[np.float64]


@dataclass(frozen=True)
class Geometry:
    """Observation strip ω = I_ω × (0,1) and the two boundary pieces"""

    delta0: float
    # Γ is the top boundary r = 1, Γ* the degenerate bottom boundary r = 0
    gamma_radius: float = 1.0
    gamma_star_radius: float = 0.0

    @property
    def strip_intervals(self) -> tuple[tuple[float, float], tuple[float, float]]:
        """Component intervals of I_ω = [0, 4δ₀) ∪ (2π − 4δ₀, 2π)"""
        width = 4.0 * self.delta0
        return (0.0, width), (TWO_PI - width, TWO_PI)

    @property
    def strip_measure(self) -> float:
        return 8.0 * self.delta0

    @property
    def chart(self) -> tuple[float, float]:
        """Angular chart (δ₀, 2π − δ₀) carrying the localized component"""
        return self.delta0, TWO_PI - self.delta0

    @property
    def transition_bands(self) -> tuple[tuple[float, float], tuple[float, float]]:
        d = self.delta0
        return (2.0 * d, 3.0 * d), (TWO_PI - 3.0 * d, TWO_PI - 2.0 * d)

    def in_strip(self, theta: ArrayLike) -> NDArray[np.bool_]:
        theta = np.mod(np.asarray(theta, dtype=float), TWO_PI)
        width = 4.0 * self.delta0
        return (theta < width) | (theta > TWO_PI - width)


def weight(r: ArrayLike, alpha: float) -> FloatArray:
    """w(r) = r^α"""
    return np.power(np.asarray(r, dtype=float), alpha)


# Smoothstep built from σ(x) = exp(−1/x)


def _sigma(x: FloatArray) -> tuple[FloatArray, FloatArray, FloatArray]:
    """σ and its first two derivatives, zero for x ≤ 0"""
    pos = x > 0.0
    safe = np.where(pos, x, 1.0)
    s = np.where(pos, np.exp(-1.0 / safe), 0.0)
    ds = np.where(pos, s / safe**2, 0.0)
    d2s = np.where(pos, s * (1.0 / safe**4 - 2.0 / safe**3), 0.0)
    return s, ds, d2s


def smoothstep(x: ArrayLike) -> tuple[FloatArray, FloatArray, FloatArray]:
    """S(x) = σ(x)/(σ(x)+σ(1−x)) with exact first and second derivatives"""
    x = np.asarray(x, dtype=float)
    a, da, d2a = _sigma(x)
    b, db_, d2b_ = _sigma(1.0 - x)
    # chain rule for the reflected argument
    db = -db_
    d2b = d2b_

    denom = a + b  # never zero: at least one of x, 1−x is positive
    num1 = da * b - a * db
    s = a / denom
    ds = num1 / denom**2
    d2s = (d2a * b - a * d2b) / denom**2 - 2.0 * num1 * (da + db) / denom**3
    return s, ds, d2s


def cutoff_zeta_derivatives(
    theta: ArrayLike, delta0: float
) -> tuple[FloatArray, FloatArray, FloatArray]:
    """ζ, ζ′, ζ″ at the given angles (taken in [0, 2π))"""
    theta = np.asarray(theta, dtype=float)
    u = (theta - 2.0 * delta0) / delta0
    v = (TWO_PI - 2.0 * delta0 - theta) / delta0
    su, dsu, d2su = smoothstep(u)
    sv, dsv, d2sv = smoothstep(v)

    zeta = su * sv
    dzeta = (dsu * sv - su * dsv) / delta0
    d2zeta = (d2su * sv - 2.0 * dsu * dsv + su * d2sv) / delta0**2
    return zeta, dzeta, d2zeta


def cutoff_zeta(theta: ArrayLike, delta0: float) -> FloatArray:
    """ζ = 0 on [0, 2δ₀] ∪ [2π−2δ₀, 2π), ζ = 1 on [3δ₀, 2π−3δ₀]"""
    return cutoff_zeta_derivatives(theta, delta0)[0]


def cutoff_derivative_bound(delta0: float) -> float:
    """Analytic max of 2|ζ′| + |ζ″|, the constant in |g| ≤ C(|φ| + |∂_θφ|)"""
    x = np.linspace(0.0, 1.0, 4097)
    _, ds, d2s = smoothstep(x)
    return float(2.0 * np.max(np.abs(ds)) / delta0 + np.max(np.abs(d2s)) / delta0**2)


# Radial bump χ ∈ C₀^∞(0,2) and η_ε(r) = χ(r/ε)


def chi(x: ArrayLike) -> tuple[FloatArray, FloatArray, FloatArray]:
    """χ(x) = exp(−1/(x(2−x))) on (0,2) and its first two derivatives"""
    x = np.asarray(x, dtype=float)
    inside = (x > 0.0) & (x < 2.0)
    safe = np.where(inside, x, 1.0)
    q = safe * (2.0 - safe)
    dq = 2.0 - 2.0 * safe
    c = np.where(inside, np.exp(-1.0 / q), 0.0)
    dc = np.where(inside, c * dq / q**2, 0.0)
    d2c = np.where(
        inside, c * (dq**2 / q**4 - 2.0 / q**2 - 2.0 * dq**2 / q**3), 0.0
    )
    return c, dc, d2c


def bump_eta_derivatives(
    r: ArrayLike, eps: float
) -> tuple[FloatArray, FloatArray, FloatArray]:
    c, dc, d2c = chi(np.asarray(r, dtype=float) / eps)
    return c, dc / eps, d2c / eps**2


def bump_eta(r: ArrayLike, eps: float) -> FloatArray:
    """η_ε(r) = χ(r/ε), supported in (0, 2ε)"""
    return bump_eta_derivatives(r, eps)[0]


def quasimode_field(
    spec: QuasimodeSpec, t: float, theta: ArrayLike, r: ArrayLike
) -> tuple[FloatArray, FloatArray]:
    """(u, ∂_t u) on the tensor grid theta × r"""
    theta = np.asarray(theta, dtype=float)
    eta = bump_eta(r, spec.eps)
    phase = spec.n * (theta - t)
    u = np.outer(np.sin(phase), eta)
    ut = -spec.n * np.outer(np.cos(phase), eta)
    return u, ut


def quasimode_radial_residual(r: ArrayLike, eps: float, alpha: float) -> FloatArray:
    """−∂_r(r^α η′_ε(r)), the radial profile of the quasimode forcing"""
    r = np.asarray(r, dtype=float)
    _, deta, d2eta = bump_eta_derivatives(r, eps)
    # η′ vanishes near r = 0 faster than any power, so r^{α−1} is harmless there
    r_safe = np.where(r > 0.0, r, 1.0)
    flux_derivative = np.where(
        r > 0.0, alpha * r_safe ** (alpha - 1.0) * deta + r_safe**alpha * d2eta, 0.0
    )
    return -flux_derivative


def quasimode_residual(
    spec: QuasimodeSpec, t: float, theta: ArrayLike, r: ArrayLike, alpha: float
) -> FloatArray:
    """f = ∂_tt u − div(A∇u) = −∂_r(r^α η′_ε) sin n(θ − t)"""
    theta = np.asarray(theta, dtype=float)
    profile = quasimode_radial_residual(r, spec.eps, alpha)
    return np.outer(np.sin(spec.n * (theta - t)), profile)
