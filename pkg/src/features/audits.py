"""
Multiplier audit for the localized component ψ = ζφ.

ψ solves ∂_tt ψ − div(A∇ψ) = g with g = −2ζ′∂_θφ − ζ″φ. Multiplying by
H·∇ψ, H = (θ − π, r), gives B1 + B2 = B3. B3 is integrated directly; B1
and B2 are evaluated in their integrated-by-parts form: a time-boundary
term plus the kinetic integral for B1, a boundary flux on Γ plus a
weighted radial gradient integral for B2. Their mismatch with B3 is the
discretization error studied along a refinement ladder. The direct
quadratures of B1 and B2 cancel B3 to rounding on the grid.
"""

import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray
from scipy.integrate import simpson

from src.core.discretization import (
    RadialGrid,
    angular_derivative,
    boundary_derivative,
    center_gradient,
    face_quadrature,
    radial_face_gradient,
)
from src.core.geometry import TWO_PI, cutoff_zeta_derivatives
from src.core.spectral import SpectralBasis, from_modal
from src.features.evolution import Trajectory
from src.features.observables import ObservationError, cutoff_decompose
from src.models import IdentityResidual, ModelParams, MultiplierAudit
from src.utils.logging_config import get_logger

logger = get_logger(__name__)

FloatArray = NDArray[np.float64]

EPS_FLOOR = 1e-30
MIN_INTERVALS = 64


@dataclass(frozen=True, eq=False)
class ThetaQuadrature:
    """Composite Simpson nodes on [0, 2π) split at 2δ₀, 3δ₀ and their mirrors"""

    nodes: FloatArray
    weights: FloatArray
    outside_chart: NDArray[np.bool_]


def _simpson_piece(lo: float, hi: float, intervals: int) -> tuple[FloatArray, FloatArray]:
    nodes = np.linspace(lo, hi, intervals + 1)
    weights = np.full(intervals + 1, 2.0)
    weights[1::2] = 4.0
    weights[0] = weights[-1] = 1.0
    return nodes, weights * (hi - lo) / (3.0 * intervals)


def audit_theta_quadrature(delta0: float, P: int) -> ThetaQuadrature:
    d = delta0
    band = max(MIN_INTERVALS, P)
    bulk = max(MIN_INTERVALS, 4 * P)
    band += band % 2
    bulk += bulk % 2
    pieces = [
        (0.0, 2.0 * d, band),
        (2.0 * d, 3.0 * d, band),
        (3.0 * d, TWO_PI - 3.0 * d, bulk),
        (TWO_PI - 3.0 * d, TWO_PI - 2.0 * d, band),
        (TWO_PI - 2.0 * d, TWO_PI, band),
    ]
    parts = [_simpson_piece(lo, hi, n) for lo, hi, n in pieces]
    nodes = np.concatenate([p[0] for p in parts])
    weights = np.concatenate([p[1] for p in parts])
    return ThetaQuadrature(
        nodes=nodes,
        weights=weights,
        outside_chart=(nodes <= d) | (nodes >= TWO_PI - d),
    )


class _AuditFields:
    """Synthesizes φ, ψ and their derivatives on the audit quadrature nodes"""

    def __init__(self, basis: SpectralBasis, params: ModelParams, active: NDArray[np.bool_]):
        self.basis = basis
        self.alpha = params.alpha
        self.grid = basis.grid
        self.quad = audit_theta_quadrature(params.delta0, basis.P)
        self.active = active

        theta = self.quad.nodes
        self.R = basis.radial[active]
        self.lambdas = basis.lambdas[active]
        self.radial_lambdas = basis.radial_lambdas[active]
        self.theta_0 = basis.angular_factors(theta)[:, active]
        self.theta_1 = basis.angular_factors(theta, order=1)[:, active]
        self.theta_2 = basis.angular_factors(theta, order=2)[:, active]

        zeta, dzeta, d2zeta = cutoff_zeta_derivatives(theta, params.delta0)
        self.zeta = zeta[:, None]
        self.dzeta = dzeta[:, None]
        self.d2zeta = d2zeta[:, None]
        self.lever = (theta - math.pi)[:, None]
        self.r = self.grid.centers[None, :]
        self.face_weights = face_quadrature(self.grid, self.alpha)

    def integrate(self, field: FloatArray) -> float:
        """∫_𝕋∫₀¹ field dr dθ"""
        return float(self.quad.weights @ np.sum(field, axis=1) * self.grid.h)

    def integrate_faces(self, face_field: FloatArray) -> float:
        """∫_𝕋∫₀¹ r^α (...) dr dθ for a field given at faces 1..M"""
        return float(self.quad.weights @ (face_field @ self.face_weights))

    def integrate_boundary(self, trace: FloatArray) -> float:
        return float(self.quad.weights @ trace)

    def synthesize(self, coeffs: FloatArray, angular: FloatArray) -> FloatArray:
        return angular @ np.einsum("sk,skj->sj", coeffs, self.R)

    def snapshot(self, a: FloatArray, adot: FloatArray) -> dict[str, float]:
        a, adot = a[self.active], adot[self.active]
        phi = self.synthesize(a, self.theta_0)
        phi_theta = self.synthesize(a, self.theta_1)
        phi_tt = -self.synthesize(self.lambdas * a, self.theta_0)
        phi_t = self.synthesize(adot, self.theta_0)
        phi_t_theta = self.synthesize(adot, self.theta_1)

        zeta, dzeta, d2zeta = self.zeta, self.dzeta, self.d2zeta
        psi = zeta * phi
        psi_t = zeta * phi_t
        psi_tt = zeta * phi_tt
        psi_theta = dzeta * phi + zeta * phi_theta
        psi_r = zeta * center_gradient(phi, self.grid)
        psi_r_faces = zeta * radial_face_gradient(phi, self.grid)
        H_psi = self.lever * psi_theta + self.r * psi_r

        # div(A∇ψ) by the product rule; the radial part comes from the modal operator
        div_psi = (
            d2zeta * phi
            + 2.0 * dzeta * phi_theta
            + zeta * self.synthesize(a, self.theta_2)
            - zeta * self.synthesize(self.radial_lambdas * a, self.theta_0)
        )
        g = -2.0 * dzeta * phi_theta - d2zeta * phi

        psi_t_theta = dzeta * phi_t + zeta * phi_t_theta
        psi_t_r = zeta * center_gradient(phi_t, self.grid)
        H_psi_t = self.lever * psi_t_theta + self.r * psi_t_r

        weighted = self.integrate_faces(psi_r_faces**2)
        kinetic = self.integrate(psi_t**2)
        return {
            "B1": self.integrate(psi_tt * H_psi),
            "B2": -self.integrate(div_psi * H_psi),
            "B3": self.integrate(g * H_psi),
            "time_boundary": self.integrate(psi_t * H_psi),
            "kinetic": kinetic,
            "transport": -self.integrate(psi_t * H_psi_t),
            "gamma": self.integrate_boundary(
                (self.zeta[:, 0] * boundary_derivative(phi, self.grid)) ** 2
            ),
            "weighted": weighted,
            "g_psi_t": self.integrate(g * psi_t),
            "E_psi": 0.5 * (kinetic + self.integrate(psi_theta**2) + weighted),
            "leak": float(np.max(np.abs(psi[self.quad.outside_chart]), initial=0.0)),
        }

    def split_energies(self, a: FloatArray, adot: FloatArray) -> tuple[float, float, float]:
        """Quadrature energies of φ, ψ and ξ = (1−ζ)φ at one instant"""
        a, adot = a[self.active], adot[self.active]
        phi = self.synthesize(a, self.theta_0)
        phi_theta = self.synthesize(a, self.theta_1)
        phi_t = self.synthesize(adot, self.theta_0)
        face_grad = radial_face_gradient(phi, self.grid)

        def energy_of(weight: FloatArray, dweight: FloatArray) -> float:
            theta_grad = dweight * phi + weight * phi_theta
            return 0.5 * (
                self.integrate((weight * phi_t) ** 2)
                + self.integrate(theta_grad**2)
                + self.integrate_faces((weight * face_grad) ** 2)
            )

        one = np.ones_like(self.zeta)
        return (
            energy_of(one, np.zeros_like(self.zeta)),
            energy_of(self.zeta, self.dzeta),
            energy_of(one - self.zeta, -self.dzeta),
        )


def _relative(value: float, *scales: float) -> float:
    return abs(value) / max(*(abs(s) for s in scales), EPS_FLOOR)


def multiplier_audit(
    traj: Trajectory,
    params: ModelParams,
    basis: SpectralBasis,
    mode: tuple[int, int] = (0, 0),
) -> MultiplierAudit:
    """B1, B2 in integrated form against B3 for ψ = ζφ along a homogeneous trajectory"""
    if traj.forcing is not None:
        raise ObservationError("the multiplier audit needs a homogeneous trajectory")

    active = np.any(traj.a != 0.0, axis=(0, 2)) | np.any(traj.adot != 0.0, axis=(0, 2))
    if not np.any(active):
        active[0] = True
    fields = _AuditFields(basis, params, active)

    samples = [fields.snapshot(traj.a[m], traj.adot[m]) for m in range(traj.n_t + 1)]

    def integral(name: str) -> float:
        return float(simpson(np.array([s[name] for s in samples]), x=traj.times))

    B1_direct, B2_direct, B3 = integral("B1"), integral("B2"), integral("B3")
    time_boundary = samples[-1]["time_boundary"] - samples[0]["time_boundary"]
    kinetic = integral("kinetic")
    gamma_flux = -0.5 * integral("gamma")
    weighted = -0.5 * params.alpha * integral("weighted")
    B1 = time_boundary + kinetic
    B2 = gamma_flux + weighted

    work = integral("g_psi_t")
    energy_change = samples[-1]["E_psi"] - samples[0]["E_psi"]
    E_phi, E_psi, E_xi = fields.split_energies(traj.a[0], traj.adot[0])

    audit = MultiplierAudit(
        alpha=params.alpha,
        n=mode[0],
        k=mode[1],
        n_theta=basis.n_theta,
        M=basis.grid.M,
        B1=B1,
        B2=B2,
        B3=B3,
        residual_rel=_relative(B1 + B2 - B3, B1, B2, B3),
        equation_residual_rel=_relative(B1_direct + B2_direct - B3, B1_direct, B2_direct, B3),
        term_breakdown={
            "B1_time_boundary": time_boundary,
            "B1_kinetic": kinetic,
            "B1_transport": integral("transport"),
            "B1_direct": B1_direct,
            "B2_boundary": gamma_flux,
            "B2_weighted": weighted,
            "B2_direct": B2_direct,
        },
        energy_identity_residual=_relative(
            energy_change - work, samples[0]["E_psi"], work
        ),
        energy_split_ok=E_phi <= 2.0 * (E_psi + E_xi) * (1.0 + 1e-12),
        chart_leak=max(s["leak"] for s in samples),
    )
    logger.with_context(mode=mode, M=basis.grid.M, n_theta=basis.n_theta).info(
        f"Multiplier audit residual {audit.residual_rel:.3e}, "
        f"equation residual {audit.equation_residual_rel:.3e}"
    )
    return audit


# Integration-by-parts identities for ψ on the uniform grid


def _face_average_flux(values: FloatArray, faces: FloatArray) -> FloatArray:
    """r·v² at faces 0..M with v averaged across each face (ghost −v_M at r = 1)"""
    flux = np.zeros(values.shape[:-1] + (values.shape[-1] + 1,))
    mid = 0.5 * (values[..., :-1] + values[..., 1:])
    flux[..., 1:-1] = faces[1:-1] * mid**2
    return flux


def _weighted_gradient_flux(values: FloatArray, grid: RadialGrid, alpha: float) -> FloatArray:
    """r^{α+1}(∂_r v)² at faces 0..M; the face at r = 1 carries the boundary derivative"""
    flux = np.zeros(values.shape[:-1] + (values.shape[-1] + 1,))
    flux[..., 1:] = grid.faces[1:] ** (alpha + 1.0) * radial_face_gradient(values, grid) ** 2
    return flux


def identity_audit(
    traj: Trajectory, params: ModelParams, basis: SpectralBasis
) -> list[IdentityResidual]:
    """Exact-derivative identities for ψ integrated over the space-time cylinder

    The first five integrate a pure θ- or r-derivative and vanish; the last
    equates the radial derivative of r^{α+1}(∂_rψ)² with the flux through Γ.
    """
    grid = basis.grid
    alpha = params.alpha
    dtheta = TWO_PI / basis.P
    r = grid.centers[None, :]
    names = (
        "d_theta_psi2",
        "d_r_r_psi2",
        "d_theta_psi_theta2",
        "d_r_r_psi_theta2",
        "d_theta_weighted_psi_r2",
        "d_r_weighted_boundary",
    )
    lhs = np.zeros((len(names), traj.n_t + 1))
    ref = np.zeros_like(lhs)
    rhs = np.zeros_like(lhs)

    for m in range(traj.n_t + 1):
        psi = cutoff_decompose(from_modal(traj.a[m], basis), params, grid).psi
        psi_theta = angular_derivative(psi)
        psi_r = center_gradient(psi, grid)

        area = dtheta * grid.h
        integrands = [
            angular_derivative(psi**2) * area,
            np.diff(_face_average_flux(psi, grid.faces), axis=-1) * dtheta,
            angular_derivative(psi_theta**2) * area,
            np.diff(_face_average_flux(psi_theta, grid.faces), axis=-1) * dtheta,
            angular_derivative(r**alpha * psi_r**2) * area,
            np.diff(_weighted_gradient_flux(psi, grid, alpha), axis=-1) * dtheta,
        ]
        for i, integrand in enumerate(integrands):
            lhs[i, m] = np.sum(integrand)
            ref[i, m] = np.sum(np.abs(integrand))
        rhs[-1, m] = np.sum(boundary_derivative(psi, grid) ** 2) * dtheta

    def in_time(series: FloatArray) -> float:
        return float(simpson(series, x=traj.times))

    results = []
    for i, name in enumerate(names):
        total, scale, target = in_time(lhs[i]), in_time(ref[i]), in_time(rhs[i])
        residual = _relative(total - target, target if target else scale)
        results.append(IdentityResidual(name=name, lhs=total, rhs=target, residual=residual))
    logger.debug(f"Identity audit: {[(r.name, r.residual) for r in results]}")
    return results
