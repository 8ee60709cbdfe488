"""
Observation functionals and inequality checks for the degenerate wave flow.
"""

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from numpy.random import Generator
from numpy.typing import NDArray
from scipy.integrate import simpson

from src.core.discretization import (
    RadialGrid,
    angular_derivative,
    angular_grid,
    check_field,
    face_quadrature,
    radial_energy,
    radial_face_gradient,
)
from src.core.geometry import Geometry, cutoff_derivative_bound, cutoff_zeta_derivatives
from src.core.spectral import SpectralBasis
from src.features.evolution import (
    InitialData,
    Trajectory,
    energy,
    project_quasimode,
    quasimode_mass,
    sample_trajectory,
)
from src.models import (
    ConstantEstimate,
    HardyReport,
    ModelParams,
    ObservationReport,
    QuasimodeRow,
    QuasimodeSpec,
    Reverification,
)
from src.utils.logging_config import get_logger

logger = get_logger(__name__)

FloatArray = NDArray[np.float64]

STRIP_INTERVALS = 64
HARDY_TOL = 1e-8
TRACE_TOL = 1e-8
DEFAULT_BETA = 0.5


class ObservationError(ValueError):
    """Invalid input to an observation functional or inequality check"""


def safe_ratio(numerator: float, denominator: float) -> float:
    """numerator/denominator, with x/0 = ∞ for x > 0 and 0 otherwise"""
    if denominator > 0.0:
        return numerator / denominator
    return math.inf if numerator > 0.0 else 0.0


# Observation functionals


def boundary_flux_density(traj: Trajectory, basis: SpectralBasis) -> FloatArray:
    """∫_𝕋 (∂_rφ(θ,1,t))² dθ per time sample

    With orthonormal angular factors the θ-integral is the sum of squares of
    Σ_k a_{s,k} ∂_r R_{n,k}(1) over angular slots.
    """
    traces = np.sum(traj.a * basis.slopes[None, ...], axis=2)
    return np.sum(traces**2, axis=1)


def observe_boundary(traj: Trajectory, basis: SpectralBasis) -> float:
    """∬_{Γ×(0,T)} (∂_rφ)² dS dt"""
    return float(simpson(boundary_flux_density(traj, basis), x=traj.times))


def strip_nodes(geometry: Geometry, intervals: int = STRIP_INTERVALS) -> list[FloatArray]:
    """Simpson nodes on each component interval of I_ω"""
    return [np.linspace(lo, hi, intervals + 1) for lo, hi in geometry.strip_intervals]


def strip_energy_density(
    a: FloatArray, adot: FloatArray, basis: SpectralBasis, theta: FloatArray
) -> FloatArray:
    """∫₀¹ [φ² + φ_t² + (∂_θφ)² + r^α(∂_rφ)²] dr at the angles theta, per time sample"""
    R = basis.radial
    grid = basis.grid
    theta_0 = basis.angular_factors(theta)
    theta_1 = basis.angular_factors(theta, order=1)

    radial_a = np.einsum("msk,skj->msj", a, R)
    radial_adot = np.einsum("msk,skj->msj", adot, R)
    phi = np.einsum("is,msj->mij", theta_0, radial_a)
    phi_t = np.einsum("is,msj->mij", theta_0, radial_adot)
    phi_theta = np.einsum("is,msj->mij", theta_1, radial_a)

    bulk = np.sum(phi**2 + phi_t**2 + phi_theta**2, axis=-1) * grid.h
    flux = radial_face_gradient(phi, grid) ** 2 @ face_quadrature(grid, basis.alpha)
    return bulk + flux


def observe_strip(
    traj: Trajectory,
    basis: SpectralBasis,
    geometry: Geometry,
    intervals: int = STRIP_INTERVALS,
) -> float:
    """∬_{ω×(0,T)} [φ² + (∂_tφ)² + A∇φ·∇φ] dz dt"""
    per_time = np.zeros(traj.n_t + 1)
    for theta in strip_nodes(geometry, intervals):
        density = strip_energy_density(traj.a, traj.adot, basis, theta)
        per_time += simpson(density, x=theta, axis=1)
    return float(simpson(per_time, x=traj.times))


def observability_report(
    init: InitialData,
    params: ModelParams,
    basis: SpectralBasis,
    tag: str = "datum",
    traj: Optional[Trajectory] = None,
) -> ObservationReport:
    """Evolve homogeneously and compare the threshold term with both observations

    A trajectory already sampled from init over [0, T] can be passed in.
    """
    if traj is None:
        traj = sample_trajectory(init, None, basis, params.T, params.n_t)
    geometry = Geometry(delta0=params.delta0)

    E0 = energy(traj.state(0), basis)
    O_Gamma = observe_boundary(traj, basis)
    O_omega = observe_strip(traj, basis, geometry)
    threshold_term = ((2.0 - params.alpha) * params.T - math.sqrt(2.0)) * E0

    if params.below_threshold:
        logger.with_context(tag=tag, T=params.T, threshold=params.threshold_time).warning(
            f"T={params.T} is not above the threshold {params.threshold_time:.6f}"
        )

    return ObservationReport(
        alpha=params.alpha,
        T=params.T,
        delta0=params.delta0,
        tag=tag,
        E0=E0,
        O_Gamma=max(O_Gamma, 0.0),
        O_omega=max(O_omega, 0.0),
        threshold_term=threshold_term,
        ratio_mixed=safe_ratio(threshold_term, O_Gamma + O_omega),
        ratio_top_only=safe_ratio(threshold_term, O_Gamma),
        below_threshold=params.below_threshold,
    )


def constant_from_reports(reports: Sequence[ObservationReport]) -> ConstantEstimate:
    if not reports:
        raise ObservationError("cannot estimate a constant from an empty family")

    excluded = [i for i, r in enumerate(reports) if r.O_Gamma + r.O_omega == 0.0]
    ratios = [r.ratio_mixed for i, r in enumerate(reports) if i not in excluded]
    value = max(ratios) if ratios else 0.0
    if excluded:
        logger.info(f"Excluded {len(excluded)} family members with zero observation")
    return ConstantEstimate(value=value, reports=list(reports), excluded=excluded)


def reverify_constant(
    reports: Sequence[ObservationReport], constant: float, margin: float = 2.0
) -> Reverification:
    """Check threshold_term ≤ margin·C·(O_Γ + O_ω) on data the constant was not fitted on

    Below the threshold time nothing is asserted; failures are still listed.
    """
    failures = [
        i
        for i, r in enumerate(reports)
        if r.threshold_term > margin * constant * (r.O_Gamma + r.O_omega)
    ]
    observed = [r.ratio_mixed for r in reports if r.O_Gamma + r.O_omega > 0.0]
    enforced = not any(r.below_threshold for r in reports)
    result = Reverification(
        constant=constant,
        checked=len(reports),
        worst_ratio=max(observed, default=0.0),
        failures=failures,
        enforced=enforced,
    )
    if failures:
        log = logger.with_context(constant=constant, failures=failures)
        if enforced:
            log.error(f"{len(failures)} of {len(reports)} fresh data exceed {margin}·C_emp")
        else:
            log.info(f"{len(failures)} fresh data exceed {margin}·C_emp below the threshold time")
    return result


def estimate_constant(
    family: Sequence[InitialData], params: ModelParams, basis: SpectralBasis
) -> ConstantEstimate:
    """C_emp = max over the family of threshold_term/(O_Γ + O_ω)"""
    if not family:
        raise ObservationError("cannot estimate a constant from an empty family")
    reports = [
        observability_report(init, params, basis, tag=f"member{i}")
        for i, init in enumerate(family)
    ]
    return constant_from_reports(reports)


def eigenmode_family(basis: SpectralBasis, count: int) -> list[InitialData]:
    """(Φ_b, 0) for the count lowest eigenvalues, ties kept in slot order"""
    order = np.argsort(basis.lambdas.ravel(), kind="stable")[:count]
    family = []
    for flat in order:
        phi0 = basis.zeros()
        phi0.flat[flat] = 1.0
        family.append(InitialData(phi0=phi0, phi1=basis.zeros()))
    return family


def random_family(basis: SpectralBasis, count: int, rng: Generator) -> list[InitialData]:
    """Superpositions with coefficients N(0,1)·λ_b⁻¹ for position and velocity"""
    return [
        InitialData(
            phi0=rng.standard_normal(basis.lambdas.shape) / basis.lambdas,
            phi1=rng.standard_normal(basis.lambdas.shape) / basis.lambdas,
        )
        for _ in range(count)
    ]


def hidden_regularity_ratio(
    traj: Trajectory, init: InitialData, basis: SpectralBasis
) -> float:
    """O_Γ / (‖φ⁰‖²_{H¹,w} + ‖φ¹‖²_{L²}) with modal Parseval norms"""
    norm = float(np.sum(basis.lambdas * init.phi0**2) + np.sum(init.phi1**2))
    if norm == 0.0:
        return 0.0
    return observe_boundary(traj, basis) / norm


# Hardy and Poincaré inequalities


def hardy_constant(alpha: float) -> float:
    if alpha == 1.0:
        return 8.0
    return 4.0 / (alpha - 1.0) ** 2


def _power_cell_integrals(grid: RadialGrid, exponent: float) -> FloatArray:
    """∫ r^{exponent−1} dr over each cell, exponent > 0"""
    edges = np.power(grid.faces, exponent)
    return np.diff(edges) / exponent


def extrapolated_trace(u: FloatArray) -> FloatArray:
    """Cubic extrapolation of the last four cell values to r = 1"""
    u = np.asarray(u, dtype=float)
    return (35.0 * u[..., -1] - 35.0 * u[..., -2] + 21.0 * u[..., -3] - 5.0 * u[..., -4]) / 16.0


def hardy_check(
    u: FloatArray, grid: RadialGrid, alpha: float, beta: Optional[float] = None
) -> HardyReport:
    """Discrete ∫ r^{α−2}u² ≤ C(α) ∫ r^α(∂_ru)² for u vanishing on Γ"""
    u = np.asarray(u, dtype=float)
    if u.ndim != 2 or u.shape[1] != grid.M:
        raise ObservationError(f"field shape {u.shape} is not (P, {grid.M})")

    scale = float(np.max(np.abs(u))) if u.size else 0.0
    trace = float(np.max(np.abs(extrapolated_trace(u))))
    if trace > TRACE_TOL * scale:
        raise ObservationError(
            f"field does not vanish at r = 1 (trace {trace:.3e}, max {scale:.3e})"
        )

    dtheta = 2.0 * math.pi / u.shape[0]
    u2 = u**2
    if alpha == 1.0:
        lhs = float(np.sum(u2) * grid.h * dtheta)
    else:
        lhs = float(np.sum(u2 @ _power_cell_integrals(grid, alpha - 1.0)) * dtheta)
    rhs = float(np.sum(radial_energy(u, u, grid, alpha)) * dtheta)
    poincare_lhs = float(np.sum(u2) * grid.h * dtheta)
    constant = hardy_constant(alpha)

    weighted_ratio = None
    if alpha == 1.0:
        beta = DEFAULT_BETA if beta is None else beta
        if beta <= 0.0:
            raise ObservationError(f"beta must be positive, got {beta}")
        weighted = float(np.sum(u2 @ _power_cell_integrals(grid, beta)) * dtheta)
        weighted_ratio = safe_ratio(weighted, rhs)

    bound = constant * rhs * (1.0 + HARDY_TOL)
    return HardyReport(
        alpha=alpha,
        lhs=lhs,
        rhs=rhs,
        paper_constant=constant,
        satisfied=lhs <= bound,
        poincare_lhs=poincare_lhs,
        poincare_satisfied=poincare_lhs <= bound,
        weighted_ratio=weighted_ratio,
    )


# Cut-off decomposition φ = ζφ + (1−ζ)φ


@dataclass(frozen=True, eq=False)
class CutoffDecomposition:
    psi: FloatArray
    xi: FloatArray
    g: FloatArray
    zeta: FloatArray
    phi_theta: FloatArray

    def g_bound_excess(self, phi: FloatArray, delta0: float) -> float:
        """max(|g| − C(δ₀)(|φ| + |∂_θφ|)); non-positive when the bound holds"""
        bound = cutoff_derivative_bound(delta0) * (np.abs(phi) + np.abs(self.phi_theta))
        return float(np.max(np.abs(self.g) - bound))


def cutoff_decompose(
    phi_field: FloatArray, params: ModelParams, grid: Optional[RadialGrid] = None
) -> CutoffDecomposition:
    """ψ = ζφ, ξ = (1−ζ)φ and g = −2ζ′∂_θφ − ζ″φ on the uniform angular grid"""
    phi = np.asarray(phi_field, dtype=float)
    if phi.ndim != 2:
        raise ObservationError(f"expected a (P, M) field, got shape {phi.shape}")
    if grid is not None:
        check_field(phi, phi.shape[0], grid)

    theta = angular_grid(phi.shape[0])
    zeta, dzeta, d2zeta = cutoff_zeta_derivatives(theta, params.delta0)
    phi_theta = angular_derivative(phi)

    return CutoffDecomposition(
        psi=zeta[:, None] * phi,
        xi=(1.0 - zeta)[:, None] * phi,
        g=-2.0 * dzeta[:, None] * phi_theta - d2zeta[:, None] * phi,
        zeta=zeta,
        phi_theta=phi_theta,
    )


# Quasimodes


def quasimode_row(
    spec: QuasimodeSpec,
    params: ModelParams,
    basis: SpectralBasis,
    mass_threshold: float = 0.99,
) -> QuasimodeRow:
    init = project_quasimode(spec, basis)
    mass = quasimode_mass(spec, basis, init)
    flagged = mass < mass_threshold
    if flagged:
        logger.with_context(n=spec.n, eps=spec.eps, mass=mass).warning(
            f"Quasimode n={spec.n} eps={spec.eps} keeps only {mass:.4f} of its mass"
        )
    report = observability_report(init, params, basis, tag=f"quasimode_n{spec.n}")
    return QuasimodeRow(
        n=spec.n, eps=spec.eps, projection_mass=mass, flagged=flagged, report=report
    )


def quasimode_sweep(
    specs: Sequence[QuasimodeSpec],
    params: ModelParams,
    basis: SpectralBasis,
    mass_threshold: float = 0.99,
) -> list[QuasimodeRow]:
    """Project each quasimode datum, evolve it homogeneously and observe it"""
    return [quasimode_row(spec, params, basis, mass_threshold) for spec in specs]
