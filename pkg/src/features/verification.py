"""
Built-in invariant suite behind `degenwave verify`.
"""

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from numpy.random import Generator

from src.core import discretization
from src.core.discretization import RadialGrid, angular_grid, build_radial_grid
from src.core.spectral import SpectralBasis, from_modal
from src.features.evolution import sample_trajectory
from src.features.observables import cutoff_decompose, hardy_check, random_family
from src.models import HardyReport, ModelParams, VerifyOptions
from src.utils.logging_config import get_logger

logger = get_logger(__name__)

SYMMETRY_TOL = 1e-12
ORTHONORMALITY_TOL = 1e-10
PARSEVAL_TOL = 1e-8
ENERGY_TOL = 1e-12
HARDY_TOL = 1e-8
CUTOFF_TOL = 1e-6
TRAJECTORY_SAMPLES = 64


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    worst: float
    tolerance: float

    @property
    def summary(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status} {self.name}: worst={self.worst:.3e} tolerance={self.tolerance:.1e}"


def check_operator_symmetry(
    params: ModelParams, grid: RadialGrid, modes: list[int], n_pairs: int, rng: Generator
) -> CheckResult:
    """|⟨Lu,v⟩ − ⟨u,Lv⟩| ≤ tol·‖u‖‖v‖‖L‖₁ on random vector pairs"""
    worst = 0.0
    for n in modes:
        op = discretization.assemble_mode_operator(grid, params.alpha, n)
        scale = op.norm_1
        for _ in range(n_pairs):
            u = rng.standard_normal(grid.M)
            v = rng.standard_normal(grid.M)
            # looked up on the module so a patched operator is what gets checked
            Lu = discretization.apply_mode_operator(op, u)
            Lv = discretization.apply_mode_operator(op, v)
            gap = abs(Lu @ v - u @ Lv)
            worst = max(worst, gap / (np.linalg.norm(u) * np.linalg.norm(v) * scale))
    return CheckResult("operator_symmetry", worst <= SYMMETRY_TOL, worst, SYMMETRY_TOL)


def check_orthonormality(basis: SpectralBasis) -> CheckResult:
    """Max entry of |Gram − I| for the separated 2D basis"""
    grid = basis.grid
    theta = basis.angular_factors()
    gram_angular = theta.T @ theta * (2.0 * math.pi / basis.P)

    worst = 0.0
    identity = np.eye(basis.k_max)
    for s, (_, n) in enumerate(basis.slots):
        vectors = basis.systems[n].vectors
        gram_radial = vectors @ vectors.T * grid.h
        worst = max(worst, float(np.max(np.abs(gram_angular[s, s] * gram_radial - identity))))
        off = np.abs(np.delete(gram_angular[s], s))
        if off.size:
            worst = max(worst, float(np.max(off) * np.max(np.abs(gram_radial))))
    return CheckResult("orthonormality", worst <= ORTHONORMALITY_TOL, worst, ORTHONORMALITY_TOL)


def _random_coeffs(basis: SpectralBasis, rng: Generator) -> np.ndarray:
    return rng.standard_normal(basis.lambdas.shape) / basis.lambdas


def check_parseval(basis: SpectralBasis, n_data: int, rng: Generator) -> CheckResult:
    """⟨u,u⟩ = Σc² and the weighted H¹ norm = Σλc² for band-limited fields"""
    worst = 0.0
    for _ in range(n_data):
        c = _random_coeffs(basis, rng)
        u = from_modal(c, basis)
        l2 = discretization.inner_l2(u, u, basis.grid)
        h1 = discretization.inner_h1w(u, u, basis.grid, basis.alpha)
        worst = max(
            worst,
            abs(l2 - np.sum(c**2)) / np.sum(c**2),
            abs(h1 - np.sum(basis.lambdas * c**2)) / np.sum(basis.lambdas * c**2),
        )
    return CheckResult("parseval", worst <= PARSEVAL_TOL, worst, PARSEVAL_TOL)


def check_energy_conservation(
    params: ModelParams, basis: SpectralBasis, n_data: int, rng: Generator
) -> CheckResult:
    worst = 0.0
    for init in random_family(basis, n_data, rng):
        traj = sample_trajectory(init, None, basis, params.T, TRAJECTORY_SAMPLES)
        energies = traj.energies(basis)
        drift = float(np.max(np.abs(energies - energies[0])))
        worst = max(worst, drift / max(float(energies[0]), 1.0))
    return CheckResult("energy_conservation", worst <= ENERGY_TOL, worst, ENERGY_TOL)


def random_vanishing_field(grid: RadialGrid, P: int, rng: Generator) -> np.ndarray:
    """(1 − r)·q(r)·p(θ), q quadratic and p a degree-3 trigonometric polynomial

    The radial factor is a cubic, so its extrapolated trace at r = 1 is exact.
    """
    r = grid.centers
    c0, c1, c2 = rng.standard_normal(3)
    radial = (1.0 - r) * (c0 + c1 * r + c2 * r**2)
    theta = angular_grid(P)
    angular = np.full(P, rng.standard_normal())
    for m in range(1, 4):
        a, b = rng.standard_normal(2)
        angular += a * np.cos(m * theta) + b * np.sin(m * theta)
    return np.outer(angular, radial)


def check_hardy(
    params: ModelParams, alphas: list[float], n_fields: int, rng: Generator
) -> tuple[CheckResult, list[HardyReport]]:
    """Hardy (α > 1) and Poincaré (all α, constant 8 at α = 1) on random fields"""
    grid = build_radial_grid(params.n_r)
    reports = []
    worst = 0.0
    for alpha in alphas:
        for _ in range(n_fields):
            report = hardy_check(random_vanishing_field(grid, params.n_angular, rng), grid, alpha)
            reports.append(report)
            bound = report.paper_constant * report.rhs
            if bound > 0.0:
                worst = max(worst, report.lhs / bound - 1.0, report.poincare_lhs / bound - 1.0)
            if not (report.satisfied and report.poincare_satisfied):
                logger.with_context(alpha=alpha).error(
                    f"Hardy check failed: lhs={report.lhs} rhs={report.rhs}"
                )
    passed = all(r.satisfied and r.poincare_satisfied for r in reports)
    # worst is the largest lhs/(C·rhs) − 1 and is negative when every bound has slack
    return CheckResult("hardy_poincare", passed, worst, HARDY_TOL), reports


def check_cutoff_bound(
    params: ModelParams, basis: SpectralBasis, n_data: int, rng: Generator
) -> CheckResult:
    """|g| ≤ C(δ₀)(|φ| + |∂_θφ|), g supported in the strip"""
    worst = 0.0
    in_strip_nodes = np.mod(basis.thetas, 2.0 * math.pi)
    outside = (in_strip_nodes >= 4.0 * params.delta0) & (
        in_strip_nodes <= 2.0 * math.pi - 4.0 * params.delta0
    )
    for _ in range(n_data):
        phi = from_modal(_random_coeffs(basis, rng), basis)
        decomposition = cutoff_decompose(phi, params, basis.grid)
        scale = float(np.max(np.abs(phi)) + np.max(np.abs(decomposition.phi_theta)))
        excess = decomposition.g_bound_excess(phi, params.delta0) / max(scale, 1e-300)
        leak = float(np.max(np.abs(decomposition.g[outside]), initial=0.0))
        worst = max(worst, excess, leak)
    return CheckResult("cutoff_forcing_bound", worst <= CUTOFF_TOL, worst, CUTOFF_TOL)


def run_verification(
    params: ModelParams,
    basis: SpectralBasis,
    options: VerifyOptions,
    rng: Generator,
) -> tuple[list[CheckResult], list[HardyReport]]:
    """Run every check with one seeded generator, in a fixed order"""
    grid = basis.grid
    modes = [n for n in options.symmetry_modes if n >= 0]
    alphas = sorted(set(options.hardy_alphas) | {1.0})

    checks: list[Callable[[], CheckResult]] = [
        lambda: check_operator_symmetry(params, grid, modes, options.n_pairs, rng),
        lambda: check_orthonormality(basis),
        lambda: check_parseval(basis, options.n_data, rng),
        lambda: check_energy_conservation(params, basis, options.n_data, rng),
    ]
    results = [check() for check in checks]
    hardy_result, hardy_reports = check_hardy(params, alphas, options.n_fields, rng)
    results.append(hardy_result)
    results.append(check_cutoff_bound(params, basis, options.n_data, rng))

    for result in results:
        log = logger.info if result.passed else logger.error
        log(result.summary)
    return results, hardy_reports
