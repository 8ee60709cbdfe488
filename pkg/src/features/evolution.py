"""
Exact modal dynamics of ∂_tt φ − div(A∇φ) = f.

Each basis coefficient obeys a″ + λ a = f_b, so the homogeneous flow is a
closed-form rotation and forcing enters through the Duhamel integral.
"""

import math
from dataclasses import dataclass
from typing import Callable, Optional, Protocol

import numpy as np
from numpy.typing import NDArray
from scipy.integrate import simpson

from src.core.geometry import bump_eta, quasimode_radial_residual
from src.core.spectral import ModalCoeffs, SpectralBasis
from src.models import QuasimodeSpec
from src.utils.logging_config import get_logger

logger = get_logger(__name__)

FloatArray = NDArray[np.float64]

RESONANCE_TOL = 1e-9
MIN_SAMPLES = 16


class EvolutionError(ValueError):
    """Invalid time or sample count"""


@dataclass(frozen=True, eq=False)
class InitialData:
    phi0: ModalCoeffs
    phi1: ModalCoeffs

    @classmethod
    def zeros(cls, basis: SpectralBasis) -> "InitialData":
        return cls(phi0=basis.zeros(), phi1=basis.zeros())

    def scaled(self, s: float) -> "InitialData":
        return InitialData(phi0=s * self.phi0, phi1=s * self.phi1)

    def __add__(self, other: "InitialData") -> "InitialData":
        return InitialData(phi0=self.phi0 + other.phi0, phi1=self.phi1 + other.phi1)

    def is_zero(self) -> bool:
        return not (np.any(self.phi0) or np.any(self.phi1))


@dataclass(frozen=True, eq=False)
class ModalState:
    t: float
    a: ModalCoeffs
    adot: ModalCoeffs


class ModalForcing(Protocol):
    def __call__(self, t: float) -> ModalCoeffs: ...


@dataclass(frozen=True, eq=False)
class SampledForcing:
    """Arbitrary forcing given as a function of time returning coefficients"""

    func: Callable[[float], ModalCoeffs]

    def __call__(self, t: float) -> ModalCoeffs:
        return np.asarray(self.func(t), dtype=float)


@dataclass(frozen=True, eq=False)
class SinusoidalForcing:
    """f_b(t) = p_b cos νt + q_b sin νt"""

    cos_coeffs: ModalCoeffs
    sin_coeffs: ModalCoeffs
    frequency: float

    def __call__(self, t: float) -> ModalCoeffs:
        nu = self.frequency
        return self.cos_coeffs * math.cos(nu * t) + self.sin_coeffs * math.sin(nu * t)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """States at the uniform times t_m = mT/n_t, m = 0..n_t"""

    times: FloatArray
    a: FloatArray  # (n_t + 1, slots, k_max)
    adot: FloatArray
    forcing: Optional[ModalForcing] = None

    @property
    def n_t(self) -> int:
        return int(self.times.shape[0]) - 1

    @property
    def T(self) -> float:
        return float(self.times[-1])

    def state(self, m: int) -> ModalState:
        return ModalState(t=float(self.times[m]), a=self.a[m], adot=self.adot[m])

    def energies(self, basis: SpectralBasis) -> FloatArray:
        return 0.5 * np.sum(self.adot**2 + basis.lambdas * self.a**2, axis=(1, 2))


def _check_time(t: float) -> float:
    t = float(t)
    if not (math.isfinite(t) and t >= 0.0):
        raise EvolutionError(f"time must be finite and non-negative, got {t}")
    return t


def _check_init(init: InitialData, basis: SpectralBasis) -> None:
    basis.check_coeffs(init.phi0)
    basis.check_coeffs(init.phi1)


def propagate_homogeneous(init: InitialData, basis: SpectralBasis, t: float) -> ModalState:
    t = _check_time(t)
    _check_init(init, basis)
    omega = np.sqrt(basis.lambdas)
    c, s = np.cos(omega * t), np.sin(omega * t)
    a = init.phi0 * c + init.phi1 * s / omega
    adot = -init.phi0 * omega * s + init.phi1 * c
    return ModalState(t=t, a=a, adot=adot)


def _sinusoidal_response(
    omega: FloatArray, nu: float, t: float
) -> tuple[FloatArray, FloatArray, FloatArray, FloatArray]:
    """Duhamel responses to cos νs and sin νs and their time derivatives"""
    resonant = np.abs(omega - nu) < RESONANCE_TOL
    w = np.where(resonant, 1.0, omega)
    denom = np.where(resonant, 1.0, omega**2 - nu**2)
    cw, sw = np.cos(omega * t), np.sin(omega * t)
    cn, sn = math.cos(nu * t), math.sin(nu * t)

    a_cos = np.where(resonant, t * sw / (2.0 * omega), (cn - cw) / denom)
    adot_cos = np.where(
        resonant, (sw + omega * t * cw) / (2.0 * omega), (omega * sw - nu * sn) / denom
    )
    a_sin = np.where(
        resonant,
        (sw - omega * t * cw) / (2.0 * omega**2),
        (sn - (nu / w) * sw) / denom,
    )
    adot_sin = np.where(resonant, 0.5 * t * sw, nu * (cn - cw) / denom)
    return a_cos, adot_cos, a_sin, adot_sin


def _duhamel_simpson(
    forcing: ModalForcing, omega: FloatArray, t: float, n_t: int
) -> tuple[FloatArray, FloatArray]:
    if t == 0.0:
        return np.zeros_like(omega), np.zeros_like(omega)
    s = np.linspace(0.0, t, n_t + 1)
    f = np.stack([np.asarray(forcing(float(si)), dtype=float) for si in s])
    lag = omega[None, ...] * (t - s)[:, None, None]
    a = simpson(np.sin(lag) / omega * f, x=s, axis=0)
    adot = simpson(np.cos(lag) * f, x=s, axis=0)
    return a, adot


def propagate_forced(
    init: InitialData,
    forcing: Optional[ModalForcing],
    basis: SpectralBasis,
    t: float,
    n_t: int = 64,
) -> ModalState:
    """Homogeneous flow plus the Duhamel integral of the forcing"""
    state = propagate_homogeneous(init, basis, t)
    if forcing is None:
        return state

    omega = np.sqrt(basis.lambdas)
    if isinstance(forcing, SinusoidalForcing):
        a_c, adot_c, a_s, adot_s = _sinusoidal_response(omega, forcing.frequency, state.t)
        a = forcing.cos_coeffs * a_c + forcing.sin_coeffs * a_s
        adot = forcing.cos_coeffs * adot_c + forcing.sin_coeffs * adot_s
    else:
        if n_t <= 0 or n_t % 2:
            raise EvolutionError(f"Duhamel quadrature needs an even sample count, got {n_t}")
        a, adot = _duhamel_simpson(forcing, omega, state.t, n_t)

    return ModalState(t=state.t, a=state.a + a, adot=state.adot + adot)


def energy(state: ModalState, basis: SpectralBasis) -> float:
    """E = ½ Σ_b (ȧ_b² + λ_b a_b²)"""
    return float(0.5 * np.sum(state.adot**2 + basis.lambdas * state.a**2))


def sample_trajectory(
    init: InitialData,
    forcing: Optional[ModalForcing],
    basis: SpectralBasis,
    T: float,
    n_t: int,
) -> Trajectory:
    if n_t < MIN_SAMPLES or n_t % 2:
        raise EvolutionError(f"n_t must be even and at least {MIN_SAMPLES}, got {n_t}")
    T = _check_time(T)

    times = T * np.arange(n_t + 1) / n_t
    if forcing is None:
        # Vectorized closed form over all samples
        _check_init(init, basis)
        omega = np.sqrt(basis.lambdas)
        phase = times[:, None, None] * omega[None, ...]
        c, s = np.cos(phase), np.sin(phase)
        a = init.phi0 * c + init.phi1 * s / omega
        adot = -init.phi0 * omega * s + init.phi1 * c
    else:
        states = [propagate_forced(init, forcing, basis, float(t), n_t) for t in times]
        a = np.stack([st.a for st in states])
        adot = np.stack([st.adot for st in states])

    logger.debug(f"Sampled trajectory on [0, {T}] with {n_t + 1} states")
    return Trajectory(times=times, a=a, adot=adot, forcing=forcing)


def forcing_work(traj: Trajectory) -> float:
    """∫₀^T Σ_b f_b(s) ȧ_b(s) ds by Simpson on the trajectory samples"""
    if traj.forcing is None:
        return 0.0
    power = np.array(
        [np.sum(traj.forcing(float(t)) * traj.adot[m]) for m, t in enumerate(traj.times)]
    )
    return float(simpson(power, x=traj.times))


# Quasimode projections


def _quasimode_radial_coefficients(
    profile: FloatArray, spec: QuasimodeSpec, basis: SpectralBasis
) -> Optional[FloatArray]:
    """⟨profile, R_{n,k}⟩ for the quasimode's angular mode, None outside the basis"""
    if spec.n > basis.n_theta:
        return None
    return basis.systems[spec.n].vectors @ profile * basis.grid.h


def project_quasimode(
    spec: QuasimodeSpec, basis: SpectralBasis, t: float = 0.0
) -> InitialData:
    """Modal projection of (u, ∂_t u)(t) for u = η_ε(r) sin n(θ − t)

    The angular projections are exact: ⟨sin nθ, sin nθ/√π⟩ = √π.
    """
    phi0, phi1 = basis.zeros(), basis.zeros()
    g = _quasimode_radial_coefficients(bump_eta(basis.grid.centers, spec.eps), spec, basis)
    if g is None:
        logger.warning(f"Quasimode n={spec.n} lies outside the basis (N={basis.n_theta})")
        return InitialData(phi0=phi0, phi1=phi1)

    s_cos, s_sin = basis.slots.index(("cos", spec.n)), basis.slots.index(("sin", spec.n))
    root_pi = math.sqrt(math.pi)
    cn, sn = math.cos(spec.n * t), math.sin(spec.n * t)
    # sin n(θ−t) = sin nθ cos nt − cos nθ sin nt
    phi0[s_sin] = root_pi * g * cn
    phi0[s_cos] = -root_pi * g * sn
    # ∂_t u = −n cos n(θ−t) = −n (cos nθ cos nt + sin nθ sin nt)
    phi1[s_cos] = -spec.n * root_pi * g * cn
    phi1[s_sin] = -spec.n * root_pi * g * sn
    return InitialData(phi0=phi0, phi1=phi1)


def quasimode_mass(spec: QuasimodeSpec, basis: SpectralBasis, init: InitialData) -> float:
    """Fraction of the L² mass of (u, ∂_t u)(0) retained by the projection"""
    eta2 = float(np.sum(bump_eta(basis.grid.centers, spec.eps) ** 2) * basis.grid.h)
    # ∫ sin² nθ = ∫ cos² nθ = π
    total = math.pi * eta2 * (1.0 + spec.n**2)
    if total == 0.0:
        return 0.0
    return float((np.sum(init.phi0**2) + np.sum(init.phi1**2)) / total)


def quasimode_forcing(
    spec: QuasimodeSpec, basis: SpectralBasis
) -> SinusoidalForcing:
    """Projection of −∂_r(r^α η′_ε) sin n(θ − t) as a frequency-n sinusoid"""
    p, q = basis.zeros(), basis.zeros()
    profile = quasimode_radial_residual(basis.grid.centers, spec.eps, basis.alpha)
    g = _quasimode_radial_coefficients(profile, spec, basis)
    if g is not None:
        root_pi = math.sqrt(math.pi)
        p[basis.slots.index(("sin", spec.n))] = root_pi * g
        q[basis.slots.index(("cos", spec.n))] = -root_pi * g
    return SinusoidalForcing(cos_coeffs=p, sin_coeffs=q, frequency=float(spec.n))
