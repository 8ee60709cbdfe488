# models.py
import json
import math
from collections.abc import Mapping
from pathlib import Path
from typing import Any, Optional

from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    ValidationError,
    field_validator,
    model_validator,
)

from src.utils.logging_config import get_logger

logger = get_logger(__name__)

DELTA0_MAX = 1.0 / 32.0
SEED_MAX = 2**64 - 1


class ParamsError(ValueError):
    """A ModelParams invariant is violated"""


class ConfigError(ValueError):
    """The run configuration cannot be resolved"""


class ModelParams(BaseModel):
    """Physical and discretization parameters of one run"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    alpha: float = 1.0
    delta0: float = 0.02
    T: float = 2.0 * math.sqrt(2.0)
    n_theta: int = 8
    n_r: int = 256
    n_t: int = 64
    k_max: int = 16
    seed: int = 0

    @model_validator(mode="after")
    def check_invariants(self) -> "ModelParams":
        if violation := first_violation(self):
            raise ValueError(violation)
        return self

    @property
    def n_angular(self) -> int:
        """Number of uniform angular samples P"""
        return 4 * max(self.n_theta, 1)

    @property
    def threshold_time(self) -> float:
        return threshold_time(self.alpha)

    @property
    def below_threshold(self) -> bool:
        return self.T <= self.threshold_time


def threshold_time(alpha: float) -> float:
    """Observation time above which the mixed inequality is asserted"""
    return math.sqrt(2.0) / (2.0 - alpha)


def first_violation(params: ModelParams) -> Optional[str]:
    """Return the message of the first violated invariant, if any"""
    if not 1.0 <= params.alpha < 2.0:
        return "alpha must lie in [1,2)"
    if not 0.0 < params.delta0 < DELTA0_MAX:
        return "delta0 must lie in (0,1/32)"
    if not (params.T > 0.0 and math.isfinite(params.T)):
        return "T must be positive"
    if params.n_theta < 0:
        return "n_theta must be a non-negative integer"
    if params.n_r < 4:
        return "n_r must be at least 4"
    if params.n_t <= 0 or params.n_t % 2:
        return "n_t must be a positive even integer"
    if not 1 <= params.k_max <= params.n_r:
        return "k_max must lie in [1, n_r]"
    if not 0 <= params.seed <= SEED_MAX:
        return "seed must be a 64-bit unsigned integer"
    return None


def validate_params(raw: ModelParams | Mapping[str, Any]) -> ModelParams:
    """Return the params unchanged if every invariant holds

    Raises ParamsError naming the first violated invariant.
    """
    if isinstance(raw, ModelParams):
        if violation := first_violation(raw):
            raise ParamsError(violation)
        return raw

    try:
        return ModelParams.model_validate(dict(raw))
    except ValidationError as e:
        error = e.errors()[0]
        if isinstance(cause := error.get("ctx", {}).get("error"), ValueError):
            raise ParamsError(str(cause)) from e
        field = ".".join(str(part) for part in error["loc"]) or "params"
        raise ParamsError(f"{field}: {error['msg']}") from e


class QuasimodeSpec(BaseModel):
    """Quasimode u = η_ε(r) sin n(θ − t)"""

    model_config = ConfigDict(frozen=True)

    n: int = Field(..., ge=1)
    eps: float

    @field_validator("eps")
    @classmethod
    def check_eps(cls, v: float) -> float:
        if not 0.0 < v < 0.25:
            raise ValueError("eps must lie in (0,1/4)")
        return v


# Per-command option sections


class SpectrumOptions(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ObserveOptions(BaseModel):
    model_config = ConfigDict(extra="forbid")

    n_eigenmodes: int = Field(50, ge=0)
    n_random: int = Field(20, ge=0)
    n_fresh: int = Field(20, ge=0)
    include_zero: bool = False


class QuasimodeOptions(BaseModel):
    model_config = ConfigDict(extra="forbid")

    specs: list[QuasimodeSpec] = Field(
        default_factory=lambda: [
            QuasimodeSpec(n=n, eps=1.0 / 16.0) for n in (4, 8, 16, 32)
        ]
    )
    mass_threshold: float = Field(0.99, gt=0.0, le=1.0)


class AuditOptions(BaseModel):
    model_config = ConfigDict(extra="forbid")

    modes: list[tuple[int, int]] = Field(
        default_factory=lambda: [(n, k) for n in (2, 4, 8) for k in (1, 2, 4)]
    )
    ladder: list[tuple[int, int]] = Field(
        default_factory=lambda: [(128, 16), (256, 32), (512, 64)]
    )
    n_t: int = Field(256, ge=16)

    @field_validator("modes")
    @classmethod
    def check_modes(cls, v: list[tuple[int, int]]) -> list[tuple[int, int]]:
        for n, k in v:
            if n < 0 or k < 1:
                raise ValueError(f"invalid eigenmode selection ({n},{k})")
        return v

    @field_validator("n_t")
    @classmethod
    def check_even(cls, v: int) -> int:
        if v % 2:
            raise ValueError("audit n_t must be even")
        return v


class VerifyOptions(BaseModel):
    model_config = ConfigDict(extra="forbid")

    n_pairs: int = Field(100, ge=1)
    symmetry_modes: list[int] = Field(default_factory=lambda: [0, 1, 8])
    n_fields: int = Field(100, ge=1)
    n_data: int = Field(20, ge=1)
    hardy_alphas: list[float] = Field(default_factory=lambda: [1.25, 1.5, 1.75])


SECTIONS = ("spectrum", "observe", "quasimode", "audit", "verify")


class RunConfig(BaseModel):
    """Fully resolved configuration of one CLI invocation"""

    params: ModelParams = Field(default_factory=ModelParams)
    spectrum: SpectrumOptions = Field(default_factory=SpectrumOptions)
    observe: ObserveOptions = Field(default_factory=ObserveOptions)
    quasimode: QuasimodeOptions = Field(default_factory=QuasimodeOptions)
    audit: AuditOptions = Field(default_factory=AuditOptions)
    verify: VerifyOptions = Field(default_factory=VerifyOptions)
    out: Optional[Path] = None
    config_source: str = "inline flags"

    @classmethod
    def from_json(
        cls, json_path: Optional[Path], overrides: Optional[Mapping[str, Any]] = None
    ) -> "RunConfig":
        """Load a JSON document and apply flag overrides on top of it"""
        raw_data: dict[str, Any] = {}
        if json_path is not None:
            try:
                with open(json_path, encoding="utf-8") as f:
                    raw_data = json.load(f)
            except (OSError, json.JSONDecodeError) as e:
                raise ConfigError(f"Cannot read config {json_path}: {e}") from e
            if not isinstance(raw_data, dict):
                raise ConfigError("Config document must be a JSON object")

        sections = {name: raw_data.pop(name, {}) for name in SECTIONS}
        out = raw_data.pop("out", None)
        raw_params = {**raw_data, **{k: v for k, v in (overrides or {}).items() if v is not None}}

        params = validate_params(raw_params)
        logger.debug(f"Resolved params: {params.model_dump()}")

        return cls(
            params=params,
            out=Path(out) if out is not None else None,
            config_source=str(json_path) if json_path is not None else "inline flags",
            **sections,
        )


# Report value objects


class ObservationReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    alpha: float
    T: float
    delta0: float
    tag: str
    E0: float
    O_Gamma: float
    O_omega: float
    threshold_term: float
    ratio_mixed: float
    ratio_top_only: float
    below_threshold: bool

    @model_validator(mode="after")
    def check_signs(self) -> "ObservationReport":
        if min(self.E0, self.O_Gamma, self.O_omega) < 0.0:
            raise ValueError("energies and observations must be non-negative")
        return self


class ConstantEstimate(BaseModel):
    """Empirical observability constant over a family of initial data"""

    value: float
    reports: list[ObservationReport]
    excluded: list[int] = Field(default_factory=list)


class Reverification(BaseModel):
    """Fresh data checked against threshold_term ≤ 2·C·(O_Γ + O_ω)"""

    model_config = ConfigDict(frozen=True)

    constant: float
    checked: int
    worst_ratio: float
    failures: list[int] = Field(default_factory=list)
    enforced: bool = True

    @property
    def passed(self) -> bool:
        return not (self.enforced and self.failures)


class HardyReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    alpha: float
    lhs: float
    rhs: float
    paper_constant: float
    satisfied: bool
    poincare_lhs: float = 0.0
    poincare_satisfied: bool = True
    weighted_ratio: Optional[float] = None


class MultiplierAudit(BaseModel):
    model_config = ConfigDict(frozen=True)

    alpha: float
    n: int
    k: int
    n_theta: int
    M: int
    B1: float
    B2: float
    B3: float
    residual_rel: float
    equation_residual_rel: float
    term_breakdown: dict[str, float]
    energy_identity_residual: float
    energy_split_ok: bool
    chart_leak: float


class IdentityResidual(BaseModel):
    """One integration-by-parts identity: lhs should equal rhs"""

    model_config = ConfigDict(frozen=True)

    name: str
    lhs: float
    rhs: float
    residual: float


class QuasimodeRow(BaseModel):
    model_config = ConfigDict(frozen=True)

    n: int
    eps: float
    projection_mass: float
    flagged: bool
    report: ObservationReport


class RunMetadata(BaseModel):
    version: str
    command: str
    config: dict[str, Any]
    chi_profile: str
    zeta_profile: str
    seed: int
    results: dict[str, Any] = Field(default_factory=dict)
    wall_clock_seconds: float = 0.0
