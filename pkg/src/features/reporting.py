# reporting.py
import csv
import json
import math
import os
from collections.abc import Iterable, Mapping, Sequence
from pathlib import Path
from typing import Any

from src.models import (
    HardyReport,
    IdentityResidual,
    MultiplierAudit,
    ObservationReport,
    QuasimodeRow,
    RunMetadata,
)
from src.utils.logging_config import get_logger

logger = get_logger(__name__)

SPECTRUM_HEADER = ("n", "k", "lambda", "boundary_slope")
OBSERVATION_HEADER = (
    "alpha",
    "T",
    "delta0",
    "tag",
    "E0",
    "O_Gamma",
    "O_omega",
    "threshold_term",
    "ratio_mixed",
    "ratio_top_only",
    "below_threshold",
)
OBSERVE_HEADER = OBSERVATION_HEADER + ("excluded", "C_emp", "hidden_regularity")
QUASIMODE_HEADER = ("n", "eps", "projection_mass", "flagged") + OBSERVATION_HEADER
AUDIT_HEADER = (
    "alpha",
    "n",
    "k",
    "n_theta",
    "M",
    "B1",
    "B2",
    "B3",
    "residual_rel",
    "equation_residual_rel",
    "energy_identity_residual",
    "energy_split_ok",
    "chart_leak",
)
IDENTITY_HEADER = ("alpha", "n", "k", "n_theta", "M", "identity", "lhs", "rhs", "residual")
HARDY_HEADER = ("alpha", "lhs", "rhs", "paper_constant", "satisfied")
VERIFY_HEADER = ("check", "passed", "worst", "tolerance")


def format_value(value: Any) -> str:  # noqa: ANN401
    """Round-trip decimal text: 17 significant digits, lowercase booleans"""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return f"{value:.17g}"
    if value is None:
        return ""
    return str(value)


def output_paths(out: Path) -> tuple[Path, Path]:
    """<out>.csv and <out>.meta.json"""
    return Path(f"{out}.csv"), Path(f"{out}.meta.json")


def write_rows_csv(
    path: Path, header: Sequence[str], rows: Iterable[Mapping[str, Any]]
) -> int:
    """Write rows in the given order; the header is written even without rows"""
    os.makedirs(path.parent or Path("."), exist_ok=True)
    count = 0
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=list(header), lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({key: format_value(row.get(key)) for key in header})
            count += 1
    logger.info(f"Wrote {count} rows to {path}")
    return count


def write_metadata(path: Path, metadata: RunMetadata) -> None:
    os.makedirs(path.parent or Path("."), exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(metadata.model_dump(mode="json"), f, indent=2, sort_keys=True)
        f.write("\n")


# Row builders


def observation_row(report: ObservationReport) -> dict[str, Any]:
    return report.model_dump()


def quasimode_row_dict(row: QuasimodeRow) -> dict[str, Any]:
    return {
        "n": row.n,
        "eps": row.eps,
        "projection_mass": row.projection_mass,
        "flagged": row.flagged,
        **row.report.model_dump(),
    }


def audit_row(audit: MultiplierAudit) -> dict[str, Any]:
    return audit.model_dump(exclude={"term_breakdown"})


def breakdown_entry(audit: MultiplierAudit) -> dict[str, Any]:
    """Sub-terms of B1 and B2 keyed by mode and rung, for the run metadata"""
    keys = {"n": audit.n, "k": audit.k, "n_theta": audit.n_theta, "M": audit.M}
    return {**keys, **audit.term_breakdown}


def identity_rows(
    audit: MultiplierAudit, residuals: Sequence[IdentityResidual]
) -> list[dict[str, Any]]:
    keys = {"alpha": audit.alpha, "n": audit.n, "k": audit.k}
    keys.update(n_theta=audit.n_theta, M=audit.M)
    return [
        {**keys, "identity": r.name, "lhs": r.lhs, "rhs": r.rhs, "residual": r.residual}
        for r in residuals
    ]


def hardy_row(report: HardyReport) -> dict[str, Any]:
    return report.model_dump()
