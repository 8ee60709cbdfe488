import argparse
import asyncio
import os
import sys
import time
from collections.abc import Awaitable, Callable, Sequence
from pathlib import Path
from typing import Any, Optional, TypeVar

import numpy as np
from dotenv import load_dotenv
from pydantic import ValidationError

from src import __version__
from src.core.discretization import DiscretizationError
from src.core.geometry import CHI_PROFILE, ZETA_PROFILE
from src.core.spectral import BasisElement, SpectrumError, assemble_basis, spectrum_cache
from src.features import reporting
from src.features.audits import identity_audit, multiplier_audit
from src.features.evolution import EvolutionError, InitialData, sample_trajectory
from src.features.observables import (
    ObservationError,
    constant_from_reports,
    eigenmode_family,
    hidden_regularity_ratio,
    observability_report,
    quasimode_row,
    random_family,
    reverify_constant,
)
from src.features.verification import run_verification
from src.models import (
    ConfigError,
    ModelParams,
    ParamsError,
    RunConfig,
    RunMetadata,
    validate_params,
)
from src.utils.logging_config import get_logger, setup_logging

logger = get_logger(__name__)

T = TypeVar("T")

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2

PARAM_FLAGS = {
    "alpha": float,
    "T": float,
    "delta0": float,
    "n_r": int,
    "n_theta": int,
    "k_max": int,
    "n_t": int,
    "seed": int,
}


def thread_limit() -> int:
    """DEGENWAVE_THREADS, with 0 meaning one worker per CPU"""
    raw = os.getenv("DEGENWAVE_THREADS", "0").strip() or "0"
    try:
        limit = int(raw)
    except ValueError as e:
        raise ConfigError(f"DEGENWAVE_THREADS must be an integer, got {raw!r}") from e
    if limit < 0:
        raise ConfigError("DEGENWAVE_THREADS must be non-negative")
    return limit or os.cpu_count() or 1


async def gather_limited(jobs: Sequence[Callable[[], T]], limit: int) -> list[T]:
    """Run blocking jobs in worker threads; results keep submission order"""
    semaphore = asyncio.Semaphore(limit)

    async def run(job: Callable[[], T]) -> T:
        async with semaphore:
            return await asyncio.to_thread(job)

    return list(await asyncio.gather(*(run(job) for job in jobs)))


def write_outputs(
    config: RunConfig,
    command: str,
    header: Sequence[str],
    rows: Sequence[dict[str, Any]],
    results: dict[str, Any],
    started: float,
) -> Path:
    out = config.out or Path("results") / command
    csv_path, meta_path = reporting.output_paths(out)
    reporting.write_rows_csv(csv_path, header, rows)
    reporting.write_metadata(
        meta_path,
        RunMetadata(
            version=__version__,
            command=command,
            config=config.model_dump(mode="json"),
            chi_profile=CHI_PROFILE,
            zeta_profile=ZETA_PROFILE,
            seed=config.params.seed,
            results=results,
            wall_clock_seconds=time.perf_counter() - started,
        ),
    )
    return out


# Commands


async def cmd_spectrum(config: RunConfig) -> int:
    """Tabulate λ_{n,k} and boundary slopes for n = 0..N"""
    started = time.perf_counter()
    params = config.params
    basis = assemble_basis(params)

    rows = [
        {"n": n, "k": k + 1, "lambda": lam, "boundary_slope": slope}
        for n in range(params.n_theta + 1)
        for k, (lam, slope) in enumerate(
            zip(basis.systems[n].lambdas.tolist(), basis.systems[n].boundary_slopes.tolist())
        )
    ]
    write_outputs(
        config,
        "spectrum",
        reporting.SPECTRUM_HEADER,
        rows,
        {"rows": len(rows), "collisions": [list(c) for c in basis.collisions]},
        started,
    )
    return EXIT_OK


async def cmd_observe(config: RunConfig) -> int:
    """Empirical observability constant over eigenmode and random data"""
    started = time.perf_counter()
    params, options = config.params, config.observe
    basis = assemble_basis(params)
    rng = np.random.default_rng(params.seed)

    eigen = eigenmode_family(basis, options.n_eigenmodes)
    flat = np.argsort(basis.lambdas.ravel(), kind="stable")[: len(eigen)]
    members: list[tuple[str, InitialData]] = [
        (f"eigen_{basis.elements[i].label}", init) for i, init in zip(flat, eigen)
    ]
    members += [
        (f"random_{i}", init)
        for i, init in enumerate(random_family(basis, options.n_random, rng))
    ]
    if options.include_zero:
        members.append(("zero", InitialData.zeros(basis)))
    if not members:
        raise ConfigError("observe needs at least one family member")

    def observe(tag: str, init: InitialData) -> tuple[Any, float]:
        traj = sample_trajectory(init, None, basis, params.T, params.n_t)
        report = observability_report(init, params, basis, tag=tag, traj=traj)
        return report, hidden_regularity_ratio(traj, init, basis)

    outcomes = await gather_limited(
        [lambda t=tag, d=init: observe(t, d) for tag, init in members], thread_limit()
    )
    reports = [report for report, _ in outcomes]
    estimate = constant_from_reports(reports)
    hidden_max = max(hidden for _, hidden in outcomes)

    # fresh draws continue the seeded stream after the fitted family
    fresh = await gather_limited(
        [
            lambda i=i, d=init: observability_report(d, params, basis, tag=f"fresh_{i}")
            for i, init in enumerate(random_family(basis, options.n_fresh, rng))
        ],
        thread_limit(),
    )
    check = reverify_constant(fresh, estimate.value)

    rows: list[dict[str, Any]] = []
    for i, (report, hidden) in enumerate(outcomes):
        row = reporting.observation_row(report)
        row.update(excluded=i in estimate.excluded, hidden_regularity=hidden)
        rows.append(row)
    rows.append(
        {
            "alpha": params.alpha,
            "T": params.T,
            "delta0": params.delta0,
            "tag": "summary",
            "below_threshold": params.below_threshold,
            "C_emp": estimate.value,
            "hidden_regularity": hidden_max,
        }
    )

    logger.info(
        f"Threshold time {params.threshold_time:.17g}; C_emp={estimate.value:.6g} "
        f"over {len(reports) - len(estimate.excluded)} members"
    )
    write_outputs(
        config,
        "observe",
        reporting.OBSERVE_HEADER,
        rows,
        {
            "C_emp": estimate.value,
            "excluded": estimate.excluded,
            "threshold_time": params.threshold_time,
            "below_threshold": params.below_threshold,
            "hidden_regularity_max": hidden_max,
            "reverification": {**check.model_dump(), "passed": check.passed},
        },
        started,
    )
    if not check.passed:
        logger.error(f"C_emp={estimate.value:.6g} fails on fresh data {check.failures}")
        return EXIT_FAILED
    return EXIT_OK


async def cmd_quasimode(config: RunConfig) -> int:
    """Observe projected quasimodes concentrating near r = 0"""
    started = time.perf_counter()
    params, options = config.params, config.quasimode
    basis = assemble_basis(params)

    rows = await gather_limited(
        [
            lambda s=spec: quasimode_row(s, params, basis, options.mass_threshold)
            for spec in options.specs
        ],
        thread_limit(),
    )
    write_outputs(
        config,
        "quasimode",
        reporting.QUASIMODE_HEADER,
        [reporting.quasimode_row_dict(row) for row in rows],
        {
            "flagged": [row.n for row in rows if row.flagged],
            "ratio_top_only": [row.report.ratio_top_only for row in rows],
            "threshold_time": params.threshold_time,
        },
        started,
    )
    return EXIT_OK


def _audit_job(params: ModelParams, n: int, k: int, n_t: int) -> tuple[Any, Any]:
    basis = assemble_basis(params)
    element = BasisElement(branch="cos", n=n, k=k)
    init = InitialData(phi0=basis.unit(element), phi1=basis.zeros())
    traj = sample_trajectory(init, None, basis, params.T, n_t)
    audit = multiplier_audit(traj, params, basis, mode=(n, k))
    return audit, identity_audit(traj, params, basis)


async def cmd_audit(config: RunConfig) -> int:
    """Multiplier identity audit over a refinement ladder"""
    started = time.perf_counter()
    params, options = config.params, config.audit

    jobs: list[Callable[[], tuple[Any, Any]]] = []
    for n, k in options.modes:
        for M, n_theta in options.ladder:
            if n > n_theta:
                raise ConfigError(f"mode n={n} is not resolved with n_theta={n_theta}")
            rung = validate_params(
                {**params.model_dump(), "n_r": M, "n_theta": n_theta, "k_max": k}
            )
            jobs.append(lambda p=rung, nn=n, kk=k: _audit_job(p, nn, kk, options.n_t))

    outcomes = await gather_limited(jobs, thread_limit())

    rows = [reporting.audit_row(audit) for audit, _ in outcomes]
    identity_rows = [
        row for audit, residuals in outcomes for row in reporting.identity_rows(audit, residuals)
    ]
    decreasing = {}
    for n, k in options.modes:
        ladder = [a.residual_rel for a, _ in outcomes if (a.n, a.k) == (n, k)]
        decreasing[f"{n}_{k}"] = all(b < a for a, b in zip(ladder, ladder[1:]))

    out = write_outputs(
        config,
        "audit",
        reporting.AUDIT_HEADER,
        rows,
        {
            "ladder_decreasing": decreasing,
            "audits": len(rows),
            "term_breakdown": [reporting.breakdown_entry(audit) for audit, _ in outcomes],
        },
        started,
    )
    reporting.write_rows_csv(
        Path(f"{out}.identities.csv"), reporting.IDENTITY_HEADER, identity_rows
    )
    return EXIT_OK


async def cmd_verify(config: RunConfig) -> int:
    """Run the built-in invariant checks"""
    started = time.perf_counter()
    params = config.params
    basis = assemble_basis(params)
    rng = np.random.default_rng(params.seed)

    checks, hardy_reports = run_verification(params, basis, config.verify, rng)
    for check in checks:
        print(check.summary)

    failed = [check.name for check in checks if not check.passed]
    out = write_outputs(
        config,
        "verify",
        reporting.VERIFY_HEADER,
        [
            {"check": c.name, "passed": c.passed, "worst": c.worst, "tolerance": c.tolerance}
            for c in checks
        ],
        {"failed": failed, "threshold_time": params.threshold_time},
        started,
    )
    reporting.write_rows_csv(
        Path(f"{out}.hardy.csv"),
        reporting.HARDY_HEADER,
        [reporting.hardy_row(r) for r in hardy_reports],
    )

    if failed:
        print(f"degenwave: invariant checks failed: {', '.join(failed)}", file=sys.stderr)
        return EXIT_FAILED
    return EXIT_OK


COMMANDS: dict[str, Callable[[RunConfig], Awaitable[int]]] = {
    "spectrum": cmd_spectrum,
    "observe": cmd_observe,
    "quasimode": cmd_quasimode,
    "audit": cmd_audit,
    "verify": cmd_verify,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-c", "--config", type=Path, help="JSON run configuration")
    common.add_argument("--out", type=Path, help="Output prefix for <out>.csv and <out>.meta.json")
    for name, kind in PARAM_FLAGS.items():
        common.add_argument(f"--{name.replace('_', '-')}", dest=name, type=kind)

    parser = argparse.ArgumentParser(
        prog="degenwave", description="Degenerate wave equation laboratory"
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="command", required=True)
    for name, handler in COMMANDS.items():
        subparsers.add_parser(name, parents=[common], help=(handler.__doc__ or name).strip())
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    overrides = {name: getattr(args, name) for name in PARAM_FLAGS}
    config = RunConfig.from_json(args.config, overrides)
    if args.out is not None:
        config = config.model_copy(update={"out": args.out})
    return config


def main(argv: Optional[Sequence[str]] = None) -> int:
    # Load environment variables from .env file if present
    load_dotenv()

    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse already printed the usage error on stderr
        return int(e.code) if isinstance(e.code, int) else EXIT_CONFIG

    setup_logging(os.getenv("DEGENWAVE_LOG_DIR", "logs"), command=args.command)
    if cache_name := os.getenv("DEGENWAVE_CACHE"):
        spectrum_cache.persist_to(cache_name)

    try:
        config = resolve_config(args)
        logger.info(
            f"Running {args.command} with {config.config_source}; "
            f"threshold time {config.params.threshold_time:.6f}"
        )
        return asyncio.run(COMMANDS[args.command](config))
    except (ValidationError, ParamsError, ConfigError, DiscretizationError, EvolutionError) as e:
        print(f"degenwave: configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (SpectrumError, ObservationError) as e:
        print(f"degenwave: {e}", file=sys.stderr)
        return EXIT_FAILED


def cli() -> None:
    """Command Line Interface entry point"""
    sys.exit(main())


if __name__ == "__main__":
    cli()
