import json
import logging
import os
import tempfile
from collections.abc import Iterator
from pathlib import Path
from typing import Any
from unittest import TestCase, mock

import numpy as np
import pytest

from src.core.spectral import assemble_basis
from src.features.evolution import InitialData
from src.features.observables import observability_report, reverify_constant
from src.models import ModelParams
from src.utils.logging_config import (
    CommandFilter,
    CustomJsonFormatter,
    get_logger,
    setup_logging,
)

SMALL = ModelParams(alpha=1.0, n_r=32, n_theta=1, k_max=2, n_t=16, T=1.0)


def make_record(
    msg: str, level: int = logging.INFO, **extra: Any  # noqa: ANN401
) -> logging.LogRecord:
    record = logging.LogRecord(
        name="src.core.spectral",
        level=level,
        pathname="spectral.py",
        lineno=282,
        msg=msg,
        args=(),
        exc_info=None,
    )
    if extra:
        record.extra = extra
    return record


class TestCustomJsonFormatter(TestCase):
    def test_format_basic_record(self) -> None:
        log_data = json.loads(CustomJsonFormatter().format(make_record("Assembled basis")))

        self.assertEqual(log_data["level"], "INFO")
        self.assertEqual(log_data["logger"], "src.core.spectral")
        self.assertEqual(log_data["message"], "Assembled basis")
        self.assertEqual(log_data["module"], "spectral")
        self.assertEqual(log_data["line"], 282)
        self.assertIn("timestamp", log_data)
        self.assertNotIn("command", log_data)

    def test_format_with_exception(self) -> None:
        try:
            raise ValueError("stebz did not converge")
        except ValueError as e:
            record = make_record("Eigensolver failed", level=logging.ERROR)
            record.exc_info = (type(e), e, None)

        log_data = json.loads(CustomJsonFormatter().format(record))

        self.assertEqual(log_data["level"], "ERROR")
        self.assertIn("ValueError: stebz did not converge", log_data["exception"])

    def test_collision_context(self) -> None:
        record = make_record(
            "1 cross-mode eigenvalue collisions",
            level=logging.WARNING,
            collisions=(((0, 2), (2, 1)),),
        )

        log_data = json.loads(CustomJsonFormatter().format(record))

        self.assertEqual(log_data["collisions"], [[[0, 2], [2, 1]]])

    def test_numpy_and_path_context(self) -> None:
        record = make_record(
            "Wrote rows",
            lambdas=np.array([1.4457965, 7.6178157]),
            M=np.int64(512),
            out=Path("results/spectrum"),
        )

        log_data = json.loads(CustomJsonFormatter().format(record))

        self.assertEqual(log_data["lambdas"], [1.4457965, 7.6178157])
        self.assertEqual(log_data["M"], 512)
        self.assertEqual(log_data["out"], str(Path("results/spectrum")))

    def test_command_filter_stamps_records(self) -> None:
        record = make_record("Running audit")
        self.assertTrue(CommandFilter("audit").filter(record))

        log_data = json.loads(CustomJsonFormatter().format(record))

        self.assertEqual(log_data["command"], "audit")


class TestSetupLogging:
    @pytest.fixture
    def log_dir(self) -> Iterator[str]:
        with tempfile.TemporaryDirectory() as tmpdirname:
            yield tmpdirname
            root_logger = logging.getLogger()
            for handler in root_logger.handlers[:]:
                if getattr(handler, "_degenwave", False):
                    root_logger.removeHandler(handler)
                    handler.close()

    def records(self, log_dir: str, name: str) -> list[dict[str, Any]]:
        for handler in logging.getLogger().handlers:
            handler.flush()
        with open(os.path.join(log_dir, name), encoding="utf-8") as f:
            return [json.loads(line) for line in f if line.strip()]

    def test_creates_directory_and_files(self, log_dir: str) -> None:
        target = os.path.join(log_dir, "runs")
        root_logger = setup_logging(log_dir=target)

        assert root_logger.level == logging.DEBUG
        handler_types = [type(h) for h in root_logger.handlers]
        assert logging.StreamHandler in handler_types
        assert logging.handlers.TimedRotatingFileHandler in handler_types  # type: ignore
        assert logging.handlers.RotatingFileHandler in handler_types  # type: ignore
        assert os.path.exists(os.path.join(target, "degenwave.log"))
        assert os.path.exists(os.path.join(target, "error.log"))

    def test_setup_twice_does_not_stack_handlers(self, log_dir: str) -> None:
        setup_logging(log_dir=log_dir)
        root_logger = setup_logging(log_dir=log_dir, command="verify")

        ours = [h for h in root_logger.handlers if getattr(h, "_degenwave", False)]
        assert len(ours) == 3

    def test_collision_warning_reaches_run_log(self, log_dir: str) -> None:
        setup_logging(log_dir=log_dir, command="spectrum")
        with mock.patch(
            "src.core.spectral.find_collisions", return_value=(((0, 2), (2, 1)),)
        ):
            assemble_basis(SMALL)

        [record] = [
            r for r in self.records(log_dir, "degenwave.log") if "collisions" in r
        ]
        assert record["level"] == "WARNING"
        assert record["command"] == "spectrum"
        assert record["collisions"] == [[[0, 2], [2, 1]]]

    def test_below_threshold_context(self, log_dir: str) -> None:
        setup_logging(log_dir=log_dir, command="observe")
        basis = assemble_basis(SMALL)
        observability_report(InitialData.zeros(basis), SMALL, basis, tag="zero")

        [record] = [r for r in self.records(log_dir, "degenwave.log") if r.get("tag") == "zero"]
        assert record["level"] == "WARNING"
        assert record["command"] == "observe"
        assert record["T"] == 1.0
        assert record["threshold"] == pytest.approx(np.sqrt(2.0))

    def test_failed_reverification_goes_to_error_log(self, log_dir: str) -> None:
        setup_logging(log_dir=log_dir, command="observe")
        basis = assemble_basis(SMALL)
        params = SMALL.model_copy(update={"T": 3.0})
        init = InitialData(phi0=basis.zeros(), phi1=basis.zeros())
        init.phi0[0, 0] = 1.0
        report = observability_report(init, params, basis, tag="fresh_0")

        assert not reverify_constant([report], constant=0.0).passed

        [record] = self.records(log_dir, "error.log")
        assert record["command"] == "observe"
        assert record["failures"] == [0]
        assert record["constant"] == 0.0


class TestGetLogger(TestCase):
    def test_get_logger_returns_logger(self) -> None:
        logger = get_logger("src.features.audits")

        self.assertIsInstance(logger, logging.Logger)
        self.assertEqual(logger.name, "src.features.audits")
        self.assertTrue(callable(logger.with_context))

    def test_with_context_returns_adapter(self) -> None:
        adapter = get_logger("src.features.observables").with_context(tag="eigen_cos0_1", T=2.0)

        self.assertIsInstance(adapter, logging.LoggerAdapter)
        self.assertEqual(adapter.extra, {"extra": {"tag": "eigen_cos0_1", "T": 2.0}})

    @mock.patch("logging.LoggerAdapter.info")
    def test_adapter_adds_context_to_log(self, mock_info) -> None:  # noqa: ANN001
        adapter = get_logger("src.features.audits").with_context(mode=(2, 1), M=128)

        adapter.info("Multiplier audit residual 4.3e-03")

        mock_info.assert_called_once_with("Multiplier audit residual 4.3e-03")
