import numpy as np
import pytest

from src.core import discretization
from src.core.discretization import build_radial_grid
from src.core.spectral import assemble_basis
from src.features.observables import extrapolated_trace
from src.features.verification import (
    CheckResult,
    check_cutoff_bound,
    check_energy_conservation,
    check_hardy,
    check_operator_symmetry,
    check_orthonormality,
    check_parseval,
    random_vanishing_field,
    run_verification,
)
from src.models import ModelParams, VerifyOptions

PARAMS = ModelParams(alpha=1.5, n_theta=3, k_max=4, n_r=32, T=2.0)
OPTIONS = VerifyOptions(n_pairs=5, symmetry_modes=[0, 2], n_fields=4, n_data=3)


@pytest.fixture(scope="module")
def basis():  # noqa: ANN201
    return assemble_basis(PARAMS)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(PARAMS.seed)


class TestChecks:
    def test_operator_symmetry(self, basis, rng) -> None:  # noqa: ANN001
        result = check_operator_symmetry(PARAMS, basis.grid, [0, 1, 8], 5, rng)
        assert result.passed
        assert result.name == "operator_symmetry"

    def test_orthonormality(self, basis) -> None:  # noqa: ANN001
        assert check_orthonormality(basis).passed

    def test_parseval(self, basis, rng) -> None:  # noqa: ANN001
        assert check_parseval(basis, 3, rng).passed

    def test_energy_conservation(self, basis, rng) -> None:  # noqa: ANN001
        assert check_energy_conservation(PARAMS, basis, 3, rng).passed

    def test_hardy(self, rng) -> None:  # noqa: ANN001
        result, reports = check_hardy(PARAMS, [1.0, 1.5], 3, rng)
        assert result.passed
        assert result.worst < 0.0
        assert len(reports) == 6
        assert {r.alpha for r in reports} == {1.0, 1.5}

    def test_cutoff_bound(self, basis, rng) -> None:  # noqa: ANN001
        assert check_cutoff_bound(PARAMS, basis, 3, rng).passed

    def test_vanishing_field_has_no_trace(self, rng) -> None:  # noqa: ANN001
        grid = build_radial_grid(32)
        u = random_vanishing_field(grid, 8, rng)
        assert u.shape == (8, 32)
        np.testing.assert_allclose(extrapolated_trace(u), 0.0, atol=1e-13 * np.abs(u).max())


def test_summary() -> None:
    assert CheckResult("parseval", True, 1e-15, 1e-8).summary.startswith("PASS parseval")
    assert CheckResult("parseval", False, 1.0, 1e-8).summary.startswith("FAIL parseval")


class TestRunVerification:
    def test_all_checks_pass(self, basis, rng) -> None:  # noqa: ANN001
        results, reports = run_verification(PARAMS, basis, OPTIONS, rng)
        assert [r.name for r in results] == [
            "operator_symmetry",
            "orthonormality",
            "parseval",
            "energy_conservation",
            "hardy_poincare",
            "cutoff_forcing_bound",
        ]
        assert all(r.passed for r in results)
        # alpha = 1 is always added to the configured alphas
        assert len(reports) == 4 * OPTIONS.n_fields

    def test_broken_operator_is_detected(self, basis, rng, monkeypatch) -> None:  # noqa: ANN001
        original = discretization.apply_mode_operator
        monkeypatch.setattr(
            discretization,
            "apply_mode_operator",
            lambda op, u: original(op, u) + 0.5 * np.roll(u, 1),
        )
        results, _ = run_verification(PARAMS, basis, OPTIONS, rng)
        failed = [r.name for r in results if not r.passed]
        assert failed == ["operator_symmetry"]
