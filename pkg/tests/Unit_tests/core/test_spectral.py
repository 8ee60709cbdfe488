import math
from unittest import TestCase

import numpy as np
import pytest
from scipy.special import jn_zeros

from src.core.discretization import (
    DiscretizationError,
    apply_mode_operator,
    assemble_mode_operator,
    boundary_derivative,
    build_radial_grid,
    inner_h1w,
    inner_l2,
)
from src.core.spectral import (
    BasisElement,
    RadialEigenSystem,
    SpectrumError,
    angular_slots,
    assemble_basis,
    boundary_trace,
    find_collisions,
    from_modal,
    radial_system,
    solve_mode_spectrum,
    to_modal,
)
from src.models import ModelParams


def bessel_oracle(k: int) -> np.ndarray:
    """λ_{0,k} = j_{0,k}²/4 for alpha = 1"""
    return jn_zeros(0, k) ** 2 / 4.0


class TestRadialSpectrum(TestCase):
    def test_bessel_oracle(self) -> None:
        basis = assemble_basis(ModelParams(alpha=1.0, n_r=1024, n_theta=0, k_max=5))
        np.testing.assert_allclose(basis.systems[0].lambdas, bessel_oracle(5), rtol=1e-3)

    def test_known_values(self) -> None:
        lambdas = radial_system(1.0, 1024, 3).lambdas
        np.testing.assert_allclose(lambdas, [1.445796, 7.617816, 18.721751], rtol=1e-3)

    def test_richardson_order(self) -> None:
        ladder = [radial_system(1.0, M, 5).lambdas for M in (128, 256, 512)]
        oracle = bessel_oracle(5)
        for k in range(3):
            coarse, mid, fine = (lam[k] for lam in ladder)
            order = math.log2(abs(coarse - mid) / abs(mid - fine))
            self.assertGreaterEqual(order, 1.8)
            errors = [abs(lam[k] - oracle[k]) for lam in ladder]
            self.assertTrue(errors[0] > errors[1] > errors[2])

    def test_gram_matrix(self) -> None:
        grid = build_radial_grid(256)
        system = solve_mode_spectrum(assemble_mode_operator(grid, 1.5, 0), 16)
        gram = system.vectors @ system.vectors.T * grid.h
        np.testing.assert_allclose(gram, np.eye(16), atol=1e-10)

    def test_eigenpair_residual_and_sign(self) -> None:
        grid = build_radial_grid(128)
        op = assemble_mode_operator(grid, 1.25, 0)
        system = solve_mode_spectrum(op, 4)
        for lam, vec in zip(system.lambdas, system.vectors):
            residual = apply_mode_operator(op, vec) - lam * vec
            self.assertLess(np.linalg.norm(residual), 1e-8 * lam * np.linalg.norm(vec))
        self.assertTrue(np.all(system.vectors[:, 0] > 0.0))
        self.assertTrue(np.all(np.diff(system.lambdas) > 0.0))

    def test_drivers_agree(self) -> None:
        grid = build_radial_grid(64)
        op = assemble_mode_operator(grid, 1.5, 0)
        bisection = solve_mode_spectrum(op, 4)  # k_max ≤ M/8
        full = solve_mode_spectrum(op, 32)
        np.testing.assert_allclose(bisection.lambdas, full.lambdas[:4], rtol=1e-10)
        np.testing.assert_allclose(bisection.vectors, full.vectors[:4], atol=1e-7)

    def test_boundary_slopes(self) -> None:
        grid = build_radial_grid(64)
        system = solve_mode_spectrum(assemble_mode_operator(grid, 1.0, 0), 3)
        np.testing.assert_array_equal(
            system.boundary_slopes, boundary_derivative(system.vectors, grid)
        )

    def test_k_max_out_of_range(self) -> None:
        grid = build_radial_grid(8)
        with self.assertRaises(SpectrumError):
            solve_mode_spectrum(assemble_mode_operator(grid, 1.0, 0), 9)

    def test_cached_system_reused(self) -> None:
        self.assertIs(radial_system(1.5, 96, 4), radial_system(1.5, 96, 4))


class TestBasis(TestCase):
    def test_slot_order(self) -> None:
        self.assertEqual(
            angular_slots(2), (("cos", 0), ("cos", 1), ("sin", 1), ("cos", 2), ("sin", 2))
        )

    def test_counting(self) -> None:
        basis = assemble_basis(ModelParams(n_theta=0, k_max=3, n_r=32))
        self.assertEqual(basis.size, 3)
        self.assertTrue(all(e.branch == "cos" and e.n == 0 for e in basis.elements))

        basis = assemble_basis(ModelParams(n_theta=2, k_max=4, n_r=32))
        self.assertEqual(basis.size, 20)
        self.assertEqual(basis.lambdas.shape, (5, 4))
        self.assertEqual(len(basis.elements), 20)

    def test_mode_shift(self) -> None:
        basis = assemble_basis(ModelParams(n_theta=5, k_max=4, n_r=64))
        shift = basis.systems[5].lambdas - basis.systems[0].lambdas
        np.testing.assert_allclose(shift, 25.0, rtol=1e-13)
        np.testing.assert_allclose(basis.radial_lambdas[-1], basis.systems[0].lambdas)

    def test_k_max_above_grid(self) -> None:
        grid = build_radial_grid(8)
        with self.assertRaises(SpectrumError):
            assemble_basis(ModelParams(n_r=64, k_max=16), grid=grid)

    def test_element_lookup(self) -> None:
        basis = assemble_basis(ModelParams(n_theta=2, k_max=3, n_r=32))
        element = BasisElement(branch="sin", n=2, k=3)
        self.assertEqual(basis.index(element), (4, 2))
        self.assertEqual(basis.lambda_of(element), basis.systems[2].lambdas[2])
        self.assertEqual(element.label, "sin2_3")
        with self.assertRaises(DiscretizationError):
            basis.index(BasisElement(branch="sin", n=0, k=1))
        with self.assertRaises(DiscretizationError):
            basis.index(BasisElement(branch="cos", n=1, k=4))

    def test_check_coeffs(self) -> None:
        basis = assemble_basis(ModelParams(n_theta=1, k_max=2, n_r=16))
        with self.assertRaises(DiscretizationError):
            basis.check_coeffs(np.zeros((2, 2)))
        bad = basis.zeros()
        bad[0, 0] = math.nan
        with self.assertRaises(DiscretizationError):
            basis.check_coeffs(bad)


def test_find_collisions() -> None:
    vectors = np.eye(2)
    slopes = np.zeros(2)
    systems = (
        RadialEigenSystem(
            n=0, lambdas=np.array([1.0, 5.0]), vectors=vectors, boundary_slopes=slopes
        ),
        RadialEigenSystem(
            n=1, lambdas=np.array([5.0 + 1e-12, 9.0]), vectors=vectors, boundary_slopes=slopes
        ),
    )
    assert find_collisions(systems) == (((0, 2), (1, 1)),)


class TestTransforms:
    @pytest.fixture
    def basis(self):  # noqa: ANN201
        return assemble_basis(ModelParams(alpha=1.5, n_theta=3, k_max=6, n_r=64))

    def test_unit_round_trip(self, basis) -> None:  # noqa: ANN001
        element = BasisElement(branch="sin", n=2, k=3)
        coeffs = to_modal(from_modal(basis.unit(element), basis), basis)
        np.testing.assert_allclose(coeffs, basis.unit(element), atol=1e-10)

    def test_zero_field(self, basis) -> None:  # noqa: ANN001
        np.testing.assert_array_equal(to_modal(np.zeros((basis.P, 64)), basis), 0.0)

    def test_separated_product(self, basis) -> None:  # noqa: ANN001
        element = BasisElement(branch="cos", n=1, k=2)
        field = from_modal(basis.unit(element), basis)
        expected = np.outer(np.cos(basis.thetas) / math.sqrt(math.pi), basis.systems[1].vectors[1])
        np.testing.assert_allclose(field, expected, atol=1e-12)

    def test_orthonormal_pairs(self, basis) -> None:  # noqa: ANN001
        rng = np.random.default_rng(0)
        elements = basis.elements
        for _ in range(10):
            i, j = rng.integers(len(elements), size=2)
            u = from_modal(basis.unit(elements[i]), basis)
            v = from_modal(basis.unit(elements[j]), basis)
            assert inner_l2(u, v, basis.grid) == pytest.approx(float(i == j), abs=1e-10)

    def test_h1_norm_of_eigenfunction(self, basis) -> None:  # noqa: ANN001
        element = BasisElement(branch="sin", n=3, k=2)
        u = from_modal(basis.unit(element), basis)
        h1 = inner_h1w(u, u, basis.grid, basis.alpha)
        assert h1 == pytest.approx(basis.lambda_of(element), rel=1e-10)

    def test_angular_derivative_synthesis(self, basis) -> None:  # noqa: ANN001
        element = BasisElement(branch="sin", n=2, k=1)
        field = from_modal(basis.unit(element), basis, order=1)
        expected = np.outer(
            2.0 * np.cos(2 * basis.thetas) / math.sqrt(math.pi), basis.systems[2].vectors[0]
        )
        np.testing.assert_allclose(field, expected, atol=1e-12)

    def test_boundary_trace(self, basis) -> None:  # noqa: ANN001
        coeffs = np.random.default_rng(4).standard_normal(basis.lambdas.shape)
        np.testing.assert_allclose(
            boundary_trace(coeffs, basis),
            boundary_derivative(from_modal(coeffs, basis), basis.grid),
            rtol=1e-10,
            atol=1e-8,
        )
