import math

import numpy as np
import pytest

from activescalar.coupling import (
    CouplingSpec, check_admissibility, check_divergence_free, dyadic_shell_samples,
    evaluate_symbol, even_anisotropic_coupling, non_solenoidal_coupling, odd_symbol_coupling,
    velocity, verify_symbol_order, zero_coupling,
)
from activescalar.errors import ConfigurationError
from activescalar.spectral import ScalarField, make_grid, riesz_symbol

BUILTINS = [
    CouplingSpec("sqg"),
    CouplingSpec("modified_sqg", beta=1.4),
    CouplingSpec("log_field", chi=1.0),
    CouplingSpec("log_power", sigma=1.2, chi=0.5),
    CouplingSpec("loglog_power", sigma=0.8, chi=2.0),
]


def random_field(grid, seed):
    return ScalarField(grid, values=np.random.default_rng(seed).standard_normal(grid.shape))


class TestEvaluateSymbol:
    def test_sqg_unit_frequency(self):
        # u = (-R2 theta, R1 theta) with R_j symbol -i xi_j/|xi|
        p = evaluate_symbol(CouplingSpec("sqg"), [1.0, 0.0])
        np.testing.assert_allclose(p, [0.0, -1j], atol=1e-15)

    def test_sqg_matches_riesz_symbols(self, grid64):
        spec = CouplingSpec("sqg")
        for xi in [(1.0, 0.0), (0.0, 3.0), (2.0, -5.0)]:
            p = evaluate_symbol(spec, xi)
            mag = math.hypot(*xi)
            r1, r2 = -1j * xi[0] / mag, -1j * xi[1] / mag
            np.testing.assert_allclose(p, [-r2, r1], atol=1e-15)

    @pytest.mark.parametrize("spec", BUILTINS, ids=lambda s: s.family)
    def test_zero_frequency(self, spec):
        assert np.all(evaluate_symbol(spec, [0.0, 0.0]) == 0)

    def test_modified_beta_one_equals_sqg(self, grid64):
        rng = np.random.default_rng(0)
        for xi in rng.normal(size=(20, 2)) * 10:
            np.testing.assert_array_equal(
                evaluate_symbol(CouplingSpec("modified_sqg", beta=1.0), xi),
                evaluate_symbol(CouplingSpec("sqg"), xi))
        u_mod = velocity(CouplingSpec("modified_sqg", beta=1.0), random_field(grid64, 1))
        u_sqg = velocity(CouplingSpec("sqg"), random_field(grid64, 1))
        for a, b in zip(u_mod, u_sqg):
            np.testing.assert_array_equal(a.coefficients, b.coefficients)

    def test_odd_scalar_symbols_give_even_vector_symbol(self):
        spec = odd_symbol_coupling()
        for xi in np.random.default_rng(1).normal(size=(10, 2)):
            np.testing.assert_allclose(evaluate_symbol(spec, -xi), evaluate_symbol(spec, xi),
                                       atol=1e-15)

    def test_even_scalar_symbols_give_odd_vector_symbol(self):
        spec = CouplingSpec("sqg")
        for xi in np.random.default_rng(2).normal(size=(10, 2)):
            np.testing.assert_allclose(evaluate_symbol(spec, -xi), -evaluate_symbol(spec, xi),
                                       atol=1e-15)

    def test_custom_without_evaluators(self):
        with pytest.raises(ConfigurationError):
            CouplingSpec("custom", beta=1.0)

    def test_perp_family_needs_matrix_in_3d(self):
        with pytest.raises(ConfigurationError):
            evaluate_symbol(CouplingSpec("sqg"), [1.0, 0.0, 0.0])

    def test_explicit_matrix_in_3d(self):
        a = ((0, -1, 0), (1, 0, 0), (0, 0, 0))
        p = evaluate_symbol(CouplingSpec("sqg", matrix_a=a), [1.0, 0.0, 0.0])
        np.testing.assert_allclose(p, [0, -1j, 0], atol=1e-15)

    @pytest.mark.parametrize("spec", BUILTINS, ids=lambda s: s.family)
    def test_field_order_bound(self, spec):
        # |P(xi)| <= C |xi|^(beta - 1) uniformly on dyadic shells
        ratios = [np.linalg.norm(evaluate_symbol(spec, xi)) * np.linalg.norm(xi) ** (1 - spec.order)
                  for xi in dyadic_shell_samples(2)]
        assert max(ratios) < 10 * np.median(ratios)


class TestVelocity:
    def test_sqg_of_sin_x2(self, grid64):
        theta = ScalarField.from_function(grid64, lambda x, y: 0 * x + np.sin(y))
        u = velocity(CouplingSpec("sqg"), theta)
        y = grid64.coordinates[1]
        assert np.max(np.abs(u[0].values - np.cos(y))) < 1e-12
        assert np.max(np.abs(u[1].values)) < 1e-12

    def test_modified_scales_single_mode(self, grid64):
        theta = ScalarField.from_function(grid64, lambda x, y: np.cos(2 * x) + 0 * y)
        u_mod = velocity(CouplingSpec("modified_sqg", beta=1.5), theta)
        u_sqg = velocity(CouplingSpec("sqg"), theta)
        for a, b in zip(u_mod, u_sqg):
            np.testing.assert_allclose(a.values, 2 ** 0.5 * b.values, atol=1e-12)

    @pytest.mark.parametrize("spec", BUILTINS + [odd_symbol_coupling()],
                             ids=lambda s: s.name or s.family)
    def test_constant_gives_zero(self, grid32, spec):
        u = velocity(spec, ScalarField(grid32, values=np.full(grid32.shape, 4.0)))
        assert all(np.max(np.abs(c.values)) == 0 for c in u)

    @pytest.mark.parametrize("spec", BUILTINS, ids=lambda s: s.family)
    def test_real_and_divergence_free(self, grid64, spec):
        u = velocity(spec, random_field(grid64, 3))
        assert check_divergence_free(u) < 1e-12
        for comp in u:
            raw = np.fft.ifftn(comp.coefficients) * grid64.size
            assert np.max(np.abs(raw.imag)) <= 1e-10 * max(np.max(np.abs(raw.real)), 1e-300)

    @pytest.mark.parametrize("spec", BUILTINS, ids=lambda s: s.family)
    def test_linear(self, grid64, spec):
        a, b = random_field(grid64, 4), random_field(grid64, 5)
        lhs = velocity(spec, a * 2.0 + b * -3.0)
        ua, ub = velocity(spec, a), velocity(spec, b)
        for j in range(2):
            expected = 2.0 * ua[j].values - 3.0 * ub[j].values
            assert np.max(np.abs(lhs[j].values - expected)) <= 1e-12 * np.max(np.abs(expected))

    def test_sqg_equals_perp_riesz(self, grid64):
        theta = random_field(grid64, 6)
        u = velocity(CouplingSpec("sqg"), theta)
        c = theta.coefficients
        np.testing.assert_allclose(u[0].coefficients, -riesz_symbol(grid64, 1) * c, atol=1e-15)
        np.testing.assert_allclose(u[1].coefficients, riesz_symbol(grid64, 0) * c, atol=1e-15)

    def test_non_solenoidal_reported(self, grid64):
        residual = check_divergence_free(velocity(non_solenoidal_coupling(), random_field(grid64, 7)))
        assert residual > 1e-2

    def test_zero_coupling(self, grid32):
        u = velocity(zero_coupling(), random_field(grid32, 8))
        assert all(np.max(np.abs(c.values)) == 0 for c in u)


@pytest.fixture(scope="module")
def samples():
    return dyadic_shell_samples(2)


class TestSymbolOrder:
    def test_modified_sqg_bounded(self, samples):
        report = verify_symbol_order(CouplingSpec("modified_sqg", beta=1.3), 1.3, samples, 2)
        assert not report.flagged
        for order in range(3):
            values = list(report.shell_constants[order].values())
            assert max(values) / min(values) < 1.05

    def test_log_power_at_sigma_flagged(self, samples):
        spec = CouplingSpec("log_power", sigma=1.0, chi=0.5)
        assert verify_symbol_order(spec, 1.0, samples, 2).flagged

    def test_log_power_with_margin_bounded(self, samples):
        spec = CouplingSpec("log_power", sigma=1.0, chi=0.5)
        assert not verify_symbol_order(spec, 1.1, samples, 2).flagged

    def test_rejects_origin(self):
        with pytest.raises(ConfigurationError):
            verify_symbol_order(CouplingSpec("sqg"), 1.0, [[0.0, 0.0]], 1)

    def test_declared_order_defaults(self):
        assert CouplingSpec("sqg").order == 1.0
        assert CouplingSpec("log_field", chi=1.0, epsilon=0.1).order == pytest.approx(1.1)
        assert CouplingSpec("log_power", sigma=1.2, chi=0.0).order == pytest.approx(1.2)
        assert even_anisotropic_coupling().order == 1.0


class TestAdmissibility:
    def test_sqg(self):
        report = check_admissibility(2, 1.0, 1.0)
        assert report.admissible
        assert (report.lower, report.two_gamma) == (1.0, 2.0)
        assert report.upper == pytest.approx(8 / 3)

    def test_strict_upper_inequality_on_beta(self):
        report = check_admissibility(2, 1.0, 1.5)
        assert report.verdict == "outside_window"
        assert any("2*beta-1 < 2*gamma" in f for f in report.failed)

    def test_modified_example(self):
        report = check_admissibility(2, 0.9, 1.2)
        assert report.admissible
        assert report.lower == pytest.approx(1.4)
        assert report.upper == pytest.approx(2.8)

    def test_beta_below_one(self):
        assert not check_admissibility(2, 1.0, 0.8).admissible

    def test_gamma_too_large(self):
        report = check_admissibility(2, 1.5, 1.0)
        assert report.verdict == "outside_window"
