import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from activescalar.diagnostics import lq_norm
from activescalar.errors import DomainError, GridError, SymmetryError, WindowError
from activescalar.experiments import probe_data, probe_times
from activescalar.spectral import (
    ScalarField, apply_semigroup, dealias, fractional_power, forward_transform, gradient,
    inverse_transform, make_grid, probe_lp_lq_decay, riesz_transform, safe_time,
)

TWO_PI = 2 * math.pi


def random_field(grid, seed, mean_free=False):
    values = np.random.default_rng(seed).standard_normal(grid.shape)
    if mean_free:
        values -= values.mean()
    return ScalarField(grid, values=values)


def single_mode(grid, k, amplitude=1.0):
    x, y = grid.coordinates
    return ScalarField.from_function(grid, lambda x, y: amplitude * np.cos(k[0] * x + k[1] * y))


class TestGrid:
    def test_two_pi_box_has_integer_wavenumbers(self):
        grid = make_grid(2, [64, 64], [TWO_PI, TWO_PI], [math.pi, math.pi])
        k1 = grid.wavenumbers[0].ravel()
        np.testing.assert_allclose(k1, np.round(k1), atol=1e-12)
        assert k1[1] == pytest.approx(1.0)

    def test_wavenumber_spacing_follows_side_length(self):
        grid = make_grid(2, [64, 64], [100.0, 100.0], [50.0, 50.0])
        assert grid.wavenumbers[1].ravel()[1] == pytest.approx(TWO_PI / 100)

    def test_non_power_of_two_rejected(self):
        with pytest.raises(GridError, match="power"):
            make_grid(2, [63, 64], [TWO_PI, TWO_PI], [math.pi, math.pi])

    @pytest.mark.parametrize("dims", [1, 4])
    def test_dimension_rejected(self, dims):
        with pytest.raises(GridError):
            make_grid(dims, [16] * dims, [1.0] * dims)

    def test_nonpositive_side_rejected(self):
        with pytest.raises(GridError):
            make_grid(2, [16, 16], [1.0, 0.0])

    def test_origin_defaults_to_centre(self):
        grid = make_grid(3, 16, 4.0)
        assert grid.origin == (2.0, 2.0, 2.0)


class TestTransforms:
    def test_constant_has_only_mode_zero(self, grid64):
        f = forward_transform(ScalarField(grid64, values=np.full(grid64.shape, 3.5)))
        c = f.coefficients
        assert c[0, 0] == pytest.approx(3.5)
        c[0, 0] = 0
        assert np.max(np.abs(c)) < 1e-14

    def test_sine_has_two_conjugate_modes(self, grid64):
        f = ScalarField.from_function(grid64, lambda x, y: np.sin(x) + 0 * y)
        c = f.coefficients
        big = np.argwhere(np.abs(c) > 1e-12)
        assert sorted(map(tuple, big)) == [(1, 0), (63, 0)]
        assert c[1, 0] == pytest.approx(-0.5j)
        assert c[63, 0] == pytest.approx(np.conj(c[1, 0]))

    def test_round_trip_random(self, grid64):
        f = random_field(grid64, 0)
        back = inverse_transform(ScalarField(grid64, coefficients=f.coefficients))
        assert np.max(np.abs(back.values - f.values)) < 1e-12

    def test_zero_coefficients_give_zero_field(self, grid32):
        f = ScalarField(grid32, coefficients=np.zeros(grid32.shape, complex))
        assert np.all(f.values == 0)

    def test_sine_modes_invert_to_sine(self, grid64):
        c = np.zeros(grid64.shape, complex)
        c[1, 0], c[-1, 0] = -0.5j, 0.5j
        f = ScalarField(grid64, coefficients=c)
        x = grid64.coordinates[0]
        assert np.max(np.abs(f.values - np.sin(x))) < 1e-12

    def test_broken_conjugate_pair_rejected(self, grid32):
        c = np.zeros(grid32.shape, complex)
        c[1, 0], c[-1, 0] = -0.5j, 0.3j
        with pytest.raises(SymmetryError):
            inverse_transform(ScalarField(grid32, coefficients=c))

    def test_three_dimensional_round_trip(self):
        grid = make_grid(3, [16, 8, 16], [1.0, 2.0, 3.0])
        f = random_field(grid, 5)
        back = ScalarField(grid, coefficients=f.coefficients)
        assert np.max(np.abs(back.values - f.values)) < 1e-12

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 2**31 - 1), n=st.sampled_from([8, 16, 32]))
    def test_parseval(self, seed, n):
        grid = make_grid(2, [n, 2 * n], [1.3, 2.7])
        f = random_field(grid, seed)
        physical = np.sum(f.values ** 2) * grid.cell_volume
        spectral = np.sum(np.abs(f.coefficients) ** 2) * grid.volume
        assert spectral == pytest.approx(physical, rel=1e-12)

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 2**31 - 1))
    def test_round_trip_relative(self, seed):
        grid = make_grid(2, [32, 16], [TWO_PI, 3.0])
        f = random_field(grid, seed)
        back = ScalarField(grid, coefficients=f.coefficients).values
        assert np.max(np.abs(back - f.values)) <= 1e-12 * np.max(np.abs(f.values))


class TestFractionalPower:
    def test_zero_power_is_identity(self, grid64):
        f = random_field(grid64, 1)
        np.testing.assert_array_equal(fractional_power(f, 0).coefficients, f.coefficients)

    def test_mode_one_one_squared(self, grid64):
        f = single_mode(grid64, (1, 1))
        g = fractional_power(f, 2.0)
        np.testing.assert_allclose(g.coefficients[1, 1], 2 * f.coefficients[1, 1], rtol=1e-14)
        np.testing.assert_allclose(g.values, 2 * f.values, atol=1e-12)

    def test_negative_power_on_nonzero_mean(self, grid64):
        f = ScalarField.from_function(grid64, lambda x, y: np.sin(x) + 1.0 + 0 * y)
        with pytest.raises(DomainError):
            fractional_power(f, -1.0)

    @pytest.mark.parametrize("s1,s2", [(0.5, 0.7), (-1.0, 2.0), (1.5, -0.25)])
    def test_composition(self, grid64, s1, s2):
        f = random_field(grid64, 2, mean_free=True)
        lhs = fractional_power(fractional_power(f, s1), s2).values
        rhs = fractional_power(f, s1 + s2).values
        assert np.max(np.abs(lhs - rhs)) <= 1e-12 * np.max(np.abs(rhs))

    def test_output_is_real(self, grid64):
        f = random_field(grid64, 3, mean_free=True)
        c = fractional_power(f, 0.6).coefficients
        raw = np.fft.ifftn(c) * grid64.size
        assert np.max(np.abs(raw.imag)) < 1e-10 * np.max(np.abs(raw.real))


class TestRiesz:
    def test_r1_of_sin_x1(self, grid64):
        f = ScalarField.from_function(grid64, lambda x, y: np.sin(x) + 0 * y)
        x = grid64.coordinates[0]
        assert np.max(np.abs(riesz_transform(f, 0).values + np.cos(x))) < 1e-12

    def test_r1_of_sin_x2_vanishes(self, grid64):
        f = ScalarField.from_function(grid64, lambda x, y: 0 * x + np.sin(y))
        assert np.max(np.abs(riesz_transform(f, 0).values)) < 1e-12

    def test_r2_of_sin_x2(self, grid64):
        f = ScalarField.from_function(grid64, lambda x, y: 0 * x + np.sin(y))
        y = grid64.coordinates[1]
        assert np.max(np.abs(riesz_transform(f, 1).values + np.cos(y))) < 1e-12

    def test_bad_axis(self, grid64):
        with pytest.raises(DomainError):
            riesz_transform(random_field(grid64, 0), 2)

    @pytest.mark.parametrize("shape", [(32, 32), (16, 64)])
    def test_identity_sum_of_squares(self, shape):
        grid = make_grid(2, list(shape), [TWO_PI, 5.0])
        f = random_field(grid, 4, mean_free=True)
        # Nyquist planes carry no odd symbol, so compare on the dealiased band
        g = dealias(f)
        total = sum(riesz_transform(riesz_transform(g, i), i).values for i in range(2))
        assert np.max(np.abs(total + g.values)) <= 1e-12 * np.max(np.abs(g.values))

    def test_identity_in_three_dimensions(self):
        grid = make_grid(3, [16, 16, 16], [TWO_PI] * 3)
        g = dealias(random_field(grid, 6, mean_free=True))
        total = sum(riesz_transform(riesz_transform(g, i), i).values for i in range(3))
        assert np.max(np.abs(total + g.values)) <= 1e-12 * np.max(np.abs(g.values))


class TestGradient:
    def test_derivative_of_sine(self, grid64):
        f = ScalarField.from_function(grid64, lambda x, y: np.sin(x) + 0 * y)
        grad = gradient(f)
        x = grid64.coordinates[0]
        assert np.max(np.abs(grad[0].values - np.cos(x))) < 1e-12
        assert np.max(np.abs(grad[1].values)) < 1e-12

    def test_gradient_of_constant(self, grid32):
        grad = gradient(ScalarField(grid32, values=np.full(grid32.shape, 2.0)))
        assert all(np.max(np.abs(g.values)) < 1e-14 for g in grad)


class TestSemigroup:
    def test_zero_time_is_identity(self, grid64):
        f = random_field(grid64, 7)
        np.testing.assert_allclose(apply_semigroup(f, 0.0, 1.0).values, f.values, atol=1e-13)

    def test_unit_mode_factor(self, grid64):
        f = single_mode(grid64, (1, 0))
        g = apply_semigroup(f, 0.5, gamma=1.0, kappa=1.0)
        assert g.coefficients[1, 0] / f.coefficients[1, 0] == pytest.approx(math.exp(-0.5),
                                                                            rel=1e-14)

    def test_negative_time_rejected(self, grid32):
        with pytest.raises(DomainError):
            apply_semigroup(random_field(grid32, 0), -0.1, 1.0)

    @pytest.mark.parametrize("gamma", [0.5, 0.75, 1.0, 1.4])
    def test_semigroup_law(self, grid64, gamma):
        f = random_field(grid64, 8)
        lhs = apply_semigroup(apply_semigroup(f, 0.013, gamma, 0.7), 0.029, gamma, 0.7).values
        rhs = apply_semigroup(f, 0.042, gamma, 0.7).values
        assert np.max(np.abs(lhs - rhs)) <= 1e-12 * np.max(np.abs(rhs))

    def test_mean_is_preserved(self, grid32):
        f = random_field(grid32, 9)
        assert apply_semigroup(f, 3.0, 1.0).mean == pytest.approx(f.mean, abs=1e-14)


class TestDealias:
    def test_retained_band_unchanged(self, grid64):
        f = single_mode(grid64, (21, -21))
        np.testing.assert_allclose(dealias(f).values, f.values, atol=1e-13)

    def test_nyquist_mode_removed(self, grid64):
        f = ScalarField.from_function(grid64, lambda x, y: np.cos(32 * x) + 0 * y)
        assert np.max(np.abs(dealias(f).values)) < 1e-14

    def test_idempotent(self, grid64):
        once = dealias(random_field(grid64, 10))
        np.testing.assert_array_equal(dealias(once).coefficients, once.coefficients)


@pytest.fixture(scope="module")
def probe_grid():
    return make_grid(2, [256, 256], [16 * math.pi] * 2)


class TestProbe:
    def test_l1_to_l2_exponent(self, probe_grid):
        times = probe_times(probe_grid, 1.0, 1.0)
        result = probe_lp_lq_decay(probe_data(probe_grid, 1.0), 1.0, 2.0, 1.0, 1.0, times)
        assert result.predicted_slope == pytest.approx(-0.5)
        assert result.relative_error < 0.05

    def test_equal_exponents_give_bounded_norm(self, probe_grid):
        f = probe_data(probe_grid, 2.0)
        times = probe_times(probe_grid, 1.0, 1.0)
        result = probe_lp_lq_decay(f, 2.0, 2.0, 1.0, 1.0, times)
        assert result.predicted_slope == 0
        assert max(result.norms) <= lq_norm(f, 2.0)
        assert -0.5 < result.slope <= 0

    def test_three_quarter_l1_to_linf(self, probe_grid):
        times = probe_times(probe_grid, 0.75, 1.0)
        result = probe_lp_lq_decay(probe_data(probe_grid, 1.0), 1.0, math.inf, 0.75, 1.0, times)
        assert result.predicted_slope == pytest.approx(-4 / 3)
        assert result.relative_error < 0.05

    def test_times_beyond_window_rejected(self, probe_grid):
        t_box = safe_time(probe_grid, 1.0)
        with pytest.raises(WindowError):
            probe_lp_lq_decay(probe_data(probe_grid, 1.0), 1.0, 2.0, 1.0, 1.0, [1.0, 2 * t_box])

    def test_bad_exponent_order(self, probe_grid):
        with pytest.raises(DomainError):
            probe_lp_lq_decay(probe_data(probe_grid, 1.0), 2.0, 1.0, 1.0, 1.0, [1.0, 2.0])
