import math

import numpy as np
import pytest

from activescalar.diagnostics import critical_exponent, lq_norm, symmetry_defect
from activescalar.initial_data import (
    antisymmetrize, build_datum, bump, profile_datum, rough_datum, scaling_datum, smoothstep,
    symmetrize,
)
from activescalar.spectral import make_grid


@pytest.fixture(scope="module")
def box():
    return make_grid(2, [128, 128], [16 * math.pi] * 2)


class TestSmoothstep:
    def test_limits(self):
        x = np.array([-1.0, 0.0, 0.5, 1.0, 2.0])
        np.testing.assert_allclose(smoothstep(x), [0, 0, 0.5, 1, 1])

    def test_monotone(self):
        y = smoothstep(np.linspace(0, 1, 101))
        assert np.all(np.diff(y) >= 0)


class TestData:
    def test_bump_support(self, box):
        f = bump(box, 5.0)
        assert np.all(f.values[box.radius > 5.0] == 0)
        assert f.values.max() == pytest.approx(1.0, abs=1e-3)

    def test_antisymmetrize_and_symmetrize(self, box):
        base = bump(box, 4.0, shift=(2.0, 1.0))
        assert symmetry_defect(antisymmetrize(base), "odd") < 1e-14
        assert symmetry_defect(symmetrize(base), "even") < 1e-14

    @pytest.mark.parametrize("kind", ["bump", "radial", "nonradial", "odd", "even", "critical",
                                      "scaling"])
    def test_named_data_have_unit_critical_norm(self, box, kind):
        f = build_datum(box, kind, 1.0, 1.0)
        assert lq_norm(f, critical_exponent(2, 1.0, 1.0)) == pytest.approx(1.0, rel=1e-12)

    def test_amplitude_sets_peak(self, box):
        f = build_datum(box, "bump", 1.0, 1.0, amplitude=3.0)
        assert np.abs(f.values).max() == pytest.approx(3.0)

    def test_rough_is_seeded_and_mean_free(self, box):
        a = rough_datum(box, 1.1, seed=4)
        b = rough_datum(box, 1.1, seed=4)
        np.testing.assert_array_equal(a.values, b.values)
        assert abs(a.mean) < 1e-14
        assert not np.array_equal(a.values, rough_datum(box, 1.1, seed=5).values)

    def test_profile_power_law(self, box):
        f = profile_datum(box, 1.0, core=0.2, support=20.0)
        r = box.radius
        mid = (r > 2.0) & (r < 6.0)
        slope = np.polyfit(np.log(r[mid]), np.log(f.values[mid]), 1)[0]
        assert slope == pytest.approx(-1.0, abs=0.05)

    def test_scaling_datum_is_compact(self, box):
        f = scaling_datum(box)
        x1, x2 = (np.broadcast_to(x, box.shape) for x in box.centered_coordinates)
        outside = (np.abs(x1) > 0.25 * 16 * math.pi) | (np.abs(x2) > 0.25 * 16 * math.pi)
        assert np.abs(f.values[outside]).max() < 1e-13 * np.abs(f.values).max()
        assert symmetry_defect(f, "radial") > 0.01

    def test_unknown_kind(self, box):
        with pytest.raises(ValueError):
            build_datum(box, "square", 1.0, 1.0)
