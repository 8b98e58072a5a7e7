import itertools
import math

import numpy as np
import pytest

from modules.dither import DitherSpec, LinearMapPair, empirical_moment, identity_moment, moment, sample
from utils.exceptions import ConfigError
from utils.rng import RandomStream

SPEC = DitherSpec(chi=121 / 4, psi=0.01)
ORDERS = [(m, p) for m, p in itertools.product(range(7), repeat=2) if m + p <= 6]


class TestDitherSpec:
    def test_gamma(self):
        assert SPEC.gamma == pytest.approx(math.sqrt(121 / 4 * 0.01))

    @pytest.mark.parametrize("kwargs", [
        {"chi": 0.0, "psi": 1.0},
        {"chi": 1.0, "psi": -1.0},
        {"chi": 1.0, "psi": 1.0, "omega": 0.0},
        {"chi": float("nan"), "psi": 1.0},
    ])
    def test_rejects_non_positive_parameters(self, kwargs):
        with pytest.raises(ConfigError):
            DitherSpec(**kwargs)

    def test_maps_are_odd_and_scaled(self):
        maps = LinearMapPair.from_spec(DitherSpec(chi=4.0, psi=9.0, omega=2.0))
        assert maps.h(2.0) == pytest.approx(2.0)
        assert maps.g(-2.0) == pytest.approx(-3.0)
        np.testing.assert_allclose(maps.h(np.array([1.0, -1.0])), -maps.h(np.array([-1.0, 1.0])))


class TestSample:
    def test_support_and_shape(self):
        stream = RandomStream.for_trajectories(1, 0, 500).at(4)
        draw = sample(SPEC, stream, dim=3)
        assert draw.w.shape == (500, 3)
        assert set(np.unique(draw.w)) == {-1.0, 1.0}
        np.testing.assert_allclose(draw.h_of_w, math.sqrt(SPEC.chi) * draw.w)
        np.testing.assert_allclose(draw.g_of_w, math.sqrt(SPEC.psi) * draw.w)


class TestMoment:
    @pytest.mark.parametrize("m, p", ORDERS)
    def test_matches_two_point_enumeration(self, m, p):
        h, g = math.sqrt(SPEC.chi), math.sqrt(SPEC.psi)
        expected = 0.5 * ((h ** m) * (g ** p) + ((-h) ** m) * ((-g) ** p))
        assert moment(SPEC, m, p) == pytest.approx(expected, rel=1e-14, abs=0.0)

    @pytest.mark.parametrize("m, p", [(m, p) for m, p in ORDERS if (m + p) % 2])
    def test_odd_total_order_vanishes(self, m, p):
        assert moment(SPEC, m, p) == 0.0

    @pytest.mark.parametrize("m, j", [(0, 1), (1, 0), (1, 1), (2, 0), (2, 1), (3, 0), (0, 3)])
    def test_identity_form(self, m, j):
        assert moment(SPEC, m, m + 2 * j) == pytest.approx(identity_moment(SPEC, m, j), rel=1e-12)

    def test_named_identities(self):
        assert moment(SPEC, 2, 0) == pytest.approx(SPEC.chi)
        assert moment(SPEC, 0, 2) == pytest.approx(SPEC.psi)
        assert moment(SPEC, 1, 1) == pytest.approx(SPEC.gamma)
        assert moment(SPEC, 2, 2) == pytest.approx(SPEC.gamma ** 2)

    def test_negative_order_rejected(self):
        with pytest.raises(ValueError):
            moment(SPEC, -1, 2)
        with pytest.raises(ValueError):
            identity_moment(SPEC, 1, -1)

    @pytest.mark.parametrize("m, p", ORDERS)
    def test_empirical_average_within_five_standard_errors(self, m, p):
        stream = RandomStream.for_trajectories(20240607, 0, 1).at(m * 7 + p)
        mean, se = empirical_moment(SPEC, m, p, stream, 1_000_000)
        assert abs(mean - moment(SPEC, m, p)) <= 5.0 * se + 1e-12 * (1.0 + abs(moment(SPEC, m, p)))
