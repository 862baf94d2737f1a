import math
import unittest
import warnings

import numpy as np
from numpy.testing import assert_allclose
from numpy.testing import assert_almost_equal

from fel.FELwaterbag import WaterbagSpec
from fel.FELwaterbag import observable_columns
from fel.FELanalyzer import fit_power_law
from fel.FELpredictor import Expansion
from fel.FELpredictor import ValidityWarning
from fel.FELpredictor import s_alpha
from fel.FELpredictor import field_x
from fel.FELpredictor import field_y
from fel.FELpredictor import field_x_expansion
from fel.FELpredictor import field_y_expansion
from fel.FELpredictor import theta_boundary
from fel.FELpredictor import v_pm
from fel.FELpredictor import u_coeff
from fel.FELpredictor import p_boundary
from fel.FELpredictor import intensity
from fel.FELpredictor import characteristic_time
from fel.FELpredictor import gain
from fel.FELpredictor import time_to_gain
from fel.FELpredictor import gain_curve
from fel.FELpredictor import energy_dispersion
from fel.FELpredictor import energy_dispersion_expansion
from fel.FELpredictor import bunching_prediction
from fel.FELpredictor import momentum_balance
from fel.FELpredictor import energy_balance
from fel.FELpredictor import expansion
from fel.FELpredictor import prediction_series


SEEDED = WaterbagSpec(math.pi / 2, 0.1, i0_norm=0.8)
THIRD = WaterbagSpec(math.pi / 3, 0.1, i0_norm=0.8)


class TestExpansion(unittest.TestCase):

    def test_call(self):
        series = Expansion(((0, 1.0), (2, 3.0)), 3)
        self.assertEqual(series(2.0), 13.0)
        assert_allclose(series(np.array([0.0, 1.0])), [1.0, 4.0])
        self.assertEqual(series.coefficient(2), 3.0)
        self.assertEqual(series.coefficient(1), 0.0)

    def test_derivative(self):
        derived = Expansion(((0, 1.0), (3, 2.0)), 4).derivative()
        self.assertEqual(derived.coefficients, ((2, 6.0),))
        self.assertEqual(derived.truncation_order, 3)

    def test_invalid(self):
        self.assertRaises(ValueError, Expansion, ((2, 1.0), (1, 1.0)), 3)
        self.assertRaises(ValueError, Expansion, ((2, 1.0),), 2)

    def test_named(self):
        self.assertEqual(expansion('u', SEEDED).truncation_order, 3)
        self.assertEqual(expansion('dispersion', SEEDED, order=2)
                         .truncation_order, 3)
        self.assertRaises(ValueError, expansion, 'phase', SEEDED)


class TestSAlpha(unittest.TestCase):

    def test_values(self):
        assert_allclose(s_alpha(math.pi / 2), 2.0 / math.pi)
        self.assertEqual(s_alpha(1e-9), 1.0)
        self.assertEqual(s_alpha(0.0), 1.0)
        assert_allclose(s_alpha(math.pi), 0.0, atol=1e-15)
        self.assertRaises(ValueError, s_alpha, -0.1)


class TestField(unittest.TestCase):

    def test_field_x(self):
        assert_almost_equal(field_x(1.0, SEEDED), 1.531047, decimal=6)
        assert_almost_equal(field_x(0.5, THIRD.replace(i0_norm=0.0)), 0.413497,
                            decimal=6)
        assert_allclose(field_x(0.5, SEEDED.replace(i0_norm=0.0)),
                        1.0 / math.pi)

    def test_field_y_coefficients(self):
        series = field_y_expansion(SEEDED)
        assert_almost_equal(series.coefficient(3), 0.152327, decimal=5)
        assert_almost_equal(series.coefficient(4), 0.0271052, decimal=6)
        self.assertEqual(series.coefficient(2), 0.0)
        self.assertEqual(series.truncation_order, 5)
        self.assertEqual(field_y(0.0, SEEDED), 0.0)

    def test_intensity_is_field_x_squared(self):
        t = np.linspace(0.0, 0.5, 11)
        assert_allclose(intensity(t, SEEDED), field_x(t, SEEDED) ** 2,
                        rtol=1e-12)
        assert_almost_equal(intensity(1.0, SEEDED), 2.344105, decimal=5)
        assert_allclose(intensity(0.0, SEEDED), 0.8)
        assert_almost_equal(intensity(0.5, THIRD.replace(i0_norm=0.0)),
                            0.170980, decimal=6)

    def test_intensity_consistency(self):
        t = np.linspace(0.02, 0.5, 25)
        pred = field_x(t, SEEDED) ** 2 + field_y(t, SEEDED) ** 2
        residual = pred - intensity(t, SEEDED)
        self.assertGreaterEqual(fit_power_law(t, residual), 3.5)


class TestBoundaries(unittest.TestCase):

    def test_theta_boundary(self):
        assert_almost_equal(theta_boundary(0.5, THIRD, '+'), 0.918165,
                            decimal=6)
        assert_allclose(theta_boundary(0.5, THIRD, '-'),
                        -math.pi / 3 - 0.129032427, atol=1e-8)
        cold = THIRD.replace(i0_norm=0.0)
        assert_almost_equal(theta_boundary(1.0, cold, 1), 0.909366, decimal=6)
        assert_allclose(theta_boundary(0.0, cold, -1), -math.pi / 3)

    def test_theta_boundary_at_right_angle(self):
        t = np.linspace(0.0, 1.0, 5)
        assert_allclose(theta_boundary(t, SEEDED, 'top'), math.pi / 2,
                        atol=1e-12)
        assert_allclose(theta_boundary(t, SEEDED, 'bottom'), -math.pi / 2,
                        atol=1e-12)

    def test_v_pm(self):
        assert_almost_equal(v_pm(0.1, SEEDED, '+'), -0.135252, decimal=6)
        assert_almost_equal(v_pm(0.5, THIRD.replace(i0_norm=0.0), '+'),
                            -0.156748, decimal=6)
        t = np.linspace(0.0, 1.0, 11)
        assert_allclose(v_pm(t, SEEDED, '+') - v_pm(t, SEEDED, '-'), 0.1,
                        rtol=1e-12)
        self.assertRaises(ValueError, v_pm, 0.1, SEEDED, 'left')

    def test_u(self):
        self.assertEqual(u_coeff(0.0, SEEDED), 0.0)
        assert_almost_equal(u_coeff(0.1, SEEDED), 0.081847, decimal=5)

    def test_p_boundary(self):
        theta = np.array([-1.0, 0.0, 1.0])
        p = p_boundary(theta, 0.1, SEEDED, 1)
        assert_allclose(p[1], v_pm(0.1, SEEDED, 1))
        assert_allclose(p[0], p[2])


class TestGain(unittest.TestCase):

    def test_characteristic_time(self):
        assert_allclose(characteristic_time(SEEDED),
                        math.sqrt(0.8) * math.pi / 2)
        self.assertEqual(characteristic_time(SEEDED.replace(alpha=math.pi)),
                         math.inf)

    def test_gain(self):
        t_c = characteristic_time(SEEDED)
        assert_allclose(gain(0.5 * t_c, SEEDED), 2.25)
        assert_allclose(gain(t_c, SEEDED), 4.0)
        self.assertRaises(ValueError, gain, 0.1, SEEDED.replace(i0_norm=0.0))

    def test_time_to_gain(self):
        t_star = time_to_gain(4.0, SEEDED)
        assert_allclose(t_star, characteristic_time(SEEDED))
        assert_allclose(gain(t_star, SEEDED), 4.0)
        self.assertEqual(time_to_gain(1.0, SEEDED), 0.0)
        self.assertRaises(ValueError, time_to_gain, 0.5, SEEDED)
        self.assertRaises(ValueError, time_to_gain, 2.0,
                          SEEDED.replace(i0_norm=0.0))

    def test_rescaled_gain_does_not_depend_on_seed(self):
        tau = np.linspace(0.0, 0.5, 11)
        strong = gain_curve(SEEDED, tau)
        weak = gain_curve(SEEDED.replace(i0_norm=0.2), tau)
        assert_allclose(strong['gain'], weak['gain'], rtol=1e-12)
        assert_allclose(strong['gain'], (1.0 + tau) ** 2, rtol=1e-12)
        self.assertEqual(list(strong.columns), ['tau', 't', 'gain'])
        assert_allclose(strong['t'], 2.0 * weak['t'], rtol=1e-12)


class TestDispersion(unittest.TestCase):

    def test_small_seed_branch(self):
        spec = THIRD.replace(i0_norm=0.0)
        s = s_alpha(spec.alpha)
        series = energy_dispersion_expansion(spec)
        self.assertEqual(series.truncation_order, 5)
        assert_allclose(series.coefficient(0), 0.1 ** 2 / 12.0)
        assert_allclose(series.coefficient(4), 4 * s ** 2 * (1 - s) ** 2 / 5)
        assert_almost_equal(series.coefficient(4), 0.0163764, decimal=6)
        assert_allclose(energy_dispersion(0.0, spec), 0.1 ** 2 / 12.0)

    def test_seeded_branch(self):
        series = energy_dispersion_expansion(SEEDED)
        assert_almost_equal(series.coefficient(2), 0.338036, decimal=5)
        assert_almost_equal(series.coefficient(3), 0.240601, decimal=5)
        self.assertEqual(series.coefficient(4), 0.0)
        self.assertEqual(series.truncation_order, 4)

    def test_second_order_drops_cubic(self):
        series = energy_dispersion_expansion(SEEDED, order=2)
        self.assertEqual(series.coefficient(3), 0.0)
        self.assertEqual(series.truncation_order, 3)
        self.assertRaises(ValueError, energy_dispersion_expansion, SEEDED, 4)

    def test_branch_threshold(self):
        tiny = SEEDED.replace(i0_norm=1e-8)
        self.assertNotEqual(energy_dispersion_expansion(tiny).coefficient(4),
                            0.0)
        series = energy_dispersion_expansion(tiny, branch_threshold=0.0)
        self.assertEqual(series.coefficient(4), 0.0)
        self.assertGreater(series.coefficient(2), 0.0)

    def test_full_circle_seeded(self):
        spec = SEEDED.replace(alpha=math.pi)
        with warnings.catch_warnings():
            warnings.simplefilter('ignore', ValidityWarning)
            series = energy_dispersion_expansion(spec)
        assert_allclose(series.coefficient(2), 16.0 / 5.0 * 0.8, rtol=1e-12)
        assert_allclose(series.coefficient(3), 0.0, atol=1e-15)


class TestBunching(unittest.TestCase):

    def test_values(self):
        assert_allclose(bunching_prediction(1, SEEDED), 2.0 / math.pi)
        assert_allclose(bunching_prediction(2, SEEDED), 0.0, atol=1e-15)
        assert_allclose(bunching_prediction(3, SEEDED), -2.0 / (3 * math.pi))
        self.assertRaises(ValueError, bunching_prediction, 0, SEEDED)


class TestBalances(unittest.TestCase):

    def test_zero_at_start(self):
        assert_allclose(momentum_balance(0.0, THIRD), 0.0, atol=1e-15)
        assert_allclose(energy_balance(0.0, THIRD), 0.0, atol=1e-15)

    def test_momentum_balance_is_high_order(self):
        t = np.linspace(0.03, 0.3, 28)
        self.assertGreaterEqual(fit_power_law(t, momentum_balance(t, THIRD)),
                                2.5)

    def test_energy_balance_is_high_order(self):
        t = np.linspace(0.03, 0.3, 28)
        self.assertGreaterEqual(fit_power_law(t, energy_balance(t, THIRD)),
                                3.5)


class TestPredictionSeries(unittest.TestCase):

    def test_columns(self):
        times = np.linspace(0.0, 0.5, 6)
        frame = prediction_series(SEEDED, times)
        self.assertEqual(list(frame.columns), observable_columns(4))
        assert_allclose(frame['energy'], 0.1 ** 2 / 24.0)
        assert_allclose(frame['momentum'], 0.8)
        assert_allclose(frame['intensity'], frame['ax'] ** 2 + frame['ay'] ** 2)
        assert_allclose(frame['b3_mag'], 2.0 / (3 * math.pi))
        assert_allclose(frame['b3_phase'], math.pi)
        assert_allclose(frame['b1_phase'], 0.0)

    def test_second_order(self):
        times = np.linspace(0.0, 0.5, 6)
        third = prediction_series(SEEDED, times)
        second = prediction_series(SEEDED, times, order=2)
        self.assertTrue(np.all(second['dispersion'] <= third['dispersion']))
        assert_allclose(second['intensity'], third['intensity'])

    def test_validity_warning(self):
        times = np.linspace(0.0, 0.5, 6)
        with self.assertWarns(ValidityWarning):
            prediction_series(SEEDED.replace(alpha=math.pi), times)
        with self.assertWarns(ValidityWarning):
            field_x_expansion(SEEDED.replace(i0_norm=0.9))
        with warnings.catch_warnings():
            warnings.simplefilter('error', ValidityWarning)
            self.assertTrue(field_x_expansion(SEEDED).in_window)


def main():
    unittest.main()


if __name__ == '__main__':
    main()
