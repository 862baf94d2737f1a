import math
import unittest

import numpy as np
import pandas as pd
from numpy.testing import assert_array_equal
from numpy.testing import assert_allclose
from numpy.testing import assert_almost_equal

from fel.FELwaterbag import WaterbagSpec
from fel.FELwaterbag import SystemState
from fel.FELwaterbag import sample_waterbag
from fel.FELanalyzer import Tolerance
from fel.FELanalyzer import bunching_of
from fel.FELanalyzer import dispersion_of
from fel.FELanalyzer import observe
from fel.FELanalyzer import fit_power_law
from fel.FELanalyzer import compare_series


def _frame(t, intensity):
    return pd.DataFrame({'t': t, 'intensity': intensity})


class TestObservables(unittest.TestCase):

    def test_perfect_bunching(self):
        magnitude, phase = bunching_of(np.full(10, 0.3))
        assert_allclose(magnitude, 1.0)
        assert_allclose(phase, -0.3)

    def test_full_circle_has_no_bunching(self):
        state = sample_waterbag(WaterbagSpec(math.pi, 0.1, n_particles=1000))
        for k in [1, 2, 3]:
            magnitude, _ = bunching_of(state, k)
            self.assertLessEqual(magnitude, 1e-6)

    def test_quiet_bunching(self):
        state = sample_waterbag(WaterbagSpec(math.pi / 2, 0.1))
        magnitude, phase = bunching_of(state, 1)
        assert_almost_equal(magnitude, 0.636620, decimal=4)
        assert_allclose(phase, 0.0, atol=1e-12)

    def test_invalid_harmonic(self):
        self.assertRaises(ValueError, bunching_of, np.zeros(3), 0)

    def test_dispersion(self):
        state = sample_waterbag(WaterbagSpec(math.pi / 3, 0.1))
        assert_allclose(dispersion_of(state), 8.3333333e-4, rtol=1e-7)
        self.assertEqual(dispersion_of(np.full(5, 0.7)), 0.0)

    def test_dispersion_shift_invariance(self):
        p = np.linspace(-0.05, 0.05, 101)
        assert_allclose(dispersion_of(p + 3.0), dispersion_of(p),
                        rtol=1e-9)

    def test_observe(self):
        state = SystemState(0.5, np.zeros(4), np.array([0.1, -0.1, 0.2, -0.2]),
                            0.3, 0.4)
        sample = observe(state, 2, lambda s: (1.0, 2.0))
        self.assertEqual(sample.t, 0.5)
        self.assertEqual(sample.b_mag, (1.0, 1.0))
        self.assertEqual((sample.energy, sample.momentum), (1.0, 2.0))
        assert_allclose(sample.intensity, 0.25)
        assert_allclose(sample.dispersion, 0.025)


class TestPowerLaw(unittest.TestCase):

    def test_exact_slope(self):
        t = np.logspace(-2, -1, 20)
        assert_almost_equal(fit_power_law(t, 3.0 * t ** 4), 4.0, decimal=8)
        assert_almost_equal(fit_power_law(t, -2.0 * t ** 3), 3.0, decimal=8)

    def test_zeros_are_ignored(self):
        t = np.array([0.0, 0.1, 0.2, 0.4])
        values = np.array([0.0, 0.01, 0.04, 0.16])
        assert_almost_equal(fit_power_law(t, values), 2.0, decimal=8)

    def test_not_enough_points(self):
        self.assertTrue(math.isnan(fit_power_law([0.1], [1.0])))


class TestCompareSeries(unittest.TestCase):

    def setUp(self):
        self.t = np.linspace(0.0, 0.5, 51)
        self.pred = _frame(self.t, self.t ** 2)

    def test_self_comparison(self):
        report = compare_series(self.pred, self.pred)
        self.assertTrue(report.passed)
        self.assertEqual(report.summary(), 'PASS')
        assert_array_equal(report.table['max_rel_error'], [0.0])

    def test_tolerance(self):
        sim = _frame(self.t, self.t ** 2 * 1.1)
        report = compare_series(sim, self.pred,
                                tolerances={'intensity': Tolerance(0.05)})
        self.assertFalse(report.passed)
        assert_allclose(report.table['max_rel_error'], [0.1], rtol=1e-9)
        self.assertIn('FAIL', str(report))

    def test_residual_exponent(self):
        sim = _frame(self.t, self.t ** 2 + 1e-3 * self.t ** 4)
        report = compare_series(sim, self.pred, windows=[(0.05, 0.5)],
                                tolerances={'intensity':
                                            Tolerance(0.05, 3.5)})
        self.assertTrue(report.passed)
        assert_almost_equal(report.table['exponent'][0], 4.0, decimal=6)

        sim = _frame(self.t, self.t ** 2 + 1e-3 * self.t ** 2)
        report = compare_series(sim, self.pred, windows=[(0.05, 0.5)],
                                tolerances={'intensity':
                                            Tolerance(0.05, 3.5)})
        self.assertFalse(report.passed)

    def test_windows(self):
        report = compare_series(self.pred, self.pred,
                                windows=[(0.05, 0.2), (0.2, 0.5), (2.0, 3.0)])
        self.assertEqual(list(report.table['n_samples']), [16, 31, 0])
        self.assertFalse(report.passed)

    def test_misaligned_grids(self):
        sim = _frame(self.t[::2], self.t[::2] ** 2)
        self.assertRaises(ValueError, compare_series, sim, self.pred)
        report = compare_series(sim, self.pred, interpolate=True)
        self.assertLess(report.table['max_rel_error'][0], 0.01)

    def test_missing_observables_are_skipped(self):
        report = compare_series(self.pred, self.pred,
                                tolerances={'dispersion': Tolerance(0.1)})
        self.assertEqual(len(report.table), 0)


def main():
    unittest.main()


if __name__ == '__main__':
    main()
