import io
import os
import math
import shutil
import tempfile
import unittest
from contextlib import redirect_stdout, redirect_stderr

import numpy as np
from numpy.testing import assert_allclose

from fel.FELwaterbag import WaterbagSpec
from fel.FELwaterbag import SpecError
from fel.FELwaterbag import observable_columns
from fel.FELpredictor import prediction_series
from fel.diary import write_table
from fel.diary import read_table
from fel.FELcli import ConfigError
from fel.FELcli import parse_number
from fel.FELcli import parse_settings
from fel.FELcli import parse_config
from fel.FELcli import format_config
from fel.FELcli import main
from fel.FELcli import EXIT_OK
from fel.FELcli import EXIT_INVALID
from fel.FELcli import EXIT_NUMERICAL
from fel.FELcli import EXIT_FAIL


MINIMAL = "alpha=pi/3\ndelta_p=0.1\n"


def _quiet_main(argv):
    with redirect_stdout(io.StringIO()) as out, \
            redirect_stderr(io.StringIO()):
        status = main(argv)
    return status, out.getvalue()


class TestParseNumber(unittest.TestCase):

    def test_multiples_of_pi(self):
        assert_allclose(parse_number('pi'), math.pi)
        assert_allclose(parse_number('2pi'), 2 * math.pi)
        assert_allclose(parse_number('pi/3'), math.pi / 3)
        assert_allclose(parse_number('3*pi/4'), 3 * math.pi / 4)
        assert_allclose(parse_number('0.5pi'), math.pi / 2)
        assert_allclose(parse_number(' -PI/2 '), -math.pi / 2)

    def test_plain_numbers(self):
        self.assertEqual(parse_number('1e-3'), 1e-3)
        self.assertEqual(parse_number('0.8'), 0.8)
        self.assertRaises(ValueError, parse_number, 'half')


class TestConfig(unittest.TestCase):

    def test_defaults(self):
        spec, config, options = parse_config(MINIMAL, environ={})
        assert_allclose(spec.alpha, math.pi / 3)
        self.assertEqual(spec.i0_norm, 0.0)
        self.assertEqual(spec.n_particles, 10000)
        self.assertEqual(config.dt, 1e-3)
        self.assertIsNone(config.workers)
        self.assertEqual(options.n_per_edge, 17)

    def test_comments_and_blank_lines(self):
        text = "# run\n\nalpha = pi/2  # half circle\ndelta_p=0.4\n"
        spec, _, _ = parse_config(text, environ={})
        assert_allclose(spec.alpha, math.pi / 2)
        self.assertEqual(spec.delta_p, 0.4)

    def test_alpha_above_pi(self):
        with self.assertRaises(SpecError) as context:
            parse_config("alpha=2pi\ndelta_p=0.1", environ={})
        self.assertIn("alpha exceeds pi", context.exception.errors)

    def test_unknown_and_duplicate_keys(self):
        with self.assertRaises(ConfigError) as context:
            parse_settings("alpha=1\nbeta=2\nalpha=0.5\n")
        self.assertEqual(context.exception.errors,
                         ["beta is not a known key (line 2)",
                          "alpha is given twice (line 3)"])

    def test_missing_required_and_malformed(self):
        with self.assertRaises(ConfigError) as context:
            parse_config("alpha=pi/3\nn_particles=many", environ={})
        errors = context.exception.errors
        self.assertIn("n_particles has a malformed value: 'many'", errors)
        self.assertIn("delta_p is required", errors)

    def test_missing_file(self):
        with self.assertRaises(ConfigError) as context:
            parse_config('no_such_file.cfg', environ={})
        self.assertIn("config file not found", context.exception.errors[0])

    def test_file(self):
        folder = tempfile.mkdtemp()
        self.addCleanup(shutil.rmtree, folder)
        filename = os.path.join(folder, 'run.cfg')
        with open(filename, 'w') as f:
            f.write(MINIMAL + "i0_norm=0.8\n")
        spec, _, _ = parse_config(filename, environ={})
        self.assertEqual(spec.i0_norm, 0.8)

    def test_file_name_with_equals_sign(self):
        folder = tempfile.mkdtemp()
        self.addCleanup(shutil.rmtree, folder)
        filename = os.path.join(folder, 'alpha=1.cfg')
        with open(filename, 'w') as f:
            f.write(MINIMAL + "i0_norm=0.4\n")
        spec, _, _ = parse_config(filename, environ={})
        self.assertEqual(spec.i0_norm, 0.4)

    def test_round_trip(self):
        text = MINIMAL + "i0_norm=0.8\nworkers=4\ndeterministic=true\nd_order=2\n"
        first = parse_config(text, environ={})
        second = parse_config(format_config(*first), environ={})
        self.assertEqual(first, second)

    def test_precedence(self):
        text = MINIMAL + "dt=0.01\n"
        environ = {'FEL_DT': '0.02', 'FEL_I0_NORM': '0.5', 'HOME': '/root'}
        _, config, _ = parse_config(text, environ=environ)
        self.assertEqual(config.dt, 0.02)
        spec, config, _ = parse_config(text, environ=environ,
                                       overrides={'dt': 0.05})
        self.assertEqual(config.dt, 0.05)
        self.assertEqual(spec.i0_norm, 0.5)
        spec, _, _ = parse_config(text, environ={},
                                  base={'i0_norm': '0.3', 'alpha': '1.0'})
        self.assertEqual(spec.i0_norm, 0.3)
        assert_allclose(spec.alpha, math.pi / 3)


class TestMain(unittest.TestCase):

    def setUp(self):
        self.folder = tempfile.mkdtemp()
        self.addCleanup(shutil.rmtree, self.folder)

    def test_dispersion(self):
        status, out = _quiet_main(['dispersion', '--out', self.folder])
        self.assertEqual(status, EXIT_OK)
        lines = out.splitlines()
        self.assertEqual(lines[0], 're,im,residual,class')
        self.assertIn('0.866025403784438', lines[1])
        self.assertTrue(lines[1].endswith('unstable'))
        frame, metadata = read_table(os.path.join(self.folder,
                                                  'dispersion.csv'))
        self.assertEqual(len(frame), 3)
        self.assertEqual(metadata['kind'], 'cold-beam')

    def test_simulate(self):
        config = MINIMAL + "n_particles=500\n"
        status, _ = _quiet_main(['simulate', '--config', config, '--dt',
                                 '0.01', '--t-end', '0.1', '--stride', '5',
                                 '--out', self.folder])
        self.assertEqual(status, EXIT_OK)
        frame, metadata = read_table(os.path.join(self.folder,
                                                  'simulation.csv'))
        self.assertEqual(list(frame.columns), observable_columns(4))
        assert_allclose(frame['t'], [0.0, 0.05, 0.1], atol=1e-12)
        assert_allclose(float(metadata['alpha']), math.pi / 3)
        self.assertEqual(metadata['stride'], '5')
        self.assertNotIn('workers', metadata)

    def test_predict(self):
        config = MINIMAL + "i0_norm=0.8\n"
        status, _ = _quiet_main(['predict', '--config', config, '--t-end',
                                 '0.5', '--collapse', '1.0:pi/2',
                                 '--out', self.folder])
        self.assertEqual(status, EXIT_OK)
        gain, metadata = read_table(os.path.join(self.folder, 'gain.csv'))
        self.assertEqual(list(gain.columns),
                         ['i0_norm', 'alpha', 'tau', 't', 'gain', 'in_window'])
        self.assertFalse(gain['in_window'].any())
        assert_allclose(gain['gain'], (1.0 + gain['tau']) ** 2)
        self.assertEqual(metadata['tau_max'], '0.5')

    def test_compare(self):
        spec = WaterbagSpec(math.pi / 2, 0.1, i0_norm=0.8)
        times = np.linspace(0.0, 0.5, 51)
        pred = prediction_series(spec, times)
        header = {'alpha': spec.alpha, 'delta_p': spec.delta_p,
                  'i0_norm': spec.i0_norm}
        sim_path = os.path.join(self.folder, 'sim.csv')
        pred_path = os.path.join(self.folder, 'pred.csv')
        write_table(pred_path, pred, header)

        write_table(sim_path, pred, header)
        status, out = _quiet_main(['compare', '--sim', sim_path, '--pred',
                                   pred_path, '--out', self.folder])
        self.assertEqual(status, EXIT_OK)
        self.assertEqual(out.strip(), 'PASS')

        sim = pred.copy()
        sim['intensity'] = sim['intensity'] * 1.1
        write_table(sim_path, sim, header)
        status, out = _quiet_main(['compare', '--sim', sim_path, '--pred',
                                   pred_path, '--out', self.folder])
        self.assertEqual(status, EXIT_FAIL)
        self.assertEqual(out.strip(), 'FAIL')
        report, metadata = read_table(os.path.join(self.folder,
                                                   'comparison.csv'))
        self.assertEqual(metadata['status'], 'FAIL')

    def test_invalid_input(self):
        status, _ = _quiet_main(['simulate', '--config',
                                 "alpha=2pi\ndelta_p=0.1", '--out',
                                 self.folder])
        self.assertEqual(status, EXIT_INVALID)
        status, _ = _quiet_main(['simulate', '--config', 'missing.cfg',
                                 '--out', self.folder])
        self.assertEqual(status, EXIT_INVALID)
        status, _ = _quiet_main(['launch'])
        self.assertEqual(status, EXIT_INVALID)
        status, _ = _quiet_main(['compare', '--sim', 'missing.csv',
                                 '--out', self.folder])
        self.assertEqual(status, EXIT_INVALID)

    def test_conservation_abort(self):
        config = ("alpha=pi/2\ndelta_p=0.1\ni0_norm=0.8\nn_particles=1000\n"
                  "drift_tolerance=1e-12\n")
        status, _ = _quiet_main(['simulate', '--config', config, '--dt',
                                 '0.5', '--t-end', '2', '--stride', '1',
                                 '--out', self.folder])
        self.assertEqual(status, EXIT_NUMERICAL)


def main_tests():
    unittest.main()


if __name__ == '__main__':
    main_tests()
