#!/usr/bin/env python
# -*- coding: utf-8 -*-
""" Command line front end: configuration files, subcommands and the CSV
    tables they write.

    Settings are resolved as defaults < config file < FEL_<KEY> environment
    variables < command line flags. Exit status: 0 success, 1 invalid
    settings, 2 numerical abort, 3 comparison FAIL.
"""

# External modules
import os
import re
import sys
import math
import logging
import warnings
from argparse import ArgumentParser
from dataclasses import dataclass, asdict

import numpy as np
import pandas as pd

from fel.FELwaterbag import (WaterbagSpec, SpecError, NumericalError,
                             validate_spec)
from fel.FELintegrator import IntegratorConfig, validate_config, run
from fel.FELpredictor import (ValidityWarning, BRANCH_THRESHOLD, s_alpha,
                              prediction_series, gain_curve, in_window,
                              characteristic_time)
from fel.FELdispersion import EquilibriumProfile, solve_dispersion, growth_rate
from fel.FELcontour import track_boundary
from fel.FELanalyzer import compare_series, DEFAULT_TOLERANCES, DEFAULT_WINDOWS
from fel.diary import Diary, format_value, read_table
from fel import FELplots


logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_NUMERICAL = 2
EXIT_FAIL = 3

ENV_PREFIX = 'FEL_'

SIMULATION_CSV = 'simulation.csv'
PREDICTION_CSV = 'prediction.csv'
SECOND_ORDER_CSV = 'prediction_order2.csv'
GAIN_CSV = 'gain.csv'
CONTOUR_CSV = 'contour.csv'
SNAPSHOT_CSV = 'snapshots.csv'
DISPERSION_CSV = 'dispersion.csv'
COMPARISON_CSV = 'comparison.csv'

MAX_SNAPSHOT_PARTICLES = 2000


class ConfigError(SpecError):
    pass


@dataclass(frozen=True)
class RunOptions(object):
    n_per_edge: int = 17
    d_branch_threshold: float = BRANCH_THRESHOLD
    d_order: int = 3


###############################################################################
# ## Value parsing ############################################################
###############################################################################

PI_PATTERN = re.compile(r'^([+-]?(?:\d+\.?\d*|\.\d+)?(?:[eE][+-]?\d+)?)'
                        r'\s*\*?\s*pi(?:\s*/\s*(\d+\.?\d*))?$')


def parse_number(text):
    """Float or multiple of pi: 'pi', '2pi', 'pi/3', '3*pi/4', '0.5pi'"""
    text = text.strip().lower()
    match = PI_PATTERN.match(text)
    if match is None:
        return float(text)
    coefficient, denominator = match.groups()
    if coefficient in ('', '+'):
        coefficient = 1.0
    elif coefficient == '-':
        coefficient = -1.0
    else:
        coefficient = float(coefficient)
    value = coefficient * math.pi
    if denominator is not None:
        value = value / float(denominator)
    return value


def parse_int(text):
    value = parse_number(text)
    if not math.isfinite(value) or value != int(value):
        raise ValueError("Not an integer: {}".format(text))
    return int(value)


def parse_workers(text):
    if text.strip().lower() in ('auto', 'none', ''):
        return None
    return parse_int(text)


def parse_bool(text):
    value = text.strip().lower()
    if value in ('true', 'yes', '1', 'on'):
        return True
    if value in ('false', 'no', '0', 'off'):
        return False
    raise ValueError("Not a boolean: {}".format(text))


SPEC_KEYS = ('alpha', 'delta_p', 'i0_norm', 'n_particles', 'sampling', 'seed',
             'k_max')
# Config key -> IntegratorConfig field
CONFIG_KEYS = {'dt': 'dt', 't_end': 't_end', 'stride': 'observer_stride',
               'drift_tolerance': 'drift_tolerance', 'workers': 'workers',
               'deterministic': 'deterministic', 'chunk_size': 'chunk_size'}
OPTION_KEYS = ('n_per_edge', 'd_branch_threshold', 'd_order')
REQUIRED_KEYS = ('alpha', 'delta_p')

CONVERTERS = {'alpha': parse_number, 'delta_p': parse_number,
              'i0_norm': parse_number, 'n_particles': parse_int,
              'sampling': str.strip, 'seed': parse_int, 'k_max': parse_int,
              'dt': parse_number, 't_end': parse_number, 'stride': parse_int,
              'drift_tolerance': parse_number, 'workers': parse_workers,
              'deterministic': parse_bool, 'chunk_size': parse_int,
              'n_per_edge': parse_int, 'd_branch_threshold': parse_number,
              'd_order': parse_int}


def _defaults():
    defaults = {key: getattr(WaterbagSpec(0.0, 0.0), key)
                for key in SPEC_KEYS if key not in REQUIRED_KEYS}
    config = IntegratorConfig()
    defaults.update({key: getattr(config, name)
                     for key, name in CONFIG_KEYS.items()})
    defaults.update(asdict(RunOptions()))
    return defaults


###############################################################################
# ## Configuration ############################################################
###############################################################################

def parse_settings(text):
    """key=value lines to a dict of strings; unknown keys are errors"""
    settings = {}
    errors = []
    for number, line in enumerate(text.splitlines(), 1):
        line = line.split('#', 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition('=')
        key = key.strip()
        if not sep or not key:
            errors.append("line {}: expected key=value, got '{}'".format(
                number, line))
        elif key not in CONVERTERS:
            errors.append("{} is not a known key (line {})".format(key,
                                                                   number))
        elif key in settings:
            errors.append("{} is given twice (line {})".format(key, number))
        else:
            settings[key] = value.strip()
    if errors:
        raise ConfigError(errors)
    return settings


def config_from_env(environ=None):
    """Settings found in FEL_<KEY> environment variables"""
    if environ is None:
        environ = os.environ
    settings = {}
    for key in CONVERTERS:
        name = ENV_PREFIX + key.upper()
        if name in environ:
            settings[key] = environ[name]
    return settings


def _read_source(source):
    if source is None:
        return ''
    if os.path.isfile(source):
        with open(source) as f:
            return f.read()
    if '\n' in source or '=' in source:
        return source
    raise ConfigError(["config file not found: {}".format(source)])


def build_settings(settings):
    """Typed WaterbagSpec, IntegratorConfig and RunOptions from raw settings.

    Values given as strings are converted; anything else is taken as is.
    All problems are collected into one ConfigError or SpecError.
    """
    values = _defaults()
    errors = []
    for key, value in settings.items():
        if not isinstance(value, str):
            values[key] = value
            continue
        try:
            values[key] = CONVERTERS[key](value)
        except ValueError:
            errors.append("{} has a malformed value: '{}'".format(key, value))
    for key in REQUIRED_KEYS:
        if key not in values:
            errors.append("{} is required".format(key))
    if errors:
        raise ConfigError(errors)

    spec = WaterbagSpec(**{key: values[key] for key in SPEC_KEYS})
    config = IntegratorConfig(**{name: values[key]
                                 for key, name in CONFIG_KEYS.items()})
    options = RunOptions(**{key: values[key] for key in OPTION_KEYS})
    for validate, item in ((validate_spec, spec), (validate_config, config),
                           (validate_options, options)):
        try:
            validate(item)
        except SpecError as error:
            errors.extend(error.errors)
    if errors:
        raise SpecError(errors)
    return spec, config, options


def validate_options(options):
    errors = []
    if options.n_per_edge < 8:
        errors.append("n_per_edge must be an integer of at least 8")
    if not options.d_branch_threshold >= 0:
        errors.append("d_branch_threshold must be non-negative")
    if options.d_order not in (2, 3):
        errors.append("d_order must be 2 or 3")
    if errors:
        raise SpecError(errors)
    return options


def parse_config(source=None, environ=None, overrides=None, base=None):
    """Resolves the settings of a run.

    Parameters
    ----------
    source : string, optional
        Path of a config file, or the config text itself.
    environ : mapping, optional (default=os.environ)
    overrides : dict, optional
        Highest precedence, e.g. from command line flags.
    base : dict, optional
        Lowest precedence above the defaults, e.g. a CSV metadata header.

    Returns
    -------
    spec : WaterbagSpec
    config : IntegratorConfig
    options : RunOptions
    """
    settings = dict(base or {})
    settings.update(parse_settings(_read_source(source)))
    settings.update(config_from_env(environ))
    settings.update(overrides or {})
    return build_settings(settings)


def format_config(spec, config, options=None):
    """Effective settings in config file syntax; parse_config reads them
    back to equal objects"""
    if options is None:
        options = RunOptions()
    lines = ['# waterbag']
    lines += ['{}={}'.format(key, format_value(getattr(spec, key)))
              for key in SPEC_KEYS]
    lines.append('# integrator')
    lines += ['{}={}'.format(key, format_value(getattr(config, name)))
              for key, name in CONFIG_KEYS.items()]
    lines.append('# run options')
    lines += ['{}={}'.format(key, format_value(getattr(options, key)))
              for key in OPTION_KEYS]
    return '\n'.join(lines) + '\n'


###############################################################################
# ## Subcommands ##############################################################
###############################################################################

def _banner(title):
    print('======================================')
    print(title)
    print('======================================')


def _load(args, extra=None):
    flags = (('dt', args.dt), ('t_end', args.t_end), ('stride', args.stride),
             ('workers', args.workers), ('deterministic', args.deterministic))
    overrides = {key: value for key, value in flags if value is not None}
    overrides.update(extra or {})
    return parse_config(args.config, overrides=overrides)


def _prediction(spec, times, options, order=None):
    if order is None:
        order = options.d_order
    with warnings.catch_warnings():
        warnings.simplefilter('ignore', ValidityWarning)
        return prediction_series(spec, times, order,
                                 options.d_branch_threshold)


def _prediction_metadata(spec, config, options):
    metadata = spec.as_dict()
    metadata.update(config.echo())
    metadata.update(asdict(options))
    metadata['in_window'] = in_window(spec)
    return metadata


def simulate(args):
    spec, config, options = _load(args)
    diary = Diary(args.out)
    series = run(spec, config)
    frame = series.to_frame()
    diary.save_table(SIMULATION_CSV, frame, series.metadata)

    _banner('Simulation alpha={:.6g} delta_p={:.6g} i0_norm={:.6g}'.format(
        spec.alpha, spec.delta_p, spec.i0_norm))
    print('* Samples = {}'.format(len(frame)))
    print('* Final intensity = {:.6g}'.format(frame['intensity'].iloc[-1]))
    print('* Max relative drift H = {:.3e}, P = {:.3e}'.format(
        series.max_drift['energy'], series.max_drift['momentum']))

    if args.svg:
        times = frame['t'].to_numpy()
        metadata = _prediction_metadata(spec, config, options)
        diary.save_table(PREDICTION_CSV, _prediction(spec, times, options),
                         metadata)
        if spec.i0_norm >= options.d_branch_threshold:
            diary.save_table(SECOND_ORDER_CSV,
                             _prediction(spec, times, options, 2), metadata)
        render_simulation(diary)
    return EXIT_OK


def predict(args):
    spec, config, options = _load(args)
    diary = Diary(args.out)
    times = config.sample_times()
    if not in_window(spec):
        logger.warning("alpha=%.6g, i0_norm=%.6g is outside the validity "
                       "window of the expansions", spec.alpha, spec.i0_norm)
    diary.save_table(PREDICTION_CSV, _prediction(spec, times, options),
                     _prediction_metadata(spec, config, options))

    pairs = [parse_pair(text) for text in args.collapse]
    if not pairs and spec.i0_norm > 0:
        pairs = [(spec.i0_norm, spec.alpha)]
    tau = np.linspace(0.0, args.tau_max, 51)
    blocks = []
    for i0_norm, alpha in pairs:
        case = spec.replace(i0_norm=i0_norm, alpha=alpha)
        validate_spec(case)
        with warnings.catch_warnings():
            warnings.simplefilter('ignore', ValidityWarning)
            block = gain_curve(case, tau)
        block.insert(0, 'alpha', alpha)
        block.insert(0, 'i0_norm', i0_norm)
        block['in_window'] = in_window(case)
        if not in_window(case):
            logger.warning("Gain curve i0_norm=%.6g alpha=%.6g is outside "
                           "the validity window", i0_norm, alpha)
        blocks.append(block)

    _banner('Prediction alpha={:.6g} delta_p={:.6g} i0_norm={:.6g}'.format(
        spec.alpha, spec.delta_p, spec.i0_norm))
    print('* s_alpha = {:.6g}'.format(s_alpha(spec.alpha)))
    if spec.i0_norm > 0:
        print('* T_c = {:.6g}'.format(characteristic_time(spec)))
    if blocks:
        diary.save_table(GAIN_CSV, pd.concat(blocks, ignore_index=True),
                         {'tau_max': args.tau_max})
        if args.svg:
            render_gain(diary)
    else:
        logger.info("gain undefined for zero seed; %s not written", GAIN_CSV)
    return EXIT_OK


def parse_pair(text):
    """'I0:ALPHA', e.g. '0.8:pi/2'"""
    i0_text, sep, alpha_text = text.partition(':')
    if not sep:
        raise ConfigError(["collapse expects I0:ALPHA, got '{}'".format(text)])
    try:
        return parse_number(i0_text), parse_number(alpha_text)
    except ValueError:
        raise ConfigError(["collapse has a malformed value: '{}'".format(
            text)])


def dispersion(args):
    if args.delta_p is not None:
        delta_p = parse_number(args.delta_p)
    elif args.config is not None:
        delta_p = _load(args)[0].delta_p
    else:
        delta_p = 0.0
    profile = EquilibriumProfile.waterbag(delta_p)
    roots = solve_dispersion(profile, args.tol, args.method)
    frame = pd.DataFrame([[root.omega.real, root.omega.imag, root.residual,
                           root.classification] for root in roots],
                         columns=['re', 'im', 'residual', 'class'])
    diary = Diary(args.out)
    diary.save_table(DISPERSION_CSV, frame,
                     {'kind': profile.kind, 'delta_p': delta_p,
                      'method': args.method, 'growth_rate': growth_rate(roots)})
    print(','.join(frame.columns))
    for root in roots:
        print('{!r},{!r},{!r},{}'.format(root.omega.real, root.omega.imag,
                                         root.residual, root.classification))
    return EXIT_OK


def contour(args):
    extra = {}
    if args.n_per_edge is not None:
        extra['n_per_edge'] = args.n_per_edge
    spec, config, options = _load(args, extra)
    diary = Diary(args.out)
    snapshot_times = np.arange(0.0, config.t_end + 1e-9, args.snapshot_every)
    series, fits = track_boundary(spec, config, options.n_per_edge,
                                  snapshot_times)
    flip = series.flip_time
    diary.save_table(CONTOUR_CSV, fits, series.metadata,
                     footer={'flip_time': 'none' if flip is None else flip})

    blocks = []
    for t in sorted(series.snapshots):
        state = series.snapshots[t]
        every = max(1, state.n_particles // MAX_SNAPSHOT_PARTICLES)
        blocks.append(pd.DataFrame({'t': t, 'theta': state.theta[::every],
                                    'p': state.p[::every]}))
    if blocks:
        diary.save_table(SNAPSHOT_CSV, pd.concat(blocks, ignore_index=True),
                         series.metadata)

    _banner('Contour alpha={:.6g} delta_p={:.6g} i0_norm={:.6g}'.format(
        spec.alpha, spec.delta_p, spec.i0_norm))
    print('* Flip time = {}'.format('none' if flip is None
                                    else '{:.6g}'.format(flip)))
    print('* Max rms residual = {:.3e}'.format(fits['rms_residual'].max()))
    if args.svg and blocks:
        render_contour(diary)
    return EXIT_OK


def compare(args):
    sim_path = args.sim or os.path.join(args.out, SIMULATION_CSV)
    if not os.path.isfile(sim_path):
        raise ConfigError(["simulation table not found: {}".format(sim_path)])
    sim, header = read_table(sim_path)
    base = {key: value for key, value in header.items() if key in CONVERTERS}
    flags = (('dt', args.dt), ('t_end', args.t_end), ('stride', args.stride))
    overrides = {key: value for key, value in flags if value is not None}
    spec, config, options = parse_config(args.config, overrides=overrides,
                                         base=base)

    if args.pred is not None:
        pred, _ = read_table(args.pred)
    else:
        pred = _prediction(spec, sim['t'].to_numpy(), options)
    tolerances = dict(DEFAULT_TOLERANCES)
    if spec.delta_p == 0:
        # zero energy has no relative error
        tolerances.pop('energy')
    windows = [tuple(window) for window in args.window] or DEFAULT_WINDOWS
    report = compare_series(sim, pred, windows, tolerances,
                            interpolate=args.interpolate)

    diary = Diary(args.out)
    diary.save_table(COMPARISON_CSV, report.to_frame(),
                     {'simulation': sim_path, 'status': report.summary()})
    logger.info("\n%s", report)
    print(report.summary())
    return EXIT_OK if report.passed else EXIT_FAIL


###############################################################################
# ## Figures ##################################################################
###############################################################################

def _save(diary, fig):
    return FELplots.savefig(fig, diary.path_figures, prefix='')


def render_simulation(diary):
    """Figures of a simulate run, drawn from its CSV tables only"""
    sim, metadata = read_table(diary.filename(SIMULATION_CSV))
    pred, _ = read_table(diary.filename(PREDICTION_CSV))
    alpha = float(metadata['alpha'])
    i0_norm = float(metadata['i0_norm'])
    second = None
    if os.path.isfile(diary.filename(SECOND_ORDER_CSV)):
        second, _ = read_table(diary.filename(SECOND_ORDER_CSV))

    paths = [_save(diary, FELplots.plot_intensity(sim, s_alpha(alpha), pred)),
             _save(diary, FELplots.plot_dispersion(sim, pred, second)),
             _save(diary, FELplots.plot_field_y(sim, pred))]
    if i0_norm > 0:
        t_c = math.sqrt(i0_norm) / s_alpha(alpha)
        curve = ('simulation', sim['t'] / t_c, sim['intensity'] / i0_norm)
        paths.append(_save(diary, FELplots.plot_gain_collapse([curve])))
    return paths


def render_gain(diary):
    gain, _ = read_table(diary.filename(GAIN_CSV))
    curves = []
    for (i0_norm, alpha), block in gain.groupby(['i0_norm', 'alpha'],
                                                sort=False):
        label = 'I0={:.3g}, alpha={:.3g}'.format(i0_norm, alpha)
        curves.append((label, block['tau'], block['gain']))
    return _save(diary, FELplots.plot_gain_collapse(curves))


def render_contour(diary):
    snapshots, metadata = read_table(diary.filename(SNAPSHOT_CSV))
    fits, _ = read_table(diary.filename(CONTOUR_CSV))
    return _save(diary, FELplots.plot_phase_space(snapshots, fits,
                                                  float(metadata['alpha'])))


###############################################################################
# ## Entry point ##############################################################
###############################################################################

COMMANDS = {'simulate': simulate, 'predict': predict,
            'dispersion': dispersion, 'contour': contour, 'compare': compare}


def build_parser():
    parser = ArgumentParser(description=("Waterbag free-electron laser: "
                                         "N-body runs, short-time "
                                         "predictions and their comparison"))
    subparsers = parser.add_subparsers(dest='command', metavar='COMMAND')
    subparsers.required = True

    common = ArgumentParser(add_help=False)
    common.add_argument("--config", metavar='PATH', default=None,
                        help="Config file with key=value lines.")
    common.add_argument("--out", metavar='DIR', default='results',
                        help="Folder for the CSV tables and figures.")
    common.add_argument("--dt", type=float, default=None)
    common.add_argument("--t-end", dest='t_end', type=float, default=None)
    common.add_argument("--stride", type=int, default=None,
                        help="Steps between observer samples.")
    common.add_argument("--workers", type=int, default=None,
                        help="Threads for the reductions (default: all "
                             "cores).")
    common.add_argument("--deterministic", action='store_true', default=None,
                        help="Sum every reduction in one exact pass.")
    common.add_argument("--svg", action='store_true',
                        help="Also render SVG figures from the tables.")
    common.add_argument("-v", "--verbose", action='store_true')

    subparsers.add_parser('simulate', parents=[common],
                          help="Run the N-body system.")
    predict_parser = subparsers.add_parser('predict', parents=[common],
                                           help="Evaluate the expansions.")
    predict_parser.add_argument("--collapse", metavar='I0:ALPHA',
                                action='append', default=[],
                                help="Gain curve for this seed and bunch "
                                     "width; repeat for several.")
    predict_parser.add_argument("--tau-max", dest='tau_max', type=float,
                                default=0.5)

    dispersion_parser = subparsers.add_parser(
        'dispersion', parents=[common], help="Roots of the dispersion "
                                             "relation.")
    dispersion_parser.add_argument("--delta-p", dest='delta_p', default=None,
                                   help="Waterbag width (default: from the "
                                        "config, else the cold beam).")
    dispersion_parser.add_argument("--method", choices=['cubic', 'newton'],
                                   default='cubic')
    dispersion_parser.add_argument("--tol", type=float, default=1e-12)

    contour_parser = subparsers.add_parser(
        'contour', parents=[common], help="Track the waterbag boundary.")
    contour_parser.add_argument("--n-per-edge", dest='n_per_edge', type=int,
                                default=None)
    contour_parser.add_argument("--snapshot-every", dest='snapshot_every',
                                type=float, default=0.25)

    compare_parser = subparsers.add_parser(
        'compare', parents=[common], help="Compare a simulation with the "
                                          "prediction.")
    compare_parser.add_argument("--sim", metavar='CSV', default=None,
                                help="Simulation table (default: "
                                     "OUT/simulation.csv).")
    compare_parser.add_argument("--pred", metavar='CSV', default=None,
                                help="Prediction table (default: computed "
                                     "from the simulation header).")
    compare_parser.add_argument("--window", nargs=2, type=float,
                                metavar=('T_START', 'T_END'),
                                action='append', default=[])
    compare_parser.add_argument("--interpolate", action='store_true')
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exit:
        return EXIT_OK if not exit.code else EXIT_INVALID

    logging.basicConfig(level=logging.INFO if args.verbose
                        else logging.WARNING,
                        format='%(levelname)s %(name)s: %(message)s')
    logging.captureWarnings(True)
    try:
        return COMMANDS[args.command](args)
    except SpecError as error:
        for message in error.errors:
            print("error: {}".format(message), file=sys.stderr)
        return EXIT_INVALID
    except NumericalError as error:
        print("numerical abort: {}".format(error), file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as error:
        print("error: {}".format(error), file=sys.stderr)
        return EXIT_INVALID
