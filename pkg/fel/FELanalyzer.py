#!/usr/bin/env python
# -*- coding: utf-8 -*-
""" Ensemble observables of a particle state and the theory-vs-simulation
    error report.

    All O(N) reductions use exact (math.fsum) summation so their value does
    not depend on the order in which the particles are stored.
"""

# External modules
import math
import logging
from collections import namedtuple

import numpy as np
import pandas as pd
from sklearn.linear_model import LinearRegression

from fel.FELwaterbag import ObservableSample


logger = logging.getLogger(__name__)

EPS = 1e-12

Tolerance = namedtuple('Tolerance', ['relative', 'min_exponent'])
Tolerance.__new__.__defaults__ = (None, )

# Relative error bounds used when the caller does not declare its own
DEFAULT_TOLERANCES = {'intensity': Tolerance(0.05),
                      'dispersion': Tolerance(0.15),
                      'energy': Tolerance(1e-6)}

DEFAULT_WINDOWS = ((0.05, 0.5), )


def fmean(values):
    values = np.asarray(values, dtype=float).ravel()
    return math.fsum(values.tolist()) / values.shape[0]


def bunching_of(state, k=1):
    """Bunching coefficient b_k = <exp(-i k theta)>

    Returns
    -------
    magnitude : float
    phase : float
        Argument of b_k in (-pi, pi].
    """
    if k < 1:
        raise ValueError("Harmonic must be positive: {}".format(k))
    theta = np.asarray(state.theta if hasattr(state, 'theta') else state,
                       dtype=float)
    real = fmean(np.cos(k * theta))
    imag = -fmean(np.sin(k * theta))
    return math.hypot(real, imag), math.atan2(imag, real)


def dispersion_of(state):
    """Energy dispersion D = <p^2> - <p>^2, evaluated in two passes"""
    p = np.asarray(state.p if hasattr(state, 'p') else state, dtype=float)
    centre = fmean(p)
    return fmean((p - centre) ** 2)


def observe(state, k_max, invariants):
    """Builds the ObservableSample of a state.

    Parameters
    ----------
    state : SystemState
    k_max : int
        Number of bunching harmonics.
    invariants : callable
        Returns (H/N, P/N) of the state.
    """
    magnitudes = []
    phases = []
    for k in range(1, k_max + 1):
        mag, phase = bunching_of(state, k)
        magnitudes.append(mag)
        phases.append(phase)
    energy, momentum = invariants(state)
    return ObservableSample(t=state.t, a_x=state.a_x, a_y=state.a_y,
                            b_mag=tuple(magnitudes), b_phase=tuple(phases),
                            dispersion=dispersion_of(state), energy=energy,
                            momentum=momentum)


def fit_power_law(t, values):
    """Least squares slope of log|values| against log t.

    Entries that are zero or not finite are ignored. Returns nan when fewer
    than two entries remain.
    """
    t = np.asarray(t, dtype=float)
    values = np.abs(np.asarray(values, dtype=float))
    usable = (t > 0) & np.isfinite(values) & (values > 0)
    if np.count_nonzero(usable) < 2:
        return float('nan')
    X = np.log(t[usable]).reshape(-1, 1)
    y = np.log(values[usable])
    model = LinearRegression().fit(X, y)
    return float(model.coef_[0])


###############################################################################
# ## Error report #############################################################
###############################################################################

def _as_frame(series):
    if isinstance(series, pd.DataFrame):
        return series
    if hasattr(series, 'to_frame'):
        return series.to_frame()
    raise TypeError("Expected a DataFrame or a series with to_frame(), got "
                    "{}".format(type(series).__name__))


class ErrorReport(object):
    """Per observable and window errors with pass/fail against tolerances"""

    columns = ['observable', 't_start', 't_end', 'n_samples',
               'max_rel_error', 'mean_rel_error', 'exponent', 'tolerance',
               'min_exponent', 'passed']

    def __init__(self, rows):
        self.table = pd.DataFrame(rows, columns=self.columns)

    @property
    def passed(self):
        return bool(self.table['passed'].all())

    def to_frame(self):
        return self.table.copy()

    def summary(self):
        return 'PASS' if self.passed else 'FAIL'

    def __str__(self):
        return "{}\n{}".format(self.summary(), self.table.to_string(index=False))


def compare_series(sim, pred, windows=DEFAULT_WINDOWS, tolerances=None,
                   interpolate=False):
    """Relative error of a simulation against a prediction.

    Parameters
    ----------
    sim, pred : DataFrame or object with to_frame()
        Tables with a 't' column and one column per observable.
    windows : sequence of (t_start, t_end)
    tolerances : dict, optional (default=DEFAULT_TOLERANCES)
        Observable name -> Tolerance(relative, min_exponent). Only observables
        present in both tables are compared.
    interpolate : bool, optional (default=False)
        Interpolate the prediction linearly at the simulation times when the
        two time grids differ. Without it misaligned grids raise ValueError.

    Returns
    -------
    report : ErrorReport
    """
    sim = _as_frame(sim)
    pred = _as_frame(pred)
    if tolerances is None:
        tolerances = DEFAULT_TOLERANCES

    t = sim['t'].to_numpy(dtype=float)
    t_pred = pred['t'].to_numpy(dtype=float)
    aligned = (t.shape == t_pred.shape
               and np.allclose(t, t_pred, rtol=1e-12, atol=1e-12))
    if not aligned and not interpolate:
        raise ValueError("Time grids do not match ({} vs {} samples); use "
                         "interpolate=True".format(t.shape[0],
                                                   t_pred.shape[0]))

    rows = []
    for name, tolerance in tolerances.items():
        if name not in sim.columns or name not in pred.columns:
            logger.debug("Skipping %s: missing column", name)
            continue
        observed = sim[name].to_numpy(dtype=float)
        expected = pred[name].to_numpy(dtype=float)
        if not aligned:
            expected = np.interp(t, t_pred, expected)
        residual = observed - expected
        relative = np.abs(residual) / np.maximum(np.abs(expected), EPS)

        for t_start, t_end in windows:
            inside = (t >= t_start - 1e-12) & (t <= t_end + 1e-12)
            n_inside = int(np.count_nonzero(inside))
            if n_inside == 0:
                rows.append([name, t_start, t_end, 0, np.nan, np.nan, np.nan,
                             tolerance.relative, tolerance.min_exponent,
                             False])
                continue
            max_error = float(relative[inside].max())
            mean_error = float(relative[inside].mean())
            exponent = fit_power_law(t[inside], residual[inside])
            passed = max_error <= tolerance.relative
            if (tolerance.min_exponent is not None
                    and np.any(residual[inside] != 0)):
                passed = passed and exponent >= tolerance.min_exponent
            rows.append([name, t_start, t_end, n_inside, max_error,
                         mean_error, exponent, tolerance.relative,
                         tolerance.min_exponent, bool(passed)])

    report = ErrorReport(rows)
    logger.info("Comparison %s over %d rows", report.summary(), len(rows))
    return report
