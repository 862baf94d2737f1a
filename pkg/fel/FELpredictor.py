#!/usr/bin/env python
# -*- coding: utf-8 -*-
""" Closed-form short-time expansions of the waterbag evolution.

    Every quantity is a truncated power series in t whose coefficients depend
    on alpha, delta_p and the seed amplitude A0 = sqrt(I0/N). The series are
    kept as Expansion objects that know the power at which they were cut, so
    a comparison can scale its tolerance with t**order.

    Evaluating outside the window where the expansions were found accurate
    (alpha <= pi/2, I0/N <= 0.8) works, but raises a ValidityWarning.
"""

# External modules
import math
import warnings
from dataclasses import dataclass

import numpy as np
import pandas as pd

from fel.FELwaterbag import validate_spec, observable_columns


ALPHA_WINDOW = math.pi / 2
I0_WINDOW = 0.8
BRANCH_THRESHOLD = 1e-6

VALIDITY_NOTE = ("accurate for initial bunching alpha <= pi/2 and seed "
                 "intensity I0/N <= 0.8")


class ValidityWarning(UserWarning):
    pass


@dataclass(frozen=True)
class Expansion(object):
    """Truncated power series sum_k c_k t**k + O(t**truncation_order)"""
    coefficients: tuple
    truncation_order: int
    validity_note: str = VALIDITY_NOTE
    in_window: bool = True

    def __post_init__(self):
        powers = [power for power, _ in self.coefficients]
        if any(b <= a for a, b in zip(powers, powers[1:])):
            raise ValueError("Powers must be strictly increasing: "
                             "{}".format(powers))
        if powers and self.truncation_order <= powers[-1]:
            raise ValueError("Truncation order {} must exceed the highest "
                             "power {}".format(self.truncation_order,
                                               powers[-1]))

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        value = np.zeros_like(t)
        for power, coefficient in self.coefficients:
            value = value + coefficient * t ** power
        return float(value) if value.ndim == 0 else value

    def derivative(self):
        terms = tuple((power - 1, power * coefficient)
                      for power, coefficient in self.coefficients
                      if power > 0)
        return Expansion(terms, self.truncation_order - 1, self.validity_note,
                         self.in_window)

    def coefficient(self, power):
        return dict(self.coefficients).get(power, 0.0)


def s_alpha(alpha):
    """sin(alpha)/alpha, with the limit 1 for alpha < 1e-8"""
    if alpha < 0:
        raise ValueError("alpha must be non-negative: {}".format(alpha))
    if alpha < 1e-8:
        return 1.0
    return math.sin(alpha) / alpha


def in_window(spec):
    return (spec.alpha <= ALPHA_WINDOW + 1e-12
            and spec.i0_norm <= I0_WINDOW + 1e-12)


def _window(spec):
    inside = in_window(spec)
    if not inside:
        warnings.warn("alpha={:.6g}, I0/N={:.6g} is outside the window where "
                      "the expansions are {}".format(spec.alpha, spec.i0_norm,
                                                     VALIDITY_NOTE),
                      ValidityWarning, stacklevel=3)
    return inside


def _expansion(terms, order, spec):
    return Expansion(tuple(terms), order, VALIDITY_NOTE, _window(spec))


###############################################################################
# ## Field, boundaries and parabola ###########################################
###############################################################################

def field_x_expansion(spec):
    return _expansion([(0, spec.a0), (1, s_alpha(spec.alpha))], 4, spec)


def _ay_factor(s):
    return 4.0 - 8.0 * s + 9.0 * s * s


def field_y_expansion(spec):
    s = s_alpha(spec.alpha)
    return _expansion([(3, spec.a0 / 15.0 * _ay_factor(s)),
                       (4, s / 60.0 * _ay_factor(s))], 5, spec)


def theta_boundary_expansion(spec, side):
    sign = _side(side)
    s = s_alpha(spec.alpha)
    c = math.cos(spec.alpha)
    return _expansion([(0, sign * spec.alpha), (2, -spec.a0 * c),
                       (3, -s * c / 3.0)], 4, spec)


def v_pm_expansion(spec, side):
    sign = _side(side)
    return _expansion([(0, sign * spec.delta_p / 2.0), (1, -2.0 * spec.a0),
                       (2, -s_alpha(spec.alpha))], 3, spec)


def u_expansion(spec):
    s = s_alpha(spec.alpha)
    alpha2 = spec.alpha * spec.alpha
    return _expansion([(1, 6.0 / alpha2 * (1.0 - s) * spec.a0),
                       (2, 3.0 / alpha2 * s * (1.0 - s))], 3, spec)


def intensity_expansion(spec):
    s = s_alpha(spec.alpha)
    return _expansion([(0, spec.i0_norm), (1, 2.0 * spec.a0 * s),
                       (2, s * s)], 4, spec)


def _side(side):
    if side in ('+', 1, '+1', 'plus', 'top'):
        return 1.0
    if side in ('-', -1, '-1', 'minus', 'bottom'):
        return -1.0
    raise ValueError("Unknown side: {}".format(side))


def field_x(t, spec):
    """A_x = A0 + s_alpha t + O(t^4)"""
    return field_x_expansion(spec)(t)


def field_y(t, spec):
    """A_y = (A0/15)(4 - 8s + 9s^2) t^3 + (s/60)(4 - 8s + 9s^2) t^4 + O(t^5)"""
    return field_y_expansion(spec)(t)


def theta_boundary(t, spec, side):
    """Lateral boundary phase, +-alpha - A0 cos(alpha) t^2 - s cos(alpha) t^3/3"""
    return theta_boundary_expansion(spec, side)(t)


def v_pm(t, spec, side):
    return v_pm_expansion(spec, side)(t)


def u_coeff(t, spec):
    """Curvature of the parabolic boundaries P(theta) = u theta^2 + v"""
    return u_expansion(spec)(t)


def p_boundary(theta, t, spec, side):
    return u_coeff(t, spec) * np.asarray(theta) ** 2 + v_pm(t, spec, side)


###############################################################################
# ## Macroscopic observables ##################################################
###############################################################################

def intensity(t, spec):
    return intensity_expansion(spec)(t)


def characteristic_time(spec):
    """T_c = A0 / s_alpha; infinite for a homogeneous bunch"""
    s = s_alpha(spec.alpha)
    if abs(s) < 1e-12:
        return math.inf
    return spec.a0 / s


def gain(t, spec):
    """G = (1 + t/T_c)^2

    Raises
    ------
    ValueError
        For a zero seed, where I/I0 is undefined.
    """
    if not spec.i0_norm > 0:
        raise ValueError("gain undefined for zero seed")
    _window(spec)
    ratio = s_alpha(spec.alpha) * np.asarray(t, dtype=float) / spec.a0
    value = (1.0 + ratio) ** 2
    return float(value) if value.ndim == 0 else value


def time_to_gain(g_star, spec):
    """t* = T_c (sqrt(G*) - 1), the inverse of gain"""
    if not spec.i0_norm > 0:
        raise ValueError("gain undefined for zero seed")
    if g_star < 1:
        raise ValueError("Target gain must be at least 1: {}".format(g_star))
    growth = math.sqrt(g_star) - 1.0
    if growth == 0.0:
        return 0.0
    return characteristic_time(spec) * growth


def gain_curve(spec, tau):
    """Gain against rescaled time tau = t/T_c, with the matching times.

    Returns
    -------
    frame : DataFrame with columns tau, t, gain
    """
    tau = np.asarray(tau, dtype=float)
    t = tau * characteristic_time(spec)
    return pd.DataFrame({'tau': tau, 't': t, 'gain': gain(t, spec)})


def energy_dispersion_expansion(spec, order=3,
                                branch_threshold=BRANCH_THRESHOLD):
    """Energy dispersion D(t).

    For seeds above branch_threshold the (t/T_c) form is used, written as
    (16/5) I0 (s-1)^2 t^2 + (16/5) sqrt(I0) (s-1)^2 s t^3 so that it stays
    finite when s_alpha vanishes; `order` 2 keeps only the first term. Below
    the threshold the t^4 law (1/5)(4s^4 - 8s^3 + 4s^2) t^4 is used.
    """
    if order not in (2, 3):
        raise ValueError("Dispersion order must be 2 or 3: {}".format(order))
    s = s_alpha(spec.alpha)
    d0 = spec.delta_p ** 2 / 12.0
    if spec.i0_norm < branch_threshold:
        quartic = (4.0 * s ** 4 - 8.0 * s ** 3 + 4.0 * s ** 2) / 5.0
        return _expansion([(0, d0), (4, quartic)], 5, spec)
    prefactor = 16.0 / 5.0 * (s - 1.0) ** 2
    terms = [(0, d0), (2, prefactor * spec.i0_norm)]
    if order == 3:
        terms.append((3, prefactor * spec.a0 * s))
    return _expansion(terms, order + 1, spec)


def energy_dispersion(t, spec, order=3, branch_threshold=BRANCH_THRESHOLD):
    return energy_dispersion_expansion(spec, order, branch_threshold)(t)


def bunching_prediction(k, spec):
    """b_k = sin(k alpha)/(k alpha) + O(t^3)"""
    if k < 1:
        raise ValueError("Harmonic must be positive: {}".format(k))
    return s_alpha(k * spec.alpha)


###############################################################################
# ## Conservation bookkeeping #################################################
###############################################################################

def _contour_terms(t, spec):
    theta_plus = theta_boundary(t, spec, '+')
    theta_minus = theta_boundary(t, spec, '-')
    v_plus = v_pm(t, spec, '+')
    v_minus = v_pm(t, spec, '-')
    return (theta_plus, theta_minus, u_coeff(t, spec), v_plus + v_minus,
            v_plus - v_minus)


def momentum_balance(t, spec):
    """I0 minus the momentum P/N of the parabolic waterbag and the field.

    Vanishes at t = 0 and grows like a high power of t when the expansions
    are mutually consistent.
    """
    theta_plus, theta_minus, u, v_bar, dv = _contour_terms(t, spec)
    particles = spec.f0 * ((theta_plus ** 3 - theta_minus ** 3) * u * dv / 3.0
                           + (theta_plus - theta_minus) * v_bar * dv / 2.0)
    field = field_x(t, spec) ** 2 + field_y(t, spec) ** 2
    return spec.i0_norm - (field + particles)


def energy_balance(t, spec):
    """delta_p^2/24 minus the energy H/N of the parabolic waterbag.

    The field part is written 2 (A_y dA_x/dt - A_x dA_y/dt), using the
    field equations to replace the phase averages.
    """
    theta_plus, theta_minus, u, v_bar, dv = _contour_terms(t, spec)
    kinetic = spec.f0 / 6.0 * (
        0.6 * (theta_plus ** 5 - theta_minus ** 5) * u * u * dv
        + (theta_plus ** 3 - theta_minus ** 3) * u * v_bar * dv
        + (theta_plus - theta_minus) * dv / 4.0 * (dv * dv + 3.0 * v_bar ** 2))
    ax = field_x_expansion(spec)
    ay = field_y_expansion(spec)
    potential = 2.0 * (ay(t) * ax.derivative()(t) - ax(t) * ay.derivative()(t))
    return spec.delta_p ** 2 / 24.0 - (kinetic + potential)


###############################################################################
# ## Prediction table #########################################################
###############################################################################

EXPANSIONS = {'field_x': field_x_expansion, 'field_y': field_y_expansion,
              'intensity': intensity_expansion, 'u': u_expansion,
              'dispersion': energy_dispersion_expansion}


def expansion(name, spec, **kwargs):
    """Expansion object of a named closed form, e.g. expansion('u', spec)"""
    try:
        builder = EXPANSIONS[name]
    except KeyError:
        raise ValueError("Unknown expansion: {}".format(name))
    return builder(spec, **kwargs)


def prediction_series(spec, times, order=3, branch_threshold=BRANCH_THRESHOLD):
    """Predicted observables at the given times, in the simulation schema.

    Energy and momentum are the conserved initial values delta_p^2/24 and I0.
    """
    validate_spec(spec)
    times = np.asarray(times, dtype=float)
    with warnings.catch_warnings():
        warnings.simplefilter('ignore', ValidityWarning)
        columns = {'t': times, 'ax': field_x(times, spec),
                   'ay': field_y(times, spec)}
        columns['intensity'] = columns['ax'] ** 2 + columns['ay'] ** 2
        for k in range(1, spec.k_max + 1):
            b_k = bunching_prediction(k, spec)
            columns['b{}_mag'.format(k)] = np.full(times.shape, abs(b_k))
            columns['b{}_phase'.format(k)] = np.full(times.shape,
                                                     0.0 if b_k >= 0 else math.pi)
        columns['dispersion'] = energy_dispersion(times, spec, order,
                                                  branch_threshold)
    _window(spec)
    columns['energy'] = np.full(times.shape, spec.delta_p ** 2 / 24.0)
    columns['momentum'] = np.full(times.shape, spec.i0_norm)
    return pd.DataFrame(columns, columns=observable_columns(spec.k_max))
