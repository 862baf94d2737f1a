#!/usr/bin/env python
# -*- coding: utf-8 -*-
""" Linear stability of homogeneous beams.

    For a homogeneous equilibrium f0(p) the normal modes exp(-i omega t) obey

        omega = integral of eta(p) / (p - omega) dp,   eta = df0/dp.

    The cold beam and the waterbag of width delta_p reduce it to the cubic
    omega (omega^2 - a^2) = 1 with a = delta_p/2. Im(omega) > 0 is an
    unstable mode; the field grows as exp(Im(omega) t) and the intensity as
    exp(2 Im(omega) t).
"""

# External modules
import math
import logging
from dataclasses import dataclass

import numpy as np
from scipy.optimize import newton, linear_sum_assignment

from fel.FELwaterbag import SpecError, NumericalError


logger = logging.getLogger(__name__)

COLD_BEAM = 'cold-beam'
WATERBAG = 'waterbag'
PROFILE_KINDS = (COLD_BEAM, WATERBAG)

UNSTABLE = 'unstable'
NEUTRAL = 'neutral'
DAMPED = 'damped'

NEUTRAL_BAND = 1e-10
HOMOTOPY_STEP = 0.05
MERGE_DISTANCE = 1e-6


@dataclass(frozen=True)
class EquilibriumProfile(object):
    """Homogeneous momentum distribution f0(p), normalised to one."""
    kind: str = COLD_BEAM
    delta_p: float = 0.0

    def __post_init__(self):
        errors = []
        if self.kind not in PROFILE_KINDS:
            errors.append("kind must be one of {}".format(
                ', '.join(PROFILE_KINDS)))
        if not (math.isfinite(self.delta_p) and self.delta_p >= 0):
            errors.append("delta_p must be non-negative")
        if self.kind == COLD_BEAM and self.delta_p != 0:
            errors.append("delta_p must be 0 for a cold beam")
        if errors:
            raise SpecError(errors)

    @classmethod
    def cold_beam(cls):
        return cls(COLD_BEAM, 0.0)

    @classmethod
    def waterbag(cls, delta_p):
        if delta_p == 0:
            return cls.cold_beam()
        return cls(WATERBAG, float(delta_p))

    @property
    def half_width(self):
        return self.delta_p / 2.0

    def function(self, p):
        """f0(p); the cold beam has no density function"""
        if self.kind == COLD_BEAM:
            raise ValueError("The cold beam is a delta distribution")
        p = np.asarray(p, dtype=float)
        return np.where(np.abs(p) <= self.half_width, 1.0 / self.delta_p, 0.0)

    def derivative(self):
        """eta = df0/dp as a list of (position, weight) delta contributions"""
        if self.kind == COLD_BEAM:
            return []
        a = self.half_width
        return [(-a, 1.0 / self.delta_p), (a, -1.0 / self.delta_p)]


@dataclass(frozen=True)
class DispersionRoot(object):
    omega: complex
    residual: float
    classification: str

    @property
    def growth(self):
        return self.omega.imag


def classify(omega, band=NEUTRAL_BAND):
    if omega.imag > band:
        return UNSTABLE
    if omega.imag < -band:
        return DAMPED
    return NEUTRAL


def dispersion_polynomial(profile):
    """Coefficients of omega^3 - a^2 omega - 1, highest power first"""
    a = profile.half_width
    return np.array([1.0, 0.0, -a * a, -1.0])


def dispersion_function(omega, profile):
    """D(omega) = omega - 1/(omega^2 - a^2), zero on the normal modes"""
    a = profile.half_width
    return omega - 1.0 / (omega * omega - a * a)


def _dispersion_derivative(omega, profile):
    a = profile.half_width
    return 1.0 + 2.0 * omega / (omega * omega - a * a) ** 2


def _residual(omega, a):
    return abs(omega * (omega * omega - a * a) - 1.0)


def _polish(omega, a, iterations=3):
    for _ in range(iterations):
        slope = 3.0 * omega * omega - a * a
        if slope == 0:
            break
        omega = omega - (omega * (omega * omega - a * a) - 1.0) / slope
    return omega


def _cold_roots():
    return [complex(math.cos(phi), math.sin(phi))
            for phi in (0.0, 2.0 * math.pi / 3.0, -2.0 * math.pi / 3.0)]


def _split_merged(roots):
    """Restores a root lost when two iterates land on the same point.

    The roots of omega^3 - a^2 omega - 1 sum to zero, so the third one is
    minus the sum of the other two.
    """
    roots = list(roots)
    for i in range(3):
        for j in range(i + 1, 3):
            scale = max(1.0, abs(roots[i]))
            if abs(roots[i] - roots[j]) <= MERGE_DISTANCE * scale:
                k = 3 - i - j
                roots[j] = -(roots[i] + roots[k])
                logger.debug("Recovered root %s from merged pair at %s",
                             roots[j], roots[i])
    return roots


def _newton_roots(profile, tol):
    """Follows the cold-beam roots to the target width"""
    target = profile.delta_p
    n_steps = max(1, int(math.ceil(target / HOMOTOPY_STEP)))
    roots = _cold_roots()
    for width in np.linspace(0.0, target, n_steps + 1)[1:]:
        stage = EquilibriumProfile.waterbag(width)
        roots = [newton(dispersion_function, omega,
                        fprime=_dispersion_derivative, args=(stage, ),
                        tol=tol, maxiter=100)
                 for omega in roots]
        roots = _split_merged(roots)
    return [complex(omega) for omega in roots]


def solve_dispersion(profile, tol=1e-12, method='cubic'):
    """All three normal modes of the profile.

    Parameters
    ----------
    profile : EquilibriumProfile
    tol : float, optional (default=1e-12)
        Bound on the back-substitution residual |omega(omega^2-a^2) - 1|,
        relative to max(1, |omega|^3).
    method : string, optional (default='cubic')
        'cubic' takes the companion matrix roots; 'newton' continues the
        cold-beam roots in delta_p and solves D(omega) = 0 in the complex
        plane.

    Returns
    -------
    roots : list of DispersionRoot, sorted by Im(omega) descending
    """
    if not tol > 0:
        raise ValueError("tol must be positive: {}".format(tol))
    a = profile.half_width
    if method == 'cubic':
        candidates = [complex(omega)
                      for omega in np.roots(dispersion_polynomial(profile))]
    elif method == 'newton':
        candidates = _newton_roots(profile, tol)
    else:
        raise ValueError("Unknown method: {}".format(method))

    roots = []
    for omega in candidates:
        omega = _polish(omega, a)
        residual = _residual(omega, a)
        if residual > tol * max(1.0, abs(omega) ** 3):
            raise NumericalError("Root {} has residual {:.3e} above {:.1e}"
                                 .format(omega, residual, tol))
        roots.append(DispersionRoot(omega, residual, classify(omega)))
    roots.sort(key=_ordering)
    logger.debug("Roots for delta_p=%.6g: %s", profile.delta_p,
                 [root.omega for root in roots])
    return roots


def _ordering(root):
    growth = 0.0 if root.classification == NEUTRAL else root.omega.imag
    return (-growth, -root.omega.real)


def growth_rate(roots):
    """max(0, max Im omega); the intensity e-folds at twice this rate"""
    return max(0.0, max(root.omega.imag for root in roots))


def stability_threshold():
    """Waterbag width above which the three roots are real"""
    return 2.0 * (27.0 / 4.0) ** (1.0 / 6.0)


def continue_roots(delta_p_values, tol=1e-12):
    """Roots along a sweep of waterbag widths, paired by proximity.

    Returns
    -------
    branches : ndarray of complex, shape (n_values, 3)
        Column j follows one root continuously; the first row is ordered as
        solve_dispersion returns it.
    """
    branches = []
    previous = None
    for delta_p in delta_p_values:
        profile = EquilibriumProfile.waterbag(delta_p)
        current = np.array([root.omega
                            for root in solve_dispersion(profile, tol)])
        if previous is not None:
            distance = np.abs(previous[:, None] - current[None, :])
            _, order = linear_sum_assignment(distance)
            current = current[order]
        branches.append(current)
        previous = current
    return np.array(branches)
