#!/usr/bin/env python
# -*- coding: utf-8 -*-
""" Domain types of the waterbag model and the reproducible initial sampling.

    A waterbag is the rectangle [-alpha, alpha] x [-delta_p/2, delta_p/2] of the
    (theta, p) plane, filled with uniform density. Field quantities are stored
    per particle (a_x**2 + a_y**2 = I/N), so results do not depend on N.
"""

# External modules
import math
from dataclasses import dataclass, asdict, replace

import numpy as np


QUIET = 'quiet-lattice'
RANDOM = 'pseudo-random'
SAMPLING_MODES = (QUIET, RANDOM)

GOLDEN = (1.0 + math.sqrt(5.0)) / 2.0


class SpecError(ValueError):
    """Invalid parameters. `errors` holds every violation found, not only the
    first one."""

    def __init__(self, errors):
        self.errors = list(errors)
        super(SpecError, self).__init__('; '.join(self.errors))


class NumericalError(ArithmeticError):
    pass


@dataclass(frozen=True)
class WaterbagSpec(object):
    """Initial condition of a run.

    Parameters
    ----------
    alpha : float
        Half width of the phase interval, 0 < alpha <= pi.
    delta_p : float
        Full momentum spread, >= 0. delta_p = 0 is the cold beam.
    i0_norm : float, optional (default=0)
        Seed intensity per particle, I0/N.
    n_particles : int, optional (default=10000)
    sampling : string, optional (default='quiet-lattice')
        'quiet-lattice' or 'pseudo-random'. The random mode draws from `seed`.
    seed : int, optional (default=0)
    k_max : int, optional (default=4)
        Number of bunching harmonics reported by the observers.
    """
    alpha: float
    delta_p: float
    i0_norm: float = 0.0
    n_particles: int = 10000
    sampling: str = QUIET
    seed: int = 0
    k_max: int = 4

    @property
    def f0(self):
        if not self.delta_p > 0:
            raise ValueError("f0 is undefined for a cold beam (delta_p = 0)")
        return 1.0 / (2.0 * self.alpha * self.delta_p)

    @property
    def a0(self):
        return math.sqrt(self.i0_norm)

    def as_dict(self):
        return asdict(self)

    def replace(self, **changes):
        return replace(self, **changes)


def _is_integer(value):
    try:
        return int(value) == value
    except (TypeError, ValueError, OverflowError):
        return False


def validate_spec(spec):
    """Returns the spec unchanged or raises SpecError listing all violations"""
    errors = []
    alpha = spec.alpha
    if not math.isfinite(alpha):
        errors.append("alpha must be finite")
    elif alpha <= 0:
        errors.append("alpha must be positive")
    elif alpha > math.pi:
        errors.append("alpha exceeds pi")

    if not (math.isfinite(spec.delta_p) and spec.delta_p >= 0):
        errors.append("delta_p must be non-negative")
    if not (math.isfinite(spec.i0_norm) and spec.i0_norm >= 0):
        errors.append("i0_norm must be non-negative")
    if not _is_integer(spec.n_particles) or spec.n_particles < 2:
        errors.append("n_particles must be an integer of at least 2")
    if spec.sampling not in SAMPLING_MODES:
        errors.append("sampling must be one of {}".format(
            ', '.join(SAMPLING_MODES)))
    if not _is_integer(spec.seed) or spec.seed < 0:
        errors.append("seed must be a non-negative integer")
    if not _is_integer(spec.k_max) or spec.k_max < 1:
        errors.append("k_max must be an integer of at least 1")

    if errors:
        raise SpecError(errors)
    return spec


@dataclass
class SystemState(object):
    """Phases (unwrapped), momenta and the two field components at time t"""
    t: float
    theta: np.ndarray
    p: np.ndarray
    a_x: float
    a_y: float

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=float)
        self.p = np.asarray(self.p, dtype=float)
        if self.theta.ndim != 1 or self.theta.shape != self.p.shape:
            raise ValueError("theta and p must be 1-d arrays of equal length, "
                             "got {} and {}".format(self.theta.shape,
                                                    self.p.shape))
        self.t = float(self.t)
        self.a_x = float(self.a_x)
        self.a_y = float(self.a_y)

    @property
    def n_particles(self):
        return self.theta.shape[0]

    @property
    def intensity(self):
        return self.a_x * self.a_x + self.a_y * self.a_y

    def is_finite(self):
        return bool(math.isfinite(self.a_x) and math.isfinite(self.a_y)
                    and np.isfinite(self.theta).all()
                    and np.isfinite(self.p).all())

    def snapshot(self):
        """Read-only copy handed to observers"""
        theta = self.theta.copy()
        p = self.p.copy()
        theta.setflags(write=False)
        p.setflags(write=False)
        return SystemState(self.t, theta, p, self.a_x, self.a_y)


@dataclass(frozen=True)
class ObservableSample(object):
    t: float
    a_x: float
    a_y: float
    b_mag: tuple
    b_phase: tuple
    dispersion: float
    energy: float
    momentum: float

    @property
    def intensity(self):
        return self.a_x * self.a_x + self.a_y * self.a_y

    def as_row(self):
        row = {'t': self.t, 'ax': self.a_x, 'ay': self.a_y,
               'intensity': self.intensity}
        for k, (mag, phase) in enumerate(zip(self.b_mag, self.b_phase), 1):
            row['b{}_mag'.format(k)] = mag
            row['b{}_phase'.format(k)] = phase
        row['dispersion'] = self.dispersion
        row['energy'] = self.energy
        row['momentum'] = self.momentum
        return row


def observable_columns(k_max):
    columns = ['t', 'ax', 'ay', 'intensity']
    for k in range(1, k_max + 1):
        columns += ['b{}_mag'.format(k), 'b{}_phase'.format(k)]
    return columns + ['dispersion', 'energy', 'momentum']


def initial_field(spec):
    """Wave in phase with the bunch: real positive amplitude sqrt(I0/N)"""
    return math.sqrt(spec.i0_norm), 0.0


def fold_phase(theta):
    """Maps phases to [-pi, pi); only for binning and plotting"""
    return np.mod(np.asarray(theta) + np.pi, 2.0 * np.pi) - np.pi


###############################################################################
# ## Sampling #################################################################
###############################################################################

def _beamlet_count(n):
    root = math.sqrt(n)
    divisors = set()
    for d in range(1, int(root) + 1):
        if n % d == 0:
            divisors.update((d, n // d))
    return min(divisors, key=lambda d: (abs(d - root), d))


def _lattice_generator(n):
    target = int(round(n / GOLDEN))
    for offset in range(n + 1):
        for g in (target - offset, target + offset):
            if 0 < g < n and g % 2 == 1 and math.gcd(g, n) == 1:
                return g
    return 1


def beamlet_layout(n):
    """Assigns each of the n phase cells to a momentum beamlet.

    Returns
    -------
    index : ndarray of int, shape (n, )
        Beamlet of every particle; every beamlet holds the same number of
        particles and index[n-1-m] = n_beamlets-1-index[m].
    n_beamlets : int
    """
    m = np.arange(n, dtype=np.int64)
    n_beamlets = _beamlet_count(n)
    if n_beamlets >= max(2.0, math.sqrt(n) / 4.0):
        return m % n_beamlets, n_beamlets
    # Rank-1 lattice: one particle per beamlet, still centrally symmetric
    g = _lattice_generator(n)
    return (g * m + (g - 1) // 2) % n, n


def sample_waterbag(spec):
    """Places spec.n_particles points in the waterbag rectangle.

    The quiet lattice puts the phases on the n cell midpoints of
    [-alpha, alpha] and distributes the momentum beamlets over them so that
    the set is centrally symmetric, the bunching is the exact midpoint sum of
    sin(k alpha)/(k alpha) and the momentum variance is exactly delta_p**2/12.
    The pseudo-random mode jitters the same cells with numpy's generator seeded
    by spec.seed.
    """
    validate_spec(spec)
    n = int(spec.n_particles)
    half = spec.delta_p / 2.0
    cells = np.arange(n, dtype=np.int64)
    index, n_beamlets = beamlet_layout(n)

    if spec.sampling == QUIET:
        theta = spec.alpha * ((2 * cells + 1 - n) / n)
        levels = (2 * index + 1 - n_beamlets) / n_beamlets
        stretch = n_beamlets / math.sqrt(n_beamlets * n_beamlets - 1.0)
        p = (half * stretch) * levels
    else:
        rng = np.random.default_rng(int(spec.seed))
        theta = spec.alpha * ((2.0 * (cells + rng.random(n)) - n) / n)
        p = half * ((2.0 * (index + rng.random(n)) - n_beamlets) / n_beamlets)

    a_x, a_y = initial_field(spec)
    return SystemState(0.0, theta, p, a_x, a_y)
