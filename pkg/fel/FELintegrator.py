#!/usr/bin/env python
# -*- coding: utf-8 -*-
""" Self-consistent integration of the N particle + wave equations of motion

        d theta_j/dt = p_j
        d p_j/dt     = -2 (a_x cos theta_j - a_y sin theta_j)
        d a_x/dt     =  <cos theta>
        d a_y/dt     = -<sin theta>

    with a classical fixed-step fourth order Runge-Kutta scheme, and monitoring
    of the two conserved quantities

        H/N = <p^2>/2 + 2 (a_x <sin theta> + a_y <cos theta>)
        P/N = <p> + a_x^2 + a_y^2
"""

# External modules
import os
import math
import logging
from collections import namedtuple
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from scipy.interpolate import CubicSpline

from fel.FELwaterbag import (SystemState, SpecError, NumericalError,
                             validate_spec, sample_waterbag,
                             observable_columns)
from fel.FELanalyzer import fmean, observe


logger = logging.getLogger(__name__)

DRIFT_EPS = 1e-12
DEFAULT_CHUNK = 4096

StateRate = namedtuple('StateRate', ['dtheta', 'dp', 'da_x', 'da_y'])


class ConservationError(NumericalError):

    def __init__(self, observable, t, drift, tolerance):
        self.observable = observable
        self.t = t
        self.drift = drift
        self.tolerance = tolerance
        super(ConservationError, self).__init__(
            "Relative drift of {} is {:.3e} at t={:.6g}, above the tolerance "
            "{:.1e}".format(observable, drift, t, tolerance))


@dataclass(frozen=True)
class IntegratorConfig(object):
    """Time stepping and monitoring parameters.

    `workers` only sets the size of the thread pool; `deterministic` sums every
    reduction in one exact pass instead of summing exact per-chunk partials.
    Both modes give the same bits for any worker count.
    """
    dt: float = 1e-3
    t_end: float = 1.0
    observer_stride: int = 10
    drift_tolerance: float = 1e-6
    workers: Optional[int] = None
    deterministic: bool = False
    chunk_size: int = DEFAULT_CHUNK

    @property
    def n_steps(self):
        return int(math.ceil(self.t_end / self.dt - 1e-9))

    def elapsed(self, i):
        """Time after i steps; the last step is shortened to end on t_end"""
        return self.t_end if i >= self.n_steps else i * self.dt

    def step_size(self, i):
        """Length of step i, counted from 1"""
        if i < self.n_steps:
            return self.dt
        return self.t_end - (self.n_steps - 1) * self.dt

    def sample_times(self, t0=0.0):
        """Times at which run() records a sample"""
        steps = list(range(0, self.n_steps + 1, int(self.observer_stride)))
        if steps[-1] != self.n_steps:
            steps.append(self.n_steps)
        return np.array([t0 + self.elapsed(i) for i in steps])

    def echo(self):
        """Settings that can change the numbers (the worker count cannot)"""
        return {'dt': self.dt, 't_end': self.t_end,
                'stride': self.observer_stride,
                'drift_tolerance': self.drift_tolerance,
                'deterministic': self.deterministic,
                'chunk_size': self.chunk_size}


def validate_config(config):
    errors = []
    if not (math.isfinite(config.dt) and config.dt > 0):
        errors.append("dt must be positive")
    if not (math.isfinite(config.t_end) and config.t_end >= 0):
        errors.append("t_end must be non-negative")
    if int(config.observer_stride) != config.observer_stride \
            or config.observer_stride < 1:
        errors.append("stride must be an integer of at least 1")
    if not (config.drift_tolerance > 0):
        errors.append("drift_tolerance must be positive")
    if config.workers is not None and config.workers < 1:
        errors.append("workers must be at least 1")
    if config.chunk_size < 1:
        errors.append("chunk_size must be at least 1")
    if errors:
        raise SpecError(errors)
    return config


@dataclass
class FieldHistory(object):
    """Field components recorded at every step of a run"""
    t: np.ndarray
    a_x: np.ndarray
    a_y: np.ndarray

    @property
    def horizon(self):
        return float(self.t[-1])

    def splines(self):
        return CubicSpline(self.t, self.a_x), CubicSpline(self.t, self.a_y)


@dataclass
class MarkerTrack(object):
    """Passive marker positions at the observer samples.
    theta and p have shape (n_samples, n_markers)."""
    t: np.ndarray
    theta: np.ndarray
    p: np.ndarray


@dataclass
class SimulationSeries(object):
    samples: list
    metadata: dict
    k_max: int
    flip_time: Optional[float] = None
    history: Optional[FieldHistory] = None
    tracks: Optional[MarkerTrack] = None
    snapshots: dict = field(default_factory=dict)
    max_drift: dict = field(default_factory=dict)

    def __post_init__(self):
        times = np.array([sample.t for sample in self.samples])
        if np.any(np.diff(times) <= 0):
            raise ValueError("Sample times must be strictly increasing")

    @property
    def times(self):
        return np.array([sample.t for sample in self.samples])

    def to_frame(self):
        return pd.DataFrame([sample.as_row() for sample in self.samples],
                            columns=observable_columns(self.k_max))


###############################################################################
# ## Reductions ###############################################################
###############################################################################

def _chunk_trig(theta):
    cos = np.cos(theta)
    sin = np.sin(theta)
    return cos, sin, math.fsum(cos.tolist()), math.fsum(sin.tolist())


class ReductionPool(object):
    """Computes cos, sin and their means over fixed-size chunks.

    Chunk boundaries depend only on chunk_size, never on the worker count.
    Use as a context manager to keep the joblib thread pool alive for a run.
    """

    def __init__(self, workers=1, chunk_size=DEFAULT_CHUNK,
                 deterministic=False):
        if workers is None:
            workers = os.cpu_count() or 1
        self.workers = max(1, int(workers))
        self.chunk_size = int(chunk_size)
        self.deterministic = deterministic
        self._parallel = None

    @classmethod
    def from_config(cls, config):
        return cls(config.workers, config.chunk_size, config.deterministic)

    def __enter__(self):
        if self.workers > 1:
            self._parallel = Parallel(n_jobs=self.workers, backend='threading')
            self._parallel.__enter__()
        return self

    def __exit__(self, *exc_info):
        if self._parallel is not None:
            self._parallel.__exit__(*exc_info)
            self._parallel = None
        return False

    def trig_moments(self, theta):
        n = theta.shape[0]
        bounds = [(start, min(start + self.chunk_size, n))
                  for start in range(0, n, self.chunk_size)]
        if len(bounds) == 1:
            cos, sin, sum_cos, sum_sin = _chunk_trig(theta)
            return cos, sin, sum_cos / n, sum_sin / n

        if self._parallel is None:
            parts = [_chunk_trig(theta[a:b]) for a, b in bounds]
        else:
            parts = self._parallel(delayed(_chunk_trig)(theta[a:b])
                                   for a, b in bounds)
        cos = np.concatenate([part[0] for part in parts])
        sin = np.concatenate([part[1] for part in parts])
        if self.deterministic:
            sum_cos = math.fsum(cos.tolist())
            sum_sin = math.fsum(sin.tolist())
        else:
            sum_cos = math.fsum([part[2] for part in parts])
            sum_sin = math.fsum([part[3] for part in parts])
        return cos, sin, sum_cos / n, sum_sin / n


###############################################################################
# ## Invariants ###############################################################
###############################################################################

def invariants(state):
    """Energy and momentum per particle, (H/N, P/N)"""
    n = state.n_particles
    p = state.p
    kinetic = math.fsum((p * p).tolist()) / (2.0 * n)
    mean_sin = fmean(np.sin(state.theta))
    mean_cos = fmean(np.cos(state.theta))
    energy = kinetic + 2.0 * (state.a_x * mean_sin + state.a_y * mean_cos)
    momentum = fmean(p) + state.intensity
    return energy, momentum


def invariant_scales(state):
    """Sum of the magnitudes of the terms of H/N and P/N"""
    n = state.n_particles
    p = state.p
    kinetic = math.fsum((p * p).tolist()) / (2.0 * n)
    field = 2.0 * (abs(state.a_x) * fmean(np.abs(np.sin(state.theta)))
                   + abs(state.a_y) * fmean(np.abs(np.cos(state.theta))))
    return kinetic + field, fmean(np.abs(p)) + state.intensity


def reverse_state(state):
    """Time-reversal mirror (theta, p, a_x, a_y) -> (-theta, p, -a_x, a_y).

    Integrating for T, mirroring and integrating for T again lands on the
    mirror image of the starting point.
    """
    return SystemState(state.t, -state.theta, state.p.copy(), -state.a_x,
                       state.a_y)


###############################################################################
# ## Time stepping ############################################################
###############################################################################

def push_passengers(theta, p, stage_fields, h, force):
    """One RK4 step of test particles moving in given stage fields.

    Parameters
    ----------
    theta, p : ndarray
    stage_fields : sequence of four (a_x, a_y)
        Field at the four stages of the step.
    h : float
    force : callable
        force(theta, a_x, a_y) -> dp/dt
    """
    (ax1, ay1), (ax2, ay2), (ax3, ay3), (ax4, ay4) = stage_fields
    k1 = force(theta, ax1, ay1)
    k2 = force(theta + 0.5 * h * p, ax2, ay2)
    k3 = force(theta + 0.5 * h * (p + 0.5 * h * k1), ax3, ay3)
    k4 = force(theta + h * (p + 0.5 * h * k2), ax4, ay4)
    new_theta = theta + h * (p + h * (k1 + k2 + k3) / 6.0)
    new_p = p + h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
    return new_theta, new_p


class Integrator(object):
    """Fixed-step RK4 integrator of the self-consistent system.

    `coupling` scales the wave-particle interaction; 0 disables it and
    leaves free streaming, which the tests use as a reference.
    """

    def __init__(self, config=None, coupling=1.0, pool=None):
        self.config = IntegratorConfig() if config is None else config
        self.coupling = coupling
        if pool is None:
            pool = ReductionPool(1, self.config.chunk_size,
                                 self.config.deterministic)
        self.pool = pool

    def force(self, theta, a_x, a_y):
        return (-2.0 * self.coupling) * (a_x * np.cos(theta)
                                         - a_y * np.sin(theta))

    def _stage(self, theta, a_x, a_y):
        cos, sin, mean_cos, mean_sin = self.pool.trig_moments(theta)
        force = (-2.0 * self.coupling) * (a_x * cos - a_y * sin)
        return force, self.coupling * mean_cos, -self.coupling * mean_sin

    def derivatives(self, state):
        if not state.is_finite():
            raise NumericalError("Non-finite state at t={}".format(state.t))
        force, da_x, da_y = self._stage(state.theta, state.a_x, state.a_y)
        return StateRate(state.p.copy(), force, da_x, da_y)

    def advance(self, state, h=None, passengers=None):
        """One step of the particles and, optionally, of passive markers.

        Returns
        -------
        state : SystemState
        passengers : (theta, p) or None
        """
        if h is None:
            h = self.config.dt
        th0, p0 = state.theta, state.p
        ax0, ay0 = state.a_x, state.a_y

        k1, fx1, fy1 = self._stage(th0, ax0, ay0)
        ax2, ay2 = ax0 + 0.5 * h * fx1, ay0 + 0.5 * h * fy1
        k2, fx2, fy2 = self._stage(th0 + 0.5 * h * p0, ax2, ay2)
        ax3, ay3 = ax0 + 0.5 * h * fx2, ay0 + 0.5 * h * fy2
        k3, fx3, fy3 = self._stage(th0 + 0.5 * h * (p0 + 0.5 * h * k1),
                                   ax3, ay3)
        ax4, ay4 = ax0 + h * fx3, ay0 + h * fy3
        k4, fx4, fy4 = self._stage(th0 + h * (p0 + 0.5 * h * k2), ax4, ay4)

        theta = th0 + h * (p0 + h * (k1 + k2 + k3) / 6.0)
        p = p0 + h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
        a_x = ax0 + h * (fx1 + 2.0 * fx2 + 2.0 * fx3 + fx4) / 6.0
        a_y = ay0 + h * (fy1 + 2.0 * fy2 + 2.0 * fy3 + fy4) / 6.0
        new_state = SystemState(state.t + h, theta, p, a_x, a_y)
        if not new_state.is_finite():
            raise NumericalError("Non-finite state after the step from "
                                 "t={:.6g} (dt={})".format(state.t, h))

        if passengers is not None:
            stage_fields = ((ax0, ay0), (ax2, ay2), (ax3, ay3), (ax4, ay4))
            passengers = push_passengers(passengers[0], passengers[1],
                                         stage_fields, h, self.force)
        return new_state, passengers

    def step(self, state, dt=None):
        return self.advance(state, dt)[0]

    def evolve(self, state, n_steps, dt=None):
        """Final state after n_steps, without observers"""
        h = self.config.dt if dt is None else dt
        t0 = state.t
        for i in range(1, n_steps + 1):
            state = self.step(state, h)
            state.t = t0 + i * h
        return state

    def run(self, spec, markers=None, snapshot_times=(), state=None):
        """Integrates up to config.t_end and samples every observer_stride.

        Parameters
        ----------
        spec : WaterbagSpec
        markers : object with `theta` and `p` arrays, optional
            Passive test particles carried through the same RK4 stages.
        snapshot_times : sequence of float, optional
            Times at which a read-only copy of the full state is kept.
        state : SystemState, optional
            Starting state; sampled from spec when omitted.

        Returns
        -------
        series : SimulationSeries
        """
        validate_spec(spec)
        config = validate_config(self.config)
        if state is None:
            state = sample_waterbag(spec)
        h = config.dt
        n_steps = config.n_steps
        t0 = state.t
        logger.info("Running N=%d alpha=%.6g delta_p=%.6g i0_norm=%.6g for "
                    "%d steps of %.3g (%d workers)", state.n_particles,
                    spec.alpha, spec.delta_p, spec.i0_norm, n_steps, h,
                    self.pool.workers)

        energy0, momentum0 = invariants(state)
        energy_scale, momentum_scale = invariant_scales(state)
        reference = {'energy': (energy0, max(abs(energy0), DRIFT_EPS,
                                             energy_scale)),
                     'momentum': (momentum0, max(abs(momentum0), DRIFT_EPS,
                                                 momentum_scale))}
        max_drift = {'energy': 0.0, 'momentum': 0.0}

        snapshot_steps = {}
        for ts in snapshot_times:
            snapshot_steps.setdefault(int(round((ts - t0) / h)), ts)
        snapshots = {}
        if 0 in snapshot_steps:
            snapshots[snapshot_steps[0]] = state.snapshot()

        history_t = [t0]
        history_ax = [state.a_x]
        history_ay = [state.a_y]
        samples = [observe(state, spec.k_max, invariants)]

        passengers = None
        track_t, track_theta, track_p = [], [], []
        if markers is not None:
            passengers = (np.array(markers.theta, dtype=float),
                          np.array(markers.p, dtype=float))
            track_t.append(t0)
            track_theta.append(passengers[0].copy())
            track_p.append(passengers[1].copy())

        for i in range(1, n_steps + 1):
            state, passengers = self.advance(state, config.step_size(i),
                                             passengers)
            state.t = t0 + config.elapsed(i)
            history_t.append(state.t)
            history_ax.append(state.a_x)
            history_ay.append(state.a_y)

            if i % config.observer_stride == 0 or i == n_steps:
                sample = observe(state, spec.k_max, invariants)
                self._check_drift(sample, reference, max_drift)
                samples.append(sample)
                if passengers is not None:
                    track_t.append(state.t)
                    track_theta.append(passengers[0].copy())
                    track_p.append(passengers[1].copy())

            if i in snapshot_steps:
                snapshots[snapshot_steps[i]] = state.snapshot()

        logger.info("Finished at t=%.6g, max relative drift H %.2e P %.2e",
                    state.t, max_drift['energy'], max_drift['momentum'])

        metadata = spec.as_dict()
        metadata.update(config.echo())
        tracks = None
        if markers is not None:
            tracks = MarkerTrack(np.array(track_t), np.array(track_theta),
                                 np.array(track_p))
        history = FieldHistory(np.array(history_t), np.array(history_ax),
                               np.array(history_ay))
        return SimulationSeries(samples=samples, metadata=metadata,
                                k_max=spec.k_max, history=history,
                                tracks=tracks, snapshots=snapshots,
                                max_drift=max_drift)

    def _check_drift(self, sample, reference, max_drift):
        tolerance = self.config.drift_tolerance
        for name, value in (('energy', sample.energy),
                            ('momentum', sample.momentum)):
            initial, scale = reference[name]
            drift = abs(value - initial) / scale
            logger.debug("t=%.6g %s drift %.3e", sample.t, name, drift)
            max_drift[name] = max(max_drift[name], drift)
            if drift > tolerance:
                raise ConservationError(name, sample.t, drift, tolerance)


###############################################################################
# ## Module level shortcuts ###################################################
###############################################################################

def derivatives(state, coupling=1.0):
    """Rates (dtheta, dp, da_x, da_y) of a state"""
    return Integrator(coupling=coupling).derivatives(state)


def step(state, dt, coupling=1.0):
    return Integrator(IntegratorConfig(dt=dt), coupling=coupling).step(state)


def run(spec, config=None, markers=None, snapshot_times=(), coupling=1.0,
        state=None):
    """Runs the N-body system for a spec; see Integrator.run"""
    if config is None:
        config = IntegratorConfig()
    with ReductionPool.from_config(config) as pool:
        integrator = Integrator(config, coupling=coupling, pool=pool)
        return integrator.run(spec, markers=markers,
                              snapshot_times=snapshot_times, state=state)
