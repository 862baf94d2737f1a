#!/usr/bin/env python
# -*- coding: utf-8 -*-
""" Boundary of the waterbag followed with passive test particles.

    Markers are seeded on the four edges of the initial rectangle and moved in
    the field of an N-body run, either carried through the same RK4 stages as
    the particles (track_boundary) or replayed from a recorded field history
    (advect_markers). The upper and lower edges are fitted with two parabolas
    p = u theta^2 + v_+- sharing the curvature u. The contour model holds
    while the boundary is single-stream; the first inversion of the phase
    order of neighbouring markers is reported as the flip time.
"""

# External modules
import math
import logging
from dataclasses import dataclass

import numpy as np
import pandas as pd
from sklearn.linear_model import LinearRegression

from fel.FELintegrator import (Integrator, IntegratorConfig, MarkerTrack,
                               push_passengers, run)


logger = logging.getLogger(__name__)

MIN_PER_EDGE = 8
FLIP_TOLERANCE = 1e-9

FIT_COLUMNS = ['t', 'u_fit', 'v_plus', 'v_minus', 'rms_residual']


def _read_only(values, dtype=float):
    values = np.array(values, dtype=dtype)
    values.setflags(write=False)
    return values


@dataclass(frozen=True)
class BoundaryMarkers(object):
    """Marker positions and the indices of the markers on each edge.

    Every edge lists its markers in order: top and bottom by increasing
    theta, left and right by increasing p. Corners belong to two edges.
    """
    theta: np.ndarray
    p: np.ndarray
    top: np.ndarray
    bottom: np.ndarray
    left: np.ndarray
    right: np.ndarray
    n_per_edge: int

    @property
    def n_markers(self):
        return self.theta.shape[0]

    def edges(self):
        return {'top': self.top, 'bottom': self.bottom, 'left': self.left,
                'right': self.right}


@dataclass(frozen=True)
class ParabolaFit(object):
    u: float
    v_plus: float
    v_minus: float
    rms_residual: float

    def __call__(self, theta, side):
        v = self.v_plus if side in ('+', 'top') else self.v_minus
        return self.u * np.asarray(theta) ** 2 + v


def seed_markers(spec, n_per_edge=17):
    """Places n_per_edge equally spaced markers on every edge of the
    rectangle, 4*n_per_edge - 4 in total"""
    if int(n_per_edge) != n_per_edge or n_per_edge < MIN_PER_EDGE:
        raise ValueError("n_per_edge must be an integer of at least {}: {}"
                         .format(MIN_PER_EDGE, n_per_edge))
    if not spec.delta_p > 0:
        raise ValueError("A cold beam (delta_p = 0) has no lateral edges")
    n = int(n_per_edge)
    half = spec.delta_p / 2.0
    along_theta = np.linspace(-spec.alpha, spec.alpha, n)
    along_p = np.linspace(-half, half, n)[1:-1]

    theta = np.concatenate([along_theta, along_theta,
                            np.full(n - 2, -spec.alpha),
                            np.full(n - 2, spec.alpha)])
    p = np.concatenate([np.full(n, half), np.full(n, -half), along_p,
                        along_p])
    top = np.arange(n)
    bottom = np.arange(n, 2 * n)
    left_inner = np.arange(2 * n, 3 * n - 2)
    right_inner = np.arange(3 * n - 2, 4 * n - 4)
    left = np.concatenate([[bottom[0]], left_inner, [top[0]]])
    right = np.concatenate([[bottom[-1]], right_inner, [top[-1]]])
    return BoundaryMarkers(_read_only(theta), _read_only(p),
                           _read_only(top, int), _read_only(bottom, int),
                           _read_only(left, int), _read_only(right, int), n)


def advect_markers(markers, history, dt=None, t_end=None, stride=1):
    """Moves the markers in a recorded field history.

    The field at the RK4 stage times is taken from cubic splines through the
    recorded samples.

    Parameters
    ----------
    markers : BoundaryMarkers
    history : FieldHistory
    dt : float, optional
        Step; the spacing of the history by default.
    t_end : float, optional
        Final time; the end of the history by default.
    stride : int, optional (default=1)
        Keep every stride-th step in the returned track.

    Returns
    -------
    track : MarkerTrack
    """
    t0 = float(history.t[0])
    if t_end is None:
        t_end = history.horizon
    if t_end > history.horizon + 1e-9:
        raise ValueError("horizon exceeded: requested t={:.6g}, field known "
                         "up to t={:.6g}".format(t_end, history.horizon))
    if dt is None:
        dt = float(history.t[1] - history.t[0])
    n_steps = int(math.ceil((t_end - t0) / dt - 1e-9))
    spline_x, spline_y = history.splines()
    force = Integrator().force

    theta = np.array(markers.theta, dtype=float)
    p = np.array(markers.p, dtype=float)
    times, thetas, momenta = [t0], [theta.copy()], [p.copy()]
    for i in range(n_steps):
        t = t0 + i * dt
        h = min(dt, t_end - t)
        stage_times = np.array([t, t + 0.5 * h, t + 0.5 * h, t + h])
        stage_fields = list(zip(spline_x(stage_times), spline_y(stage_times)))
        theta, p = push_passengers(theta, p, stage_fields, h, force)
        if (i + 1) % stride == 0 or i + 1 == n_steps:
            times.append(t + h)
            thetas.append(theta.copy())
            momenta.append(p.copy())
    return MarkerTrack(np.array(times), np.array(thetas), np.array(momenta))


def fit_parabola(markers, theta=None, p=None):
    """Joint least-squares fit of the upper and lower edges.

    p = u theta^2 + v_+ on the top edge and p = u theta^2 + v_- on the bottom
    edge, with one shared u. Each edge is centred on its own means so the fit
    is a single regression through the origin.

    Parameters
    ----------
    markers : BoundaryMarkers
    theta, p : ndarray, optional
        Current marker positions; the seeded ones by default.

    Returns
    -------
    fit : ParabolaFit
    """
    theta = markers.theta if theta is None else np.asarray(theta, dtype=float)
    p = markers.p if p is None else np.asarray(p, dtype=float)

    groups = []
    for name in ('top', 'bottom'):
        index = getattr(markers, name)
        x = theta[index] ** 2
        y = p[index]
        usable = np.isfinite(x) & np.isfinite(y)
        if np.count_nonzero(usable) < 3:
            raise ValueError("Fewer than 3 usable markers on the {} edge"
                             .format(name))
        groups.append((x[usable], y[usable]))

    x_centred = np.concatenate([x - x.mean() for x, _ in groups])
    y_centred = np.concatenate([y - y.mean() for _, y in groups])
    if np.all(x_centred == 0):
        u = 0.0
    else:
        model = LinearRegression(fit_intercept=False)
        model.fit(x_centred.reshape(-1, 1), y_centred)
        u = float(model.coef_[0])
    (x_top, y_top), (x_bottom, y_bottom) = groups
    v_plus = float(y_top.mean() - u * x_top.mean())
    v_minus = float(y_bottom.mean() - u * x_bottom.mean())
    residual = np.concatenate([y_top - (u * x_top + v_plus),
                               y_bottom - (u * x_bottom + v_minus)])
    rms = math.sqrt(float(np.mean(residual ** 2)))
    return ParabolaFit(u, v_plus, v_minus, rms)


def detect_flip(track, markers, tol=FLIP_TOLERANCE):
    """Earliest sample at which two neighbouring markers of an edge swap
    their phase order, or None.
    """
    for t, theta in zip(track.t, track.theta):
        for name, index in markers.edges().items():
            gaps = np.diff(theta[index])
            if np.any(gaps < -tol):
                logger.info("Boundary flip on the %s edge at t=%.6g", name, t)
                return float(t)
    return None


def fit_table(track, markers):
    rows = []
    for t, theta, p in zip(track.t, track.theta, track.p):
        fit = fit_parabola(markers, theta, p)
        rows.append([t, fit.u, fit.v_plus, fit.v_minus, fit.rms_residual])
    return pd.DataFrame(rows, columns=FIT_COLUMNS)


def track_boundary(spec, config=None, n_per_edge=17, snapshot_times=()):
    """Runs the N-body system with markers on board.

    Returns
    -------
    series : SimulationSeries
        With tracks, history and flip_time filled in.
    fits : DataFrame
        Columns t, u_fit, v_plus, v_minus, rms_residual at every sample.
    """
    if config is None:
        config = IntegratorConfig()
    markers = seed_markers(spec, n_per_edge)
    series = run(spec, config, markers=markers, snapshot_times=snapshot_times)
    series.flip_time = detect_flip(series.tracks, markers)
    series.metadata['n_per_edge'] = markers.n_per_edge
    return series, fit_table(series.tracks, markers)


def flip_sweep(spec, i0_values, config=None, n_per_edge=17):
    """Flip time for each seed intensity on a fixed alpha, delta_p

    Returns
    -------
    frame : DataFrame with columns i0_norm, flip_time (nan if no flip)
    """
    rows = []
    for i0 in i0_values:
        series, _ = track_boundary(spec.replace(i0_norm=float(i0)), config,
                                   n_per_edge)
        flip = series.flip_time
        rows.append([float(i0), np.nan if flip is None else flip])
        logger.info("i0_norm=%.6g flips at %s", i0, flip)
    return pd.DataFrame(rows, columns=['i0_norm', 'flip_time'])
