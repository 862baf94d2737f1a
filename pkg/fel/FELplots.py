# External modules
import os
import errno

import numpy as np
import matplotlib
matplotlib.use('Agg')
import matplotlib.pyplot as plt

from fel.FELwaterbag import fold_phase


def newfig(name, figsize=(4, 3)):
    fig = plt.figure(name, figsize=figsize)
    fig.clf()
    return fig


def savefig(fig, path='figures', prefix='fel_', extension='svg'):
    fig.tight_layout()
    name = fig.get_label()
    filename = os.path.join(path, "{}{}.{}".format(prefix, name, extension))
    try:
        os.makedirs(path)
    except OSError as exception:
        if exception.errno != errno.EEXIST:
            raise
    fig.savefig(filename)
    plt.close(fig)
    return filename


def plot_intensity(sim, s_alpha, pred=None):
    """Intensity against s_alpha^2 t^2; the quadratic law is the diagonal"""
    fig = newfig('intensity')
    ax = fig.add_subplot(111)
    x = s_alpha ** 2 * sim['t'] ** 2
    ax.scatter(x, sim['intensity'], s=12, facecolors='none',
               edgecolors='black', label='simulation')
    if pred is not None:
        ax.plot(s_alpha ** 2 * pred['t'] ** 2, pred['intensity'], 'r-',
                label='prediction')
    ax.set_xlabel(r'$s_\alpha^2 t^2$')
    ax.set_ylabel(r'$I/N$')
    ax.grid(True)
    ax.legend(loc='best')
    return fig


def plot_gain_collapse(curves, tau_max=0.5):
    """Gain against t/T_c.

    Parameters
    ----------
    curves : list of (label, tau, gain)
    """
    fig = newfig('gain_collapse')
    ax = fig.add_subplot(111)
    markers = ['o', 's', '^', 'v', 'D', 'x']
    for i, (label, tau, gain) in enumerate(curves):
        ax.plot(tau, gain, markers[i % len(markers)], markersize=4,
                fillstyle='none', label=label)
    tau = np.linspace(0.0, tau_max, 101)
    ax.plot(tau, (1.0 + tau) ** 2, 'k-', label=r'$(1 + t/T_c)^2$')
    ax.set_xlim([0.0, tau_max])
    ax.set_xlabel(r'$t/T_c$')
    ax.set_ylabel(r'$I/I_0$')
    ax.grid(True)
    ax.legend(loc='best', fontsize='small')
    return fig


def plot_dispersion(sim, pred_third, pred_second=None):
    fig = newfig('dispersion')
    ax = fig.add_subplot(111)
    ax.scatter(sim['t'], sim['dispersion'], s=12, facecolors='none',
               edgecolors='black', label='simulation')
    ax.plot(pred_third['t'], pred_third['dispersion'], 'r-',
            label='third order')
    if pred_second is not None:
        ax.plot(pred_second['t'], pred_second['dispersion'], 'b--',
                label='second order')
    ax.set_xlabel('$t$')
    ax.set_ylabel('$D$')
    ax.grid(True)
    ax.legend(loc='best')
    return fig


def plot_field_y(sim, pred):
    fig = newfig('field_y')
    ax = fig.add_subplot(111)
    ax.scatter(sim['t'], sim['ay'], s=12, facecolors='none',
               edgecolors='black', label='simulation')
    ax.plot(pred['t'], pred['ay'], 'r-', label='cubic + quartic')
    ax.set_xlabel('$t$')
    ax.set_ylabel('$A_y$')
    ax.grid(True)
    ax.legend(loc='best')
    return fig


def plot_phase_space(snapshots, fits, alpha):
    """Particles of each snapshot with the fitted parabolas.

    Parameters
    ----------
    snapshots : DataFrame with columns t, theta, p
    fits : DataFrame with columns t, u_fit, v_plus, v_minus
    alpha : float
        Half width of the initial bunch, for the parabola range.
    """
    times = np.unique(snapshots['t'])
    n_cols = min(4, len(times))
    n_rows = int(np.ceil(len(times) / float(n_cols)))
    fig = newfig('phase_space', figsize=(3 * n_cols, 2.5 * n_rows))
    theta_grid = np.linspace(-alpha, alpha, 101)
    for i, t in enumerate(times):
        ax = fig.add_subplot(n_rows, n_cols, i + 1)
        rows = snapshots[snapshots['t'] == t]
        ax.scatter(fold_phase(rows['theta']), rows['p'], s=1, c='black',
                   alpha=0.3, lw=0)
        nearest = fits.iloc[int(np.argmin(np.abs(fits['t'] - t)))]
        for v in (nearest['v_plus'], nearest['v_minus']):
            ax.plot(theta_grid, nearest['u_fit'] * theta_grid ** 2 + v, 'r-')
        ax.set_title('t = {:.2f}'.format(t))
        ax.set_xlim([-np.pi, np.pi])
        ax.set_xlabel(r'$\theta$')
        ax.set_ylabel('$p$')
    return fig
