r''' regularize.py - backward regularization of the preshock into smooth initial data.

The preshock profile is composed with the chart

    psi(x, T*) = r* + x|x|^(p-1)/p,    J(x, T*) = |x|^(p-1)

(p = 3 for the generic cusp) which turns the |r - r*|^(1/p) cusp of z into a
C^1 function of x.  Backward from T* the fast characteristics are the vertical
lines x = const, so psi, J, z and Jrz = J rz follow the same ODEs in s as in
the Goursat patches.  w, rw ride the lambda3 characteristics and b, rb the
lambda2 ones; in x those move with speed beta c / J (beta = 2, 1), which is
singular where J vanishes at (0, T*).  The feet are found from the bounded
form dY/ds = p|x|^(p-1) beta c / (J + delta_reg) with Y = x|x|^(p-1).

Arrays are stored at [slice, x]; slice 0 is T* and s decreases with the
index down to T_in = T* - delta*.
'''

import sys
import time
import logging

import numpy as np
from scipy.integrate import solve_ivp, cumulative_trapezoid
from scipy.interpolate import RegularGridInterpolator

from . import config as cfg
from . import utils
from .gas_core import GasParams, characteristic_sources, entropy_coupling
from .goursat import FAST, FIELDS, PreshockProfile, density_or_unit, row_interp, rk4_step, picard_weights
from .errors import (CoverageGap, TrajectoryEscape, JacobianNonPositive, ContractionFailure, MonitorViolated,
                     InvalidConfig, FitIllConditioned)

logger = logging.getLogger(__name__)

level_log = logging.INFO

if level_log == logging.INFO:
    stream = sys.stdout
    lformat = cfg.LOG_FORMAT
else:
    stream = sys.stderr
    lformat = cfg.LOG_FORMAT_DEBUG

logging.basicConfig(format=lformat, stream=stream, level=level_log)

CARRIED = ('w', 'rw', 'b', 'rb')
INITIAL_DATA_COLUMNS = ['r', 'w', 'z', 'b', 'dw', 'dz', 'db']
CHART_COLUMNS = ['s', 'x', 'psi', 'J', 'w', 'z', 'b', 'rw', 'rz', 'rb']


class CubicChart(object):
    """ Fast-characteristic chart of the region behind the preshock.

    Args:
        x (np.array): ascending label grid on [-x_max, x_max], odd size, x = 0 included
        r_star (float): preshock radius
        T_star (float): preshock time
        gas (GasParams): gas parameters
        p (float): chart exponent, 1/beta' for a beta'-cusp
        theta (float): radial half-width of the composed preshock data
    """

    def __init__(self, x, r_star, T_star, gas, p=3.0, theta=None):
        self.x = np.asarray(x, dtype=float)
        self.nx = self.x.size
        self.r_star = float(r_star)
        self.T_star = float(T_star)
        self.gas = gas
        self.p = float(p)
        self.theta = theta
        self.s = np.array([self.T_star])
        self.mask = np.ones((1, self.nx), dtype=bool)
        self.terminal = {}
        self.nodes = {}
        self.speed_bound = None
        self.weights = None
        self.correctors = {}
        self.history = []
        self.iterations = 0
        self.monitors = {}
        self.report = {}

    @property
    def ns(self):
        return self.s.size

    @property
    def x_max(self):
        return self.x[-1]

    @property
    def T_in(self):
        return self.s[-1]

    @property
    def delta_star(self):
        return self.T_star - self.T_in

    @property
    def centre(self):
        return self.nx // 2

    def set_slices(self, s, speed):
        """ Slice grid (descending from T*) and the slanted right edge x_max - speed (T* - s). """
        self.s = np.asarray(s, dtype=float)
        self.speed_bound = float(speed)
        edge = self.x_max - self.speed_bound * (self.T_star - self.s)
        self.mask = self.x[None, :] <= edge[:, None] + 1e-14 * self.x_max
        self.nodes = {name: np.full((self.ns, self.nx), np.nan) for name in FIELDS}
        for name in FIELDS:
            self.nodes[name][0] = self.terminal[name]

    def rho(self):
        return density_or_unit(self.nodes['w'], self.nodes['z'], self.nodes['b'], self.gas)

    def rz(self):
        J = self.nodes['J']
        with np.errstate(divide='ignore', invalid='ignore'):
            return np.where(J != 0.0, self.nodes['Jrz'] / J, np.nan)

    def sound_speed(self, nodes=None):
        """ c = alpha sigma """
        nodes = self.nodes if nodes is None else nodes
        return self.gas.alpha * 0.5 * (nodes['w'] - nodes['z'])

    def axis(self):
        """ J(0, s) on every slice. """
        return self.nodes['J'][:, self.centre]

    def sidecar(self):
        return {'p': self.p, 'theta': self.theta, 'r_star': self.r_star, 'T_star': self.T_star,
                'T_in': float(self.T_in), 'delta_star': float(self.delta_star), 'nx': self.nx, 'ns': self.ns,
                'x_max': float(self.x_max), 'speed_bound': self.speed_bound, 'iterations': self.iterations,
                'history': self.history, 'monitors': self.monitors, 'report': self.report}


class WeightField(object):
    """ Transported weights and the singular trajectories of the slow families.

    Attributes:
        upsilon (dict): beta -> Upsilon_beta(x), the s-graph of the beta-characteristic through (0, T*);
            x > 0 carries its extension through the terminal slice
        weight (dict): beta -> weight on the chart nodes, |x|^(p-1) at T*
        feet (dict): beta -> foot positions on the previous slice
    """

    def __init__(self, upsilon, weight, feet):
        self.upsilon = upsilon
        self.weight = weight
        self.feet = feet
        self.report = {}


def _x_of_Y(Y, p):
    return np.sign(Y) * np.abs(Y) ** (1.0 / p)


def init_chart_and_data(profile, theta=None, nx=None, p=None, gas=None, T_star=None):
    """ Terminal slice of the chart: the preshock profile composed with psi(x, T*).

    Args:
        profile (PreshockProfile): two-sided preshock state
        theta (float): radial half-width; 1/8 of the plus-side coverage when None
        nx (int): label count, made odd so that x = 0 is a node
        p (float): chart exponent; 1/profile.beta when None

    Returns:
        CubicChart with only the T* slice filled

    Raises:
        CoverageGap when psi(x, T*) leaves the profile samples
    """
    gas = gas or profile.gas or GasParams()
    p = 1.0 / profile.beta if p is None else float(p)
    T_star = profile.T_star if T_star is None else T_star
    if T_star is None:
        logger.error('init_chart_and_data: preshock time unknown')
        raise InvalidConfig('init_chart_and_data: the profile carries no T_star and none was given')
    nx = cfg.REG_NX if nx is None else int(nx)
    if nx % 2 == 0:
        nx += 1
    lo, hi = profile.coverage()
    r_star = profile.r_star
    theta = (hi - r_star) / 8.0 if theta is None else float(theta)
    if theta <= 0.0:
        logger.error('init_chart_and_data: theta = {}'.format(theta))
        raise InvalidConfig('init_chart_and_data: theta must be positive, got {}'.format(theta))
    x_max = theta ** (1.0 / p)
    half = x_max ** p / p
    if r_star - half < lo or r_star + half > hi:
        logger.error('init_chart_and_data: chart [{:.6g}, {:.6g}] outside samples [{:.6g}, {:.6g}]'
                     .format(r_star - half, r_star + half, lo, hi))
        raise CoverageGap('preshock samples cover [{:.12g}, {:.12g}], the chart with theta = {:.6g} needs '
                          '[{:.12g}, {:.12g}]'.format(lo, hi, theta, r_star - half, r_star + half))
    if min(r_star - lo, hi - r_star) < theta:
        logger.warning('init_chart_and_data: samples reach less than theta = %.3g on one side' % theta)

    x = np.linspace(-x_max, x_max, nx)
    x[nx // 2] = 0.0
    ax = np.abs(x)
    psi0 = r_star + x * ax ** (p - 1.0) / p
    J0 = ax ** (p - 1.0)
    vals = profile.evaluate(psi0)
    w0, z0, b0 = vals['w'], vals['z'], vals['b']
    rho0 = density_or_unit(w0, z0, b0, gas)
    k0 = entropy_coupling(rho0, gas)
    dw_r = profile.derivative('w', psi0)
    db_r = profile.derivative('b', psi0)
    dz_x = utils.one_sided_derivative(x, z0)

    chart = CubicChart(x, r_star, T_star, gas, p=p, theta=theta)
    chart.terminal = {'psi': psi0, 'J': J0, 'z': z0, 'Jrz': dz_x + k0 * J0 * db_r,
                      'w': w0, 'rw': dw_r - k0 * db_r, 'b': b0, 'rb': db_r}
    chart.set_slices(np.array([T_star]), 0.0)
    sigma = 0.5 * (w0 - z0)
    chart.report['terminal'] = {'dZ_dx_max': float(np.max(np.abs(dz_x))), 'sigma_min': float(np.min(sigma)),
                                'coverage': [lo, hi]}
    return chart


def _speed_bound(chart):
    """ 1.5 max of 2c/J at T* over x >= x_max/2: the slanted edge outruns every lambda3 foot. """
    t = chart.terminal
    c0 = chart.gas.alpha * 0.5 * (t['w'] - t['z'])
    far = chart.x >= 0.5 * chart.x_max
    return 1.5 * float(np.max(2.0 * c0[far] / t['J'][far]))


def _initial_guess(chart):
    """ Terminal data held on every slice; psi along straight lambda1 lines, J opening linearly. """
    a = chart.gas.alpha
    t = chart.terminal
    lam1 = 0.5 * (1.0 + a) * t['z'] + 0.5 * (1.0 - a) * t['w']
    back = (chart.T_star - chart.s)[:, None]
    nodes = chart.nodes
    for name in FIELDS:
        nodes[name][:] = t[name][None, :]
    nodes['psi'][:] = t['psi'][None, :] - lam1[None, :] * back
    nodes['J'][:] = t['J'][None, :] + np.abs(0.5 * (1.0 + a) * t['Jrz'])[None, :] * back
    for name in FIELDS:
        nodes[name][~chart.mask] = np.nan


def _feet(chart, lag, beta, delta_reg):
    """ x on slice k of the beta-characteristic through each node of slice k + 1 (Heun in Y). """
    x = chart.x
    p = chart.p
    s = chart.s
    c = chart.sound_speed(lag)
    J = lag['J']
    feet = np.full((chart.ns, chart.nx), np.nan)
    feet[0] = x
    for k in range(chart.ns - 1):
        h = s[k] - s[k + 1]
        v1 = chart.mask[k + 1]
        v0 = chart.mask[k]
        xi = x[v1]
        Y0 = xi * np.abs(xi) ** (p - 1.0)
        k1 = p * np.abs(xi) ** (p - 1.0) * beta * c[k + 1, v1] / (J[k + 1, v1] + delta_reg)
        x1 = np.minimum(_x_of_Y(Y0 + h * k1, p), x[v0][-1])
        Jk = np.interp(x1, x[v0], J[k, v0])
        ck = np.interp(x1, x[v0], c[k, v0])
        k2 = p * np.abs(x1) ** (p - 1.0) * beta * ck / (Jk + delta_reg)
        feet[k + 1, v1] = np.minimum(_x_of_Y(Y0 + 0.5 * h * (k1 + k2), p), x[v0][-1])
    return feet


def _label_chain(chart, feet):
    """ x at T* of the characteristic through each node, composing the feet slice by slice. """
    x = chart.x
    xT = np.full((chart.ns, chart.nx), np.nan)
    xT[0] = x
    for k in range(chart.ns - 1):
        v1 = chart.mask[k + 1]
        v0 = chart.mask[k]
        xT[k + 1, v1] = np.interp(feet[k + 1, v1], x[v0], xT[k, v0])
    return xT


def trajectory(chart, lag, beta):
    r''' Upsilon_beta(x): ds/dx = J/(beta c) from (0, T*) toward negative x.

    Integration stops where the trajectory reaches T_in; x > 0 is filled with the
    terminal-slice extension T* + int_0^x J0/(beta c0).

    Raises:
        TrajectoryEscape when the trajectory leaves [T_in, T*] or turns non-finite
    '''
    x = chart.x
    left = x <= 0.0
    right = x >= 0.0
    c = chart.sound_speed(lag)
    with np.errstate(divide='ignore', invalid='ignore'):
        ratio = lag['J'] / (beta * c)
    ups = np.full(chart.nx, np.nan)
    T_star = chart.T_star
    if chart.ns > 1:
        grid = RegularGridInterpolator((chart.s[::-1], x[left]), ratio[::-1][:, left], bounds_error=False,
                                       fill_value=None)

        def rhs(xx, y):
            return [float(grid([[y[0], xx]])[0])]

        def leave(xx, y):
            return y[0] - chart.T_in
        leave.terminal = True
        leave.direction = -1

        dx = x[1] - x[0]
        sol = solve_ivp(rhs, (0.0, x[0]), [T_star], method='RK45', events=leave, dense_output=True,
                        rtol=1e-9, atol=1e-13, max_step=dx)
        if sol.status == -1:
            logger.error('trajectory: beta = {} integration failed: {}'.format(beta, sol.message))
            raise TrajectoryEscape('Upsilon_{}: integration failed near x = {:.6g}: {}'
                                   .format(beta, sol.t[-1], sol.message))
        inside = left & (x >= sol.t[-1])
        ups[inside] = sol.sol(x[inside])[0]
        vals = ups[inside]
        bad = ~np.isfinite(vals) | (vals > T_star + 1e-12) | (vals < chart.T_in - 1e-9 * max(1.0, abs(chart.T_in)))
        if np.any(bad):
            where = x[inside][bad][0]
            logger.error('trajectory: Upsilon_{} left [T_in, T*] at x = {:.6g}'.format(beta, where))
            raise TrajectoryEscape('Upsilon_{} leaves [{:.12g}, {:.12g}] at x = {:.6g}'
                                   .format(beta, chart.T_in, T_star, where))
    ups[right] = T_star + cumulative_trapezoid(ratio[0, right], x[right], initial=0.0)
    return ups


def _comparability(chart, weight, ups):
    """ log10 of max/min of weight/|s - Upsilon|^((p-1)/p) over the slices below T*. """
    q = (chart.p - 1.0) / chart.p
    dist = np.abs(chart.s[:, None] - ups[None, :])
    keep = chart.mask & np.isfinite(dist) & (dist > 0.0) & np.isfinite(weight) & (weight > 0.0)
    keep[0] = False
    if not np.any(keep):
        return {'band_decades': float('nan'), 'min': float('nan'), 'max': float('nan')}
    ratio = weight[keep] / dist[keep] ** q
    return {'band_decades': float(np.log10(ratio.max() / ratio.min())), 'min': float(ratio.min()),
            'max': float(ratio.max())}


def _separation(chart, ups):
    """ log-log slope of T* - Upsilon against |x| on the physical branch. """
    x = chart.x
    keep = (x < 0.0) & np.isfinite(ups)
    if keep.sum() < 4:
        return {'slope': None, 'stderr': None, 'C_min': None, 'C_max': None}
    ax = -x[keep]
    gap = chart.T_star - ups[keep]
    # linear interpolation of J ~ x^2 biases the few nodes next to the axis
    near = (ax <= 0.5 * ax.max()) & (ax >= 8.0 * (x[1] - x[0]))
    try:
        slope, _, stderr = utils.loglog_fit(ax[near], gap[near])
    except FitIllConditioned:
        slope, stderr = None, None
    ratio = gap / ax ** chart.p
    return {'slope': slope, 'stderr': stderr, 'C_min': float(ratio.min()), 'C_max': float(ratio.max())}


def solve_weights(chart, lag=None, delta_reg=None, compare=False):
    """ Trajectories and transported weights for beta = 1 (lambda2) and beta = 2 (lambda3).

    Args:
        lag (dict): chart nodes of the previous iterate; the current nodes when None
        delta_reg (float): foot regularization; the smallest of REG_DELTA_REG when None
        compare (bool): also rerun the feet for every REG_DELTA_REG and report their spread

    Returns:
        WeightField
    """
    lag = chart.nodes if lag is None else lag
    delta_reg = min(cfg.REG_DELTA_REG) if delta_reg is None else delta_reg
    feet, weight, ups = {}, {}, {}
    for beta in (1, 2):
        feet[beta] = _feet(chart, lag, beta, delta_reg)
        weight[beta] = np.abs(_label_chain(chart, feet[beta])) ** (chart.p - 1.0)
        ups[beta] = trajectory(chart, lag, beta)
    field = WeightField(ups, weight, feet)
    field.report['comparability'] = {beta: _comparability(chart, weight[beta], ups[beta]) for beta in (1, 2)}
    field.report['separation'] = {beta: _separation(chart, ups[beta]) for beta in (1, 2)}
    if compare:
        spread = {}
        for beta in (1, 2):
            runs = [_feet(chart, lag, beta, d) for d in sorted(cfg.REG_DELTA_REG, reverse=True)]
            gaps = [float(np.nanmax(np.abs(b - a))) for a, b in zip(runs[:-1], runs[1:])]
            spread[beta] = {'delta_reg': sorted(cfg.REG_DELTA_REG, reverse=True), 'successive_max_gap': gaps}
        field.report['foot_regularization'] = spread
    for beta in (1, 2):
        logger.debug('weights beta=%d: band %.3f decades' % (beta, field.report['comparability'][beta]['band_decades']))
    return field


def _coefficients(chart, lag):
    """ Lagged coefficients of the carried-field updates. """
    gas = chart.gas
    a = gas.alpha
    d1 = gas.dim - 1
    w, z, b = lag['w'], lag['z'], lag['b']
    rw, rb, r, J = lag['rw'], lag['rb'], lag['psi'], lag['J']
    with np.errstate(divide='ignore', invalid='ignore'):
        rz = np.where(J != 0.0, lag['Jrz'] / J, 0.0)
    rho = density_or_unit(w, z, b, gas)
    _, src_w, _ = characteristic_sources(w, z, b, rho, rb, r, gas)
    e = rho ** a * rb / gas.gamma
    return {'src_w': src_w,
            'riccati_w': 0.5 * (1.0 + a) * rw + 0.5 * (1.0 - a) * rz + e,
            'rest_w': 0.5 * e * (rw + rz) - a * d1 * (w * rw - z * rz) / (2.0 * r)
            + a * d1 * (w * w - z * z) / (4.0 * r * r),
            'riccati_b': 0.5 * (rw + rz)}


def _implicit(num, den, name, s):
    if np.any(den <= 0.1):
        logger.error('regularize: {} update denominator {:.3g} at s = {:.12g}'.format(name, np.min(den), s))
        raise ContractionFailure('{} Riccati update degenerates at s = {:.12g} (denominator {:.3g})'
                                 .format(name, s, np.min(den)))
    return num / den


def _transport_B(chart, lag, feet):
    """ Carried fields slice by slice from T*: w, b along their feet, rw, rb semi-implicitly. """
    s = chart.s
    coef = _coefficients(chart, lag)
    new = {name: np.full((chart.ns, chart.nx), np.nan) for name in CARRIED}
    for name in CARRIED:
        new[name][0] = chart.terminal[name]
    for k in range(chart.ns - 1):
        h = s[k] - s[k + 1]
        v1 = chart.mask[k + 1]
        x0 = chart.x[chart.mask[k]]

        def at_foot(arr, xf):
            f, _, _ = row_interp(x0, arr[k, chart.mask[k]])
            return f(xf)

        x3 = feet[2][k + 1, v1]
        x2 = feet[1][k + 1, v1]
        src = coef['src_w']
        new['w'][k + 1, v1] = at_foot(new['w'], x3) - h * 0.5 * (src[k + 1, v1] + at_foot(src, x3))
        new['rw'][k + 1, v1] = _implicit(at_foot(new['rw'], x3) - h * coef['rest_w'][k + 1, v1],
                                         1.0 - h * coef['riccati_w'][k + 1, v1], 'rw', s[k + 1])
        new['b'][k + 1, v1] = at_foot(new['b'], x2)
        new['rb'][k + 1, v1] = _implicit(at_foot(new['rb'], x2), 1.0 - h * coef['riccati_b'][k + 1, v1],
                                         'rb', s[k + 1])
    return new


def _fast_B(chart, trans):
    """ RK4 down every column x = const from the terminal slice. """
    s = chart.s
    out = {name: np.full((chart.ns, chart.nx), np.nan) for name in FAST}
    for name in FAST:
        out[name][0] = chart.terminal[name]
    for k in range(chart.ns - 1):
        v = chart.mask[k + 1]
        y = np.array([out[name][k, v] for name in FAST])
        f_a = {name: trans[name][k, v] for name in CARRIED}
        f_b = {name: trans[name][k + 1, v] for name in CARRIED}
        f_m = {name: 0.5 * (f_a[name] + f_b[name]) for name in CARRIED}
        y = rk4_step(y, s[k + 1] - s[k], f_a, f_m, f_b, chart.gas)
        for i, name in enumerate(FAST):
            out[name][k + 1, v] = y[i]
    return out


def _check_jacobian(chart, nodes):
    J = nodes['J'][1:][chart.mask[1:]]
    if J.size and not np.all(J > 0.0):
        k, i = np.argwhere((nodes['J'] <= 0.0) & chart.mask)[0]
        logger.error('regularize: J = {:.3g} at x = {:.6g}, s = {:.12g}'.format(nodes['J'][k, i], chart.x[i],
                                                                                chart.s[k]))
        raise JacobianNonPositive('J = {:.3g} <= 0 at x = {:.6g}, s = {:.12g}'
                                  .format(nodes['J'][k, i], chart.x[i], chart.s[k]))


def _weighted_change_B(new, old, weight, c1, c2):
    """ sup|d(psi, J, z, w, b)| + c2 sup(weight2 |d rw|, weight1 |d rb|) + c1 sup|d Jrz| """
    def sup(arr):
        arr = np.abs(arr[1:])
        arr = arr[np.isfinite(arr)]
        return float(np.max(arr)) if arr.size else 0.0
    base = max(sup(new[name] - old[name]) for name in ('psi', 'J', 'z', 'w', 'b'))
    drv = max(sup(weight[2] * (new['rw'] - old['rw'])), sup(weight[1] * (new['rb'] - old['rb'])))
    return base + c2 * drv + c1 * sup(new['Jrz'] - old['Jrz'])


def _picard_B(chart, max_iter, tol, delta_reg):
    """ Semi-implicit iteration on one slice grid; ContractionFailure as in the Goursat patches. """
    c1, c2 = picard_weights(chart.delta_star, 1.0 / chart.p)
    prev = None
    streak = 0
    change = np.inf
    chart.history = []
    for it in range(1, max_iter + 1):
        lag = chart.nodes
        feet = {beta: _feet(chart, lag, beta, delta_reg) for beta in (1, 2)}
        nodes = _transport_B(chart, lag, feet)
        nodes.update(_fast_B(chart, nodes))
        _check_jacobian(chart, nodes)
        weight = {beta: np.abs(_label_chain(chart, feet[beta])) ** (chart.p - 1.0) for beta in (1, 2)}
        change = _weighted_change_B(nodes, lag, weight, c1, c2)
        ratio = change / prev if prev else None
        chart.nodes = nodes
        chart.iterations = it
        chart.history.append({'iterate': it, 'change': change, 'ratio': ratio})
        logger.debug('regularize iterate %d: change %.3e ratio %s' % (it, change, ratio))
        if not np.isfinite(change):
            logger.error('regularize: non-finite change at iterate {}'.format(it))
            raise ContractionFailure('backward chart: iterate {} is not finite'.format(it))
        if change < tol:
            break
        if ratio is not None and ratio > cfg.CONTRACTION_FAIL_RATIO:
            streak += 1
            if streak >= 2:
                logger.error('regularize: ratio {:.3f} at iterate {}'.format(ratio, it))
                raise ContractionFailure('backward chart: contraction ratio {:.3f} > {} on two successive iterates '
                                         '(iterate {}, delta* = {:.3g})'
                                         .format(ratio, cfg.CONTRACTION_FAIL_RATIO, it, chart.delta_star))
        else:
            streak = 0
        prev = change
    else:
        logger.error('regularize: change {:.3e} after {} iterates'.format(change, max_iter))
        raise ContractionFailure('backward chart: change {:.3e} above {:.1e} after {} iterates (delta* = {:.3g})'
                                 .format(change, tol, max_iter, chart.delta_star))
    ratios = [h['ratio'] for h in chart.history[1:] if h['ratio'] is not None and h['change'] > 100.0 * tol]
    chart.report['contraction'] = {'iterations': chart.iterations, 'final_change': change,
                                   'max_ratio': float(max(ratios)) if ratios else None,
                                   'weights': {'c1': c1, 'c2': c2}}


def _corrector(chart, feet, name):
    """ Smooth corrector of rw (beta = 2) or rb (beta = 1): even quadratic fit of the terminal data near
    x = 0 carried with the same semi-implicit update as the field. """
    x = chart.x
    near = np.abs(x) < 0.25 * chart.x_max
    basis = np.vstack([np.ones(near.sum()), x[near] ** 2]).T
    g0, g2 = np.linalg.lstsq(basis, chart.terminal[name][near], rcond=None)[0]
    coef = _coefficients(chart, chart.nodes)
    out = np.full((chart.ns, chart.nx), np.nan)
    out[0] = g0 + g2 * x ** 2
    s = chart.s
    for k in range(chart.ns - 1):
        h = s[k] - s[k + 1]
        v1 = chart.mask[k + 1]
        f, _, _ = row_interp(x[chart.mask[k]], out[k, chart.mask[k]])
        foot = f(feet[k + 1, v1])
        if name == 'rw':
            out[k + 1, v1] = (foot - h * coef['rest_w'][k + 1, v1]) / (1.0 - h * coef['riccati_w'][k + 1, v1])
        else:
            out[k + 1, v1] = foot / (1.0 - h * coef['riccati_b'][k + 1, v1])
    return out


def commutator_residual(chart, weights, correctors):
    r''' Relative size of L(weight g) - weight L(g) along the lambda3 feet, g = rw - Gamma.

    L is the backward difference along the characteristic from each node to its
    foot; the residual is normalized by sup|weight L(g)|.
    '''
    x = chart.x
    s = chart.s
    weight = weights.weight[2]
    feet = weights.feet[2]
    g = chart.nodes['rw'] - correctors['rw']
    worst = 0.0
    scale = 0.0
    for k in range(chart.ns - 1):
        h = s[k] - s[k + 1]
        v1 = chart.mask[k + 1]
        x0 = x[chart.mask[k]]
        xf = feet[k + 1, v1]
        g_f = row_interp(x0, g[k, chart.mask[k]])[0](xf)
        w_f = row_interp(x0, weight[k, chart.mask[k]])[0](xf)
        g_n = g[k + 1, v1]
        w_n = weight[k + 1, v1]
        comm = ((w_f * g_f - w_n * g_n) - w_n * (g_f - g_n)) / h
        worst = max(worst, float(np.nanmax(np.abs(comm))))
        scale = max(scale, float(np.nanmax(np.abs(w_n * (g_f - g_n) / h))))
    return worst / max(scale, 1e-300)


def _monitors(chart, weights, m, strict=False):
    x = chart.x
    s = chart.s
    back = chart.T_star - s[1:]
    axis = chart.axis()[1:]
    rate = float(np.min(axis / back))
    q = (chart.p - 1.0) / chart.p
    mon = {}
    J = chart.nodes['J'][1:][chart.mask[1:]]
    mon['jacobian_positive'] = utils.monitor_entry(np.min(J), 0.0, np.min(J) > 0.0)
    mon['J_axis_rate'] = utils.monitor_entry(rate, 0.0, rate > 0.0, where='J(0, s)/(T* - s)')
    mon['J_axis_rate']['m_measured'] = 2.0 * rate

    rw_s = np.gradient(chart.nodes['rw'], s, axis=0)
    dist = np.abs(s[:, None] - weights.upsilon[2][None, :]) ** q
    scaled = np.abs(rw_s) * dist
    scaled[0] = np.nan
    scaled[~chart.mask] = np.nan
    worst = float(np.nanmax(scaled)) if np.any(np.isfinite(scaled)) else 0.0
    mon['drv_time_derivative_bound'] = utils.monitor_entry(worst, 2.0 * m, worst <= 2.0 * m)

    band = max(weights.report['comparability'][beta]['band_decades'] for beta in (1, 2))
    mon['weight_comparability'] = utils.monitor_entry(band, 2.0, band <= 2.0)
    sep = weights.report['separation'][2]['slope']
    gap = abs(sep - chart.p) if sep is not None else np.inf
    mon['cubic_separation'] = utils.monitor_entry(gap, 0.05, gap <= 0.05, where='|slope - p| for Upsilon_3')
    mon['cubic_separation']['slope'] = sep
    ratio = chart.report.get('contraction', {}).get('max_ratio')
    ratio = 0.0 if ratio is None else ratio
    mon['contraction_ratio'] = utils.monitor_entry(ratio, 0.5, ratio <= 0.5)
    spread = weights.report.get('foot_regularization')
    if spread is not None:
        last = max(v['successive_max_gap'][-1] for v in spread.values())
        limit = 1e-3 * chart.x_max
        mon['foot_regularization'] = utils.monitor_entry(last, limit, last <= limit)
    comm = chart.report.get('commutator')
    if comm is not None:
        mon['commutator'] = utils.monitor_entry(comm, 0.1, comm <= 0.1)
    failed = [k for k, v in mon.items() if not v['pass']]
    if failed:
        if strict:
            logger.error('regularize: monitors failed: {}'.format(failed))
            raise MonitorViolated('backward chart monitors failed: {}'.format(
                ', '.join('{} ({})'.format(k, mon[k]) for k in failed)))
        logger.warning('regularize: monitors failed: {}; refine nx, ns or shrink delta*'.format(failed))
    return mon


def solve_backward_B(chart, delta_star=None, ns=None, max_iter=None, tol=None, m=None, delta_reg=None,
                     strict=False):
    """ Fill the chart on [T_in, T*] by the semi-implicit backward iteration.

    delta* starts at x_max^2/m, capped so the slanted right edge keeps half the
    grid, and is halved on ContractionFailure or JacobianNonPositive up to
    REG_MAX_HALVINGS times.

    Args:
        chart (CubicChart): chart with its terminal slice (init_chart_and_data)
        delta_star (float): T* - T_in; automatic when None
        ns (int): slice count
        m (float): chart-opening constant for the default delta* and the derivative bound

    Returns:
        the same chart, with weights, correctors, report and monitors set
    """
    t0 = time.time()
    ns = cfg.REG_NS if ns is None else int(ns)
    max_iter = cfg.REG_MAX_ITER if max_iter is None else max_iter
    tol = cfg.REG_TOL if tol is None else tol
    m = cfg.REG_M_DEFAULT if m is None else m
    delta_reg = min(cfg.REG_DELTA_REG) if delta_reg is None else delta_reg
    speed = _speed_bound(chart)
    cap = chart.x_max / (2.0 * speed)
    if delta_star is None:
        delta_star = min(chart.x_max ** 2 / m, cap)
    elif delta_star > cap:
        logger.warning('regularize: delta* %.3g reduced to %.3g to keep the slanted edge inside the grid'
                       % (delta_star, cap))
        delta_star = cap
    halvings = []
    for attempt in range(cfg.REG_MAX_HALVINGS + 1):
        chart.set_slices(np.linspace(chart.T_star, chart.T_star - delta_star, ns), speed)
        _initial_guess(chart)
        try:
            _picard_B(chart, max_iter, tol, delta_reg)
            break
        except (ContractionFailure, JacobianNonPositive) as err:
            if attempt == cfg.REG_MAX_HALVINGS:
                logger.error('regularize: no delta* after {} halvings'.format(attempt))
                raise
            logger.warning('regularize: %s; halving delta* to %.3g' % (err, 0.5 * delta_star))
            halvings.append({'delta_star': delta_star, 'error': str(err)})
            delta_star *= 0.5
    chart.report['delta_star'] = {'value': chart.delta_star, 'halvings': halvings}

    weights = solve_weights(chart, delta_reg=delta_reg, compare=True)
    chart.weights = weights
    chart.correctors = {'rw': _corrector(chart, weights.feet[2], 'rw'), 'rb': _corrector(chart, weights.feet[1], 'rb')}
    chart.report['commutator'] = commutator_residual(chart, weights, chart.correctors)
    chart.report['weights'] = weights.report
    chart.monitors = _monitors(chart, weights, m, strict=strict)
    t1 = time.time()
    logger.info('Backward chart solve time: %2.2fsec (%d iterates, delta* = %.4g)' % (t1 - t0, chart.iterations,
                                                                                   chart.delta_star))
    return chart


def _slice_index(chart, s_eval):
    if s_eval is None:
        return chart.ns - 1
    return int(utils.closest(chart.s, s_eval))


def _locus_crossing(chart, ups, s_eval, x_k, psi_k):
    """ r at s_eval of the characteristic graphed by ups on the physical branch. """
    left = (chart.x <= 0.0) & np.isfinite(ups)
    xs, us = chart.x[left], ups[left]
    if s_eval < us.min() or s_eval > us.max():
        return None
    order = np.argsort(us)
    x_c = np.interp(s_eval, us[order], xs[order])
    return float(np.interp(x_c, x_k, psi_k))


def _exponent_fit(r, f, r_locus, min_samples=4):
    """ Per-side log-log slope of |df/dr| against |r - r_locus|. """
    d2 = utils.one_sided_derivative(r, f)
    out = {}
    for name, side in (('minus', r < r_locus), ('plus', r > r_locus)):
        dist = np.abs(r[side] - r_locus)
        keep = dist > 0.0
        if keep.sum() < min_samples:
            out[name] = {'slope': None, 'stderr': None}
            continue
        near = dist <= np.percentile(dist[keep], 50)
        try:
            slope, _, stderr = utils.loglog_fit(dist[keep & near], d2[side][keep & near], min_samples=min_samples)
        except FitIllConditioned:
            slope, stderr = None, None
        out[name] = {'slope': slope, 'stderr': stderr}
    return out


def measure_regularity(chart, s_eval=None, beta=None):
    r''' Eulerian fields on one slice below T* and their Hoelder report.

    Inverts x -> psi(x, s_eval), turns the DRV back into r-derivatives

        dz/dr = rz - k rb,    dw/dr = rw + k rb,    db/dr = rb

    and measures the C^{0,beta} seminorms of those derivatives (beta = 1/p by
    default), their change when every second sample is dropped, the three
    non-smooth loci and the second-derivative growth of w toward the lambda3
    locus.

    Returns:
        (columns dict INITIAL_DATA_COLUMNS, report dict)

    Raises:
        JacobianNonPositive when J <= 0 or psi is not increasing on the slice
    '''
    k = _slice_index(chart, s_eval)
    s_k = float(chart.s[k])
    if s_k >= chart.T_star:
        logger.error('measure_regularity: slice s = {} is not below T*'.format(s_k))
        raise JacobianNonPositive('measure_regularity needs s < T* (got s = {:.12g}, J(0, T*) = 0)'.format(s_k))
    beta = 1.0 / chart.p if beta is None else beta
    v = chart.mask[k]
    nodes = {name: chart.nodes[name][k, v] for name in FIELDS}
    x_k = chart.x[v]
    if not np.all(nodes['J'] > 0.0):
        i = int(np.argmin(nodes['J']))
        logger.error('measure_regularity: J = {:.3g} at x = {:.6g}'.format(nodes['J'][i], x_k[i]))
        raise JacobianNonPositive('J = {:.3g} <= 0 at x = {:.6g}, s = {:.12g}'.format(nodes['J'][i], x_k[i], s_k))
    r = nodes['psi']
    if not np.all(np.diff(r) > 0.0):
        i = int(np.argmin(np.diff(r)))
        logger.error('measure_regularity: psi not increasing at x = {:.6g}'.format(x_k[i]))
        raise JacobianNonPositive('psi(., {:.12g}) is not increasing at x = {:.6g}'.format(s_k, x_k[i]))
    rho = density_or_unit(nodes['w'], nodes['z'], nodes['b'], chart.gas)
    kk = entropy_coupling(rho, chart.gas)
    rz = nodes['Jrz'] / nodes['J']
    cols = {'r': r, 'w': nodes['w'], 'z': nodes['z'], 'b': nodes['b'],
            'dw': nodes['rw'] + kk * nodes['rb'], 'dz': rz - kk * nodes['rb'], 'db': nodes['rb']}

    seminorm, halved, above = {}, {}, {}
    for name in ('dw', 'dz', 'db'):
        full = utils.holder_seminorm(r, cols[name], beta)
        half = utils.holder_seminorm(r[::2], cols[name][::2], beta)
        seminorm[name] = full
        halved[name] = abs(half - full) / max(full, 1e-300)
        above[name] = utils.holder_seminorm(r, cols[name], beta + 0.1)

    loci = {'psi': float(np.interp(0.0, x_k, r))}
    weights = chart.weights
    if weights is not None:
        for beta_fam, name in ((1, 'phi'), (2, 'eta')):
            loci[name] = _locus_crossing(chart, weights.upsilon[beta_fam], s_k, x_k, r)
    fits = {}
    if loci.get('eta') is not None:
        fits['d2w_eta'] = _exponent_fit(r, cols['dw'], loci['eta'])
    fits['d2w_eta_expected'] = beta - 1.0

    far = np.ones_like(r, dtype=bool)
    span = r[-1] - r[0]
    for r_loc in loci.values():
        if r_loc is not None:
            far &= np.abs(r - r_loc) > 0.1 * span
    second = {}
    for name in ('dw', 'dz', 'db'):
        d2 = utils.one_sided_derivative(r, cols[name])
        second[name] = float(np.max(np.abs(d2[far]))) if np.any(far) else None

    report = {'s_eval': s_k, 'beta': beta, 'holder_seminorms': seminorm, 'holder_halving_change': halved,
              'holder_seminorms_above': above, 'cusp_loci': loci, 'exponent_fits': fits,
              'second_derivative_away': second, 'jacobian_min': float(np.min(nodes['J']))}
    worst = max(halved.values())
    if worst > cfg.REG_HALVING_TOL:
        logger.warning('measure_regularity: seminorm changes %.1f%% under halving' % (100.0 * worst))
    return cols, report


def synthetic_preshock(beta=1.0 / 3.0, r_star=0.5, T_star=-1.05, z_star=-1.0, a=-0.3, b=0.05, w_star=1.0,
                       c_w=0.2, d_w=0.1, b_star=1.0, c_b=0.1, d_b=0.05, half_width=0.1, n=200, gas=None):
    r''' Two-sided cusp data with a known expansion.

        z = z* + a sgn(d)|d|^beta + b |d|^(2 beta)
        w = w* + c_w d + d_w |d|^(1+beta),    b = b* + c_b d + d_b |d|^(1+beta)

    with d = r - r*, sampled geometrically over six decades on each side.
    a < 0 gives the compressive cusp whose chart opens backward in time.
    '''
    gas = gas or GasParams()
    dist = np.logspace(np.log10(half_width) - 6.0, np.log10(half_width), n)
    sides = {}
    for name, sign in (('minus', -1.0), ('plus', 1.0)):
        d = sign * dist
        sides[name] = {'r': r_star + d,
                       'z': z_star + a * sign * dist ** beta + b * dist ** (2.0 * beta),
                       'w': w_star + c_w * d + d_w * dist ** (1.0 + beta),
                       'b': b_star + c_b * d + d_b * dist ** (1.0 + beta)}
    centre = {'w': w_star, 'z': z_star, 'b': b_star}
    return PreshockProfile(r_star, sides['minus'], sides['plus'], centre, gas=gas, T_star=T_star, beta=beta)


def chart_columns(chart):
    """ Valid chart nodes as flat columns (CHART_COLUMNS). """
    kk, ii = np.nonzero(chart.mask)
    rz = chart.rz()
    cols = {'s': chart.s[kk], 'x': chart.x[ii], 'rz': rz[kk, ii]}
    for name in ('psi', 'J', 'w', 'z', 'b', 'rw', 'rb'):
        cols[name] = chart.nodes[name][kk, ii]
    return cols


def save_initial_data(cols, report, filename_out, meta=None):
    """ Eulerian initial data on T_in (INITIAL_DATA_COLUMNS) with the regularity report in the sidecar. """
    from .io.csv_writer import write_table
    side = {'regularity': report}
    side.update(meta or {})
    write_table(filename_out, cols, side, column_order=INITIAL_DATA_COLUMNS)


def save_chart(chart, filename_out, meta=None):
    from .io.csv_writer import write_table
    side = {'chart': chart.sidecar()}
    side.update(meta or {})
    write_table(filename_out, chart_columns(chart), side, column_order=CHART_COLUMNS)


def chart_groups(chart):
    """ Arrays for the HDF5 dump. """
    group = {'s': chart.s, 'x': chart.x, 'mask': chart.mask.astype(np.int8)}
    group.update(chart.nodes)
    if chart.weights is not None:
        for beta in (1, 2):
            group['upsilon_{}'.format(beta)] = chart.weights.upsilon[beta]
            group['weight_{}'.format(beta)] = chart.weights.weight[beta]
    return group
