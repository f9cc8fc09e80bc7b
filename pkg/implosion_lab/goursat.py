r''' goursat.py - characteristic Goursat problems next to the preshock.

Both patches are parametrized by the fast (lambda1) characteristics leaving the
shock edge.  psi(t, s) is the position at time s of the characteristic that
meets the shock at time t (its label) and J = d(psi)/dt.  Nodes live on the
triangle T* <= s <= t <= T_top of one ascending grid and are stored at
[label, slice].

Along each label the fast family obeys ODEs in s:

    d(psi)/ds = lambda1,    dz/ds = A + q rb,    dJ/ds = (1+a)/2 Jrz + J((1-a)/2 rw - e)
    d(Jrz)/ds = -e(J rw + Jrz)/2 + a(d-1)(w J rw - z Jrz)/(2 psi) - J a(d-1)(w^2 - z^2)/(4 psi^2)

with Jrz = J rz.  w, rw (along lambda3) and b, rb (along lambda2) are carried
semi-Lagrangian from slice to slice.  Each half reads the other's previous
iterate; the two passes repeat until the weighted change is below tolerance.

The exterior patch D takes its shock-edge data from the admissible pair and its
inflow from the Guderley field beyond the label-T_circ characteristic.  The
interior patch L takes RH-inverted traces along ell, has J < 0 and runs up to
the label T_flat whose fast characteristic meets the backward lambda3
characteristic from (ell(T_circ), T_circ) at T*.
'''

import sys
import time
import logging

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq, curve_fit

from . import config as cfg
from . import utils
from .gas_core import (PrimState, speeds_wz, characteristic_sources, drv_sources, entropy_coupling,
                       density_from_sigma)
from .guderley import exterior_fields
from .rankine_hugoniot import invert_rh
from .shock_path import drv_from_compatibility
from .errors import ContractionFailure, InsufficientResolution, FitIllConditioned, MonitorViolated

logger = logging.getLogger(__name__)

level_log = logging.INFO

if level_log == logging.INFO:
    stream = sys.stdout
    lformat = cfg.LOG_FORMAT
else:
    stream = sys.stderr
    lformat = cfg.LOG_FORMAT_DEBUG

logging.basicConfig(format=lformat, stream=stream, level=level_log)

FAST = ('psi', 'J', 'z', 'Jrz')
TRANSPORT = {'eta': ('w', 'rw'), 'phi': ('b', 'rb')}
FIELDS = FAST + ('w', 'rw', 'b', 'rb')
PATCH_COLUMNS = ['patch', 't', 's', 'psi', 'J', 'w', 'z', 'b', 'rho', 'rw', 'rz', 'rb']
PRESHOCK_COLUMNS = ['r', 'w', 'z', 'b', 'side']
INFLOW_COLUMNS = ['t', 'r', 'w', 'b', 'rw', 'rb']


class CharField(object):
    """ Fast-characteristic field of one patch on the triangle s <= t.

    Args:
        kind (str): 'D' for the exterior patch, 'L' for the interior one
        t (np.array): ascending label/slice grid, t[0] = T*
        gas (GasParams): gas parameters
    """

    def __init__(self, kind, t, gas):
        self.kind = kind
        self.t = np.asarray(t, dtype=float)
        self.n = self.t.size
        self.gas = gas
        self.nodes = {name: np.full((self.n, self.n), np.nan) for name in FIELDS}
        self.edge = {}
        self.history = []
        self.iterations = 0
        self.monitors = {}
        self.report = {}

    @property
    def T_star(self):
        return self.t[0]

    @property
    def T_top(self):
        return self.t[-1]

    def valid(self):
        """ Mask of the nodes with slice <= label. """
        return np.tril(np.ones((self.n, self.n), dtype=bool))

    def rho(self):
        return density_or_unit(self.nodes['w'], self.nodes['z'], self.nodes['b'], self.gas)

    def rz(self):
        J = self.nodes['J']
        with np.errstate(divide='ignore', invalid='ignore'):
            return np.where(J != 0.0, self.nodes['Jrz'] / J, np.nan)

    def lambdas(self):
        return speeds_wz(self.nodes['w'], self.nodes['z'], self.gas)

    def corner_row(self):
        """ Every label at the slice T*, ordered by label. """
        out = {name: self.nodes[name][:, 0].copy() for name in FIELDS}
        out['t'] = self.t.copy()
        out['r'] = out['psi']
        out['rz'] = self.rz()[:, 0]
        return out

    def shock_edge(self):
        """ Node values on s = t. """
        idx = np.arange(self.n)
        out = {name: self.nodes[name][idx, idx].copy() for name in FIELDS}
        out['t'] = self.t.copy()
        return out

    def sidecar(self):
        return {'patch': self.kind, 'n': self.n, 'T_star': float(self.T_star), 'T_top': float(self.T_top),
                'iterations': self.iterations, 'history': self.history, 'monitors': self.monitors,
                'report': self.report}


def density_or_unit(w, z, b, gas):
    """ rho = (alpha sigma/b)^(1/alpha) where b > 0, 1 elsewhere. """
    sigma = 0.5 * (np.asarray(w, dtype=float) - np.asarray(z, dtype=float))
    b = np.asarray(b, dtype=float)
    ok = (b > 1e-300) & (sigma > 0.0)
    with np.errstate(divide='ignore', invalid='ignore'):
        rho = density_from_sigma(np.where(ok, sigma, 1.0), np.where(ok, b, 1.0), gas)
    return np.where(ok, rho, 1.0)


def row_interp(r, vals):
    """ Monotone interpolant of one slice in r, constant beyond its end nodes.

    Returns:
        (f, r_lo, r_hi)
    """
    r = np.asarray(r, dtype=float)
    vals = np.asarray(vals, dtype=float)
    keep = np.isfinite(r) & np.isfinite(vals)
    r, vals = r[keep], vals[keep]
    order = np.argsort(r, kind='mergesort')
    r, idx = np.unique(r[order], return_index=True)
    vals = vals[order][idx]
    if r.size == 0:
        return (lambda x: np.full_like(np.asarray(x, dtype=float), np.nan)), np.nan, np.nan
    if r.size < 3:
        return (lambda x: np.interp(x, r, vals)), r[0], r[-1]
    spl = PchipInterpolator(r, vals, extrapolate=False)
    lo, hi = r[0], r[-1]
    return (lambda x: spl(np.clip(x, lo, hi))), lo, hi


def guderley_inflow(prof):
    """ Inflow callable (r, s) -> fields of the unmodified Guderley exterior. """
    def inflow(r, s):
        return exterior_fields(prof, r, s)
    return inflow


def load_inflow(filename):
    """ Inflow callable from a table of traces along the label-T_circ edge (INFLOW_COLUMNS). """
    from .io.csv_writer import read_table
    df, _ = read_table(filename, required=INFLOW_COLUMNS)
    df = df.sort_values('t')
    ts = df['t'].values
    splines = {name: PchipInterpolator(ts, df[name].values) for name in ('w', 'b', 'rw', 'rb')}

    def inflow(r, s):
        r = np.atleast_1d(np.asarray(r, dtype=float))
        s = np.clip(s, ts[0], ts[-1])
        return {name: np.full_like(r, float(spl(s))) for name, spl in splines.items()}
    return inflow


def save_inflow(field, filename_out, meta=None):
    """ Traces along the top label of a solved exterior patch, readable by load_inflow. """
    from .io.csv_writer import write_table
    top = field.n - 1
    cols = {'t': field.t.copy(), 'r': field.nodes['psi'][top, :]}
    for name in ('w', 'b', 'rw', 'rb'):
        cols[name] = field.nodes[name][top, :]
    write_table(filename_out, cols, meta or {}, column_order=INFLOW_COLUMNS)


def _sources(nodes, gas):
    """ Eulerian right sides of the carried fields, from one iterate. """
    w, z, b = nodes['w'], nodes['z'], nodes['b']
    rw, rb = nodes['rw'], nodes['rb']
    J = nodes['J']
    with np.errstate(divide='ignore', invalid='ignore'):
        rz = np.where(J != 0.0, nodes['Jrz'] / J, 0.0)
    rho = density_or_unit(w, z, b, gas)
    r = nodes['psi']
    _, src_w, src_b = characteristic_sources(w, z, b, rho, rb, r, gas)
    _, src_rw, src_rb = drv_sources(w, z, rho, rw, rz, rb, r, gas)
    return {'w': src_w, 'rw': src_rw, 'b': src_b, 'rb': src_rb}


def _transport(field, lag, edge, inflow):
    """ One semi-Lagrangian pass for w, rw (lambda3) and b, rb (lambda2), late slices first. """
    n = field.n
    t = field.t
    gas = field.gas
    src = _sources(lag, gas)
    lam1, lam2, lam3 = speeds_wz(lag['w'], lag['z'], gas)
    speed = {'eta': lam3, 'phi': lam2}
    new = {name: np.full((n, n), np.nan) for fam in TRANSPORT for name in TRANSPORT[fam]}
    top = n - 1

    def boundary(i, j, r):
        if field.kind == 'D':
            vals = inflow(np.atleast_1d(r), t[i])
            for name in new:
                new[name][j, i] = vals[name]
        if field.kind == 'L':
            for name in new:
                new[name][i, i] = edge[name][i]

    boundary(top, np.array([top]), lag['psi'][top, top])
    for i in range(n - 2, -1, -1):
        j = np.arange(i, n)
        jp = np.arange(i + 1, n)
        h = t[i + 1] - t[i]
        r0 = lag['psi'][j, i]
        rp = lag['psi'][jp, i + 1]
        for fam, names in TRANSPORT.items():
            v_next, lo, hi = row_interp(rp, speed[fam][jp, i + 1])
            v0 = speed[fam][j, i]
            rf = r0 + h * v0
            rf = r0 + 0.5 * h * (v0 + v_next(rf))
            beyond = rf > hi
            for name in names:
                f_next, _, _ = row_interp(rp, new[name][jp, i + 1])
                s_next, _, _ = row_interp(rp, src[name][jp, i + 1])
                s0 = src[name][j, i]
                s_foot = s_next(rf)
                s_avg = 0.5 * (np.where(np.isfinite(s0), s0, 0.0) + np.where(np.isfinite(s_foot), s_foot, 0.0))
                val = f_next(rf) - h * s_avg
                if np.any(beyond) and field.kind == 'D':
                    # past the label-T_circ characteristic the flow is the inflow field
                    outside = inflow(rf[beyond], t[i + 1])[name]
                    val[beyond] = outside - h * np.where(np.isfinite(s0[beyond]), s0[beyond], 0.0)
                if np.any(beyond) and field.kind == 'L':
                    # the characteristic left through the shock edge before the next slice
                    gap = np.maximum(v0[beyond] - edge['ell_dot'][i], 1e-300)
                    hit = np.clip((edge['ell'][i] - r0[beyond]) / gap, 0.0, h)
                    s_hit = np.where(np.isfinite(s0[beyond]), s0[beyond], 0.0)
                    val[beyond] = np.interp(t[i] + hit, t, edge[name]) - hit * s_hit
                new[name][j, i] = val
        if field.kind == 'D':
            boundary(i, np.array([top]), r0[-1:])
        else:
            boundary(i, None, None)
    return new


def fast_rhs(y, fld, gas):
    """ s-derivatives of (psi, J, z, Jrz) along the fast characteristics. """
    psi, J, z, Jrz = y
    w, b, rw, rb = fld['w'], fld['b'], fld['rw'], fld['rb']
    a = gas.alpha
    d1 = gas.dim - 1
    rho = density_or_unit(w, z, b, gas)
    e = rho ** a * rb / gas.gamma
    lam1, _, _ = speeds_wz(w, z, gas)
    src_z, _, _ = characteristic_sources(w, z, b, rho, rb, psi, gas)
    dJ = 0.5 * (1.0 + a) * Jrz + J * (0.5 * (1.0 - a) * rw - e)
    dJrz = (-0.5 * e * (J * rw + Jrz) + a * d1 * (w * J * rw - z * Jrz) / (2.0 * psi)
            - J * a * d1 * (w * w - z * z) / (4.0 * psi * psi))
    return np.array([lam1, dJ, src_z, dJrz])


def rk4_step(y, h, f_a, f_m, f_b, gas):
    k1 = fast_rhs(y, f_a, gas)
    k2 = fast_rhs(y + 0.5 * h * k1, f_m, gas)
    k3 = fast_rhs(y + 0.5 * h * k2, f_m, gas)
    k4 = fast_rhs(y + h * k3, f_b, gas)
    return y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def edge_jrz(w, z, b, rw, rb, J, psi, lam1_dot, gas):
    r''' J rz on an exterior shock edge from the compatibility of the prescribed lambda1 trace:

        d(lambda1+)/dt = J d(lambda1)/dr + D1 lambda1
        D1 w = D3 w - 2c (rw + k rb)
    '''
    a = gas.alpha
    rho = density_or_unit(w, z, b, gas)
    src_z, src_w, _ = characteristic_sources(w, z, b, rho, rb, psi, gas)
    k = entropy_coupling(rho, gas)
    c = rho ** a * b
    e = rho ** a * rb / gas.gamma
    d1_w = src_w - 2.0 * c * (rw + k * rb)
    d1_lam1 = 0.5 * (1.0 + a) * src_z + 0.5 * (1.0 - a) * d1_w
    return 2.0 / (1.0 + a) * (lam1_dot - J * (0.5 * (1.0 - a) * rw - e) - d1_lam1)


def _fast_pass(field, trans, edge):
    """ RK4 along every label from the shock edge down to T*, reading the carried fields. """
    n = field.n
    t = field.t
    gas = field.gas
    a = gas.alpha
    out = {name: np.full((n, n), np.nan) for name in FAST}
    for i in range(n - 1, -1, -1):
        if i < n - 1:
            jj = np.arange(i + 1, n)
            h = t[i] - t[i + 1]
            y = np.array([out[name][jj, i + 1] for name in FAST])
            f_a = {name: trans[name][jj, i + 1] for name in trans}
            f_b = {name: trans[name][jj, i] for name in trans}
            f_m = {name: 0.5 * (f_a[name] + f_b[name]) for name in trans}
            y = rk4_step(y, h, f_a, f_m, f_b, gas)
            for k, name in enumerate(FAST):
                out[name][jj, i] = y[k]
        out['psi'][i, i] = edge['ell'][i]
        out['J'][i, i] = edge['J'][i]
        if field.kind == 'D':
            w = trans['w'][i, i]
            z = (2.0 * edge['lambda1'][i] - (1.0 - a) * w) / (1.0 + a)
            out['z'][i, i] = z
            out['Jrz'][i, i] = np.nan if i == 0 else edge_jrz(
                w, z, trans['b'][i, i], trans['rw'][i, i], trans['rb'][i, i], edge['J'][i], edge['ell'][i],
                edge['lambda1_dot'][i], gas)
        else:
            out['z'][i, i] = edge['z'][i]
            out['Jrz'][i, i] = np.nan if i == 0 else edge['J'][i] * edge['rz'][i]
    return out


def picard_weights(delta_circ, eps):
    """ (c1, c2) = (c2^2, delta_circ^eps/10) for the weighted difference norm. """
    c2 = delta_circ ** eps / 10.0
    return c2 * c2, c2


def weighted_change(new, old, c1, c2):
    """ sup|d(psi, J, z, w, b)| + c2 sup|d(rw, rb)| + c1 sup|d(Jrz)| over the triangle, corner excluded. """
    def sup(name):
        d = np.abs(new[name] - old[name])
        d[0, 0] = np.nan
        d = d[np.isfinite(d)]
        return float(np.max(d)) if d.size else 0.0
    base = max(sup(name) for name in ('psi', 'J', 'z', 'w', 'b'))
    return base + c2 * max(sup('rw'), sup('rb')) + c1 * sup('Jrz')


def _picard(field, edge, inflow, weights, max_iter, tol):
    """ Repeat transport and fast passes until the weighted change is below tol.

    Raises ContractionFailure when the change ratio exceeds the failure ratio on
    two successive iterates or no convergence is reached.
    """
    c1, c2 = weights
    prev = None
    streak = 0
    change = np.inf
    for it in range(1, max_iter + 1):
        lag = field.nodes
        trans = _transport(field, lag, edge, inflow)
        nodes = dict(trans)
        nodes.update(_fast_pass(field, trans, edge))
        change = weighted_change(nodes, lag, c1, c2)
        ratio = change / prev if prev else None
        field.nodes = nodes
        field.iterations = it
        field.history.append({'iterate': it, 'change': change, 'ratio': ratio})
        logger.debug('goursat %s iterate %d: change %.3e ratio %s' % (field.kind, it, change, ratio))
        if not np.isfinite(change):
            logger.error('goursat {}: non-finite change at iterate {}'.format(field.kind, it))
            raise ContractionFailure('patch {}: iterate {} is not finite'.format(field.kind, it))
        if change < tol:
            break
        if ratio is not None and ratio > cfg.CONTRACTION_FAIL_RATIO:
            streak += 1
            if streak >= 2:
                logger.error('goursat {}: ratio {:.3f} at iterate {}'.format(field.kind, ratio, it))
                raise ContractionFailure('patch {}: contraction ratio {:.3f} > {} on two successive iterates '
                                         '(iterate {})'.format(field.kind, ratio, cfg.CONTRACTION_FAIL_RATIO, it))
        else:
            streak = 0
        prev = change
    else:
        logger.error('goursat {}: change {:.3e} after {} iterates'.format(field.kind, change, max_iter))
        raise ContractionFailure('patch {}: change {:.3e} above {:.1e} after {} iterates'
                                 .format(field.kind, change, tol, max_iter))
    ratios = [h['ratio'] for h in field.history[1:] if h['ratio'] is not None]
    field.report['contraction'] = {'iterations': field.iterations, 'final_change': change,
                                   'max_ratio': float(max(ratios)) if ratios else None,
                                   'weights': {'c1': c1, 'c2': c2}}


def exterior_edge(pair, t):
    """ Shock-edge data of the exterior patch from the admissible pair. """
    t = np.asarray(t, dtype=float)
    return {'t': t, 'ell': pair.ell(t), 'ell_dot': pair.ell_dot(t), 'lambda1': pair.lambda1_plus(t),
            'lambda1_dot': pair.lambda1_plus_dot(t), 'J': pair.chi(t)}


def _initial_exterior(field, edge, inflow):
    """ Straight fast characteristics carrying the inflow field. """
    t = field.t
    nodes = field.nodes
    for i in range(field.n):
        j = np.arange(i, field.n)
        r = edge['ell'][j] - edge['lambda1'][j] * (t[j] - t[i])
        vals = inflow(r, t[i])
        nodes['psi'][j, i] = r
        for name in ('w', 'z', 'b', 'rw', 'rb'):
            nodes[name][j, i] = vals[name] if name in vals else np.nan
        nodes['J'][j, i] = edge['J'][j]
        rz = vals['rz'] if 'rz' in vals else np.zeros_like(r)
        nodes['Jrz'][j, i] = edge['J'][j] * rz
    if not np.all(np.isfinite(nodes['z'][field.valid()])):
        # a tabulated inflow has no z; start from the lambda1 trace instead
        a = field.gas.alpha
        for j in range(field.n):
            nodes['z'][j, :j + 1] = (2.0 * edge['lambda1'][j] - (1.0 - a) * nodes['w'][j, :j + 1]) / (1.0 + a)


def _entry(value, limit, ok, where=None):
    return utils.monitor_entry(value, limit, ok, where)


def solve_goursat_D(pair, inflow=None, n=None, max_iter=None, tol=None, bounds=None, strict=False):
    """ Exterior patch between ell and the label-T_circ fast characteristic.

    Args:
        pair (AdmissiblePair): shock edge data
        inflow (callable): (r, s) -> dict of w, b, rw, rb; the Guderley exterior when None
        n (int): labels (= slices)
        max_iter (int): Picard iterate limit
        tol (float): weighted-change tolerance
        bounds (dict): calibrated (m, m1) of the curve
        strict (bool): raise MonitorViolated instead of reporting

    Returns:
        CharField of kind 'D'
    """
    t0 = time.time()
    n = cfg.GOURSAT_N if n is None else n
    max_iter = cfg.PICARD_MAX_ITER if max_iter is None else max_iter
    tol = cfg.PICARD_TOL if tol is None else tol
    curve = pair.curve
    inflow = guderley_inflow(pair.prof) if inflow is None else inflow

    grid = utils.tau_graded_grid(pair.T_star, pair.T_circ, n)
    field = CharField('D', grid, pair.gas)
    edge = exterior_edge(pair, grid)
    field.edge = edge
    _initial_exterior(field, edge, inflow)
    weights = picard_weights(pair.delta_circ, curve.tcfg.eps)
    _picard(field, edge, inflow, weights, max_iter, tol)

    field.monitors = patch_monitors(field, bounds or curve.calibration, strict=strict)
    compat = compatibility_residual(field)
    field.monitors['compatibility_residual'] = _entry(compat, 1e-2, compat <= 1e-2)
    match = inflow_edge_match(field, pair.prof)
    field.monitors['inflow_edge_match'] = _entry(match, 1e-6, match <= 1e-6)
    seam = seam_discrepancy(field, pair.prof)
    field.monitors['seam_T_circ'] = _entry(seam, 1e-3, seam <= 1e-3)
    t1 = time.time()
    logger.info('Goursat D solve time: %2.2fsec (%d iterates)' % (t1 - t0, field.iterations))
    return field


def patch_monitors(field, bounds=None, strict=False):
    """ Shock-edge Jacobian sign, the sigma band and the contraction ratio of one patch. """
    m = (bounds or {}).get('m', 10.0)
    edge = field.shock_edge()
    J = edge['J'][1:]
    sigma = 0.5 * (field.nodes['w'] - field.nodes['z'])[field.valid()]
    sigma = sigma[np.isfinite(sigma)]
    mon = {}
    if field.kind == 'D':
        mon['J_edge_positive'] = _entry(np.min(J), 0.0, np.min(J) > 0.0)
    else:
        mon['J_edge_negative'] = _entry(np.max(J), 0.0, np.max(J) < 0.0)
    mon['sigma_band_lower'] = _entry(np.min(sigma), 1.0 / (2.0 * m), np.min(sigma) >= 1.0 / (2.0 * m))
    mon['sigma_band_upper'] = _entry(np.max(sigma), 2.0 * m, np.max(sigma) <= 2.0 * m)
    ratio = field.report.get('contraction', {}).get('max_ratio')
    ratio = 0.0 if ratio is None else ratio
    mon['contraction_ratio'] = _entry(ratio, 0.5, ratio <= 0.5)
    failed = [k for k, v in mon.items() if not v['pass']]
    if failed:
        if strict:
            logger.error('goursat {}: monitors failed: {}'.format(field.kind, failed))
            raise MonitorViolated('patch {} monitors failed: {}'.format(
                field.kind, ', '.join('{} ({})'.format(k, mon[k]) for k in failed)))
        logger.warning('goursat {}: monitors failed: {}; refine n or shrink delta_circ'.format(field.kind, failed))
    return mon


def compatibility_residual(field, skip=3):
    """ Max relative gap between the shock-edge Jrz and d(z)/dt + k d(b)/dt along the slice. """
    nodes = field.nodes
    worst = 0.0
    for i in range(skip, field.n - 2):
        j = np.array([i, i + 1, i + 2])
        lab = field.t[j]
        dz = np.gradient(nodes['z'][j, i], lab, edge_order=2)[0]
        db = np.gradient(nodes['b'][j, i], lab, edge_order=2)[0]
        rho = density_or_unit(nodes['w'][i, i], nodes['z'][i, i], nodes['b'][i, i], field.gas)
        fd = dz + entropy_coupling(rho, field.gas) * db
        jrz = nodes['Jrz'][i, i]
        worst = max(worst, float(abs(fd - jrz) / max(abs(jrz), 1.0)))
    return worst


def inflow_edge_match(field, prof):
    """ sup over slices of the top-label position against an independent Guderley lambda1 trace. """
    top = field.n - 1
    t = field.t

    def rhs(s, r):
        ext = exterior_fields(prof, r, s)
        return ext['u'] - ext['c']

    sol = solve_ivp(rhs, (t[top], t[0]), [field.nodes['psi'][top, top]], method='DOP853',
                    dense_output=True, rtol=1e-11, atol=1e-13)
    r_ref = sol.sol(t)[0]
    return float(np.max(np.abs(r_ref - field.nodes['psi'][top, :])))


def seam_discrepancy(field, prof):
    """ Relative gap in (w, b, rw, rb) between the label next to T_circ and the Guderley field. """
    j = field.n - 2
    worst = 0.0
    for i in range(j + 1):
        ext = exterior_fields(prof, field.nodes['psi'][j, i], field.t[i])
        for name in ('w', 'b', 'rw', 'rb'):
            ref = float(ext[name][0])
            worst = max(worst, abs(field.nodes[name][j, i] - ref) / max(abs(ref), 1.0))
    return worst


def interior_edge(field_D, pair, t):
    """ Interior shock-edge data on grid t.

    For t <= T_circ the minus state is the RH inversion of the exterior patch's
    edge state with speed ell_dot; later the curve's interior traces are used.
    DRV traces come from the compatibility solve along the edge.
    """
    curve = pair.curve
    gas = pair.gas
    a = gas.alpha
    t = np.asarray(t, dtype=float)
    ev = curve.evaluate(np.clip(t, curve.T_star, curve.T_fin))
    before = t <= pair.T_circ
    ell = np.where(before, pair.ell(np.minimum(t, pair.T_circ)), ev['s'])
    ell_dot = np.where(before, pair.ell_dot(t), ev['sdot'])

    out = {'t': t, 'ell': ell, 'ell_dot': ell_dot}
    for key in ('w', 'z', 'b', 'rho', 'rw', 'rz', 'rb'):
        out[key] = np.array(ev[key + '_minus'], dtype=float)

    edge_D = field_D.shock_edge()
    tb = t[before]
    plus = {name: PchipInterpolator(edge_D['t'], edge_D[name])(tb) for name in ('w', 'z', 'b')}
    rho_p = density_or_unit(plus['w'], plus['z'], plus['b'], gas)
    u_p = 0.5 * (plus['w'] + plus['z'])
    w_m, z_m, b_m, rho_m = plus['w'].copy(), plus['z'].copy(), plus['b'].copy(), rho_p.copy()
    live = tb > pair.T_star
    if np.any(live):
        minus = invert_rh(PrimState(u_p[live], rho_p[live], plus['b'][live]), ell_dot[before][live], gas)
        c_m = minus.c(gas)
        w_m[live] = minus.u + c_m / a
        z_m[live] = minus.u - c_m / a
        b_m[live] = minus.b
        rho_m[live] = minus.rho
    dw = utils.one_sided_derivative(tb, w_m)
    dz = utils.one_sided_derivative(tb, z_m)
    db = utils.one_sided_derivative(tb, b_m)
    rw, rz, rb = drv_from_compatibility(w_m, z_m, b_m, rho_m, dw, dz, db, ell_dot[before], ell[before], gas)
    for key, val in (('w', w_m), ('z', z_m), ('b', b_m), ('rho', rho_m), ('rw', rw), ('rz', rz), ('rb', rb)):
        out[key][before] = val
    singular = t <= pair.T_star
    for key in ('rw', 'rz', 'rb'):
        out[key][singular] = np.nan
    lam1, _, _ = speeds_wz(out['w'], out['z'], gas)
    out['lambda1'] = lam1
    out['J'] = ell_dot - lam1
    out['J'][singular] = 0.0
    return out


def _initial_interior(field, edge):
    """ Straight fast characteristics carrying their shock-edge values. """
    t = field.t
    nodes = field.nodes
    fill = {name: np.where(np.isfinite(edge[name]), edge[name], 0.0) for name in ('w', 'z', 'b', 'rw', 'rz', 'rb')}
    for j in range(field.n):
        i = np.arange(j + 1)
        nodes['psi'][j, i] = edge['ell'][j] - edge['lambda1'][j] * (t[j] - t[i])
        for name in ('w', 'z', 'b', 'rw', 'rb'):
            nodes[name][j, i] = fill[name][j]
        nodes['J'][j, i] = edge['J'][j]
        nodes['Jrz'][j, i] = edge['J'][j] * fill['rz'][j]


def _solve_L_on(field_D, pair, T_top, n, max_iter, tol):
    grid = utils.tau_graded_grid(pair.T_star, T_top, n)
    field = CharField('L', grid, pair.gas)
    edge = interior_edge(field_D, pair, grid)
    field.edge = edge
    _initial_interior(field, edge)
    weights = picard_weights(pair.delta_circ, pair.curve.tcfg.eps)
    _picard(field, edge, None, weights, max_iter, tol)
    return field


def trace_eta(field, t_start):
    """ Position at T* of the lambda3 characteristic leaving (ell(t_start), t_start) backward in time.

    Raises InsufficientResolution when it leaves the slices covered by the patch.
    """
    t = field.t
    edge = field.edge
    lam1, lam2, lam3 = field.lambdas()
    i0 = int(np.searchsorted(t, t_start, side='right')) - 1
    r = float(np.interp(t_start, t, edge['ell']))
    lam3_edge = speeds_wz(edge['w'], edge['z'], field.gas)[2]
    r -= (t_start - t[i0]) * float(np.interp(t_start, t, lam3_edge))
    for i in range(i0, 0, -1):
        h = t[i] - t[i - 1]
        f_i, _, _ = row_interp(field.nodes['psi'][i:, i], lam3[i:, i])
        f_m, lo, hi = row_interp(field.nodes['psi'][i - 1:, i - 1], lam3[i - 1:, i - 1])
        v0 = f_i(r)
        r1 = r - h * v0
        r = float(r - 0.5 * h * (v0 + f_m(r1)))
        if r < lo:
            logger.error('trace_eta: left the patch at t = {} (r = {} < {})'.format(t[i - 1], r, lo))
            raise InsufficientResolution('lambda3 characteristic from t = {:.12g} leaves the interior patch '
                                         'at t = {:.12g}; widen T_top'.format(t_start, t[i - 1]))
    return r


def corner_label(field, r):
    """ Label whose fast characteristic passes through r at T*. """
    labels = field.t
    pos = field.nodes['psi'][:, 0]
    lo, hi = np.min(pos), np.max(pos)
    if not lo <= r <= hi:
        logger.error('corner_label: r = {} outside [{}, {}]'.format(r, lo, hi))
        raise InsufficientResolution('r = {:.12g} not reached by the patch at T* ([{:.12g}, {:.12g}])'
                                     .format(r, lo, hi))
    spl = PchipInterpolator(labels, pos)
    return float(brentq(lambda x: spl(x) - r, labels[0], labels[-1], xtol=1e-15, rtol=1e-14))


def solve_interior_L(field_D, pair, n=None, max_iter=None, tol=None, fan=None, bounds=None, strict=False):
    """ Interior patch on [T*, T_flat] behind ell.

    A provisional patch on a widening label range locates T_flat from the
    backward lambda3 characteristic out of (ell(T_circ), T_circ); the patch is
    then solved again on [T*, T_flat].

    Args:
        field_D (CharField): solved exterior patch
        pair (AdmissiblePair): shock edge
        fan (CharacteristicFan): optional interior fan for the eta cross-check
    """
    t0 = time.time()
    n = cfg.GOURSAT_N if n is None else n
    max_iter = cfg.PICARD_MAX_ITER if max_iter is None else max_iter
    tol = cfg.PICARD_TOL if tol is None else tol
    curve = pair.curve
    width = 2.0 * (pair.T_circ - pair.T_star)
    while True:
        T_top = min(pair.T_star + width, curve.T_fin)
        trial = _solve_L_on(field_D, pair, T_top, n, max_iter, tol)
        try:
            r_eta = trace_eta(trial, pair.T_circ)
            t_flat = corner_label(trial, r_eta)
            break
        except InsufficientResolution:
            if T_top >= curve.T_fin:
                raise
            logger.warning('solve_interior_L: widening the label range beyond {:.6g}'.format(T_top))
            width *= 2.0

    field = _solve_L_on(field_D, pair, t_flat, n, max_iter, tol)
    r_eta_final = trace_eta(field, pair.T_circ)
    residual = abs(field.nodes['psi'][n - 1, 0] - r_eta_final)
    field.report['T_flat'] = {'T_flat': t_flat, 'delta_flat': t_flat - pair.T_star, 'r_eta': r_eta,
                              'residual': float(residual), 'provisional_T_top': T_top}
    if fan is not None:
        from .omega_minus import flow_position
        r_fan = flow_position(fan, 'eta', pair.T_circ, pair.T_star)
        field.report['T_flat']['fan_eta'] = r_fan
        field.report['T_flat']['fan_eta_difference'] = float(abs(r_fan - r_eta))

    field.monitors = patch_monitors(field, bounds or curve.calibration, strict=strict)
    field.monitors['T_flat_matching'] = _entry(residual, 1e-8, residual <= 1e-8)
    t1 = time.time()
    logger.info('Goursat L solve time: %2.2fsec (%d iterates, T_flat = %.9g)' % (t1 - t0, field.iterations, t_flat))
    return field


class PreshockProfile(object):
    r''' Two-sided state at T* around r*.

    Samples are interpolated in zeta = sgn(r - r*) |r - r*|^beta, in which the
    cusp of z is smooth.

    Args:
        r_star (float): preshock radius
        minus (dict): r, w, z, b for r < r*
        plus (dict): r, w, z, b for r > r*
        centre (dict): w, z, b at r*
        T_star (float): preshock time
        beta (float): cusp exponent of z, 1/3 for the generic preshock
    '''

    def __init__(self, r_star, minus, plus, centre, gas=None, T_star=None, beta=1.0 / 3.0):
        self.r_star = float(r_star)
        self.T_star = None if T_star is None else float(T_star)
        self.beta = float(beta)
        self.sides = {}
        for name, side in (('minus', minus), ('plus', plus)):
            r = np.asarray(side['r'], dtype=float)
            order = np.argsort(np.abs(r - self.r_star))
            self.sides[name] = {key: np.asarray(side[key], dtype=float)[order] for key in ('r', 'w', 'z', 'b')}
        self.centre = {key: float(centre[key]) for key in ('w', 'z', 'b')}
        self.gas = gas
        self.fits = {}
        self.report = {}
        self._splines = None

    @property
    def z_star(self):
        return self.centre['z']

    def distance(self, side):
        return np.abs(self.sides[side]['r'] - self.r_star)

    def coverage(self):
        """ (r_min, r_max) covered by the samples. """
        return float(np.min(self.sides['minus']['r'])), float(np.max(self.sides['plus']['r']))

    def zeta(self, r):
        d = np.asarray(r, dtype=float) - self.r_star
        return np.sign(d) * np.abs(d) ** self.beta

    def _build(self):
        zeta = []
        vals = {key: [] for key in ('w', 'z', 'b')}
        for name in ('minus', 'plus'):
            side = self.sides[name]
            zeta.append(self.zeta(side['r']))
            for key in vals:
                vals[key].append(side[key])
        zeta.append(np.zeros(1))
        for key in vals:
            vals[key].append(np.array([self.centre[key]]))
        zeta = np.concatenate(zeta)
        order = np.argsort(zeta)
        zeta, idx = np.unique(zeta[order], return_index=True)
        self._splines = {key: PchipInterpolator(zeta, np.concatenate(v)[order][idx]) for key, v in vals.items()}

    def evaluate(self, r):
        """ (w, z, b) at radii r inside the coverage. """
        if self._splines is None:
            self._build()
        return {key: spl(self.zeta(r)) for key, spl in self._splines.items()}

    def derivative(self, key, r):
        """ d(key)/dr at r for the C^1 fields w and b.

        Differences in r over the sorted samples, interpolated in zeta.
        """
        rr = np.concatenate([self.sides['minus']['r'], [self.r_star], self.sides['plus']['r']])
        ff = np.concatenate([self.sides['minus'][key], [self.centre[key]], self.sides['plus'][key]])
        order = np.argsort(rr)
        rr, idx = np.unique(rr[order], return_index=True)
        df = utils.one_sided_derivative(rr, ff[order][idx])
        spl = PchipInterpolator(self.zeta(rr), df)
        return spl(self.zeta(r))

    def to_columns(self):
        cols = {key: [] for key in PRESHOCK_COLUMNS}
        for name in ('minus', 'plus'):
            side = self.sides[name]
            order = np.argsort(side['r'])
            for key in ('r', 'w', 'z', 'b'):
                cols[key].append(side[key][order])
            cols['side'].append(np.full(order.size, name, dtype=object))
        return {key: np.concatenate(v) for key, v in cols.items()}

    def sidecar(self):
        return {'r_star': self.r_star, 'T_star': self.T_star, 'beta': self.beta, 'centre': self.centre,
                'fits': self.fits, 'report': self.report}


def extract_preshock_profile(field_D, field_L):
    """ The T* slice of both patches as a two-sided profile around r* = ell(T*).

    Raises InsufficientResolution when a side has fewer than MIN_FIT_SAMPLES
    samples or they span less than MIN_FIT_DECADES decades in |r - r*|.
    """
    row_D = field_D.corner_row()
    row_L = field_L.corner_row()
    r_star = float(row_D['r'][0])
    centre = {key: row_D[key][0] for key in ('w', 'z', 'b')}
    plus = {key: row_D[key][1:] for key in ('r', 'w', 'z', 'b')}
    minus = {key: row_L[key][1:] for key in ('r', 'w', 'z', 'b')}
    for name, side, ok in (('plus', plus, plus['r'] > r_star), ('minus', minus, minus['r'] < r_star)):
        if not np.all(ok):
            logger.error('extract_preshock_profile: {} samples on the wrong side of r*'.format(name))
            raise InsufficientResolution('{} side of the T* slice crosses r* = {:.12g}'.format(name, r_star))
        d = np.abs(side['r'] - r_star)
        span = np.log10(d.max() / d.min())
        if d.size < cfg.MIN_FIT_SAMPLES or span < cfg.MIN_FIT_DECADES:
            logger.error('extract_preshock_profile: {} side has {} samples over {:.2f} decades'
                         .format(name, d.size, span))
            raise InsufficientResolution('{} side near r* = {:.12g}: {} samples over {:.2f} decades of |r - r*|'
                                         .format(name, r_star, d.size, span))

    prof = PreshockProfile(r_star, minus, plus, centre, gas=field_D.gas, T_star=field_D.T_star)
    lab = row_D['t'][1:] - field_D.T_star
    near = lab <= 0.5 * (field_D.T_top - field_D.T_star)
    slope, _, stderr = utils.loglog_fit(lab[near], plus['r'][near] - r_star)
    prof.report = {
        'z_continuity': float(abs(row_D['z'][0] - row_L['z'][0])),
        'z_nearest_gap': float(abs(plus['z'][0] - minus['z'][0])),
        'separation_exponent': {'slope': slope, 'stderr': stderr},
    }
    prof.fits['subdominant'] = fit_subdominant(prof)
    return prof


def fit_subdominant(profile, max_distance=None):
    r''' Per-side fit of w and b: f - f* = c (r - r*) + d |r - r*|^(4/3).

    The one-sided slopes c agree at r* for a C^1 profile; their gap is reported.
    '''
    out = {}
    for key in ('w', 'b'):
        coef = {}
        for name, sign in (('minus', -1.0), ('plus', 1.0)):
            d = profile.distance(name)
            keep = d <= max_distance if max_distance is not None else np.ones_like(d, dtype=bool)
            basis = np.vstack([sign * d[keep], d[keep] ** (4.0 / 3.0)]).T
            rhs = profile.sides[name][key][keep] - profile.centre[key]
            sol, _, rank, _ = np.linalg.lstsq(basis, rhs, rcond=None)
            if rank < 2:
                raise FitIllConditioned('fit_subdominant: rank {} basis for {} {}'.format(rank, key, name))
            coef[name] = sol
        out[key] = {'c_minus': float(coef['minus'][0]), 'c_plus': float(coef['plus'][0]),
                    'c': float(0.5 * (coef['minus'][0] + coef['plus'][0])),
                    'd_minus': float(coef['minus'][1]), 'd_plus': float(coef['plus'][1]),
                    'slope_mismatch': float(abs(coef['minus'][0] - coef['plus'][0]))}
    return out


def _cusp_model(d, zs, A, B, beta):
    return zs + A * d ** beta + B * d ** (2.0 * beta)


def cusp_fit(profile, beta_fixed=1.0 / 3.0, max_distance=None):
    r''' Fit the dominant variable near r*.

    First z - z* = A |r - r*|^beta + B |r - r*|^(2 beta) with beta free, per side;
    then, at beta = beta_fixed, the signed expansion

        z = z* + a (r - r*)^(1/3) + b+- |r - r*|^(2/3) + O(|r - r*|)

    Returns:
        dict with beta (per side, with stderr), a, b1 (plus side), b2 (minus side)
        and the asymmetry |b1 - b2| / |b1|
    '''
    out = {'beta': {}, 'a_sides': {}}
    B = {}
    for name, sign in (('minus', -1.0), ('plus', 1.0)):
        d = profile.distance(name)
        z = profile.sides[name]['z']
        if max_distance is not None:
            keep = d <= max_distance
            d, z = d[keep], z[keep]
        utils.check_fit_span(d, where='cusp_fit {} side'.format(name))
        dz = z - profile.z_star
        basis = np.vstack([d ** beta_fixed, d ** (2.0 * beta_fixed), d]).T
        sol, _, rank, _ = np.linalg.lstsq(basis, dz, rcond=None)
        if rank < 3:
            logger.error('cusp_fit: rank {} basis on the {} side'.format(rank, name))
            raise FitIllConditioned('cusp_fit: rank {} basis on the {} side'.format(rank, name))
        out['a_sides'][name] = float(sign * sol[0])
        B[name] = float(sol[1])
        try:
            popt, pcov = curve_fit(_cusp_model, d, z, p0=(profile.z_star, sol[0], sol[1], beta_fixed),
                                   maxfev=20000)
        except (RuntimeError, ValueError) as err:
            logger.error('cusp_fit: free-exponent fit failed on the {} side: {}'.format(name, err))
            raise FitIllConditioned('cusp_fit: free-exponent fit failed on the {} side: {}'.format(name, err))
        err = float(np.sqrt(pcov[3, 3])) if np.all(np.isfinite(pcov)) else float('nan')
        out['beta'][name] = {'value': float(popt[3]), 'stderr': err}
    out['a'] = 0.5 * (out['a_sides']['minus'] + out['a_sides']['plus'])
    out['b1'] = B['plus']
    out['b2'] = B['minus']
    out['asymmetry'] = float(abs(B['plus'] - B['minus']) / max(abs(B['plus']), 1e-300))
    out['z_star'] = profile.z_star
    profile.fits['cusp'] = out
    return out


def jump_exponents(field_D, field_L, window=None, min_samples=8):
    """ Log-log exponents of [[z]], [[w]] and [[S]] along the shock edge against t - T*.

    Args:
        window (float): fit on t - T* <= window; half the exterior patch when None
    """
    edge = field_D.shock_edge()
    t = edge['t'][1:]
    window = 0.5 * (field_D.T_top - field_D.T_star) if window is None else window
    keep = (t - field_D.T_star) <= window
    t = t[keep]
    plus = {name: edge[name][1:][keep] for name in ('w', 'z', 'b')}
    ed_L = field_L.edge
    minus = {name: PchipInterpolator(ed_L['t'], ed_L[name])(t) for name in ('w', 'z', 'b')}
    dt = t - field_D.T_star
    jumps = {'z': minus['z'] - plus['z'], 'w': minus['w'] - plus['w'],
             'S': 2.0 * np.log(minus['b'] / plus['b'])}
    out = {}
    for name, jump in jumps.items():
        try:
            slope, pref, stderr = utils.loglog_fit(dt, jump, min_samples=min_samples)
        except FitIllConditioned:
            out[name] = {'slope': None, 'prefactor': None, 'stderr': None}
            continue
        out[name] = {'slope': slope, 'prefactor': pref, 'stderr': stderr}
    out['window'] = window
    return out


def patch_columns(field):
    """ Valid nodes of a patch as flat columns. """
    mask = field.valid()
    jj, ii = np.nonzero(mask)
    rho = field.rho()
    rz = field.rz()
    cols = {'patch': np.full(jj.size, field.kind, dtype=object), 't': field.t[jj], 's': field.t[ii]}
    for name in ('psi', 'J', 'w', 'z', 'b', 'rw', 'rb'):
        cols[name] = field.nodes[name][jj, ii]
    cols['rho'] = rho[jj, ii]
    cols['rz'] = rz[jj, ii]
    return cols


def save_patch(fields, filename_out, meta=None):
    """ Nodes of one or more patches stacked into one CSV (PATCH_COLUMNS). """
    from .io.csv_writer import write_table
    parts = [patch_columns(f) for f in fields]
    cols = {key: np.concatenate([p[key] for p in parts]) for key in PATCH_COLUMNS}
    side = {'patches': [f.sidecar() for f in fields]}
    side.update(meta or {})
    write_table(filename_out, cols, side, column_order=PATCH_COLUMNS)


def save_preshock(profile, filename_out, meta=None):
    from .io.csv_writer import write_table
    side = profile.sidecar()
    side.update(meta or {})
    write_table(filename_out, profile.to_columns(), side, column_order=PRESHOCK_COLUMNS)


def load_preshock(filename, gas=None):
    """ Rebuild a PreshockProfile from its CSV and sidecar. """
    from .io.csv_writer import read_table
    df, meta = read_table(filename, required=PRESHOCK_COLUMNS)
    sides = {}
    for name in ('minus', 'plus'):
        part = df[df['side'] == name]
        sides[name] = {key: part[key].values for key in ('r', 'w', 'z', 'b')}
    prof = PreshockProfile(meta['r_star'], sides['minus'], sides['plus'], meta['centre'], gas=gas,
                           T_star=meta.get('T_star'), beta=meta.get('beta', 1.0 / 3.0))
    prof.fits = meta.get('fits', {})
    prof.report = meta.get('report', {})
    return prof


def patch_groups(field):
    """ Arrays for the HDF5 dump. """
    group = {'t': field.t}
    group.update(field.nodes)
    return group
