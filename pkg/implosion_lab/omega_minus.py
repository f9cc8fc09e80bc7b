r''' omega_minus.py - backward characteristic solve of the interior region behind the shock.

The interior Omega- = {r < s(t), T* <= t <= T_fin} is filled by the three
characteristic families leaving the shock backward in time:

    eta (lambda3) carries w and rw
    phi (lambda2) carries b, rb and ln(rho)
    psi (lambda1) carries z and rz

A family labelled t starts at (s(t), t) with the interior shock traces.
Labels and time slices share one descending grid, so the position of family k,
label j at slice i is stored at [j, i] (NaN for slices later than the label).

Each family needs the fields carried by the other two.  They are taken from the
previous sweep, interpolated across the slice in r; sweeps repeat until the
fan stops changing.  Inside the quiescent core r < (-T_fin)^(1/lam) the state is
(u, rho, c) = (0, 1, 0) exactly.
'''

import sys
import time
import logging

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq

from . import config as cfg
from . import utils
from .gas_core import speeds_wz, characteristic_sources, drv_sources, log_density_source, density_from_sigma
from .errors import MonitorViolated, FixedPointStalled, OutsideFan

logger = logging.getLogger(__name__)

level_log = logging.INFO

if level_log == logging.INFO:
    stream = sys.stdout
    lformat = cfg.LOG_FORMAT
else:
    stream = sys.stderr
    lformat = cfg.LOG_FORMAT_DEBUG

logging.basicConfig(format=lformat, stream=stream, level=level_log)

FAMILIES = ('eta', 'phi', 'psi')
CARRIED = {'eta': ('w', 'rw'), 'phi': ('b', 'rb', 'lnrho'), 'psi': ('z', 'rz')}
SLICE_COLUMNS = ['t', 'r', 'w', 'z', 'b', 'rho', 'rw', 'rz', 'rb']
QUIESCENT = {'w': 0.0, 'z': 0.0, 'b': 0.0, 'lnrho': 0.0, 'rw': 0.0, 'rz': 0.0, 'rb': 0.0}


class CharacteristicFan(object):
    """ Positions and carried fields of the three families on the shared label/slice grid.

    Args:
        curve (ShockCurve): shock trajectory with interior traces
        t (np.array): descending grid, t[0] = T_fin, t[-1] = T*
        interp (str): 'pchip' or 'linear' across a slice
    """

    def __init__(self, curve, t, interp='pchip'):
        self.curve = curve
        self.gas = curve.gas
        self.lam = curve.lam
        self.t = np.asarray(t, dtype=float)
        self.n = self.t.size
        self.interp = interp
        self.T_star = curve.T_star
        self.T_fin = curve.T_fin
        self.r_core = (-self.T_fin) ** (1.0 / self.lam)
        self.pos = {fam: np.full((self.n, self.n), np.nan) for fam in FAMILIES}
        self.fields = {name: np.full((self.n, self.n), np.nan)
                       for fam in FAMILIES for name in CARRIED[fam]}
        self.shock = {}
        self.monitors = {}
        self.history = []
        self.sweeps = 0

    def alive(self, i):
        """ Labels present at slice i. """
        return np.arange(i + 1)

    def slice_nodes(self, family, i, name=None):
        """ (r, values) of one family at slice i, sorted and de-duplicated in r. """
        j = self.alive(i)
        r = self.pos[family][j, i]
        vals = self.fields[name][j, i] if name is not None else self.t[j]
        keep = np.isfinite(r) & np.isfinite(vals)
        r, vals = r[keep], vals[keep]
        order = np.argsort(r, kind='mergesort')
        r, vals = r[order], vals[order]
        r_u, idx = np.unique(r, return_index=True)
        return r_u, vals[idx]

    def interpolant(self, family, name, i):
        """ Callable f(r) at slice i; quiescent below the core radius, clamped above the shock. """
        r, vals = self.slice_nodes(family, i, name)
        quiet = QUIESCENT[name]
        if r.size == 0:
            return lambda x: np.full_like(np.asarray(x, dtype=float), quiet)
        if r.size == 1:
            inner = lambda x: np.full_like(np.asarray(x, dtype=float), vals[0])
        elif self.interp == 'linear' or r.size == 2:
            inner = lambda x: np.interp(x, r, vals)
        else:
            inner = PchipInterpolator(r, vals, extrapolate=False)
        r_lo, r_hi = r[0], r[-1]
        v_hi = vals[-1]

        def f(x):
            x = np.asarray(x, dtype=float)
            out = np.where(x > r_hi, v_hi, inner(np.clip(x, r_lo, r_hi)))
            return np.where(x < self.r_core, quiet, out)
        return f

    def field_at(self, name, r, i):
        fam = [f for f in FAMILIES if name in CARRIED[f]][0]
        return self.interpolant(fam, name, i)(r)

    def state_at(self, r, i):
        """ All fields at radii r on slice i. """
        out = {}
        for fam in FAMILIES:
            for name in CARRIED[fam]:
                out[name] = self.interpolant(fam, name, i)(r)
        out['rho'] = np.exp(out['lnrho'])
        return out

    def sidecar(self):
        return {'lambda': self.lam, 'T_star': self.T_star, 'T_fin': self.T_fin, 'n': self.n,
                'interp': self.interp, 'sweeps': self.sweeps, 'history': self.history,
                'r_core': self.r_core, 'monitors': self.monitors}


def fan_grid(curve, n):
    """ Descending label/slice grid, uniform in (t - T*)^(1/2). """
    return utils.tau_graded_grid(curve.T_star, curve.T_fin, n, reverse=True)


def _shock_data(fan):
    """ Interior traces at every label, with the final label set exactly quiescent. """
    ev = fan.curve.evaluate(fan.t)
    data = {'s': ev['s'], 'w': ev['w_minus'], 'z': ev['z_minus'], 'b': ev['b_minus'],
            'lnrho': np.log(ev['rho_minus']), 'rw': ev['rw_minus'], 'rz': ev['rz_minus'],
            'rb': ev['rb_minus'], 'lam1': ev['u_minus'] - ev['c_minus'], 'lam2': ev['u_minus'],
            'lam3': ev['u_minus'] + ev['c_minus']}
    for key, val in QUIESCENT.items():
        data[key][0] = val
    data['s'][0] = fan.r_core
    for key in ('lam1', 'lam2', 'lam3'):
        data[key][0] = 0.0
    return data


def _frozen_fan(fan, data):
    """ Starting guess: straight characteristics carrying their shock values. """
    speed = {'eta': data['lam3'], 'phi': data['lam2'], 'psi': data['lam1']}
    for fam in FAMILIES:
        for j in range(fan.n):
            i = np.arange(j, fan.n)
            r = data['s'][j] - speed[fam][j] * (fan.t[j] - fan.t[i])
            fan.pos[fam][j, i] = np.clip(r, fan.r_core, data['s'][i])
            for name in CARRIED[fam]:
                fan.fields[name][j, i] = data[name][j]
    _fill_singular_drv(fan)


def _fill_singular_drv(fan):
    """ DRVs at the last slice from one-sided quadratics in time along each label. """
    last = fan.n - 1
    for name in ('rw', 'rz', 'rb'):
        col = fan.fields[name]
        for j in range(last - 3):
            ts = fan.t[last - 3:last]
            vals = col[j, last - 3:last]
            if np.all(np.isfinite(vals)):
                col[j, last] = np.polyval(np.polyfit(ts, vals, 2), fan.t[last])
        col[last, last] = np.nan


def _lagged(fan_prev, i):
    """ Interpolants of every field at slice i of the previous sweep. """
    return {name: fan_prev.interpolant(fam, name, i) for fam in FAMILIES for name in CARRIED[fam]}


def _rhs(fam, r, own, lag, gas):
    """ (dr/dt, d(carried)/dt) of one family, other fields from the lagged interpolants. """
    st = {name: f(r) for name, f in lag.items()}
    st.update(own)
    w, z, b = st['w'], st['z'], st['b']
    rho = np.exp(st['lnrho'])
    rw, rz, rb = st['rw'], st['rz'], st['rb']
    rr = np.maximum(r, 1e-300)
    lam1, lam2, lam3 = speeds_wz(w, z, gas)
    src_z, src_w, _ = characteristic_sources(w, z, b, rho, rb, rr, gas)
    src_rz, src_rw, src_rb = drv_sources(w, z, rho, rw, rz, rb, rr, gas)
    if fam == 'eta':
        return lam3, {'w': src_w, 'rw': src_rw}
    if fam == 'psi':
        return lam1, {'z': src_z, 'rz': src_rz}
    return lam2, {'b': np.zeros_like(r), 'rb': src_rb, 'lnrho': log_density_source(w, z, rw, rz, rr, gas)}


def _sweep_family(args):
    """ March one family from every label down to T* with Heun steps. """
    fam, fan_prev, data, lags = args
    n = fan_prev.n
    gas = fan_prev.gas
    pos = np.full((n, n), np.nan)
    fields = {name: np.full((n, n), np.nan) for name in CARRIED[fam]}
    pos[0, 0] = data['s'][0]
    for name in CARRIED[fam]:
        fields[name][0, 0] = data[name][0]
    for i in range(n - 1):
        j = np.arange(i + 1)
        dt = fan_prev.t[i + 1] - fan_prev.t[i]
        r0 = pos[j, i]
        own0 = {name: fields[name][j, i] for name in CARRIED[fam]}
        v0, k0 = _rhs(fam, r0, own0, lags[i], gas)
        r1 = r0 + dt * v0
        own1 = {name: own0[name] + dt * k0[name] for name in CARRIED[fam]}
        v1, k1 = _rhs(fam, r1, own1, lags[i + 1], gas)
        pos[j, i + 1] = r0 + 0.5 * dt * (v0 + v1)
        for name in CARRIED[fam]:
            fields[name][j, i + 1] = own0[name] + 0.5 * dt * (k0[name] + k1[name])
        # the core label stays vertical and quiescent
        pos[0, i + 1] = data['s'][0]
        for name in CARRIED[fam]:
            fields[name][0, i + 1] = QUIESCENT[name]
        pos[i + 1, i + 1] = data['s'][i + 1]
        for name in CARRIED[fam]:
            fields[name][i + 1, i + 1] = data[name][i + 1]
    return fam, pos, fields


def _change(fan_new, fan_old):
    """ Largest relative change of positions and carried fields between sweeps. """
    worst = 0.0
    last = fan_new.n - 1
    for fam in FAMILIES:
        a, b = fan_new.pos[fam], fan_old.pos[fam]
        ok = np.isfinite(a) & np.isfinite(b)
        worst = max(worst, np.max(np.abs(a[ok] - b[ok])) / max(fan_new.r_core, 1.0))
        for name in CARRIED[fam]:
            a, b = fan_new.fields[name][:, :last], fan_old.fields[name][:, :last]
            ok = np.isfinite(a) & np.isfinite(b)
            if np.any(ok):
                scale = max(np.max(np.abs(a[ok])), 1e-30)
                worst = max(worst, np.max(np.abs(a[ok] - b[ok])) / scale)
    return worst


def solve_omega_minus(curve, n=None, max_sweeps=None, tol=None, interp='pchip', strict=False,
                      bounds=None, workers=None):
    """ Fill the interior region by a fixed-point sweep over the three characteristic families.

    Args:
        curve (ShockCurve): shock trajectory, traces and DRV traces
        n (int): labels (= slices)
        max_sweeps (int): sweep limit
        tol (float): relative change at which the sweep stops
        interp (str): 'pchip' or 'linear'
        strict (bool): raise MonitorViolated instead of reporting
        bounds (dict): calibrated (m, m1); calibrate_bounds(curve) when None
        workers (int): thread count for the per-family marches

    Returns:
        CharacteristicFan with monitors filled in
    """
    t0 = time.time()
    n = cfg.FAN_N if n is None else n
    max_sweeps = cfg.FAN_MAX_SWEEPS if max_sweeps is None else max_sweeps
    tol = cfg.FAN_TOL if tol is None else tol

    grid = fan_grid(curve, n)
    fan = CharacteristicFan(curve, grid, interp)
    data = _shock_data(fan)
    fan.shock = data
    _frozen_fan(fan, data)

    ratios = []
    prev_change = None
    for sweep in range(1, max_sweeps + 1):
        lags = [_lagged(fan, i) for i in range(n)]
        results = utils.map_ordered(_sweep_family, [(fam, fan, data, lags) for fam in FAMILIES], workers)
        new = CharacteristicFan(curve, grid, interp)
        new.shock = data
        for fam, pos, fields in results:
            new.pos[fam] = pos
            new.fields.update(fields)
        _fill_singular_drv(new)
        change = _change(new, fan)
        ratio = change / prev_change if prev_change else None
        fan = new
        fan.sweeps = sweep
        fan.history.append({'sweep': sweep, 'change': change, 'ratio': ratio})
        logger.debug('omega-minus sweep %d: change %.3e' % (sweep, change))
        if change < tol:
            break
        if ratio is not None:
            ratios.append(ratio)
            if len(ratios) >= 2 and ratios[-1] > cfg.FAN_STALL_RATIO and ratios[-2] > cfg.FAN_STALL_RATIO:
                logger.error('omega-minus: sweep ratio {:.3f} after sweep {}'.format(ratio, sweep))
                raise FixedPointStalled('omega-minus sweeps stalled: change {:.3e}, ratio {:.3f} at sweep {}'
                                        .format(change, ratio, sweep))
        prev_change = change
    else:
        logger.error('omega-minus: no convergence after {} sweeps'.format(max_sweeps))
        raise FixedPointStalled('omega-minus: change {:.3e} above {:.1e} after {} sweeps'
                                .format(change, tol, max_sweeps))

    fan.monitors = fan_monitors(fan, bounds, strict=strict)
    t1 = time.time()
    logger.info('Omega-minus solve time: %2.2fsec (%d sweeps)' % (t1 - t0, fan.sweeps))
    return fan


def fan_monitors(fan, bounds=None, strict=False):
    """ Bootstrap bounds measured on the fan; see the module docstring for the families. """
    from .shock_path import calibrate_bounds
    curve = fan.curve
    bounds = calibrate_bounds(curve) if bounds is None else bounds
    m = bounds['m']
    kappa = bounds.get('kappa', curve.tcfg.kappa)
    eps = curve.tcfg.eps
    t = fan.t
    n = fan.n

    wzb = max(np.nanmax(np.abs(fan.fields[k])) for k in ('w', 'z', 'b'))
    rho = np.exp(fan.fields['lnrho'])
    dt_min = np.min(np.abs(np.diff(t)))
    watched = (t - fan.T_star) >= cfg.FAN_MONITOR_SKIP * dt_min
    drv = 0.0
    where = None
    for i in np.nonzero(watched)[0]:
        for k in ('rw', 'rz', 'rb'):
            col = fan.fields[k][:i + 1, i]
            val = np.nanmax(np.abs(col)) * (t[i] - fan.T_star) if np.any(np.isfinite(col)) else 0.0
            if val > drv:
                drv, where = val, {'t': float(t[i]), 'field': k}

    jac_ok = True
    jac_where = None
    for i in range(2, n):
        r = fan.pos['eta'][:i + 1, i]
        dr = np.diff(r)
        # labels descend in t, so eta must not decrease along the label axis
        if np.any(dr < -1e-12 * fan.r_core):
            jac_ok = False
            jac_where = {'t': float(t[i])}
            break

    r_min = min(np.nanmin(fan.pos[f]) for f in FAMILIES)
    r_floor = 0.5 * fan.r_core

    sep = label_separation(fan)
    flux = mass_flux_residual(fan)
    mon = {
        'wzb_bound': utils.monitor_entry(wzb, 2.0 * m * kappa, wzb <= 2.0 * m * kappa),
        'rho_upper': utils.monitor_entry(np.nanmax(rho), 2.0 * m, np.nanmax(rho) <= 2.0 * m),
        'rho_lower': utils.monitor_entry(np.nanmin(rho), 1.0 / (2.0 * m), np.nanmin(rho) >= 1.0 / (2.0 * m)),
        'drv_bound': utils.monitor_entry(drv, 2.0 * m * eps, drv <= 2.0 * m * eps, where),
        'eta_jacobian_negative': utils.monitor_entry(float(jac_ok), 1.0, jac_ok, jac_where),
        'min_distance_to_origin': utils.monitor_entry(r_min, r_floor, r_min >= r_floor),
        'label_separation': utils.monitor_entry(sep, 0.0, sep > 0.0),
        'mass_flux': utils.monitor_entry(flux, 1e-3, flux <= 1e-3),
    }
    failed = [k for k, v in mon.items() if not v['pass']]
    if failed:
        advice = ('either the grid is too coarse for the bound (refine n) or eps, delta are too '
                  'large for the profile (shrink them)')
        mon['advice'] = advice
        if strict:
            logger.error('omega-minus: monitors failed: {}'.format(failed))
            raise MonitorViolated('omega-minus monitors failed: {}'.format(
                ', '.join('{} ({})'.format(k, mon[k]) for k in failed)))
        logger.warning('omega-minus: monitors failed: {}; {}'.format(failed, advice))
    return mon


def mass_flux_residual(fan):
    """ Max relative gap between the transported density and (alpha sigma/b)^(1/alpha) where b > 0. """
    worst = 0.0
    gas = fan.gas
    for i in range(1, fan.n - 1):
        r, lnrho = fan.slice_nodes('phi', i, 'lnrho')
        _, b = fan.slice_nodes('phi', i, 'b')
        ok = b > 1e-8
        if not np.any(ok):
            continue
        w = fan.field_at('w', r[ok], i)
        z = fan.field_at('z', r[ok], i)
        rho_alg = density_from_sigma(0.5 * (w - z), b[ok], gas)
        rel = np.abs(rho_alg / np.exp(lnrho[ok]) - 1.0)
        worst = max(worst, float(np.max(rel)))
    return worst


def label_separation(fan, stride=None):
    """ min over particle paths of (T - T*)/(t - T*), T the eta-label met at each slice. """
    stride = max(1, fan.n // 40) if stride is None else stride
    best = np.inf
    for j in range(1, fan.n - 1, stride):
        for i in range(j + 1, fan.n - 1, stride):
            r = fan.pos['phi'][j, i]
            try:
                T = inverse_flow_label(fan, 'eta', r, fan.t[i])
            except OutsideFan:
                continue
            best = min(best, (T - fan.T_star) / (fan.t[j] - fan.T_star))
    return float(best) if np.isfinite(best) else 0.0


def _slice_index(fan, s):
    if not fan.T_star - 1e-14 <= s <= fan.T_fin + 1e-14:
        raise OutsideFan('time {:.12g} outside [T*, T_fin]'.format(s))
    return int(utils.closest(fan.t, s))


def _label_curve(fan, family, s):
    """ (labels, positions) of a family at time s, boundary label s included. """
    i = _slice_index(fan, s)
    labels = fan.t[:i + 1]
    r = fan.pos[family][:i + 1, i]
    keep = np.isfinite(r)
    labels, r = labels[keep], r[keep]
    order = np.argsort(labels)
    return labels[order], r[order]


def flow_position(fan, family, label, s):
    """ Position of the family characteristic with the given label at time s. """
    labels, r = _label_curve(fan, family, s)
    if not labels[0] - 1e-14 <= label <= labels[-1] + 1e-14:
        raise OutsideFan('label {:.12g} not present at t = {:.12g}'.format(label, s))
    if labels.size < 2:
        return float(r[0])
    return float(PchipInterpolator(labels, r)(label))


def inverse_flow_label(fan, family, r, s):
    """ Label t of the family characteristic through (r, s).

    Raises OutsideFan when r lies outside the covered part of the slice.
    """
    labels, pos = _label_curve(fan, family, s)
    lo, hi = np.min(pos), np.max(pos)
    if not lo - 1e-12 <= r <= hi + 1e-12 or labels.size < 2:
        raise OutsideFan('r = {:.12g} outside the {} fan [{:.12g}, {:.12g}] at t = {:.12g}'
                         .format(r, family, lo, hi, s))
    spl = PchipInterpolator(labels, pos)
    if abs(pos[0] - r) <= 1e-14:
        return float(labels[0])
    if abs(pos[-1] - r) <= 1e-14:
        return float(labels[-1])
    return float(brentq(lambda x: spl(x) - r, labels[0], labels[-1], xtol=1e-14, rtol=1e-14))


def fan_slice(fan, s, n_core=16):
    """ Eulerian state on [0, s(s)] at the grid slice closest to s, core included. """
    i = _slice_index(fan, s)
    r_nodes = np.unique(np.concatenate([fan.slice_nodes(f, i)[0] for f in FAMILIES]))
    r_nodes = r_nodes[r_nodes >= fan.r_core]
    r = np.concatenate([np.linspace(0.0, fan.r_core, n_core, endpoint=False), r_nodes])
    st = fan.state_at(r, i)
    return {'t': np.full_like(r, fan.t[i]), 'r': r, 'w': st['w'], 'z': st['z'], 'b': st['b'],
            'rho': st['rho'], 'rw': st['rw'], 'rz': st['rz'], 'rb': st['rb']}


def compare_fans(fan_a, fan_b, s=None, n_probe=200, exclude=None):
    """ Sup-norm difference of two fans on one slice, away from the shock. """
    s = fan_a.T_star if s is None else s
    sa = fan_slice(fan_a, s)
    sb = fan_slice(fan_b, s)
    r_hi = min(sa['r'][-1], sb['r'][-1])
    if exclude is None:
        exclude = 0.1 * (r_hi - fan_a.r_core)
    r = np.linspace(0.0, r_hi - exclude, n_probe)
    ia = _slice_index(fan_a, s)
    ib = _slice_index(fan_b, s)
    A = fan_a.state_at(r, ia)
    B = fan_b.state_at(r, ib)
    return max(float(np.max(np.abs(A[k] - B[k]))) for k in ('w', 'z', 'b', 'rho'))


def save_fan(fan, filename_out, slices=None, meta=None):
    """ Slice dumps (t, r, w, z, b, rho, rw, rz, rb) stacked into one CSV. """
    from .io.csv_writer import write_table
    slices = [fan.T_star, fan.curve.T_circ, fan.T_fin] if slices is None else slices
    parts = [fan_slice(fan, s) for s in slices]
    cols = {key: np.concatenate([p[key] for p in parts]) for key in SLICE_COLUMNS}
    side = fan.sidecar()
    side.update(meta or {})
    write_table(filename_out, cols, side, column_order=SLICE_COLUMNS)


def fan_groups(fan):
    """ Arrays for the HDF5 dump. """
    group = {'t': fan.t}
    for fam in FAMILIES:
        group['r_' + fam] = fan.pos[fam]
    group.update(fan.fields)
    return group
