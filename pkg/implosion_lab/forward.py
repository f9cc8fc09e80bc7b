r''' forward.py - independent forward solve from the regularized initial data.

The verifier advances (w, z, b) on a fixed radial grid with a semi-Lagrangian
characteristic scheme: each node takes the value at the foot of its z
(lambda1), b (lambda2) and w (lambda3) characteristic plus the integrated
source.  While the flow is smooth the first crossing of lambda1
characteristics is predicted from

    t_cross = t + 1 / max(-d(lambda1)/dr)

at every step; the earliest prediction is kept and a zero-strength shock is
inserted once the solve is within one step of it.  From then on the shock is fitted:
the interior (minus) traces and the incoming exterior z fix the speed through
the closed-form Rankine-Hugoniot partner state, and the exterior w, b leave the
shock along lambda2, lambda3.

A first-order HLLC finite-volume solve of the same data is available as an
approximate cross-check.
'''

import sys
import time
import logging

import numpy as np
from scipy.optimize import brentq

from . import config as cfg
from .gas_core import PrimState, speeds_wz, characteristic_sources, eos_pressure
from .goursat import density_or_unit, row_interp
from .guderley import evaluate_state, exterior_fields, guderley_shock
from .rankine_hugoniot import rh_partner_state, prim_from_rup, check_lax, rh_residuals, ShockSideStates
from .errors import ForwardBlowup, ShockDetectionAmbiguous

logger = logging.getLogger(__name__)

level_log = logging.INFO

if level_log == logging.INFO:
    stream = sys.stdout
    lformat = cfg.LOG_FORMAT
else:
    stream = sys.stderr
    lformat = cfg.LOG_FORMAT_DEBUG

logging.basicConfig(format=lformat, stream=stream, level=level_log)

# field carried by each family: lambda1, lambda2, lambda3
FAMILIES = (('z', 0), ('b', 1), ('w', 2))
SLICE_COLUMNS = ['t', 'r', 'u', 'rho', 'c', 'b', 'side']
GUARD_CELLS = 5


def _interpolant(r, f, interp):
    """ Clamped interpolant of one side: 'pchip' or 'linear'. """
    if interp == 'linear':
        r = np.asarray(r, dtype=float)
        f = np.asarray(f, dtype=float)
        return lambda x: np.interp(x, r, f)
    return row_interp(r, f)[0]


def guderley_boundary(prof):
    """ Boundary callable (r, t) -> w, z, b of the Guderley flow. """
    def boundary(r, t):
        out = exterior_fields(prof, r, t)
        return {name: out[name] for name in ('w', 'z', 'b')}
    return boundary


def quiescent_boundary(r, t):
    r = np.atleast_1d(np.asarray(r, dtype=float))
    return {'w': np.zeros_like(r), 'z': np.zeros_like(r), 'b': np.zeros_like(r)}


def _sources(r, w, z, b, gas):
    """ (src_z, src_b, src_w) on one side, d(b)/dr by finite differences. """
    rho = density_or_unit(w, z, b, gas)
    rb = np.gradient(b, r) if r.size > 2 else np.zeros_like(b)
    src_z, src_w, src_b = characteristic_sources(w, z, b, rho, rb, r, gas)
    return src_z, src_b, src_w


def shock_speed(minus, z_in, gas):
    r''' Speed of the 1-shock with interior trace minus = (u, rho, b) whose exterior
    partner state has z = z_in.

    The exterior state is the Rankine-Hugoniot partner of the interior one in the
    shock frame; sdot is bracketed below lambda1 of the interior.

    Returns:
        (sdot, plus PrimState, bracketed flag)
    '''
    u, rho, b = (float(v) for v in minus)
    c = rho ** gas.alpha * b
    p = float(eos_pressure(rho, b, gas))
    scale = abs(u) + c + 1.0
    hi = u - c - 1e-12 * scale
    lo = u - c - 50.0 * scale

    def partner(sd):
        v_o, rho_o, p_o = rh_partner_state(u - sd, rho, p, gas)
        return prim_from_rup(v_o + sd, rho_o, p_o, gas)

    def mismatch(sd):
        plus = partner(sd)
        return float(plus.u - plus.sigma(gas)) - z_in

    f_hi = mismatch(hi)
    f_lo = mismatch(lo)
    if f_hi * f_lo > 0.0:
        if abs(f_hi) <= abs(f_lo):
            return hi, partner(hi), False
        logger.error('shock_speed: no admissible speed below lambda1- = {:.6g}'.format(u - c))
        raise ShockDetectionAmbiguous('no admissible shock speed in [{:.6g}, {:.6g}] for z+ = {:.6g}'
                                      .format(lo, hi, z_in))
    sd = brentq(mismatch, lo, hi, xtol=1e-14 * scale, rtol=1e-14, maxiter=200)
    return sd, partner(sd), True


def _riemann(state, gas):
    sigma = float(state.sigma(gas))
    return {'w': float(state.u) + sigma, 'z': float(state.u) - sigma, 'b': float(state.b)}


class ForwardRun(object):
    """ Radial characteristic solve with at most one fitted shock.

    Args:
        r (np.array): uniform ascending grid
        fields (dict): w, z, b on r at time t0
        t0 (float): start time
        gas (GasParams): gas parameters
        boundary (callable): (r, t) -> w, z, b for feet beyond the right edge
        interp (str): 'pchip' or 'linear' foot interpolation
    """

    def __init__(self, r, fields, t0, gas, boundary=None, interp='pchip', cfl=None):
        self.r = np.asarray(r, dtype=float)
        self.dr = self.r[1] - self.r[0]
        self.f = {name: np.asarray(fields[name], dtype=float).copy() for name in ('w', 'z', 'b')}
        self.t = float(t0)
        self.gas = gas
        self.boundary = boundary or quiescent_boundary
        self.interp = interp
        self.cfl = cfg.FWD_CFL if cfl is None else cfl
        self.shock = None
        self.t_detect = None
        self.r_detect = None
        self.dt_detect = None
        self.t_cross = None
        self.track = []
        self.unbracketed = 0
        self.steps = 0

    def lambdas(self):
        return speeds_wz(self.f['w'], self.f['z'], self.gas)

    def side_masks(self):
        if self.shock is None:
            return np.ones_like(self.r, dtype=bool), np.zeros_like(self.r, dtype=bool)
        minus = self.r < self.shock['s']
        return minus, ~minus

    def _side(self, mask, trace=None, at_end=True):
        """ Nodes of one side, with the shock trace appended at the shock position. """
        if trace is not None:
            mask = mask & (np.abs(self.r - self.shock['s']) > 1e-9 * self.dr)
        r = self.r[mask]
        vals = {name: self.f[name][mask] for name in self.f}
        if trace is not None:
            s = self.shock['s']
            if at_end:
                r = np.append(r, s)
                vals = {name: np.append(vals[name], trace[name]) for name in vals}
            else:
                r = np.insert(r, 0, s)
                vals = {name: np.insert(vals[name], 0, trace[name]) for name in vals}
        return r, vals

    def _advect(self, r_old, vals, r_new, dt, t_old, crossing=None):
        """ Semi-Lagrangian update of the nodes r_new from one side's old nodes. """
        gas = self.gas
        lam = speeds_wz(vals['w'], vals['z'], gas)
        src = _sources(r_old, vals['w'], vals['z'], vals['b'], gas)
        out = {}
        r_hi = self.r[-1]
        for name, k in FAMILIES:
            f_lam = _interpolant(r_old, lam[k], self.interp)
            f_val = _interpolant(r_old, vals[name], self.interp)
            f_src = _interpolant(r_old, src[k], self.interp)
            v0 = f_lam(r_new)
            rf = r_new - dt * v0
            rf = r_new - 0.5 * dt * (v0 + f_lam(rf))
            s_node = f_src(r_new)
            val = f_val(rf) + 0.5 * dt * (f_src(rf) + s_node)
            outside = rf > r_hi
            if np.any(outside):
                val[outside] = self.boundary(rf[outside], t_old)[name] + dt * s_node[outside]
            if crossing is not None and k > 0:
                hit = rf < crossing['s_old']
                if np.any(hit):
                    # the characteristic left the shock during the step
                    gap = np.maximum(v0[hit] - crossing['sdot'], 1e-300)
                    tau = np.clip((r_new[hit] - crossing['s_new']) / gap, 0.0, abs(dt))
                    frac = 1.0 - tau / abs(dt)
                    trace = crossing['old'][name] + frac * (crossing['new'][name] - crossing['old'][name])
                    val[hit] = trace + tau * s_node[hit]
            out[name] = val
        return out

    def _check(self, where):
        bad = ~np.isfinite(self.f['w']) | ~np.isfinite(self.f['z']) | ~np.isfinite(self.f['b'])
        bad |= (self.f['w'] - self.f['z']) < -1e-10 * (1.0 + np.abs(self.f['w']))
        if np.any(bad):
            r_bad = self.r[bad][0]
            logger.error('forward: invalid state at r = {:.6g}, t = {:.12g} ({})'.format(r_bad, self.t, where))
            raise ForwardBlowup('forward solve broke down at r = {:.6g}, t = {:.12g} ({})'
                                .format(r_bad, self.t, where))

    def _step_smooth(self, dt):
        r_old = self.r.copy()
        vals = {name: self.f[name].copy() for name in self.f}
        self.f = self._advect(r_old, vals, self.r, dt, self.t)

    def _traces(self, minus_mask):
        """ Interior trace at the shock, extrapolated linearly from the two nearest interior nodes. """
        s = self.shock['s']
        idx = np.nonzero(minus_mask)[0]
        if idx.size < 2:
            return {name: float(self.f[name][idx[-1]]) for name in self.f}
        i1, i0 = idx[-1], idx[-2]
        frac = (s - self.r[i1]) / (self.r[i1] - self.r[i0])
        return {name: float(self.f[name][i1] + frac * (self.f[name][i1] - self.f[name][i0])) for name in self.f}

    def _prim(self, trace):
        rho = float(density_or_unit(trace['w'], trace['z'], trace['b'], self.gas))
        return 0.5 * (trace['w'] + trace['z']), rho, trace['b']

    def _step_shock(self, dt):
        gas = self.gas
        sh = self.shock
        s_old, sd_old = sh['s'], sh['sdot']
        minus_old, plus_old = self.side_masks()
        r_m, v_m = self._side(minus_old, sh['minus'], at_end=True)
        r_p, v_p = self._side(plus_old, sh['plus'], at_end=False)

        s_pred = s_old + dt * sd_old
        # interior update reaches past the predicted position so the corrected one is covered
        reach = s_pred + 2.0 * abs(s_pred - s_old) + 2.0 * self.dr
        swept = self.r < reach
        upd_minus = self._advect(r_m, v_m, self.r[swept], dt, self.t)
        new_minus = self.r < s_pred
        for name in self.f:
            self.f[name][swept] = upd_minus[name]
        self.shock = dict(sh, s=s_pred)
        minus_trace = self._traces(new_minus)

        lam_p = speeds_wz(v_p['w'], v_p['z'], gas)
        src_p = _sources(r_p, v_p['w'], v_p['z'], v_p['b'], gas)
        l1 = float(lam_p[0][0])
        rf = s_pred - dt * l1
        z_in = float(_interpolant(r_p, v_p['z'], self.interp)(rf) + dt * src_p[0][0])
        sd_new, plus, bracketed = shock_speed(self._prim(minus_trace), z_in, gas)
        if not bracketed:
            self.unbracketed += 1
        s_new = s_old + 0.5 * dt * (sd_old + sd_new)
        plus_trace = _riemann(plus, gas)

        new_plus = self.r >= s_new
        if np.any(~new_plus & ~swept):
            logger.error('forward: shock moved {:.3g} cells in one step'.format(abs(s_new - s_old) / self.dr))
            raise ForwardBlowup('shock correction left the interior update at t = {:.12g}'.format(self.t))
        crossing = {'s_old': s_old, 's_new': s_new, 'sdot': sd_new, 'old': sh['plus'], 'new': plus_trace}
        upd = self._advect(r_p, v_p, self.r[new_plus], dt, self.t, crossing=crossing)
        for name in self.f:
            self.f[name][new_plus] = upd[name]
        self.shock = {'s': s_new, 'sdot': sd_new, 'minus': minus_trace, 'plus': plus_trace}

    def _compression(self):
        """ Per-node crossing time 1/max(-d(lambda1)/dr) on each side, inf where expanding. """
        lam1 = self.lambdas()[0]
        tcross = np.full_like(self.r, np.inf)
        for mask in self.side_masks():
            if mask.sum() < 3:
                continue
            q = -np.gradient(lam1[mask], self.r[mask])
            with np.errstate(divide='ignore'):
                tcross[mask] = np.where(q > 0.0, 1.0 / q, np.inf)
        return tcross

    def _absorbed(self, lam1):
        """ Time for each node's lambda1 characteristic to reach the shock; inf without a shock. """
        if self.shock is None:
            return np.full_like(self.r, np.inf)
        s, sd = self.shock['s'], self.shock['sdot']
        with np.errstate(divide='ignore', invalid='ignore'):
            rel = np.where(self.r < s, lam1 - sd, sd - lam1)
            out = np.where(rel > 0.0, np.abs(s - self.r) / rel, np.inf)
        near = np.abs(self.r - s) <= GUARD_CELLS * self.dr
        out[near] = 0.0
        return out

    def _insert_shock(self):
        tcross = self._compression()
        i = int(np.argmin(tcross))
        lo, hi = max(i - 1, 0), min(i + 1, self.r.size - 1)
        s = 0.5 * (self.r[lo] + self.r[hi]) if hi > lo else self.r[i]
        trace = {name: float(np.interp(s, self.r, self.f[name])) for name in self.f}
        lam1 = speeds_wz(trace['w'], trace['z'], self.gas)[0]
        self.shock = {'s': s, 'sdot': float(lam1), 'minus': dict(trace), 'plus': dict(trace)}
        self.t_detect = self.t
        self.r_detect = s
        logger.info('forward: preshock detected at t = %.9g, r = %.9g' % (self.t, s))

    def run(self, t_end, record=None, detect=True):
        """ Advance to t_end; record lists the times at which slices are kept.

        Returns:
            list of slice dicts (see slice_columns)
        """
        t0 = time.time()
        record = sorted(record or [])
        if self.shock is not None and t_end < self.t:
            logger.error('forward: backward stepping with a shock')
            raise ForwardBlowup('backward stepping is only defined for smooth data')
        sign = 1.0 if t_end >= self.t else -1.0
        span = abs(t_end - self.t)
        slices = []
        while sign * (t_end - self.t) > 1e-13 * max(span, 1.0):
            lam = self.lambdas()
            vmax = max(float(np.max(np.abs(l))) for l in lam)
            dt = self.cfl * self.dr / max(vmax, 1e-12)
            dt = min(dt, sign * (t_end - self.t))
            pending = [tr for tr in record if sign * (tr - self.t) > 1e-14]
            if pending:
                dt = min(dt, sign * (pending[0] - self.t))
            if dt <= 1e-14 * max(span, 1.0):
                logger.error('forward: time step {:.3g} at t = {:.12g}'.format(dt, self.t))
                raise ForwardBlowup('time step collapsed to {:.3g} at t = {:.12g}'.format(dt, self.t))
            insert = False
            dt_cfl = dt
            if detect and sign > 0.0:
                tcross = self._compression()
                tcross = np.where(self._absorbed(lam[0]) < tcross, np.inf, tcross)
                first = float(np.min(tcross))
                if self.shock is None:
                    if np.isfinite(first) and (self.t_cross is None or self.t + first < self.t_cross):
                        # later estimates see an under-resolved gradient; the earliest one is kept
                        self._ambiguity(tcross, first + dt, 'two compressions cross in the same step')
                        if self.t_cross is None:
                            logger.info('forward: crossing predicted at t = %.9g' % (self.t + first))
                        self.t_cross = self.t + first
                    if self.t_cross is not None and self.t_cross - self.t <= dt:
                        dt = max(self.t_cross - self.t, 1e-14 * max(span, 1.0))
                        insert = True
                elif first <= dt:
                    r_new = self.r[int(np.argmin(tcross))]
                    logger.error('forward: second crossing at r = {:.6g}, t = {:.12g}'.format(r_new, self.t))
                    raise ShockDetectionAmbiguous('a second shock forms at r = {:.6g}, t = {:.12g} while the '
                                                  'shock at r = {:.6g} is fitted'
                                                  .format(r_new, self.t + first, self.shock['s']))
            dt *= sign
            if self.shock is None:
                self._step_smooth(dt)
            else:
                self._step_shock(dt)
            self.t += dt
            self.steps += 1
            self._check('step {}'.format(self.steps))
            if insert:
                self.dt_detect = dt_cfl
                self._insert_shock()
            if self.shock is not None:
                self.track.append({'t': self.t, 's': self.shock['s'], 'sdot': self.shock['sdot'],
                                   'jump_z': self.shock['minus']['z'] - self.shock['plus']['z']})
            if pending and abs(self.t - pending[0]) <= 1e-12 * max(span, 1.0):
                slices.append(self.slice())
        t1 = time.time()
        logger.info('Forward solve time: %2.2fsec (%d steps to t = %.9g)' % (t1 - t0, self.steps, self.t))
        return slices

    def _ambiguity(self, tcross, window, what):
        i = int(np.argmin(tcross))
        far = np.abs(np.arange(self.r.size) - i) > 2 * GUARD_CELLS
        if np.any(tcross[far] <= window):
            j = int(np.nonzero(far & (tcross <= window))[0][0])
            logger.error('forward: {} at r = {:.6g} and r = {:.6g}'.format(what, self.r[i], self.r[j]))
            raise ShockDetectionAmbiguous('{}: r = {:.6g} and r = {:.6g} at t = {:.12g}'
                                          .format(what, self.r[i], self.r[j], self.t))

    def primitives(self):
        w, z, b = self.f['w'], self.f['z'], self.f['b']
        rho = density_or_unit(w, z, b, self.gas)
        return {'u': 0.5 * (w + z), 'rho': rho, 'c': self.gas.alpha * 0.5 * (w - z), 'b': b}

    def slice(self):
        prim = self.primitives()
        minus, _ = self.side_masks()
        side = np.where(minus, 'minus', 'plus') if self.shock is not None else np.full(self.r.size, 'smooth')
        out = {'t': np.full_like(self.r, self.t), 'r': self.r.copy(), 'side': side.astype(object)}
        out.update(prim)
        out['shock'] = None if self.shock is None else dict(self.shock)
        return out

    def lax_report(self):
        if self.shock is None:
            return None
        minus = PrimState(*self._prim(self.shock['minus']))
        plus = PrimState(*self._prim(self.shock['plus']))
        sides = ShockSideStates(plus, minus, self.shock['sdot'])
        rep = check_lax(sides, self.gas)
        res = rh_residuals(minus, plus, self.shock['sdot'], self.gas)
        rep['rh_residual'] = float(max(np.max(v) for v in res.values()))
        return rep


def radial_grid(prof, T_fin, nr, r_max):
    """ Uniform grid from half the Guderley radius at T_fin to r_max. """
    g_fin, _ = guderley_shock(T_fin, prof.lam)
    return np.linspace(0.5 * float(g_fin), r_max, nr)


def resample(initial, r, boundary, t):
    """ w, z, b of an initial slice on the grid r; the boundary callable beyond its right end. """
    src_r = np.asarray(initial['r'], dtype=float)
    out = {}
    beyond = r > src_r[-1]
    fill = boundary(r[beyond], t) if np.any(beyond) else None
    for name in ('w', 'z', 'b'):
        vals = np.interp(r, src_r, np.asarray(initial[name], dtype=float))
        if fill is not None:
            vals[beyond] = fill[name]
        out[name] = vals
    return out


def compare_guderley(run, prof, T_fin, exclude_cells=GUARD_CELLS):
    """ sup and L2 differences of (u, rho, c) against the Guderley state at T_fin, shock excluded. """
    prim = run.primitives()
    g_fin, _ = guderley_shock(T_fin, prof.lam)
    s = run.shock['s'] if run.shock is not None else float(g_fin)
    keep = (np.abs(run.r - float(g_fin)) > exclude_cells * run.dr) & (np.abs(run.r - s) > exclude_cells * run.dr)
    exact = evaluate_state(prof, run.r[keep], T_fin)
    ref = {'u': np.asarray(exact.u), 'rho': np.asarray(exact.rho), 'c': np.asarray(exact.c(prof.gas))}
    out = {}
    for name in ('u', 'rho', 'c'):
        d = np.abs(prim[name][keep] - ref[name])
        out[name] = {'sup': float(np.max(d)), 'l2': float(np.sqrt(np.mean(d * d)))}
    out['sup'] = max(v['sup'] for v in out.values())
    return out


def forward_verify(initial, prof, T_in, T_star, T_fin, nr=None, cfl=None, r_max=None, interp='pchip',
                   capturing=False, refine=True, record=None):
    """ Forward solve from the initial slice at T_in to T_fin and its comparison with Guderley.

    Args:
        initial (dict): r, w, z, b at T_in
        prof (SelfSimilarProfile): Guderley profile
        record (list): times of the intermediate slices to keep

    Returns:
        (report dict, list of slices of the finest run)
    """
    nr = cfg.FWD_NR if nr is None else nr
    gas = prof.gas
    r_max = float(np.max(initial['r'])) if r_max is None else r_max
    boundary = guderley_boundary(prof)
    g_fin, _ = guderley_shock(T_fin, prof.lam)
    runs = []
    levels = [nr, 2 * nr] if refine else [nr]
    slices = []
    for n in levels:
        r = radial_grid(prof, T_fin, n, r_max)
        run = ForwardRun(r, resample(initial, r, boundary, T_in), T_in, gas, boundary=boundary, interp=interp,
                         cfl=cfl)
        slices = run.run(T_fin, record=record)
        if run.shock is None:
            logger.error('forward_verify: no shock formed by T_fin')
            raise ShockDetectionAmbiguous('no characteristic crossing before T_fin = {:.12g}'.format(T_fin))
        disc = compare_guderley(run, prof, T_fin)
        runs.append({'nr': n, 'dr': run.dr, 'steps': run.steps, 't_detect': run.t_detect, 'r_detect': run.r_detect,
                     'dt_detect': run.dt_detect, 'detect_error': abs(run.t_detect - T_star),
                     'detect_error_steps': abs(run.t_detect - T_star) / max(run.dt_detect or 0.0, 1e-300),
                     'shock_radius': run.shock['s'],
                     'shock_radius_error': abs(run.shock['s'] - float(g_fin)) / float(g_fin),
                     'discrepancy': disc, 'lax': run.lax_report(), 'unbracketed_steps': run.unbracketed})
    report = {'runs': runs, 'guderley_radius': float(g_fin), 'T_star': T_star, 'T_fin': T_fin, 'interp': interp}
    if len(runs) == 2:
        e0, e1 = runs[0]['discrepancy']['sup'], runs[1]['discrepancy']['sup']
        report['refinement_order'] = float(np.log2(e0 / e1)) if e0 > 0.0 and e1 > 0.0 else None
        report['discrepancy_decreasing'] = bool(e1 < e0)
    if capturing:
        report['capturing'] = hllc_cross_check(initial, prof, T_in, T_fin, nr=nr, r_max=r_max)
    return report, slices


def _hllc_flux(UL, UR, gas):
    """ HLLC interface flux, Davis wave-speed estimates. """
    g = gas.gamma
    rL, mL, EL = UL
    rR, mR, ER = UR
    uL, uR = mL / rL, mR / rR
    pL = np.maximum((g - 1.0) * (EL - 0.5 * rL * uL * uL), 0.0)
    pR = np.maximum((g - 1.0) * (ER - 0.5 * rR * uR * uR), 0.0)
    aL, aR = np.sqrt(g * pL / rL), np.sqrt(g * pR / rR)
    FL = np.array([mL, mL * uL + pL, (EL + pL) * uL])
    FR = np.array([mR, mR * uR + pR, (ER + pR) * uR])
    SL = np.minimum(uL - aL, uR - aR)
    SR = np.maximum(uL + aL, uR + aR)
    den = rL * (SL - uL) - rR * (SR - uR)
    den = np.where(np.abs(den) > 1e-300, den, 1e-300)
    SM = (pR - pL + rL * uL * (SL - uL) - rR * uR * (SR - uR)) / den

    def star(r, u, E, p, S):
        fac = r * (S - u) / np.where(np.abs(S - SM) > 1e-300, S - SM, 1e-300)
        rs = np.where(r * (S - u) != 0.0, p / (r * (S - u)), 0.0)
        return np.array([fac, fac * SM, fac * (E / r + (SM - u) * (SM + rs))])

    UsL = star(rL, uL, EL, pL, SL)
    UsR = star(rR, uR, ER, pR, SR)
    F = np.where(0.0 <= SL, FL, 0.0)
    F = np.where((SL < 0.0) & (0.0 <= SM), FL + SL * (UsL - UL), F)
    F = np.where((SM < 0.0) & (0.0 <= SR), FR + SR * (UsR - UR), F)
    F = np.where(SR < 0.0, FR, F)
    return F, np.max(np.maximum(np.abs(SL), np.abs(SR)))


def _conserved(u, rho, b, gas):
    p = eos_pressure(rho, b, gas)
    return np.array([rho, rho * u, p / (gas.gamma - 1.0) + 0.5 * rho * u * u])


def hllc_cross_check(initial, prof, T_in, T_fin, nr=None, r_max=None, cfl=0.45):
    """ First-order HLLC finite-volume solve with the radial source; an approximate shock radius only. """
    t0 = time.time()
    gas = prof.gas
    nr = cfg.FWD_NR if nr is None else nr
    r_max = float(np.max(initial['r'])) if r_max is None else r_max
    r = radial_grid(prof, T_fin, nr, r_max)
    dr = r[1] - r[0]
    boundary = guderley_boundary(prof)
    f = resample(initial, r, boundary, T_in)
    rho = density_or_unit(f['w'], f['z'], f['b'], gas)
    U = _conserved(0.5 * (f['w'] + f['z']), rho, f['b'], gas)
    d1 = gas.dim - 1
    t = T_in
    steps = 0
    while t < T_fin - 1e-13:
        edge = boundary(np.array([r[-1] + dr]), t)
        rho_g = density_or_unit(edge['w'], edge['z'], edge['b'], gas)
        ghost = _conserved(0.5 * (edge['w'] + edge['z']), rho_g, edge['b'], gas)
        Ue = np.concatenate([U[:, :1], U, ghost], axis=1)
        F, smax = _hllc_flux(Ue[:, :-1], Ue[:, 1:], gas)
        dt = min(cfl * dr / max(smax, 1e-12), T_fin - t)
        u = U[1] / U[0]
        p = np.maximum((gas.gamma - 1.0) * (U[2] - 0.5 * U[0] * u * u), 0.0)
        src = -d1 / r * np.array([U[1], U[1] * u, (U[2] + p) * u])
        U = U - dt / dr * (F[:, 1:] - F[:, :-1]) + dt * src
        if not np.all(np.isfinite(U)) or np.any(U[0] <= 0.0):
            logger.error('hllc_cross_check: invalid state at t = {:.12g}'.format(t))
            raise ForwardBlowup('HLLC cross-check broke down at t = {:.12g}'.format(t))
        t += dt
        steps += 1
    rho = U[0]
    g_fin, _ = guderley_shock(T_fin, prof.lam)
    rho_shock = (gas.gamma + 1.0) / (gas.gamma - 1.0)
    above = np.nonzero(rho > 0.5 * (1.0 + rho_shock))[0]
    s_cap = float(r[above[0]]) if above.size else float('nan')
    t1 = time.time()
    logger.info('HLLC cross-check time: %2.2fsec (%d steps)' % (t1 - t0, steps))
    return {'approximate': True, 'nr': nr, 'steps': steps, 'shock_radius': s_cap,
            'shock_radius_error': abs(s_cap - float(g_fin)) / float(g_fin)}


def twin_run(initial, prof, T_in, t_probe, nr=None, exclude_cells=10):
    """ Sup difference of the pchip and linear runs at the times t_probe, away from the shock. """
    nr = cfg.FWD_NR if nr is None else nr
    boundary = guderley_boundary(prof)
    r_max = float(np.max(initial['r']))
    r = radial_grid(prof, max(t_probe), nr, r_max)
    out = []
    runs = {}
    for interp in ('pchip', 'linear'):
        run = ForwardRun(r, resample(initial, r, boundary, T_in), T_in, prof.gas, boundary=boundary, interp=interp)
        runs[interp] = run.run(max(t_probe), record=list(t_probe))
    for sa, sb in zip(runs['pchip'], runs['linear']):
        keep = np.ones_like(r, dtype=bool)
        for sl in (sa, sb):
            if sl['shock'] is not None:
                keep &= np.abs(r - sl['shock']['s']) > exclude_cells * (r[1] - r[0])
        diff = max(float(np.max(np.abs(sa[name][keep] - sb[name][keep]))) for name in ('u', 'rho', 'c'))
        out.append({'t': float(sa['t'][0]), 'sup': diff})
    return out


def slice_columns(sl):
    return {key: sl[key] for key in SLICE_COLUMNS}


def save_forward(report, slices, filename_out, meta=None):
    """ Recorded slices stacked into one CSV (SLICE_COLUMNS), report in the sidecar. """
    from .io.csv_writer import write_table
    if not slices:
        cols = {key: np.array([]) for key in SLICE_COLUMNS}
    else:
        parts = [slice_columns(sl) for sl in slices]
        cols = {key: np.concatenate([p[key] for p in parts]) for key in SLICE_COLUMNS}
    side = {'forward': report}
    side.update(meta or {})
    write_table(filename_out, cols, side, column_order=SLICE_COLUMNS)
