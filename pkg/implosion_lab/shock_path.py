r''' shock_path.py - shock trajectories from T_fin back to the preshock time T*.

The trajectory is written through h(t) = s(t)^lam and the auxiliary function
g = v+/c+ (relative exterior speed over exterior sound speed):

    dh/dt = U(h/(-t)) - g(t) C(h/(-t)),   h(T_fin) = -T_fin

g rises from the strong-shock value mu = sqrt(alpha/gamma) at T_fin to 1 at T*,
where the shock strength vanishes.  It is defined through

    F(g(t)) = int_t^T_fin ell,   F(x) = gamma^(-1/2) int_mu^x dy / ((1-y) sqrt(y^2-mu^2))

with ell(t) = nu/(t-T*) near T* and 0 near T_fin.

The admissible pair replaces s on [T*, T_circ] by a curve ell with a
prescribed exterior lambda1 trace and a Lax gap growing like (t-T*)^(1/2).
'''

import sys
import time
import logging

import numpy as np
from scipy.integrate import solve_ivp, quad
from scipy.interpolate import CubicHermiteSpline

from . import config as cfg
from . import utils
from .gas_core import characteristic_sources, entropy_coupling, speeds_wz
from .guderley import evaluate_state, plus_traces
from .rankine_hugoniot import jumps_from_gaps
from .errors import (QuadratureFailure, ConstraintViolated, DegenerateGap, GapViolation,
                     RootOutOfBounds, FitIllConditioned)

logger = logging.getLogger(__name__)

level_log = logging.INFO

if level_log == logging.INFO:
    stream = sys.stdout
    lformat = cfg.LOG_FORMAT
else:
    stream = sys.stderr
    lformat = cfg.LOG_FORMAT_DEBUG

logging.basicConfig(format=lformat, stream=stream, level=level_log)

CURVE_COLUMNS = ['t', 'h', 'hdot', 'hddot', 's', 'sdot', 'g', 'gdot',
                 'u_plus', 'c_plus', 'rho_plus', 'u_minus', 'c_minus', 'rho_minus',
                 'rw_minus', 'rz_minus', 'rb_minus', 'gap1', 'gap2', 'gap3']

PAIR_COLUMNS = ['t', 'tau', 'ell', 'ell_dot', 'ell_ddot', 'lambda1_plus', 'lambda3_plus', 'chi', 'phi']


def drv_from_compatibility(w, z, b, rho, dw, dz, db, sdot, r, gas):
    r''' DRV traces on the interior side of a shock from the time derivatives of its traces.

    Along r = s(t) every interior characteristic reaches the shock, so

        db/dt = (sdot - lambda2) b_r
        dw/dt = -A + q b_r + (sdot - lambda3) w_r
        dz/dt =  A + q b_r + (sdot - lambda1) z_r

    are solved for (w_r, z_r, b_r) and converted to (rw, rz, rb).
    '''
    lam1, lam2, lam3 = speeds_wz(w, z, gas)
    A, _, _ = characteristic_sources(w, z, b, rho, 0.0, r, gas)
    q = np.asarray(rho, dtype=float) ** (2.0 * gas.alpha) * b / (gas.alpha * gas.gamma)
    with np.errstate(divide='ignore', invalid='ignore'):
        rb = db / (sdot - lam2)
        dwr = (dw + A - q * rb) / (sdot - lam3)
        dzr = (dz - A - q * rb) / (sdot - lam1)
    k = entropy_coupling(rho, gas)
    return dwr - k * rb, dzr + k * rb, rb


class GFunction(object):
    """ The auxiliary function g(t) and its rate.

    Args:
        tcfg (TrajectoryConfig): trajectory parameters
        gas (GasParams): gas parameters
    """

    def __init__(self, tcfg, gas):
        self.gas = gas
        self.T_fin = tcfg.T_fin
        self.T_star = tcfg.T_star
        self.nu = tcfg.rate_nu(gas)
        self.t_in = self.T_star + tcfg.cutoff_inner * tcfg.delta
        self.t_out = self.T_star + tcfg.cutoff_outer * tcfg.delta
        self.mu = gas.mu
        self.k = np.sqrt((1.0 - self.mu) / (1.0 + self.mu))
        self.root = np.sqrt(gas.gamma - gas.alpha)

        band = solve_ivp(lambda t, y: [-self.ell(t)], (self.t_out, self.t_in), [0.0], method='DOP853',
                         dense_output=True, rtol=1e-13, atol=1e-15)
        self._band = band.sol
        self.L_in = float(band.y[0, -1])
        check, _ = quad(self.ell, self.t_in, self.t_out, epsabs=1e-13, epsrel=1e-12, limit=200)
        if abs(check - self.L_in) > 1e-9 * max(1.0, abs(check)):
            logger.error('GFunction: rate integral mismatch {:.3e}'.format(check - self.L_in))
            raise QuadratureFailure('rate integral: ODE {} vs quadrature {}'.format(self.L_in, check))

    def ell(self, t):
        """ Rate nu/(t - T*) times the cutoff; t > T*. """
        t = np.asarray(t, dtype=float)
        return self.nu / (t - self.T_star) * utils.cutoff(t, self.t_in, self.t_out)

    def L(self, t):
        """ int_t^T_fin ell; infinite at T*. """
        t0 = np.asarray(t, dtype=float)
        t = np.atleast_1d(t0)
        out = np.zeros_like(t)
        band = (t >= self.t_in) & (t < self.t_out)
        if np.any(band):
            out[band] = self._band(t[band])[0]
        inner = t < self.t_in
        with np.errstate(divide='ignore'):
            out[inner] = self.L_in + self.nu * np.log((self.t_in - self.T_star) / (t[inner] - self.T_star))
        out[t <= self.T_star] = np.inf
        return out.reshape(t0.shape) if t0.ndim else float(out[0])

    def F(self, x):
        r''' Closed form ln((k + t)/(k - t)) / sqrt(gamma - alpha), t = sqrt((x-mu)/(x+mu)). '''
        x = np.asarray(x, dtype=float)
        tt = np.sqrt((x - self.mu) / (x + self.mu))
        with np.errstate(divide='ignore'):
            return np.log((self.k + tt) / (self.k - tt)) / self.root

    def F_quad(self, x):
        """ F by quadrature after y = mu cosh(theta). """
        if x <= self.mu:
            return 0.0
        top = np.arccosh(x / self.mu)
        mu = self.mu
        val, err = quad(lambda th: 1.0 / (1.0 - mu * np.cosh(th)), 0.0, top,
                        epsabs=1e-13, epsrel=1e-12, limit=200)
        return val / np.sqrt(self.gas.gamma)

    def F_inverse(self, y):
        y = np.asarray(y, dtype=float)
        tt = self.k * np.tanh(0.5 * y * self.root)
        return self.mu * (1.0 + tt * tt) / (1.0 - tt * tt)

    def value(self, t):
        return self.F_inverse(self.L(t))

    def rate(self, t):
        """ g' = -ell sqrt(gamma) (1 - g) sqrt(g^2 - mu^2) """
        t = np.asarray(t, dtype=float)
        gv = self.value(t)
        with np.errstate(invalid='ignore', divide='ignore'):
            ell = np.where(t > self.T_star, self.ell(np.maximum(t, self.T_star + 1e-300)), np.inf)
            out = -ell * np.sqrt(self.gas.gamma) * (1.0 - gv) * np.sqrt(np.maximum(gv * gv - self.mu ** 2, 0.0))
        return out

    def check_quadrature(self, n=7):
        """ Closed-form F against quadrature at n points of (mu, 1). """
        xs = self.mu + (1.0 - self.mu) * np.linspace(0.05, 0.95, n)
        worst = 0.0
        for x in xs:
            closed = float(self.F(x))
            numer = self.F_quad(x)
            worst = max(worst, abs(closed - numer) / max(1.0, abs(closed)))
        if worst > 1e-8:
            logger.error('GFunction: F closed form and quadrature differ by {:.3e}'.format(worst))
            raise QuadratureFailure('F closed form and quadrature differ by {:.3e}'.format(worst))
        return worst


def curve_grid(tcfg):
    """ t grid on [T*, T_fin]: uniform in (t - T*)^(1/2) on the inner half when refine is set. """
    n = tcfg.n
    if not tcfg.refine:
        return np.linspace(tcfg.T_star, tcfg.T_fin, n)
    t_mid = tcfg.T_star + tcfg.cutoff_inner * tcfg.delta
    n_in = n // 2
    inner = utils.tau_graded_grid(tcfg.T_star, t_mid, n_in + 1)
    outer = np.linspace(t_mid, tcfg.T_fin, n - n_in)
    return np.concatenate([inner[:-1], outer])


def build_g(tcfg, gas, t=None):
    """ Build g and sample it (with its rate) on the curve grid.

    Returns:
        GFunction with attributes t, g, gdot holding the samples
    """
    gfun = GFunction(tcfg, gas)
    gfun.check_quadrature()
    gfun.t = curve_grid(tcfg) if t is None else np.asarray(t, dtype=float)
    gfun.g = gfun.value(gfun.t)
    gfun.gdot = gfun.rate(gfun.t)
    return gfun


class ShockCurve(object):
    """ Shock trajectory with its one-sided traces.

    Everything is recomputed from h(t) on request; ``h_of`` is the dense ODE
    solution or, for a curve read from file, a Hermite spline through (h, hdot).
    """

    def __init__(self, tcfg, gas, prof, gfun, h_of, t=None):
        self.tcfg = tcfg
        self.gas = gas
        self.prof = prof
        self.lam = prof.lam
        self.gfun = gfun
        self.h_of = h_of
        self.t = curve_grid(tcfg) if t is None else np.asarray(t, dtype=float)
        self.constraints = {}
        self.calibration = {}

    @property
    def T_star(self):
        return self.tcfg.T_star

    @property
    def T_circ(self):
        return self.tcfg.T_circ

    @property
    def T_fin(self):
        return self.tcfg.T_fin

    def evaluate(self, t):
        """ All shock quantities at times t (array), as a dict of arrays. """
        gas = self.gas
        prof = self.prof
        lam = self.lam
        a = gas.alpha
        gm = gas.gamma
        t = np.atleast_1d(np.asarray(t, dtype=float))
        h = np.asarray(self.h_of(t), dtype=float).reshape(t.shape)
        g = self.gfun.value(t)
        gdot = self.gfun.rate(t)
        # gdot is unbounded at T*; the node there carries 0 and its hddot is not a limit value
        gdot = np.where(np.isfinite(gdot), gdot, 0.0)

        xi = np.maximum(h / (-t), 1.0)
        U, C, R = prof.U(xi), prof.C(xi), prof.R(xi)
        dU, dC, dR = prof.derivatives(xi)
        hdot = U - g * C
        xidot = hdot / (-t) + h / t ** 2
        hddot = (dU - g * dC) * xidot - gdot * C
        P = h ** ((1.0 - lam) / lam) / lam
        Pdot = (1.0 - lam) / lam * P * hdot / h
        s = h ** (1.0 / lam)
        sdot = P * hdot
        sddot = Pdot * hdot + P * hddot

        u_p = P * U
        c_p = P * C
        rho_p = R

        Kg = (1.0 - g * g) / ((1.0 + a) * g)
        dKg = -(1.0 + g * g) / ((1.0 + a) * g * g)
        G2 = np.maximum((a * gm * g * g + (gm - a * a) - a / (g * g)) / (1.0 + a) ** 2, 0.0)
        Gm = np.sqrt(G2)
        dG2 = (2.0 * a * gm * g + 2.0 * a / g ** 3) / (1.0 + a) ** 2
        with np.errstate(divide='ignore', invalid='ignore'):
            dGm = np.where(Gm > 0.0, dG2 / (2.0 * np.where(Gm > 0.0, Gm, 1.0)) * gdot, 0.0)
        Rr = (1.0 + a) * g * g / (1.0 + a * g * g)
        dRr = 2.0 * (1.0 + a) * g / (1.0 + a * g * g) ** 2

        u_m = P * (U + C * Kg)
        du_m = Pdot * (U + C * Kg) + P * ((dU + dC * Kg) * xidot + C * dKg * gdot)
        c_m = P * C * Gm
        dc_m = Pdot * C * Gm + P * dC * xidot * Gm + P * C * dGm
        rho_m = Rr * R
        drho_m = dRr * gdot * R + Rr * dR * xidot
        b_m = c_m * rho_m ** (-a)
        db_m = rho_m ** (-a) * dc_m - a * c_m * rho_m ** (-a - 1.0) * drho_m
        w_m = u_m + c_m / a
        z_m = u_m - c_m / a
        dw_m = du_m + dc_m / a
        dz_m = du_m - dc_m / a

        gap1 = (u_m - c_m) - sdot
        gap2 = u_m - sdot
        gap3 = (u_m + c_m) - sdot

        rw, rz, rb = drv_from_compatibility(w_m, z_m, b_m, rho_m, dw_m, dz_m, db_m, sdot, s, gas)
        # compatibility relations degenerate at T*
        singular = t <= self.T_star
        rw = np.where(singular, np.nan, rw)
        rz = np.where(singular, np.nan, rz)
        rb = np.where(singular, np.nan, rb)

        b_p = c_p * rho_p ** (-a)
        return {
            't': t, 'h': h, 'hdot': hdot, 'hddot': hddot, 's': s, 'sdot': sdot, 'sddot': sddot,
            'g': g, 'gdot': gdot, 'xi': xi,
            'u_plus': u_p, 'c_plus': c_p, 'rho_plus': rho_p, 'b_plus': b_p,
            'w_plus': u_p + c_p / a, 'z_plus': u_p - c_p / a,
            'lambda1_plus': u_p - c_p, 'lambda3_plus': u_p + c_p,
            'du_plus': Pdot * U + P * dU * xidot, 'dc_plus': Pdot * C + P * dC * xidot,
            'drho_plus': dR * xidot,
            'u_minus': u_m, 'c_minus': c_m, 'rho_minus': rho_m, 'b_minus': b_m,
            'w_minus': w_m, 'z_minus': z_m,
            'du_minus': du_m, 'dc_minus': dc_m, 'drho_minus': drho_m, 'db_minus': db_m,
            'dw_minus': dw_m, 'dz_minus': dz_m,
            'rw_minus': rw, 'rz_minus': rz, 'rb_minus': rb,
            'gap1': gap1, 'gap2': gap2, 'gap3': gap3,
        }

    def samples(self):
        return self.evaluate(self.t)

    def to_columns(self):
        ev = self.samples()
        return {col: ev[col] for col in CURVE_COLUMNS}

    def sidecar(self):
        side = {'lambda': self.lam, 'gamma': self.gas.gamma, 'dim': self.gas.dim,
                'trajectory': self.tcfg.as_dict(), 'nu': self.gfun.nu, 'kappa': self.tcfg.kappa,
                'T_star': self.T_star, 'T_circ': self.T_circ,
                'constraints': self.constraints, 'calibration': self.calibration}
        return side


def integrate_h(gfun, prof, tcfg):
    """ Integrate the h ODE backward from T_fin to T* and verify the shock constraints.

    Raises ConstraintViolated naming the failing constraint.
    """
    t0 = time.time()
    gas = prof.gas
    tcfg.with_lambda(prof.lam)

    def rhs(t, y):
        xi = max(y[0] / (-t), 1.0)
        return [float(prof.U(xi) - gfun.value(t) * prof.C(xi))]

    sol = solve_ivp(rhs, (tcfg.T_fin, tcfg.T_star), [-tcfg.T_fin], method='DOP853', dense_output=True,
                    rtol=cfg.CURVE_RTOL, atol=cfg.CURVE_ATOL)
    if sol.status != 0:
        logger.error('integrate_h: integration stopped early: {}'.format(sol.message))
        raise ConstraintViolated('h ODE integration failed before T*: {}'.format(sol.message))

    def h_of(t):
        return sol.sol(np.clip(t, tcfg.T_star, tcfg.T_fin))[0]

    curve = ShockCurve(tcfg, gas, prof, gfun, h_of)
    check_constraints(curve)
    t1 = time.time()
    logger.info('Shock path time: %2.2fsec' % (t1 - t0))
    return curve


def check_constraints(curve):
    """ Verify h >= -t, hdot(T_fin) = -1, hddot >= 0 and the exterior Lax gap; record the report. """
    ev = curve.samples()
    t = ev['t']
    kap = 1.0 / (-curve.T_fin)
    lax_plus = ev['sdot'] - ev['lambda1_plus']
    # gdot is unbounded at T*, so hddot is only checked on (T*, T_fin]
    after = t > curve.T_star
    hddot = ev['hddot'][after]
    scale = np.max(np.abs(hddot)) if np.any(hddot) else 1.0
    ratio = hddot / (np.abs(ev['gdot'][after]) + kap)
    report = {
        'h_minus_neg_t_min': float(np.min(ev['h'] + t)),
        'hdot_T_fin': float(ev['hdot'][-1]),
        'hddot_min': float(np.min(hddot)),
        'hddot_ratio_range': [float(np.min(ratio)), float(np.max(ratio))],
        'lax_plus_min': float(np.min(lax_plus[after])),
        'g_T_fin': float(ev['g'][-1]),
        'g_T_star': float(ev['g'][0]),
    }
    curve.constraints = report
    checks = (
        (report['h_minus_neg_t_min'] >= -1e-12, 'h(t) >= -t'),
        (abs(report['hdot_T_fin'] + 1.0) <= cfg.H_DOT_TOL, 'hdot(T_fin) = -1'),
        (report['hddot_min'] >= -1e-8 * scale, 'hddot >= 0'),
        (report['lax_plus_min'] > 0.0, 'sdot - lambda1+ > 0 on (T*, T_fin]'),
    )
    for ok, what in checks:
        if not ok:
            logger.error('shock path: constraint {} fails ({})'.format(what, report))
            raise ConstraintViolated('shock constraint {} fails: {}'.format(what, report))
    return report


def interior_traces(curve):
    """ Interior (minus) traces and DRV traces on the curve grid.

    Raises DegenerateGap when a minus-side Lax gap is not positive before T*.
    """
    ev = curve.samples()
    after = ev['t'] > curve.T_star
    for key in ('gap1', 'gap2', 'gap3'):
        bad = after & ~(ev[key] > 0.0)
        if np.any(bad):
            t_bad = ev['t'][bad][-1]
            logger.error('interior_traces: {} underflows at t = {}'.format(key, t_bad))
            raise DegenerateGap('Lax gap {} is not positive at t = {:.12g} > T*'.format(key, t_bad))
    keys = ('t', 'u_minus', 'c_minus', 'rho_minus', 'b_minus', 'w_minus', 'z_minus',
            'rw_minus', 'rz_minus', 'rb_minus', 'gap1', 'gap2', 'gap3')
    return {key: ev[key] for key in keys}


def guderley_bound(prof, tcfg):
    """ Default m: GUDERLEY_M_FACTOR times the Guderley traces at T_fin.

    The exterior state on the Guderley shock gives |(w, z, b)|/kappa and rho;
    the interior there is quiescent.  A configured tcfg.m takes precedence.
    """
    if tcfg.m is not None:
        return float(tcfg.m)
    lam = prof.lam
    T_fin = tcfg.T_fin
    kappa = (-T_fin) ** ((1.0 - lam) / lam)
    a = prof.gas.alpha
    tr = plus_traces(prof, np.array([-T_fin]), np.array([T_fin]))
    rho = float(tr['rho'])
    b = float(tr['c']) * rho ** (-a)
    wzb = max(abs(float(tr['u']) + float(tr['c']) / a), abs(float(tr['u']) - float(tr['c']) / a), abs(b))
    return cfg.GUDERLEY_M_FACTOR * max(wzb / kappa, rho, 1.0 / rho, 1.0)


def drv_bound(curve):
    """ max |(w, z, b) DRV traces| (t - T*)/eps on (T*, T_fin]. """
    ev = curve.samples()
    after = ev['t'] > curve.T_star
    dt = ev['t'][after] - curve.T_star
    return float(max(np.nanmax(np.abs(ev[k][after]) * dt) for k in ('rw_minus', 'rz_minus', 'rb_minus'))
                 / curve.tcfg.eps)


def calibrate_bounds(curve, m=None):
    """ Trace bounds of the computed curve against the target m.

    m (from the configuration or guderley_bound) is what downstream monitors
    use.  The measured counterpart m_observed bounds |(w, z, b)|/kappa on both
    sides, rho and 1/rho, the DRV traces times (t - T*)/eps and
    hddot/(|gdot| + kappa^(lam/(lam-1))); m1 is the smallest of the three gap
    ratios.
    """
    ev = curve.samples()
    tcfg = curve.tcfg
    m = guderley_bound(curve.prof, tcfg) if m is None else float(m)
    kappa = tcfg.kappa if tcfg.kappa is not None else (-tcfg.T_fin) ** ((1.0 - curve.lam) / curve.lam)
    after = ev['t'] > curve.T_star
    wzb = max(np.max(np.abs(ev[k])) for k in ('w_plus', 'z_plus', 'b_plus', 'w_minus', 'z_minus', 'b_minus'))
    rho_hi = max(np.max(ev['rho_plus']), np.max(ev['rho_minus']))
    rho_lo = min(np.min(ev['rho_plus']), np.min(ev['rho_minus']))
    drv = drv_bound(curve)
    ratio = ev['hddot'][after] / (np.abs(ev['gdot'][after]) + kappa ** (curve.lam / (curve.lam - 1.0)))
    with np.errstate(invalid='ignore', divide='ignore'):
        r1 = (ev['sdot'] - ev['lambda1_plus'])[after] / ev['gap1'][after]
        r2 = (ev['u_plus'] - ev['sdot'])[after] / ev['gap2'][after]
        r3 = (ev['lambda3_plus'] - ev['sdot'])[after] / ev['gap3'][after]
    observed = max(wzb / kappa, rho_hi, 1.0 / rho_lo, drv, np.max(ratio),
                   np.nanmax(r1), np.nanmax(r2), np.nanmax(r3))
    m1 = min(np.nanmin(r1), np.nanmin(r2), np.nanmin(r3))
    if observed > m:
        logger.warning('calibrate_bounds: measured bound {:.4g} exceeds m = {:.4g}'.format(observed, m))
    out = {'m': float(m), 'm_observed': float(observed), 'm1': float(m1), 'kappa': float(kappa),
           'drv': float(drv), 'wzb_over_kappa': float(wzb / kappa), 'rho_range': [float(rho_lo), float(rho_hi)],
           'hddot_ratio_range': [float(np.min(ratio)), float(np.max(ratio))],
           'nu': float(curve.gfun.nu), 'nu_halvings': int(curve.calibration.get('nu_halvings', 0))}
    curve.calibration = out
    return out


def build_curve(prof, tcfg, max_halvings=None):
    """ build_g, integrate_h, interior_traces and calibrate_bounds in one call.

    nu is halved while the DRV traces break |DRV| (t - T*) <= m eps, at most
    max_halvings times; the number of halvings is reported in the calibration.

    Raises ConstraintViolated when the bound still fails after the last halving.
    """
    max_halvings = cfg.NU_MAX_HALVINGS if max_halvings is None else max_halvings
    tcfg.with_lambda(prof.lam)
    m = guderley_bound(prof, tcfg)
    halvings = 0
    while True:
        gfun = build_g(tcfg, prof.gas)
        curve = integrate_h(gfun, prof, tcfg)
        interior_traces(curve)
        drv = drv_bound(curve)
        if drv <= m:
            break
        if halvings >= max_halvings:
            logger.error('build_curve: DRV bound {:.4g} > m = {:.4g} after {} halvings of nu'
                         .format(drv, m, halvings))
            raise ConstraintViolated('DRV trace bound {:.4g} exceeds m = {:.4g} with nu = {:.4g}'
                                     .format(drv, m, gfun.nu))
        halvings += 1
        tcfg.nu = 0.5 * gfun.nu
        logger.warning('build_curve: DRV bound {:.4g} > m = {:.4g}, retrying with nu = {:.4g}'
                       .format(drv, m, tcfg.nu))
    curve.calibration = {'nu_halvings': halvings}
    calibrate_bounds(curve, m)
    return curve


def save_curve(curve, filename_out, meta=None):
    from .io.csv_writer import write_table
    side = curve.sidecar()
    side.update(meta or {})
    write_table(filename_out, curve.to_columns(), side, column_order=CURVE_COLUMNS)


def load_curve(filename, prof):
    """ Rebuild a ShockCurve from its CSV and sidecar; h(t) becomes a Hermite spline. """
    from .io.csv_writer import read_table
    from .io.run_config import TrajectoryConfig
    df, meta = read_table(filename, required=CURVE_COLUMNS)
    tr = meta['trajectory']
    tcfg = TrajectoryConfig(tr['T_fin'], tr['eps'], tr['delta'], tr['delta_circ'], tr['nu'],
                            n=tr['grid']['n'], refine=tr['grid']['refine'], m=tr.get('m')).with_lambda(prof.lam)
    gfun = GFunction(tcfg, prof.gas)
    t = df['t'].values
    spline = CubicHermiteSpline(t, df['h'].values, df['hdot'].values)
    curve = ShockCurve(tcfg, prof.gas, prof, gfun, spline, t=t)
    curve.constraints = meta.get('constraints', {})
    curve.calibration = meta.get('calibration', {})
    return curve


class AdmissiblePair(object):
    r''' Preshock-generating pair (ell, lambda1+ along ell) on [T*, T_circ].

    With tau = (t - T*)^(1/2) and the cutoff phi (1 near T*, flat 0 at T_circ):

        lambda1+ = phi (Lambda* + l1 tau + l2 tau^2) + (1 - phi) lambda1+_s
        chi      = phi (c1 tau + c2 tau^2) + (1 - phi)(sdot - lambda1+_s)
        ell_dot  = lambda1+ + chi,   c1 = -l1
    '''

    def __init__(self, curve, Lambda_star, l1, l2, c1, c2, support):
        self.curve = curve
        self.gas = curve.gas
        self.prof = curve.prof
        self.T_star = curve.T_star
        self.T_circ = curve.T_circ
        self.delta_circ = curve.tcfg.delta_circ
        self.Lambda_star = Lambda_star
        self.l1 = l1
        self.l2 = l2
        self.c1 = c1
        self.c2 = c2
        self.t_phi = self.T_star + support * self.delta_circ
        self.s_circ = float(curve.evaluate(self.T_circ)['s'][0])

        sol = solve_ivp(lambda t, y: [float(self.ell_dot(t)[0])], (self.T_circ, self.T_star), [self.s_circ],
                        method='DOP853', dense_output=True, rtol=1e-12, atol=1e-14)
        self._ell = sol.sol
        self.t = utils.tau_graded_grid(self.T_star, self.T_circ, cfg.PAIR_N)
        self.report = {}

    @property
    def ell_ddot_star(self):
        return self.l2 + self.c2

    def phi(self, t):
        return utils.cutoff(t, self.t_phi, self.T_circ)

    def dphi(self, t):
        return utils.cutoff_derivative(t, self.t_phi, self.T_circ)

    def _curve_part(self, t):
        return self.curve.evaluate(np.clip(t, self.T_star, self.curve.T_fin))

    def lambda1_plus(self, t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        tau = np.sqrt(np.maximum(t - self.T_star, 0.0))
        ph = self.phi(t)
        ev = self._curve_part(t)
        return ph * (self.Lambda_star + self.l1 * tau + self.l2 * tau ** 2) + (1.0 - ph) * ev['lambda1_plus']

    def lambda1_plus_dot(self, t):
        """ d/dt of lambda1_plus; behaves like l1/(2 tau) as t -> T*. """
        t = np.atleast_1d(np.asarray(t, dtype=float))
        tau = np.sqrt(np.maximum(t - self.T_star, 0.0))
        ph = self.phi(t)
        dph = self.dphi(t)
        ev = self._curve_part(t)
        poly = self.Lambda_star + self.l1 * tau + self.l2 * tau ** 2
        with np.errstate(divide='ignore'):
            dpoly = 0.5 * self.l1 / tau + self.l2
        dlam_s = ev['du_plus'] - ev['dc_plus']
        return dph * (poly - ev['lambda1_plus']) + ph * dpoly + (1.0 - ph) * dlam_s

    def chi(self, t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        tau = np.sqrt(np.maximum(t - self.T_star, 0.0))
        ph = self.phi(t)
        ev = self._curve_part(t)
        return ph * (self.c1 * tau + self.c2 * tau ** 2) + (1.0 - ph) * (ev['sdot'] - ev['lambda1_plus'])

    def ell_dot(self, t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        ph = self.phi(t)
        ev = self._curve_part(t)
        return ph * (self.Lambda_star + self.ell_ddot_star * (t - self.T_star)) + (1.0 - ph) * ev['sdot']

    def ell_ddot(self, t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        ph = self.phi(t)
        dph = self.dphi(t)
        ev = self._curve_part(t)
        lin = self.Lambda_star + self.ell_ddot_star * (t - self.T_star)
        return dph * (lin - ev['sdot']) + ph * self.ell_ddot_star + (1.0 - ph) * ev['sddot']

    def ell(self, t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        return self._ell(np.clip(t, self.T_star, self.T_circ))[0]

    def lambda3_plus(self, t):
        """ lambda3 of the Guderley exterior at (ell(t), t). """
        t = np.atleast_1d(np.asarray(t, dtype=float))
        r = self.ell(t)
        out = np.empty_like(t)
        for i, (ri, ti) in enumerate(zip(r, t)):
            xi_ok = max(ri, (-ti) ** (1.0 / self.prof.lam))
            st = evaluate_state(self.prof, xi_ok, ti)
            out[i] = float(st.u) + float(st.c(self.gas))
        return out

    def jump_z(self, t):
        """ [[z]] across ell from the gaps x1 = -chi and x2 = lambda3+ - ell_dot. """
        x1 = -self.chi(t)
        x2 = self.lambda3_plus(t) - self.ell_dot(t)
        return jumps_from_gaps(x1, x2, self.gas)

    def samples(self):
        t = self.t
        return {'t': t, 'tau': np.sqrt(t - self.T_star), 'ell': self.ell(t), 'ell_dot': self.ell_dot(t),
                'ell_ddot': self.ell_ddot(t), 'lambda1_plus': self.lambda1_plus(t),
                'lambda3_plus': self.lambda3_plus(t), 'chi': self.chi(t), 'phi': self.phi(t)}

    def coefficients(self):
        return {'Lambda_star': self.Lambda_star, 'l1': self.l1, 'l2': self.l2, 'c1': self.c1, 'c2': self.c2,
                'ell_ddot_star': self.ell_ddot_star, 'T_star': self.T_star, 'T_circ': self.T_circ,
                'delta_circ': self.delta_circ, 'support_end': self.t_phi, 's_circ': self.s_circ}


def admissible_pair(curve, tcfg=None, gas=None, c2=0.0, support=None):
    """ Construct the admissible pair from the curve data at T* and T_circ.

    Raises GapViolation when chi <= 0 somewhere on (T*, T_circ].
    """
    tcfg = curve.tcfg if tcfg is None else tcfg
    support = tcfg.pair_support if support is None else support
    dc = tcfg.delta_circ
    ev_star = curve.evaluate(curve.T_star)
    ev_circ = curve.evaluate(curve.T_circ)
    Lambda_star = float(ev_star['lambda1_plus'][0])
    gap_circ = float(ev_circ['sdot'][0] - ev_circ['lambda1_plus'][0])
    c1 = gap_circ / np.sqrt(dc)
    l1 = -c1
    l2 = (float(ev_circ['lambda1_plus'][0]) - Lambda_star - l1 * np.sqrt(dc)) / dc
    pair = AdmissiblePair(curve, Lambda_star, l1, l2, c1, c2, support)

    smp = pair.samples()
    after = smp['t'] > curve.T_star
    if np.any(smp['chi'][after] <= 0.0):
        t_bad = smp['t'][after][smp['chi'][after] <= 0.0][0]
        logger.error('admissible_pair: chi <= 0 at t = {}'.format(t_bad))
        raise GapViolation('speed gap chi <= 0 at t = {:.12g}'.format(t_bad))
    accel_limit = cfg.PAIR_ACCEL_M * dc ** (tcfg.eps - 1.0)
    ev_match = curve.evaluate(curve.T_circ)
    pair.report = {
        'chi_min_positive': float(np.min(smp['chi'][after])),
        'ell_ddot_max': float(np.max(np.abs(smp['ell_ddot']))),
        'ell_ddot_limit': float(accel_limit),
        'ell_ddot_within_limit': bool(np.max(np.abs(smp['ell_ddot'])) <= accel_limit),
        'match_T_circ': {'ell': float(pair.ell(curve.T_circ)[0] - ev_match['s'][0]),
                         'ell_dot': float(pair.ell_dot(curve.T_circ)[0] - ev_match['sdot'][0]),
                         'ell_ddot': float(pair.ell_ddot(curve.T_circ)[0] - ev_match['sddot'][0])},
        'l1_scale': float(abs(l1) / dc ** (tcfg.eps - 0.5)),
        'l2_scale': float(abs(l2) / dc ** (tcfg.eps - 1.0)),
    }
    return pair


def jump_series(pair, n=200):
    """ Fit [[z]](T* + tau^2) = a1 tau + a2 tau^2 + a3 tau^3 on the support of phi = 1.

    Returns:
        (tau, jz, (a1, a2, a3))
    """
    tau_max = np.sqrt(pair.t_phi - pair.T_star)
    tau = np.linspace(tau_max / n, tau_max, n)
    jz = pair.jump_z(pair.T_star + tau ** 2)[0]
    basis = np.vstack([tau, tau ** 2, tau ** 3]).T
    coef, _, rank, _ = np.linalg.lstsq(basis, jz, rcond=None)
    if rank < 3:
        raise FitIllConditioned('jump_series: rank {} basis'.format(rank))
    return tau, jz, tuple(float(c) for c in coef)


def modulate_symmetry(pair, gas=None):
    """ Choose ell_ddot(T*) so that the tau^2 coefficient of [[z]] vanishes.

    The coefficient is affine in c2 = ell_ddot(T*) - l2, so two fits fix the
    root; a third fit at the root is reported.

    Raises RootOutOfBounds when the required ell_ddot(T*) exceeds the
    acceleration bound.
    """
    gas = pair.gas if gas is None else gas
    curve = pair.curve
    tcfg = curve.tcfg
    a = gas.alpha
    _, _, coef0 = jump_series(pair)
    x2_star = float(pair.lambda3_plus(pair.T_star)[0] - pair.Lambda_star)
    c2_guess = -pair.c1 ** 2 / x2_star
    step = c2_guess - pair.c2 if abs(c2_guess - pair.c2) > 1e-8 * abs(pair.c1) else 0.1 * pair.c1
    trial = admissible_pair(curve, tcfg, gas, c2=pair.c2 + step)
    _, _, coef1 = jump_series(trial)
    slope = (coef1[1] - coef0[1]) / step
    c2_root = pair.c2 - coef0[1] / slope

    limit = cfg.PAIR_ACCEL_M * tcfg.delta_circ ** (tcfg.eps - 1.0)
    if abs(pair.l2 + c2_root) > limit:
        logger.error('modulate_symmetry: ell_ddot(T*) = {} beyond {}'.format(pair.l2 + c2_root, limit))
        raise RootOutOfBounds('required ell_ddot(T*) = {:.6g} exceeds the bound {:.6g}'
                              .format(pair.l2 + c2_root, limit))
    out = admissible_pair(curve, tcfg, gas, c2=c2_root)
    _, _, coef2 = jump_series(out)
    out.report.update({
        'modulation': {
            'C_A': -4.0 / (1.0 + a), 'slope_measured': slope, 'slope_expected': 4.0 / (1.0 + a),
            'c2_analytic': c2_guess, 'c2': c2_root, 'ell_ddot_star': out.ell_ddot_star,
            'a2_before': coef0[1], 'a2_after': coef2[1], 'a1_after': coef2[0],
        }
    })
    logger.info('modulate_symmetry: c2 = %.6g, a2 %.3e -> %.3e' % (c2_root, coef0[1], coef2[1]))
    return out


def save_pair(pair, filename_out, meta=None):
    """ Pair samples to CSV; the coefficients and the report go to the sidecar. """
    from .io.csv_writer import write_table
    side = {'coefficients': pair.coefficients(), 'report': pair.report, 'lambda': pair.prof.lam}
    side.update(meta or {})
    write_table(filename_out, pair.samples(), side, column_order=PAIR_COLUMNS)


def load_pair(filename, curve):
    """ Rebuild an AdmissiblePair from its sidecar coefficients and the curve. """
    from .io.csv_writer import read_json, sidecar_path
    import os
    path = filename if filename.endswith('.json') else sidecar_path(filename)
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    meta = read_json(path)
    co = meta['coefficients']
    pair = AdmissiblePair(curve, co['Lambda_star'], co['l1'], co['l2'], co['c1'], co['c2'],
                          (co['support_end'] - co['T_star']) / co['delta_circ'])
    pair.report = meta.get('report', {})
    return pair
