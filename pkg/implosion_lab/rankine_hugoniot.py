r''' rankine_hugoniot.py - jump conditions across a radial 1-shock.

Relative speeds v = u - sdot.  The plus side is the shocked exterior, the
minus side the interior the shock runs into; jumps are [[f]] = f- - f+.

The admissible plus states are exactly those with g = v+/c+ in [mu, 1],
mu = sqrt(alpha/gamma): g = mu is the strong (cold interior) shock and g = 1
the zero-strength limit.
'''

import logging

import numpy as np

from . import config as cfg
from .gas_core import PrimState, speeds_wz
from .errors import PreconditionViolated

logger = logging.getLogger(__name__)


class ShockSideStates(object):
    """ Traces on both sides of a shock moving with speed sdot. """

    def __init__(self, plus, minus, sdot):
        self.plus = plus
        self.minus = minus
        self.sdot = sdot

    @property
    def v_plus(self):
        return self.plus.u - self.sdot

    @property
    def v_minus(self):
        return self.minus.u - self.sdot


def _b_from_p(rho, p, gas):
    return np.sqrt(gas.gamma * np.maximum(p, 0.0) / np.asarray(rho, dtype=float) ** gas.gamma)


def prim_from_rup(u, rho, p, gas):
    """ PrimState from (u, rho, p). """
    return PrimState(u, rho, _b_from_p(rho, p, gas))


def rh_partner_state(v, rho, p, gas):
    r''' Closed-form RH partner of the relative state (v, rho, p):

        v' = (gamma p + alpha v^2 rho) / ((1+alpha) v rho)
        rho' = (1+alpha) v^2 rho^2 / (gamma p + alpha v^2 rho)
        p' = (v^2 rho - alpha p) / (1+alpha)

    The map is an involution on the states it is defined for; no admissibility
    checks are made.
    '''
    a = gas.alpha
    v = np.asarray(v, dtype=float)
    rho = np.asarray(rho, dtype=float)
    p = np.asarray(p, dtype=float)
    den = gas.gamma * p + a * v * v * rho
    v_o = den / ((1.0 + a) * v * rho)
    rho_o = (1.0 + a) * v * v * rho * rho / den
    p_o = (v * v * rho - a * p) / (1.0 + a)
    return v_o, rho_o, p_o


def check_preconditions(plus, sdot, gas):
    """ Raise PreconditionViolated naming the first failing shock condition. """
    rho = np.asarray(plus.rho, dtype=float)
    p = np.asarray(plus.p(gas), dtype=float)
    v = np.asarray(plus.u, dtype=float) - sdot
    c = np.asarray(plus.c(gas), dtype=float)
    checks = (
        (np.all(rho > 0.0), 'rho+ > 0'),
        (np.all(p >= 0.0), 'p+ >= 0'),
        (np.all(v > 0.0), 'u+ > sdot'),
        (np.all(p <= v * v * rho / gas.alpha * (1.0 + 1e-12)), 'p+ <= (v+)^2 rho+/alpha'),
        (np.all(v < c), 'sdot > u+ - alpha sigma+'),
    )
    for ok, what in checks:
        if not ok:
            logger.error('rankine_hugoniot: precondition {} violated'.format(what))
            raise PreconditionViolated('shock precondition violated: {}'.format(what))


def invert_rh(plus, sdot, gas):
    """ Unique admissible interior state for the exterior state plus and speed sdot. """
    check_preconditions(plus, sdot, gas)
    v_m, rho_m, p_m = rh_partner_state(np.asarray(plus.u) - sdot, plus.rho, plus.p(gas), gas)
    return prim_from_rup(v_m + sdot, rho_m, p_m, gas)


def rh_residuals(minus, plus, sdot, gas):
    r''' Relative residuals of the conservation relations

        [[rho v]] = 0,  [[rho v^2 + p]] = 0,  [[v^2 + 2 gamma p / ((gamma-1) rho)]] = 0
    '''
    out = []
    vals = []
    for st in (minus, plus):
        v = np.asarray(st.u, dtype=float) - sdot
        rho = np.asarray(st.rho, dtype=float)
        p = np.asarray(st.p(gas), dtype=float)
        vals.append((rho * v, rho * v * v + p, v * v + 2.0 * gas.gamma * p / ((gas.gamma - 1.0) * rho)))
    for fm, fp in zip(*vals):
        scale = np.maximum(np.abs(fm), np.abs(fp))
        scale = np.where(scale > 0.0, scale, 1.0)
        out.append(np.abs(fm - fp) / scale)
    return {'mass': out[0], 'momentum': out[1], 'energy': out[2]}


def rhop_roots(v, rho, p, gas):
    r''' Both positive roots of the density equation, ascending.

    With m = rho v, P = rho v^2 + p, H = v^2 + (gamma/alpha) p/rho and x = 1/rho':

        m^2 (1 - gamma/alpha) x^2 + (gamma/alpha) P x - H = 0

    One root is the input density itself.
    '''
    a = gas.alpha
    gm = gas.gamma
    m = rho * v
    P = rho * v * v + p
    H = v * v + gm / a * p / rho
    xs = np.roots([m * m * (1.0 - gm / a), gm / a * P, -H])
    rhos = sorted(1.0 / x.real for x in xs if abs(x.imag) < 1e-12 and x.real > 0.0)
    return tuple(rhos)


def strength_ratios(gr, gas):
    r''' Interior state in units of the exterior sound speed, as functions of g = v+/c+:

        v-/c+ = (1 + alpha g^2) / ((1+alpha) g)
        (c-/c+)^2 = (gamma g^2 - alpha)(1 + alpha g^2) / ((1+alpha)^2 g^2)
        rho-/rho+ = (1+alpha) g^2 / (1 + alpha g^2)
    '''
    a = gas.alpha
    gr = np.asarray(gr, dtype=float)
    vm = (1.0 + a * gr * gr) / ((1.0 + a) * gr)
    cm2 = (gas.gamma * gr * gr - a) * (1.0 + a * gr * gr) / ((1.0 + a) ** 2 * gr * gr)
    rr = (1.0 + a) * gr * gr / (1.0 + a * gr * gr)
    return vm, np.sqrt(np.maximum(cm2, 0.0)), rr


def gap_ratios(gr, gas):
    """ The three Lax gap ratios as functions of g = v+/c+; the first is 1 at g = 1. """
    vm, cm, _ = strength_ratios(gr, gas)
    gr = np.asarray(gr, dtype=float)
    with np.errstate(invalid='ignore', divide='ignore'):
        r1 = np.where(np.abs(1.0 - gr) > 1e-9, (1.0 - gr) / (vm - cm), 1.0)
    return r1, gr / vm, (1.0 + gr) / (vm + cm)


def admissible_ratio_intervals(gas, n=None):
    """ (min, max) of each gap ratio over g in [mu, 1]. """
    n = cfg.RATIO_SAMPLES if n is None else n
    grs = np.linspace(gas.mu, 1.0, n)
    out = {}
    for name, vals in zip(('ratio1', 'ratio2', 'ratio3'), gap_ratios(grs, gas)):
        out[name] = (float(np.min(vals)), float(np.max(vals)))
    return out


def _lambdas(state, gas):
    u = np.asarray(state.u, dtype=float)
    c = np.asarray(state.c(gas), dtype=float)
    return u - c, u, u + c


def check_lax(sides, gas, tol=0.0):
    """ Lax report for a 1-shock: each inequality, the gap ratios and their intervals.

    Every inequality entry holds its value, whether it holds strictly and
    whether it holds with equality (|value| <= tol).
    """
    sdot = sides.sdot
    l1p, l2p, l3p = _lambdas(sides.plus, gas)
    l1m, l2m, l3m = _lambdas(sides.minus, gas)

    def entry(value):
        value = float(value)
        return {'value': value, 'strict': bool(value > tol), 'equal': bool(abs(value) <= max(tol, 1e-14))}

    ineq = {
        'sdot_above_lambda1_plus': entry(sdot - l1p),
        'lambda1_minus_above_sdot': entry(l1m - sdot),
        'lambda2_plus_above_sdot': entry(l2p - sdot),
        'lambda2_minus_above_sdot': entry(l2m - sdot),
    }
    with np.errstate(invalid='ignore', divide='ignore'):
        ratios = {
            'ratio1': float((sdot - l1p) / (l1m - sdot)),
            'ratio2': float((l2p - sdot) / (l2m - sdot)),
            'ratio3': float((l3p - sdot) / (l3m - sdot)),
        }
    intervals = admissible_ratio_intervals(gas)
    in_band = {}
    for key, (lo, hi) in intervals.items():
        val = ratios[key]
        in_band[key] = bool(np.isfinite(val) and lo - 1e-9 <= val <= hi + 1e-9)
    c_plus = float(sides.plus.c(gas))
    gr = float(sides.v_plus / c_plus) if c_plus > 0.0 else float('inf')
    return {
        'inequalities': ineq,
        'all_strict': all(e['strict'] for e in ineq.values()),
        'ratios': ratios,
        'intervals': intervals,
        'ratios_in_interval': in_band,
        'g': gr,
        'g_admissible': bool(gas.mu - 1e-12 <= gr <= 1.0 + 1e-12),
    }


def jumps_from_gaps(x1, x2, gas, rho_plus=1.0):
    r''' Exact jumps ([[z]], [[w]], [[S]]) for the exterior state with
    lambda1+ - sdot = x1 < 0 and lambda3+ - sdot = x2 > 0 (c+ = (x2-x1)/2,
    v+ = (x1+x2)/2), by direct substitution into the closed forms.
    '''
    a = gas.alpha
    x1 = np.asarray(x1, dtype=float)
    c_p = 0.5 * (x2 - x1)
    v_p = 0.5 * (x1 + x2)
    p_p = rho_plus * c_p * c_p / gas.gamma
    v_m, rho_m, p_m = rh_partner_state(v_p, rho_plus, p_p, gas)
    c_m = np.sqrt(gas.gamma * p_m / rho_m)
    du = v_m - v_p
    dc = c_m - c_p
    jz = du - dc / a
    jw = du + dc / a
    jS = 2.0 * np.log(c_m * rho_m ** (-a)) - 2.0 * np.log(c_p * rho_plus ** (-a))
    return jz, jw, jS


def taylor_jumps(x1, x2, gas):
    """ Leading weak-shock expansions of ([[z]], [[w]], [[S]]) in x1 = lambda1+ - sdot. """
    a = gas.alpha
    jz = -4.0 * x1 / (1.0 + a) + 4.0 * x1 * x1 / ((1.0 + a) * x2)
    jw = 4.0 * x1 ** 3 / ((1.0 + a) * x2 * x2)
    jS = 64.0 * a * gas.gamma * x1 ** 3 / (3.0 * (1.0 + a) ** 2 * x2 ** 3)
    return jz, jw, jS


def printed_fz(x1, x2, gas):
    """ The alternative closed form of [[z]] in (x1, x2); reported for comparison only. """
    a = gas.alpha
    root = np.sqrt(((x1 - x2) ** 2 + a * (x1 + x2) ** 2) * (-a * (x1 + x2) ** 2 + gas.gamma * (x1 - x2) ** 2))
    den = (x1 + x2) * (4.0 * a * x1 * x2 + (1.0 + a) * x1 * x1 - (1.0 + a) * x2 * x2 - root)
    return 8.0 * x1 * x2 ** 3 / den


def jump_expansions(plus, sdot, gas):
    """ Exact jumps and their weak-shock expansions.

    Returns:
        (jz, jw, jS, report) with report holding x1, x2, chi/<c>, the Taylor
        values, exact minus Taylor differences and a reliability flag.
    """
    check_preconditions(plus, sdot, gas)
    minus = invert_rh(plus, sdot, gas)
    a = gas.alpha
    u_p = float(plus.u)
    c_p = float(plus.c(gas))
    x1 = u_p - c_p - sdot
    x2 = u_p + c_p - sdot
    rs_p = (u_p + c_p / a, u_p - c_p / a)
    c_m = float(minus.c(gas))
    u_m = float(minus.u)
    jz = (u_m - c_m / a) - rs_p[1]
    jw = (u_m + c_m / a) - rs_p[0]
    jS = 2.0 * np.log(float(minus.b)) - 2.0 * np.log(float(plus.b))
    tz, tw, tS = taylor_jumps(x1, x2, gas)
    chi_rel = abs(x1) / (0.5 * (c_p + c_m))
    report = {
        'x1': x1, 'x2': x2, 'chi_over_mean_c': chi_rel,
        'taylor': {'z': tz, 'w': tw, 'S': tS},
        'exact_minus_taylor': {'z': jz - tz, 'w': jw - tw, 'S': jS - tS},
        'printed_fz': float(printed_fz(x1, x2, gas)),
        'taylor_reliable': bool(chi_rel < cfg.TAYLOR_CHI_LIMIT),
    }
    return jz, jw, jS, report
