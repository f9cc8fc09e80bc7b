r''' guderley.py - self-similar converging-shock profiles and the similarity exponent.

With xi = r^lam/(-t) the flow is

    u = r^(1-lam) U(xi)/lam,  c = r^(1-lam) C(xi)/lam,  rho = R(xi)

and in the reduced variables V = U/xi, W = C/xi

    xi dV/dxi = G/(lam D),   xi dW/dxi = F/(lam D)
    D = (1+V)^2 - W^2
    G = W^2 (d V + 2(lam-1)/gamma) - V(1+V)(lam+V)
    F = W [(-2(lam+V) + (1-gamma) d V) D + (1-gamma) G] / (2(1+V))

The regular solution leaves the strong-shock state at xi = 1 and crosses the
sonic line D = 0 where G and F vanish together; that requirement fixes lam.
'''

import sys
import time
import logging

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from . import config as cfg
from .gas_core import GasParams, PrimState, drv_from_gradients
from .errors import (SonicDegenerate, NoBracket, MaxIterations, SonicCrossingFailed, OutOfRange)

logger = logging.getLogger(__name__)

level_log = logging.INFO

if level_log == logging.INFO:
    stream = sys.stdout
    lformat = cfg.LOG_FORMAT
else:
    stream = sys.stderr
    lformat = cfg.LOG_FORMAT_DEBUG

logging.basicConfig(format=lformat, stream=stream, level=level_log)

PROFILE_COLUMNS = ['xi', 'U', 'C', 'R']


class ProfileParams(object):
    """ Similarity exponent and gas parameters for the profile ODE. """

    def __init__(self, lam, gas):
        self.lam = float(lam)
        self.gas = gas


def boundary_values(gas):
    """ Strong-shock data at xi = 1: (U, C, R). """
    gm = gas.gamma
    U1 = -2.0 / (gm + 1.0)
    C1 = np.sqrt(2.0 * gm * (gm - 1.0)) / (gm + 1.0)
    R1 = (gm + 1.0) / (gm - 1.0)
    return U1, C1, R1


def printed_boundary_c(gas):
    """ The alternative C(1) = sqrt(gamma(gamma-1))/(gamma+1), kept for diagnostics only. """
    return np.sqrt(gas.gamma * (gas.gamma - 1.0)) / (gas.gamma + 1.0)


def identity_exponents(lam, gas):
    """ Exponents (p, q) of the density identity R^p C^2 (1 + U/xi)^q = K. """
    q = 2.0 * (lam - 1.0) / gas.dim
    return q + 1.0 - gas.gamma, q


def identity_constant(gas):
    """ K = 2 gamma (gamma-1)^gamma / (gamma+1)^(1+gamma), fixed by the xi = 1 data. """
    gm = gas.gamma
    return 2.0 * gm * (gm - 1.0) ** gm / (gm + 1.0) ** (1.0 + gm)


def printed_identity_constant(gas):
    gm = gas.gamma
    return 2.0 * gm * (gm - 1.0) ** (1.0 - gm) / (1.0 + gm) ** (1.0 + gm)


def similarity_numerators(V, W, lam, gas):
    """ (G, F, D) of the reduced profile ODE. """
    gm = gas.gamma
    d = gas.dim
    k = 2.0 * (lam - 1.0) / gm
    D = (1.0 + V) ** 2 - W ** 2
    G = W ** 2 * (d * V + k) - V * (1.0 + V) * (lam + V)
    F = W * ((-2.0 * (lam + V) + (1.0 - gm) * d * V) * D + (1.0 - gm) * G) / (2.0 * (1.0 + V))
    return G, F, D


def _grad_G_D(V, W, lam, gas):
    d = gas.dim
    k = 2.0 * (lam - 1.0) / gas.gamma
    dG_dV = d * W ** 2 - ((1.0 + V) * (lam + V) + V * (lam + V) + V * (1.0 + V))
    dG_dW = 2.0 * W * (d * V + k)
    return np.array([dG_dV, dG_dW]), np.array([2.0 * (1.0 + V), -2.0 * W])


def _jacobian(V, W, lam, gas, h=1.0e-7):
    """ Jacobian of the desingularised field (-G, -F) by central differences. """
    jac = np.empty((2, 2))
    for j, (dv, dw) in enumerate(((h, 0.0), (0.0, h))):
        Gp, Fp, _ = similarity_numerators(V + dv, W + dw, lam, gas)
        Gm, Fm, _ = similarity_numerators(V - dv, W - dw, lam, gas)
        jac[0, j] = -(Gp - Gm) / (2.0 * h)
        jac[1, j] = -(Fp - Fm) / (2.0 * h)
    return jac


def sonic_saddles(lam, gas):
    r''' Points of the sonic line W = 1 + V where G vanishes:

        (d-1) V^2 + (d + k - lam) V + k = 0,   k = 2(lam-1)/gamma

    Only roots with -1 < V < 0 are returned, as (V, W) pairs.
    '''
    d = gas.dim
    k = 2.0 * (lam - 1.0) / gas.gamma
    roots = np.roots([d - 1.0, d + k - lam, k])
    out = []
    for root in roots:
        if abs(root.imag) < 1e-12 and -1.0 < root.real < 0.0:
            out.append((root.real, 1.0 + root.real))
    return out


def profile_rhs(xi, U, C, prof_params):
    """ (dU/dxi, dC/dxi) of the self-similar profile.

    Raises SonicDegenerate when |D| is below the sonic tolerance; the caller
    must then use the sonic-crossing branch.
    """
    lam = prof_params.lam
    V = U / xi
    W = C / xi
    G, F, D = similarity_numerators(V, W, lam, prof_params.gas)
    if np.any(np.abs(D) < cfg.SONIC_RHS_TOL):
        logger.error('profile_rhs: |D| = {:.3e} at xi = {}'.format(np.min(np.abs(D)), xi))
        raise SonicDegenerate('profile_rhs: |D| = {:.3e} below {:.1e} at xi = {}'
                              .format(np.min(np.abs(D)), cfg.SONIC_RHS_TOL, xi))
    return V + G / (lam * D), W + F / (lam * D)


def _shoot(lam, gas, tau_max=None):
    r''' Launch the desingularised trajectory from xi = 1.

        dV/dtau = -G,  dW/dtau = -F,  d(ln xi)/dtau = -lam D

    and stop at the first of D = 0 or G = 0.  The mismatch G - D is continuous
    in lam and vanishes when the trajectory runs into the saddle.
    '''
    tau_max = cfg.SHOOT_TAU_MAX if tau_max is None else tau_max
    U1, C1, _ = boundary_values(gas)

    def rhs(tau, y):
        G, F, D = similarity_numerators(y[0], y[1], lam, gas)
        return [-G, -F, -lam * D]

    def hit_D(tau, y):
        return similarity_numerators(y[0], y[1], lam, gas)[2]

    def hit_G(tau, y):
        return similarity_numerators(y[0], y[1], lam, gas)[0]

    hit_D.terminal = True
    hit_D.direction = 1
    hit_G.terminal = True
    hit_G.direction = 1

    sol = solve_ivp(rhs, (0.0, tau_max), [U1, C1, 0.0], method='DOP853',
                    rtol=cfg.PROFILE_RTOL, atol=cfg.PROFILE_ATOL, events=(hit_D, hit_G))
    V, W = sol.y[0, -1], sol.y[1, -1]
    G, F, D = similarity_numerators(V, W, lam, gas)
    return G - D, (V, W, G, F, D)


def sonic_mismatch(lam, gas):
    """ Signed sonic mismatch of the trajectory launched with exponent lam. """
    return _shoot(lam, gas)[0]


def sonic_residual(lam, gas):
    """ |G| + |F| where the trajectory for lam stops near the sonic line. """
    _, (V, W, G, F, D) = _shoot(lam, gas)
    return abs(G) + abs(F)


def _lambda_upper(gas):
    """ Exponent at which G changes sign at xi = 1; the eigenvalue lies below it. """
    V0, W0, _ = boundary_values(gas)
    gm = gas.gamma
    d = gas.dim
    a1 = 2.0 * W0 ** 2 / gm - V0 * (1.0 + V0)
    a0 = W0 ** 2 * (d * V0 - 2.0 / gm) - V0 * V0 * (1.0 + V0)
    return -a0 / a1


def scan_bracket(gas, n=None):
    """ Coarse scan of the sonic mismatch over (1, lam_G) for a sign change. """
    n = cfg.LAMBDA_SCAN_N if n is None else n
    lams = np.linspace(1.0 + 1e-3, _lambda_upper(gas) - 1e-3, n)
    prev_lam, prev_val = None, None
    for lam in lams:
        val = sonic_mismatch(lam, gas)
        if prev_val is not None and np.sign(val) != np.sign(prev_val):
            return prev_lam, lam
        prev_lam, prev_val = lam, val
    logger.error('scan_bracket: no sign change of the sonic mismatch for {}'.format(gas))
    raise NoBracket('no sign change of the sonic mismatch on [{:.4f}, {:.4f}] for {}'
                    .format(lams[0], lams[-1], gas))


def solve_similarity_exponent(gas, bracket=None, tol=None, maxiter=None):
    """ Similarity exponent lam by Brent's method on the sonic mismatch.

    Args:
        gas (GasParams): gas parameters
        bracket (tuple): (lam_lo, lam_hi) straddling a sign change; scanned when None
        tol (float): absolute tolerance in lam
        maxiter (int): iteration cap
    """
    tol = cfg.LAMBDA_XTOL if tol is None else tol
    maxiter = cfg.LAMBDA_MAXITER if maxiter is None else maxiter
    t0 = time.time()
    if bracket is None:
        lo, hi = scan_bracket(gas)
    else:
        lo, hi = bracket
        f_lo, f_hi = sonic_mismatch(lo, gas), sonic_mismatch(hi, gas)
        if np.sign(f_lo) == np.sign(f_hi):
            logger.error('solve_similarity_exponent: bracket ({}, {}) has no sign change'.format(lo, hi))
            raise NoBracket('bracket ({}, {}) has mismatches {:.3e}, {:.3e} of equal sign'
                            .format(lo, hi, f_lo, f_hi))
    lam, res = brentq(sonic_mismatch, lo, hi, args=(gas,), xtol=tol, maxiter=maxiter,
                      full_output=True, disp=False)
    if not res.converged:
        logger.error('solve_similarity_exponent: no convergence after {} iterations'.format(res.iterations))
        raise MaxIterations('similarity exponent: no convergence after {} iterations'.format(res.iterations))
    t1 = time.time()
    logger.info('lambda = %.12f for %s, solve time: %2.2fsec' % (lam, gas, t1 - t0))
    return lam


class SelfSimilarProfile(object):
    """ Sampled Guderley profile U, C, R on a log-uniform xi grid.

    Args:
        lam (float): similarity exponent
        gas (GasParams): gas parameters
        xi_grid, U, C, R (np.array): samples
        xi_sonic (float): sonic point
        residuals (dict): diagnostics from integrate_profile
    """

    def __init__(self, lam, gas, xi_grid, U, C, R, xi_sonic=None, residuals=None):
        self.lam = float(lam)
        self.gas = gas
        self.xi_grid = np.asarray(xi_grid, dtype=float)
        self.U_samples = np.asarray(U, dtype=float)
        self.C_samples = np.asarray(C, dtype=float)
        self.R_samples = np.asarray(R, dtype=float)
        self.xi_sonic = xi_sonic
        self.residuals = {} if residuals is None else residuals
        if np.any(np.diff(self.xi_grid) <= 0.0):
            raise ValueError('xi_grid must be strictly increasing')
        self._spl_U = CubicSpline(self.xi_grid, self.U_samples)
        self._spl_C = CubicSpline(self.xi_grid, self.C_samples)
        self._spl_R = CubicSpline(self.xi_grid, self.R_samples)
        self._dspl_U = self._spl_U.derivative()
        self._dspl_C = self._spl_C.derivative()
        self._dspl_R = self._spl_R.derivative()

    @property
    def xi_max(self):
        return self.xi_grid[-1]

    @property
    def params(self):
        return ProfileParams(self.lam, self.gas)

    def _check(self, xi):
        xi = np.asarray(xi, dtype=float)
        if np.any(xi > self.xi_max * (1.0 + 1e-12)):
            logger.error('profile: xi = {} beyond xi_max = {}'.format(np.max(xi), self.xi_max))
            raise OutOfRange('xi = {:.6g} beyond the stored xi_max = {:.6g}'.format(np.max(xi), self.xi_max))
        if np.any(xi < 1.0 - 1e-12):
            raise OutOfRange('xi = {:.6g} below the shock value 1'.format(np.min(xi)))
        return np.clip(xi, 1.0, self.xi_max)

    def U(self, xi):
        return self._spl_U(self._check(xi))

    def C(self, xi):
        return self._spl_C(self._check(xi))

    def R(self, xi):
        return self._spl_R(self._check(xi))

    def derivatives(self, xi):
        """ (U', C', R') at xi: the ODE right side away from the sonic point, splines near it. """
        xi = self._check(xi)
        U = self._spl_U(xi)
        C = self._spl_C(xi)
        R = self._spl_R(xi)
        lam = self.lam
        V = U / xi
        W = C / xi
        G, F, D = similarity_numerators(V, W, lam, self.gas)
        safe = np.abs(D) > 1e-3
        Dsafe = np.where(safe, D, 1.0)
        dU = np.where(safe, V + G / (lam * Dsafe), self._dspl_U(xi))
        dC = np.where(safe, W + F / (lam * Dsafe), self._dspl_C(xi))
        dlnR = -(self.gas.dim * V + G / Dsafe) / (lam * (1.0 + V))
        dR = np.where(safe, R * dlnR / xi, self._dspl_R(xi))
        return dU, dC, dR

    def identity_residual(self):
        """ max relative residual of R^p C^2 (1 + U/xi)^q = K on the grid """
        p, q = identity_exponents(self.lam, self.gas)
        lhs = self.R_samples ** p * self.C_samples ** 2 * (1.0 + self.U_samples / self.xi_grid) ** q
        return np.max(np.abs(lhs / identity_constant(self.gas) - 1.0))

    def sidecar(self):
        return {'gamma': self.gas.gamma, 'dim': self.gas.dim, 'lambda': self.lam,
                'xi_sonic': self.xi_sonic, 'residuals': self.residuals}


def sonic_landing(lam, gas, V, W, e):
    """ |G| + |F| where the line through (V, W) along e meets D = 0. """
    _, _, D = similarity_numerators(V, W, lam, gas)
    gD = np.array([2.0 * (1.0 + V), -2.0 * W])
    s = -D / np.dot(gD, e)
    G, F, _ = similarity_numerators(V + s * e[0], W + s * e[1], lam, gas)
    return float(abs(G) + abs(F))


def _cross_sonic(lam, gas, y_a):
    """ Jump over the sonic saddle along the eigendirection the trajectory arrives on.

    Returns the state (V, W, lnR) on the far side, the ln xi increment, the
    saddle location and the arrival direction.
    """
    V_a, W_a, lnR_a = y_a
    saddles = sonic_saddles(lam, gas)
    if not saddles:
        logger.error('sonic crossing: no saddle on the sonic line for lam = {}'.format(lam))
        raise SonicCrossingFailed('no saddle on the sonic line for lam = {}'.format(lam))
    dist = [np.hypot(V_a - Vs, W_a - Ws) for Vs, Ws in saddles]
    Vs, Ws = saddles[int(np.argmin(dist))]
    if min(dist) > 1e-3:
        logger.error('sonic crossing: D = 0 reached {:.3e} away from the saddle'.format(min(dist)))
        raise SonicCrossingFailed('trajectory reaches D = 0 at distance {:.3e} from the saddle; '
                                  'lam = {} is not the similarity exponent'.format(min(dist), lam))

    evals, evecs = np.linalg.eig(_jacobian(Vs, Ws, lam, gas))
    evals = evals.real
    evecs = evecs.real
    offset = np.array([V_a - Vs, W_a - Ws])
    align = [abs(np.dot(offset, evecs[:, j])) / np.linalg.norm(evecs[:, j]) for j in range(2)]
    j = int(np.argmax(align))
    e = evecs[:, j] / np.linalg.norm(evecs[:, j])
    mu = evals[j]
    a = np.dot(offset, e)
    gG, gD = _grad_G_D(Vs, Ws, lam, gas)
    gDe = np.dot(gD, e)
    gGe = np.dot(gG, e)
    if mu >= 0.0 or a * gDe >= 0.0:
        logger.error('sonic crossing: arrival direction is not the stable branch (mu = {})'.format(mu))
        raise SonicCrossingFailed('arrival direction is not the stable branch (mu = {:.3e})'.format(mu))

    # along the line (Vs, Ws) + a e: dln(xi)/da and dln(R)/da are constant to first order
    dlnxi_da = -lam * gDe / mu
    dlnR_da = (gas.dim * Vs * gDe + gGe) / (mu * (1.0 + Vs))
    jump = -2.0 * a
    y_b = [Vs - a * e[0], Ws - a * e[1], lnR_a + jump * dlnR_da]
    return y_b, jump * dlnxi_da, (Vs, Ws), e


def integrate_profile(lam, gas, xi_max=None, n_xi=None):
    """ Integrate the profile from xi = 1 through the sonic point to xi_max.

    R comes from the density identity; the continuity equation is integrated as
    well and the two are compared in residuals['identity'].

    Args:
        lam (float): similarity exponent
        gas (GasParams): gas parameters
        xi_max (float): end of the xi grid
        n_xi (int): number of log-uniform samples
    """
    xi_max = cfg.XI_MAX if xi_max is None else float(xi_max)
    n_xi = cfg.PROFILE_N_XI if n_xi is None else int(n_xi)
    t0 = time.time()
    d = gas.dim
    U1, C1, R1 = boundary_values(gas)
    L = np.log(xi_max)

    def rhs(s, y):
        V, W = y[0], y[1]
        G, F, D = similarity_numerators(V, W, lam, gas)
        return [G / (lam * D), F / (lam * D), -(d * V + G / D) / (lam * (1.0 + V))]

    def near_sonic(s, y):
        return similarity_numerators(y[0], y[1], lam, gas)[2] + cfg.SONIC_D_TOL

    near_sonic.terminal = True
    near_sonic.direction = 1

    inner = solve_ivp(rhs, (0.0, L), [U1, C1, np.log(R1)], method='DOP853', dense_output=True,
                      rtol=cfg.PROFILE_RTOL, atol=cfg.PROFILE_ATOL, events=near_sonic)
    if inner.status != 1:
        logger.error('integrate_profile: the trajectory never approaches the sonic line')
        raise SonicCrossingFailed('trajectory for lam = {} never approaches the sonic line ({})'
                                  .format(lam, inner.message))
    s_a = inner.t[-1]
    y_b, ds, (Vs, Ws), e_arrive = _cross_sonic(lam, gas, inner.y[:, -1])
    s_b = s_a + ds
    xi_sonic = np.exp(s_a + 0.5 * ds)

    def recross(s, y):
        return similarity_numerators(y[0], y[1], lam, gas)[2]

    recross.terminal = True
    recross.direction = -1

    outer = solve_ivp(rhs, (s_b, L), y_b, method='DOP853', dense_output=True,
                      rtol=cfg.PROFILE_RTOL, atol=cfg.PROFILE_ATOL, events=recross)
    if outer.status != 0:
        logger.error('integrate_profile: continuation past the sonic point failed')
        raise SonicCrossingFailed('continuation past the sonic point failed: {}'.format(outer.message))

    s_grid = np.linspace(0.0, L, n_xi)
    Y = np.empty((3, n_xi))
    m_in = s_grid <= s_a
    m_out = s_grid >= s_b
    Y[:, m_in] = inner.sol(s_grid[m_in])
    Y[:, m_out] = outer.sol(s_grid[m_out])
    gap = ~(m_in | m_out)
    if np.any(gap):
        w = (s_grid[gap] - s_a) / (s_b - s_a)
        Y[:, gap] = np.outer(inner.y[:, -1], 1.0 - w) + np.outer(y_b, w)

    xi = np.exp(s_grid)
    xi[0] = 1.0
    V, W, lnR_ode = Y
    U = xi * V
    C = xi * W
    p, q = identity_exponents(lam, gas)
    K = identity_constant(gas)
    if abs(p) > 1e-8:
        R = (K / (C ** 2 * (1.0 + V) ** q)) ** (1.0 / p)
    else:
        R = np.exp(lnR_ode)
    U[0], C[0], R[0] = U1, C1, R1

    G_s, F_s, _ = similarity_numerators(inner.y[0, -1], inner.y[1, -1], lam, gas)
    residuals = {
        'sonic': sonic_landing(lam, gas, inner.y[0, -1], inner.y[1, -1], e_arrive),
        'sonic_stop': float(abs(G_s) + abs(F_s)),
        'identity': float(np.max(np.abs(np.exp(lnR_ode) / R - 1.0))),
        'identity_constant': float(K),
        'printed_identity_constant': float(printed_identity_constant(gas)),
        'C1': float(C1),
        'C1_printed': float(printed_boundary_c(gas)),
        'saddle': [float(Vs), float(Ws)],
    }
    prof = SelfSimilarProfile(lam, gas, xi, U, C, R, xi_sonic=float(xi_sonic), residuals=residuals)
    if np.any(C <= 0.0):
        logger.warning('integrate_profile: C loses positivity at xi = {}'.format(xi[np.argmin(C)]))
    t1 = time.time()
    logger.info('Profile time: %2.2fsec (xi_sonic = %.6f)' % (t1 - t0, xi_sonic))
    return prof


def guderley_shock(t, lam):
    """ Guderley shock curve g(t) = (-t)^(1/lam) and its speed, for t < 0. """
    t = np.asarray(t, dtype=float)
    if np.any(t >= 0.0):
        raise OutOfRange('guderley_shock: t must be negative')
    gt = (-t) ** (1.0 / lam)
    return gt, -(1.0 / lam) * (-t) ** (1.0 / lam - 1.0)


def evaluate_state(prof, r, t, gas=None, side='+'):
    """ Guderley state at (r, t).

    Quiescent (u, rho, b) = (0, 1, 0) where r^lam < -t; the self-similar
    ansatz elsewhere.  On the shock itself (xi = 1) side='+' gives the exterior
    trace and side='-' the quiescent one.

    Args:
        prof (SelfSimilarProfile): profile
        r (float or np.array): radius, >= 0
        t (float): time, < 0
    """
    gas = prof.gas if gas is None else gas
    if not t < 0.0:
        raise OutOfRange('evaluate_state: t must be negative, got {}'.format(t))
    r = np.asarray(r, dtype=float)
    lam = prof.lam
    xi = r ** lam / (-t)
    outside = xi > 1.0 if side == '-' else xi >= 1.0
    u = np.zeros_like(xi)
    rho = np.ones_like(xi)
    b = np.zeros_like(xi)
    if np.any(outside):
        xo = xi[outside] if xi.ndim else xi
        ro = r[outside] if r.ndim else r
        scale = ro ** (1.0 - lam) / lam
        U = prof.U(xo)
        C = prof.C(xo)
        R = prof.R(xo)
        cs = scale * C
        if xi.ndim:
            u[outside] = scale * U
            rho[outside] = R
            b[outside] = cs * R ** (-gas.alpha)
        else:
            u, rho, b = scale * U, R, cs * R ** (-gas.alpha)
    return PrimState(u, rho, b)


def plus_traces(prof, h, t):
    r''' Exterior traces along r = h^(1/lam) with xi = h/(-t):

        u+ = P U(xi),  c+ = P C(xi),  rho+ = R(xi),   P = h^((1-lam)/lam)/lam
    '''
    lam = prof.lam
    h = np.asarray(h, dtype=float)
    xi = h / (-np.asarray(t, dtype=float))
    P = h ** ((1.0 - lam) / lam) / lam
    return {'xi': xi, 'P': P, 'u': P * prof.U(xi), 'c': P * prof.C(xi), 'rho': prof.R(xi)}


def exterior_fields(prof, r, t):
    r''' Riemann variables, density and DRVs of the Guderley field at (r, t).

    With xi = r^lam/(-t) and u = r^(1-lam) U(xi)/lam:

        u_r = (1-lam) u/r + U'(xi)/(-t),   c_r likewise,   rho_r = lam r^(lam-1) R'(xi)/(-t)

    Points inside the Guderley shock get the quiescent state with zero gradients.
    '''
    gas = prof.gas
    a = gas.alpha
    lam = prof.lam
    r = np.atleast_1d(np.asarray(r, dtype=float))
    xi = r ** lam / (-t)
    out = {key: np.zeros_like(r) for key in ('w', 'z', 'b', 'rw', 'rz', 'rb', 'u', 'c')}
    out['rho'] = np.ones_like(r)
    ext = xi >= 1.0
    if not np.any(ext):
        return out
    re = r[ext]
    xe = xi[ext]
    scale = re ** (1.0 - lam) / lam
    U, C, R = prof.U(xe), prof.C(xe), prof.R(xe)
    dU, dC, dR = prof.derivatives(xe)
    u = scale * U
    c = scale * C
    du = (1.0 - lam) * u / re + dU / (-t)
    dc = (1.0 - lam) * c / re + dC / (-t)
    drho = lam * re ** (lam - 1.0) * dR / (-t)
    b = c * R ** (-a)
    db = R ** (-a) * dc - a * c * R ** (-a - 1.0) * drho
    drv = drv_from_gradients(du + dc / a, du - dc / a, db, R, gas)
    for key, val in (('w', u + c / a), ('z', u - c / a), ('b', b), ('rho', R), ('u', u), ('c', c),
                     ('rw', drv.rw), ('rz', drv.rz), ('rb', drv.rb)):
        out[key][ext] = val
    return out


def save_profile(prof, filename_out, meta=None):
    """ Write xi, U, C, R to CSV with the {gamma, dim, lambda, xi_sonic, residuals} sidecar. """
    from .io.csv_writer import write_table
    side = prof.sidecar()
    side.update(meta or {})
    write_table(filename_out, {'xi': prof.xi_grid, 'U': prof.U_samples, 'C': prof.C_samples,
                               'R': prof.R_samples}, side, column_order=PROFILE_COLUMNS)


def load_profile(filename):
    """ Read a profile written by save_profile. """
    from .io.csv_writer import read_table
    df, meta = read_table(filename, required=PROFILE_COLUMNS)
    gas = GasParams(meta.get('gamma', cfg.DEFAULT_GAMMA), meta.get('dim', cfg.DEFAULT_DIM))
    return SelfSimilarProfile(meta['lambda'], gas, df['xi'].values, df['U'].values, df['C'].values,
                              df['R'].values, xi_sonic=meta.get('xi_sonic'), residuals=meta.get('residuals'))


def build_profile(gas, xi_max=None, n_xi=None):
    """ solve_similarity_exponent followed by integrate_profile. """
    lam = solve_similarity_exponent(gas)
    return integrate_profile(lam, gas, xi_max=xi_max, n_xi=n_xi)
