import os
import numpy as np
import pytest

from implosion_lab.guderley import guderley_shock
from implosion_lab.io.run_config import TrajectoryConfig
from implosion_lab import config as cfg
from implosion_lab.shock_path import (build_g, build_curve, curve_grid, guderley_bound, interior_traces,
                                      jump_series, save_curve, load_curve, save_pair, load_pair)
from implosion_lab.errors import InvalidConfig, ConstraintViolated
from tests.data import shared_gas, shared_profile, shared_curve, shared_pair, CURVE_N


def test_trajectory_config():
    tcfg = TrajectoryConfig()
    assert tcfg.delta == pytest.approx(0.05)
    assert tcfg.delta_circ == pytest.approx(0.01)
    assert tcfg.T_star == pytest.approx(-1.05)
    assert tcfg.T_circ == pytest.approx(-1.04)
    for bad in ({'T_fin': 0.5}, {'eps': 1.5}, {'delta': 0.01, 'delta_circ': 0.02}, {'nu': -1.0}, {'m': 0.0}, {'n': 4}):
        with pytest.raises(InvalidConfig):
            TrajectoryConfig(**bad)


def test_curve_grid():
    tcfg = TrajectoryConfig(n=CURVE_N)
    t = curve_grid(tcfg)
    assert t.size == CURVE_N
    assert t[0] == pytest.approx(tcfg.T_star) and t[-1] == pytest.approx(tcfg.T_fin)
    assert np.all(np.diff(t) > 0.0)


def test_g_function():
    gas = shared_gas()
    tcfg = TrajectoryConfig(n=CURVE_N)
    gfun = build_g(tcfg, gas)
    assert gfun.check_quadrature() < 1e-8
    assert abs(float(gfun.value(tcfg.T_fin)) - gas.mu) < 1e-10
    assert abs(float(gfun.value(tcfg.T_star)) - 1.0) < 1e-6
    # g increases toward T*
    assert np.all(np.diff(gfun.g) <= 1e-15)

    # the rate against a central difference
    t = np.array([tcfg.T_star + 0.1 * tcfg.delta, tcfg.T_star + 0.6 * tcfg.delta])
    h = 1e-7
    fd = (gfun.value(t + h) - gfun.value(t - h)) / (2.0 * h)
    assert np.allclose(gfun.rate(t), fd, rtol=1e-5)

    # F(x) = F_inverse^-1, closed form and quadrature agree
    for x in (gas.mu + 0.01, 0.7, 0.99):
        assert gfun.F_quad(x) == pytest.approx(float(gfun.F(x)), rel=1e-8)
        assert float(gfun.F_inverse(gfun.F(x))) == pytest.approx(x, rel=1e-12)


def test_g_near_preshock():
    """ F(g) grows like nu log(1/(t-T*)); 1 - g approaches (t - T*)^eps from below. """
    gas = shared_gas()
    tcfg = TrajectoryConfig(n=CURVE_N)
    gfun = build_g(tcfg, gas)
    t = tcfg.T_star + tcfg.delta * np.logspace(-12, -3, 10)
    dt = t - tcfg.T_star
    Fg = gfun.F(gfun.value(t))
    slope = np.polyfit(np.log(dt), Fg, 1)[0]
    assert abs(slope + gfun.nu) < 1e-6 * gfun.nu

    one_minus_g = 1.0 - gfun.value(t)
    local = np.diff(np.log(one_minus_g)) / np.diff(np.log(dt))
    assert np.all(local > 0.0) and np.all(local < tcfg.eps)
    # local exponent rises toward eps as t -> T*
    assert np.all(np.diff(local) < 0.0)
    ratio = one_minus_g / dt ** tcfg.eps
    assert np.max(ratio) / np.min(ratio) < 5.0

    # far below any representable t - T*: 1 - g(L) against log(t - T*) through L = L_in + nu log((t_in - T*)/tau)
    log_tau = np.log(10.0) * np.linspace(-100.0, -60.0, 9)
    L = gfun.L_in + gfun.nu * (np.log(gfun.t_in - tcfg.T_star) - log_tau)
    far = np.polyfit(log_tau, np.log(1.0 - gfun.F_inverse(L)), 1)[0]
    assert abs(far - tcfg.eps) <= 0.02


def test_g_exponent_fit():
    """ With eps = 0.5 the exponent of 1 - g is already asymptotic at t - T* = 1e-12 ... 1e-8. """
    gas = shared_gas()
    tcfg = TrajectoryConfig(n=CURVE_N, eps=0.5)
    gfun = build_g(tcfg, gas)
    t = tcfg.T_star + np.logspace(-12, -8, 9)
    dt = t - tcfg.T_star
    slope = np.polyfit(np.log(dt), np.log(1.0 - gfun.value(t)), 1)[0]
    assert abs(slope - tcfg.eps) <= 0.02


def test_curve_constraints():
    curve = shared_curve()
    con = curve.constraints
    assert abs(con['hdot_T_fin'] + 1.0) < 1e-9
    assert con['h_minus_neg_t_min'] >= -1e-12
    assert abs(con['g_T_fin'] - shared_gas().mu) < 1e-10
    assert abs(con['g_T_star'] - 1.0) < 1e-6
    assert con['lax_plus_min'] > 0.0
    cal = curve.calibration
    assert cal['m'] >= cfg.GUDERLEY_M_FACTOR
    assert cal['m'] == pytest.approx(guderley_bound(curve.prof, curve.tcfg))
    assert cal['nu_halvings'] == 0
    assert cal['drv'] <= cal['m']


def test_default_curve():
    """ The default trajectory builds; hddot is positive just after T* and never negative. """
    curve = build_curve(shared_profile(), TrajectoryConfig())
    con = curve.constraints
    ev = curve.samples()
    after = ev['t'] > curve.T_star
    scale = np.max(np.abs(ev['hddot'][after]))
    assert con['hddot_min'] >= -1e-8 * scale
    assert ev['hddot'][after][0] > 0.0
    assert con['lax_plus_min'] > 0.0
    assert np.all(np.isfinite(ev['hddot'])) and np.all(np.isfinite(ev['sddot']))
    traces = interior_traces(curve)
    assert np.all(traces['gap1'][after] > 0.0)


def test_nu_halving():
    """ A target m between the DRV bounds at nu and nu/2 forces exactly one halving. """
    prof = shared_profile()
    base = shared_curve()
    nu0 = base.gfun.nu
    half = build_curve(prof, TrajectoryConfig(n=CURVE_N, nu=0.5 * nu0))
    d_full = base.calibration['drv']
    d_half = half.calibration['drv']
    assert d_half < d_full

    tcfg = TrajectoryConfig(n=CURVE_N, m=0.5 * (d_half + d_full))
    curve = build_curve(prof, tcfg)
    cal = curve.calibration
    assert cal['nu_halvings'] == 1
    assert cal['nu'] == pytest.approx(0.5 * nu0)
    assert tcfg.nu == pytest.approx(0.5 * nu0)
    assert cal['m'] == pytest.approx(0.5 * (d_half + d_full))
    assert cal['drv'] == pytest.approx(d_half)

    with pytest.raises(ConstraintViolated):
        build_curve(prof, TrajectoryConfig(n=CURVE_N, m=1e-12), max_halvings=2)


def test_curve_matches_guderley():
    """ At T_fin the shock sits on the Guderley curve with the Guderley speed. """
    curve = shared_curve()
    ev = curve.evaluate(curve.T_fin)
    g, gdot = guderley_shock(curve.T_fin, curve.lam)
    assert abs(ev['s'][0] - float(g)) < 1e-12
    assert abs(ev['sdot'][0] - float(gdot)) < 1e-8


def test_interior_traces():
    """ The interior traces satisfy the jump conditions with the exterior traces. """
    from implosion_lab.rankine_hugoniot import rh_residuals
    from implosion_lab.gas_core import PrimState
    curve = shared_curve()
    gas = curve.gas
    ev = curve.evaluate(curve.t[1:])
    plus = PrimState(ev['u_plus'], ev['rho_plus'], ev['b_plus'])
    minus = PrimState(ev['u_minus'], ev['rho_minus'], ev['b_minus'])
    res = rh_residuals(minus, plus, ev['sdot'], gas)
    for key, val in res.items():
        assert np.max(val) < 1e-10, key
    # interior less dense, all minus-side gaps open before T*
    assert np.all(ev['rho_minus'] < ev['rho_plus'])
    for key in ('gap1', 'gap2', 'gap3'):
        assert np.all(ev[key] > 0.0)


def test_admissible_pair():
    pair = shared_pair()
    rep = pair.report
    assert rep['chi_min_positive'] > 0.0
    for key, val in rep['match_T_circ'].items():
        assert abs(val) < 1e-10, key
    assert float(pair.chi(pair.T_star)[0]) == 0.0
    assert float(pair.ell(pair.T_circ)[0]) == pytest.approx(pair.s_circ, abs=1e-14)

    # Lax gap ~ (t - T*)^(1/2) on the support of phi = 1
    dt = (pair.t_phi - pair.T_star) * np.logspace(-6, -2, 40)
    chi = pair.chi(pair.T_star + dt)
    slope = np.polyfit(np.log(dt), np.log(chi), 1)[0]
    assert abs(slope - 0.5) < 0.02


def test_symmetry_modulation():
    pair = shared_pair()
    mod = pair.report['modulation']
    assert abs(mod['a2_after']) < 1e-3 * abs(mod['a1_after'])
    assert abs(mod['a2_after']) < abs(mod['a2_before'])
    assert mod['slope_measured'] == pytest.approx(mod['slope_expected'], rel=0.1)
    tau, jz, coef = jump_series(pair)
    assert np.all(jz > 0.0)


def test_save_load(tmp_path):
    curve = shared_curve()
    pair = shared_pair()
    curve_csv = os.path.join(str(tmp_path), 'curve.csv')
    pair_csv = os.path.join(str(tmp_path), 'pair.csv')
    save_curve(curve, curve_csv)
    save_pair(pair, pair_csv)
    back = load_curve(curve_csv, curve.prof)
    assert back.T_star == pytest.approx(curve.T_star)
    t = curve.t[::7]
    assert np.allclose(back.h_of(t), curve.h_of(t), rtol=1e-10)
    pair_back = load_pair(pair_csv, back)
    assert pair_back.ell_ddot_star == pytest.approx(pair.ell_ddot_star)
    with pytest.raises(FileNotFoundError):
        load_pair(os.path.join(str(tmp_path), 'missing.csv'), back)


if __name__ == "__main__":
    test_g_function()
    test_curve_constraints()
    test_default_curve()
    test_admissible_pair()
