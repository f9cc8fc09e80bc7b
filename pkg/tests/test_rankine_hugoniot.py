from implosion_lab.gas_core import GasParams
from implosion_lab.rankine_hugoniot import (ShockSideStates, prim_from_rup, rh_partner_state, invert_rh,
                                            rh_residuals, rhop_roots, check_lax, jump_expansions,
                                            jumps_from_gaps, taylor_jumps, admissible_ratio_intervals)
from implosion_lab.errors import PreconditionViolated
import numpy as np
import pytest

GAS = GasParams(1.4, 3)


def _plus(u=0.5, sdot=-0.3):
    """ rho+ = 1, c+ = 1, v+ = u - sdot. """
    return prim_from_rup(u, 1.0, 1.0 / 1.4, GAS), sdot


def test_cold_gas_partner():
    """ A cold exterior gives the strong-shock interior state. """
    v, rho, p = rh_partner_state(1.0, 1.0, 0.0, GAS)
    assert abs(v - 0.2 / 1.2) < 1e-12
    assert abs(rho - 6.0) < 1e-12
    assert abs(p - 1.0 / 1.2) < 1e-12


def test_zero_strength_fixed_point():
    v, rho, p = rh_partner_state(1.0, 1.0, 1.0 / 1.4, GAS)
    assert abs(v - 1.0) < 1e-14 and abs(rho - 1.0) < 1e-14 and abs(p - 1.0 / 1.4) < 1e-14


def test_partner_involution():
    v, rho, p = 0.8, 1.3, 0.6
    twice = rh_partner_state(*rh_partner_state(v, rho, p, GAS), GAS)
    assert np.allclose(twice, (v, rho, p), rtol=1e-13)


def test_strong_shock_ratio():
    rho_ratio = [rh_partner_state(1.0, 1.0, p, GAS)[1] for p in (1e-2, 1e-4, 1e-6)]
    assert np.all(np.diff(np.abs(np.array(rho_ratio) - 6.0)) < 0.0)
    assert abs(rho_ratio[-1] - 6.0) < 1e-4


def test_invert_rh_roundtrip():
    """ Conservation holds to round-off for random admissible exterior states. """
    rng = np.random.RandomState(12345)
    worst = 0.0
    for _ in range(10000):
        rho = rng.uniform(0.5, 8.0)
        c = rng.uniform(0.2, 3.0)
        p = rho * c * c / GAS.gamma
        g = rng.uniform(GAS.mu + 1e-3, 1.0 - 1e-3)
        u = rng.uniform(-2.0, 2.0)
        plus = prim_from_rup(u, rho, p, GAS)
        sdot = u - g * c
        minus = invert_rh(plus, sdot, GAS)
        res = rh_residuals(minus, plus, sdot, GAS)
        worst = max(worst, max(float(np.max(v)) for v in res.values()))
    assert worst < 1e-12


def test_rejected_root():
    """ The density equation has the exterior density as its second root. """
    v, rho, p = 0.8, 1.0, 1.0 / 1.4
    roots = rhop_roots(v, rho, p, GAS)
    assert len(roots) == 2
    assert min(abs(r - rho) for r in roots) < 1e-10
    partner = rh_partner_state(v, rho, p, GAS)[1]
    assert min(abs(r - partner) for r in roots) < 1e-10


def test_preconditions():
    plus, _ = _plus()
    with pytest.raises(PreconditionViolated):
        invert_rh(plus, 0.6, GAS)          # u+ > sdot fails
    with pytest.raises(PreconditionViolated):
        invert_rh(plus, -0.6, GAS)         # supersonic exterior


def test_lax_strict():
    plus, sdot = _plus()
    minus = invert_rh(plus, sdot, GAS)
    rep = check_lax(ShockSideStates(plus, minus, sdot), GAS)
    assert rep['all_strict']
    assert rep['g_admissible']
    for key, ok in rep['ratios_in_interval'].items():
        assert ok, key


def test_lax_zero_strength():
    plus, _ = _plus()
    sdot = float(plus.u - plus.c(GAS))
    rep = check_lax(ShockSideStates(plus, plus, sdot), GAS)
    assert not rep['all_strict']
    assert rep['inequalities']['sdot_above_lambda1_plus']['equal']
    assert rep['inequalities']['lambda1_minus_above_sdot']['equal']


def test_ratio_intervals():
    iv = admissible_ratio_intervals(GAS)
    lo, hi = iv['ratio1']
    assert lo <= 1.0 <= hi


def test_taylor_example():
    """ x1 = -0.01, x2 = 1: [[z]] ~ -4 x1/1.2 + 4 x1^2/1.2. """
    tz, _, _ = taylor_jumps(-0.01, 1.0, GAS)
    assert abs(tz - 0.0336667) < 1e-6
    jz, _, _ = jumps_from_gaps(-0.01, 1.0, GAS)
    assert abs(jz - tz) < 1e-4


def test_weak_shock_exponents():
    """ [[z]] + 4 chi/(1+alpha) ~ chi^2, [[w]] and [[S]] ~ chi^3. """
    x1 = -np.logspace(-4, -2, 9)
    jz, jw, jS = [], [], []
    for x in x1:
        plus = prim_from_rup(0.0, 1.0, 1.0 / 1.4, GAS)
        a, b, c, rep = jump_expansions(plus, -1.0 - x, GAS)
        assert abs(rep['x1'] - x) < 1e-12
        jz.append(a + 4.0 * x / 1.2)
        jw.append(b)
        jS.append(c)
    for vals, expected in ((jz, 2.0), (jw, 3.0), (jS, 3.0)):
        slope = np.polyfit(np.log(-x1), np.log(np.abs(vals)), 1)[0]
        assert abs(slope - expected) < 0.05, (expected, slope)


def test_jumps_vanish():
    jz, jw, jS = jumps_from_gaps(-1e-9, 1.0, GAS)
    assert abs(jz) < 1e-8 and abs(jw) < 1e-12 and abs(jS) < 1e-12


if __name__ == "__main__":
    test_cold_gas_partner()
    test_invert_rh_roundtrip()
    test_weak_shock_exponents()
