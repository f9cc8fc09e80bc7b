import os
import numpy as np
import pytest

from implosion_lab.goursat import (PreshockProfile, cusp_fit, fit_subdominant, density_or_unit, row_interp,
                                   picard_weights, weighted_change, save_preshock, load_preshock,
                                   solve_goursat_D, solve_interior_L, jump_exponents, FIELDS)
from implosion_lab.errors import FitIllConditioned
from tests.data import shared_gas, shared_pair

R_STAR = 0.5


def synthetic_cusp(a=3.0, b=0.5, z_star=2.0, n=60):
    """ z = z* + a (r-r*)^(1/3) + b |r-r*|^(2/3), w and b linear in r. """
    d = np.geomspace(1e-6, 1e-2, n)
    sides = {}
    for name, sign in (('minus', -1.0), ('plus', 1.0)):
        r = R_STAR + sign * d
        sides[name] = {'r': r, 'z': z_star + sign * a * d ** (1.0 / 3.0) + b * d ** (2.0 / 3.0),
                       'w': 1.0 + 2.0 * (r - R_STAR), 'b': 0.8 - 0.1 * (r - R_STAR)}
    centre = {'w': 1.0, 'z': z_star, 'b': 0.8}
    return PreshockProfile(R_STAR, sides['minus'], sides['plus'], centre, gas=shared_gas(), T_star=-1.05)


def test_cusp_fit_recovers_coefficients():
    prof = synthetic_cusp()
    fit = cusp_fit(prof)
    assert fit['a'] == pytest.approx(3.0, abs=1e-3)
    assert fit['b1'] == pytest.approx(0.5, abs=1e-3)
    assert fit['b2'] == pytest.approx(0.5, abs=1e-3)
    assert fit['asymmetry'] < 1e-3
    for side in ('minus', 'plus'):
        assert fit['beta'][side]['value'] == pytest.approx(1.0 / 3.0, abs=0.02)
    assert prof.fits['cusp'] is fit


def test_cusp_fit_asymmetric():
    prof = synthetic_cusp()
    prof.sides['minus']['z'] = prof.sides['minus']['z'] + 0.2 * prof.distance('minus') ** (2.0 / 3.0)
    fit = cusp_fit(prof)
    assert fit['b2'] == pytest.approx(0.7, abs=1e-3)
    assert fit['asymmetry'] == pytest.approx(0.4, abs=1e-2)


def test_cusp_fit_needs_span():
    prof = synthetic_cusp(n=20)
    with pytest.raises(FitIllConditioned):
        cusp_fit(prof)


def test_subdominant_fit():
    fit = fit_subdominant(synthetic_cusp())
    assert fit['w']['c'] == pytest.approx(2.0, abs=1e-8)
    assert fit['w']['slope_mismatch'] < 1e-8
    assert fit['b']['c'] == pytest.approx(-0.1, abs=1e-8)


def test_preshock_profile():
    prof = synthetic_cusp()
    lo, hi = prof.coverage()
    assert lo == pytest.approx(R_STAR - 1e-2) and hi == pytest.approx(R_STAR + 1e-2)
    assert prof.z_star == 2.0
    r = prof.sides['plus']['r'][:5]
    assert np.allclose(prof.evaluate(r)['z'], prof.sides['plus']['z'][:5], rtol=1e-12)
    assert float(prof.evaluate(R_STAR)['z']) == pytest.approx(2.0, abs=1e-14)
    # z is smooth in zeta = sgn(d)|d|^(1/3)
    assert np.allclose(prof.zeta([R_STAR + 8e-3, R_STAR - 8e-3]), [0.2, -0.2])
    assert np.allclose(prof.derivative('w', [R_STAR - 1e-3, R_STAR + 1e-3]), 2.0, atol=1e-8)


def test_save_load_preshock(tmp_path):
    prof = synthetic_cusp()
    cusp_fit(prof)
    filename = os.path.join(str(tmp_path), 'preshock.csv')
    save_preshock(prof, filename)
    back = load_preshock(filename, gas=shared_gas())
    assert back.r_star == R_STAR and back.T_star == -1.05
    assert back.fits['cusp']['a'] == pytest.approx(3.0, abs=1e-3)
    assert np.allclose(np.sort(back.sides['plus']['r']), np.sort(prof.sides['plus']['r']))


def test_density_or_unit():
    gas = shared_gas()
    rho = density_or_unit(np.array([10.0, 1.0]), np.array([0.0, 1.0]), np.array([1.0, 0.0]), gas)
    # sigma = 5, b = 1: rho = (0.2 * 5)^5
    assert rho[0] == pytest.approx(1.0)
    assert rho[1] == 1.0


def test_row_interp():
    f, lo, hi = row_interp([0.3, np.nan, 0.1, 0.2, 0.4], [3.0, 9.0, 1.0, 2.0, np.nan])
    assert (lo, hi) == (0.1, 0.3)
    assert np.allclose(f([0.0, 0.15, 0.5]), [1.0, 1.5, 3.0])


def test_picard_norm():
    c1, c2 = picard_weights(0.01, 0.1)
    assert c2 == pytest.approx(0.01 ** 0.1 / 10.0)
    assert c1 == pytest.approx(c2 * c2)
    old = {name: np.zeros((4, 4)) for name in FIELDS}
    new = {name: np.zeros((4, 4)) for name in FIELDS}
    new['z'][0, 0] = 1.0
    assert weighted_change(new, old, c1, c2) == 0.0
    new['rw'][2, 1] = 1.0
    new['Jrz'][3, 1] = -2.0
    assert weighted_change(new, old, c1, c2) == pytest.approx(c2 + 2.0 * c1)


def test_goursat_patches():
    pair = shared_pair()
    field_D = solve_goursat_D(pair, n=48)
    assert field_D.iterations <= 40
    edge = field_D.shock_edge()
    assert np.allclose(edge['psi'], pair.ell(field_D.t), atol=1e-14)
    assert field_D.monitors['J_edge_positive']['pass']
    # the edge carries the prescribed lambda1 trace
    lam1 = 0.5 * (1.0 + pair.gas.alpha) * edge['z'] + 0.5 * (1.0 - pair.gas.alpha) * edge['w']
    assert np.allclose(lam1, pair.lambda1_plus(field_D.t), atol=1e-12)

    field_L = solve_interior_L(field_D, pair, n=48)
    assert field_L.monitors['J_edge_negative']['pass']
    flat = field_L.report['T_flat']
    assert flat['delta_flat'] > 0.0
    # exterior and interior edges meet at the preshock with zero jump
    assert field_L.edge['z'][0] == pytest.approx(edge['z'][0], abs=1e-10)

    jumps = jump_exponents(field_D, field_L)
    assert set(jumps) == {'z', 'w', 'S', 'window'}
    assert jumps['window'] == pytest.approx(0.5 * (field_D.T_top - field_D.T_star))


if __name__ == "__main__":
    test_cusp_fit_recovers_coefficients()
    test_preshock_profile()
    test_goursat_patches()
