import os
import numpy as np
import pytest

from implosion_lab.gas_core import GasParams, PrimState, DrvState, gradients_from_drv
from implosion_lab.guderley import (boundary_values, sonic_residual, solve_similarity_exponent, profile_rhs,
                                    ProfileParams, guderley_shock, evaluate_state, exterior_fields,
                                    save_profile, load_profile, identity_constant, printed_identity_constant,
                                    build_profile, integrate_profile)
from implosion_lab.rankine_hugoniot import rh_residuals
from implosion_lab.errors import SonicDegenerate, NoBracket, OutOfRange
from tests.data import shared_profile, N_XI


def test_boundary_values():
    U1, C1, R1 = boundary_values(GasParams(1.4, 3))
    assert abs(U1 + 0.833333333333) < 1e-10
    assert abs(R1 - 6.0) < 1e-10
    assert abs(C1 - 0.440958) < 1e-6
    U1, _, R1 = boundary_values(GasParams(5.0 / 3.0, 2))
    assert abs(U1 + 0.75) < 1e-12 and abs(R1 - 4.0) < 1e-12


def test_exponent_spherical():
    prof = shared_profile()
    assert 1.35 < prof.lam < 1.48
    assert sonic_residual(prof.lam, prof.gas) < 1e-5
    assert prof.xi_sonic > 1.0


def test_exponent_cylindrical():
    lam = solve_similarity_exponent(GasParams(1.4, 2))
    assert lam == pytest.approx(1.19714, abs=1e-3)
    # the cylindrical front converges more slowly in r^lam
    assert lam < shared_profile().lam


def test_exponent_values():
    """ Classical exponents; the converged profile lands on the sonic saddle. """
    prof = shared_profile()
    assert prof.lam == pytest.approx(1.39436, abs=1e-4)
    assert prof.residuals['sonic'] < 1e-8

    prof_mono = build_profile(GasParams(5.0 / 3.0, 3), n_xi=N_XI)
    assert prof_mono.lam == pytest.approx(1.45269, abs=1e-3)
    assert prof_mono.residuals['sonic'] < 1e-8
    assert prof_mono.lam > prof.lam


def test_profile_xi_halving():
    """ Halving the xi step: the coarse splines reproduce the fine midpoints. """
    prof = shared_profile()
    fine = integrate_profile(prof.lam, prof.gas, n_xi=2 * N_XI - 1)
    assert np.allclose(fine.xi_grid[::2], prof.xi_grid, rtol=1e-12)
    mid = fine.xi_grid[1::2]
    for name in ('U', 'C', 'R'):
        ref = getattr(fine, name + '_samples')[1::2]
        err = np.max(np.abs(getattr(prof, name)(mid) - ref)) / np.max(np.abs(ref))
        assert err < 1e-6, name


def test_shock_jump_ratios():
    """ The exterior trace at xi = 1 is the strong-shock partner of the quiescent state. """
    for gamma in (1.4, 5.0 / 3.0):
        gas = GasParams(gamma, 3)
        U1, C1, R1 = boundary_values(gas)
        # in units where the shock moves with speed -1
        sdot = -1.0
        assert R1 == pytest.approx((gamma + 1.0) / (gamma - 1.0), rel=1e-14)
        assert U1 / sdot == pytest.approx(2.0 / (gamma + 1.0), rel=1e-14)
        plus = PrimState(U1, R1, C1 * R1 ** (-gas.alpha))
        minus = PrimState(0.0, 1.0, 0.0)
        for key, val in rh_residuals(minus, plus, sdot, gas).items():
            assert float(val) < 1e-12, key


def test_bad_bracket():
    with pytest.raises(NoBracket):
        solve_similarity_exponent(GasParams(1.4, 3), bracket=(1.001, 1.002))


def test_profile_rhs_degenerate():
    params = ProfileParams(1.4, GasParams(1.4, 3))
    with pytest.raises(SonicDegenerate):
        profile_rhs(1.0, 0.0, 1.0, params)


def test_profile_samples():
    prof = shared_profile()
    U1, C1, R1 = boundary_values(prof.gas)
    assert prof.xi_grid[0] == 1.0
    assert abs(float(prof.U(1.0)) - U1) < 1e-12
    assert abs(float(prof.R(1.0)) - R1) < 1e-12
    assert prof.identity_residual() < 1e-8
    assert np.all(prof.C_samples > 0.0)
    assert np.all(prof.R_samples > 0.0)
    # density identity constant against its printed variant
    assert prof.residuals['identity_constant'] == pytest.approx(identity_constant(prof.gas))
    assert identity_constant(prof.gas) != printed_identity_constant(prof.gas)
    with pytest.raises(OutOfRange):
        prof.U(2.0 * prof.xi_max)


def test_guderley_shock():
    lam = shared_profile().lam
    g, gdot = guderley_shock(-1.0, lam)
    assert abs(float(g) - 1.0) < 1e-15
    assert abs(float(gdot) + 1.0 / lam) < 1e-15
    with pytest.raises(OutOfRange):
        guderley_shock(0.0, lam)


def test_evaluate_state():
    prof = shared_profile()
    lam = prof.lam
    U1, C1, R1 = boundary_values(prof.gas)
    inside = evaluate_state(prof, np.array([0.0, 0.3, 0.9]), -1.0)
    assert np.all(inside.u == 0.0) and np.all(inside.rho == 1.0) and np.all(inside.b == 0.0)

    # exterior trace on the shock at t = -1
    plus = evaluate_state(prof, 1.0, -1.0, side='+')
    assert float(plus.u) == pytest.approx(U1 / lam, abs=1e-10)
    assert float(plus.rho) == pytest.approx(R1, abs=1e-10)
    minus = evaluate_state(prof, 1.0, -1.0, side='-')
    assert float(minus.rho) == 1.0

    with pytest.raises(OutOfRange):
        evaluate_state(prof, 1.0, 0.0)


def test_exterior_fields():
    prof = shared_profile()
    a = prof.gas.alpha
    r = np.array([0.5, 1.2, 1.5, 2.0])
    out = exterior_fields(prof, r, -1.0)
    assert out['w'][0] == 0.0 and out['rho'][0] == 1.0
    ext = r > 1.0
    assert np.allclose(out['w'][ext] - out['z'][ext], 2.0 * out['c'][ext] / a)
    assert np.allclose(out['b'][ext], out['c'][ext] * out['rho'][ext] ** (-a))
    st = evaluate_state(prof, r[ext], -1.0)
    assert np.allclose(out['u'][ext], st.u)

    # w_r, z_r, b_r recovered from the DRVs against central differences
    h = 1e-5
    for t in (-1.0, -0.5):
        re = np.array([1.2, 1.5, 2.0, 3.0])
        out = exterior_fields(prof, re, t)
        assert np.all(re ** prof.lam / (-t) > 1.0)
        drv = DrvState(out['rw'], out['rz'], out['rb'])
        dw, dz, db = gradients_from_drv(drv, out['rho'], prof.gas)
        up = exterior_fields(prof, re + h, t)
        um = exterior_fields(prof, re - h, t)
        for key, val in (('w', dw), ('z', dz), ('b', db), ('u', 0.5 * (dw + dz))):
            fd = (up[key] - um[key]) / (2.0 * h)
            assert np.allclose(val, fd, rtol=1e-4, atol=1e-6), key


def test_save_load(tmp_path):
    prof = shared_profile()
    filename = os.path.join(str(tmp_path), 'profile.csv')
    save_profile(prof, filename, meta={'note': 'unit test'})
    back = load_profile(filename)
    assert back.lam == prof.lam
    assert back.gas.gamma == prof.gas.gamma and back.gas.dim == prof.gas.dim
    xi = np.array([1.0, 3.0, 50.0])
    assert np.allclose(back.C(xi), prof.C(xi), rtol=1e-12)


if __name__ == "__main__":
    test_boundary_values()
    test_exponent_spherical()
    test_evaluate_state()
