import os
import numpy as np
import pytest

from implosion_lab.gas_core import GasParams, eos_pressure
from implosion_lab.forward import (ForwardRun, shock_speed, quiescent_boundary, resample, radial_grid, save_forward,
                                   SLICE_COLUMNS, _hllc_flux, _conserved)
from implosion_lab.rankine_hugoniot import rh_partner_state, prim_from_rup
from implosion_lab.io.csv_writer import read_table
from implosion_lab.errors import ForwardBlowup
from tests.data import shared_gas, shared_profile

# a compressive z front: lambda1 = 0.6 z + 0.4 w, max -d(lambda1)/dr = 0.15
T_CROSS = 1.0 / 0.15


def tanh_front(nr=801):
    r = np.linspace(980.0, 1020.0, nr)
    fields = {'w': np.full_like(r, 2.0), 'z': -0.5 * (1.0 + np.tanh((r - 1000.0) / 2.0)), 'b': np.ones_like(r)}
    return r, fields


def test_shock_speed():
    gas = shared_gas()
    u, rho, b = 0.0, 1.0, 1.0
    sd = -1.5
    p = float(eos_pressure(rho, b, gas))
    v_o, rho_o, p_o = rh_partner_state(u - sd, rho, p, gas)
    plus = prim_from_rup(v_o + sd, rho_o, p_o, gas)
    z_in = float(plus.u - plus.sigma(gas))
    found, partner, bracketed = shock_speed((u, rho, b), z_in, gas)
    assert bracketed
    assert found == pytest.approx(sd, abs=1e-8)
    assert float(partner.rho) == pytest.approx(float(rho_o), rel=1e-8)
    assert float(partner.rho) > rho


def test_shock_speed_zero_strength():
    """ A partner with the interior's own z is the sonic zero-strength shock. """
    gas = shared_gas()
    z_minus = 0.0 - 1.0 / gas.alpha
    sd, partner, _ = shock_speed((0.0, 1.0, 1.0), z_minus, gas)
    assert sd == pytest.approx(-1.0, abs=1e-6)
    assert float(partner.rho) == pytest.approx(1.0, abs=1e-5)


def test_crossing_detection():
    """ The shock is inserted within three steps of the first lambda1 crossing. """
    r, fields = tanh_front()
    run = ForwardRun(r, fields, 0.0, shared_gas(), boundary=quiescent_boundary)
    run.run(T_CROSS + 0.05)
    assert run.shock is not None
    assert abs(run.t_detect - T_CROSS) <= 3.0 * run.dt_detect
    # the crossing label starts at z = -0.5, lambda1 = 0.5
    assert run.r_detect == pytest.approx(1000.0 + 0.5 * T_CROSS, abs=0.5)
    assert len(run.track) >= 1
    assert np.all(np.isfinite(run.f['z']))


def test_crossing_estimate_kept():
    """ The crossing estimate is tracked from the first step and never moves later. """
    r, fields = tanh_front()
    run = ForwardRun(r, fields, 0.0, shared_gas(), boundary=quiescent_boundary)
    run.run(0.25 * T_CROSS)
    assert run.shock is None
    assert run.t_cross == pytest.approx(T_CROSS, rel=0.05)
    # an earlier estimate wins over the data's later one
    early = 0.5 * T_CROSS
    run.t_cross = early
    run.run(early + 0.1)
    assert run.shock is not None
    assert abs(run.t_detect - early) <= run.dt_detect
    assert run.t_cross == pytest.approx(early)


def test_smooth_before_crossing():
    r, fields = tanh_front()
    run = ForwardRun(r, fields, 0.0, shared_gas(), boundary=quiescent_boundary)
    slices = run.run(0.5 * T_CROSS, record=[0.25 * T_CROSS])
    assert run.shock is None
    assert len(slices) == 1
    assert slices[0]['t'][0] == pytest.approx(0.25 * T_CROSS)
    assert np.all(slices[0]['side'] == 'smooth')
    # w - z stays positive
    assert np.all(run.f['w'] > run.f['z'])


def test_backward_with_shock():
    r, fields = tanh_front()
    run = ForwardRun(r, fields, 0.0, shared_gas())
    run.shock = {'s': 1000.0, 'sdot': 0.5, 'minus': {}, 'plus': {}}
    with pytest.raises(ForwardBlowup):
        run.run(-1.0)


def test_resample():
    r = np.linspace(0.0, 2.0, 9)
    initial = {'r': np.array([0.0, 1.0]), 'w': np.array([1.0, 3.0]), 'z': np.array([0.0, -1.0]),
               'b': np.array([1.0, 1.0])}
    out = resample(initial, r, quiescent_boundary, -1.0)
    inside = r <= 1.0
    assert np.allclose(out['w'][inside], 1.0 + 2.0 * r[inside])
    assert np.all(out['w'][~inside] == 0.0) and np.all(out['b'][~inside] == 0.0)


def test_radial_grid():
    prof = shared_profile()
    r = radial_grid(prof, -1.0, 101, 3.0)
    assert r[0] == pytest.approx(0.5) and r[-1] == 3.0
    assert np.allclose(np.diff(r), 0.025)


def test_hllc_consistency():
    """ F(U, U) is the physical flux. """
    gas = GasParams(1.4, 3)
    u = np.array([0.5, -0.2])
    rho = np.array([1.0, 2.0])
    b = np.array([1.0, 0.7])
    U = _conserved(u, rho, b, gas)
    F, smax = _hllc_flux(U, U, gas)
    p = eos_pressure(rho, b, gas)
    exact = np.array([rho * u, rho * u * u + p, (U[2] + p) * u])
    assert np.allclose(F, exact, rtol=1e-12, atol=1e-14)
    assert smax > 0.0


def test_save_forward(tmp_path):
    r, fields = tanh_front(nr=201)
    run = ForwardRun(r, fields, 0.0, shared_gas())
    slices = run.run(1.0, record=[0.5, 1.0])
    filename = os.path.join(str(tmp_path), 'forward.csv')
    save_forward({'note': 'smooth'}, slices, filename)
    df, meta = read_table(filename, required=SLICE_COLUMNS)
    assert len(df) == 2 * r.size
    assert meta['forward']['note'] == 'smooth'
    empty = os.path.join(str(tmp_path), 'empty.csv')
    save_forward({}, [], empty)
    df, _ = read_table(empty)
    assert len(df) == 0


if __name__ == "__main__":
    test_shock_speed()
    test_crossing_detection()
    test_crossing_estimate_kept()
