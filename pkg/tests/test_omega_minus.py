import os
import numpy as np
import pytest

from implosion_lab.omega_minus import (FAMILIES, fan_grid, fan_slice, flow_position, inverse_flow_label,
                                       compare_fans, save_fan, fan_groups, solve_omega_minus, SLICE_COLUMNS)
from implosion_lab.io.csv_writer import read_table
from implosion_lab.errors import OutsideFan
from tests.data import shared_curve, shared_fan, FAN_N


def test_fan_grid():
    curve = shared_curve()
    t = fan_grid(curve, FAN_N)
    assert t[0] == pytest.approx(curve.T_fin) and t[-1] == pytest.approx(curve.T_star)
    assert np.all(np.diff(t) < 0.0)
    tau = np.sqrt(t - curve.T_star)
    assert np.allclose(np.diff(tau), tau[1] - tau[0])


def test_sweeps():
    fan = shared_fan()
    assert fan.sweeps >= 1
    assert len(fan.history) == fan.sweeps
    assert fan.history[-1]['change'] < 1e-8
    for key in ('wzb_bound', 'rho_upper', 'rho_lower', 'drv_bound', 'eta_jacobian_negative',
                'min_distance_to_origin', 'label_separation', 'mass_flux'):
        assert set(fan.monitors[key]) >= {'value', 'limit', 'pass'}
        assert fan.monitors[key]['pass'], key
    assert 'advice' not in fan.monitors


def test_quiescent_core():
    """ Inside (-T_fin)^(1/lam) the state is exactly (u, rho, c) = (0, 1, 0). """
    fan = shared_fan()
    r = np.linspace(0.0, fan.r_core, 50, endpoint=False)
    for i in (0, fan.n // 2, fan.n - 1):
        st = fan.state_at(r, i)
        for name in ('w', 'z', 'b', 'rw', 'rz', 'rb'):
            assert np.all(st[name] == 0.0), name
        assert np.all(st['rho'] == 1.0)


def test_label_boundaries():
    """ Label i leaves the shock at slice i; the core label stays on the core radius. """
    fan = shared_fan()
    idx = np.arange(1, fan.n)
    for fam in FAMILIES:
        assert np.all(fan.pos[fam][idx, idx] == fan.shock['s'][idx])
        assert np.all(fan.pos[fam][0, :] == fan.r_core)
    assert np.all(fan.fields['z'][0, :] == 0.0)


def test_flow_maps():
    fan = shared_fan()
    i = fan.n - 1
    j = fan.n // 3
    r = flow_position(fan, 'eta', fan.t[j], fan.t[i])
    assert r == pytest.approx(fan.pos['eta'][j, i], abs=1e-12)
    label = inverse_flow_label(fan, 'eta', r, fan.t[i])
    assert label == pytest.approx(fan.t[j], abs=1e-9)
    with pytest.raises(OutsideFan):
        flow_position(fan, 'eta', fan.t[j], fan.T_fin + 1.0)
    with pytest.raises(OutsideFan):
        inverse_flow_label(fan, 'eta', 10.0 * fan.shock['s'][i], fan.t[i])


def test_flow_round_trip():
    """ inverse_flow_label undoes flow_position for labels between the grid labels. """
    fan = shared_fan()
    rng = np.random.default_rng(12345)
    slices = rng.integers(fan.n // 4, fan.n - 1, size=1000)
    worst = 0.0
    for i in slices:
        label = rng.uniform(fan.t[i], fan.T_fin)
        r = flow_position(fan, 'eta', label, fan.t[i])
        back = inverse_flow_label(fan, 'eta', r, fan.t[i])
        worst = max(worst, abs(back - label))
    assert worst < 1e-9


def test_entropy_transport():
    """ b is constant along each lambda2 characteristic, which moves with u. """
    fan = shared_fan()
    j = fan.n // 3
    i = np.arange(j, fan.n)
    assert np.all(fan.fields['b'][j, i] == fan.shock['b'][j])
    r = fan.pos['phi'][j, :]
    for k in range(j + 1, fan.n - 2):
        u0 = 0.5 * (fan.field_at('w', r[k], k) + fan.field_at('z', r[k], k))
        u1 = 0.5 * (fan.field_at('w', r[k + 1], k + 1) + fan.field_at('z', r[k + 1], k + 1))
        speed = (r[k + 1] - r[k]) / (fan.t[k + 1] - fan.t[k])
        assert speed == pytest.approx(0.5 * (float(u0) + float(u1)), rel=1e-3, abs=1e-8)


def test_fan_refinement():
    """ The T* slice converges as the label grid is refined. """
    fan = shared_fan()
    curve = shared_curve()
    fine = solve_omega_minus(curve, n=2 * FAN_N - 1)
    finer = solve_omega_minus(curve, n=4 * FAN_N - 3)
    d1 = compare_fans(fan, fine)
    d2 = compare_fans(fine, finer)
    assert d1 < 1e-3
    assert d2 < d1


def test_fan_slice():
    fan = shared_fan()
    sl = fan_slice(fan, fan.T_star)
    assert sl['r'][0] == 0.0
    assert np.all(np.diff(sl['r']) > 0.0)
    core = sl['r'] < fan.r_core
    assert np.all(sl['w'][core] == 0.0) and np.all(sl['rho'][core] == 1.0)
    assert np.all(sl['rho'] > 0.0)


def test_save_fan(tmp_path):
    fan = shared_fan()
    filename = os.path.join(str(tmp_path), 'omega.csv')
    save_fan(fan, filename)
    df, meta = read_table(filename, required=SLICE_COLUMNS)
    assert meta['sweeps'] == fan.sweeps
    assert meta['T_star'] == pytest.approx(fan.T_star)
    assert np.unique(df['t'].values).size == 3
    groups = fan_groups(fan)
    assert groups['r_eta'].shape == (fan.n, fan.n)


if __name__ == "__main__":
    test_sweeps()
    test_quiescent_core()
    test_flow_maps()
