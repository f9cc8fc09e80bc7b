from implosion_lab.gas_core import (GasParams, PrimState, RiemannState, riemann_from_primitive,
                                    primitive_from_riemann, wave_speeds, eos_pressure, quiescent_state,
                                    drv_from_gradients, gradients_from_drv, characteristic_sources,
                                    density_from_sigma, drv_sources, lambda1_gradient)
from implosion_lab.errors import NonPositiveDensity, InvalidConfig
import numpy as np
import pytest


def test_gas_params():
    gas = GasParams(1.4, 3)
    assert abs(gas.alpha - 0.2) < 1e-15
    assert abs(gas.mu - np.sqrt(0.2 / 1.4)) < 1e-15
    assert gas.as_dict() == {'gamma': 1.4, 'dim': 3}
    with pytest.raises(InvalidConfig):
        GasParams(1.0, 3)
    with pytest.raises(InvalidConfig):
        GasParams(1.4, 1)


def test_riemann_variables():
    """ sigma = rho^alpha b / alpha and w, z = u +- sigma. """
    gas = GasParams(1.4, 3)
    st = PrimState(0.25, 6.0, 1.0)
    rs = riemann_from_primitive(st, gas)
    sigma = 6.0 ** 0.2 / 0.2
    assert abs(rs.w - (0.25 + sigma)) < 1e-12
    assert abs(rs.z - (0.25 - sigma)) < 1e-12
    back = primitive_from_riemann(RiemannState(rs.w, rs.z, rs.b), gas)
    assert abs(back.rho - 6.0) < 1e-10
    assert abs(back.u - 0.25) < 1e-14


def test_pressure():
    gas = GasParams(1.4, 3)
    assert abs(eos_pressure(6.0, 1.0, gas) - 6.0 ** 1.4 / 1.4) < 1e-12
    with pytest.raises(NonPositiveDensity):
        eos_pressure(0.0, 1.0, gas)
    with pytest.raises(NonPositiveDensity):
        PrimState(0.0, -1.0, 1.0)


def test_quiescent():
    gas = GasParams(5.0 / 3.0, 2)
    st = quiescent_state()
    rs = riemann_from_primitive(st, gas)
    assert rs.w == 0.0 and rs.z == 0.0
    assert st.p(gas) == 0.0
    assert st.S is None
    # b = 0 without a known density falls back to rho = 1
    back = primitive_from_riemann(RiemannState(0.0, 0.0, 0.0), gas)
    assert back.rho == 1.0


def test_wave_speeds():
    """ lambda1,2,3 = u - c, u, u + c written in w and z. """
    gas = GasParams(1.4, 3)
    st = PrimState(np.array([-0.3, 0.0, 0.7]), np.array([1.0, 2.0, 6.0]), np.array([0.5, 1.0, 2.0]))
    rs = riemann_from_primitive(st, gas)
    l1, l2, l3 = wave_speeds(rs, gas)
    c = st.c(gas)
    assert np.allclose(l1, st.u - c)
    assert np.allclose(l2, st.u)
    assert np.allclose(l3, st.u + c)


def test_drv_roundtrip():
    gas = GasParams(1.4, 3)
    rho = np.array([1.0, 3.0])
    drv = drv_from_gradients(np.array([0.1, -2.0]), np.array([1.5, 0.3]), np.array([0.2, -0.4]), rho, gas)
    dw, dz, db = gradients_from_drv(drv, rho, gas)
    assert np.allclose(dw, [0.1, -2.0]) and np.allclose(dz, [1.5, 0.3]) and np.allclose(db, [0.2, -0.4])


def test_sources():
    """ Geometric sources vanish in 1-D form and for w = +-z; entropy is transported. """
    gas = GasParams(1.4, 3)
    src_z, src_w, src_b = characteristic_sources(2.0, 2.0, 1.0, 1.0, 0.0, 0.5, gas)
    assert src_z == 0.0 and src_w == 0.0 and src_b == 0.0
    src_z, src_w, _ = characteristic_sources(2.0, 1.0, 1.0, 1.0, 0.0, 0.5, gas)
    assert abs(src_z - 0.2 * 2 * 3.0 / 2.0) < 1e-14
    assert abs(src_z + src_w) < 1e-14


def test_density_from_sigma():
    gas = GasParams(1.4, 3)
    st = PrimState(0.0, 2.5, 0.7)
    assert abs(density_from_sigma(st.sigma(gas), 0.7, gas) - 2.5) < 1e-12


def test_energy():
    gas = GasParams(1.4, 3)
    st = PrimState(0.5, 2.0, 1.0)
    p = eos_pressure(2.0, 1.0, gas)
    assert abs(st.internal_energy(gas) - p / 0.4) < 1e-12
    E = st.total_energy(gas)
    assert abs((gas.gamma - 1.0) * (E - 0.5 * 2.0 * 0.25) - p) < 1e-12


def test_lambda1_gradient():
    """ The DRV form of d(lambda1)/dr agrees with the gradients of w and z. """
    gas = GasParams(1.4, 3)
    rho = np.array([1.0, 2.0, 6.0])
    dw = np.array([0.3, -1.0, 2.0])
    dz = np.array([-0.7, 0.4, 1.1])
    db = np.array([0.5, -0.2, 0.9])
    drv = drv_from_gradients(dw, dz, db, rho, gas)
    exact = 0.6 * dz + 0.4 * dw
    assert np.allclose(lambda1_gradient(rho, drv.rw, drv.rz, drv.rb, gas), exact, rtol=1e-13)


def test_drv_sources():
    gas = GasParams(1.4, 3)
    w, z, r = 2.0, 1.0, 0.5
    # vanishing DRVs leave only the 1/r^2 geometric term
    src_rz, src_rw, src_rb = drv_sources(w, z, 1.0, 0.0, 0.0, 0.0, r, gas)
    geo = 0.2 * 2 * (w * w - z * z) / (4.0 * r * r)
    assert abs(src_rz + geo) < 1e-14 and abs(src_rw - geo) < 1e-14 and src_rb == 0.0
    _, _, src_rb = drv_sources(w, z, 1.0, 1.0, 3.0, 2.0, r, gas)
    assert abs(src_rb + 4.0) < 1e-14


if __name__ == "__main__":
    test_riemann_variables()
    test_pressure()
    test_wave_speeds()
