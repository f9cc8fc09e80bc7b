import os
import numpy as np
import pytest

from implosion_lab.goursat import cusp_fit
from implosion_lab.regularize import (synthetic_preshock, init_chart_and_data, solve_backward_B, measure_regularity,
                                      save_initial_data, save_chart, chart_groups, INITIAL_DATA_COLUMNS,
                                      CHART_COLUMNS)
from implosion_lab.io.csv_writer import read_table
from implosion_lab.errors import CoverageGap, InvalidConfig

NX = 61
NS = 30


def test_synthetic_preshock():
    """ The cusp fit recovers the coefficients the synthetic data was built with. """
    prof = synthetic_preshock()
    fit = cusp_fit(prof)
    assert fit['a'] == pytest.approx(-0.3, abs=1e-4)
    assert fit['b1'] == pytest.approx(0.05, abs=1e-4)
    assert fit['b2'] == pytest.approx(0.05, abs=1e-4)
    assert fit['beta']['plus']['value'] == pytest.approx(1.0 / 3.0, abs=0.02)


def test_terminal_slice():
    prof = synthetic_preshock()
    chart = init_chart_and_data(prof, nx=NX - 1)
    assert chart.nx == NX
    assert chart.p == pytest.approx(3.0)
    assert chart.theta == pytest.approx(0.1 / 8.0)
    x = chart.x
    assert x[chart.centre] == 0.0
    term = chart.terminal
    assert np.allclose(term['J'], x * x)
    assert np.allclose(term['psi'], prof.r_star + x ** 3 / 3.0)

    # z is a quadratic in x once composed with the chart
    coef = np.polyfit(x, term['z'], 2)
    assert coef[1] == pytest.approx(-0.3 / 3.0 ** (1.0 / 3.0), rel=1e-3)
    assert coef[0] == pytest.approx(0.05 / 3.0 ** (2.0 / 3.0), rel=1e-2)
    assert chart.ns == 1 and chart.s[0] == prof.T_star


def test_chart_exponent():
    for beta, p in ((0.25, 4.0), (0.5, 2.0)):
        chart = init_chart_and_data(synthetic_preshock(beta=beta), nx=NX)
        assert chart.p == pytest.approx(p)
        assert np.allclose(chart.terminal['J'], np.abs(chart.x) ** (p - 1.0))


def test_chart_errors():
    prof = synthetic_preshock()
    with pytest.raises(CoverageGap):
        init_chart_and_data(prof, theta=1.0, nx=NX)
    with pytest.raises(InvalidConfig):
        init_chart_and_data(prof, theta=-0.01, nx=NX)
    with pytest.raises(InvalidConfig):
        init_chart_and_data(synthetic_preshock(T_star=None), nx=NX)


def test_backward_chart(tmp_path):
    chart = init_chart_and_data(synthetic_preshock(), nx=NX)
    solve_backward_B(chart, ns=NS)
    assert chart.ns == NS
    assert chart.T_in < chart.T_star
    assert chart.report['delta_star']['value'] == pytest.approx(chart.delta_star)
    # the chart opens: J > 0 on every node below T*
    J = chart.nodes['J'][1:][chart.mask[1:]]
    assert np.all(J > 0.0)
    assert np.all(chart.axis()[1:] > 0.0)
    for key in ('jacobian_positive', 'J_axis_rate', 'drv_time_derivative_bound', 'weight_comparability',
                'cubic_separation', 'contraction_ratio'):
        assert set(chart.monitors[key]) >= {'value', 'limit', 'pass'}
    assert chart.monitors['jacobian_positive']['pass']
    for beta in (1, 2):
        ups = chart.weights.upsilon[beta]
        assert ups[chart.centre] == pytest.approx(chart.T_star)

    cols, report = measure_regularity(chart)
    assert report['s_eval'] == chart.T_in
    assert np.all(np.diff(cols['r']) > 0.0)
    assert report['jacobian_min'] > 0.0
    assert set(report['holder_seminorms']) == {'dw', 'dz', 'db'}
    assert report['exponent_fits']['d2w_eta_expected'] == pytest.approx(1.0 / 3.0 - 1.0)

    filename = os.path.join(str(tmp_path), 'initial.csv')
    save_initial_data(cols, report, filename)
    df, meta = read_table(filename, required=INITIAL_DATA_COLUMNS)
    assert len(df) == cols['r'].size
    assert meta['regularity']['beta'] == pytest.approx(1.0 / 3.0)

    filename = os.path.join(str(tmp_path), 'chart.csv')
    save_chart(chart, filename)
    df, meta = read_table(filename, required=CHART_COLUMNS)
    assert len(df) == int(chart.mask.sum())
    assert meta['chart']['ns'] == NS
    assert chart_groups(chart)['weight_2'].shape == (NS, NX)


if __name__ == "__main__":
    test_synthetic_preshock()
    test_terminal_slice()
    test_backward_chart('.')
