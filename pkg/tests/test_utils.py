import logging

from implosion_lab import utils
from implosion_lab import config as cfg
from implosion_lab.errors import FitIllConditioned
import numpy as np
import pytest


def test_utils():
    assert utils.closest(np.array([0, 1, 2, 3, 4, 5]), 2.2) == 2
    assert utils.closest([0.5, -1.0, 3.0], -0.9) == 1
    entry = utils.monitor_entry(0.3, 0.5, True, where='somewhere')
    assert entry == {'value': 0.3, 'limit': 0.5, 'pass': True, 'where': 'somewhere'}


def test_smoothstep_and_cutoff():
    assert utils.smoothstep(-1.0) == 0.0
    assert utils.smoothstep(2.0) == 1.0
    assert abs(utils.smoothstep(0.5) - 0.5) < 1e-15
    x = np.linspace(0.0, 1.0, 101)
    assert np.all(np.diff(utils.smoothstep(x)) >= 0.0)
    t = np.array([-2.0, -1.5, -1.2, -1.0])
    c = utils.cutoff(t, -1.6, -1.1)
    assert c[0] == 1.0 and c[-1] == 0.0
    assert 0.0 < c[1] < 1.0 and 0.0 < c[2] < 1.0

    # derivative against central differences
    h = 1e-6
    xs = np.array([0.2, 0.5, 0.8])
    fd = (utils.smoothstep(xs + h) - utils.smoothstep(xs - h)) / (2.0 * h)
    assert np.allclose(utils.smoothstep_derivative(xs), fd, rtol=1e-6, atol=1e-9)


def test_tau_graded_grid():
    t = utils.tau_graded_grid(-1.05, -1.0, 11)
    assert t[0] == -1.05 and t[-1] == -1.0
    tau = np.sqrt(t - t[0])
    assert np.allclose(np.diff(tau), tau[1] - tau[0])
    rev = utils.tau_graded_grid(-1.05, -1.0, 11, reverse=True)
    assert np.allclose(rev, t[::-1])


def test_loglog_fit():
    x = np.logspace(-4, -1, 30)
    slope, pref, stderr = utils.loglog_fit(x, 3.0 * x ** 2)
    assert abs(slope - 2.0) < 1e-10
    assert abs(pref - 3.0) < 1e-8
    assert stderr < 1e-8
    with pytest.raises(FitIllConditioned):
        utils.loglog_fit([1e-3, 1e-2], [1.0, 2.0])


def test_check_fit_span():
    utils.check_fit_span(np.logspace(-6, -2, cfg.MIN_FIT_SAMPLES))
    with pytest.raises(FitIllConditioned):
        utils.check_fit_span(np.logspace(-3, -2, cfg.MIN_FIT_SAMPLES), where='narrow')
    with pytest.raises(FitIllConditioned):
        utils.check_fit_span(np.logspace(-6, -2, 5), where='sparse')


def test_holder_seminorm_smooth():
    """ For a C^1 function the beta = 1 seminorm is the largest slope. """
    r = np.linspace(0.0, 2.0, 2001)
    est = utils.holder_seminorm(r, np.sin(r), 1.0)
    assert 0.99 < est <= 1.0 + 1e-9


def test_holder_seminorm_cusp():
    """ |r|^(1/3) is C^{0,1/3} but not C^{0,beta} for larger beta. """
    coarse = np.linspace(-1.0, 1.0, 2001)
    fine = np.linspace(-1.0, 1.0, 20001)
    at = utils.holder_seminorm(fine, np.abs(fine) ** (1.0 / 3.0), 1.0 / 3.0)
    assert at <= 2.0 ** (2.0 / 3.0) + 1e-6
    above_c = utils.holder_seminorm(coarse, np.abs(coarse) ** (1.0 / 3.0), 1.0 / 3.0 + 0.1)
    above_f = utils.holder_seminorm(fine, np.abs(fine) ** (1.0 / 3.0), 1.0 / 3.0 + 0.1)
    assert above_f > 1.1 * above_c


def test_one_sided_derivative():
    x = np.sort(np.concatenate([np.linspace(0.0, 1.0, 50), [0.013, 0.517]]))
    d = utils.one_sided_derivative(x, x ** 2)
    assert np.allclose(d, 2.0 * x, atol=1e-10)


def test_workers(monkeypatch):
    monkeypatch.setenv(cfg.THREADS_ENV_VAR, '1')
    assert utils.worker_count() == 1
    monkeypatch.setenv(cfg.THREADS_ENV_VAR, 'many')
    assert utils.worker_count() >= 1
    out = utils.map_ordered(lambda k: k * k, range(10), workers=4)
    assert out == [k * k for k in range(10)]
    host = utils.host_report()
    assert host['cpu_count'] >= 1 and host['available_memory_gb'] > 0.0


def test_log_formats():
    record = logging.LogRecord('implosion_lab.forward', logging.DEBUG, __file__, 1, 'step %d', (3,), None)
    for fmt in (cfg.LOG_FORMAT, cfg.LOG_FORMAT_DEBUG):
        line = logging.Formatter(fmt).format(record)
        assert line.split()[-2:] == ['step', '3']
        assert 'implosion_lab.forward' in line
        assert '%' not in line and '(name)' not in line
    debug = logging.Formatter(cfg.LOG_FORMAT_DEBUG).format(record)
    assert debug.split()[0].isdigit()


if __name__ == "__main__":
    test_utils()
    test_loglog_fit()
    test_holder_seminorm_cusp()
