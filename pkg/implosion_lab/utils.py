"""
# utils.py
helper functions shared by the stages: grids, cutoffs, fits, Hölder estimates and the worker pool
"""
import os
import logging
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import psutil
from scipy import stats

from . import config as cfg
from .errors import FitIllConditioned

logger = logging.getLogger(__name__)

level_log = logging.INFO

if level_log == logging.INFO:
    stream = sys.stdout
    lformat = cfg.LOG_FORMAT
else:
    stream = sys.stderr
    lformat = cfg.LOG_FORMAT_DEBUG

logging.basicConfig(format=lformat, stream=stream, level=level_log)

# Convenient for memory figures in run reports
GIGA = 1024 ** 3


def closest(xarr, val):
    """ Return the index of the closest in xarr to value val """
    idx_closest = np.argmin(np.abs(np.array(xarr) - val))
    return idx_closest


def worker_count():
    """ Number of workers: min(IMPLOSION_LAB_THREADS, cpu count); all cores when unset. """
    ncpu = psutil.cpu_count() or 1
    env = os.environ.get(cfg.THREADS_ENV_VAR)
    if env is None or env.strip() == '':
        return ncpu
    try:
        cap = int(env)
    except ValueError:
        logger.warning('worker_count: ignoring non-integer {}={!r}'.format(cfg.THREADS_ENV_VAR, env))
        return ncpu
    return max(1, min(cap, ncpu))


def host_report():
    """ CPU and memory figures recorded in the run report. """
    vm = psutil.virtual_memory()
    return {'cpu_count': psutil.cpu_count(),
            'workers': worker_count(),
            'available_memory_gb': vm.available / GIGA}


def map_ordered(func, items, workers=None):
    """ Apply func to every item with a thread pool; results come back in input order. """
    items = list(items)
    workers = worker_count() if workers is None else workers
    if workers <= 1 or len(items) < 2:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items))


def smoothstep(x):
    r''' C-infinity step: 0 for x <= 0, 1 for x >= 1, exp(-1/x) blend in between. '''
    x0 = np.asarray(x, dtype=float)
    x = np.atleast_1d(x0)
    out = np.where(x >= 1.0, 1.0, 0.0)
    inside = (x > 0.0) & (x < 1.0)
    xi = x[inside]
    fa = np.exp(-1.0 / xi)
    fb = np.exp(-1.0 / (1.0 - xi))
    out[inside] = fa / (fa + fb)
    return out.reshape(x0.shape) if x0.ndim else float(out[0])


def smoothstep_derivative(x):
    x0 = np.asarray(x, dtype=float)
    x = np.atleast_1d(x0)
    out = np.zeros_like(x)
    inside = (x > 0.0) & (x < 1.0)
    xi = x[inside]
    fa = np.exp(-1.0 / xi)
    fb = np.exp(-1.0 / (1.0 - xi))
    out[inside] = fa * fb * (1.0 / xi ** 2 + 1.0 / (1.0 - xi) ** 2) / (fa + fb) ** 2
    return out.reshape(x0.shape) if x0.ndim else float(out[0])


def cutoff(t, t_inner, t_outer):
    """ C-infinity cutoff equal to 1 for t <= t_inner and 0 for t >= t_outer. """
    return 1.0 - smoothstep((np.asarray(t, dtype=float) - t_inner) / (t_outer - t_inner))


def cutoff_derivative(t, t_inner, t_outer):
    width = t_outer - t_inner
    return -smoothstep_derivative((np.asarray(t, dtype=float) - t_inner) / width) / width


def tau_graded_grid(t_lo, t_hi, n, reverse=False):
    """ n nodes on [t_lo, t_hi] uniform in tau = (t - t_lo)^(1/2). """
    tau = np.linspace(0.0, np.sqrt(t_hi - t_lo), n)
    t = t_lo + tau ** 2
    t[-1] = t_hi
    return t[::-1].copy() if reverse else t


def loglog_fit(x, y, min_samples=None):
    """ Least-squares slope of log|y| against log|x|.

    Returns:
        (slope, prefactor, stderr)
    """
    x = np.abs(np.asarray(x, dtype=float))
    y = np.abs(np.asarray(y, dtype=float))
    keep = (x > 0.0) & (y > 0.0) & np.isfinite(y)
    min_samples = 3 if min_samples is None else min_samples
    if keep.sum() < min_samples:
        logger.error('loglog_fit: only {} usable samples'.format(keep.sum()))
        raise FitIllConditioned('loglog_fit: only {} usable samples, need {}'.format(keep.sum(), min_samples))
    res = stats.linregress(np.log(x[keep]), np.log(y[keep]))
    return res.slope, np.exp(res.intercept), res.stderr


def holder_seminorm(r, f, beta, per_decade=None, h_min=None, h_max=None):
    r''' Dyadic estimate of the C^{0,beta} seminorm of samples f(r).

    max over log-spaced pair distances h of sup_r |f(r+h) - f(r)| / h^beta,
    with f(r+h) linearly interpolated on the sorted samples.
    '''
    per_decade = cfg.HOLDER_PER_DECADE if per_decade is None else per_decade
    r = np.asarray(r, dtype=float)
    f = np.asarray(f, dtype=float)
    order = np.argsort(r)
    r = r[order]
    f = f[order]
    dr = np.diff(r)
    h_min = np.min(dr[dr > 0]) if h_min is None else h_min
    h_max = 0.5 * (r[-1] - r[0]) if h_max is None else h_max
    ndec = max(np.log10(h_max / h_min), 0.0)
    hs = np.logspace(np.log10(h_min), np.log10(h_max), max(int(np.ceil(ndec * per_decade)), 2))
    best = 0.0
    for h in hs:
        sel = r + h <= r[-1]
        if not np.any(sel):
            continue
        shifted = np.interp(r[sel] + h, r, f)
        best = max(best, np.max(np.abs(shifted - f[sel])) / h ** beta)
    return best


def one_sided_derivative(x, f):
    """ Second-order finite-difference derivative on a non-uniform grid. """
    return np.gradient(np.asarray(f, dtype=float), np.asarray(x, dtype=float), edge_order=2)


def check_fit_span(dist, min_samples=None, min_decades=None, where=''):
    """ Raise FitIllConditioned unless dist has enough samples spanning enough decades. """
    min_samples = cfg.MIN_FIT_SAMPLES if min_samples is None else min_samples
    min_decades = cfg.MIN_FIT_DECADES if min_decades is None else min_decades
    dist = np.abs(np.asarray(dist, dtype=float))
    dist = dist[dist > 0.0]
    if dist.size < min_samples:
        logger.error('{}: {} samples, need {}'.format(where, dist.size, min_samples))
        raise FitIllConditioned('{}: {} samples, need {}'.format(where, dist.size, min_samples))
    span = np.log10(dist.max() / dist.min())
    if span < min_decades - 1e-9:
        logger.error('{}: samples span {:.2f} decades, need {}'.format(where, span, min_decades))
        raise FitIllConditioned('{}: samples span {:.2f} decades, need {}'.format(where, span, min_decades))


def monitor_entry(value, limit, ok, where=None):
    """ One monitor record: measured value, its limit and the pass flag. """
    out = {'value': float(value), 'limit': float(limit), 'pass': bool(ok)}
    if where is not None:
        out['where'] = where
    return out
