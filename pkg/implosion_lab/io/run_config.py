r''' run_config.py - the run configuration: JSON file merged over the package defaults.

Schema (every key optional):

    {
      "gamma": 1.4, "dim": 3,
      "T_fin": -1.0, "eps": 0.1, "delta": 0.05, "delta_circ": 0.01, "nu": null, "m": null,
      "grid": {"n": 400, "refine": true},
      "xi_max": 1000.0,
      "fan": {"n": 160, "max_sweeps": 12, "tol": 1e-8, "interp": "pchip", "strict": false},
      "goursat": {"n": 96, "max_iter": 40, "tol": 1e-10},
      "regularize": {"nx": 121, "ns": 80, "theta": null, "delta_star": null, "max_iter": 30},
      "forward": {"nr": 800, "cfl": 0.8, "capturing": false, "refine": true, "twin": false, "slices": 4},
      "global": {"nr": 1200, "blend_cells": 3},
      "output_dir": ".", "seed": 12345
    }

A null delta, delta_circ, nu or m falls back to the derived default.
'''

import copy
import json
import hashlib
import logging

import numpy as np

from implosion_lab import config as cfg
from implosion_lab.errors import InvalidConfig
from implosion_lab.gas_core import GasParams

logger = logging.getLogger(__name__)


DEFAULTS = {
    'gamma': cfg.DEFAULT_GAMMA,
    'dim': cfg.DEFAULT_DIM,
    'T_fin': cfg.DEFAULT_T_FIN,
    'eps': cfg.DEFAULT_EPS,
    'delta': None,
    'delta_circ': None,
    'nu': None,
    'm': None,
    'grid': {'n': cfg.CURVE_N, 'refine': cfg.CURVE_REFINE},
    'xi_max': cfg.XI_MAX,
    'fan': {'n': cfg.FAN_N, 'max_sweeps': cfg.FAN_MAX_SWEEPS, 'tol': cfg.FAN_TOL,
            'interp': 'pchip', 'strict': False},
    'goursat': {'n': cfg.GOURSAT_N, 'max_iter': cfg.PICARD_MAX_ITER, 'tol': cfg.PICARD_TOL},
    'regularize': {'nx': cfg.REG_NX, 'ns': cfg.REG_NS, 'theta': None, 'delta_star': None,
                   'max_iter': cfg.REG_MAX_ITER},
    'forward': {'nr': cfg.FWD_NR, 'cfl': cfg.FWD_CFL, 'capturing': False, 'refine': True,
                'twin': False, 'slices': cfg.FWD_SLICES},
    'global': {'nr': cfg.GLOBAL_NR, 'blend_cells': cfg.SPLICE_BLEND_CELLS},
    'output_dir': '.',
    'seed': 12345,
}


def _merge(base, over, path=''):
    out = copy.deepcopy(base)
    for key, value in over.items():
        if key not in base:
            logger.error('run config: unknown key {}{}'.format(path, key))
            raise InvalidConfig('unknown key {}{}'.format(path, key))
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise InvalidConfig('{}{} must be an object'.format(path, key))
            out[key] = _merge(base[key], value, path + key + '.')
        else:
            out[key] = value
    return out


class TrajectoryConfig(object):
    """ Parameters of the shock trajectory: T_fin, eps, delta, delta_circ, nu, m and the cutoffs.

    T* = T_fin - delta and T_circ = T* + delta_circ.  kappa = (-T_fin)^((1-lam)/lam)
    is attached once the similarity exponent is known (see with_lambda).
    """

    def __init__(self, T_fin=cfg.DEFAULT_T_FIN, eps=cfg.DEFAULT_EPS, delta=None, delta_circ=None,
                 nu=None, m=None, n=cfg.CURVE_N, refine=cfg.CURVE_REFINE,
                 cutoff_inner=cfg.CUTOFF_INNER, cutoff_outer=cfg.CUTOFF_OUTER,
                 pair_support=cfg.PAIR_SUPPORT):
        self.T_fin = float(T_fin)
        self.eps = float(eps)
        self.delta = cfg.DEFAULT_DELTA_FRAC * abs(self.T_fin) if delta is None else float(delta)
        self.delta_circ = cfg.DEFAULT_DELTA_CIRC_FRAC * self.delta if delta_circ is None else float(delta_circ)
        self.nu = nu
        self.m = m
        self.n = int(n)
        self.refine = bool(refine)
        self.cutoff_inner = cutoff_inner
        self.cutoff_outer = cutoff_outer
        self.pair_support = pair_support
        self.kappa = None
        self.validate()

    def validate(self):
        if not self.T_fin < 0.0:
            raise InvalidConfig('T_fin must be negative, got {}'.format(self.T_fin))
        if not 0.0 < self.eps < 1.0:
            raise InvalidConfig('eps must lie in (0, 1), got {}'.format(self.eps))
        if not self.delta > 0.0 or not self.delta_circ > 0.0:
            raise InvalidConfig('delta and delta_circ must be positive')
        if not self.delta_circ < self.delta:
            raise InvalidConfig('delta_circ must be smaller than delta')
        if self.nu is not None and not self.nu > 0.0:
            raise InvalidConfig('nu must be positive, got {}'.format(self.nu))
        if self.m is not None and not self.m > 0.0:
            raise InvalidConfig('m must be positive, got {}'.format(self.m))
        if self.n < 8:
            raise InvalidConfig('grid.n must be at least 8, got {}'.format(self.n))
        if not 0.0 < self.cutoff_inner < self.cutoff_outer < 1.0:
            raise InvalidConfig('cutoff fractions must satisfy 0 < inner < outer < 1')

    @property
    def T_star(self):
        return self.T_fin - self.delta

    @property
    def T_circ(self):
        return self.T_star + self.delta_circ

    def with_lambda(self, lam):
        self.kappa = (-self.T_fin) ** ((1.0 - lam) / lam)
        return self

    def rate_nu(self, gas):
        """ nu, defaulting to eps/sqrt(gamma - alpha) so that 1 - g ~ (t - T*)^eps. """
        if self.nu is not None:
            return float(self.nu)
        return self.eps / np.sqrt(gas.gamma - gas.alpha)

    def as_dict(self):
        return {'T_fin': self.T_fin, 'eps': self.eps, 'delta': self.delta,
                'delta_circ': self.delta_circ, 'nu': self.nu, 'm': self.m,
                'grid': {'n': self.n, 'refine': self.refine}}


class RunConfig(object):
    """ Validated run configuration.

    Args:
        raw (dict): configuration, merged over DEFAULTS
    """

    def __init__(self, raw=None):
        self.raw = _merge(DEFAULTS, {} if raw is None else raw)
        r = self.raw
        self.gas = GasParams(r['gamma'], r['dim'])
        if not 1.0 < self.gas.gamma <= 3.0:
            raise InvalidConfig('gamma outside (1, 3]: {}'.format(self.gas.gamma))
        self.trajectory = TrajectoryConfig(r['T_fin'], r['eps'], r['delta'], r['delta_circ'], r['nu'],
                                           n=r['grid']['n'], refine=r['grid']['refine'], m=r['m'])
        self.xi_max = float(r['xi_max'])
        self.fan = r['fan']
        self.goursat = r['goursat']
        self.regularize = r['regularize']
        self.forward = r['forward']
        self.global_ = r['global']
        self.output_dir = r['output_dir']
        self.seed = int(r['seed'])
        self.validate()

    def validate(self):
        r = self.raw
        if not self.xi_max > 1.0:
            raise InvalidConfig('xi_max must exceed 1')
        for section, key in (('fan', 'tol'), ('goursat', 'tol')):
            if not r[section][key] > 0.0:
                raise InvalidConfig('{}.{} must be positive'.format(section, key))
        for section, key in (('fan', 'n'), ('goursat', 'n'), ('regularize', 'nx'), ('regularize', 'ns'),
                             ('forward', 'nr'), ('global', 'nr')):
            if int(r[section][key]) < 8:
                raise InvalidConfig('{}.{} must be at least 8'.format(section, key))
        if r['fan']['interp'] not in ('pchip', 'linear'):
            raise InvalidConfig('fan.interp must be pchip or linear')
        if not 0.0 < r['forward']['cfl'] <= 1.0:
            raise InvalidConfig('forward.cfl must lie in (0, 1]')

    @classmethod
    def from_file(cls, filename):
        with open(filename, 'r') as fh:
            try:
                raw = json.load(fh)
            except ValueError as exc:
                logger.error('run config: {} is not valid JSON'.format(filename))
                raise InvalidConfig('{} is not valid JSON: {}'.format(filename, exc))
        return cls(raw)

    @property
    def config_hash(self):
        """ Stable SHA-256 of the merged configuration. """
        text = json.dumps(self.raw, sort_keys=True, separators=(',', ':'))
        return hashlib.sha256(text.encode('utf-8')).hexdigest()

    def tolerances(self):
        return {'profile_rtol': cfg.PROFILE_RTOL, 'lambda_xtol': cfg.LAMBDA_XTOL,
                'curve_rtol': cfg.CURVE_RTOL, 'fan_tol': self.fan['tol'],
                'picard_tol': self.goursat['tol'], 'reg_tol': cfg.REG_TOL}

    def sidecar(self, **extra):
        """ Metadata common to every product of this run. """
        meta = {'config_hash': self.config_hash, 'tolerances': self.tolerances(),
                'gamma': self.gas.gamma, 'dim': self.gas.dim}
        meta.update(extra)
        return meta
