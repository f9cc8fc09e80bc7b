r''' pipeline.py - the backward construction end to end and the command line.

    implosion-lab pipeline --config run.json

runs profile -> shockpath -> omega-minus -> goursat -> regularize, splices the
regional fields into time slices at T_fin, T_circ, T* and T_in, and checks the
construction with an independent forward solve from T_in to T_fin.  Every stage
is also available as a subcommand of its own; ``report`` prints the monitors of
an aggregated report.
'''

import os
import sys
import time
import json
import logging
import argparse

import numpy as np
import pandas as pd

from . import config as cfg
from . import utils
from .errors import ImplosionLabError, StageFailure
from .gas_core import GasParams, PrimState
from .guderley import build_profile, save_profile, load_profile, evaluate_state, guderley_shock
from .rankine_hugoniot import invert_rh, check_lax, jump_expansions, prim_from_rup, rh_residuals, ShockSideStates
from .shock_path import build_curve, admissible_pair, modulate_symmetry, save_curve, load_curve, save_pair, load_pair
from .omega_minus import solve_omega_minus, save_fan, compare_fans, fan_groups
from .goursat import (solve_goursat_D, solve_interior_L, extract_preshock_profile, cusp_fit, jump_exponents,
                      save_patch, save_preshock, load_preshock, load_inflow, patch_groups, density_or_unit,
                      row_interp)
from .regularize import (init_chart_and_data, solve_backward_B, measure_regularity, save_initial_data, save_chart,
                         chart_groups)
from .forward import ForwardRun, forward_verify, twin_run, save_forward, guderley_boundary, resample
from .io.csv_writer import write_table, read_table, write_json, read_json, dumps
from .io.hdf_writer import write_fields
from .io.run_config import RunConfig

logger = logging.getLogger(__name__)

level_log = logging.INFO

if level_log == logging.INFO:
    stream = sys.stdout
    lformat = cfg.LOG_FORMAT
else:
    stream = sys.stderr
    lformat = cfg.LOG_FORMAT_DEBUG

logging.basicConfig(format=lformat, stream=stream, level=level_log)

REGIONS = ('quiescent', 'omega_minus', 'patch', 'chart', 'evolved', 'guderley', 'forward')
GLOBAL_COLUMNS = ['slice', 't', 'r', 'u', 'rho', 'c', 'b', 'region']
INITIAL_COLUMNS = ['r', 'w', 'z', 'b']
# errors a stage can surface besides the package's own
STAGE_ERRORS = (ImplosionLabError, ValueError, ArithmeticError, KeyError)


def primitives(w, z, b, gas, rho=None):
    """ (u, rho, c) from Riemann variables; rho from sigma and b unless given. """
    w = np.asarray(w, dtype=float)
    z = np.asarray(z, dtype=float)
    rho = density_or_unit(w, z, b, gas) if rho is None else np.asarray(rho, dtype=float)
    return 0.5 * (w + z), rho, gas.alpha * 0.5 * (w - z)


def _tag(u, rho, b, default):
    quiet = (np.abs(u) <= 1e-14) & (np.abs(rho - 1.0) <= 1e-14) & (np.abs(b) <= 1e-14)
    return np.where(quiet, 'quiescent', default).astype(object)


def _seam(a, b):
    """ Relative gap of two states {w, z, b} (or primitive) at one seam. """
    return max(float(np.max(np.abs(np.asarray(a[k]) - np.asarray(b[k])) / (1.0 + np.abs(np.asarray(b[k])))))
               for k in a)


class GlobalSolution(object):
    """ Time slices of the constructed flow.

    Each slice holds r, u, rho, c, b and a region tag per sample, the shock
    radius (None on a smooth slice) and its seams.  Regions: quiescent core,
    omega_minus (interior fan), patch (Goursat patches), chart (regularized
    data), evolved (smooth backward evolution), guderley (unmodified exterior)
    and forward (verification solve).
    """

    def __init__(self, gas, T_fin=None, T_circ=None, T_star=None, T_in=None):
        self.gas = gas
        self.times = {'T_fin': T_fin, 'T_circ': T_circ, 'T_star': T_star, 'T_in': T_in}
        self.slices = {}
        self.shock = {}
        self.seams = {}
        self.report = {}

    def add_slice(self, name, t, r, u, rho, c, b, region, shock=None):
        r = np.asarray(r, dtype=float)
        order = np.argsort(r, kind='mergesort')
        cols = {'r': r[order]}
        for key, val in (('u', u), ('rho', rho), ('c', c), ('b', b)):
            cols[key] = np.asarray(val, dtype=float)[order]
        cols['region'] = np.asarray(region, dtype=object)[order]
        cols['t'] = float(t)
        self.slices[name] = cols
        self.shock[name] = shock

    def names(self):
        """ Slice names in time order. """
        return sorted(self.slices, key=lambda key: self.slices[key]['t'])

    def quiescent_core_error(self, r_core, fraction=0.95):
        """ max |(u, rho - 1, c)| below fraction * r_core over every slice. """
        worst = 0.0
        for sl in self.slices.values():
            inside = sl['r'] < fraction * r_core
            if np.any(inside):
                worst = max(worst, float(np.max(np.abs(sl['u'][inside]))),
                            float(np.max(np.abs(sl['rho'][inside] - 1.0))), float(np.max(np.abs(sl['c'][inside]))))
        return worst

    def to_columns(self):
        parts = []
        for name in self.names():
            sl = self.slices[name]
            n = sl['r'].size
            part = {'slice': np.full(n, name, dtype=object), 't': np.full(n, sl['t'])}
            for key in ('r', 'u', 'rho', 'c', 'b', 'region'):
                part[key] = sl[key]
            parts.append(part)
        return {key: np.concatenate([p[key] for p in parts]) for key in GLOBAL_COLUMNS}

    def groups(self):
        """ One HDF5 group per slice; region tags as codes into REGIONS. """
        out = {}
        for name in self.names():
            sl = self.slices[name]
            codes = np.array([REGIONS.index(tag) for tag in sl['region']], dtype=np.int8)
            shock = self.shock[name]
            out[name] = {'r': sl['r'], 'u': sl['u'], 'rho': sl['rho'], 'c': sl['c'], 'b': sl['b'],
                         'region': codes, 't': sl['t'], 'shock': np.nan if shock is None else float(shock)}
        return out


def write_global_solution(sol, filename_out, attrs=None):
    """ HDF5 dump of a GlobalSolution, one group per slice. """
    meta = {'regions': ','.join(REGIONS)}
    for key, value in (attrs or {}).items():
        meta[key] = value if isinstance(value, (str, int, float)) else json.dumps(value, default=str)
    write_fields(filename_out, sol.groups(), meta)


def guderley_slice(prof, t, r):
    """ Primitive Guderley state on r at t, quiescent inside the Guderley shock. """
    gas = prof.gas
    st = evaluate_state(prof, np.asarray(r, dtype=float), t)
    u = np.asarray(st.u, dtype=float)
    rho = np.asarray(st.rho, dtype=float)
    b = np.asarray(st.b, dtype=float)
    return {'u': u, 'rho': rho, 'c': rho ** gas.alpha * b, 'b': b, 'region': _tag(u, rho, b, 'guderley')}


def fan_state(fan, t, r):
    """ Primitive interior state of the fan on r at its slice closest to t; returns (state, slice time). """
    i = int(utils.closest(fan.t, t))
    st = fan.state_at(np.asarray(r, dtype=float), i)
    u, rho, c = primitives(st['w'], st['z'], st['b'], fan.gas, rho=st['rho'])
    b = np.asarray(st['b'], dtype=float)
    return {'w': st['w'], 'z': st['z'], 'u': u, 'rho': rho, 'c': c, 'b': b,
            'region': _tag(u, rho, b, 'omega_minus')}, float(fan.t[i])


def _traces_rh(curve, t):
    """ Relative RH residual of the curve's interior and Guderley traces at t. """
    ev = curve.evaluate(t)
    minus = PrimState(ev['u_minus'][0], ev['rho_minus'][0], ev['b_minus'][0])
    plus = PrimState(ev['u_plus'][0], ev['rho_plus'][0], ev['b_plus'][0])
    res = rh_residuals(minus, plus, ev['sdot'][0], curve.gas)
    return float(max(np.max(v) for v in res.values())), float(ev['s'][0])


def shocked_slice(sol, name, fan, curve, prof, t, r):
    """ Interior fan inside the shock s(t), Guderley outside. """
    state, t_fan = fan_state(fan, t, r)
    rh, s = _traces_rh(curve, t_fan)
    ext = guderley_slice(prof, t_fan, r)
    inside = r < s
    out = {key: np.where(inside, state[key], ext[key]) for key in ('u', 'rho', 'c', 'b')}
    region = np.where(inside, state['region'], ext['region']).astype(object)
    sol.add_slice(name, t_fan, r, out['u'], out['rho'], out['c'], out['b'], region, shock=s)
    sol.seams[name] = {'rh_residual': rh}
    return t_fan


def preshock_slice(sol, fan, profile, prof, r):
    """ T* slice: fan below the interior patch, the preshock samples around r*, Guderley beyond. """
    gas = prof.gas
    T_star = profile.T_star
    lo, hi = profile.coverage()
    near = profile.to_columns()
    r_far = r[(r < lo) | (r > hi)]
    inner = r_far[r_far < lo]
    outer = r_far[r_far > hi]
    fan_part, _ = fan_state(fan, T_star, inner)
    ext_part = guderley_slice(prof, T_star, outer)
    centre = profile.centre
    w = np.concatenate([near['w'], [centre['w']]])
    z = np.concatenate([near['z'], [centre['z']]])
    b = np.concatenate([near['b'], [centre['b']]])
    u, rho, c = primitives(w, z, b, gas)
    rr = np.concatenate([inner, near['r'], [profile.r_star], outer])
    cols = {}
    for key, mid in (('u', u), ('rho', rho), ('c', c), ('b', b)):
        cols[key] = np.concatenate([fan_part[key], np.asarray(mid, dtype=float), ext_part[key]])
    region = np.concatenate([fan_part['region'], np.full(b.size, 'patch', dtype=object), ext_part['region']])
    sol.add_slice('T_star', T_star, rr, cols['u'], cols['rho'], cols['c'], cols['b'], region, shock=profile.r_star)

    # seams against the neighbouring regions at the coverage edges
    seams = {}
    edge_lo, _ = fan_state(fan, T_star, np.array([lo]))
    near_lo = profile.evaluate(np.array([lo]))
    seams['fan_patch'] = _seam({k: edge_lo[k] for k in ('w', 'z', 'b')}, near_lo)
    ext_hi = evaluate_state(prof, np.array([hi]), T_star)
    near_hi = profile.evaluate(np.array([hi]))
    sig = np.asarray(ext_hi.sigma(gas), dtype=float)
    seams['patch_guderley'] = _seam({'w': ext_hi.u + sig, 'z': ext_hi.u - sig, 'b': ext_hi.b}, near_hi)
    sol.seams['T_star'] = seams
    return riemann_columns(rr, cols, gas)


def riemann_columns(r, prim, gas):
    """ (r, w, z, b) from a primitive slice. """
    sigma = np.asarray(prim['c'], dtype=float) / gas.alpha
    u = np.asarray(prim['u'], dtype=float)
    return {'r': np.asarray(r, dtype=float), 'w': u + sigma, 'z': u - sigma, 'b': np.asarray(prim['b'], dtype=float)}


def splice(r, base, patch, blend_cells=None):
    r''' Put the patch (r, w, z, b) over the base fields on the uniform grid r.

    Inside the patch range the patch is used; over blend_cells cells at each
    end the two are blended linearly.  The seam is the largest relative gap
    between patch and base in the blend zones.

    Returns:
        (fields dict, inside mask, seam)
    '''
    blend_cells = cfg.SPLICE_BLEND_CELLS if blend_cells is None else blend_cells
    dr = r[1] - r[0]
    p_lo, p_hi = float(np.min(patch['r'])), float(np.max(patch['r']))
    inside = (r >= p_lo) & (r <= p_hi)
    width = blend_cells * dr
    ramp = np.clip(np.minimum(r - p_lo, p_hi - r) / width, 0.0, 1.0)
    out = {}
    seam = 0.0
    zone = inside & (ramp < 1.0)
    for name in ('w', 'z', 'b'):
        f, _, _ = row_interp(patch['r'], patch[name])
        pv = f(r[inside])
        vals = np.asarray(base[name], dtype=float).copy()
        bv = vals[inside]
        vals[inside] = ramp[inside] * pv + (1.0 - ramp[inside]) * bv
        out[name] = vals
        if np.any(zone[inside]):
            gap = np.abs(pv - bv)[zone[inside]] / (1.0 + np.abs(bv[zone[inside]]))
            seam = max(seam, float(np.max(gap)))
    return out, inside, seam


def initial_slice(sol, t_star_cols, chart_cols, prof, T_star, T_in, r_max, nr=None, blend_cells=None):
    """ T_in slice: the T* slice evolved backward on a uniform grid with the regularized data spliced in.

    Returns:
        dict r, w, z, b of the spliced slice on the evolution grid
    """
    gas = prof.gas
    nr = cfg.GLOBAL_NR if nr is None else nr
    r_core = (-sol.times['T_fin']) ** (1.0 / prof.lam)
    r = np.linspace(0.5 * r_core, r_max, nr)
    boundary = guderley_boundary(prof)
    run = ForwardRun(r, resample(t_star_cols, r, boundary, T_star), T_star, gas, boundary=boundary)
    run.run(T_in, detect=False)
    fields, inside, seam = splice(r, run.f, chart_cols, blend_cells)
    u, rho, c = primitives(fields['w'], fields['z'], fields['b'], gas)
    default = np.where(inside, 'chart', 'evolved')
    region = _tag(u, rho, fields['b'], default)
    core = np.linspace(0.0, 0.5 * r_core, 16, endpoint=False)
    zeros = np.zeros_like(core)
    sol.add_slice('T_in', T_in, np.concatenate([core, r]), np.concatenate([zeros, u]),
                  np.concatenate([zeros + 1.0, rho]), np.concatenate([zeros, c]),
                  np.concatenate([zeros, fields['b']]),
                  np.concatenate([np.full(core.size, 'quiescent', dtype=object), region]))
    sol.seams['T_in'] = {'chart_evolved': seam, 'backward_steps': run.steps}
    out = {'r': r}
    out.update(fields)
    return out


def _run_stage(name, timing, func, *args, **kwargs):
    t0 = time.time()
    try:
        out = func(*args, **kwargs)
    except STAGE_ERRORS as err:
        logger.error('pipeline: stage {} failed: {}'.format(name, err))
        raise StageFailure(name, err) from err
    timing[name] = time.time() - t0
    return out


def _shockpath_monitors(curve, pair):
    c = curve.constraints
    mon = {
        'h_geq_neg_t': utils.monitor_entry(c['h_minus_neg_t_min'], 0.0, c['h_minus_neg_t_min'] >= -1e-12),
        'hdot_T_fin': utils.monitor_entry(abs(c['hdot_T_fin'] + 1.0), cfg.H_DOT_TOL,
                                          abs(c['hdot_T_fin'] + 1.0) <= cfg.H_DOT_TOL),
        'g_T_star': utils.monitor_entry(abs(c['g_T_star'] - 1.0), 1e-9, abs(c['g_T_star'] - 1.0) <= 1e-9),
        'lax_plus_gap': utils.monitor_entry(c['lax_plus_min'], 0.0, c['lax_plus_min'] > 0.0),
        'chi_positive': utils.monitor_entry(pair.report['chi_min_positive'], 0.0,
                                            pair.report['chi_min_positive'] > 0.0),
        'ell_ddot_bound': utils.monitor_entry(pair.report['ell_ddot_max'], pair.report['ell_ddot_limit'],
                                              pair.report['ell_ddot_within_limit']),
    }
    return mon


def _forward_monitors(rep):
    fine = rep['runs'][-1]
    mon = {
        'detect_within_3dt': utils.monitor_entry(fine['detect_error_steps'], 3.0, fine['detect_error_steps'] <= 3.0),
        'shock_radius_1pct': utils.monitor_entry(fine['shock_radius_error'], 0.01,
                                                 fine['shock_radius_error'] <= 0.01),
        'lax_admissible': utils.monitor_entry(fine['lax']['ratios']['ratio1'], 0.0, fine['lax']['all_strict']),
    }
    if 'discrepancy_decreasing' in rep:
        order = rep.get('refinement_order')
        mon['refinement_decreasing'] = utils.monitor_entry(0.0 if order is None else order, 0.0,
                                                           rep['discrepancy_decreasing'])
    if 'twin' in rep:
        worst = max(p['sup'] for p in rep['twin'])
        mon['twin_consistency'] = utils.monitor_entry(worst, 1e-5, worst <= 1e-5)
    return mon


def run_pipeline(rc, out_dir=None):
    r''' The backward construction T_fin -> T* -> T_in and the forward check.

    Args:
        rc (RunConfig): validated configuration
        out_dir (str): directory for the data products; nothing is written when None

    Returns:
        (GlobalSolution, report dict)

    Raises:
        StageFailure naming the stage whose error ended the run
    '''
    t0 = time.time()
    gas = rc.gas
    tcfg = rc.trajectory
    timing = {}
    meta = rc.sidecar()
    if out_dir is not None and not os.path.isdir(out_dir):
        os.makedirs(out_dir)

    def path(name):
        return os.path.join(out_dir, name)

    prof = _run_stage('profile', timing, build_profile, gas, xi_max=rc.xi_max)

    def shockpath():
        curve = build_curve(prof, tcfg)
        pair = modulate_symmetry(admissible_pair(curve))
        return curve, pair
    curve, pair = _run_stage('shockpath', timing, shockpath)
    bounds = curve.calibration

    fc = rc.fan
    fan = _run_stage('omega-minus', timing, solve_omega_minus, curve, n=fc['n'], max_sweeps=fc['max_sweeps'],
                     tol=fc['tol'], interp=fc['interp'], strict=fc['strict'], bounds=bounds)

    gc = rc.goursat

    def goursat():
        field_D = solve_goursat_D(pair, n=gc['n'], max_iter=gc['max_iter'], tol=gc['tol'], bounds=bounds,
                                  strict=fc['strict'])
        field_L = solve_interior_L(field_D, pair, n=gc['n'], max_iter=gc['max_iter'], tol=gc['tol'], fan=fan,
                                   bounds=bounds, strict=fc['strict'])
        preshock = extract_preshock_profile(field_D, field_L)
        cusp_fit(preshock)
        preshock.report['jump_exponents'] = jump_exponents(field_D, field_L)
        return field_D, field_L, preshock
    field_D, field_L, preshock = _run_stage('goursat', timing, goursat)

    rg = rc.regularize

    def regularize():
        chart = init_chart_and_data(preshock, theta=rg['theta'], nx=rg['nx'])
        solve_backward_B(chart, delta_star=rg['delta_star'], ns=rg['ns'], max_iter=rg['max_iter'],
                         m=bounds.get('m'), strict=fc['strict'])
        cols, regularity = measure_regularity(chart)
        return chart, cols, regularity
    chart, init_cols, regularity = _run_stage('regularize', timing, regularize)

    T_fin, T_circ, T_star, T_in = curve.T_fin, curve.T_circ, curve.T_star, chart.T_in
    r_max = cfg.FWD_R_MAX_FACTOR * preshock.r_star
    sol = GlobalSolution(gas, T_fin, T_circ, T_star, T_in)
    nr_glob = rc.global_['nr']

    def assemble():
        r = np.linspace(0.0, r_max, nr_glob)
        g = guderley_slice(prof, T_fin, r)
        sol.add_slice('T_fin', T_fin, r, g['u'], g['rho'], g['c'], g['b'], g['region'],
                      shock=float(guderley_shock(T_fin, prof.lam)[0]))
        sol.seams['T_fin'] = {'rh_residual': _traces_rh(curve, T_fin)[0]}
        shocked_slice(sol, 'T_circ', fan, curve, prof, T_circ, r)
        star_cols = preshock_slice(sol, fan, preshock, prof, r)
        initial = initial_slice(sol, star_cols, init_cols, prof, T_star, T_in, r_max, nr=nr_glob,
                                blend_cells=rc.global_['blend_cells'])
        return initial
    initial = _run_stage('splice', timing, assemble)

    fw = rc.forward
    record = list(np.linspace(T_in, T_fin, fw['slices'] + 2)[1:-1])

    def verify():
        rep, slices = forward_verify(initial, prof, T_in, T_star, T_fin, nr=fw['nr'], cfl=fw['cfl'], r_max=r_max,
                                     capturing=fw['capturing'], refine=fw['refine'], record=record)
        if fw['twin']:
            rep['twin'] = twin_run(initial, prof, T_in, [T_star, 0.5 * (T_star + T_circ), T_circ], nr=fw['nr'])
            fan_lin = solve_omega_minus(curve, n=fc['n'], max_sweeps=fc['max_sweeps'], tol=fc['tol'],
                                        interp='linear', bounds=bounds)
            rep['twin_fan'] = compare_fans(fan, fan_lin)
        return rep, slices
    fwd_report, fwd_slices = _run_stage('forward-verify', timing, verify)
    for k, sl in enumerate(fwd_slices):
        region = np.where(_tag(sl['u'], sl['rho'], sl['b'], 'forward') == 'quiescent', 'quiescent', 'forward')
        shock = None if sl['shock'] is None else sl['shock']['s']
        sol.add_slice('forward_{}'.format(k), sl['t'][0], sl['r'], sl['u'], sl['rho'], sl['c'], sl['b'],
                      region.astype(object), shock=shock)

    r_core = (-T_fin) ** (1.0 / prof.lam)
    core = sol.quiescent_core_error(r_core)
    rh_worst = max(sol.seams[name]['rh_residual'] for name in ('T_fin', 'T_circ'))
    lax = fwd_report['runs'][-1]['lax']
    if lax is not None:
        rh_worst = max(rh_worst, lax['rh_residual'])
    seam = max(max(sol.seams['T_star'].values()), sol.seams['T_in']['chart_evolved'])
    global_mon = {
        'quiescent_core': utils.monitor_entry(core, 1e-10, core <= 1e-10, where='r < 0.95 (-T_fin)^(1/lambda)'),
        'rh_slices': utils.monitor_entry(rh_worst, cfg.RH_SLICE_TOL, rh_worst <= cfg.RH_SLICE_TOL),
        'seam_continuity': utils.monitor_entry(seam, cfg.SPLICE_TOL, seam <= cfg.SPLICE_TOL),
    }

    monitors = {
        'shockpath': _shockpath_monitors(curve, pair),
        'omega_minus': fan.monitors,
        'goursat_D': field_D.monitors,
        'goursat_L': field_L.monitors,
        'regularize': chart.monitors,
        'global': global_mon,
        'forward': _forward_monitors(fwd_report),
    }
    failed = ['{}.{}'.format(st, key) for st, mon in monitors.items() for key, v in mon.items() if not v['pass']]
    report = {
        'config_hash': rc.config_hash,
        'tolerances': rc.tolerances(),
        'host': utils.host_report(),
        'times': sol.times,
        'monitors': monitors,
        'failed': failed,
        'stages': {
            'profile': prof.sidecar(),
            'shockpath': {'constraints': curve.constraints, 'calibration': curve.calibration,
                          'pair': pair.report, 'coefficients': pair.coefficients()},
            'omega_minus': {'sweeps': fan.sweeps, 'history': fan.history},
            'goursat': {'D': field_D.report, 'L': field_L.report, 'preshock_fits': preshock.fits,
                        'preshock_report': preshock.report},
            'regularize': {'chart': chart.report, 'regularity': regularity},
            'global': {'seams': sol.seams, 'shock': sol.shock},
            'forward': fwd_report,
        },
        'timing': timing,
    }
    sol.report = report

    if out_dir is not None:
        t_w = time.time()
        save_profile(prof, path('profile.csv'), meta)
        save_curve(curve, path('curve.csv'), meta)
        save_pair(pair, path('pair.csv'), meta)
        save_fan(fan, path('omega.csv'), meta=meta)
        save_patch([field_D, field_L], path('patch.csv'), meta)
        save_preshock(preshock, path('preshock.csv'), meta)
        save_chart(chart, path('chart.csv'), meta)
        side = dict(meta, T_star=T_star, T_in=T_in, T_fin=T_fin, monitors=chart.monitors)
        save_initial_data(init_cols, regularity, path('initdata.csv'), side)
        write_table(path('initial_global.csv'), initial, dict(meta, T_star=T_star, T_in=T_in, T_fin=T_fin),
                    column_order=INITIAL_COLUMNS)
        save_forward(fwd_report, fwd_slices, path('forward.csv'), meta)
        write_table(path('global.csv'), sol.to_columns(), dict(meta, seams=sol.seams, times=sol.times),
                    column_order=GLOBAL_COLUMNS)
        attrs = {'config_hash': rc.config_hash}
        write_global_solution(sol, path('global.h5'), attrs)
        write_fields(path('fields.h5'), {'omega_minus': fan_groups(fan), 'goursat_D': patch_groups(field_D),
                                         'goursat_L': patch_groups(field_L), 'chart': chart_groups(chart)}, attrs)
        write_json(path('report.json'), report)
        logger.info('Products written to %s in %2.2fsec' % (out_dir, time.time() - t_w))

    t1 = time.time()
    if failed:
        logger.warning('pipeline: monitors failed: {}'.format(', '.join(failed)))
    logger.info('Pipeline time: %2.2fsec' % (t1 - t0))
    return sol, report


def _gas_from(meta, gamma=None, dim=None):
    return GasParams(meta.get('gamma', cfg.DEFAULT_GAMMA) if gamma is None else gamma,
                     meta.get('dim', cfg.DEFAULT_DIM) if dim is None else dim)


def _profile_for(filename, gas, xi_max=None):
    """ Profile from a saved CSV, or solved afresh for gas. """
    if filename is not None:
        return load_profile(filename)
    return build_profile(gas, xi_max=xi_max)


def _next_to(filename, name):
    return os.path.join(os.path.dirname(os.path.abspath(filename)), name)


def _cmd_profile(args):
    gas = GasParams(args.gamma, args.dim)
    prof = build_profile(gas, xi_max=args.xi_max)
    save_profile(prof, args.out)
    logger.info('lambda = %.12f' % prof.lam)
    return prof


def _cmd_rh(args):
    gas = GasParams(args.gamma, args.dim)
    try:
        u, rho, p = (float(v) for v in args.plus.split(','))
    except ValueError:
        logger.error('rh: --plus needs u,rho,p')
        sys.exit(2)
    plus = prim_from_rup(u, rho, p, gas)
    minus = invert_rh(plus, args.sdot, gas)
    lax = check_lax(ShockSideStates(plus, minus, args.sdot), gas)
    jz, jw, jS, rep = jump_expansions(plus, args.sdot, gas)
    out = {'minus': {'u': float(minus.u), 'rho': float(minus.rho), 'p': float(minus.p(gas)),
                     'b': float(minus.b)},
           'lax': lax, 'jumps': {'z': jz, 'w': jw, 'S': jS, 'expansions': rep}}
    print(dumps(out))
    return out


def _cmd_shockpath(args):
    rc = RunConfig.from_file(args.config) if args.config else RunConfig()
    prof = _profile_for(args.profile, rc.gas, rc.xi_max)
    curve = build_curve(prof, rc.trajectory)
    pair = modulate_symmetry(admissible_pair(curve))
    meta = rc.sidecar()
    save_curve(curve, args.out, meta)
    save_pair(pair, args.pair_out or _next_to(args.out, 'pair.csv'), meta)
    return curve, pair


def _cmd_omega_minus(args):
    _, meta = read_table(args.curve)
    gas = _gas_from(meta)
    prof = _profile_for(args.profile, gas)
    curve = load_curve(args.curve, prof)
    fan = solve_omega_minus(curve, n=args.n, interp=args.interp, strict=args.strict)
    save_fan(fan, args.out, meta={'gamma': gas.gamma, 'dim': gas.dim, 'config_hash': meta.get('config_hash')})
    return fan


def _cmd_goursat(args):
    _, meta = read_table(args.curve)
    gas = _gas_from(meta)
    prof = _profile_for(args.profile, gas)
    curve = load_curve(args.curve, prof)
    pair = load_pair(args.pair, curve)
    inflow = load_inflow(args.inflow) if args.inflow else None
    field_D = solve_goursat_D(pair, inflow=inflow, n=args.n, strict=args.strict)
    field_L = solve_interior_L(field_D, pair, n=args.n, strict=args.strict)
    preshock = extract_preshock_profile(field_D, field_L)
    cusp_fit(preshock)
    preshock.report['jump_exponents'] = jump_exponents(field_D, field_L)
    side = {'gamma': gas.gamma, 'dim': gas.dim, 'config_hash': meta.get('config_hash')}
    save_patch([field_D, field_L], args.out, side)
    save_preshock(preshock, args.preshock_out or _next_to(args.out, 'preshock.csv'), side)
    return field_D, field_L, preshock


def _cmd_regularize(args):
    _, meta = read_table(args.preshock)
    gas = _gas_from(meta)
    preshock = load_preshock(args.preshock, gas=gas)
    chart = init_chart_and_data(preshock, theta=args.theta, nx=args.nx)
    solve_backward_B(chart, delta_star=args.delta_star, ns=args.ns, m=args.m, strict=args.strict)
    cols, regularity = measure_regularity(chart)
    side = {'gamma': gas.gamma, 'dim': gas.dim, 'T_star': chart.T_star, 'T_in': chart.T_in,
            'monitors': chart.monitors, 'config_hash': meta.get('config_hash')}
    save_initial_data(cols, regularity, args.out, side)
    if args.chart_out:
        save_chart(chart, args.chart_out, side)
    return chart, cols, regularity


def _cmd_forward_verify(args):
    df, meta = read_table(args.initial, required=INITIAL_COLUMNS)
    gas = _gas_from(meta)
    prof = _profile_for(args.profile, gas)
    T_in = meta.get('T_in') if args.t_in is None else args.t_in
    T_star = meta.get('T_star') if args.t_star is None else args.t_star
    T_fin = meta.get('T_fin', cfg.DEFAULT_T_FIN) if args.t_fin is None else args.t_fin
    if T_in is None or T_star is None:
        logger.error('forward-verify: T_in and T_star are neither in the sidecar nor given')
        sys.exit(2)
    initial = {key: df[key].values for key in INITIAL_COLUMNS}
    record = list(np.linspace(T_in, T_fin, args.slices + 2)[1:-1])
    rep, slices = forward_verify(initial, prof, T_in, T_star, T_fin, nr=args.nr, cfl=args.cfl,
                                 capturing=args.capturing, refine=not args.no_refine, record=record)
    rep['monitors'] = _forward_monitors(rep)
    save_forward(rep, slices, args.out, {'gamma': gas.gamma, 'dim': gas.dim, 'config_hash': meta.get('config_hash')})
    return rep


def _cmd_pipeline(args):
    rc = RunConfig.from_file(args.config)
    out_dir = rc.output_dir if args.out_dir is None else args.out_dir
    _, report = run_pipeline(rc, out_dir)
    if report['failed']:
        logger.warning('%d monitors failed; see %s' % (len(report['failed']), os.path.join(out_dir, 'report.json')))
    return report


def monitor_table(report):
    """ One row per monitor of an aggregated report. """
    rows = []
    for stage, mon in sorted(report['monitors'].items()):
        for name, entry in sorted(mon.items()):
            rows.append({'stage': stage, 'monitor': name, 'value': entry['value'], 'limit': entry['limit'],
                         'pass': entry['pass']})
    return pd.DataFrame(rows, columns=['stage', 'monitor', 'value', 'limit', 'pass'])


def _cmd_report(args):
    report = read_json(args.report)
    table = monitor_table(report)
    print('\n--- Monitors: {} ---\n'.format(args.report))
    print(table.to_string(index=False))
    print('\n{} of {} monitors pass'.format(int(table['pass'].sum()), len(table)))
    return table


def cmd_tool(args=None):
    """ Command line tool for the imploding-shock construction.

    subcommands:
      profile          Guderley profile for one (gamma, dim)
      rh               interior state and Lax report for one exterior state and speed
      shockpath        shock trajectory and admissible pair
      omega-minus      interior characteristic fan
      goursat          Goursat patches and the preshock profile
      regularize       backward chart and regularized initial data
      forward-verify   forward solve from initial data and comparison with Guderley
      pipeline         everything above from one run configuration
      report           print the monitors of an aggregated report
    """

    parser = argparse.ArgumentParser(prog='implosion-lab',
                                     description='Constructive imploding-shock pipeline for radial Euler flow.')
    parser.add_argument('-v', '--verbose', action='store_true', default=False, help='Debug logging.')
    sub = parser.add_subparsers(dest='command')

    p = sub.add_parser('profile', help='Guderley similarity profile.')
    p.add_argument('--gamma', type=float, default=cfg.DEFAULT_GAMMA, help='Adiabatic exponent.')
    p.add_argument('--dim', type=int, default=cfg.DEFAULT_DIM, choices=(2, 3), help='Spatial dimension.')
    p.add_argument('--xi-max', type=float, default=cfg.XI_MAX, dest='xi_max', help='Largest xi stored.')
    p.add_argument('--out', type=str, default='profile.csv', help='Output CSV.')

    p = sub.add_parser('rh', help='Rankine-Hugoniot inversion.')
    p.add_argument('--gamma', type=float, default=cfg.DEFAULT_GAMMA)
    p.add_argument('--dim', type=int, default=cfg.DEFAULT_DIM, choices=(2, 3))
    p.add_argument('--plus', type=str, required=True, help='Exterior state u,rho,p.')
    p.add_argument('--sdot', type=float, required=True, help='Shock speed.')

    p = sub.add_parser('shockpath', help='Shock trajectory and admissible pair.')
    p.add_argument('--config', type=str, default=None, help='Run configuration JSON.')
    p.add_argument('--profile', type=str, default=None, help='Profile CSV; solved afresh when omitted.')
    p.add_argument('--out', type=str, default='curve.csv')
    p.add_argument('--pair-out', type=str, default=None, dest='pair_out', help='Pair CSV (next to --out).')

    p = sub.add_parser('omega-minus', help='Interior characteristic fan.')
    p.add_argument('--curve', type=str, required=True)
    p.add_argument('--profile', type=str, default=None)
    p.add_argument('--n', type=int, default=cfg.FAN_N)
    p.add_argument('--interp', type=str, default='pchip', choices=('pchip', 'linear'))
    p.add_argument('--strict', action='store_true', default=False, help='Raise on a failed monitor.')
    p.add_argument('--out', type=str, default='omega.csv')

    p = sub.add_parser('goursat', help='Goursat patches and the preshock profile.')
    p.add_argument('--pair', type=str, required=True, help='Pair CSV or its JSON sidecar.')
    p.add_argument('--curve', type=str, required=True)
    p.add_argument('--profile', type=str, default=None)
    p.add_argument('--inflow', type=str, default=None, help='Inflow table; Guderley exterior when omitted.')
    p.add_argument('--n', type=int, default=cfg.GOURSAT_N)
    p.add_argument('--strict', action='store_true', default=False)
    p.add_argument('--out', type=str, default='patch.csv')
    p.add_argument('--preshock-out', type=str, default=None, dest='preshock_out')

    p = sub.add_parser('regularize', help='Backward chart and initial data.')
    p.add_argument('--preshock', type=str, required=True)
    p.add_argument('--theta', type=float, default=None, help='Half width of the chart in r.')
    p.add_argument('--delta-star', type=float, default=None, dest='delta_star', help='T* - T_in.')
    p.add_argument('--nx', type=int, default=cfg.REG_NX)
    p.add_argument('--ns', type=int, default=cfg.REG_NS)
    p.add_argument('--m', type=float, default=None, help='Chart-opening constant.')
    p.add_argument('--strict', action='store_true', default=False)
    p.add_argument('--out', type=str, default='initdata.csv')
    p.add_argument('--chart-out', type=str, default=None, dest='chart_out')

    p = sub.add_parser('forward-verify', help='Forward solve and comparison with Guderley.')
    p.add_argument('--initial', type=str, required=True, help='CSV with r, w, z, b at T_in.')
    p.add_argument('--profile', type=str, default=None)
    p.add_argument('--t-in', type=float, default=None, dest='t_in')
    p.add_argument('--t-star', type=float, default=None, dest='t_star')
    p.add_argument('--t-fin', type=float, default=None, dest='t_fin')
    p.add_argument('--nr', type=int, default=cfg.FWD_NR)
    p.add_argument('--cfl', type=float, default=cfg.FWD_CFL)
    p.add_argument('--slices', type=int, default=cfg.FWD_SLICES)
    p.add_argument('--capturing', action='store_true', default=False, help='Add the approximate HLLC solve.')
    p.add_argument('--no-refine', action='store_true', default=False, dest='no_refine')
    p.add_argument('--out', type=str, default='forward.csv')

    p = sub.add_parser('pipeline', help='Full construction from a run configuration.')
    p.add_argument('--config', type=str, required=True)
    p.add_argument('--out-dir', type=str, default=None, dest='out_dir')

    p = sub.add_parser('report', help='Print the monitors of a report JSON.')
    p.add_argument('report', type=str)

    if args is None:
        args = sys.argv[1:]

    args = parser.parse_args(args)

    if args.verbose:
        logging.getLogger('implosion_lab').setLevel(logging.DEBUG)

    if args.command is None:
        logger.error('Indicate a subcommand')
        parser.print_help()
        sys.exit(2)

    handlers = {
        'profile': _cmd_profile,
        'rh': _cmd_rh,
        'shockpath': _cmd_shockpath,
        'omega-minus': _cmd_omega_minus,
        'goursat': _cmd_goursat,
        'regularize': _cmd_regularize,
        'forward-verify': _cmd_forward_verify,
        'pipeline': _cmd_pipeline,
        'report': _cmd_report,
    }
    return handlers[args.command](args)


if __name__ == "__main__":
    cmd_tool()
