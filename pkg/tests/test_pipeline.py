import os
import numpy as np
import pytest

from implosion_lab.pipeline import (cmd_tool, GlobalSolution, write_global_solution, splice, primitives,
                                    riemann_columns, monitor_table, _run_stage, GLOBAL_COLUMNS, REGIONS)
from implosion_lab.io.csv_writer import write_json
from implosion_lab.io.hdf_writer import read_fields
from implosion_lab.errors import StageFailure, NoBracket
from tests.data import shared_gas


def test_cmd_tool_rh():
    out = cmd_tool(['rh', '--plus', '0.5,1,0.7142857142857143', '--sdot', '-0.3'])
    assert out['lax']['all_strict']
    assert out['minus']['rho'] < 1.0
    assert out['minus']['u'] > -0.3


def test_cmd_tool_errors():
    with pytest.raises(SystemExit):
        cmd_tool([])
    with pytest.raises(SystemExit):
        cmd_tool(['rh', '--plus', '0.5,1', '--sdot', '-0.3'])
    with pytest.raises(SystemExit):
        cmd_tool(['pipeline'])


def test_cmd_tool_report(tmp_path):
    report = {'monitors': {'global': {'seam_continuity': {'value': 1e-3, 'limit': 1e-2, 'pass': True}},
                           'forward': {'detect_within_3dt': {'value': 4.0, 'limit': 3.0, 'pass': False}}}}
    filename = os.path.join(str(tmp_path), 'report.json')
    write_json(filename, report)
    table = cmd_tool(['report', filename])
    assert len(table) == 2
    assert int(table['pass'].sum()) == 1
    assert list(monitor_table(report)['stage']) == ['forward', 'global']


def test_run_stage():
    timing = {}
    assert _run_stage('ok', timing, lambda x: 2 * x, 3) == 6
    assert 'ok' in timing

    def boom():
        raise NoBracket('no sign change')
    with pytest.raises(StageFailure) as err:
        _run_stage('profile', timing, boom)
    assert err.value.stage == 'profile'
    assert isinstance(err.value.error, NoBracket)
    assert 'profile' not in timing


def test_primitives():
    gas = shared_gas()
    u, rho, c = primitives(np.array([2.0]), np.array([0.0]), np.array([1.0]), gas)
    assert u[0] == 1.0
    assert c[0] == pytest.approx(0.2)
    assert rho[0] == pytest.approx(0.2 ** 5)
    cols = riemann_columns(np.array([0.5]), {'u': u, 'c': c, 'b': np.array([1.0])}, gas)
    assert cols['w'][0] == pytest.approx(2.0) and cols['z'][0] == pytest.approx(0.0)


def test_splice():
    r = np.linspace(0.0, 1.0, 101)
    base = {'w': np.zeros_like(r), 'z': np.zeros_like(r), 'b': np.ones_like(r)}
    patch = {'r': np.linspace(0.305, 0.595, 30), 'w': np.ones(30), 'z': np.zeros(30), 'b': np.ones(30)}
    out, inside, seam = splice(r, base, patch, blend_cells=3)
    assert np.all(out['w'][~inside] == 0.0)
    mid = (r > 0.4) & (r < 0.5)
    assert np.allclose(out['w'][mid], 1.0)
    assert np.all((out['w'] >= 0.0) & (out['w'] <= 1.0))
    assert seam == pytest.approx(1.0)
    assert np.allclose(out['b'], 1.0)


def test_global_solution(tmp_path):
    sol = GlobalSolution(shared_gas(), T_fin=-1.0, T_star=-1.05)
    r = np.array([0.3, 0.1, 0.2])
    sol.add_slice('T_fin', -1.0, r, [-0.5, 0.0, 0.0], [6.0, 1.0, 1.0], [0.4, 0.0, 0.0], [0.9, 0.0, 0.0],
                  ['guderley', 'quiescent', 'quiescent'], shock=0.25)
    sol.add_slice('T_star', -1.05, r, np.zeros(3), np.ones(3), np.zeros(3), np.zeros(3),
                  ['quiescent'] * 3)
    assert sol.names() == ['T_star', 'T_fin']
    # samples are sorted by radius
    assert np.all(np.diff(sol.slices['T_fin']['r']) > 0.0)
    assert sol.slices['T_fin']['rho'][-1] == 6.0
    assert sol.quiescent_core_error(0.25) == 0.0
    assert sol.quiescent_core_error(1.0) > 0.0

    cols = sol.to_columns()
    assert set(cols) == set(GLOBAL_COLUMNS)
    assert cols['r'].size == 6

    filename = os.path.join(str(tmp_path), 'global.h5')
    write_global_solution(sol, filename, {'config_hash': 'abc', 'times': sol.times})
    back = read_fields(filename)
    assert set(back) == {'T_fin', 'T_star'}
    assert back['T_fin']['shock'] == 0.25
    assert np.isnan(back['T_star']['shock'])
    assert REGIONS[back['T_fin']['region'][-1]] == 'guderley'


if __name__ == "__main__":
    test_cmd_tool_rh()
    test_splice()
