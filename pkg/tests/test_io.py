import os
import json
import h5py
import numpy as np
import pytest

from implosion_lab import __version__
from implosion_lab.io.csv_writer import write_table, read_table, sidecar_path, dumps, write_json, read_json
from implosion_lab.io.hdf_writer import write_fields, read_fields
from implosion_lab.io.run_config import RunConfig, DEFAULTS
from implosion_lab.errors import InvalidConfig
from tests.data import small_run_json, bad_run_json


def test_table_roundtrip(tmp_path):
    filename = os.path.join(str(tmp_path), 'table.csv')
    x = np.array([0.1, 1.0 / 3.0, np.pi])
    cols = {'b': np.arange(3), 'a': x, 'side': np.array(['minus', 'plus', 'plus'], dtype=object)}
    write_table(filename, cols, {'note': 'abc', 'lam': np.float64(1.5)}, column_order=['a', 'b', 'side'])
    assert os.path.exists(sidecar_path(filename))
    assert sidecar_path(filename).endswith('table.json')

    df, meta = read_table(filename, required=['a', 'side'])
    assert list(df.columns) == ['a', 'b', 'side']
    # %.17g keeps every digit
    assert np.allclose(df['a'].values, x, rtol=1e-15, atol=0.0)
    assert meta['note'] == 'abc' and meta['lam'] == 1.5
    assert meta['rows'] == 3
    assert meta['software_version'] == __version__
    with pytest.raises(KeyError):
        read_table(filename, required=['missing'])


def test_table_without_sidecar(tmp_path):
    filename = os.path.join(str(tmp_path), 'bare.csv')
    write_table(filename, {'a': [1.0, 2.0]})
    os.remove(sidecar_path(filename))
    df, meta = read_table(filename)
    assert meta == {} and len(df) == 2


def test_json_numpy(tmp_path):
    obj = {'a': np.arange(3), 'b': np.float32(0.5), 'c': np.bool_(True), 'd': np.int64(7)}
    back = json.loads(dumps(obj))
    assert back == {'a': [0, 1, 2], 'b': 0.5, 'c': True, 'd': 7}
    filename = os.path.join(str(tmp_path), 'obj.json')
    write_json(filename, obj)
    assert read_json(filename) == back
    with pytest.raises(TypeError):
        dumps({'x': object()})


def test_write_fields(tmp_path):
    filename = os.path.join(str(tmp_path), 'fields.h5')
    groups = {'fan': {'t': np.linspace(-1.05, -1.0, 5), 'r_eta': np.ones((5, 5)), 'sweeps': 3},
              'chart': {'mask': np.eye(3, dtype=np.int8)}}
    write_fields(filename, groups, {'config_hash': 'abc'})
    with h5py.File(filename, 'r') as h5:
        assert h5.attrs['CLASS'] == 'IMPLOSION_LAB'
        assert h5.attrs['config_hash'] == 'abc'
        assert h5['fan/r_eta'].shape == (5, 5)
    back = read_fields(filename)
    assert set(back) == {'fan', 'chart'}
    assert back['fan']['sweeps'] == 3
    assert np.array_equal(back['chart']['mask'], np.eye(3, dtype=np.int8))
    assert np.allclose(back['fan']['t'], groups['fan']['t'])


def test_run_config_defaults():
    rc = RunConfig()
    assert rc.gas.gamma == 1.4 and rc.gas.dim == 3
    assert rc.trajectory.T_star == pytest.approx(-1.05)
    assert rc.goursat['n'] == DEFAULTS['goursat']['n']
    assert rc.output_dir == '.'
    assert len(rc.config_hash) == 64
    assert rc.config_hash == RunConfig({}).config_hash
    side = rc.sidecar(stage='profile')
    assert side['stage'] == 'profile' and side['config_hash'] == rc.config_hash
    assert side['tolerances']['picard_tol'] == rc.goursat['tol']


def test_run_config_file():
    rc = RunConfig.from_file(small_run_json)
    assert rc.trajectory.n == 120
    assert rc.fan['n'] == 40
    # sections merge key by key
    assert rc.fan['tol'] == DEFAULTS['fan']['tol']
    assert rc.regularize['nx'] == 61 and rc.regularize['ns'] == 30
    assert rc.global_['nr'] == 400
    assert rc.config_hash != RunConfig().config_hash
    with pytest.raises(InvalidConfig):
        RunConfig.from_file(bad_run_json)


def test_run_config_invalid():
    for raw in ({'gama': 1.4}, {'fan': {'size': 3}}, {'fan': 40}, {'gamma': 0.9}, {'dim': 1},
                {'xi_max': 0.5}, {'goursat': {'n': 4}}, {'fan': {'interp': 'cubic'}}, {'forward': {'cfl': 1.5}},
                {'eps': 1.0}, {'delta': 0.01, 'delta_circ': 0.05}):
        with pytest.raises(InvalidConfig):
            RunConfig(raw)


if __name__ == "__main__":
    test_run_config_defaults()
    test_run_config_file()
