from os import path
from functools import lru_cache

here = path.dirname(path.abspath(__file__))

small_run_json = path.join(here, 'test_data/small_run.json')
bad_run_json = path.join(here, 'test_data/bad_run.json')

# gas used throughout the suite
GAMMA = 1.4
DIM = 3

# coarse resolutions that keep the shared objects at desk scale
N_XI = 2001
CURVE_N = 120
FAN_N = 40


@lru_cache(maxsize=None)
def shared_gas():
    from implosion_lab.gas_core import GasParams
    return GasParams(GAMMA, DIM)


@lru_cache(maxsize=None)
def shared_profile():
    from implosion_lab.guderley import build_profile
    return build_profile(shared_gas(), n_xi=N_XI)


@lru_cache(maxsize=None)
def shared_curve():
    from implosion_lab.io.run_config import TrajectoryConfig
    from implosion_lab.shock_path import build_curve
    return build_curve(shared_profile(), TrajectoryConfig(n=CURVE_N))


@lru_cache(maxsize=None)
def shared_pair():
    from implosion_lab.shock_path import admissible_pair, modulate_symmetry
    return modulate_symmetry(admissible_pair(shared_curve()))


@lru_cache(maxsize=None)
def shared_fan():
    from implosion_lab.omega_minus import solve_omega_minus
    return solve_omega_minus(shared_curve(), n=FAN_N)
