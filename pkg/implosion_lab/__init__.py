from __future__ import absolute_import


try:
    from . import gas_core
    from .gas_core import GasParams, PrimState
    from . import guderley
    from . import rankine_hugoniot
    from . import utils
except ImportError:
    print("Warning: Cannot import core utilities")

try:
    from . import shock_path
    from . import omega_minus
    from . import goursat
    from . import regularize
    from . import forward
    from . import pipeline
except ImportError:
    print("Warning: Cannot import the construction stages")

from pkg_resources import get_distribution, DistributionNotFound

try:
    __version__ = get_distribution('implosion-lab').version
except DistributionNotFound:
    __version__ = '0.0.0 - please install via pip/setup.py'
