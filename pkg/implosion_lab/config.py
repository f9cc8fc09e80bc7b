r''' config.py - default constants and tolerances shared by the pipeline stages.

Everything here is dimensionless.  Values can be overridden per run through the
run configuration JSON (see implosion_lab.io.run_config).
'''

# Environment variable capping the worker count
THREADS_ENV_VAR = 'IMPLOSION_LAB_THREADS'

# Log line formats for the INFO and DEBUG preambles
LOG_FORMAT = '%(name)-15s %(levelname)-8s %(message)s'
LOG_FORMAT_DEBUG = '%(relativeCreated)5d %(name)-15s %(levelname)-8s %(message)s'

# Gas defaults
DEFAULT_GAMMA = 1.4
DEFAULT_DIM = 3

# Self-similar profile
XI_MAX = 1.0e3                  # largest similarity coordinate stored in a profile
PROFILE_RTOL = 1.0e-11
PROFILE_ATOL = 1.0e-13
PROFILE_N_XI = 4001             # xi samples, log-uniform
SONIC_D_TOL = 1.0e-6            # |D| below which the series continuation takes over
SONIC_RHS_TOL = 1.0e-9          # profile_rhs refuses |D| below this
LAMBDA_XTOL = 1.0e-12
LAMBDA_MAXITER = 200
LAMBDA_SCAN_N = 40
SHOOT_TAU_MAX = 1.0e4

# Rankine-Hugoniot
TAYLOR_CHI_LIMIT = 0.1          # |chi|/<c> above which the Taylor report is unreliable
RATIO_SAMPLES = 2001

# Shock trajectory
DEFAULT_T_FIN = -1.0
DEFAULT_EPS = 0.1
DEFAULT_DELTA_FRAC = 0.05       # delta = DEFAULT_DELTA_FRAC * |T_fin|
DEFAULT_DELTA_CIRC_FRAC = 0.2   # delta_circ = DEFAULT_DELTA_CIRC_FRAC * delta
CUTOFF_INNER = 0.5              # ell(t) = nu/(t-T*) below T* + CUTOFF_INNER*delta
CUTOFF_OUTER = 0.9              # ell(t) = 0 above T* + CUTOFF_OUTER*delta
PAIR_SUPPORT = 0.5              # phi = 1 on [T*, T* + PAIR_SUPPORT*delta_circ]
CURVE_N = 400
CURVE_REFINE = True
CURVE_RTOL = 1.0e-11
CURVE_ATOL = 1.0e-13
H_DOT_TOL = 1.0e-9
PAIR_N = 400
PAIR_ACCEL_M = 50.0             # |ell_ddot| <= PAIR_ACCEL_M * delta_circ**(eps-1)
GUDERLEY_M_FACTOR = 4.0         # default m = factor * Guderley trace bound at T_fin
NU_MAX_HALVINGS = 6             # nu retries when the DRV trace bound fails

# Omega-minus fan
FAN_N = 160
FAN_MAX_SWEEPS = 12
FAN_TOL = 1.0e-8
FAN_STALL_RATIO = 0.95
FAN_MONITOR_SKIP = 10           # skip monitors on the last intervals before T*

# Goursat patch
GOURSAT_N = 96
PICARD_MAX_ITER = 40
PICARD_TOL = 1.0e-10
CONTRACTION_FAIL_RATIO = 0.9

# Regularization
REG_NX = 121
REG_NS = 80
REG_MAX_ITER = 30
REG_TOL = 1.0e-9
REG_MAX_HALVINGS = 5
REG_DELTA_REG = (1.0e-3, 1.0e-4, 1.0e-5)
REG_M_DEFAULT = 10.0            # chart-opening constant when no calibration is supplied
REG_HALVING_TOL = 0.1           # Hoelder seminorm change allowed under grid halving
HOLDER_PER_DECADE = 20

# Forward verification
FWD_NR = 800
FWD_CFL = 0.8
FWD_R_MAX_FACTOR = 3.0          # outer boundary as a multiple of r*
FWD_SLICES = 4                  # intermediate slices kept between T_in and T_fin

# Global solution
GLOBAL_NR = 1200
SPLICE_BLEND_CELLS = 3
SPLICE_TOL = 1.0e-2
RH_SLICE_TOL = 1.0e-8

# Fits
MIN_FIT_SAMPLES = 40
MIN_FIT_DECADES = 2.0
