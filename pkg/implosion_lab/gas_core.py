r''' gas_core.py - thermodynamic and kinematic primitives shared by every stage.

States are dimensionless.  All functions accept numpy arrays as well as scalars
and broadcast in the usual way.  Notation:

    alpha = (gamma - 1)/2,  sigma = rho**alpha * b / alpha,  c = alpha*sigma
    p = rho**gamma * b**2 / gamma,  w = u + sigma,  z = u - sigma

Differentiated Riemann variables (DRV):

    rz = dz/dr + rho**alpha/(gamma*alpha) * db/dr
    rw = dw/dr - rho**alpha/(gamma*alpha) * db/dr
    rb = db/dr
'''

import numpy as np

from .errors import NonPositiveDensity, InvalidConfig


class GasParams(object):
    """ Adiabatic exponent and spatial dimension of the flow.

    Args:
        gamma (float): adiabatic exponent, > 1
        dim (int): spatial dimension, 2 or 3
    """

    def __init__(self, gamma=1.4, dim=3):
        gamma = float(gamma)
        if not gamma > 1.0:
            raise InvalidConfig('gamma must exceed 1, got {}'.format(gamma))
        if dim not in (2, 3):
            raise InvalidConfig('dim must be 2 or 3, got {}'.format(dim))
        self.gamma = gamma
        self.dim = int(dim)
        self.alpha = 0.5 * (gamma - 1.0)

    @property
    def mu(self):
        """ sqrt(alpha/gamma), the strong-shock value of the auxiliary function g """
        return np.sqrt(self.alpha / self.gamma)

    def as_dict(self):
        return {'gamma': self.gamma, 'dim': self.dim}

    def __repr__(self):
        return 'GasParams(gamma={}, dim={})'.format(self.gamma, self.dim)


class PrimState(object):
    """ Primitive state (u, rho, b).

    Vacuum (b = 0, sound speed zero) is allowed; with vacuum=True rho may be
    non-positive and sigma is forced to zero.
    """

    def __init__(self, u, rho, b, vacuum=False):
        self.u = u
        self.rho = rho
        self.b = b
        self.vacuum = vacuum
        if not vacuum and np.any(np.asarray(rho) <= 0.0):
            raise NonPositiveDensity('PrimState: rho must be positive, min rho = {}'.format(np.min(rho)))

    def sigma(self, g):
        if self.vacuum:
            return np.zeros_like(np.asarray(self.b, dtype=float))
        return np.asarray(self.rho) ** g.alpha * self.b / g.alpha

    def c(self, g):
        return g.alpha * self.sigma(g)

    def p(self, g):
        if self.vacuum:
            return np.zeros_like(np.asarray(self.b, dtype=float))
        return eos_pressure(self.rho, self.b, g)

    @property
    def S(self):
        """ Specific entropy 2 ln b; None (scalar) or nan (array) where b = 0. """
        b = np.asarray(self.b, dtype=float)
        if b.ndim == 0:
            return None if b <= 0.0 else 2.0 * np.log(b)
        out = np.full(b.shape, np.nan)
        pos = b > 0.0
        out[pos] = 2.0 * np.log(b[pos])
        return out

    def internal_energy(self, g):
        """ Internal energy per unit volume, p/(gamma-1). """
        return self.p(g) / (g.gamma - 1.0)

    def total_energy(self, g):
        """ E from the ideal-gas law p = (gamma-1)(E - rho u^2/2). """
        return self.internal_energy(g) + 0.5 * np.asarray(self.rho) * np.asarray(self.u) ** 2

    def as_tuple(self, g):
        return self.u, self.rho, self.c(g)

    def __repr__(self):
        return 'PrimState(u={}, rho={}, b={})'.format(self.u, self.rho, self.b)


class RiemannState(object):
    """ Riemann variables (w, z, b); rho is carried along when it is known. """

    def __init__(self, w, z, b, rho=None):
        self.w = w
        self.z = z
        self.b = b
        self.rho = rho

    @property
    def u(self):
        return 0.5 * (np.asarray(self.w) + np.asarray(self.z))

    @property
    def sigma(self):
        return 0.5 * (np.asarray(self.w) - np.asarray(self.z))

    def __repr__(self):
        return 'RiemannState(w={}, z={}, b={})'.format(self.w, self.z, self.b)


class DrvState(object):
    """ Differentiated Riemann variables (rw, rz, rb). """

    def __init__(self, rw, rz, rb):
        self.rw = rw
        self.rz = rz
        self.rb = rb

    def __repr__(self):
        return 'DrvState(rw={}, rz={}, rb={})'.format(self.rw, self.rz, self.rb)


def quiescent_state():
    """ The cold, resting core: u = 0, rho = 1, b = 0. """
    return PrimState(0.0, 1.0, 0.0)


def eos_pressure(rho, b, g):
    """ Pressure p = rho^gamma b^2 / gamma.

    Args:
        rho: density, > 0
        b: square root of the pseudo entropy, >= 0
        g (GasParams): gas parameters
    """
    rho = np.asarray(rho, dtype=float)
    if np.any(rho <= 0.0):
        raise NonPositiveDensity('eos_pressure: rho must be positive, min rho = {}'.format(np.min(rho)))
    return rho ** g.gamma * np.asarray(b) ** 2 / g.gamma


def riemann_from_primitive(state, g):
    """ Convert a PrimState to Riemann variables w = u + sigma, z = u - sigma. """
    if not state.vacuum and np.any(np.asarray(state.rho) <= 0.0):
        raise NonPositiveDensity('riemann_from_primitive: rho must be positive')
    sigma = state.sigma(g)
    u = np.asarray(state.u, dtype=float)
    return RiemannState(u + sigma, u - sigma, state.b, rho=state.rho)


def primitive_from_riemann(rs, g, rho=None):
    """ Inverse of riemann_from_primitive.

    The density is taken from ``rho``, then from ``rs.rho``; otherwise it is
    recovered from rho^alpha = alpha*sigma/b, which needs b > 0.  Where b = 0
    and no density is known the quiescent value 1 is used.
    """
    if rho is None:
        rho = rs.rho
    if rho is None:
        b = np.asarray(rs.b, dtype=float)
        sigma = np.asarray(rs.sigma, dtype=float)
        with np.errstate(divide='ignore', invalid='ignore'):
            rec = (g.alpha * sigma / b) ** (1.0 / g.alpha)
        rho = np.where(b > 0.0, rec, 1.0)
        if rho.ndim == 0:
            rho = float(rho)
    return PrimState(rs.u, rho, rs.b)


def wave_speeds(rs, g):
    """ Characteristic speeds (lambda1, lambda2, lambda3) = (u - c, u, u + c). """
    a = g.alpha
    w = np.asarray(rs.w, dtype=float)
    z = np.asarray(rs.z, dtype=float)
    lam1 = 0.5 * (1.0 + a) * z + 0.5 * (1.0 - a) * w
    lam2 = 0.5 * (z + w)
    lam3 = 0.5 * (1.0 - a) * z + 0.5 * (1.0 + a) * w
    return lam1, lam2, lam3


def speeds_wz(w, z, g):
    """ wave_speeds on bare arrays. """
    return wave_speeds(RiemannState(w, z, None), g)


def entropy_coupling(rho, g):
    """ k = rho^alpha/(gamma alpha), the DRV entropy correction factor. """
    return np.asarray(rho, dtype=float) ** g.alpha / (g.gamma * g.alpha)


def drv_from_gradients(dw, dz, db, rho, g):
    """ DRV from the spatial gradients of w, z, b. """
    k = entropy_coupling(rho, g)
    return DrvState(dw - k * db, dz + k * db, db)


def gradients_from_drv(drv, rho, g):
    """ (dw/dr, dz/dr, db/dr) from a DrvState. """
    k = entropy_coupling(rho, g)
    return drv.rw + k * drv.rb, drv.rz - k * drv.rb, drv.rb


def characteristic_sources(w, z, b, rho, rb, r, g):
    r''' Right sides of the Riemann-variable system along each family.

    Returns (src_z, src_w, src_b) with

        D1 z = A + q rb,   D3 w = -A + q rb,   D2 b = 0

    where A = alpha (d-1)(w^2 - z^2)/(4r) and q = rho^(2 alpha) b/(alpha gamma).
    '''
    a = g.alpha
    d = g.dim
    A = a * (d - 1) * (w * w - z * z) / (4.0 * r)
    q = np.asarray(rho, dtype=float) ** (2.0 * a) * b / (a * g.gamma)
    src = q * rb
    return A + src, -A + src, np.zeros_like(src)


def log_density_source(w, z, rw, rz, r, g):
    """ D2 ln(rho) = -((d-1) u / r + du/dr); du/dr = (rw + rz)/2 holds exactly. """
    u = 0.5 * (w + z)
    return -((g.dim - 1) * u / r + 0.5 * (rw + rz))


def drv_sources(w, z, rho, rw, rz, rb, r, g):
    r''' Right sides of the DRV system along lambda1, lambda3, lambda2.

    With e = rho^alpha rb / gamma:

        D1 rz = -rz((1+a)/2 rz + (1-a)/2 rw - e) - e (rw + rz)/2
                + a(d-1)(w rw - z rz)/(2r) - a(d-1)(w^2 - z^2)/(4r^2)
        D3 rw = -rw((1+a)/2 rw + (1-a)/2 rz + e) + e (rw + rz)/2
                - a(d-1)(w rw - z rz)/(2r) + a(d-1)(w^2 - z^2)/(4r^2)
        D2 rb = -rb (rw + rz)/2
    '''
    a = g.alpha
    d1 = g.dim - 1
    e = np.asarray(rho, dtype=float) ** a * rb / g.gamma
    geo1 = a * d1 * (w * rw - z * rz) / (2.0 * r)
    geo2 = a * d1 * (w * w - z * z) / (4.0 * r * r)
    half = 0.5 * e * (rw + rz)
    src_rz = -rz * (0.5 * (1.0 + a) * rz + 0.5 * (1.0 - a) * rw - e) - half + geo1 - geo2
    src_rw = -rw * (0.5 * (1.0 + a) * rw + 0.5 * (1.0 - a) * rz + e) + half - geo1 + geo2
    src_rb = -rb * 0.5 * (rw + rz)
    return src_rz, src_rw, src_rb


def lambda1_gradient(rho, rw, rz, rb, g):
    """ d(lambda1)/dr = (1+a)/2 rz + (1-a)/2 rw - rho^a rb/gamma """
    a = g.alpha
    e = np.asarray(rho, dtype=float) ** a * rb / g.gamma
    return 0.5 * (1.0 + a) * rz + 0.5 * (1.0 - a) * rw - e


def density_from_sigma(sigma, b, g):
    """ rho = (alpha sigma / b)^(1/alpha), valid where b > 0. """
    return (g.alpha * np.asarray(sigma, dtype=float) / np.asarray(b, dtype=float)) ** (1.0 / g.alpha)
