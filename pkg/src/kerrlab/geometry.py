"""Rotating black hole exterior: metric, scalars, tetrad, coordinate maps,
and the smooth cutoff profiles used by the estimate machinery.

Everything is expressed in Boyer-Lindquist coordinates (t, r, theta, phi)
with geometric units. Vectors are length-4 coordinate-component arrays in
that order. All formulas are valid only in the exterior r > r_plus.
"""
from dataclasses import dataclass

import numpy as np

from .jets import Jet, variable, lift, jexp

__all__ = ["KerrParams", "GeometryScalars", "geometry_scalars", "metric",
           "sqrt_neg_det_g", "tetrad", "tortoise", "tortoise_inverse",
           "blended_vectors", "hypersurface_normal", "smoothstep",
           "smoothstep_jet", "chi_blend", "chi_mid", "chi_far", "chi_near",
           "chi_time"]


@dataclass(frozen=True)
class KerrParams:
    """Mass M and spin a, both in length units. r_plus is derived."""
    M: float
    a: float = 0.0

    def __post_init__(self):
        if not self.M > 0:
            raise ValueError("mass must be positive")
        if abs(self.a) > self.M:
            raise ValueError("|a| <= M required (no naked spins)")

    @property
    def r_plus(self):
        return self.M + np.sqrt(self.M ** 2 - self.a ** 2)

    @property
    def r_minus(self):
        return self.M - np.sqrt(self.M ** 2 - self.a ** 2)


@dataclass(frozen=True)
class GeometryScalars:
    Delta: object
    Sigma: object
    Pi: object
    V_L: object
    p: object      # r - i a cos(theta)


def geometry_scalars(params, r, theta, check=True):
    """The five derived scalars at (r, theta).

    V_L = Delta/(r^2+a^2)^2 is the centrifugal-well profile whose
    derivative locates the orbiting null geodesics.
    """
    M, a = params.M, params.a
    r = np.asarray(r, dtype=float)
    if check and np.any(r <= params.r_plus):
        raise ValueError("point not in the exterior (r <= r_plus)")
    Delta = r * r - 2 * M * r + a * a
    cth = np.cos(theta)
    Sigma = r * r + (a * cth) ** 2
    sth2 = np.sin(theta) ** 2
    Pi = (r * r + a * a) ** 2 - a * a * Delta * sth2
    V_L = Delta / (r * r + a * a) ** 2
    p = r - 1j * a * cth
    return GeometryScalars(Delta, Sigma, Pi, V_L, p)


def metric(params, r, theta):
    """Covariant and contravariant metric components, plus sqrt(-det g).

    Returns (g, ginv, sqrtg); g and ginv are (4,4) (or (4,4)+grid shape)
    arrays indexed (t, r, theta, phi).
    """
    M, a = params.M, params.a
    s = geometry_scalars(params, r, theta)
    sth2 = np.sin(theta) ** 2
    shape = np.broadcast(np.asarray(r), np.asarray(theta)).shape
    g = np.zeros((4, 4) + shape)
    ginv = np.zeros((4, 4) + shape)
    g[0, 0] = -(1 - 2 * M * r / s.Sigma)
    g[0, 3] = g[3, 0] = -2 * M * a * r * sth2 / s.Sigma
    g[1, 1] = s.Sigma / s.Delta
    g[2, 2] = s.Sigma
    g[3, 3] = s.Pi * sth2 / s.Sigma
    ginv[0, 0] = -s.Pi / (s.Delta * s.Sigma)
    ginv[0, 3] = ginv[3, 0] = -2 * M * a * r / (s.Delta * s.Sigma)
    ginv[1, 1] = s.Delta / s.Sigma
    ginv[2, 2] = 1.0 / s.Sigma
    ginv[3, 3] = (s.Delta - a * a * sth2) / (s.Delta * s.Sigma * sth2)
    return g, ginv, s.Sigma * np.sin(theta)


def sqrt_neg_det_g(params, r, theta):
    return geometry_scalars(params, r, theta).Sigma * np.sin(theta)


def tetrad(params, r, theta):
    """Principal-null-adapted orthonormal and null frames.

    Returns a dict with T_hat, R_hat, Theta_hat, Phi_hat (orthonormal,
    g(T,T) = -1) and the null pair l = (T+R)/sqrt2, n = (T-R)/sqrt2.
    Phi_hat is singular on the axis; keep theta away from 0 and pi.
    """
    a = params.a
    s = geometry_scalars(params, r, theta)
    shape = np.broadcast(np.asarray(r), np.asarray(theta)).shape
    zero = np.zeros(shape)
    sd = np.sqrt(s.Sigma * s.Delta)
    T_hat = np.stack([np.broadcast_to((r * r + a * a), shape) / sd, zero, zero,
                      np.broadcast_to(a / sd, shape) + zero])
    R_hat = np.stack([zero, np.sqrt(s.Delta / s.Sigma) + zero, zero, zero])
    Th_hat = np.stack([zero, zero, 1 / np.sqrt(s.Sigma) + zero, zero])
    Ph_hat = np.stack([a * np.sin(theta) / np.sqrt(s.Sigma) + zero, zero, zero,
                       1 / (np.sqrt(s.Sigma) * np.sin(theta)) + zero])
    rt2 = np.sqrt(2.0)
    return {
        "T_hat": T_hat, "R_hat": R_hat, "Theta_hat": Th_hat, "Phi_hat": Ph_hat,
        "l": (T_hat + R_hat) / rt2, "n": (T_hat - R_hat) / rt2,
    }


# ---------------------------------------------------------------------------
# tortoise coordinate

def _tortoise_raw(params, r):
    M, a = params.M, params.a
    rp, rm = params.r_plus, params.r_minus
    if rp - rm < 1e-12 * M:
        raise ValueError("extremal spin not supported by the tortoise map")
    if a == 0:
        return r + 2 * M * np.log(r / (2 * M) - 1)
    c = 2 * M / (rp - rm)
    return (r + c * rp * np.log((r - rp) / (2 * M))
            - c * rm * np.log((r - rm) / (2 * M)))


def tortoise(params, r):
    """r -> r*, with dr*/dr = (r^2+a^2)/Delta.

    The additive constant is fixed so that r*(10M) coincides with the
    a = 0 closed form r + 2M log(r/(2M) - 1); the map then varies
    continuously in a at the anchor radius.
    """
    M = params.M
    anchor = 10 * M + 2 * M * np.log(4.0)
    return _tortoise_raw(params, np.asarray(r, dtype=float)) \
        - _tortoise_raw(params, 10 * M) + anchor


def tortoise_inverse(params, rstar):
    """Invert the tortoise map by bracketed root finding (vectorized)."""
    from scipy.optimize import brentq
    rstar = np.asarray(rstar, dtype=float)
    rp = params.r_plus
    M = params.M

    def solve(x):
        lo = rp * (1 + 1e-14)
        hi = max(abs(x) + 10 * M, rp + 10 * M)
        while tortoise(params, hi) < x:
            hi *= 2
        # near the horizon r - r_plus ~ exp(r*/(2 kappa)); shrink the bracket
        return brentq(lambda rr: tortoise(params, rr) - x, lo, hi,
                      xtol=1e-14, rtol=8.9e-16, maxiter=200)

    out = np.array([solve(x) for x in np.atleast_1d(rstar)])
    return out.reshape(rstar.shape) if rstar.shape else float(out[0])


# ---------------------------------------------------------------------------
# blended time-like vectors and the slice normal

def blended_vectors(params, r, theta=np.pi / 2):
    """Angular velocities omega_PNV, omega_chi, omega_perp and the vectors
    T_PNV, T_chi, T_perp (as coordinate components).

    omega_chi interpolates the horizon angular velocity down to zero
    across r in [10M, 11M] through the chi_blend profile.
    """
    M, a = params.M, params.a
    r = np.asarray(r, dtype=float)
    s = geometry_scalars(params, r, theta)
    om_pnv = a / (r * r + a * a)
    om_chi = (a / (params.r_plus ** 2 + a * a)) * chi_blend(params, r)
    om_perp = 2 * a * M * r / s.Pi
    shape = np.broadcast(r, np.asarray(theta)).shape
    one = np.ones(shape)
    zero = np.zeros(shape)
    vec = lambda om: np.stack([one, zero, zero, om + zero])
    return {"omega_PNV": om_pnv, "omega_chi": om_chi, "omega_perp": om_perp,
            "T_PNV": vec(om_pnv), "T_chi": vec(om_chi), "T_perp": vec(om_perp)}


def hypersurface_normal(params, r, theta):
    """Future normal density of a constant-t slice:
    (d_t + (2aMr/Pi) d_phi) (Pi/Delta) sin(theta), so that fluxes are
    integrals of T_{alpha beta} X^beta dN^alpha dr dtheta dphi.
    """
    M, a = params.M, params.a
    s = geometry_scalars(params, r, theta)
    shape = np.broadcast(np.asarray(r), np.asarray(theta)).shape
    dens = (s.Pi / s.Delta) * np.sin(theta)
    comp = np.stack([np.ones(shape), np.zeros(shape), np.zeros(shape),
                     2 * a * M * r / s.Pi + np.zeros(shape)])
    return comp, dens


# ---------------------------------------------------------------------------
# smooth cutoffs
#
# All profiles are built from the C-infinity step
#     S(x) = h(x) / (h(x) + h(1-x)),  h(x) = exp(-1/x) for x > 0, else 0,
# which is 0 for x <= 0 and 1 for x >= 1. Derivatives come from jet
# arithmetic on the open transition interval and vanish on the plateaus.

def smoothstep(x):
    x = np.asarray(x, dtype=float)
    lo = x <= 0
    hi = x >= 1
    mid = ~(lo | hi)
    out = np.where(hi, 1.0, 0.0)
    if np.any(mid):
        u = np.clip(x, 1e-12, 1 - 1e-12)
        h1 = np.exp(-1.0 / u)
        h2 = np.exp(-1.0 / (1 - u))
        out = np.where(mid, h1 / (h1 + h2), out)
    return out


def smoothstep_jet(xj):
    """S applied to a jet; plateau points get exactly zero derivatives."""
    xj = lift(xj)
    x = np.asarray(xj.f, dtype=float)
    lo = x <= 0
    hi = x >= 1
    mid = ~(lo | hi)
    u = Jet(np.clip(x, 1e-9, 1 - 1e-9), xj.d1, xj.d2, xj.d3)
    h1 = jexp(-1 / u)
    h2 = jexp(-1 / (1 - u))
    s = h1 / (h1 + h2)
    val = np.where(mid, s.f, np.where(hi, 1.0, 0.0))
    pick = lambda d: np.where(mid, d, 0.0)
    return Jet(val, pick(np.broadcast_to(s.d1, x.shape)),
               pick(np.broadcast_to(s.d2, x.shape)),
               pick(np.broadcast_to(s.d3, x.shape)))


def _as_r_jet(r):
    return r if isinstance(r, Jet) else variable(np.asarray(r, dtype=float))


def chi_blend(params, r):
    """1 for r < 10M, 0 for r > 11M (the energy-blending profile)."""
    rj = _as_r_jet(r)
    out = smoothstep_jet((11 * params.M - rj) / params.M)
    return out if isinstance(r, Jet) else out.f


def chi_mid(params, r):
    """1 on [2.7M, 5M], 0 outside [2.4M, 6M]."""
    M = params.M
    rj = _as_r_jet(r)
    rise = smoothstep_jet((rj - 2.4 * M) / (0.3 * M))
    fall = smoothstep_jet((6 * M - rj) / M)
    out = rise * fall
    return out if isinstance(r, Jet) else out.f


def _abs_dist_jet(params, r):
    # |r - 3M| as a jet; the sign kink sits where every consumer is flat
    rj = _as_r_jet(r)
    sgn = np.sign(np.asarray(rj.f) - 3 * params.M)
    return Jet(np.abs(rj.f - 3 * params.M), sgn * rj.d1, sgn * rj.d2, sgn * rj.d3)


def chi_far(params, r, r_gap):
    """0 for |r-3M| <= r_gap, 1 for |r-3M| >= 2 r_gap; derivative bounds
    scale as (transition width)^{-k}."""
    d = _abs_dist_jet(params, r)
    out = smoothstep_jet((d - r_gap) / r_gap)
    return out if isinstance(r, Jet) else out.f


def chi_near(params, r, r_gap):
    """1 for |r-3M| <= 2 r_gap, 0 for |r-3M| >= 3 r_gap."""
    d = _abs_dist_jet(params, r)
    out = 1 - smoothstep_jet((d - 2 * r_gap) / r_gap)
    return out if isinstance(r, Jet) else out.f


def chi_time(t, T, ramp):
    """1 on [0, T], 0 outside [-ramp, T + ramp]; jet-aware in t."""
    tj = t if isinstance(t, Jet) else variable(np.asarray(t, dtype=float))
    out = smoothstep_jet((tj + ramp) / ramp) * smoothstep_jet((T + ramp - tj) / ramp)
    return out if isinstance(t, Jet) else out.f
