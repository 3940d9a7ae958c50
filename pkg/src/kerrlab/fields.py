"""Maxwell field snapshots on the black-hole exterior.

A snapshot holds the electric and magnetic field triples in the orthonormal
frame (R, Theta, Phi) carried by the stationary observers, on a tensor-product
grid: radial nodes uniform in the tortoise coordinate times Gauss-Legendre
polar nodes, at a single azimuthal mode number m (fields carry e^{i m phi}).

Complex-valued (E, B) pairs are allowed; every quadratic functional below is
the sesquilinear extension evaluated through the self-dual combination
psi = E + iB, which reduces to the classical value on real fields.

Spin-weight components, frozen conventions
------------------------------------------
    phi_+1 = -(psi_Theta + i psi_Phi)/2
    phi_0  =  psi_R / sqrt(2)
    phi_-1 = -(psi_Theta - i psi_Phi)/2

and the scalar-wave variable is U = p phi_0 with p = r - i a cos(theta).
The charge functional is calibrated so the stationary solution family with
phi_0 = q/p^2 returns exactly q:

    charges = (1/4pi) oint [ (r^2+a^2) phi_0
                             + (i/sqrt2) a sin(theta) sqrt(Delta) (phi_+1+phi_-1) ]
                           sin(theta) dtheta dphi.

The integrand is pointwise independent of r for any closed two-form, which is
what makes the charge a robust diagnostic on truncated grids.

Serialization: a snapshot is stored as <path>.json (grid metadata and layout
description) plus <path>.bin holding, in order: r and rstar as float64, then
E, B and optionally dtE, dtB as complex128, all in column-major layout.
"""

import json
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from scipy.integrate import simpson

from .angular import AngularBasis, angular_basis
from .geometry import KerrParams
from .stencils import d1

SQRT2 = np.sqrt(2.0)


@dataclass
class ChargePair:
    q_E: float
    q_B: float

    @property
    def as_complex(self):
        return self.q_E + 1j * self.q_B


@dataclass
class MaxwellSnapshot:
    """Field data at one instant.  Treat as immutable after construction."""

    params: KerrParams
    t: float
    r: np.ndarray  # (n_r,)
    rstar: np.ndarray  # (n_r,) uniform spacing
    basis: AngularBasis
    E: np.ndarray  # (3, n_r, n_theta) complex, frame order (R, Theta, Phi)
    B: np.ndarray
    dtE: Optional[np.ndarray] = None
    dtB: Optional[np.ndarray] = None

    @property
    def m(self):
        return self.basis.m

    @property
    def psi(self):
        return self.E + 1j * self.B

    @property
    def has_dt(self):
        return self.dtE is not None and self.dtB is not None

    def _check_same_grid(self, other):
        if self.params != other.params or self.basis.m != other.basis.m:
            raise ValueError("snapshots live on different backgrounds or modes")
        if self.r.shape != other.r.shape or not np.allclose(self.r, other.r):
            raise ValueError("snapshots live on different radial grids")

    def __add__(self, other):
        self._check_same_grid(other)
        dt = self.has_dt and other.has_dt
        return replace(
            self,
            E=self.E + other.E,
            B=self.B + other.B,
            dtE=self.dtE + other.dtE if dt else None,
            dtB=self.dtB + other.dtB if dt else None,
        )

    def __sub__(self, other):
        return self + (-1.0) * other

    def __mul__(self, c):
        return replace(
            self,
            E=c * self.E,
            B=c * self.B,
            dtE=c * self.dtE if self.dtE is not None else None,
            dtB=c * self.dtB if self.dtB is not None else None,
        )

    __rmul__ = __mul__


def spin_components(snap):
    """Return (phi_+1, phi_0, phi_-1), each of shape (n_r, n_theta)."""
    psi = snap.psi
    phi_p = -(psi[1] + 1j * psi[2]) / 2
    phi_0 = psi[0] / SQRT2
    phi_m = -(psi[1] - 1j * psi[2]) / 2
    return phi_p, phi_0, phi_m


def psi_from_spin(phi_p, phi_0, phi_m):
    """Invert the component map: the self-dual triple (R, Theta, Phi)."""
    return np.stack(
        [SQRT2 * phi_0, -(phi_p + phi_m), 1j * (phi_p - phi_m)], axis=0
    )


def snapshot_from_spin(
    params, t, r, rstar, basis, phi_p, phi_0, phi_m, real_field=True
):
    """Build a snapshot whose spin components are the given triple.

    real_field=True stores E = Re(psi), B = Im(psi): the unique real field
    with those components.  real_field=False stores the pure self-dual state
    E = psi/2, B = -i psi/2, which keeps the anti-self-dual sector empty (the
    natural choice for complex single-mode evolution data).
    """
    psi = psi_from_spin(phi_p, phi_0, phi_m)
    if real_field:
        E, B = psi.real.astype(complex), psi.imag.astype(complex)
    else:
        E, B = psi / 2, -1j * psi / 2
    return MaxwellSnapshot(
        params=params, t=t, r=np.asarray(r, float), rstar=np.asarray(rstar, float),
        basis=basis, E=E, B=B,
    )


def _p_factor(snap):
    return snap.r[:, None] - 1j * snap.params.a * snap.basis.u[None, :]


def upsilon(snap):
    """The wave-equation variable U = p phi_0."""
    _, phi_0, _ = spin_components(snap)
    return _p_factor(snap) * phi_0


def dt_upsilon(snap):
    if not snap.has_dt:
        raise ValueError("snapshot carries no time-derivative data")
    dpsi_r = snap.dtE[0] + 1j * snap.dtB[0]
    return _p_factor(snap) * dpsi_r / SQRT2


def charges(snap, r=None):
    """Electric and magnetic charge from the flux quadrature at one radius.

    r selects the evaluation sphere (nearest grid radius; default median).
    The result is r-independent up to quadrature error.
    """
    pq = snap.params
    i_r = snap.r.size // 2 if r is None else int(np.argmin(np.abs(snap.r - r)))
    rr = snap.r[i_r]
    Delta = rr * rr - 2 * pq.M * rr + pq.a**2
    phi_p, phi_0, phi_m = spin_components(snap)
    sin_th = np.sin(snap.basis.theta)
    integrand = (rr**2 + pq.a**2) * phi_0[i_r] + (
        1j / SQRT2
    ) * pq.a * sin_th * np.sqrt(Delta) * (phi_p[i_r] + phi_m[i_r])
    # oint ... sin dtheta dphi = 2 pi * GL quadrature in cos(theta)
    q = snap.basis.quad(integrand) * 2 * np.pi / (4 * np.pi)
    return ChargePair(q_E=float(q.real), q_B=float(q.imag))


def coulomb_phi0(params, q, r, theta):
    p = np.asarray(r)[..., None] - 1j * params.a * np.cos(np.asarray(theta))
    return q / p**2


def coulomb_snapshot(params, q, r, rstar, basis, t=0.0):
    """The stationary two-parameter solution family, materialized on a grid.

    Middle component q/p^2, extreme components zero; q complex combines the
    electric (real part) and magnetic (imaginary part) charge.  Stored as the
    real field, with zero time derivatives.
    """
    r = np.asarray(r, float)
    phi_0 = coulomb_phi0(params, q, r, np.arccos(basis.u))
    zero = np.zeros_like(phi_0)
    snap = snapshot_from_spin(
        params, t, r, rstar, basis, zero, phi_0, zero, real_field=True
    )
    snap.dtE = np.zeros_like(snap.E)
    snap.dtB = np.zeros_like(snap.B)
    return snap


def bump(x):
    """Smooth compactly supported profile: exp(-1/(1-x^2)) inside |x|<1."""
    x = np.asarray(x, float)
    out = np.zeros_like(x)
    inside = np.abs(x) < 1
    xi = x[inside]
    out[inside] = np.exp(-1.0 / (1.0 - xi * xi))
    return out


def phi0_pulse(
    params, r, rstar, basis, ell, r_center, width, amplitude=1.0, t=0.0
):
    """Charge-free test data: phi_0 = bump(r) Pbar_ell^m(theta), phi_±1 = 0.

    Charge-free requires ell >= 1 (the charge quadrature then annihilates the
    angular profile).  Returned with zero time-derivative data attached; the
    pulse is initial data, not a snapshot of an evolved solution.
    """
    if ell < max(1, abs(basis.m)):
        raise ValueError("pulse needs ell >= max(1, |m|) to be charge-free")
    r = np.asarray(r, float)
    radial = amplitude * bump((r - r_center) / width)
    col = np.zeros(basis.n_modes)
    col[int(ell) - abs(basis.m)] = 1.0
    angular = basis.to_nodes(col)
    phi_0 = radial[:, None] * angular[None, :]
    zero = np.zeros_like(phi_0)
    snap = snapshot_from_spin(
        params, t, r, rstar, basis, zero, phi_0, zero, real_field=True
    )
    snap.dtE = np.zeros_like(snap.E)
    snap.dtB = np.zeros_like(snap.B)
    return snap


def charge_decompose(snap):
    """Split into the stationary charged part and the charge-free remainder."""
    q = charges(snap).as_complex
    stat = coulomb_snapshot(
        snap.params, q, snap.r, snap.rstar, snap.basis, t=snap.t
    )
    if not snap.has_dt:
        stat.dtE = None
        stat.dtB = None
    return stat, snap - stat


def _radial_integral(snap, density_r):
    """integral density(r) dr by composite Simpson on the snapshot grid."""
    return simpson(density_r, x=snap.r)


def energy_maxwell(snap):
    """E = integral sum_i |phi_i|^2 r^2 dr domega  (nonnegative)."""
    phi_p, phi_0, phi_m = spin_components(snap)
    dens = np.abs(phi_p) ** 2 + np.abs(phi_0) ** 2 + np.abs(phi_m) ** 2
    shell = snap.basis.quad(dens) * 2 * np.pi
    return float(_radial_integral(snap, shell * snap.r**2))


def _dudr_star(snap, U):
    h = snap.rstar[1] - snap.rstar[0]
    if not np.allclose(np.diff(snap.rstar), h):
        raise ValueError("tortoise grid must be uniform for derivatives")
    return d1(U, h, axis=0)


def _radial_weights(params, r):
    """(r^2+a^2)/Delta and its reciprocal, the horizon-adapted weights."""
    Delta = r * r - 2 * params.M * r + params.a**2
    w_t = (r * r + params.a**2) / Delta
    return w_t, 1.0 / w_t


def fi_energy_parts(params, r, basis, U, dtU, drU):
    """Pointwise ingredients of the wave-variable energy at fixed t.

    Returns the four radial densities (time, radial, angular, zeroth),
    each already integrated over the sphere (with the 2 pi azimuthal
    factor) and weighted by r^2, so that E_FI = simpson(sum, x=r).
    """
    w_t, w_r = _radial_weights(params, r)
    c = basis.to_modes(U)
    ang = 2 * np.pi * (np.abs(c) ** 2 @ (basis.ell * (basis.ell + 1.0)))
    quad = lambda f: basis.quad(np.abs(f) ** 2) * 2 * np.pi
    return (
        w_t * quad(dtU) * r**2,
        w_r * quad(drU) * r**2,
        ang,
        quad(U),
    )


def energy_fi(snap):
    """E_FI for the wave variable of the snapshot; needs time derivatives."""
    U = upsilon(snap)
    dtU = dt_upsilon(snap)
    w_t, _ = _radial_weights(snap.params, snap.r)
    drU = w_t[:, None] * _dudr_star(snap, U)
    parts = fi_energy_parts(snap.params, snap.r, snap.basis, U, dtU, drU)
    return float(_radial_integral(snap, sum(parts)))


def inner_product(snap_h, snap_f):
    """Sesquilinear pairing whose diagonal is E[F] + E_FI[U[F]].

    First slot conjugated.  Both snapshots need time-derivative data for the
    wave-variable part.
    """
    snap_h._check_same_grid(snap_f)
    ph = spin_components(snap_h)
    pf = spin_components(snap_f)
    dens = sum(np.conj(a) * b for a, b in zip(ph, pf))
    total = simpson(
        snap_f.basis.quad(dens) * 2 * np.pi * snap_f.r**2, x=snap_f.r
    )

    w_t, w_r = _radial_weights(snap_f.params, snap_f.r)
    U_h, U_f = upsilon(snap_h), upsilon(snap_f)
    dtU_h, dtU_f = dt_upsilon(snap_h), dt_upsilon(snap_f)
    drU_h = w_t[:, None] * _dudr_star(snap_h, U_h)
    drU_f = w_t[:, None] * _dudr_star(snap_f, U_f)
    basis = snap_f.basis
    c_h, c_f = basis.to_modes(U_h), basis.to_modes(U_f)
    lam = basis.ell * (basis.ell + 1.0)
    quad = lambda fh, ff: basis.quad(np.conj(fh) * ff) * 2 * np.pi
    r = snap_f.r
    radial = (
        w_t * quad(dtU_h, dtU_f) * r**2
        + w_r * quad(drU_h, drU_f) * r**2
        + 2 * np.pi * ((np.conj(c_h) * c_f) @ lam)
        + quad(U_h, U_f)
    )
    total = total + simpson(radial, x=r)
    return complex(total)


def angular_lowerbound_gap(snap, r=None):
    """Margin in the charge-free angular lower bound at one radius.

    Returns  oint |grad_sphere phi_0|^2 - a^2 V_L oint |phi_+1 + phi_-1|^2
             - 2 oint |phi_0|^2,
    which is nonnegative for charge-free fields (and goes negative for
    charged ones, by design of the bound).
    """
    pq = snap.params
    i_r = snap.r.size // 2 if r is None else int(np.argmin(np.abs(snap.r - r)))
    rr = snap.r[i_r]
    Delta = rr * rr - 2 * pq.M * rr + pq.a**2
    V_L = Delta / (rr**2 + pq.a**2) ** 2
    phi_p, phi_0, phi_m = spin_components(snap)
    basis = snap.basis
    c = basis.to_modes(phi_0[i_r])
    grad_sq = 2 * np.pi * float(np.abs(c) ** 2 @ (basis.ell * (basis.ell + 1.0)))
    sum_sq = 2 * np.pi * float(basis.quad(np.abs(phi_p[i_r] + phi_m[i_r]) ** 2))
    zero_sq = 2 * np.pi * float(basis.quad(np.abs(phi_0[i_r]) ** 2))
    return grad_sq - pq.a**2 * V_L * sum_sq - 2 * zero_sq


def save_snapshot(snap, path_prefix):
    """Write <prefix>.json + <prefix>.bin (layout in the module docstring)."""
    meta = {
        "format": "kerrlab-snapshot-1",
        "layout": "r f8, rstar f8, then E,B[,dtE,dtB] c16, column-major",
        "M": snap.params.M,
        "a": snap.params.a,
        "t": snap.t,
        "m": snap.basis.m,
        "n_r": int(snap.r.size),
        "n_theta": int(snap.basis.n_theta),
        "has_dt": bool(snap.has_dt),
    }
    with open(str(path_prefix) + ".json", "w") as fh:
        json.dump(meta, fh, indent=1)
    blobs = [snap.r.astype(np.float64), snap.rstar.astype(np.float64)]
    arrays = [snap.E, snap.B] + ([snap.dtE, snap.dtB] if snap.has_dt else [])
    with open(str(path_prefix) + ".bin", "wb") as fh:
        for b in blobs:
            fh.write(np.asfortranarray(b).tobytes(order="F"))
        for arr in arrays:
            fh.write(np.asfortranarray(arr.astype(np.complex128)).tobytes(order="F"))


def load_snapshot(path_prefix):
    with open(str(path_prefix) + ".json") as fh:
        meta = json.load(fh)
    if meta.get("format") != "kerrlab-snapshot-1":
        raise ValueError("unrecognized snapshot format")
    params = KerrParams(M=meta["M"], a=meta["a"])
    n_r, n_th = meta["n_r"], meta["n_theta"]
    basis = angular_basis(n_th, meta["m"])
    raw = open(str(path_prefix) + ".bin", "rb").read()
    off = 0

    def take(count, dtype, shape):
        nonlocal off
        n_bytes = count * np.dtype(dtype).itemsize
        arr = np.frombuffer(raw[off : off + n_bytes], dtype=dtype)
        off += n_bytes
        return arr.reshape(shape, order="F")

    r = take(n_r, np.float64, (n_r,))
    rstar = take(n_r, np.float64, (n_r,))
    fields = [
        take(3 * n_r * n_th, np.complex128, (3, n_r, n_th)).copy()
        for _ in range(4 if meta["has_dt"] else 2)
    ]
    dtE, dtB = (fields[2], fields[3]) if meta["has_dt"] else (None, None)
    return MaxwellSnapshot(
        params=params, t=meta["t"], r=r.copy(), rstar=rstar.copy(), basis=basis,
        E=fields[0], B=fields[1], dtE=dtE, dtB=dtB,
    )
