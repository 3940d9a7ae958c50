"""Pseudospectral machinery on the polar angle.

Everything here works at a fixed azimuthal mode number m: a field on the
sphere is f(theta) e^{i m phi}, represented either by its values at
Gauss-Legendre nodes u_j = cos(theta_j) or by coefficients in the basis of
normalized associated Legendre functions Pbar_l^m(u), with

    integral_{-1}^{1} Pbar_l^m Pbar_k^m du = delta_{lk}.

Gauss-Legendre nodes never touch the poles, so pole regularity is handled
by the basis itself rather than by boundary conditions.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh


def _pbar_table(ell_max, m, u):
    """Normalized associated Legendre values for l = m..ell_max at points u.

    Returns an array of shape (len(u), ell_max - m + 1).  Uses the stable
    upward three-term recurrence; Condon-Shortley phase included.
    """
    u = np.asarray(u, dtype=float)
    s = np.sqrt(np.clip(1.0 - u * u, 0.0, None))
    n_modes = ell_max - m + 1
    out = np.empty(u.shape + (n_modes,))

    # seed Pbar_m^m = (-1)^m sqrt((2m+1)/2) sqrt((2m-1)!!/(2m)!!) sin^m
    p = np.full_like(u, np.sqrt(0.5))
    for k in range(1, m + 1):
        p = -p * s * np.sqrt((2 * k + 1) / (2.0 * k))
    out[..., 0] = p
    if n_modes == 1:
        return out

    def a_rec(l):
        return np.sqrt((2 * l + 1) * (2 * l + 3) / ((l + 1.0 - m) * (l + 1.0 + m)))

    def b_rec(l):
        return np.sqrt(
            (2 * l + 3)
            * (l - m)
            * (l + m)
            / ((2 * l - 1.0) * (l + 1.0 - m) * (l + 1.0 + m))
        )

    out[..., 1] = a_rec(m) * u * out[..., 0]
    for j in range(1, n_modes - 1):
        l = m + j
        out[..., j + 1] = a_rec(l) * u * out[..., j] - b_rec(l) * out[..., j - 1]
    return out


def _dpbar_dtheta_table(ell_max, m, u, pb):
    """d/dtheta of the normalized basis, from the lowering recurrence.

    d/dtheta Pbar_l = (l u Pbar_l - e_l Pbar_{l-1}) / sin(theta),
    e_l = sqrt((2l+1)/(2l-1) (l^2-m^2)).  Valid at interior nodes only.
    """
    s = np.sqrt(np.clip(1.0 - u * u, 0.0, None))
    out = np.empty_like(pb)
    for j in range(pb.shape[-1]):
        l = m + j
        acc = l * u * pb[..., j]
        if j > 0:
            e_l = np.sqrt((2 * l + 1) / (2 * l - 1.0) * (l * l - m * m))
            acc = acc - e_l * pb[..., j - 1]
        out[..., j] = acc / s
    return out


def jacobi_offdiag(ell, m):
    """Coupling u Pbar_l = A_l Pbar_{l+1} + A_{l-1} Pbar_{l-1}."""
    ell = np.asarray(ell, dtype=float)
    return np.sqrt(((ell + 1) ** 2 - m * m) / ((2 * ell + 1) * (2 * ell + 3)))


@dataclass
class AngularBasis:
    """Gauss-Legendre collocation grid paired with a Legendre mode basis.

    Attributes
    ----------
    m : azimuthal mode number (the basis only depends on |m|)
    ell : array of polar indices, |m| .. |m| + n_modes - 1
    theta, u, w : nodes (increasing theta), u = cos(theta), GL weights for du
    P : (n_theta, n_modes) synthesis matrix, P[j,k] = Pbar_{ell_k}(u_j)
    D : (n_theta, n_modes) values of d/dtheta of the basis at the nodes
    """

    m: int
    ell: np.ndarray
    theta: np.ndarray
    u: np.ndarray
    w: np.ndarray
    P: np.ndarray
    D: np.ndarray
    analysis: np.ndarray = field(init=False)

    def __post_init__(self):
        # exact left inverse of P on the mode space: (P^T W) P = I
        self.analysis = self.P.T * self.w

    @property
    def n_theta(self):
        return self.theta.size

    @property
    def n_modes(self):
        return self.ell.size

    def to_modes(self, f):
        """Nodal values -> Legendre coefficients, acting on the last axis."""
        return np.asarray(f) @ self.analysis.T

    def to_nodes(self, c):
        return np.asarray(c) @ self.P.T

    def to_nodes_dtheta(self, c):
        """Synthesize d/dtheta of the field with coefficients c."""
        return np.asarray(c) @ self.D.T

    def quad(self, f):
        """integral f du = integral f sin(theta) dtheta over the last axis."""
        return np.asarray(f) @ self.w

    def laplacian_quadform(self, c):
        """integral (|df/dtheta|^2 + m^2 |f|^2 / sin^2) du, from coefficients.

        This is sum_l l(l+1) |c_l|^2, the sphere-gradient square without the
        2 pi azimuthal factor.
        """
        lam = self.ell * (self.ell + 1.0)
        return np.abs(np.asarray(c)) ** 2 @ lam

    def polar_symbol(self):
        """Modal multiplier of the fixed-m polar operator.

        The operator (1/sin)d_theta sin d_theta - m^2 cos^2/sin^2 acts
        diagonally on the basis with eigenvalue -l(l+1) + m^2.
        """
        return -self.ell * (self.ell + 1.0) + self.m * self.m


def angular_basis(n_theta, m, n_modes=None):
    m_abs = abs(int(m))
    if n_modes is None:
        n_modes = n_theta - m_abs
    if n_modes < 1:
        raise ValueError("need at least one mode; increase n_theta")
    ell_max = m_abs + n_modes - 1
    # quadrature must integrate Pbar_l Pbar_k (degree <= 2 ell_max) exactly
    if 2 * ell_max > 2 * n_theta - 1:
        raise ValueError("n_theta too small for requested mode count")

    x, w = np.polynomial.legendre.leggauss(n_theta)
    u = x[::-1].copy()  # theta increasing from 0 to pi
    w = w[::-1].copy()
    theta = np.arccos(u)
    pb = _pbar_table(ell_max, m_abs, u)
    dpb = _dpbar_dtheta_table(ell_max, m_abs, u, pb)
    ell = np.arange(m_abs, ell_max + 1, dtype=float)
    return AngularBasis(m=int(m), ell=ell, theta=theta, u=u, w=w, P=pb, D=dpb)


def sin2_mode_matrix(m, n_modes, n_buffer=8):
    """Matrix of sin^2(theta) in the mode basis, shape (n_modes, n_modes).

    Built as I - J^2 with J the (tridiagonal, zero-diagonal) matrix of
    multiplication by u.  J^2 is evaluated on a buffered mode range so the
    returned block is exact, not truncated.
    """
    m_abs = abs(int(m))
    n_ext = n_modes + n_buffer
    ell = np.arange(m_abs, m_abs + n_ext, dtype=float)
    off = jacobi_offdiag(ell[:-1], m_abs)
    J = np.diag(off, 1) + np.diag(off, -1)
    S = np.eye(n_ext) - J @ J
    return S[:n_modes, :n_modes]


def spheroidal_eigs(m, c2, n_eigs, n_buffer=16):
    """Eigenpairs of the polar operator with an added c2 sin^2 term.

    Solves  [ -(1/sin)d_theta sin d_theta + m^2 cos^2/sin^2 + c2 sin^2 ] f
          = Q f
    in the Legendre mode basis.  For c2 = 0 the eigenvalues are exactly
    l(l+1) - m^2.  c2 may be negative (it enters as -(frequency)^2 times a
    negative weight in the wave operator), in which case the operator is
    still symmetric and the eigenvalues just shift down.

    Returns (Q, V, ell): the n_eigs smallest eigenvalues ascending; columns
    of V are the eigenvectors, expanded over the buffered index range ell
    (so no truncation error is introduced in the vectors themselves).
    """
    m_abs = abs(int(m))
    n_ext = n_eigs + n_buffer
    ell = np.arange(m_abs, m_abs + n_ext, dtype=float)
    H = np.diag(ell * (ell + 1.0) - m_abs * m_abs) + c2 * sin2_mode_matrix(
        m_abs, n_ext, n_buffer=n_buffer
    )
    Q, V = eigh(H)
    return Q[:n_eigs], V[:, :n_eigs], ell
