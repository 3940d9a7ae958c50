"""Shared coordinate-expression oracles for frame-component tests.

Everything here is built from the metric and the alternating symbol only,
so it is independent of the closures and 2x2 inversions used by the
evolution module.
"""

import itertools

import numpy as np

from kerrlab.geometry import metric, tetrad


def levi_civita():
    eps = np.zeros((4, 4, 4, 4))
    for p in itertools.permutations(range(4)):
        sgn, q = 1.0, list(p)
        for i in range(4):
            for j in range(i + 1, 4):
                if q[i] > q[j]:
                    sgn, (q[i], q[j]) = -sgn, (q[j], q[i])
        eps[p] = sgn
    return eps


EPS = levi_civita()


def frame_fields_from_F(params, F, r, th):
    """E_a = F(frame_a, T_hat), B_a = -(*F)(frame_a, T_hat), frame (R,Th,Ph)."""
    g, ginv, sqrtg = metric(params, r, th)
    frames = tetrad(params, r, th)
    Fup = ginv @ F @ ginv.T
    dual = 0.5 * sqrtg * np.einsum("abcd,cd->ab", EPS, Fup)
    That = frames["T_hat"]
    vecs = [frames["R_hat"], frames["Theta_hat"], frames["Phi_hat"]]
    E = np.array([v @ F @ That for v in vecs])
    B = np.array([-(v @ dual @ That) for v in vecs])
    return E, B


def spin_from_EB(E, B):
    """Middle/outer spin components of real frame fields (m = 0 data)."""
    psi = E + 1j * B
    phi_p = -(psi[1] + 1j * psi[2]) / 2.0
    phi_0 = psi[0] / np.sqrt(2.0)
    phi_m = -(psi[1] - 1j * psi[2]) / 2.0
    return phi_p, phi_0, phi_m


def random_two_form(rng):
    A = rng.normal(size=(4, 4))
    return A - A.T
