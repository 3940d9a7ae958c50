import itertools

import numpy as np
import pytest

from kerrlab.angular import angular_basis
from kerrlab.fields import (
    MaxwellSnapshot,
    angular_lowerbound_gap,
    charge_decompose,
    charges,
    coulomb_snapshot,
    dt_upsilon,
    energy_fi,
    energy_maxwell,
    inner_product,
    load_snapshot,
    phi0_pulse,
    psi_from_spin,
    save_snapshot,
    snapshot_from_spin,
    spin_components,
    upsilon,
)
from kerrlab.geometry import KerrParams, metric, tetrad, tortoise, tortoise_inverse


def make_grid(params, rs_min, rs_max, n_r, n_theta, m=0):
    rstar = np.linspace(rs_min, rs_max, n_r)
    r = np.array([tortoise_inverse(params, s) for s in rstar])
    return r, rstar, angular_basis(n_theta, m)


# ---------------------------------------------------------------------------
# coordinate-expression oracles


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


def kn_coordinate_F(params, Q, r, th):
    """Stationary charged solution as a coordinate two-form (hand closed form)."""
    a = params.a
    Sg = r * r + (a * np.cos(th)) ** 2
    s, c = np.sin(th), np.cos(th)
    F = np.zeros((4, 4))
    F[1, 0] = Q * (r * r - (a * c) ** 2) / Sg**2
    F[2, 0] = -2 * Q * r * a * a * s * c / Sg**2
    F[1, 3] = -Q * a * s * s * (r * r - (a * c) ** 2) / Sg**2
    F[2, 3] = 2 * Q * a * r * s * c * (r * r + a * a) / Sg**2
    return F - F.T


def closed_pert_F(r, th):
    """An exact (closed) two-form dA that is not a Maxwell solution."""
    f = np.exp(-(((r - 5) / 2) ** 2))
    fp = -2 * (r - 5) / 4 * f
    gth = np.cos(th) * np.sin(th) ** 2
    gp = -np.sin(th) ** 3 + 2 * np.cos(th) ** 2 * np.sin(th)
    e = np.exp(-(((r - 6) / 3) ** 2))
    h = r * e
    hp = e + r * (-2 * (r - 6) / 9) * e
    k = np.sin(th) ** 2
    kp = 2 * np.sin(th) * np.cos(th)
    F = np.zeros((4, 4))
    F[1, 0] = fp * gth
    F[2, 0] = f * gp
    F[1, 3] = hp * k
    F[2, 3] = h * kp
    return F - F.T


def snapshot_from_coordinate_F(params, F_of_rth, r, rstar, basis):
    n_r, n_th = r.size, basis.n_theta
    E = np.zeros((3, n_r, n_th), complex)
    B = np.zeros((3, n_r, n_th), complex)
    for i, rr in enumerate(r):
        for j, th in enumerate(basis.theta):
            Ev, Bv = frame_fields_from_F(params, F_of_rth(rr, th), rr, th)
            E[:, i, j] = Ev
            B[:, i, j] = Bv
    return MaxwellSnapshot(
        params=params, t=0.0, r=r, rstar=rstar, basis=basis, E=E, B=B
    )


# ---------------------------------------------------------------------------


class TestSpinComponents:
    def test_roundtrip_real_field(self):
        params = KerrParams(M=1.0, a=0.07)
        r, rstar, basis = make_grid(params, 0.0, 10.0, 9, 8)
        rng = np.random.default_rng(2)
        E = rng.normal(size=(3, 9, 8)).astype(complex)
        B = rng.normal(size=(3, 9, 8)).astype(complex)
        snap = MaxwellSnapshot(params, 0.0, r, rstar, basis, E, B)
        phis = spin_components(snap)
        psi = psi_from_spin(*phis)
        assert np.max(np.abs(psi.real - E.real)) < 1e-13
        assert np.max(np.abs(psi.imag - B.real)) < 1e-13

    def test_kn_middle_component_closed_form(self):
        # the hand-derived charged solution must give phi_0 = Q/(sqrt2 p^2)
        # and vanishing extreme components under the frozen conventions
        params = KerrParams(M=1.0, a=0.25)
        Q = 1.7
        r = np.array([2.3, 3.0, 5.0, 11.0])
        rstar = tortoise(params, r)
        basis = angular_basis(10, 0)
        snap = snapshot_from_coordinate_F(
            params, lambda rr, th: kn_coordinate_F(params, Q, rr, th),
            r, rstar, basis,
        )
        phi_p, phi_0, phi_m = spin_components(snap)
        p = r[:, None] - 1j * params.a * basis.u[None, :]
        assert np.max(np.abs(phi_0 - Q / (np.sqrt(2) * p**2))) < 1e-12
        assert np.max(np.abs(phi_p)) < 1e-12
        assert np.max(np.abs(phi_m)) < 1e-12

    def test_zero_field_components_vanish(self):
        params = KerrParams(M=1.0, a=0.05)
        r, rstar, basis = make_grid(params, 0.0, 5.0, 7, 6)
        z = np.zeros((3, 7, 6), complex)
        snap = MaxwellSnapshot(params, 0.0, r, rstar, basis, z, z.copy())
        for comp in spin_components(snap):
            assert np.all(comp == 0)


class TestCharges:
    def test_coulomb_calibration_complex_charge(self):
        params = KerrParams(M=1.0, a=0.05)
        r, rstar, basis = make_grid(params, -5.0, 60.0, 241, 12)
        snap = coulomb_snapshot(params, 2.0 - 3.0j, r, rstar, basis)
        got = charges(snap)
        assert got.q_E == pytest.approx(2.0, abs=1e-10)
        assert got.q_B == pytest.approx(-3.0, abs=1e-10)

    def test_r_independence_charged_solution(self):
        params = KerrParams(M=1.0, a=0.25)
        r = np.array([3.0, 10.0, 50.0])
        rstar = tortoise(params, r)
        basis = angular_basis(24, 0)
        snap = snapshot_from_coordinate_F(
            params, lambda rr, th: kn_coordinate_F(params, 1.7, rr, th),
            r, rstar, basis,
        )
        vals = [charges(snap, r=rr).as_complex for rr in r]
        assert abs(vals[0] - vals[1]) < 1e-9
        assert abs(vals[1] - vals[2]) < 1e-9
        # coordinate-two-form normalization: operational charge is Q/sqrt2
        assert vals[0] == pytest.approx(1.7 / np.sqrt(2), abs=1e-9)

    def test_r_independence_with_exact_perturbation(self):
        # adding a closed two-form that is not a solution must not move the
        # charge where its dual flux vanishes; at zero spin that is every
        # sphere, by parity of the profile
        params = KerrParams(M=1.0, a=0.0)
        r = np.array([3.0, 5.5, 10.0, 50.0])
        rstar = tortoise(params, r)
        basis = angular_basis(24, 0)
        snap = snapshot_from_coordinate_F(
            params,
            lambda rr, th: kn_coordinate_F(params, 1.7, rr, th)
            + 0.6 * closed_pert_F(rr, th),
            r, rstar, basis,
        )
        vals = [charges(snap, r=rr).as_complex for rr in r]
        for v in vals:
            assert v == pytest.approx(1.7 / np.sqrt(2), abs=1e-9)

    def test_zero_field(self):
        params = KerrParams(M=1.0)
        r, rstar, basis = make_grid(params, 0.0, 5.0, 7, 6)
        z = np.zeros((3, 7, 6), complex)
        snap = MaxwellSnapshot(params, 0.0, r, rstar, basis, z, z.copy())
        got = charges(snap)
        assert got.q_E == 0 and got.q_B == 0


class TestCoulomb:
    def test_upsilon_is_q_over_p(self):
        params = KerrParams(M=1.0, a=0.09)
        r, rstar, basis = make_grid(params, 0.0, 30.0, 41, 10)
        q = 0.8 + 0.3j
        snap = coulomb_snapshot(params, q, r, rstar, basis)
        p = r[:, None] - 1j * params.a * basis.u[None, :]
        assert np.max(np.abs(upsilon(snap) - q / p)) < 1e-13
        assert np.all(dt_upsilon(snap) == 0)

    def test_schwarzschild_radial_falloff(self):
        params = KerrParams(M=1.0, a=0.0)
        r, rstar, basis = make_grid(params, 0.0, 30.0, 21, 8)
        snap = coulomb_snapshot(params, 1.0, r, rstar, basis)
        _, phi_0, _ = spin_components(snap)
        assert np.max(np.abs(phi_0 - 1.0 / r[:, None] ** 2)) < 1e-13


class TestEnergy:
    def test_coulomb_closed_form_at_zero_spin(self):
        params = KerrParams(M=1.0, a=0.0)

        def err(n_r):
            r, rstar, basis = make_grid(params, -15.0, 200.0, n_r, 8)
            snap = coulomb_snapshot(params, 1.0, r, rstar, basis)
            want = 4 * np.pi * (1 / r[0] - 1 / r[-1])
            return abs(energy_maxwell(snap) - want) / want

        e_c, e_f = err(801), err(1601)
        assert e_c < 1e-6
        assert e_f < e_c / 6  # quadrature order at least cubic

    def test_quadratic_scaling(self):
        params = KerrParams(M=1.0, a=0.03)
        r, rstar, basis = make_grid(params, 0.0, 40.0, 101, 8)
        snap = phi0_pulse(params, r, rstar, basis, ell=1, r_center=15.0, width=5.0)
        e1 = energy_maxwell(snap)
        e2 = energy_maxwell(3.0 * snap)
        assert e2 == pytest.approx(9 * e1, rel=1e-14)
        assert energy_maxwell(snap - snap) == 0

    def test_inner_product_diagonal_matches_energy_sum(self):
        params = KerrParams(M=1.0, a=0.06)
        r, rstar, basis = make_grid(params, 5.0, 45.0, 161, 12)
        snap = phi0_pulse(params, r, rstar, basis, ell=2, r_center=25.0, width=6.0)
        lhs = inner_product(snap, snap)
        want = energy_maxwell(snap) + energy_fi(snap)
        assert lhs.imag == pytest.approx(0.0, abs=1e-12 * abs(want))
        assert lhs.real == pytest.approx(want, rel=1e-10)

    def test_inner_product_hermitian_and_zero(self):
        params = KerrParams(M=1.0, a=0.06)
        r, rstar, basis = make_grid(params, 5.0, 45.0, 81, 10)
        f = phi0_pulse(params, r, rstar, basis, ell=1, r_center=22.0, width=5.0)
        g = phi0_pulse(params, r, rstar, basis, ell=2, r_center=28.0, width=6.0)
        assert inner_product(f - f, g) == 0
        assert inner_product(f, 1j * g) == pytest.approx(
            np.conj(inner_product(1j * g, f)), rel=1e-12
        )

    def test_coulomb_vs_chargefree_almost_orthogonal(self):
        # the pairing of the stationary family with charge-free data must be
        # small relative to the norm product, with ratio O(a/M): halving the
        # spin should halve the normalized pairing
        def normalized_pairing(a):
            params = KerrParams(M=1.0, a=a)
            r, rstar, basis = make_grid(params, -5.0, 60.0, 321, 12)
            coul = coulomb_snapshot(params, 1.0, r, rstar, basis)
            cf = phi0_pulse(params, r, rstar, basis, ell=1, r_center=20.0, width=6.0)
            norms = np.sqrt(inner_product(coul, coul).real) * np.sqrt(
                inner_product(cf, cf).real
            )
            return abs(inner_product(coul, cf)) / norms

        c_coarse = normalized_pairing(0.05) / 0.05
        c_fine = normalized_pairing(0.025) / 0.025
        print(f"almost-orthogonality constant: {c_fine:.4f}")
        assert c_fine < 10.0
        assert c_coarse == pytest.approx(c_fine, rel=0.2)


class TestChargeDecompose:
    def test_recovers_coulomb_plus_pulse(self):
        params = KerrParams(M=1.0, a=0.05)
        r, rstar, basis = make_grid(params, -5.0, 60.0, 241, 12)
        coul = coulomb_snapshot(params, 1.0, r, rstar, basis)
        pulse = phi0_pulse(params, r, rstar, basis, ell=2, r_center=20.0, width=5.0)
        stat, cf = charge_decompose(coul + pulse)
        assert charges(stat).q_E == pytest.approx(1.0, abs=1e-9)
        assert abs(charges(cf).as_complex) < 1e-9
        assert np.max(np.abs(cf.E - pulse.E)) < 1e-9
        assert np.max(np.abs(cf.B - pulse.B)) < 1e-9

    def test_idempotent(self):
        params = KerrParams(M=1.0, a=0.08)
        r, rstar, basis = make_grid(params, -5.0, 60.0, 241, 12)
        total = coulomb_snapshot(params, 0.7 + 0.2j, r, rstar, basis) + phi0_pulse(
            params, r, rstar, basis, ell=1, r_center=25.0, width=6.0
        )
        _, cf = charge_decompose(total)
        stat2, cf2 = charge_decompose(cf)
        assert np.max(np.abs(stat2.E)) < 1e-12
        assert np.max(np.abs(cf2.E - cf.E)) < 1e-12

    def test_energy_almost_additive(self):
        params = KerrParams(M=1.0, a=0.05)
        r, rstar, basis = make_grid(params, -5.0, 60.0, 321, 12)
        total = coulomb_snapshot(params, 1.0, r, rstar, basis) + phi0_pulse(
            params, r, rstar, basis, ell=1, r_center=20.0, width=6.0
        )
        stat, cf = charge_decompose(total)
        e_tot = energy_maxwell(total)
        e_sum = energy_maxwell(stat) + energy_maxwell(cf)
        dev = abs(e_tot - e_sum) / e_sum
        print(f"energy additivity deviation / (a/M): {dev / (params.a / params.M):.3f}")
        assert dev < params.a / params.M


class TestAngularLowerBound:
    def _monochromatic(self, params, ell, n_theta=12):
        r, rstar, basis = make_grid(params, 0.0, 30.0, 31, n_theta)
        col = np.zeros(basis.n_modes)
        col[ell] = 1.0
        prof = basis.to_nodes(col)
        phi_0 = np.ones_like(r)[:, None] * prof[None, :] / r[:, None] ** 2
        zero = np.zeros_like(phi_0)
        return snapshot_from_spin(params, 0.0, r, rstar, basis, zero, phi_0, zero)

    def test_first_eigenvalue_saturates(self):
        snap = self._monochromatic(KerrParams(M=1.0, a=0.0), ell=1)
        assert angular_lowerbound_gap(snap, r=10.0) == pytest.approx(0.0, abs=1e-12)

    def test_higher_harmonic_strictly_positive(self):
        snap = self._monochromatic(KerrParams(M=1.0, a=0.0), ell=2)
        basis = snap.basis
        i_r = np.argmin(np.abs(snap.r - 10.0))
        _, phi_0, _ = spin_components(snap)
        l2 = 2 * np.pi * basis.quad(np.abs(phi_0[i_r]) ** 2)
        assert angular_lowerbound_gap(snap, r=10.0) == pytest.approx(4 * l2, rel=1e-10)

    def test_charged_field_goes_negative(self):
        params = KerrParams(M=1.0, a=0.0)
        r, rstar, basis = make_grid(params, 0.0, 30.0, 31, 12)
        snap = coulomb_snapshot(params, 1.0, r, rstar, basis)
        i_r = np.argmin(np.abs(r - 10.0))
        _, phi_0, _ = spin_components(snap)
        l2 = 2 * np.pi * basis.quad(np.abs(phi_0[i_r]) ** 2)
        assert angular_lowerbound_gap(snap, r=10.0) == pytest.approx(-2 * l2, rel=1e-10)


class TestSerialization:
    def test_roundtrip(self, tmp_path):
        params = KerrParams(M=1.0, a=0.04)
        r, rstar, basis = make_grid(params, 0.0, 20.0, 17, 8)
        snap = phi0_pulse(params, r, rstar, basis, ell=1, r_center=10.0, width=4.0)
        save_snapshot(snap, tmp_path / "snap")
        back = load_snapshot(tmp_path / "snap")
        assert back.params == params
        assert np.array_equal(back.r, snap.r)
        assert np.array_equal(back.E, snap.E)
        assert np.array_equal(back.B, snap.B)
        assert np.array_equal(back.dtE, snap.dtE)
        assert back.basis.m == snap.basis.m
