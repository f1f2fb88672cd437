"""Scalar theta functions and the twisted kernels."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from isotheta.elliptic import (
    jacobi_theta,
    jacobi_theta_dlam,
    lattice_reduce,
    theta_constants,
    theta_pq,
    theta_pq_dlam,
    w_alpha,
    w_alpha_dlam,
    winding_number,
    zcal_alpha,
    zcal_alpha_zero,
)
from isotheta.errors import ConvergenceError, DomainError, PoleError

MU = 0.21 + 0.93j
RNG = np.random.default_rng(7)


def brute_theta(p, q, lam, mu, cutoff=80):
    # Direct partial sum with no lattice reduction: the frozen oracle.
    m = np.arange(-cutoff, cutoff + 1)
    return np.sum(np.exp(1j * np.pi * mu * (m + p) ** 2 + 2j * np.pi * (m + p) * (lam + q)))


def rand_points(n, scale=1.5, clearance=0.25):
    # Rejection-sample away from the half-lattice, where the kernels have
    # poles (lattice points for w, half periods for Z).
    half = [0.0, 0.5, 0.5 * MU, 0.5 * (1 + MU)]
    out = []
    while len(out) < n:
        lam = complex(RNG.uniform(-scale, scale) + 1j * RNG.uniform(-scale, scale) * MU.imag)
        if all(abs(lattice_reduce(lam - hp, MU)[0]) > clearance for hp in half):
            out.append(lam)
    return np.array(out)


class TestThetaSeries:
    def test_matches_brute_force_sum(self):
        for p, q in [(0.0, 0.0), (0.5, 0.5), (0.3, -0.7), (0.25 + 0.1j, -0.4 - 0.2j)]:
            for lam in rand_points(12):
                got = theta_pq(p, q, lam, MU)
                want = brute_theta(p, q, lam, MU)
                assert abs(got - want) < 1e-11 * max(1.0, abs(want))

    def test_derivative_matches_brute_force(self):
        m = np.arange(-80, 81)
        for lam in rand_points(6):
            got = theta_pq_dlam(0.3, 0.1, lam, MU)
            mp = m + 0.3
            want = np.sum(
                2j * np.pi * mp * np.exp(1j * np.pi * MU * mp**2 + 2j * np.pi * mp * (lam + 0.1))
            )
            assert abs(got - want) < 1e-10 * max(1.0, abs(want))

    def test_theta1_odd_and_vanishes_at_zero(self):
        assert abs(jacobi_theta(1, 0.0, MU)) < 1e-13
        for lam in rand_points(8):
            assert abs(jacobi_theta(1, -lam, MU) + jacobi_theta(1, lam, MU)) < 1e-11

    def test_jacobi_derivative_identity(self):
        # theta_1'(0) = pi * theta_2 theta_3 theta_4: pins the series conventions.
        t2, t3, t4 = theta_constants(MU)
        d1 = jacobi_theta_dlam(1, 0.0, MU)
        assert abs(d1 - np.pi * t2 * t3 * t4) < 1e-11 * abs(d1)

    def test_vectorized_matches_scalar(self):
        lams = rand_points(9)
        batch = theta_pq(0.2, 0.4, lams, MU)
        singles = np.array([theta_pq(0.2, 0.4, x, MU) for x in lams])
        assert np.allclose(batch, singles, rtol=0, atol=1e-13)

    def test_modulus_domain_error(self):
        with pytest.raises(DomainError):
            theta_pq(0.0, 0.0, 0.3, 1.0 - 0.5j)

    def test_convergence_cap(self):
        with pytest.raises(ConvergenceError):
            theta_pq(0.0, 0.0, 0.3, 1e-11j)


@settings(max_examples=60, deadline=None)
@given(
    p=st.floats(-1.5, 1.5),
    q=st.floats(-1.5, 1.5),
    x=st.floats(-2.0, 2.0),
    y=st.floats(-2.0, 2.0),
)
def test_quasi_periodicity_property(p, q, x, y):
    lam = x + 1j * y * MU.imag
    base = theta_pq(p, q, lam, MU)
    plus_one = theta_pq(p, q, lam + 1.0, MU)
    plus_mu = theta_pq(p, q, lam + MU, MU)
    scale = max(1.0, abs(base))
    assert abs(plus_one - np.exp(2j * np.pi * p) * base) < 1e-9 * scale
    want = np.exp(-1j * np.pi * MU - 2j * np.pi * (lam + q)) * base
    assert abs(plus_mu - want) < 1e-9 * max(scale, abs(want))


class TestKernels:
    def test_unit_residue(self):
        # lam * w_alpha(lam) -> 1; at lam = 1e-4 the product is within 1e-3 of 1.
        for alpha in (1, 2, 3):
            v = 1e-4 * w_alpha(alpha, 1e-4, MU)
            assert abs(v - 1.0) < 1e-3
            v2 = 1e-6 * w_alpha(alpha, 1e-6, MU)
            assert abs(v2 - 1.0) < 1e-7

    def test_periodicity_signs(self):
        signs = {1: (-1, +1), 2: (-1, -1), 3: (+1, -1)}
        for alpha in (1, 2, 3):
            s1, smu = signs[alpha]
            for lam in rand_points(8):
                w0 = w_alpha(alpha, lam, MU)
                assert abs(w_alpha(alpha, lam + 1.0, MU) - s1 * w0) < 1e-9 * abs(w0)
                assert abs(w_alpha(alpha, lam + MU, MU) - smu * w0) < 1e-9 * abs(w0)

    def test_w_odd(self):
        for alpha in (1, 2, 3):
            for lam in rand_points(5):
                assert abs(w_alpha(alpha, -lam, MU) + w_alpha(alpha, lam, MU)) < 1e-9

    def test_w_derivative_fd(self):
        h = 1e-5
        for alpha in (1, 2, 3):
            for lam in rand_points(5):
                fd = (w_alpha(alpha, lam + h, MU) - w_alpha(alpha, lam - h, MU)) / (2 * h)
                got = w_alpha_dlam(alpha, lam, MU)
                assert abs(fd - got) < 1e-5 * max(1.0, abs(got))

    def test_pole_exclusion(self):
        with pytest.raises(PoleError):
            w_alpha(1, 1.0 + MU + 1e-9, MU)

    def test_z_periodicity_laws(self):
        # Z_1: (+1, +mu) -> (-Z_1, Z_1 - w_1); Z_2 -> (-Z_2, -Z_2 + w_2); Z_3 -> (Z_3, -Z_3 + w_3),
        # with w_alpha evaluated at the same lam.
        for lam in rand_points(8):
            z1, z2, z3 = (zcal_alpha(a, lam, MU) for a in (1, 2, 3))
            w1, w2, w3 = (w_alpha(a, lam, MU) for a in (1, 2, 3))
            assert abs(zcal_alpha(1, lam + 1, MU) + z1) < 1e-9
            assert abs(zcal_alpha(2, lam + 1, MU) + z2) < 1e-9
            assert abs(zcal_alpha(3, lam + 1, MU) - z3) < 1e-9
            assert abs(zcal_alpha(1, lam + MU, MU) - (z1 - w1)) < 1e-9
            assert abs(zcal_alpha(2, lam + MU, MU) - (-z2 + w2)) < 1e-9
            assert abs(zcal_alpha(3, lam + MU, MU) - (-z3 + w3)) < 1e-9

    def test_z_even(self):
        for alpha in (1, 2, 3):
            for lam in rand_points(5):
                assert abs(zcal_alpha(alpha, -lam, MU) - zcal_alpha(alpha, lam, MU)) < 1e-9

    def test_z_zero_limit(self):
        for alpha in (1, 2, 3):
            z0 = zcal_alpha_zero(alpha, MU)
            near = zcal_alpha(alpha, 1e-5, MU)
            assert abs(near - z0) < 1e-8

    def test_heat_identity(self):
        # d w_alpha / d mu = d Z_alpha / d lam, by central differences.
        h = 1e-4
        pts = rand_points(25)
        worst = 0.0
        for alpha in (1, 2, 3):
            for lam in pts:
                dmu = (w_alpha(alpha, lam, MU + h) - w_alpha(alpha, lam, MU - h)) / (2 * h)
                dlam = (zcal_alpha(alpha, lam + h, MU) - zcal_alpha(alpha, lam - h, MU)) / (2 * h)
                worst = max(worst, abs(dmu - dlam))
        assert worst < 1e-6


class TestWinding:
    def _cell_boundary(self, n=400):
        # Offset so no zero or pole of the tested functions sits on the edge.
        t = np.linspace(0.0, 1.0, n, endpoint=False)
        z0 = -0.37 - 0.44 * MU
        corners = [z0, z0 + 1, z0 + 1 + MU, z0 + MU]
        pts = []
        for a, b in zip(corners, corners[1:] + corners[:1]):
            pts.append(a + (b - a) * t)
        return np.concatenate(pts)

    def test_theta1_has_one_zero_per_cell(self):
        vals = jacobi_theta(1, self._cell_boundary(), MU)
        assert winding_number(vals) == 1

    def test_w_alpha_zero_pole_balance(self):
        for alpha in (1, 2, 3):
            vals = w_alpha(alpha, self._cell_boundary(), MU)
            assert winding_number(vals) == 0

    def test_reduce_roundtrip(self):
        lam = 3.7 - 2.2j
        lam0, n1, n2 = lattice_reduce(lam, MU)
        assert abs(lam0 + n1 + n2 * MU - lam) < 1e-14
        assert abs(lam0.imag) <= 0.5 * MU.imag + 1e-12
