"""Genus-g theta: reductions, quasi-periodicity, parity, gradients."""

import numpy as np
import pytest

from isotheta.elliptic import theta_pq
from isotheta.errors import ArgumentError, DomainError
from isotheta.riemann_theta import ThetaEvaluator, as_riemann_matrix, char_parity, theta_g

B2 = np.array([[0.2 + 0.9j, 0.2 + 0.1j], [0.2 + 0.1j, -0.3 + 1.1j]])
RNG = np.random.default_rng(11)


def rand_z(n, g):
    return RNG.uniform(-1.2, 1.2, (n, g)) + 1j * RNG.uniform(-0.8, 0.8, (n, g))


class TestValue:
    def test_genus_one_matches_scalar_theta(self):
        mu = 0.3 + 0.8j
        for z in rand_z(8, 1):
            got = theta_g([0.3], [-0.4], z, [[mu]])
            want = theta_pq(0.3, -0.4, complex(z[0]), mu)
            assert abs(got - want) < 1e-11 * max(1.0, abs(want))

    def test_block_diagonal_factorizes(self):
        # For B = diag(mu1, mu2) the genus-2 theta is a product of scalar thetas.
        mu1, mu2 = 0.1 + 0.7j, -0.2 + 1.3j
        B = np.diag([mu1, mu2])
        p, q = [0.2, -0.3], [0.15, 0.45]
        for z in rand_z(8, 2):
            got = theta_g(p, q, z, B)
            want = theta_pq(p[0], q[0], complex(z[0]), mu1) * theta_pq(
                p[1], q[1], complex(z[1]), mu2
            )
            assert abs(got - want) < 1e-10 * max(1.0, abs(want))

    def test_quasi_periodicity_integer_shift(self):
        ev = ThetaEvaluator(B2)
        p, q = np.array([0.3, -0.2]), np.array([0.1, 0.4])
        for z in rand_z(6, 2):
            base = ev.value(p, q, z)
            for k in range(2):
                e = np.zeros(2)
                e[k] = 1.0
                got = ev.value(p, q, z + e)
                assert abs(got - np.exp(2j * np.pi * p[k]) * base) < 1e-10 * max(1.0, abs(base))

    def test_quasi_periodicity_period_shift(self):
        ev = ThetaEvaluator(B2)
        p, q = np.array([0.3, -0.2]), np.array([0.1, 0.4])
        for z in rand_z(6, 2):
            base = ev.value(p, q, z)
            for k in range(2):
                got = ev.value(p, q, z + B2[:, k])
                fac = np.exp(-2j * np.pi * q[k] - 1j * np.pi * B2[k, k] - 2j * np.pi * z[k])
                assert abs(got - fac * base) < 1e-9 * max(1.0, abs(fac * base))

    def test_parity_symmetry(self):
        ev = ThetaEvaluator(B2)
        for p, q in [((0.5, 0.0), (0.5, 0.0)), ((0.5, 0.5), (0.5, 0.0)), ((0.0, 0.5), (0.5, 0.5))]:
            sign = -1.0 if char_parity(p, q) == "odd" else 1.0
            for z in rand_z(4, 2):
                a = ev.value(np.array(p), np.array(q), z)
                b = ev.value(np.array(p), np.array(q), -z)
                assert abs(b - sign * a) < 1e-10 * max(1.0, abs(a))

    def test_odd_char_vanishes_at_zero(self):
        ev = ThetaEvaluator(B2)
        assert char_parity((0.5, 0.5), (0.5, 0.0)) == "odd"
        v = ev.value(np.array([0.5, 0.5]), np.array([0.5, 0.0]), np.zeros(2))
        assert abs(v) < 1e-12

    def test_gradient_matches_fd(self):
        ev = ThetaEvaluator(B2)
        p, q = np.array([0.2, 0.3]), np.array([-0.1, 0.25])
        h = 1e-6
        for z in rand_z(4, 2):
            _, grad = ev.value(p, q, z, with_grad=True)
            for k in range(2):
                e = np.zeros(2)
                e[k] = h
                fd = (ev.value(p, q, z + e) - ev.value(p, q, z - e)) / (2 * h)
                assert abs(grad[k] - fd) < 1e-6 * max(1.0, abs(fd))

    def test_batched_matches_scalar(self):
        ev = ThetaEvaluator(B2)
        p, q = np.array([0.2, 0.3]), np.array([-0.1, 0.25])
        zs = rand_z(7, 2)
        batch = ev.value(p, q, zs)
        singles = np.array([ev.value(p, q, z) for z in zs])
        assert np.allclose(batch, singles, rtol=0, atol=1e-12)

    def test_refinement_stability(self):
        ev_hi = ThetaEvaluator(B2, tol=1e-16)
        ev_lo = ThetaEvaluator(B2, tol=1e-12)
        p, q = np.array([0.2, 0.3]), np.array([-0.1, 0.25])
        for z in rand_z(5, 2):
            assert abs(ev_hi.value(p, q, z) - ev_lo.value(p, q, z)) < 1e-11


class TestValidation:
    def test_asymmetric_rejected(self):
        with pytest.raises(DomainError):
            as_riemann_matrix([[1j, 0.5], [0.1, 1j]])

    def test_indefinite_rejected(self):
        with pytest.raises(DomainError):
            as_riemann_matrix([[1j, 0.0], [0.0, -1j]])

    def test_wrong_dimension_rejected(self):
        ev = ThetaEvaluator(B2)
        with pytest.raises(ArgumentError):
            ev.value(np.zeros(2), np.zeros(2), np.zeros(3))

    def test_parity_values(self):
        assert char_parity([0.5], [0.5]) == "odd"
        assert char_parity([0.0], [0.0]) == "even"
        assert char_parity([0.5], [0.0]) == "even"
        assert char_parity([0.0], [0.5]) == "even"
        assert char_parity([0.5, 0.5], [0.5, 0.5]) == "even"
        with pytest.raises(ArgumentError):
            char_parity([0.3], [0.5])
