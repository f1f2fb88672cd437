"""Theta-functional Schlesinger solutions on the sphere, checked against
transported monodromy, contour quadrature, and finite-difference oracles."""

import numpy as np
import pytest

from isotheta import sphere as sp
from isotheta.errors import (
    ArgumentError,
    DegeneracyError,
    DomainError,
    PrecisionError,
)
from isotheta.hyperelliptic import SurfacePoint, abel_along_vertices
from isotheta.riemann_theta import ThetaEvaluator

G1_POINTS = [0.0, 1.0, 2.0, 4.0]
G1_P, G1_Q = [0.3], [0.1]
G2_POINTS = [0.0, 1.0, 2.5, 3.5, 5.0, 7.0]
G2_P, G2_Q = [0.3, 0.15], [0.1, 0.25]

SIGMA3 = np.diag([1.0, -1.0]).astype(complex)


@pytest.fixture(scope="module")
def g1():
    config = sp.build_solution(G1_POINTS, G1_P, G1_Q)
    return config, sp.residues_from_psi(config)


@pytest.fixture(scope="module")
def g2():
    config = sp.build_solution(G2_POINTS, G2_P, G2_Q)
    return config, sp.residues_from_psi(config)


@pytest.fixture(scope="module")
def g1_match(g1):
    config, state = g1
    mats, order = sp.transported_monodromies(config, state)
    return mats, order, sp.match_monodromies(config, mats, order)


@pytest.fixture(scope="module")
def g2_match(g2):
    config, state = g2
    mats, order = sp.transported_monodromies(config, state)
    return mats, order, sp.match_monodromies(config, mats, order)


class TestBuildValidation:
    def test_half_integer_characteristic_rejected(self):
        with pytest.raises(DomainError):
            sp.build_solution(G1_POINTS, [0.5], [0.0])

    def test_single_anchor_rejected(self):
        with pytest.raises(ArgumentError):
            sp.build_solution(G1_POINTS, G1_P, G1_Q,
                              anchor_phi=SurfacePoint(-1.5 + 2.2j, 1))

    def test_base_near_cycles_rejected(self, g1):
        config, _ = g1
        with pytest.raises(DomainError):
            sp.validate_base(config.periods, 1.5 + 0.1j)

    def test_config_geometry(self, g2):
        config, _ = g2
        assert config.genus == 2
        assert config.subset == (1,)
        # u at infinity is outward-direction independent
        base2 = abs(config.omega_base) * np.exp(0.4j)
        u2 = sp.ray_infinity_data(config.periods, complex(base2))[-1]
        from isotheta.hyperelliptic import abel_map
        u2 = u2 + abel_map(config.periods, SurfacePoint(complex(base2), 1))
        assert np.abs(u2 - config.u_inf).max() < 1e-10


class TestPsiMatrix:
    def test_det_is_one(self, g1):
        config, _ = g1
        rng = np.random.default_rng(7)
        count = 0
        while count < 20:
            lam = complex(*rng.uniform(-6, 8, 2))
            if config.curve.off_cut_distance(lam) < 0.3:
                continue
            val = sp.psi_matrix(config, lam)
            assert abs(np.linalg.det(val) - 1.0) < 1e-8
            count += 1

    def test_identity_at_infinity(self, g1):
        # normalized at the sheet-1 point over infinity: 1/lambda decay
        config, _ = g1
        near = np.abs(sp.psi_matrix(config, 25 * config.omega_base) - np.eye(2)).max()
        far = np.abs(sp.psi_matrix(config, 100 * config.omega_base) - np.eye(2)).max()
        assert far < 5e-4
        assert 3.0 < near / far < 5.0

    def test_base_point_shortcut_consistent(self, g1):
        config, _ = g1
        direct = config.c_base * (config.phi_inf_inv @ config.phi_base)
        assert np.abs(sp.psi_matrix(config, config.omega_base) - direct).max() < 1e-12

    def test_anchor_independence(self, g1):
        config, _ = g1
        base = config.omega_base
        c1 = sp.build_solution(G1_POINTS, G1_P, G1_Q, omega_base=base,
                               anchor_phi=SurfacePoint(-1.5 + 2.2j, 1),
                               anchor_psi=SurfacePoint(3.0 + 1.8j, 2))
        c2 = sp.build_solution(G1_POINTS, G1_P, G1_Q, omega_base=base,
                               anchor_phi=SurfacePoint(5.5 - 1.1j, 2),
                               anchor_psi=SurfacePoint(-0.8 - 2.6j, 1))
        for lam in (0.4 + 1.1j, 2.9 - 1.4j, -3.0 + 0.2j):
            diff = np.abs(sp.psi_matrix(c1, lam) - sp.psi_matrix(c2, lam)).max()
            assert diff < 1e-10


class TestPhiScalar:
    def test_vanishes_at_own_anchor(self, g1):
        config, _ = g1
        assert abs(sp.phi_scalar(config, config.anchor_phi, "phi")) < 1e-12
        assert abs(sp.phi_scalar(config, config.anchor_psi, "psi")) < 1e-12

    def test_nonzero_away_from_anchor(self, g1):
        config, _ = g1
        assert abs(sp.phi_scalar(config, SurfacePoint(0.5 + 2.0j, 1))) > 1e-6

    def test_bad_anchor_name(self, g1):
        config, _ = g1
        with pytest.raises(ArgumentError):
            sp.phi_scalar(config, SurfacePoint(0.5 + 2.0j, 1), "nope")

    def test_path_refinement(self, g1):
        # same homotopy class, two discretization densities
        config, _ = g1
        target = -2.0 - 1.5j
        vals = []
        for cap in (1.0, 0.31):
            verts = [config.omega_base]
            span = target - config.omega_base
            steps = int(np.ceil(abs(span) / cap))
            verts.extend(config.omega_base + span * (k + 1) / steps
                         for k in range(steps))
            zs, _ = abel_along_vertices(config.periods, verts,
                                        config.u_base, config.w_base)
            blk = sp._phi_block(config, zs[-1])
            vals.append(blk[0, 0])
        assert abs(vals[0] - vals[1]) < 1e-9 * max(1.0, abs(vals[1]))


class TestResidues:
    def test_invariants_g1(self, g1):
        _, state = g1
        inv = state.invariant_residuals()
        assert inv["residue_sum"] < 1e-10
        assert inv["trace"] < 1e-12
        assert inv["det_vs_t"] < 1e-12

    def test_invariants_g2(self, g2):
        _, state = g2
        inv = state.invariant_residuals()
        assert inv["residue_sum"] < 1e-10
        assert inv["trace"] < 1e-12
        assert inv["det_vs_t"] < 1e-12

    def test_eigenvalues_quarter(self, g1, g2):
        for _, state in (g1, g2):
            assert np.abs(state.t - 0.25).max() < 1e-10

    def test_pointwise_connection_matches_rational(self, g2):
        config, state = g2
        conn = state.connection()
        for lam in (0.7 + 0.9j, 4.2 - 0.8j):
            diff = np.abs(conn.matrix(lam) - sp.connection_matrix(config, lam)).max()
            assert diff < 1e-10

    def test_shape_guard(self):
        with pytest.raises(ArgumentError):
            sp.SchlesingerState(np.array([0.0, 1.0]), np.zeros((3, 2, 2)))

    def test_local_expansion_roundtrip(self, g1):
        _, state = g1
        a0 = state.residues[0]
        vals, vecs = np.linalg.eig(a0)
        order = np.argsort(-vals.real)
        frame = vecs[:, order] / np.sqrt(np.linalg.det(vecs[:, order]))
        loc = sp.LocalExpansion(frame, np.diag(vals[order]))
        assert np.abs(loc.residue() - a0).max() < 1e-10
        assert loc.connection is None


class TestHamiltonians:
    def test_contour_equals_sum(self, g1, g2):
        for _, state in (g1, g2):
            for i in range(len(state.positions)):
                hs = sp.hamiltonian(state, i)
                hc = sp.hamiltonian_contour(state, i)
                assert abs(hs - hc) < 1e-10

    def test_sum_vanishes(self, g1, g2):
        for _, state in (g1, g2):
            assert abs(sp.hamiltonians(state).sum()) < 1e-12

    def test_two_pole_specialization(self):
        a1 = np.array([[0.2, 0.11], [0.35, -0.2]], dtype=complex)
        state = sp.SchlesingerState(np.array([0.0, 2.0]), np.stack([a1, -a1]))
        expected = np.trace(a1 @ a1) / 2.0
        assert abs(sp.hamiltonian(state, 0) - expected) < 1e-14

    def test_index_guard(self, g1):
        _, state = g1
        with pytest.raises(ArgumentError):
            sp.hamiltonian(state, 9)

    def test_coincident_positions(self):
        a1 = np.array([[0.2, 0.11], [0.35, -0.2]], dtype=complex)
        state = sp.SchlesingerState(np.array([0.0, 2.0]), np.stack([a1, -a1]))
        state.positions = np.array([1.0, 1.0], dtype=complex)
        with pytest.raises(DomainError):
            sp.hamiltonian(state, 0)


class TestTau:
    def test_value_finite_nonzero(self, g1):
        config, _ = g1
        val = sp.tau_theta(config)
        assert np.isfinite(val) and abs(val) > 1e-6

    def test_log_derivative_matches_hamiltonian_g1(self, g1):
        _, state = g1
        for j in (1, 3):
            fd = sp.tau_log_derivative_fd(G1_POINTS, G1_P, G1_Q, j)
            assert abs(fd - sp.hamiltonian(state, j)) < 1e-8

    def test_log_derivative_matches_hamiltonian_g2(self, g2):
        _, state = g2
        fd = sp.tau_log_derivative_fd(G2_POINTS, G2_P, G2_Q, 2)
        assert abs(fd - sp.hamiltonian(state, 2)) < 1e-8

    def test_relabeling_within_cut_pair(self, g1):
        # swapping the endpoints of one cut changes tau by a phase only
        config, _ = g1
        swapped = sp.build_solution([1.0, 0.0, 2.0, 4.0], G1_P, G1_Q)
        ratio = sp.tau_theta(swapped) / sp.tau_theta(config)
        assert abs(abs(ratio) - 1.0) < 1e-10

    def test_index_guard(self):
        with pytest.raises(ArgumentError):
            sp.tau_log_derivative_fd(G1_POINTS, G1_P, G1_Q, 11)


class TestMonodromy:
    def test_closed_form_shape(self):
        mat = sp.closed_form_monodromy(G1_P, G1_Q, 1)
        assert np.abs(mat - np.array([[0, -1j], [-1j, 0]])).max() < 1e-15
        for j in range(1, 5):
            mj = sp.closed_form_monodromy(G1_P, G1_Q, j)
            assert abs(np.linalg.det(mj) - 1.0) < 1e-12
            assert abs(mj[0, 0]) + abs(mj[1, 1]) < 1e-12

    def test_closed_form_index_guard(self):
        with pytest.raises(ArgumentError):
            sp.closed_form_monodromy(G1_P, G1_Q, 5)

    def test_printed_list_composes_to_minus_identity(self):
        prod = np.eye(2, dtype=complex)
        for mat in sp.closed_form_monodromies(G2_P, G2_Q):
            prod = mat @ prod
        assert np.abs(prod + np.eye(2)).max() < 1e-12

    def test_transported_match_g1(self, g1_match):
        mats, order, match = g1_match
        assert order == [0, 1, 2, 3]
        assert match.signs == (-1, 1, 1, 1)
        assert match.max_error < 1e-8
        prod = np.eye(2, dtype=complex)
        for i in order:
            prod = mats[i] @ prod
        assert np.abs(prod - np.eye(2)).max() < 1e-8

    def test_transported_match_g2(self, g2_match):
        mats, order, match = g2_match
        assert order == [0, 1, 2, 3, 4, 5]
        assert match.signs == (-1, 1, 1, 1, 1, 1)
        assert match.max_error < 1e-8

    def test_cycle_exponents_g1(self, g1_match):
        mats, _, match = g1_match
        conj = np.linalg.inv(match.conjugator)
        a1 = sp.diagonal_exponent(conj @ sp.cycle_pair_monodromy(mats, "a", 1)
                                  @ match.conjugator)
        b1 = sp.diagonal_exponent(conj @ sp.cycle_pair_monodromy(mats, "b", 1)
                                  @ match.conjugator)
        assert abs(a1 - G1_P[0]) < 1e-10
        assert abs(b1 - G1_Q[0]) < 1e-10

    def test_cycle_exponents_g2(self, g2_match):
        mats, _, match = g2_match
        conj = np.linalg.inv(match.conjugator)
        for j in (1, 2):
            aj = sp.diagonal_exponent(conj @ sp.cycle_pair_monodromy(mats, "a", j)
                                      @ match.conjugator)
            bj = sp.diagonal_exponent(conj @ sp.cycle_pair_monodromy(mats, "b", j)
                                      @ match.conjugator)
            assert abs(aj - G2_P[j - 1]) < 1e-10
            assert abs(bj - G2_Q[j - 1]) < 1e-10

    def test_diagonal_exponent_guard(self):
        with pytest.raises(PrecisionError):
            sp.diagonal_exponent(np.array([[1.0, 0.5], [0.0, 1.0]]))

    def test_cycle_kind_guard(self, g1_match):
        mats, _, _ = g1_match
        with pytest.raises(ArgumentError):
            sp.cycle_pair_monodromy(mats, "c", 1)


class TestSchlesingerEquations:
    def test_residual_g1(self, g1):
        config, _ = g1
        res = sp.schlesinger_residual(config, step=1e-4)
        assert res["offdiag"] < 1e-6
        assert res["diagonal"] < 1e-6
        assert res["eigenvalue_drift"] < 1e-10

    def test_residual_g2_one_direction(self, g2):
        config, _ = g2
        res = sp.schlesinger_residual(config, step=1e-4, indices=[1])
        assert res["offdiag"] < 1e-6
        assert res["diagonal"] < 1e-6
        assert res["eigenvalue_drift"] < 1e-10


class TestThetaDegeneracyGuard:
    def test_zero_theta_warns_then_degenerates(self, g1):
        # a characteristic on the theta divisor is a zero of tau: the build
        # warns first, then no generic anchor pair exists (det of the theta
        # block carries the theta(0) factor)
        config, _ = g1
        b = complex(config.periods.B[0, 0])
        p0 = 0.3
        q0 = 0.5 + b * (0.5 - p0) + 1e-11
        ev = ThetaEvaluator(config.periods.B)
        assert abs(ev.value(np.array([p0]), np.array([q0]), np.zeros(1))) < 1e-10
        with pytest.warns(UserWarning):
            with pytest.raises(DegeneracyError):
                sp.build_solution(G1_POINTS, [p0], [q0])
