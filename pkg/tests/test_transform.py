"""Elementary dressing transformations: projector algebra, monodromy action,
eigenvalue shifts, tau-ratio log-derivative, and deformation residuals."""

import numpy as np
import pytest

from isotheta import sphere as sp
from isotheta import transform as tr
from isotheta.errors import ArgumentError, DegeneracyError, PoleError

G1_POINTS = [0.0, 1.0, 2.0, 4.0]
G1_P, G1_Q = [0.3], [0.1]
G2_POINTS = [0.0, 1.0, 2.5, 3.5, 5.0, 7.0]
G2_P, G2_Q = [0.3, 0.15], [0.1, 0.25]


@pytest.fixture(scope="module")
def g1():
    config = sp.build_solution(G1_POINTS, G1_P, G1_Q)
    state = sp.residues_from_psi(config)
    return config, state, tr.local_frames(config, state)


@pytest.fixture(scope="module")
def g1_report(g1):
    config, state, frames = g1
    return tr.transform(config, state, frames, 1, 2)


class TestLocalFrames:
    def test_reconstruction(self, g1):
        _, _, frames = g1
        assert tr.frame_residuals(frames) < 1e-12

    def test_gauge(self, g1):
        _, _, frames = g1
        for loc in frames.frames:
            assert abs(np.linalg.det(loc.g_frame) - 1.0) < 1e-12
            # positive eigenvalue listed first
            assert loc.t_diag[0, 0].real > 0

    def test_nilpotent_rejected(self):
        nil = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)
        reg = np.array([[0.25, 0.0], [0.1, -0.25]], dtype=complex)
        with pytest.warns(UserWarning):
            state = sp.SchlesingerState(np.array([0.0, 1.0]),
                                        np.stack([nil, reg]))
        with pytest.raises(DegeneracyError):
            tr.local_frames(None, state)

    def test_flow_diagonalizes_moved_residues(self, g1):
        # one Euler step of the compatibility flow tracks the eigenframes
        config, state, frames = g1
        h = 1e-4
        direction = 2
        moved = sp.perturbed_state(config, direction, h)
        for j in (0, 1, 3):
            g = frames.frame(j)
            g_moved = g + h * tr.frame_flow_derivative(state, g, j, direction)
            d = np.linalg.inv(g_moved) @ moved.residues[j] @ g_moved
            off = max(abs(d[0, 1]), abs(d[1, 0]))
            assert off < 1e-5


class TestDressing:
    def test_invariants(self, g1):
        _, _, frames = g1
        d = tr.build_dressing(frames, 1, 2)
        inv = d.invariant_residuals()
        assert inv["idempotent"] < 1e-12
        assert inv["completeness"] < 1e-12
        assert inv["annihilation"] < 1e-12
        assert abs(np.trace(d.s_plus) - 1.0) < 1e-12

    def test_index_guards(self, g1):
        _, _, frames = g1
        with pytest.raises(ArgumentError):
            tr.build_dressing(frames, 1, 1)
        with pytest.raises(ArgumentError):
            tr.build_dressing(frames, 0, 9)
        with pytest.raises(ArgumentError):
            tr.build_dressing(frames, 0, 1, columns=(0, 1))

    def test_collinear_columns_rejected(self, g1):
        _, state, frames = g1
        clone = [sp.LocalExpansion(frames.frame(0), loc.t_diag)
                 for loc in frames.frames]
        with pytest.raises(DegeneracyError):
            tr.build_dressing(tr.FrameSet(clone, state), 0, 1)

    def test_F_properties(self, g1):
        _, _, frames = g1
        d = tr.build_dressing(frames, 1, 2)
        for lam in (5.5 + 2.2j, -3.0 + 1.0j):
            assert abs(np.linalg.det(tr.dressing_F(d, lam)) - 1.0) < 1e-12
        assert np.abs(tr.dressing_F(d, 1e8 + 1e7j) - np.eye(2)).max() < 1e-7
        with pytest.raises(PoleError):
            tr.dressing_F(d, d.lam_k)

    def test_F_prime_matches_fd(self, g1):
        _, _, frames = g1
        d = tr.build_dressing(frames, 1, 2)
        lam, h = 5.5 + 2.2j, 1e-6
        fd = (tr.dressing_F(d, lam + h) - tr.dressing_F(d, lam - h)) / (2 * h)
        assert np.abs(fd - tr.dressing_F_prime(d, lam)).max() < 1e-8

    def test_regular_direction_at_pole(self, g1):
        # the singular projector annihilates the k-frame column, so F stays
        # bounded (vanishing, in fact) on that direction approaching lam_k
        _, _, frames = g1
        d = tr.build_dressing(frames, 1, 2)
        gk = d.g[:, 0]
        val = tr.dressing_F(d, d.lam_k + 1e-6) @ gk
        assert np.linalg.norm(val) < 1e-2
        grow = tr.dressing_F(d, d.lam_k + 1e-6) @ d.g[:, 1]
        assert np.linalg.norm(grow) > 1e2


class TestTransform:
    def test_eigenvalue_shifts(self, g1_report):
        shifts = g1_report.eigenvalue_shifts
        assert np.abs(shifts - np.array([0, 0.5, 0.5, 0])).max() < 1e-8
        assert np.abs(g1_report.state.t - np.array([0.25, 0.75, 0.75, 0.25])).max() < 1e-8

    def test_monodromy_action(self, g1_report):
        assert g1_report.monodromy_signs == (1, -1, -1, 1)
        assert g1_report.monodromy_error < 1e-8

    def test_residue_sum(self, g1_report):
        assert np.abs(g1_report.state.residues.sum(axis=0)).max() < 1e-10

    def test_tau_ratio_value(self, g1, g1_report):
        _, state, _ = g1
        d = g1_report.dressing
        manual = np.linalg.det(d.g) / np.sqrt(state.positions[1] - state.positions[2])
        assert abs(g1_report.tau_ratio - manual) < 1e-12

    def test_trace_square_identity(self, g1):
        _, state, frames = g1
        d = tr.build_dressing(frames, 1, 2)
        for lam in (5.5 + 2.2j, -3.0 + 1.0j, 0.5 + 3.0j):
            a = state.connection().matrix(lam)
            ahat = tr.transformed_connection(d, state, lam)
            m = np.linalg.inv(tr.dressing_F(d, lam)) @ tr.dressing_F_prime(d, lam)
            rhs = np.trace(a @ a) + 2 * np.trace(m @ a) + np.trace(m @ m)
            assert abs(np.trace(ahat @ ahat) - rhs) < 1e-12

    def test_dressed_solution_matches_F_psi(self, g1, g1_report):
        config, state, _ = g1
        err = tr.dressed_solution_check(config, state, g1_report,
                                        [0.5 + 1.5j, 3.2 - 1.1j, -2.0 + 0.8j])
        assert err < 1e-8

    def test_involution(self, g1, g1_report):
        config, state, _ = g1
        hat_frames = tr.local_frames(None, g1_report.state)
        back = tr.transform(config, g1_report.state, hat_frames, 1, 2,
                            columns=(2, 2), check_monodromy=False)
        assert np.abs(back.state.residues - state.residues).max() < 1e-10
        assert np.abs(back.state.t - state.t).max() < 1e-10

    def test_mixed_column_variant(self, g1):
        # (1, 2) raises the exponent at k and lowers it at l; the reported
        # eigenvalue keeps its nonnegative representative
        config, state, frames = g1
        rep = tr.transform(config, state, frames, 1, 2, columns=(1, 2),
                           check_monodromy=False)
        assert np.abs(rep.state.t - np.array([0.25, 0.75, 0.25, 0.25])).max() < 1e-8


class TestDeformation:
    def test_tau_ratio_log_derivative(self, g1):
        config, state, frames = g1
        assert tr.tau_ratio_check(config, state, frames, 1, 2, step=1e-4) < 1e-6

    def test_dressed_family_satisfies_schlesinger(self, g1):
        config, _, _ = g1
        res = tr.transform_schlesinger_residual(config, 1, 2, step=1e-4)
        assert res["offdiag"] < 1e-6
        assert res["diagonal"] < 1e-6
        assert res["eigenvalue_drift"] < 1e-10


class TestGenusTwo:
    def test_transform_and_tau(self):
        config = sp.build_solution(G2_POINTS, G2_P, G2_Q)
        state = sp.residues_from_psi(config)
        frames = tr.local_frames(config, state)
        rep = tr.transform(config, state, frames, 2, 4)
        assert np.abs(rep.eigenvalue_shifts -
                      np.array([0, 0, 0.5, 0, 0.5, 0])).max() < 1e-8
        assert rep.monodromy_signs == (1, 1, -1, 1, -1, 1)
        assert rep.monodromy_error < 1e-8
        assert np.abs(rep.state.residues.sum(axis=0)).max() < 1e-10
        assert tr.tau_ratio_check(config, state, frames, 2, 4, step=1e-4) < 1e-6
