"""Transport and monodromy checks against matrix-exponential oracles."""

import numpy as np
import pytest
from scipy.linalg import expm

from isotheta.continuation import (
    SphereConnection,
    match_conjugation,
    monodromy,
    monodromy_set,
    standard_loops,
    transport,
)
from isotheta.errors import ArgumentError, PathError


def random_sl2_connection(seed, scale=0.15):
    rng = np.random.default_rng(seed)
    poles = np.array([0.0, 1.0, 2.3 + 1.1j, -0.7 + 1.9j])
    res = scale * (rng.normal(size=(4, 2, 2)) + 1j * rng.normal(size=(4, 2, 2)))
    res[:, 1, 1] = -res[:, 0, 0]
    res[-1] = -res[:-1].sum(axis=0)
    return SphereConnection(poles, res)


class TestSinglePole:
    POLE = 0.5 + 0.2j

    def loop(self):
        [(_, loop)] = standard_loops(np.array([self.POLE]), 7.0 + 1.0j)
        return loop

    def test_diagonal_residue(self):
        conn = SphereConnection([self.POLE], [np.diag([0.3, -0.3]).astype(complex)])
        m = monodromy(conn, self.loop())
        exact = np.diag(np.exp([0.6j * np.pi, -0.6j * np.pi]))
        assert np.max(np.abs(m - exact)) < 1e-11

    def test_generic_residue_matches_exponential(self):
        r = np.array([[0.21 + 0.1j, 0.4 - 0.2j], [0.33 + 0.05j, -0.21 - 0.1j]])
        conn = SphereConnection([self.POLE], [r])
        m = monodromy(conn, self.loop())
        assert np.max(np.abs(m - expm(2j * np.pi * r))) < 1e-11

    def test_det_preserved(self):
        r = np.array([[0.21 + 0.1j, 0.4 - 0.2j], [0.33 + 0.05j, -0.21 - 0.1j]])
        conn = SphereConnection([self.POLE], [r])
        m = monodromy(conn, self.loop())
        assert abs(np.linalg.det(m) - 1) < 1e-11


class TestLoopSystem:
    @pytest.mark.parametrize("base", [24.0 + 6.0j, -27.0 - 15.0j, 4.0 + 28.0j])
    def test_ordered_product_is_identity(self, base):
        # residues sum to zero, so one circuit of the whole set is trivial
        conn = random_sl2_connection(11)
        mats, order = monodromy_set(conn, base)
        prod = np.eye(2, dtype=complex)
        for i in order:
            prod = mats[i] @ prod
        assert np.max(np.abs(prod - np.eye(2))) < 1e-9

    def test_oneloop_per_pole_and_dets(self):
        conn = random_sl2_connection(5)
        mats, order = monodromy_set(conn, 24.0 + 6.0j)
        assert sorted(order) == [0, 1, 2, 3]
        for m in mats.values():
            assert abs(np.linalg.det(m) - 1) < 1e-10

    def test_frame_change_is_single_conjugation(self):
        # the same loops seen in the frame of a different fundamental solution
        # are conjugated by one matrix, recovered by the intertwiner solve
        conn = random_sl2_connection(11)
        base = 24.0 + 6.0j
        p = np.array([[1.1, 0.4 - 0.2j], [0.3j, 0.9 + 0.1j]])
        p = p / np.sqrt(np.linalg.det(p))
        seq, seq_p = [], []
        for _, loop in standard_loops(conn.poles, base):
            seq.append(monodromy(conn, loop))
            seq_p.append(monodromy(conn, loop, psi0=p))
        c, resid = match_conjugation(seq, seq_p)
        assert resid < 1e-10
        assert min(np.max(np.abs(c - p)), np.max(np.abs(c + p))) < 1e-9


class TestTransport:
    def test_reversal_roundtrip(self):
        conn = random_sl2_connection(7)
        path = [9.0 + 4.0j, 4.0 + 4.0j, 4.0 - 2.5j, -4.0 - 2.5j]
        fwd = transport(conn, path, np.eye(2))
        back = transport(conn, list(reversed(path)), fwd)
        assert np.max(np.abs(back - np.eye(2))) < 1e-10

    def test_tolerance_self_consistency(self):
        conn = random_sl2_connection(7)
        path = [9.0 + 4.0j, -4.0 + 4.0j]
        hi = transport(conn, path, np.eye(2), rtol=1e-12, atol=1e-13)
        lo = transport(conn, path, np.eye(2), rtol=1e-9, atol=1e-10)
        assert np.max(np.abs(hi - lo)) < 1e-7

    def test_path_through_pole_rejected(self):
        conn = random_sl2_connection(7)
        with pytest.raises(PathError):
            transport(conn, [-1.0, 1.0], np.eye(2))  # straight through pole at 0

    def test_open_loop_rejected(self):
        conn = random_sl2_connection(7)
        with pytest.raises(ArgumentError):
            monodromy(conn, [9.0, 10.0])

    def test_base_inside_cluster_rejected(self):
        conn = random_sl2_connection(7)
        with pytest.raises(ArgumentError):
            monodromy_set(conn, 1.0 + 0.5j)


class TestConjugationMatch:
    def test_recovers_known_conjugation(self):
        rng = np.random.default_rng(2)
        mats = [expm(1j * rng.normal(size=(2, 2))) for _ in range(3)]
        c_true = np.array([[1.2, 0.3 - 0.7j], [-0.25j, 0.8 + 0.1j]])
        c_true = c_true / np.sqrt(np.linalg.det(c_true))
        other = [np.linalg.solve(c_true, m @ c_true) for m in mats]
        c, resid = match_conjugation(mats, other)
        assert resid < 1e-12
        assert min(np.max(np.abs(c - c_true)), np.max(np.abs(c + c_true))) < 1e-10
