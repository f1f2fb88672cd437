"""Transport of 2x2 linear systems d Psi/d lam = A(lam) Psi along paths.

A connection is any object with a ``matrix(lam) -> (2, 2) array`` method and a
``poles`` attribute listing its singular points. Paths are polylines of
complex vertices; closed loops around poles are built from a far-away base
point as spoke + circle + reversed spoke, with spokes routed around the other
poles so the homotopy class is reproducible.

Monodromy follows the right-multiplication convention: continuing a
fundamental solution along gamma multiplies it on the right, so traversing
gamma_1 first and gamma_2 second yields M(gamma_2) @ M(gamma_1).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .errors import ArgumentError, PathError, PrecisionError
from .geometry import circle_polygon, seg_point_dist

RTOL = 1e-12
ATOL = 1e-13


@dataclass
class SphereConnection:
    """Rational connection A(lam) = sum_j residues[j] / (lam - poles[j])."""

    poles: np.ndarray
    residues: np.ndarray

    def __init__(self, poles, residues):
        self.poles = np.asarray(poles, dtype=complex)
        self.residues = np.asarray(residues, dtype=complex)
        if self.residues.shape != (len(self.poles), 2, 2):
            raise ArgumentError("residues must have shape (npoles, 2, 2)")

    def matrix(self, lam):
        d = 1.0 / (complex(lam) - self.poles)
        return np.tensordot(d, self.residues, axes=(0, 0))


def transport(conn, vertices, psi0, rtol: float = RTOL, atol: float = ATOL):
    """Continue the 2x2 solution with initial value psi0 at vertices[0] along
    the polyline; returns the value at the last vertex."""
    verts = [complex(v) for v in vertices]
    poles = np.asarray(getattr(conn, "poles", ()), dtype=complex)
    scale = max(1.0, max(abs(v) for v in verts))
    psi = np.array(psi0, dtype=complex).reshape(2, 2)
    for a, b in zip(verts, verts[1:]):
        if abs(b - a) == 0:
            continue
        if len(poles) and float(np.min(seg_point_dist(a, b, poles))) < 1e-8 * scale:
            raise PathError("transport path passes through a singular point")

        def rhs(t, y, a=a, b=b):
            m = conn.matrix(a + t * (b - a))
            return ((b - a) * (m @ y.reshape(2, 2))).ravel()

        sol = solve_ivp(rhs, (0.0, 1.0), psi.ravel(), method="DOP853", rtol=rtol, atol=atol)
        if not sol.success:
            raise PrecisionError(f"transport failed on segment {a} -> {b}: {sol.message}")
        psi = sol.y[:, -1].reshape(2, 2)
    return psi


def monodromy(conn, loop, psi0=None, rtol: float = RTOL, atol: float = ATOL):
    """Monodromy of the closed polyline `loop` in the frame of psi0 at its
    base vertex: M = psi0^-1 @ (psi0 continued around the loop)."""
    if abs(complex(loop[0]) - complex(loop[-1])) > 0:
        raise ArgumentError("loop must start and end at the same vertex")
    base = np.eye(2, dtype=complex) if psi0 is None else np.asarray(psi0, dtype=complex)
    out = transport(conn, loop, base, rtol=rtol, atol=atol)
    return np.linalg.solve(base, out)


def standard_loops(poles, base, n: int = 48):
    """One counterclockwise loop per pole from the common base.

    Construction: a pole-free corridor line is placed between the base and the
    configuration, the view direction is rotated until every pole has its own
    transverse coordinate with a safe gap, and each loop runs base ->
    corridor -> straight ray to the pole circle -> circle -> back. Parallel
    rays cannot entangle, so the homotopy classes are reproducible: loops are
    returned in increasing transverse coordinate, and for a connection with
    zero residue sum the right-multiplication product M_last @ ... @ M_first
    of their monodromies is the identity.
    """
    poles = np.asarray(poles, dtype=complex)
    if len(poles) < 1:
        raise ArgumentError("need at least one pole")
    base = complex(base)
    center = complex(poles.mean())
    spread = max(float(np.max(np.abs(poles - center))), 1e-12)
    dist = abs(base - center)
    if dist < 3.0 * spread:
        raise ArgumentError("base point must be placed well outside the pole set")
    u0 = (center - base) / dist

    if len(poles) == 1:
        sep = max(1.0, spread)
    else:
        sep = min(
            abs(poles[i] - poles[j])
            for i in range(len(poles))
            for j in range(i + 1, len(poles))
        )
    radius = 0.35 * sep

    best_gap, best_u = -1.0, u0
    for delta in np.deg2rad(np.arange(0.0, 45.1, 1.5)):
        for s in ((1,) if delta == 0 else (1, -1)):
            u = u0 * np.exp(1j * s * delta)
            t = np.sort(((poles - center) / u).imag)
            gap = np.min(np.diff(t)) if len(t) > 1 else np.inf
            if gap > best_gap:
                best_gap, best_u = gap, u
        if best_gap >= 2.0 * radius:
            break
    if len(poles) > 1 and best_gap < 1.2 * radius:
        raise PathError("could not separate poles transversally; configuration too crowded")
    u = best_u

    r_corr = spread + max(3.0 * radius, 0.05 * dist)
    if r_corr > 0.6 * dist:
        raise ArgumentError("base point too close to place a corridor")
    q = center - r_corr * u

    trans = ((poles - q) / u).imag
    order = np.argsort(trans, kind="stable")
    loops = []
    for i in order:
        e = q + 1j * trans[i] * u
        ring = circle_polygon(poles[i], radius, n, phase=float(np.angle(-u)))
        loops.append((int(i), [base, e] + list(ring) + [e, base]))
    return loops


def monodromy_set(conn, base, n: int = 48, rtol: float = RTOL, atol: float = ATOL):
    """Monodromies of all standard pole loops, keyed by pole index, plus the
    list of indices in concatenation order."""
    loops = standard_loops(conn.poles, base, n)
    mats = {}
    order = []
    for i, loop in loops:
        mats[i] = monodromy(conn, loop, rtol=rtol, atol=atol)
        order.append(i)
    return mats, order


def match_conjugation(first, second):
    """Single matrix C with first[j] @ C = C @ second[j] for all j.

    Solved as the least-squares null vector of the stacked intertwiner system;
    C is normalized to det C = 1. Returns (C, residual) where residual is the
    smallest singular value relative to the largest (0 for an exact match).
    If the representations are irreducible C is unique up to sign.
    """
    rows = []
    eye = np.eye(2)
    for a, b in zip(first, second):
        a = np.asarray(a, dtype=complex)
        b = np.asarray(b, dtype=complex)
        rows.append(np.kron(a, eye) - np.kron(eye, b.T))
    system = np.vstack(rows)
    _, s, vh = np.linalg.svd(system)
    c = vh[-1].conj().reshape(2, 2)
    det = np.linalg.det(c)
    if abs(det) < 1e-12:
        raise PrecisionError("intertwiner is singular; representations do not match")
    c = c / np.sqrt(det)
    resid = float(s[-1] / s[0]) if s[0] > 0 else 0.0
    return c, resid
