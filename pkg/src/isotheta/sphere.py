"""Rank-2 Fuchsian isomonodromy solutions on the sphere built from theta functions.

Given 2g+2 branch points, a non-half-integer characteristic (p, q) and an odd
half-integer characteristic derived from a branch subset, the module assembles
the 2x2 matrix of theta products whose normalized form solves a Fuchsian
system with anti-diagonal two-point monodromies, extracts the residue matrices
by contour quadrature, and provides the deformation Hamiltonians, the explicit
tau function, the closed-form monodromy list, and finite-difference checks of
the deformation equations.

Frame convention: the solution is normalized to the identity at the point at
infinity on the first sheet. The theta-block value there is finite and is
computed by one extra convergent integral along an outward ray from the far
base point, so no compactified coordinates are needed. The base point itself
serves as the start of all evaluation paths and monodromy loops; the solution
value there tends to the identity as the base recedes but is not exactly the
identity at finite distance. The deformation equations hold exactly only in
this infinity-normalized frame; normalizing at a finite point would add a
frame-drift term of size 1/base to every off-diagonal equation.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from itertools import product as _iproduct

import numpy as np

from .continuation import SphereConnection, match_conjugation, monodromy_set
from .errors import ArgumentError, DegeneracyError, DomainError, PrecisionError
from .geometry import circle_polygon, route, seg_point_dist
from .hyperelliptic import (
    HyperellipticCurve,
    PeriodData,
    SurfacePoint,
    abel_along_vertices,
    abel_map,
    du_density,
    odd_half_period,
    period_matrices,
    sheet1_w,
    track_signed,
)
from .quadrature import segment_nodes
from .riemann_theta import ThetaEvaluator

RESIDUE_NODES = 256
BASE_FACTOR = 10.0
_SIGMA3 = np.diag([1.0, -1.0]).astype(complex)


# ---------------------------------------------------------------------------
# States and configurations
# ---------------------------------------------------------------------------


@dataclass
class SchlesingerState:
    """Pole positions with traceless 2x2 residues; residue eigenvalues +-t_j."""

    positions: np.ndarray
    residues: np.ndarray
    t: np.ndarray = field(init=False)

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=complex)
        self.residues = np.asarray(self.residues, dtype=complex)
        n = len(self.positions)
        if self.residues.shape != (n, 2, 2):
            raise ArgumentError(f"residues must have shape ({n}, 2, 2)")
        # principal square root of -det keeps Re t >= 0
        self.t = np.sqrt(-np.linalg.det(self.residues))
        twice = 2.0 * self.t
        if np.any(np.abs(twice - np.round(twice.real)) < 1e-8):
            warnings.warn("residue eigenvalues are integer or half-integer; "
                          "the construction is degenerate there", stacklevel=2)

    def invariant_residuals(self) -> dict:
        total = np.abs(self.residues.sum(axis=0)).max()
        trace = np.abs(np.trace(self.residues, axis1=1, axis2=2)).max()
        dets = np.abs(np.linalg.det(self.residues) + self.t**2).max()
        return {"residue_sum": float(total), "trace": float(trace), "det_vs_t": float(dets)}

    def connection(self) -> SphereConnection:
        return SphereConnection(self.positions, self.residues)


@dataclass
class LocalExpansion:
    """Local solution data at one singular point: the diagonalizing frame,
    the diagonal exponent matrix, and (when computed) the connection matrix
    relating the local solution to the global normalization."""

    g_frame: np.ndarray
    t_diag: np.ndarray
    connection: np.ndarray | None = None

    def residue(self) -> np.ndarray:
        return self.g_frame @ self.t_diag @ np.linalg.inv(self.g_frame)


@dataclass
class ThetaSolutionConfig:
    """Everything needed to evaluate one theta-functional solution."""

    periods: PeriodData
    p: np.ndarray
    q: np.ndarray
    subset: tuple
    odd_p: np.ndarray
    odd_q: np.ndarray
    anchor_phi: SurfacePoint
    anchor_psi: SurfacePoint
    omega_base: complex
    u_phi: np.ndarray
    u_psi: np.ndarray
    u_base: np.ndarray
    u_inf: np.ndarray
    w_base: complex
    phi_base: np.ndarray
    phi_inf: np.ndarray
    phi_inf_inv: np.ndarray
    c_base: complex
    evaluator: ThetaEvaluator
    metadata: dict = field(default_factory=dict)

    @property
    def curve(self) -> HyperellipticCurve:
        return self.periods.curve

    @property
    def genus(self) -> int:
        return self.periods.genus


def _reject_half_integer(p, q):
    doubled = np.concatenate([2.0 * np.asarray(p, dtype=complex),
                              2.0 * np.asarray(q, dtype=complex)])
    if np.abs(doubled.imag).max(initial=0.0) < 1e-12 and \
            np.abs(doubled.real - np.round(doubled.real)).max() < 1e-10:
        raise DomainError("characteristic is half-integer; the construction degenerates")


def _base_candidates(curve):
    radius = BASE_FACTOR * curve.scale
    angles = 2.0 * np.pi * np.arange(48) / 48.0
    return radius * np.exp(1j * angles)


def _cycle_clearance(pd: PeriodData, point: complex) -> float:
    """Distance from a point to every stored cycle realization."""
    curve = pd.curve
    best = min(float(seg_point_dist(a, b, point)) for a, b in curve.cuts)
    for rec in pd.metadata.get("b_paths", ()):
        verts = rec["vertices"]
        for a, b in zip(verts, verts[1:]):
            best = min(best, float(seg_point_dist(a, b, point)))
    return best


def validate_base(pd: PeriodData, point: complex) -> float:
    """Check a normalization/monodromy base point sits clear of all cycles."""
    d = _cycle_clearance(pd, complex(point))
    if d < 2.0 * pd.curve.scale:
        raise DomainError(
            f"base point {point} is too close to the cycle realizations (distance {d:.3g})"
        )
    return d


def _phi_block_raw(ev, p, q, odd_p, odd_q, u_phi, u_psi, z, du=None):
    """The 2x2 theta-product matrix at continued argument values z (shape
    (..., g)); with du the lambda-derivative matrix is returned as well.

    Row 1 uses the first anchor, row 2 the second; column 2 is the sheet
    involution, realized by negating the argument.
    """
    z = np.asarray(z, dtype=complex)
    lead = z.shape[:-1]
    packs = np.stack([z + u_phi, -z + u_phi, z + u_psi, -z + u_psi])
    packs_odd = np.stack([z - u_phi, -z - u_phi, z - u_psi, -z - u_psi])
    if du is None:
        t_even = ev.value(p, q, packs)
        t_odd = ev.value(odd_p, odd_q, packs_odd)
    else:
        t_even, g_even = ev.value(p, q, packs, with_grad=True)
        t_odd, g_odd = ev.value(odd_p, odd_q, packs_odd, with_grad=True)

    vals = t_even * t_odd  # (4, ...)
    phi = np.empty(lead + (2, 2), dtype=complex)
    phi[..., 0, 0], phi[..., 0, 1] = vals[0], vals[1]
    phi[..., 1, 0], phi[..., 1, 1] = vals[2], vals[3]
    if du is None:
        return phi

    du = np.asarray(du, dtype=complex)
    signs = np.array([1.0, -1.0, 1.0, -1.0])
    dvals = signs.reshape((4,) + (1,) * len(lead)) * (
        np.einsum("k...g,...g->k...", g_even, du) * t_odd
        + t_even * np.einsum("k...g,...g->k...", g_odd, du)
    )
    dphi = np.empty_like(phi)
    dphi[..., 0, 0], dphi[..., 0, 1] = dvals[0], dvals[1]
    dphi[..., 1, 0], dphi[..., 1, 1] = dvals[2], dvals[3]
    return phi, dphi


def _phi_block(config: ThetaSolutionConfig, z, du=None):
    return _phi_block_raw(config.evaluator, config.p, config.q, config.odd_p,
                          config.odd_q, config.u_phi, config.u_psi, z, du=du)


def _inv2(m):
    det = m[..., 0, 0] * m[..., 1, 1] - m[..., 0, 1] * m[..., 1, 0]
    out = np.empty_like(m)
    out[..., 0, 0] = m[..., 1, 1]
    out[..., 1, 1] = m[..., 0, 0]
    out[..., 0, 1] = -m[..., 0, 1]
    out[..., 1, 0] = -m[..., 1, 0]
    return out / det[..., None, None], det


def _ray_integral(pd, omega, t_from, t_to, n):
    """Integral of the normalized differentials along the outward ray
    lam = omega/t between the given parameter values (sheet 1)."""
    nodes, wts = segment_nodes(complex(t_from), complex(t_to), n)
    lam = omega / nodes
    w = sheet1_w(pd.curve, lam)
    # lam = omega/t, so d(lam) = -omega/t**2 dt
    dens = du_density(pd, lam, w) * (-omega / nodes**2)[:, None]
    return wts @ dens


def ray_infinity_data(pd: PeriodData, omega: complex, n: int = 16,
                      tol: float = 1e-10):
    """Abel values along the ray from the base point out to infinity.

    Substituting lam = omega/t maps the tail to t in [0, 1] with a smooth
    integrand, so plain quadrature converges; node counts are doubled once to
    confirm. Returns (u values at the sample points, last entry the point at
    infinity on sheet 1) relative to the Abel value 0 at lam = omega.
    """
    ts = np.geomspace(1.0, 1e-3, 25)
    samples = [np.zeros(pd.genus, dtype=complex)]

    def run(nn):
        out = [samples[0]]
        z = samples[0]
        for t1, t2 in zip(ts, ts[1:]):
            z = z + _ray_integral(pd, omega, t1, t2, nn)
            out.append(z)
        out.append(z + _ray_integral(pd, omega, ts[-1], 0.0, 2 * nn))
        return out

    coarse = run(n)
    fine = run(2 * n)
    if np.abs(np.asarray(fine) - np.asarray(coarse)).max() > tol:
        raise PrecisionError("ray integral to infinity did not converge")
    return np.asarray(fine)


def _pick_anchors(pd, p, q, odd_p, odd_q, ev, test_points):
    """Deterministic generic anchor pair: walk a fixed candidate list until the
    theta block is safely invertible at every supplied argument value."""
    curve = pd.curve
    center = np.mean(curve.branch_points)
    radius = 1.7 * curve.scale
    golden = 2.399963229728653
    cands = []
    for k in range(24):
        lam = center + radius * np.exp(1j * golden * (k + 1))
        if curve.off_cut_distance(lam) > 0.05 * curve.min_separation():
            cands.append(SurfacePoint(lam, 1 + k % 2))
    test_points = np.asarray(test_points, dtype=complex)
    for a_i in range(len(cands)):
        for b_i in range(a_i + 1, len(cands)):
            pa, pb = cands[a_i], cands[b_i]
            ua, ub = abel_map(pd, pa), abel_map(pd, pb)
            blk = _phi_block_raw(ev, p, q, odd_p, odd_q, ua, ub, test_points)
            det = blk[..., 0, 0] * blk[..., 1, 1] - blk[..., 0, 1] * blk[..., 1, 0]
            size = np.abs(blk).reshape(blk.shape[:-2] + (4,)).max(axis=-1)
            if np.all(np.abs(det) > 1e-3 * np.maximum(size, 1e-300) ** 2):
                return pa, pb, ua, ub
    raise DegeneracyError("no generic anchor pair found; characteristic appears degenerate")


def build_solution(branch_points, p, q, subset=None, anchor_phi=None,
                   anchor_psi=None, omega_base=None, theta_tol: float = 1e-12,
                   quad_tol: float = 1e-10) -> ThetaSolutionConfig:
    """Assemble the solution data for a branch configuration and characteristic.

    subset lists g-1 branch-point indices (1-based positions 1..2g+1 excluded
    index 0) fixing the odd half-integer characteristic; default 1..g-1.
    """
    curve = HyperellipticCurve(branch_points)
    g = curve.genus
    p = np.atleast_1d(np.asarray(p, dtype=complex)).reshape(g)
    q = np.atleast_1d(np.asarray(q, dtype=complex)).reshape(g)
    _reject_half_integer(p, q)

    pd = period_matrices(curve, tol=quad_tol)
    if subset is None:
        subset = tuple(range(1, g))
    odd_p, odd_q = odd_half_period(pd, subset)
    ev = ThetaEvaluator(pd.B, tol=theta_tol)

    theta0 = complex(ev.value(p, q, np.zeros(g)))
    if abs(theta0) < 1e-10:
        warnings.warn("theta(0) is numerically zero: the tau function vanishes "
                      "at this configuration", stacklevel=2)

    if omega_base is None:
        cands = _base_candidates(curve)
        scores = [_cycle_clearance(pd, c) for c in cands]
        omega_base = complex(cands[int(np.argmax(scores))])
    else:
        omega_base = complex(omega_base)
    validate_base(pd, omega_base)

    u_base = abel_map(pd, SurfacePoint(omega_base, 1))
    w_base = complex(sheet1_w(curve, omega_base))

    ray = u_base + ray_infinity_data(pd, omega_base)
    u_inf = ray[-1]

    if (anchor_phi is None) != (anchor_psi is None):
        raise ArgumentError("provide both anchors or neither")
    if anchor_phi is None:
        anchor_phi, anchor_psi, u_phi, u_psi = _pick_anchors(
            pd, p, q, odd_p, odd_q, ev, np.stack([u_base, u_inf]))
    else:
        u_phi = abel_map(pd, anchor_phi)
        u_psi = abel_map(pd, anchor_psi)

    config = ThetaSolutionConfig(
        periods=pd, p=p, q=q, subset=tuple(subset), odd_p=odd_p, odd_q=odd_q,
        anchor_phi=anchor_phi, anchor_psi=anchor_psi, omega_base=omega_base,
        u_phi=u_phi, u_psi=u_psi, u_base=u_base, u_inf=u_inf, w_base=w_base,
        phi_base=np.eye(2), phi_inf=np.eye(2), phi_inf_inv=np.eye(2),
        c_base=1.0, evaluator=ev, metadata={"subset": tuple(subset)})
    blocks = _phi_block(config, ray)
    _, dets = _inv2(blocks)
    size = np.abs(blocks).reshape(len(dets), 4).max(axis=1)
    if np.min(np.abs(dets) / np.maximum(size, 1e-300) ** 2) < 1e-10:
        raise DegeneracyError("theta block is singular along the normalization ray")
    config.phi_base = blocks[0]
    config.phi_inf = blocks[-1]
    config.phi_inf_inv = np.linalg.inv(blocks[-1])
    # square-root branch of the normalizing prefactor, continued inward from
    # infinity (where it is 1) down the ray to the base point
    branch = track_signed(np.sqrt(dets[-1] / dets[::-1]), 1.0)
    config.c_base = complex(branch[-1])
    config.metadata["det_phi_base"] = complex(dets[0])
    config.metadata["det_phi_inf"] = complex(dets[-1])
    return config


# ---------------------------------------------------------------------------
# Scalar and matrix evaluation
# ---------------------------------------------------------------------------


def phi_scalar(config: ThetaSolutionConfig, point: SurfacePoint, anchor: str = "phi"):
    """First-row (anchor='phi') or second-row (anchor='psi') scalar at a
    surface point: the product of the two theta values."""
    if anchor not in ("phi", "psi"):
        raise ArgumentError("anchor must be 'phi' or 'psi'")
    z = abel_map(config.periods, point)
    ua = config.u_phi if anchor == "phi" else config.u_psi
    even = config.evaluator.value(config.p, config.q, z + ua)
    odd = config.evaluator.value(config.odd_p, config.odd_q, z - ua)
    return complex(even * odd)


def phi_matrix(config: ThetaSolutionConfig, point: SurfacePoint):
    """The unnormalized 2x2 block at a surface point (columns: point, its
    sheet involution)."""
    z = abel_map(config.periods, point)
    return _phi_block(config, z)


def _tracked_path(config, lam, chord_cap=None):
    """Continued (vertices, z, w) data from the base point to lam."""
    curve = config.curve
    clearance = 0.1 * curve.min_separation()
    verts = route(config.omega_base, complex(lam), curve.cut_obstacles(),
                  clearance, exempt=(config.omega_base, complex(lam)))
    cap = chord_cap if chord_cap else max(0.5 * curve.scale, 0.3 * curve.min_separation())
    dense = [verts[0]]
    for a, b in zip(verts, verts[1:]):
        steps = max(1, int(np.ceil(abs(b - a) / cap)))
        dense.extend(a + (b - a) * (k + 1) / steps for k in range(steps))
    zs, ws = abel_along_vertices(config.periods, dense, config.u_base, config.w_base)
    return np.asarray(dense), zs, ws


def psi_matrix(config: ThetaSolutionConfig, lam) -> np.ndarray:
    """Normalized solution value at lam, reached from the base point with the
    square-root branch tracked continuously.

    The normalization is the identity at infinity on the first sheet; the
    value at the base point is identity plus a 1/base tail.
    """
    lam = complex(lam)
    if abs(lam - config.omega_base) < 1e-14 * config.curve.scale:
        return config.c_base * (config.phi_inf_inv @ config.phi_base)
    _, zs, _ = _tracked_path(config, lam)
    blocks = _phi_block(config, zs)
    _, dets = _inv2(blocks)
    size = np.abs(blocks).reshape(len(dets), 4).max(axis=1)
    if np.min(np.abs(dets) / np.maximum(size, 1e-300) ** 2) < 1e-10:
        raise DegeneracyError("theta block degenerates along the evaluation path")
    ratio = config.metadata["det_phi_inf"] / dets
    branch = track_signed(np.sqrt(ratio), config.c_base)
    return complex(branch[-1]) * (config.phi_inf_inv @ blocks[-1])


def connection_values(config: ThetaSolutionConfig, lam_values, zs, ws):
    """Pointwise coefficient matrix of the linear system at continued points.

    The traceless part of (d block/d lambda) block^{-1} conjugated into the
    infinity-normalized frame; exact for any continued branch of the
    arguments, since the normalizing square root only shifts the trace part.
    """
    lam_values = np.asarray(lam_values, dtype=complex)
    du = du_density(config.periods, lam_values, np.asarray(ws, dtype=complex))
    blocks, dblocks = _phi_block(config, zs, du=du)
    inv, _ = _inv2(blocks)
    a_pt = dblocks @ inv
    tr = a_pt[..., 0, 0] + a_pt[..., 1, 1]
    a_pt[..., 0, 0] -= 0.5 * tr
    a_pt[..., 1, 1] -= 0.5 * tr
    return config.phi_inf_inv @ a_pt @ config.phi_inf


def connection_matrix(config: ThetaSolutionConfig, lam) -> np.ndarray:
    """Coefficient matrix at a single point off the cuts."""
    lam = complex(lam)
    z = abel_map(config.periods, SurfacePoint(lam, 1))
    w = complex(sheet1_w(config.curve, lam))
    return connection_values(config, np.array([lam]), z[None, :], np.array([w]))[0]


# ---------------------------------------------------------------------------
# Residues
# ---------------------------------------------------------------------------


def _residue_circle(config, j, radius, nodes):
    curve = config.curve
    lam_j = curve.branch_points[j]
    a, b = curve.cuts[j // 2]
    theta_start = float(np.angle(b - a)) + 0.5 * np.pi
    start = lam_j + radius * np.exp(1j * theta_start)
    u0 = abel_map(config.periods, SurfacePoint(start, 1))
    w0 = complex(sheet1_w(curve, start))
    verts = circle_polygon(lam_j, radius, nodes, phase=theta_start)
    zs, ws = abel_along_vertices(config.periods, verts, u0, w0, n=8)
    lam_nodes = verts[:-1]
    vals = connection_values(config, lam_nodes, zs[:-1], ws[:-1])
    return np.mean(vals * (lam_nodes - lam_j)[:, None, None], axis=0)


def residue_radius(curve: HyperellipticCurve, j: int) -> float:
    """One third of the distance to the nearest other branch point or foreign cut."""
    lam_j = curve.branch_points[j]
    d = min(abs(lam_j - bp) for i, bp in enumerate(curve.branch_points) if i != j)
    for ci, (a, b) in enumerate(curve.cuts):
        if ci != j // 2:
            d = min(d, float(seg_point_dist(a, b, lam_j)))
    return d / 3.0


def residues_from_psi(config: ThetaSolutionConfig, nodes: int = RESIDUE_NODES,
                      tol: float = 1e-8) -> SchlesingerState:
    """Residue matrices of the solution at every branch point, by circle
    quadrature of the pointwise coefficient matrix; node count is doubled
    until two levels agree."""
    curve = config.curve
    out = []
    for j in range(len(curve.branch_points)):
        radius = residue_radius(curve, j)
        n = nodes
        cur = _residue_circle(config, j, radius, n)
        while True:
            n *= 2
            ref = _residue_circle(config, j, radius, n)
            if np.abs(ref - cur).max() <= tol * max(1.0, np.abs(ref).max()):
                break
            cur = ref
            if n > 8 * nodes:
                raise PrecisionError(f"residue quadrature at branch point {j} "
                                     "did not stabilize")
        out.append(ref)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return SchlesingerState(np.asarray(curve.branch_points), np.asarray(out))


def solution_state(branch_points, p, q, subset=None, **kwargs):
    """Pipeline shorthand: build the configuration and extract residues."""
    config = build_solution(branch_points, p, q, subset=subset, **kwargs)
    return config, residues_from_psi(config)


# ---------------------------------------------------------------------------
# Hamiltonians and tau function
# ---------------------------------------------------------------------------


def hamiltonian(state: SchlesingerState, i: int) -> complex:
    """Deformation Hamiltonian for the i-th position, as the pairwise sum
    sum_{j != i} tr(A_i A_j) / (lambda_i - lambda_j).

    This normalization equals half the residue of tr A^2 at the pole, hence
    the small-circle contour form, and is the logarithmic position derivative
    of the tau function; both identities are enforced by tests.
    """
    pos, res = state.positions, state.residues
    if not 0 <= i < len(pos):
        raise ArgumentError(f"position index {i} out of range")
    diffs = pos[i] - pos
    if np.any(np.abs(np.delete(diffs, i)) == 0):
        raise DomainError("coincident positions")
    total = 0.0 + 0.0j
    for j in range(len(pos)):
        if j != i:
            total += np.trace(res[i] @ res[j]) / diffs[j]
    return complex(total)


def hamiltonians(state: SchlesingerState) -> np.ndarray:
    return np.array([hamiltonian(state, i) for i in range(len(state.positions))])


def hamiltonian_contour(state: SchlesingerState, i: int, nodes: int = RESIDUE_NODES) -> complex:
    """Contour form: (1/4 pi i) of the trace of the squared connection around
    the i-th position; cross-check of the pairwise-sum form."""
    pos = state.positions
    d = min(abs(pos[i] - pos[j]) for j in range(len(pos)) if j != i)
    ring = circle_polygon(pos[i], d / 3.0, nodes)[:-1]
    conn = state.connection()
    vals = np.array([np.trace(conn.matrix(v) @ conn.matrix(v)) for v in ring])
    return complex(0.5 * np.mean(vals * (ring - pos[i])))


def tau_factors(pd: PeriodData, p, q, evaluator: ThetaEvaluator | None = None) -> dict:
    """Multiplicative pieces of the tau function: the a-period determinant,
    the pairwise branch-point differences, and the theta constant."""
    ev = evaluator if evaluator is not None else ThetaEvaluator(pd.B)
    bp = pd.curve.branch_points
    diffs = [bp[j] - bp[k] for j in range(len(bp)) for k in range(j + 1, len(bp))]
    theta0 = complex(ev.value(np.asarray(p, dtype=complex),
                              np.asarray(q, dtype=complex), np.zeros(pd.genus)))
    return {"det_a": complex(np.linalg.det(pd.a_periods)),
            "differences": diffs, "theta0": theta0}


def tau_theta(config: ThetaSolutionConfig) -> complex:
    """Explicit tau value with principal branches of the multivalued factors."""
    f = tau_factors(config.periods, config.p, config.q, config.evaluator)
    val = np.exp(-0.5 * np.log(f["det_a"]))
    for d in f["differences"]:
        val *= np.exp(-0.125 * np.log(d))
    return complex(val * f["theta0"])


def tau_log_derivative_fd(branch_points, p, q, j: int, step: float = 1e-4,
                          quad_tol: float = 1e-10) -> complex:
    """Central difference of log tau in the j-th branch point, with every
    multivalued factor differenced through its ratio so no branch is crossed."""
    bp = [complex(b) for b in branch_points]
    if not 0 <= j < len(bp):
        raise ArgumentError(f"branch point index {j} out of range")
    sides = []
    corrections = []
    for s in (+1, -1):
        pts = list(bp)
        pts[j] += s * step
        pd = period_matrices(HyperellipticCurve(pts), tol=quad_tol)
        corrections.append(np.asarray(pd.metadata["bcycle_acorrections"]))
        sides.append(tau_factors(pd, p, q))
    plus, minus = sides
    if not np.array_equal(corrections[0], corrections[1]):
        raise PrecisionError("cycle realization changed across the difference "
                             "step; reduce the step or perturb the configuration")
    total = -0.5 * np.log(plus["det_a"] / minus["det_a"])
    for dp, dm in zip(plus["differences"], minus["differences"]):
        total += -0.125 * np.log(dp / dm)
    total += np.log(plus["theta0"] / minus["theta0"])
    return complex(total / (2.0 * step))


# ---------------------------------------------------------------------------
# Monodromy
# ---------------------------------------------------------------------------


def closed_form_monodromy(p, q, j: int) -> np.ndarray:
    """Anti-diagonal monodromy matrix for the 1-based branch point index j."""
    p = np.atleast_1d(np.asarray(p, dtype=complex))
    q = np.atleast_1d(np.asarray(q, dtype=complex))
    g = len(p)
    if not 1 <= j <= 2 * g + 2:
        raise ArgumentError(f"index {j} out of range 1..{2 * g + 2}")
    tpi = 2j * np.pi
    if j == 1:
        m = 1j
    elif j == 2:
        m = 1j * np.exp(-tpi * p.sum())
    elif j % 2 == 1:
        r = (j - 1) // 2
        m = -1j * np.exp(tpi * q[r - 1] - tpi * p[r - 1:].sum())
    else:
        r = (j - 2) // 2
        m = 1j * np.exp(tpi * q[r - 1] - tpi * p[r:].sum())
    return np.array([[0.0, -m], [1.0 / m, 0.0]], dtype=complex)


def closed_form_monodromies(p, q) -> list:
    g = len(np.atleast_1d(p))
    return [closed_form_monodromy(p, q, j) for j in range(1, 2 * g + 3)]


def transported_monodromies(config: ThetaSolutionConfig,
                            state: SchlesingerState | None = None,
                            n: int = 48, rtol: float = 1e-12, atol: float = 1e-13):
    """Monodromies of the extracted rational system around every branch point,
    transported from the base point; keyed by branch index, plus traversal order."""
    if state is None:
        state = residues_from_psi(config)
    conn = state.connection()
    return monodromy_set(conn, config.omega_base, n=n, rtol=rtol, atol=atol)


@dataclass
class MonodromyMatch:
    conjugator: np.ndarray
    signs: tuple
    residual: float
    max_error: float
    order: list


def match_monodromies(config: ThetaSolutionConfig, mats: dict, order: list,
                      tol: float = 1e-6) -> MonodromyMatch:
    """Best single conjugation taking the sign-adjusted closed-form list onto
    the transported monodromies.

    One overall sign per matrix is searched: reversing a loop orientation
    negates these square-root-of-minus-identity monodromies, so sign patterns
    are exactly the per-loop orientation conventions. The trivial pattern is
    preferred, then patterns with fewer flips.
    """
    n = len(mats)
    nums = [mats[i] for i in range(n)]
    closed = closed_form_monodromies(config.p, config.q)
    if len(closed) != n:
        raise ArgumentError("monodromy count does not match the branch count")
    best = None
    for signs in _iproduct((1, -1), repeat=n):
        cand = [s * m for s, m in zip(signs, closed)]
        try:
            c, resid = match_conjugation(nums, cand)
        except PrecisionError:
            continue
        err = max(np.abs(c @ cm @ np.linalg.inv(c) - nm).max()
                  for cm, nm in zip(cand, nums))
        key = (err > tol, sum(s < 0 for s in signs), err)
        if best is None or key < best[0]:
            best = (key, MonodromyMatch(c, signs, resid, float(err), list(order)))
    return best[1]


def cycle_pair_monodromy(mats: dict, kind: str, j: int) -> np.ndarray:
    """Composite monodromy realizing the j-th basic cycle (1-based) from the
    standard loops: kind 'a' multiplies the loops of one cut, kind 'b' the
    loops of the points enclosed between the first cut and cut j+1."""
    if kind == "a":
        idx = [2 * j, 2 * j + 1]
    elif kind == "b":
        idx = list(range(1, 2 * j + 1))
    else:
        raise ArgumentError("kind must be 'a' or 'b'")
    out = np.eye(2, dtype=complex)
    for i in idx:
        out = mats[i] @ out
    return out


def diagonal_exponent(mat: np.ndarray) -> complex:
    """For a matrix expected diagonal of the form diag(e^x, e^-x): x/(2 pi i),
    with a consistency report baked into the off-diagonal residual."""
    off = max(abs(mat[0, 1]), abs(mat[1, 0]))
    if off > 1e-6 * max(abs(mat[0, 0]), abs(mat[1, 1])):
        raise PrecisionError("composite monodromy is not diagonal in the matched frame")
    return complex(np.log(mat[0, 0]) / (2j * np.pi))


# ---------------------------------------------------------------------------
# Deformation residuals
# ---------------------------------------------------------------------------


def perturbed_state(config: ThetaSolutionConfig, index: int, delta) -> SchlesingerState:
    """Residues of the fully rebuilt solution with one branch point moved.

    Anchors and base point are carried over so finite differences compare
    like with like; periods, the odd characteristic, and the theta data are
    rederived from scratch.
    """
    pts = list(config.curve.branch_points)
    pts[index] += delta
    moved = build_solution(pts, config.p, config.q, subset=config.subset,
                           anchor_phi=config.anchor_phi, anchor_psi=config.anchor_psi,
                           omega_base=config.omega_base)
    return residues_from_psi(moved)


def schlesinger_residual(config: ThetaSolutionConfig, step: float = 1e-4,
                         indices=None) -> dict:
    """Finite-difference residual of the deformation equations on the
    theta-functional family.

    Central differences of the residue matrices in each tested position are
    compared against the commutator forms; the diagonal equation and the
    constancy of the residue eigenvalues are included.
    """
    state = residues_from_psi(config)
    n = len(state.positions)
    tested = range(n) if indices is None else indices
    pos = state.positions
    res = state.residues

    def commutator(a, b):
        return a @ b - b @ a

    offdiag = 0.0
    diagonal = 0.0
    eig_drift = 0.0
    for i in tested:
        plus = perturbed_state(config, i, step)
        minus = perturbed_state(config, i, -step)
        eig_drift = max(eig_drift, float(np.abs(plus.t - state.t).max()),
                        float(np.abs(minus.t - state.t).max()))
        deriv = (plus.residues - minus.residues) / (2.0 * step)
        for jj in range(n):
            if jj == i:
                expect = -sum(commutator(res[i], res[k]) / (pos[i] - pos[k])
                              for k in range(n) if k != i)
                diagonal = max(diagonal, float(np.abs(deriv[i] - expect).max()))
            else:
                expect = commutator(res[jj], res[i]) / (pos[jj] - pos[i])
                offdiag = max(offdiag, float(np.abs(deriv[jj] - expect).max()))
    return {"offdiag": offdiag, "diagonal": diagonal, "eigenvalue_drift": eig_drift}
