"""Hyperelliptic curves w^2 = prod (lam - lam_j) with a concrete cut system.

The 2g+2 branch points are taken in their given order; consecutive pairs are
joined by straight branch cuts. Sheet 1 carries the branch of w with
w / lam^(g+1) -> 1 at infinity; it is realized as a product of per-cut square
roots, each analytic off its own cut, so no global branch tracking is needed
away from the cuts.

Cycles are realized geometrically: the cycle a_j is a Bernstein ellipse around
cut j (counterclockwise, j = 1..g, cut 0 being the first pair), and the b_j
period is twice the integral from the second branch point to branch point
2j+1 along a routed polyline. Period integrals use quadrature matched to the
inverse-sqrt endpoint behavior.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ArgumentError, DomainError, LatticeError, PoleError, PrecisionError
from .geometry import (
    Obstacle,
    min_pairwise_distance,
    route,
    seg_point_dist,
    seg_seg_dist,
)
from .quadrature import integrate_segment, segment_nodes
from .riemann_theta import as_riemann_matrix, char_parity

QUAD_TOL = 1e-10
OFF_CUT_EPS = 1e-9


@dataclass(frozen=True)
class SurfacePoint:
    """A point of the curve: base coordinate plus sheet (1 or 2)."""

    lam: complex
    sheet: int = 1

    def __post_init__(self):
        if self.sheet not in (1, 2):
            raise ArgumentError(f"sheet must be 1 or 2, got {self.sheet}")

    def involution(self) -> "SurfacePoint":
        return SurfacePoint(self.lam, 3 - self.sheet)


@dataclass(frozen=True)
class HyperellipticCurve:
    branch_points: tuple

    def __init__(self, branch_points):
        pts = tuple(complex(b) for b in branch_points)
        if len(pts) < 4 or len(pts) % 2:
            raise DomainError(f"need an even number >= 4 of branch points, got {len(pts)}")
        scale = max(abs(p) for p in pts) or 1.0
        if min_pairwise_distance(pts) < 1e-8 * scale:
            raise DomainError("branch points are not distinct")
        object.__setattr__(self, "branch_points", pts)
        cuts = self.cuts
        for i in range(len(cuts)):
            for j in range(i + 1, len(cuts)):
                if seg_seg_dist(*cuts[i], *cuts[j]) < 1e-8 * scale:
                    raise DomainError(f"branch cuts {i} and {j} intersect or touch")

    @property
    def genus(self) -> int:
        return len(self.branch_points) // 2 - 1

    @property
    def cuts(self):
        b = self.branch_points
        return [(b[2 * i], b[2 * i + 1]) for i in range(len(b) // 2)]

    @property
    def scale(self) -> float:
        return max(abs(p) for p in self.branch_points)

    def min_separation(self) -> float:
        return min_pairwise_distance(self.branch_points)

    def cut_obstacles(self):
        return [Obstacle(a, b) for a, b in self.cuts]

    def off_cut_distance(self, lam) -> float:
        return min(float(np.min(seg_point_dist(a, b, lam))) for a, b in self.cuts)


def _cut_sqrt(lam, a, b):
    """Analytic branch of sqrt((lam-a)(lam-b)) off the segment [a, b],
    asymptotic to lam - (a+b)/2 at infinity."""
    c, d = 0.5 * (a + b), 0.5 * (b - a)
    u = (lam - c) / d
    return d * u * np.sqrt(1.0 - 1.0 / u**2)


def sheet1_w(curve: HyperellipticCurve, lam):
    """w on sheet 1 at points off the cuts (vectorized)."""
    lam = np.asarray(lam, dtype=complex)
    out = np.ones_like(lam)
    for a, b in curve.cuts:
        out = out * _cut_sqrt(lam, a, b)
    return out


def w_on_sheet(curve: HyperellipticCurve, point: SurfacePoint):
    """w at a surface point; raises PoleError within OFF_CUT_EPS of a cut."""
    if curve.off_cut_distance(point.lam) < OFF_CUT_EPS * curve.scale:
        raise PoleError("point is on or too close to a branch cut; sheet is ambiguous")
    w = complex(sheet1_w(curve, point.lam))
    return w if point.sheet == 1 else -w


def track_signed(raw, start):
    """Continue +-raw along an ordered sequence, starting nearest to `start`."""
    raw = np.asarray(raw, dtype=complex)
    out = np.empty_like(raw)
    prev = start
    for i, v in enumerate(raw):
        out[i] = v if abs(v - prev) <= abs(v + prev) else -v
        prev = out[i]
    return out


# ---------------------------------------------------------------------------
# Periods
# ---------------------------------------------------------------------------


@dataclass
class PeriodData:
    curve: HyperellipticCurve
    a_periods: np.ndarray  # (g, g): row = power, column = cycle
    b_periods: np.ndarray
    B: np.ndarray  # normalized period matrix (validated Riemann matrix)
    riemann_constants: np.ndarray  # (g,)
    a_inv: np.ndarray = field(repr=False)
    metadata: dict = field(default_factory=dict, repr=False)

    @property
    def genus(self) -> int:
        return self.curve.genus


def _bernstein_rho(c, d, point):
    u = (point - c) / d
    r = u + np.sqrt(u - 1.0) * np.sqrt(u + 1.0)
    if abs(r) < 1.0:
        r = 1.0 / r
    return float(np.log(abs(r)))


def _a_period_column(curve, cut_index, n):
    """Counterclockwise integrals of lam^(k-1)/w around the given cut."""
    a, b = curve.cuts[cut_index]
    c, d = 0.5 * (a + b), 0.5 * (b - a)
    others = [p for p in curve.branch_points if p not in (a, b)]
    rho = 0.5 * min(_bernstein_rho(c, d, p) for p in others)
    th = 2 * np.pi * np.arange(n) / n
    z = rho + 1j * th
    lam = c + d * np.cosh(z)
    dlam = d * np.sinh(z) * 1j
    w = sheet1_w(curve, lam)
    g = curve.genus
    powers = lam[:, None] ** np.arange(g)[None, :]
    vals = powers / w[:, None]
    return (2 * np.pi / n) * np.tensordot(dlam, vals, axes=(0, 0)), rho


def _refine_segment(curve, a, b, out, depth=0):
    # keep panels short relative to their distance from branch points so the
    # Gauss rules converge geometrically; endpoint singularities are excluded
    # (they are absorbed by the weighted rules)
    eps = 1e-12 * curve.scale
    pts = [p for p in curve.branch_points if min(abs(p - a), abs(p - b)) > eps]
    dmin = min((float(seg_point_dist(a, b, p)) for p in pts), default=np.inf)
    if depth >= 6 or abs(b - a) <= 3.0 * dmin:
        out.append(b)
        return
    m = 0.5 * (a + b)
    _refine_segment(curve, a, m, out, depth + 1)
    _refine_segment(curve, m, b, out, depth + 1)


def refine_polyline(curve, vertices):
    out = [vertices[0]]
    for a, b in zip(vertices, vertices[1:]):
        _refine_segment(curve, a, b, out)
    return out


def _polyline_integral(curve, vertices, n):
    """2 * integral of lam^(k-1)/w along a polyline between two branch points
    (sheet 1), with inverse-sqrt endpoint quadrature."""
    g = curve.genus
    verts = refine_polyline(curve, vertices)
    total = np.zeros(g, dtype=complex)
    m = len(verts) - 1
    for i in range(m):
        sing = (i == 0, i == m - 1)
        lam, wts = segment_nodes(verts[i], verts[i + 1], n, sing)
        w = sheet1_w(curve, lam)
        powers = lam[:, None] ** np.arange(g)[None, :]
        total += np.tensordot(wts, powers / w[:, None], axes=(0, 0))
    return 2.0 * total


def _b_path(curve, j, clearance):
    """Polyline from branch point 2 to branch point 2j+1 (1-based numbering)."""
    start = curve.branch_points[1]
    end = curve.branch_points[2 * j]
    return route(start, end, curve.cut_obstacles(), clearance, exempt=(start, end))


def period_matrices(curve: HyperellipticCurve, tol: float = QUAD_TOL) -> PeriodData:
    """A- and b-periods, normalized period matrix, and Riemann constants.

    Quadrature is refined by doubling until two levels agree to tol relative
    to the result scale; failure raises PrecisionError.
    """
    g = curve.genus
    clearance = 0.1 * curve.min_separation()
    amat = np.zeros((g, g), dtype=complex)
    meta = {"a_contours": [], "b_paths": [], "clearance": clearance}

    for j in range(1, g + 1):
        n = 64
        col, rho = _a_period_column(curve, j, n)
        while True:
            n *= 2
            ref, _ = _a_period_column(curve, j, n)
            if np.max(np.abs(ref - col)) <= tol * max(1.0, np.max(np.abs(ref))):
                break
            col = ref
            if n > 8192:
                raise PrecisionError("a-period quadrature did not stabilize")
        amat[:, j - 1] = ref
        meta["a_contours"].append({"cut": j, "rho": rho, "nodes": n})

    bmat = np.zeros((g, g), dtype=complex)
    for j in range(1, g + 1):
        verts = _b_path(curve, j, clearance)
        n = 96
        col = _polyline_integral(curve, verts, n)
        while True:
            n *= 2
            ref = _polyline_integral(curve, verts, n)
            if np.max(np.abs(ref - col)) <= tol * max(1.0, np.max(np.abs(ref))):
                break
            col = ref
            if n > 8192:
                raise PrecisionError("b-period quadrature did not stabilize")
        bmat[:, j - 1] = ref
        meta["b_paths"].append({"cycle": j, "vertices": [complex(v) for v in verts], "nodes": n})

    a_inv = np.linalg.inv(amat)
    raw = a_inv @ bmat
    # a routed b-path can differ from the canonical cycle by whole a-cycles;
    # that shows up as an integer asymmetry of the raw matrix and is removed
    # by adding the corresponding a-columns back (recorded in metadata)
    corr = np.zeros((g, g), dtype=int)
    for j in range(g):
        for k in range(j + 1, g):
            defect = raw[k, j] - raw[j, k]
            n = int(round(defect.real))
            if n:
                corr[j, k] = n
                bmat[:, k] += n * amat[:, j]
    meta["bcycle_acorrections"] = corr
    B = as_riemann_matrix(a_inv @ bmat)
    k = np.arange(1, g + 1) / 2.0 + 0.5 * B.sum(axis=1)
    return PeriodData(curve, amat, bmat, B, k, a_inv, meta)


# ---------------------------------------------------------------------------
# Abel map
# ---------------------------------------------------------------------------


def du_density(pd: PeriodData, lam, w):
    """Normalized holomorphic differentials dU_k/dlam at given (lam, w) values;
    returns shape (..., g)."""
    lam = np.asarray(lam, dtype=complex)
    w = np.asarray(w, dtype=complex)
    powers = lam[..., None] ** np.arange(pd.genus)
    return (powers @ pd.a_inv.T) / w[..., None]


def abel_map(pd: PeriodData, point: SurfacePoint, n: int = 96, tol: float = QUAD_TOL):
    """Abel map from the first branch point to `point` along a routed path
    that starts on sheet 1 and stays off the cuts; for sheet-2 targets the
    mirrored path gives the negated sheet-1 value."""
    curve = pd.curve
    start = curve.branch_points[0]
    if abs(point.lam - start) < 1e-12 * curve.scale:
        return np.zeros(pd.genus, dtype=complex)
    clearance = 0.1 * curve.min_separation()
    verts = route(start, point.lam, curve.cut_obstacles(), clearance, exempt=(start, point.lam))
    z = _abel_polyline(pd, verts, n, tol, end_singular=False)
    return z if point.sheet == 1 else -z


def branch_point_abel(pd: PeriodData, index: int, n: int = 96, tol: float = QUAD_TOL):
    """Abel map from branch point 0 to branch point `index` (sheet-1 path)."""
    curve = pd.curve
    if not 0 <= index < len(curve.branch_points):
        raise ArgumentError(f"branch point index {index} out of range")
    if index == 0:
        return np.zeros(pd.genus, dtype=complex)
    start = curve.branch_points[0]
    end = curve.branch_points[index]
    clearance = 0.1 * curve.min_separation()
    verts = route(start, end, curve.cut_obstacles(), clearance, exempt=(start, end))
    return _abel_polyline(pd, verts, n, tol, end_singular=True)


def _abel_polyline(pd, verts, n, tol, end_singular):
    verts = refine_polyline(pd.curve, verts)

    def level(nn):
        total = np.zeros(pd.genus, dtype=complex)
        m = len(verts) - 1
        for i in range(m):
            sing = (i == 0, end_singular and i == m - 1)
            lam, wts = segment_nodes(verts[i], verts[i + 1], nn, sing)
            w = sheet1_w(pd.curve, lam)
            total += np.tensordot(wts, du_density(pd, lam, w), axes=(0, 0))
        return total

    cur = level(n)
    ref = level(2 * n)
    if np.max(np.abs(ref - cur)) > tol * max(1.0, float(np.max(np.abs(ref)))):
        ref2 = level(4 * n)
        if np.max(np.abs(ref2 - ref)) > tol * max(1.0, float(np.max(np.abs(ref2)))):
            raise PrecisionError("abel map quadrature did not stabilize")
        ref = ref2
    return ref


def abel_along_vertices(pd: PeriodData, vertices, z0, w0, n: int = 24):
    """Continue (z, w) along straight chords through `vertices`.

    z0, w0 are the Abel value and w at vertices[0]; w is tracked by sign
    continuity, so the chords may cross branch cuts (the sheet follows).
    Returns arrays z[i], w[i] at each vertex.
    """
    verts = np.asarray(vertices, dtype=complex)
    zs = np.empty((len(verts), pd.genus), dtype=complex)
    ws = np.empty(len(verts), dtype=complex)
    zs[0], ws[0] = z0, w0
    for i in range(len(verts) - 1):
        lam, wts = segment_nodes(verts[i], verts[i + 1], n)
        raw = sheet1_w(pd.curve, lam)
        tracked = track_signed(raw, ws[i])
        zs[i + 1] = zs[i] + np.tensordot(wts, du_density(pd, lam, tracked), axes=(0, 0))
        w_end_raw = complex(sheet1_w(pd.curve, verts[i + 1]))
        last = tracked[-1]
        ws[i + 1] = w_end_raw if abs(w_end_raw - last) <= abs(w_end_raw + last) else -w_end_raw
    return zs, ws


# ---------------------------------------------------------------------------
# Half periods
# ---------------------------------------------------------------------------


def odd_half_period(pd: PeriodData, subset, tol: float = 1e-6):
    """Half-integer characteristic (p, q) solving B p + q = sum_{i in subset}
    (Abel image of branch point i) - K over the half-integer lattice.

    subset holds branch-point indices (0-based, first branch point excluded);
    must have g-1 elements. The result is reduced mod 1 and must be odd.
    """
    g = pd.genus
    subset = tuple(int(i) for i in subset)
    if len(subset) != g - 1:
        raise ArgumentError(f"subset must have g-1 = {g - 1} elements, got {len(subset)}")
    if len(set(subset)) != len(subset) or any(i <= 0 or i >= 2 * g + 2 for i in subset):
        raise ArgumentError("subset entries must be distinct indices in 1..2g+1")

    rhs = -pd.riemann_constants.astype(complex)
    for i in subset:
        rhs = rhs + branch_point_abel(pd, i)

    p = np.linalg.solve(pd.B.imag, rhs.imag)
    q = rhs.real - pd.B.real @ p
    p_round = np.round(2 * p) / 2
    q_round = np.round(2 * q) / 2
    resid = max(np.abs(p - p_round).max(), np.abs(q - q_round).max())
    if resid > tol:
        raise LatticeError(f"half-period solve off the half-integer lattice by {resid:.2e}")
    p_red = np.mod(p_round, 1.0)
    q_red = np.mod(q_round, 1.0)
    if char_parity(p_red, q_red) != "odd":
        raise LatticeError(
            f"half period from subset {subset} is even; cycle realization inconsistent"
        )
    return p_red, q_red
