"""Planar geometry for cut systems and path routing.

Points are complex numbers; obstacles are segments (cuts) or points
(punctures) with a required clearance. Routing is deterministic so that
finite-difference perturbations of a configuration produce continuously
deforming paths.
"""

from __future__ import annotations

import numpy as np

from .errors import PathError


def seg_point_dist(a: complex, b: complex, p) -> float:
    """Distance from point(s) p to segment [a, b]."""
    p = np.asarray(p, dtype=complex)
    d = b - a
    L2 = abs(d) ** 2
    if L2 == 0:
        out = np.abs(p - a)
    else:
        t = np.clip(((p - a) * np.conj(d)).real / L2, 0.0, 1.0)
        out = np.abs(p - (a + t * d))
    return out if out.shape else float(out)


def seg_seg_dist(a1: complex, b1: complex, a2: complex, b2: complex) -> float:
    """Minimal distance between two segments (0 if they intersect)."""
    if segments_cross(a1, b1, a2, b2):
        return 0.0
    return float(
        min(
            np.min(seg_point_dist(a1, b1, np.array([a2, b2]))),
            np.min(seg_point_dist(a2, b2, np.array([a1, b1]))),
        )
    )


def _orient(a: complex, b: complex, c: complex) -> float:
    return ((b - a) * np.conj(c - a)).imag


def segments_cross(a1: complex, b1: complex, a2: complex, b2: complex) -> bool:
    """Proper or touching intersection of two closed segments."""
    d1 = _orient(a2, b2, a1)
    d2 = _orient(a2, b2, b1)
    d3 = _orient(a1, b1, a2)
    d4 = _orient(a1, b1, b2)
    if ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0)):
        return True
    eps = 1e-15 * max(abs(b1 - a1), abs(b2 - a2), 1.0)
    for d, (p, s0, s1) in zip(
        (d1, d2, d3, d4), ((a1, a2, b2), (b1, a2, b2), (a2, a1, b1), (b2, a1, b1))
    ):
        if abs(d) <= eps and seg_point_dist(s0, s1, p) <= eps:
            return True
    return False


class Obstacle:
    """A segment or point that paths must keep a given clearance from."""

    def __init__(self, a: complex, b: complex | None = None):
        self.a = complex(a)
        self.b = complex(b) if b is not None else complex(a)

    def endpoints(self):
        return (self.a, self.b)

    def margin(self, p: complex, q: complex, clearance: float, exempt: tuple[complex, ...] = ()):
        """min over samples of [distance to obstacle - local requirement].

        The requirement is `clearance`, ramped down to zero inside a small
        ball around any exempt endpoint e of this obstacle, so a path may
        legitimately start or end on a cut endpoint at any departure angle.
        """
        t = np.linspace(0.0, 1.0, 129)
        samples = p + t * (q - p)
        d = np.asarray(seg_point_dist(self.a, self.b, samples))
        req = np.full_like(d, clearance)
        L = abs(self.b - self.a)
        r0 = min(2.0 * clearance, 0.4 * L) if L > 0 else 2.0 * clearance
        for e in exempt:
            ramp = np.clip((np.abs(samples - e) - r0) / (2.0 * r0), 0.0, 1.0)
            req = np.minimum(req, clearance * ramp)
        return float(np.min(d - req))


def _own_exempt(ob: Obstacle, exempt):
    return tuple(e for e in exempt if any(abs(e - oe) < 1e-12 for oe in ob.endpoints()))


def _segment_margin(p, q, obstacles, clearance, exempt):
    worst = np.inf
    for ob in obstacles:
        ex = _own_exempt(ob, exempt)
        if not ex and segments_cross(p, q, ob.a, ob.b):
            return -np.inf
        worst = min(worst, ob.margin(p, q, clearance, exempt=ex))
    return worst


def route(
    start: complex,
    end: complex,
    obstacles: list[Obstacle],
    clearance: float,
    exempt: tuple[complex, ...] = (),
    _depth: int = 0,
) -> list[complex]:
    """Deterministic polyline from start to end keeping clearance from obstacles.

    Endpoints listed in exempt may touch obstacles whose endpoint they are.
    Detours go around the worst offending obstacle, trying the shorter side
    first so the choice is reproducible and stable under small perturbations.
    """
    if _segment_margin(start, end, obstacles, clearance, exempt) >= 0:
        return [start, end]
    if _depth > 8:
        raise PathError("path routing exceeded recursion limit; configuration too crowded")

    worst, worst_m = None, np.inf
    for ob in obstacles:
        m = ob.margin(start, end, clearance, exempt=_own_exempt(ob, exempt))
        if m < worst_m:
            worst, worst_m = ob, m

    cands = []
    axis = worst.b - worst.a
    if abs(axis) < 1e-14:
        axis = end - start
    u = axis / abs(axis)
    margin = 2.5 * clearance
    for e, away in ((worst.a, -u), (worst.b, u)):
        for rot in (1.0, 1j, -1j):
            cands.append(e + margin * away * rot)
    # near-equal lengths break toward the upper half plane so the homotopy
    # class of the detour is reproducible for symmetric configurations
    cands.sort(key=lambda w: (round(abs(w - start) + abs(w - end), 9), round(-w.imag, 12), round(w.real, 12)))
    for w in cands:
        if abs(w - start) < 1e-3 * clearance:
            continue
        if _segment_margin(start, w, obstacles, clearance, exempt) < 0:
            continue
        try:
            tail = route(w, end, obstacles, clearance, exempt, _depth + 1)
        except PathError:
            continue
        return [start] + tail
    raise PathError("no clear detour found; reduce clearance or separate the configuration")


def polyline_length(vertices) -> float:
    v = np.asarray(vertices, dtype=complex)
    return float(np.abs(np.diff(v)).sum())


def circle_polygon(center: complex, radius: float, n: int = 64, phase: float = 0.0):
    """Closed CCW polygon inscribed in a circle; first vertex repeated at the end."""
    th = phase + 2 * np.pi * np.arange(n + 1) / n
    return center + radius * np.exp(1j * th)


def min_pairwise_distance(points) -> float:
    pts = np.asarray(points, dtype=complex)
    n = len(pts)
    if n < 2:
        return np.inf
    d = np.abs(pts[:, None] - pts[None, :]) + np.diag([np.inf] * n)
    return float(d.min())
