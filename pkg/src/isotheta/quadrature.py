"""Gaussian quadrature on complex segments with inverse-sqrt endpoint weights.

Cut-endpoint integrands behave like (lam - e)^(-1/2); the matching Gauss rules
(Legendre, Jacobi with exponent -1/2, Chebyshev first kind) absorb those
factors so the transformed integrand is analytic and convergence is geometric.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.special import roots_chebyt, roots_jacobi, roots_legendre

from .errors import PrecisionError

QUAD_TOL = 1e-10
MAX_NODES = 4096


@lru_cache(maxsize=None)
def _rule(n: int, sing_start: bool, sing_end: bool):
    """Nodes x in (-1,1) and effective weights W such that
    int_{-1}^{1} f(x) dx  ~=  sum W_i f(x_i)
    for f with inverse-sqrt singularities at the flagged endpoints."""
    if sing_start and sing_end:
        x, w = roots_chebyt(n)
        W = w * np.sqrt(1.0 - x**2)
    elif sing_start:
        x, w = roots_jacobi(n, 0.0, -0.5)
        W = w * np.sqrt(1.0 + x)
    elif sing_end:
        x, w = roots_jacobi(n, -0.5, 0.0)
        W = w * np.sqrt(1.0 - x)
    else:
        x, w = roots_legendre(n)
        W = w
    return x, W


def segment_nodes(a: complex, b: complex, n: int, sing=(False, False)):
    """Quadrature nodes on segment [a, b] and weights including dlam."""
    x, W = _rule(n, bool(sing[0]), bool(sing[1]))
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    return mid + half * x, W * half


def integrate_segment(f, a: complex, b: complex, n: int = 64, sing=(False, False)):
    """integral of f over [a, b]; f is vectorized over complex arrays and may
    return shape (n,) or (n, ...) values (the node axis is contracted)."""
    lam, w = segment_nodes(a, b, n, sing)
    return np.tensordot(w, np.asarray(f(lam)), axes=(0, 0))


def integrate_segment_adaptive(
    f,
    a: complex,
    b: complex,
    n0: int = 48,
    sing=(False, False),
    tol: float = QUAD_TOL,
    scale: float | None = None,
):
    """Node-doubling refinement until two levels agree to tol (absolute,
    relative to `scale` when given)."""
    n = n0
    prev = integrate_segment(f, a, b, n, sing)
    while n <= MAX_NODES:
        n *= 2
        cur = integrate_segment(f, a, b, n, sing)
        ref = scale if scale is not None else max(1.0, float(np.max(np.abs(cur))))
        if np.max(np.abs(cur - prev)) <= tol * ref:
            return cur
        prev = cur
    raise PrecisionError(f"segment quadrature did not stabilize below {tol} at {MAX_NODES} nodes")


def trapezoid_closed(vals, dlam_dt, dt: float):
    """Trapezoid rule for a closed analytic contour sampled uniformly in t
    (endpoint not repeated); spectrally accurate for analytic integrands."""
    return np.tensordot(np.asarray(dlam_dt) * dt, np.asarray(vals), axes=(0, 0))
