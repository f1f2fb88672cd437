"""Riemann theta functions in genus g with arbitrary complex characteristics.

Theta[p; q](z | B) = sum over n in Z^g of
    exp(pi i (n+p)^T B (n+p) + 2 pi i (n+p)^T (z+q)).

The sum is taken over an integer box that contains the certified ellipsoid
of the Gaussian factor after exact lattice reduction of z, so a single
tolerance controls every evaluation. First-order z-gradients come from the
term-wise differentiated series.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ArgumentError, ConvergenceError, DomainError

SERIES_TOL = 1e-12
POINT_CAP = 4_000_000

_TWO_PI_I = 2j * np.pi


def as_riemann_matrix(B, sym_rtol: float = 1e-10):
    """Validate a g x g period matrix: symmetric, positive-definite imaginary part."""
    B = np.asarray(B, dtype=complex)
    if B.ndim != 2 or B.shape[0] != B.shape[1]:
        raise ArgumentError(f"period matrix must be square, got shape {B.shape}")
    scale = max(np.abs(B).max(), 1.0)
    if np.abs(B - B.T).max() > sym_rtol * scale:
        raise DomainError("period matrix is not symmetric within tolerance")
    Bs = 0.5 * (B + B.T)
    eigs = np.linalg.eigvalsh(Bs.imag)
    if eigs.min() <= 0:
        raise DomainError(f"imaginary part of period matrix is not positive definite (min eig {eigs.min():.3e})")
    return Bs


@dataclass
class ThetaEvaluator:
    """Precomputed context for repeated theta evaluations with a fixed B."""

    B: np.ndarray
    tol: float = SERIES_TOL
    _im_inv: np.ndarray = field(init=False, repr=False)
    _eig_min: float = field(init=False, repr=False)

    def __post_init__(self):
        self.B = as_riemann_matrix(self.B)
        Y = self.B.imag
        self._im_inv = np.linalg.inv(Y)
        self._eig_min = float(np.linalg.eigvalsh(Y).min())

    # -- lattice reduction ---------------------------------------------------
    def reduce(self, z):
        """z = z0 + n1 + B n2 with n1, n2 integer vectors; returns (z0, n1, n2)."""
        z = np.asarray(z, dtype=complex)
        y = z.imag @ self._im_inv.T
        n2 = np.round(y)
        x = z.real - y @ self.B.real.T
        n1 = np.round(x)
        z0 = z - n1 - n2 @ self.B.T
        return z0, n1, n2

    # -- evaluation ----------------------------------------------------------
    def _lattice_box(self, p, q, z0):
        g = self.B.shape[0]
        centers = -(np.real(p) + (z0.imag + np.imag(q)) @ self._im_inv.T)
        centers = np.atleast_2d(centers)
        radius = math.sqrt(max(math.log(1.0 / self.tol), 1.0) / (math.pi * self._eig_min)) + 3.0
        los = np.floor(centers.min(axis=0) - radius).astype(int)
        his = np.ceil(centers.max(axis=0) + radius).astype(int)
        counts = his - los + 1
        if np.prod(counts.astype(float)) > POINT_CAP:
            raise ConvergenceError(
                f"theta lattice box of {np.prod(counts)} points exceeds cap {POINT_CAP}"
            )
        grids = np.meshgrid(*[np.arange(lo, hi + 1) for lo, hi in zip(los, his)], indexing="ij")
        return np.stack([gr.ravel() for gr in grids], axis=-1).astype(float)

    def value(self, p, q, z, with_grad: bool = False):
        """Theta[p;q](z|B) for z of shape (..., g); optional z-gradient."""
        g = self.B.shape[0]
        p = np.asarray(p, dtype=complex).reshape(g)
        q = np.asarray(q, dtype=complex).reshape(g)
        z = np.asarray(z, dtype=complex)
        if z.shape[-1] != g:
            raise ArgumentError(f"argument must have trailing dimension {g}, got shape {z.shape}")
        lead = z.shape[:-1]
        zf = z.reshape(-1, g)
        z0, n1, n2 = self.reduce(zf)

        n = self._lattice_box(p, q, z0)
        npv = n + p  # (K, g)
        quad = np.einsum("kg,gh,kh->k", npv, self.B, npv)
        gauss = np.exp(1j * np.pi * quad)
        phase = np.exp(_TWO_PI_I * (npv @ (z0 + q).T))  # (K, M)
        terms = gauss[:, None] * phase
        raw = terms.sum(axis=0)

        pref = np.exp(
            _TWO_PI_I * (n1 @ p - n2 @ q)
            - 1j * np.pi * np.einsum("mg,gh,mh->m", n2, self.B, n2)
            - _TWO_PI_I * np.einsum("mg,mg->m", n2, z0)
        )
        val = (pref * raw).reshape(lead)
        if not with_grad:
            return val
        raw_grad = np.einsum("kg,km->mg", npv, terms) * _TWO_PI_I
        grad = pref[:, None] * (raw_grad - _TWO_PI_I * n2 * raw[:, None])
        return val, grad.reshape(lead + (g,))


def theta_g(p, q, z, B, tol: float = SERIES_TOL, with_grad: bool = False):
    """One-shot theta evaluation; builds a ThetaEvaluator internally."""
    return ThetaEvaluator(B, tol).value(p, q, z, with_grad=with_grad)


def char_parity(p, q, tol: float = 1e-8) -> str:
    """Parity of a half-integer characteristic: 'even' or 'odd' from 4<p,q> mod 2."""
    p = np.atleast_1d(np.asarray(p, dtype=float))
    q = np.atleast_1d(np.asarray(q, dtype=float))
    if p.shape != q.shape:
        raise ArgumentError("characteristic halves must have equal length")
    for v in (2 * p, 2 * q):
        if np.abs(v - np.round(v)).max() > tol:
            raise ArgumentError("characteristic is not half-integer")
    pairing = int(round(float(4.0 * np.dot(p, q))))
    return "odd" if pairing % 2 else "even"
