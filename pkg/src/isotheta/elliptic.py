"""Scalar theta functions with characteristics and the twisted elliptic kernels.

Everything is built on one series evaluator with exact lattice reduction:
values at lambda = lambda0 + n1 + n2*mu are obtained from the reduced point
lambda0 together with the exact quasi-periodicity prefactor, so ratios such as
the w and Z kernels are correct for arbitrary arguments without any sign
bookkeeping by the caller.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import ConvergenceError, DomainError, PoleError

# Default certified series tolerance and pole-exclusion radius (in reduced
# coordinates), plus a hard cap on the summation window.
SERIES_TOL = 1e-12
POLE_RADIUS = 1e-6
TERM_CAP = 20000

_TWO_PI_I = 2j * np.pi

# (p, q) characteristics of the four classical theta functions; kind 1 also
# carries an overall minus sign.
_JACOBI_CHAR = {1: (0.5, 0.5), 2: (0.5, 0.0), 3: (0.0, 0.0), 4: (0.0, 0.5)}

# Numerator theta kind paired with each twisted kernel w_alpha / Z_alpha.
_KERNEL_KIND = {1: 4, 2: 3, 3: 2}


def check_modulus(mu: complex) -> complex:
    mu = complex(mu)
    if not (np.isfinite(mu.real) and np.isfinite(mu.imag)) or mu.imag <= 0:
        raise DomainError(f"torus modulus must have positive imaginary part, got {mu}")
    return mu


def lattice_reduce(lam, mu):
    """Split lam = lam0 + n1 + n2*mu with real coefficients of lam0 in [-1/2, 1/2).

    Returns (lam0, n1, n2) as arrays broadcast against lam.
    """
    mu = check_modulus(mu)
    lam = np.asarray(lam, dtype=complex)
    y = lam.imag / mu.imag
    n2 = np.round(y)
    x = lam.real - y * mu.real
    n1 = np.round(x)
    lam0 = lam - n1 - n2 * mu
    return lam0, n1.astype(np.int64), n2.astype(np.int64)


def _series(p, q, lam0, mu, tol, nder):
    """Partial theta sums sum_m (2 pi i (m+p))^k exp(pi i mu (m+p)^2 + 2 pi i (m+p)(lam0+q))
    for k = 0..nder, over a window certified for reduced arguments."""
    lam0 = np.atleast_1d(np.asarray(lam0, dtype=complex))
    half = math.sqrt(max(math.log(1.0 / tol), 1.0) / (math.pi * mu.imag)) + 4.0
    centers = -np.real(p) - (lam0.imag + np.imag(q)) / mu.imag
    m_lo = math.floor(centers.min() - half)
    m_hi = math.ceil(centers.max() + half)
    if m_hi - m_lo > TERM_CAP:
        raise ConvergenceError(
            f"theta series window {m_hi - m_lo} exceeds cap {TERM_CAP} (mu too close to the real axis?)"
        )
    m = np.arange(m_lo, m_hi + 1, dtype=float)
    mp = m + p
    gauss = np.exp(1j * np.pi * mu * mp**2)
    phase = np.exp(_TWO_PI_I * np.multiply.outer(mp, lam0 + q))
    terms = gauss[:, None] * phase
    out = []
    fac = np.ones_like(mp)
    for _ in range(nder + 1):
        out.append(np.sum(fac[:, None] * terms, axis=0))
        fac = fac * (_TWO_PI_I * mp)
    return out


def _theta_reduced(p, q, lam, mu, tol, nder):
    """Theta and lam-derivatives at arbitrary lam via reduction + exact prefactor."""
    lam0, n1, n2 = lattice_reduce(lam, mu)
    shape = lam0.shape
    lam0 = np.atleast_1d(lam0)
    n1 = np.atleast_1d(n1)
    n2 = np.atleast_1d(n2)
    ders = _series(p, q, lam0, mu, tol, nder)
    pref = np.exp(
        _TWO_PI_I * (p * n1 - q * n2)
        - 1j * np.pi * mu * n2.astype(float) ** 2
        - _TWO_PI_I * n2 * lam0
    )
    shift = _TWO_PI_I * n2
    val = pref * ders[0]
    out = [val]
    if nder >= 1:
        out.append(pref * (ders[1] - shift * ders[0]))
    if nder >= 2:
        out.append(pref * (ders[2] - 2.0 * shift * ders[1] + shift**2 * ders[0]))
    return [o.reshape(shape) if shape else o[0] for o in out]


def theta_pq(p, q, lam, mu, tol: float = SERIES_TOL):
    """Theta with characteristic [p, q] at lam for modulus mu.

    Series: sum over integers m of exp(pi i mu (m+p)^2 + 2 pi i (m+p)(lam+q)).
    Accepts scalar or array lam; p, q may be any complex numbers.
    """
    return _theta_reduced(complex(p), complex(q), lam, check_modulus(mu), tol, 0)[0]


def theta_pq_dlam(p, q, lam, mu, tol: float = SERIES_TOL):
    """d/dlam of theta_pq, by the term-wise differentiated series."""
    return _theta_reduced(complex(p), complex(q), lam, check_modulus(mu), tol, 1)[1]


def jacobi_theta(kind: int, lam, mu, tol: float = SERIES_TOL):
    """Classical theta_1..theta_4; theta_1 = -theta[1/2,1/2]."""
    if kind not in _JACOBI_CHAR:
        raise DomainError(f"theta kind must be 1..4, got {kind}")
    p, q = _JACOBI_CHAR[kind]
    val = theta_pq(p, q, lam, mu, tol)
    return -val if kind == 1 else val


def jacobi_theta_dlam(kind: int, lam, mu, tol: float = SERIES_TOL):
    if kind not in _JACOBI_CHAR:
        raise DomainError(f"theta kind must be 1..4, got {kind}")
    p, q = _JACOBI_CHAR[kind]
    val = theta_pq_dlam(p, q, lam, mu, tol)
    return -val if kind == 1 else val


def theta_constants(mu, tol: float = SERIES_TOL):
    """(theta_2(0), theta_3(0), theta_4(0)) for modulus mu."""
    return tuple(complex(jacobi_theta(k, 0.0, mu, tol)) for k in (2, 3, 4))


def _check_w_pole(lam, mu):
    lam0, _, _ = lattice_reduce(lam, mu)
    bad = np.abs(np.atleast_1d(lam0)) < POLE_RADIUS
    if np.any(bad):
        raise PoleError("w_alpha evaluated within the pole-exclusion radius of a lattice point")


def _check_kind_zero(kind, lam, mu):
    # theta_2 vanishes at 1/2, theta_3 at (1+mu)/2, theta_4 at mu/2 (mod lattice).
    zero = {2: 0.5, 3: 0.5 * (1.0 + mu), 4: 0.5 * mu}[kind]
    d0, _, _ = lattice_reduce(np.asarray(lam, dtype=complex) - zero, mu)
    if np.any(np.abs(np.atleast_1d(d0)) < POLE_RADIUS):
        raise PoleError(f"theta_{kind} denominator vanishes within the pole-exclusion radius")


def w_alpha(alpha: int, lam, mu, tol: float = SERIES_TOL):
    """Twisted kernel with a unit-residue pole on the lattice.

    w_1 = pi t2 t3 theta_4(lam)/theta_1(lam), w_2 = pi t2 t4 theta_3/theta_1,
    w_3 = pi t3 t4 theta_2/theta_1, where t_k are the theta constants.
    Sign table under lam -> lam+1 / lam+mu: w_1: (-,+), w_2: (-,-), w_3: (+,-).
    """
    if alpha not in _KERNEL_KIND:
        raise DomainError(f"kernel index must be 1..3, got {alpha}")
    mu = check_modulus(mu)
    _check_w_pole(lam, mu)
    t2, t3, t4 = theta_constants(mu, tol)
    const = {1: t2 * t3, 2: t2 * t4, 3: t3 * t4}[alpha]
    kind = _KERNEL_KIND[alpha]
    return np.pi * const * jacobi_theta(kind, lam, mu, tol) / jacobi_theta(1, lam, mu, tol)


def w_alpha_dlam(alpha: int, lam, mu, tol: float = SERIES_TOL):
    """d/dlam of w_alpha via the log-derivative of its theta quotient."""
    if alpha not in _KERNEL_KIND:
        raise DomainError(f"kernel index must be 1..3, got {alpha}")
    mu = check_modulus(mu)
    kind = _KERNEL_KIND[alpha]
    w = w_alpha(alpha, lam, mu, tol)
    num = jacobi_theta_dlam(kind, lam, mu, tol) / jacobi_theta(kind, lam, mu, tol)
    den = jacobi_theta_dlam(1, lam, mu, tol) / jacobi_theta(1, lam, mu, tol)
    return w * (num - den)


def zcal_alpha(alpha: int, lam, mu, tol: float = SERIES_TOL):
    """Companion kernel Z_alpha = w_alpha(lam) * theta_k'(lam) / (2 pi i theta_k(lam)),
    with k the same numerator kind as in w_alpha. Even, finite at lattice points
    approached along generic directions is *not* assumed: away from the
    denominator zeros this is a direct quotient; at the lattice the limit is
    taken by zcal_alpha_zero."""
    if alpha not in _KERNEL_KIND:
        raise DomainError(f"kernel index must be 1..3, got {alpha}")
    mu = check_modulus(mu)
    _check_w_pole(lam, mu)
    kind = _KERNEL_KIND[alpha]
    _check_kind_zero(kind, lam, mu)
    w = w_alpha(alpha, lam, mu, tol)
    logd = jacobi_theta_dlam(kind, lam, mu, tol) / jacobi_theta(kind, lam, mu, tol)
    return w * logd / _TWO_PI_I


def zcal_alpha_zero(alpha: int, mu, tol: float = SERIES_TOL):
    """Limit of Z_alpha at lam -> 0: theta_k''(0) / (2 pi i theta_k(0))."""
    if alpha not in _KERNEL_KIND:
        raise DomainError(f"kernel index must be 1..3, got {alpha}")
    mu = check_modulus(mu)
    kind = _KERNEL_KIND[alpha]
    p, q = _JACOBI_CHAR[kind]
    val, _, dd = _theta_reduced(complex(p), complex(q), 0.0, mu, tol, 2)
    return complex(dd / (val * _TWO_PI_I))


def winding_number(values) -> int:
    """Integer winding of a closed discrete loop of nonzero complex values.

    Consecutive samples must be dense enough that each step turns by less
    than pi; the caller is responsible for sampling density.
    """
    v = np.asarray(values, dtype=complex)
    if np.any(v == 0):
        raise PoleError("winding undefined through a zero value")
    steps = np.angle(v[1:] / v[:-1])
    total = steps.sum() + np.angle(v[0] / v[-1])
    return int(round(total / (2 * np.pi)))
