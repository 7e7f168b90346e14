"""Bessel functions of the first kind for real order and non-negative argument.

Three regimes:

* ``x <= SERIES_MAX_X`` or ``nu >= x``: ascending power series, with each
  term formed from log-gamma so large orders do not overflow.
* otherwise: Hankel asymptotic expansion for two orders in ``[mu - 1, mu + 1]``
  with ``mu = nu - floor(nu)``, followed by the three-term recurrence to the
  requested order.  The recurrence is stable in both directions while the
  order stays below the argument, which is exactly this regime.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = ["besselj"]

SERIES_MAX_X = 12.0
MAX_TERMS = 200


def _rgamma_sign_log(z):
    """Return ``(sign, log|1/Gamma(z)|)``; sign is 0 at the poles."""
    if z <= 0 and z == math.floor(z):
        return 0.0, -math.inf
    lg = math.lgamma(z)
    if z > 0:
        return 1.0, -lg
    sign = -1.0 if math.floor(-z) % 2 == 0 else 1.0
    return sign, -lg


def _series(nu, x):
    if x == 0.0:
        if nu == 0.0:
            return 1.0
        if nu > 0 or nu == math.floor(nu):
            return 0.0
        return math.inf
    if nu < 0 and nu == math.floor(nu):
        n = int(-nu)
        return (-1.0) ** n * _series(float(n), x)
    half = 0.5 * x
    logh = math.log(half)
    q = -half * half
    total = 0.0
    term_k = None
    for k in range(MAX_TERMS):
        sgn, lrg = _rgamma_sign_log(k + nu + 1.0)
        if sgn == 0.0:
            continue
        if term_k is None or k < 2:
            mag = math.exp((2 * k + nu) * logh - math.lgamma(k + 1.0) + lrg)
            term_k = ((-1.0) ** k) * sgn * mag
        else:
            term_k = term_k * q / (k * (k + nu))
        total += term_k
        if k > 1 and abs(term_k) <= 1e-17 * abs(total):
            break
    return total


def _hankel_pq(mu, x):
    """Asymptotic P and Q series of the Hankel expansion."""
    m = 4.0 * mu * mu
    p = 1.0
    q = 0.0
    term = 1.0
    z = 8.0 * x
    prev = math.inf
    k = 1
    while k < 200:
        term = term * (m - (2 * k - 1) ** 2) / (k * z)
        if abs(term) >= prev:
            break
        prev = abs(term)
        if k % 2 == 1:
            q += term if (k // 2) % 2 == 0 else -term
        else:
            p += -term if (k // 2) % 2 == 1 else term
        if abs(term) < 1e-17:
            break
        k += 1
    return p, q


def _asymptotic(mu, x):
    p, q = _hankel_pq(mu, x)
    chi = x - (0.5 * mu + 0.25) * math.pi
    return math.sqrt(2.0 / (math.pi * x)) * (p * math.cos(chi) - q * math.sin(chi))


def _scalar(nu, x):
    if x < 0:
        raise ValueError("argument must be non-negative")
    if x <= SERIES_MAX_X or nu >= x:
        return _series(nu, x)
    n = math.floor(nu)
    mu = nu - n
    j0 = _asymptotic(mu, x)
    j1 = _asymptotic(mu + 1.0, x)
    if n == 0:
        return j0
    if n > 0:
        order = mu
        for _ in range(n - 1):
            j0, j1 = j1, 2.0 * (order + 1.0) / x * j1 - j0
            order += 1.0
        return j1
    # downward: J_{o-1} = (2 o / x) J_o - J_{o+1}
    order = mu
    for _ in range(-n):
        j0, j1 = 2.0 * order / x * j0 - j1, j0
        order -= 1.0
    return j0


def besselj(nu, x):
    """Evaluate ``J_nu(x)`` elementwise, broadcasting ``nu`` against ``x``."""
    nu_b, x_b = np.broadcast_arrays(np.asarray(nu, dtype=float), np.asarray(x, dtype=float))
    out = np.empty(nu_b.shape)
    for idx in np.ndindex(nu_b.shape):
        out[idx] = _scalar(float(nu_b[idx]), float(x_b[idx]))
    return float(out) if out.ndim == 0 else out
