"""Euclidean projection onto the per-measurement BranchHull sets.

For one measurement the robust set is

    {(x, w, xi) : s (x + xi) w >= |y|,  t w >= 0}

and the plain set drops ``xi``.  Both are convex (one branch of a hyperbola,
filled in).  The projection of an infeasible point lands on the hyperbola;
eliminating the multiplier from the stationarity conditions gives a quartic
in ``w`` whose admissible root yields the projection.

All routines work on whole vectors at once since the measurements decouple.
Internally every measurement is reflected to ``s = t = +1`` and rescaled to
``|y| = 1``; both maps are isometries up to a common factor, so the nearest
point commutes with them.
"""

from __future__ import annotations

import numba
import numpy as np

from .polyroots import batch_quartic_roots

__all__ = [
    "ProjectionError",
    "project_point3",
    "project_point3_degenerate",
    "project_point2",
    "project_block",
    "is_feasible",
]

MU_TOL = 1e-10
W_TOL = 1e-12


class ProjectionError(ArithmeticError):
    """No admissible quartic root was found for some measurement."""


@numba.njit(cache=True)
def _bracketed_root(lead, wp, a):
    # Unique root of lead*w^4 - lead*wp*w^3 + a*w - 1 with w > 0 and a*w <= 1.
    # p(0) = -1 < 0; p > 0 at the upper end of the admissible interval.
    hi = 1.0 + max(abs(wp), abs(a) / lead, 1.0 / lead)
    if a > 0.0:
        hi = min(hi, 1.0 / a)
    lo = 0.0
    w = 0.5 * hi
    for _ in range(200):
        f = ((lead * w - lead * wp) * w * w + a) * w - 1.0
        if f < 0.0:
            lo = w
        elif f > 0.0:
            hi = w
        else:
            return w
        d = (4.0 * lead * w - 3.0 * lead * wp) * w * w + a
        wn = w - f / d if d != 0.0 else -1.0
        if not (lo < wn < hi):
            wn = 0.5 * (lo + hi)
        if abs(wn - w) <= 4e-16 * wn:
            return wn
        w = wn
    return w


@numba.njit(cache=True)
def _project_normalized_bracket(xp, wp, xip, with_slack):
    n = wp.shape[0]
    x = np.empty(n)
    w = np.empty(n)
    xi = np.empty(n)
    lead = 2.0 if with_slack else 1.0
    for i in range(n):
        a = xp[i] + xip[i] if with_slack else xp[i]
        r = _bracketed_root(lead, wp[i], a)
        mu = max((1.0 - a * r) / (lead * r * r), 0.0)
        x[i] = xp[i] + mu * r
        w[i] = r
        xi[i] = xip[i] + mu * r if with_slack else 0.0
    return x, w, xi


def _project_normalized_companion(xp, wp, xip):
    """Project onto {(x + xi) w >= 1, w >= 0}; ``xip`` is None for the plain set.

    Inputs are 1-d arrays of infeasible points in normalized coordinates.
    Every real quartic root is screened for admissibility and the nearest
    candidate wins.
    """
    with_slack = xip is not None
    n = len(wp)
    a = xp + xip if with_slack else xp
    lead = 2.0 if with_slack else 1.0
    coeffs = np.empty((n, 5))
    coeffs[:, 0] = lead
    coeffs[:, 1] = -lead * wp
    coeffs[:, 2] = 0.0
    coeffs[:, 3] = a
    coeffs[:, 4] = -1.0
    roots, is_real = batch_quartic_roots(coeffs)

    a_ = a[:, None]
    # mu >= 0  <=>  1 - a w >= 0 ; w must lie on the t = +1 branch
    admissible = is_real & (roots > W_TOL) & (1.0 - a_ * roots >= -MU_TOL)
    safe_w = np.where(admissible, roots, 1.0)
    mu = (1.0 - a_ * safe_w) / (lead * safe_w**2)
    mu = np.maximum(mu, 0.0)
    x_c = xp[:, None] + mu * safe_w
    if with_slack:
        xi_c = xip[:, None] + mu * safe_w
        dist = (x_c - xp[:, None]) ** 2 + (safe_w - wp[:, None]) ** 2 + (xi_c - xip[:, None]) ** 2
    else:
        dist = (x_c - xp[:, None]) ** 2 + (safe_w - wp[:, None]) ** 2
    dist = np.where(admissible, dist, np.inf)
    best = np.argmin(dist, axis=1)
    if not np.all(np.isfinite(dist[np.arange(n), best])):
        bad = np.flatnonzero(~np.isfinite(dist[np.arange(n), best]))
        raise ProjectionError(f"no admissible root for {len(bad)} measurement(s), first index {bad[0]}")
    idx = np.arange(n)
    w = safe_w[idx, best]
    x = x_c[idx, best]
    xi = xi_c[idx, best] if with_slack else None
    return x, w, xi


def project_block(x, w, xi, y, s, t, with_slack=True, method="bracket"):
    """Project every measurement's point onto its feasible set.

    Parameters
    ----------
    x, w : ndarray, shape (L,)
    xi : ndarray, shape (L,) or None
        Slack coordinates; ignored (and may be None) when ``with_slack`` is False.
    y, s, t : ndarray, shape (L,)
        Measurements, their signs, and the known signs of ``w``.
    method : {"bracket", "companion"}
        How the quartic is solved.  "companion" takes all roots from companion
        matrix eigenvalues and keeps the admissible one; "bracket" runs a
        safeguarded Newton iteration on the interval that holds the unique
        admissible root.  Both return the same point; "bracket" is much faster.

    Returns
    -------
    tuple of ndarray
        ``(x, w, xi)``; ``xi`` is None when ``with_slack`` is False.
    """
    x = np.array(x, dtype=float)
    w = np.array(w, dtype=float)
    y = np.asarray(y, dtype=float)
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    if with_slack:
        xi = np.array(xi, dtype=float)
        if not (len(x) == len(w) == len(xi) == len(y) == len(s) == len(t)):
            raise ValueError("all inputs must have equal length")
    elif not (len(x) == len(w) == len(y) == len(s) == len(t)):
        raise ValueError("all inputs must have equal length")

    ay = np.abs(y)
    zero = ay == 0
    # y = 0: only the half-plane t w >= 0 remains
    if np.any(zero):
        w[zero] = np.where(t[zero] * w[zero] >= 0, w[zero], 0.0)

    nz = ~zero
    if np.any(nz):
        sig = s[nz] * t[nz]
        r = np.sqrt(ay[nz])
        X = sig * x[nz] / r
        W = t[nz] * w[nz] / r
        Xi = sig * xi[nz] / r if with_slack else None
        prod = (X + Xi) * W if with_slack else X * W
        infeasible = (prod < 1.0) | (W < 0)
        if np.any(infeasible):
            if method == "bracket":
                px, pw, pxi = _project_normalized_bracket(
                    X[infeasible], W[infeasible],
                    Xi[infeasible] if with_slack else X[infeasible], with_slack,
                )
            elif method == "companion":
                px, pw, pxi = _project_normalized_companion(
                    X[infeasible], W[infeasible], Xi[infeasible] if with_slack else None
                )
            else:
                raise ValueError(f"unknown method {method!r}")
            X[infeasible] = px
            W[infeasible] = pw
            if with_slack:
                Xi[infeasible] = pxi
        x[nz] = sig * X * r
        w[nz] = t[nz] * W * r
        if with_slack:
            xi[nz] = sig * Xi * r
    return x, w, (xi if with_slack else None)


def project_point3(x_in, w_in, xi_in, y_l, s_l, t_l, method="bracket"):
    """Project ``(x, w, xi)`` onto ``{s (x + xi) w >= |y|, t w >= 0}``."""
    if y_l == 0:
        return project_point3_degenerate(x_in, w_in, xi_in, t_l)
    if s_l not in (-1, 1) or t_l not in (-1, 1):
        raise ValueError("signs must be +1 or -1")
    x, w, xi = project_block([x_in], [w_in], [xi_in], [y_l], [s_l], [t_l], True, method)
    return float(x[0]), float(w[0]), float(xi[0])


def project_point3_degenerate(x_in, w_in, xi_in, t_l):
    """Projection when the measurement is exactly zero: clamp ``w`` to its half-line."""
    w = w_in if t_l * w_in >= 0 else 0.0
    return float(x_in), float(w), float(xi_in)


def project_point2(x_in, w_in, y_l, s_l, t_l, method="bracket"):
    """Project ``(x, w)`` onto ``{s x w >= |y|, t w >= 0}``."""
    if y_l != 0 and (s_l not in (-1, 1) or t_l not in (-1, 1)):
        raise ValueError("signs must be +1 or -1")
    x, w, _ = project_block([x_in], [w_in], None, [y_l], [s_l], [t_l], False, method)
    return float(x[0]), float(w[0])


def is_feasible(x, w, xi, y, s, t, tol=1e-9):
    """Membership test for the (robust, if ``xi`` is given) feasible set.

    The hyperbolic constraint is checked relative to ``max(1, |y|)``.
    """
    x, w, y, s, t = (np.asarray(v, dtype=float) for v in (x, w, y, s, t))
    total = x if xi is None else x + np.asarray(xi, dtype=float)
    ay = np.abs(y)
    hyper = ay - s * total * w <= tol * np.maximum(1.0, ay)
    half = t * w >= -tol
    return bool(np.all(hyper & half))
