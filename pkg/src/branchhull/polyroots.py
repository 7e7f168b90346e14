"""Real roots of polynomials of degree at most four.

Roots are taken as eigenvalues of the companion matrix, polished with a
Newton step, filtered to the real axis and clustered.  ``batch_quartic_roots``
is the vectorized workhorse used by the projection operators; it handles many
quartics at once through a stacked eigenvalue call.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["Quartic", "real_roots", "batch_quartic_roots", "polyval"]

IMAG_TOL = 1e-8
CLUSTER_TOL = 1e-7


@dataclass(frozen=True)
class Quartic:
    """Coefficients of ``a4 w^4 + a3 w^3 + a2 w^2 + a1 w + a0``."""

    a4: float
    a3: float
    a2: float
    a1: float
    a0: float

    @property
    def coeffs(self) -> np.ndarray:
        return np.array([self.a4, self.a3, self.a2, self.a1, self.a0], dtype=float)

    def __call__(self, w):
        return polyval(self.coeffs, w)


def polyval(coeffs, w):
    """Horner evaluation, highest degree first."""
    out = np.zeros_like(np.asarray(w, dtype=float))
    for c in coeffs:
        out = out * w + c
    return out


def _dpolyval(coeffs, w):
    n = len(coeffs) - 1
    out = np.zeros_like(np.asarray(w, dtype=float))
    for i, c in enumerate(coeffs[:-1]):
        out = out * w + (n - i) * c
    return out


def _cluster(roots, scale):
    if not roots:
        return []
    roots = sorted(roots)
    groups = [[roots[0]]]
    for r in roots[1:]:
        if r - groups[-1][-1] <= CLUSTER_TOL * scale:
            groups[-1].append(r)
        else:
            groups.append([r])
    return [float(np.mean(g)) for g in groups]


def real_roots(poly, tol=1e-9):
    """Return the sorted real roots of a polynomial of degree <= 4.

    Parameters
    ----------
    poly : Quartic or sequence of float
        Coefficients, highest degree first.  Leading zeros are stripped, so
        cubics, quadratics and linear polynomials are accepted too.
    tol : float
        Residual tolerance: every returned root ``r`` satisfies
        ``|p(r)| <= tol * max(1, max|coeffs|) * max(1, |r|)**deg``.  The last
        factor only matters for roots outside the unit interval, where it is
        the residual of the reversed polynomial at ``1/r``; without it large
        roots are lost to round-off in ``p(r)``.

    Returns
    -------
    list of float
        Real roots in ascending order, near-multiple roots merged.
    """
    coeffs = poly.coeffs if isinstance(poly, Quartic) else np.asarray(poly, dtype=float)
    if coeffs.ndim != 1 or len(coeffs) > 5:
        raise ValueError("expected at most 5 coefficients")
    if not np.all(np.isfinite(coeffs)):
        raise ValueError("coefficients must be finite")
    nz = np.flatnonzero(coeffs)
    if len(nz) == 0:
        raise ValueError("all-zero polynomial has no well-defined roots")
    coeffs = coeffs[nz[0]:]
    deg = len(coeffs) - 1
    if deg == 0:
        return []

    monic = coeffs / coeffs[0]
    comp = np.zeros((deg, deg))
    comp[0, :] = -monic[1:]
    comp[np.arange(1, deg), np.arange(deg - 1)] = 1.0
    eig = np.linalg.eigvals(comp)

    # Cauchy bound sets the natural scale of the roots.
    scale = 1.0 + np.max(np.abs(monic[1:]))
    cand = eig.real[np.abs(eig.imag) <= IMAG_TOL * scale]
    cand = _newton_polish(coeffs, cand)

    bound = tol * max(1.0, float(np.max(np.abs(coeffs))))
    # A conjugate pair may straddle a double root; accept pairs whose real
    # part is a genuine root.
    pairs = eig.real[np.abs(eig.imag) > IMAG_TOL * scale]
    if len(pairs):
        pairs = _newton_polish(coeffs, pairs)
        ok = np.abs(polyval(coeffs, pairs)) <= bound * np.maximum(1.0, np.abs(pairs)) ** deg
        cand = np.concatenate([cand, pairs[ok]])

    good = [float(r) for r in cand if abs(polyval(coeffs, r)) <= bound * max(1.0, abs(r)) ** deg]
    return _cluster(good, scale)


def _newton_polish(coeffs, roots, steps=2):
    roots = np.array(roots, dtype=float)
    for _ in range(steps):
        d = _dpolyval(coeffs, roots)
        p = polyval(coeffs, roots)
        ok = np.abs(d) > 1e-300
        step = np.zeros_like(roots)
        step[ok] = p[ok] / d[ok]
        new = roots - step
        better = np.abs(polyval(coeffs, new)) <= np.abs(p)
        roots = np.where(better, new, roots)
    return roots


def batch_quartic_roots(coeffs, newton_steps=2):
    """Roots of many quartics with nonzero leading coefficient.

    Parameters
    ----------
    coeffs : ndarray, shape (n, 5)
        One quartic per row, highest degree first.

    Returns
    -------
    roots : ndarray, shape (n, 4)
        Real parts of the four roots, Newton-polished.
    is_real : ndarray of bool, shape (n, 4)
        Whether each root was classified real.
    """
    coeffs = np.asarray(coeffs, dtype=float)
    n = coeffs.shape[0]
    monic = coeffs[:, 1:] / coeffs[:, :1]
    comp = np.zeros((n, 4, 4))
    comp[:, 0, :] = -monic
    comp[:, 1, 0] = comp[:, 2, 1] = comp[:, 3, 2] = 1.0
    eig = np.linalg.eigvals(comp)
    scale = 1.0 + np.max(np.abs(monic), axis=1, keepdims=True)
    is_real = np.abs(eig.imag) <= IMAG_TOL * scale
    roots = eig.real.copy()

    c = coeffs[:, :, None]
    for _ in range(newton_steps):
        p = (((c[:, 0] * roots + c[:, 1]) * roots + c[:, 2]) * roots + c[:, 3]) * roots + c[:, 4]
        d = ((4 * c[:, 0] * roots + 3 * c[:, 1]) * roots + 2 * c[:, 2]) * roots + c[:, 3]
        safe = np.where(np.abs(d) > 1e-300, d, 1.0)
        new = np.where(np.abs(d) > 1e-300, roots - p / safe, roots)
        pn = (((c[:, 0] * new + c[:, 1]) * new + c[:, 2]) * new + c[:, 3]) * new + c[:, 4]
        roots = np.where(np.abs(pn) <= np.abs(p), new, roots)
    return roots, is_real
