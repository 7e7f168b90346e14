"""Dictionary matrices and the total-variation difference operator."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .bessel import besselj

__all__ = [
    "TvOperator",
    "gaussian_dictionary",
    "idct_columns",
    "partial_idct_dictionary",
    "bessel_dictionary",
    "tv_operator",
    "floor_minus",
]


def gaussian_dictionary(L, K, scale=1.0, seed=None):
    """``L x K`` matrix of i.i.d. ``N(0, scale^2)`` entries."""
    if L < 1 or K < 1:
        raise ValueError("dimensions must be positive")
    rng = np.random.default_rng(seed)
    return scale * rng.standard_normal((L, K))


def idct_columns(L, cols):
    """Selected columns of the ``L x L`` orthonormal inverse DCT-II matrix.

    Column ``k`` is the k-th DCT-II basis vector
    ``sqrt(2/L) cos(pi (2 i + 1) k / (2 L))`` (``sqrt(1/L)`` for ``k = 0``).
    """
    cols = np.asarray(cols, dtype=int)
    i = np.arange(L)[:, None]
    F = np.cos(np.pi * (2 * i + 1) * cols[None, :] / (2 * L)) * math.sqrt(2.0 / L)
    F[:, cols == 0] = 1.0 / math.sqrt(L)
    return F


def _rescale_frobenius(C, L):
    return C * (math.sqrt(L) / np.linalg.norm(C))


def partial_idct_dictionary(L, ncols, seed=None, include_ones_column=True, subsample=True):
    """Ones column followed by randomly chosen inverse-DCT columns.

    ``ncols`` is the total column count.  With ``include_ones_column`` the
    constant DCT atom is excluded from the draw, since the ones column
    already spans it.  The result is scaled to ``|C|_F = sqrt(L)``.

    Returns
    -------
    C : ndarray, shape (L, ncols)
    picked : ndarray of int
        Indices of the DCT columns used, in order.
    """
    n_dct = ncols - 1 if include_ones_column else ncols
    pool = np.arange(1, L) if include_ones_column else np.arange(L)
    if n_dct < 0 or n_dct > len(pool):
        raise ValueError(f"cannot take {ncols} columns from an L={L} DCT")
    if subsample:
        rng = np.random.default_rng(seed)
        picked = rng.choice(pool, size=n_dct, replace=False)
    else:
        picked = pool[:n_dct]
    parts = [np.ones((L, 1))] if include_ones_column else []
    parts.append(idct_columns(L, picked))
    return _rescale_frobenius(np.hstack(parts), L), picked


def bessel_dictionary(L, ncols, seed=None):
    """Ones column followed by ``ncols - 1`` sampled Bessel-function columns.

    For each column a fresh ``zeta ~ N(0, I_3)`` gives the entries
    ``J_{g_i / (6 + 0.1|zeta_1|) + 5|zeta_2|}(0.1 + 10|zeta_3|)`` with
    ``g_i = -9 + 14 i / (L - 1)``, ``i = 0..L-1``.  Rescaled to ``|C|_F = sqrt(L)``.
    """
    if L < 2 or ncols < 1:
        raise ValueError("need L >= 2 and ncols >= 1")
    rng = np.random.default_rng(seed)
    g = -9.0 + 14.0 * np.arange(L) / (L - 1)
    C = np.ones((L, ncols))
    for j in range(1, ncols):
        z1, z2, z3 = np.abs(rng.standard_normal(3))
        C[:, j] = besselj(g / (6.0 + 0.1 * z1) + 5.0 * z2, 0.1 + 10.0 * z3)
    return _rescale_frobenius(C, L)


def floor_minus(x):
    """The integer ``n`` with ``x - 1 < n <= x``."""
    return math.floor(x)


@dataclass(frozen=True)
class TvOperator:
    """Anisotropic finite differences of a ``p x q`` image vectorized column-wise.

    ``Dv`` differences vertically neighbouring pixels (within a column),
    ``Dh`` horizontally neighbouring ones; ``D`` stacks them.
    """

    p: int
    q: int
    Dv: sp.csr_matrix
    Dh: sp.csr_matrix

    @property
    def L(self):
        return self.p * self.q

    @property
    def D(self):
        return sp.vstack([self.Dv, self.Dh]).tocsr()

    def tv(self, v):
        return float(np.abs(self.D @ np.asarray(v, dtype=float)).sum())


def tv_operator(p, q):
    if p < 2 or q < 2:
        raise ValueError("image must be at least 2 x 2")
    L = p * q
    # 0-based row r corresponds to 1-based i = r + 1
    r = np.arange(L - q)
    jv_ = r + np.array([floor_minus(k / (p - 1)) for k in r])
    Dv = sp.csr_matrix(
        (np.r_[-np.ones(L - q), np.ones(L - q)], (np.r_[r, r], np.r_[jv_, jv_ + 1])),
        shape=(L - q, L),
    )
    r = np.arange(L - p)
    Dh = sp.csr_matrix(
        (np.r_[-np.ones(L - p), np.ones(L - p)], (np.r_[r, r], np.r_[r, r + p])),
        shape=(L - p, L),
    )
    return TvOperator(p, q, Dv, Dh)
