"""ADMM for the (robust, generalized) l1-BranchHull programs.

The generalized program is::

    minimize    |P h|_1 + |m|_1 + lam |xi|_1
    subject to  s_l (c_l^T m + xi_l) b_l^T h >= |y_l|,  t_l b_l^T h >= 0

With ``u = (x, w, xi)``, ``v = (m, h, lam xi)``, ``E = diag(C, B, I/lam)``
and ``Q = diag(I, P, I)`` it reads ``min |z|_1`` s.t. ``u = E v``,
``Q v = z``, ``u`` feasible.  Each sweep projects, soft-thresholds (both
against the previous ``v``), solves the block-diagonal normal equations
and updates the scaled duals.  Dropping the slack block (``lam = inf``)
gives plain l1-BranchHull.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .model import SolutionTriple
from .projection import project_block

__all__ = [
    "SolverConfig",
    "AdmmState",
    "AdmmDivergence",
    "VUpdateFactor",
    "soft_threshold",
    "v_update_factorization",
    "admm_solve",
    "preset_l1_bh",
    "preset_rbh",
    "preset_tv_bh",
]

log = logging.getLogger(__name__)


class AdmmDivergence(FloatingPointError):
    def __init__(self, iteration):
        super().__init__(f"non-finite ADMM iterate at iteration {iteration}")
        self.iteration = iteration


@dataclass(frozen=True)
class SolverConfig:
    """ADMM settings.

    ``lam = inf`` removes the slack variable (plain l1-BranchHull).  ``P``
    of None means the identity.
    """

    rho: float = 1.0
    lam: float = math.inf
    P: object = None
    max_iters: int = 50_000
    primal_tol: float = 1e-9
    dual_tol: float = 1e-9
    callback: object = None
    callback_stride: int = 100
    record_history: bool = False

    def __post_init__(self):
        if not self.rho > 0:
            raise ValueError("rho must be positive")
        if not self.lam > 0:
            raise ValueError("lam must be positive (use inf for no slack)")
        if self.max_iters < 0:
            raise ValueError("max_iters must be non-negative")

    @property
    def with_slack(self):
        return math.isfinite(self.lam)


@dataclass
class AdmmState:
    """Iterates ``v = (m, h, lam xi)``, ``u = (x, w[, xi])``, ``z`` and scaled duals."""

    v: np.ndarray
    u: np.ndarray
    z: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray


def soft_threshold(vec, c):
    """Entrywise shrinkage ``sign(z) max(|z| - c, 0)``."""
    if c < 0:
        raise ValueError("threshold must be non-negative")
    vec = np.asarray(vec, dtype=float)
    return np.sign(vec) * np.maximum(np.abs(vec) - c, 0.0)


def _gram(A):
    if sp.issparse(A):
        return (A.T @ A).tocsc()
    return A.T @ A


class _BlockSolver:
    def __init__(self, M):
        self.M = M
        if sp.issparse(M):
            self._lu = spla.splu(sp.csc_matrix(M))
            self.solve = self._lu.solve
        else:
            try:
                cf = sla.cho_factor(M)
            except np.linalg.LinAlgError as exc:
                raise np.linalg.LinAlgError("normal-equation block is not positive definite") from exc
            self.solve = lambda b: sla.cho_solve(cf, b)


class VUpdateFactor:
    """Factored ``E^T E + Q^T Q = diag(C^T C + I, B^T B + P^T P, (lam^-2 + 1) I)``."""

    def __init__(self, B, C, P=None, lam=math.inf):
        self.N = C.shape[1]
        self.K = B.shape[1]
        self.L = B.shape[0]
        self.lam = lam
        eye_n = sp.identity(self.N, format="csc") if sp.issparse(C) else np.eye(self.N)
        m_block = _gram(C) + eye_n
        if P is None:
            PtP = sp.identity(self.K, format="csc") if sp.issparse(B) else np.eye(self.K)
        else:
            PtP = _gram(P)
        h_block = _gram(B) + PtP
        if sp.issparse(h_block) and not sp.issparse(B):
            h_block = h_block.toarray()
        if sp.issparse(B) and not sp.issparse(h_block):
            h_block = sp.csc_matrix(h_block)
        self.m_block = _BlockSolver(m_block)
        self.h_block = _BlockSolver(h_block)
        self.xi_diag = 1.0 / lam**2 + 1.0 if math.isfinite(lam) else None

    def apply(self, rhs):
        """Solve the normal equations for right-hand side ``rhs``."""
        rhs = np.asarray(rhs, dtype=float)
        N, K = self.N, self.K
        out = np.empty_like(rhs)
        out[:N] = self.m_block.solve(rhs[:N])
        out[N:N + K] = self.h_block.solve(rhs[N:N + K])
        if self.xi_diag is not None:
            out[N + K:] = rhs[N + K:] / self.xi_diag
        return out

    def matvec(self, v):
        """Multiply by the unfactored block matrix."""
        v = np.asarray(v, dtype=float)
        N, K = self.N, self.K
        out = np.empty_like(v)
        out[:N] = self.m_block.M @ v[:N]
        out[N:N + K] = self.h_block.M @ v[N:N + K]
        if self.xi_diag is not None:
            out[N + K:] = self.xi_diag * v[N + K:]
        return out


def v_update_factorization(B, C, P=None, lam=math.inf):
    return VUpdateFactor(B, C, P, lam)


class _Operators:
    """Matrix-free ``E``, ``E^T``, ``Q``, ``Q^T`` for the stacked variables."""

    def __init__(self, problem, config):
        self.B, self.C = problem.B, problem.C
        self.P = config.P
        self.lam = config.lam
        self.slack = config.with_slack
        self.N, self.K, self.L = problem.N, problem.K, problem.L
        self.J = self.K if self.P is None else self.P.shape[0]

    def split_v(self, v):
        N, K = self.N, self.K
        return v[:N], v[N:N + K], (v[N + K:] if self.slack else None)

    def E(self, v):
        m, h, lxi = self.split_v(v)
        parts = [self.C @ m, self.B @ h]
        if self.slack:
            parts.append(lxi / self.lam)
        return np.concatenate(parts)

    def Et(self, u):
        L = self.L
        parts = [self.C.T @ u[:L], self.B.T @ u[L:2 * L]]
        if self.slack:
            parts.append(u[2 * L:] / self.lam)
        return np.concatenate(parts)

    def Q(self, v):
        m, h, lxi = self.split_v(v)
        parts = [m, h if self.P is None else self.P @ h]
        if self.slack:
            parts.append(lxi)
        return np.concatenate(parts)

    def Qt(self, z):
        N, J = self.N, self.J
        zh = z[N:N + J]
        parts = [z[:N], zh if self.P is None else self.P.T @ zh]
        if self.slack:
            parts.append(z[N + J:])
        return np.concatenate(parts)

    def objective(self, v):
        return float(np.abs(self.Q(v)).sum())


def admm_solve(problem, config, factor=None, state=None):
    """Run ADMM on ``problem``.

    Parameters
    ----------
    problem : BilinearProblem
    config : SolverConfig
    factor : VUpdateFactor, optional
        Reuse a factorization built for the same ``B, C, P, lam``.
    state : AdmmState, optional
        Starting iterates; zeros by default.  Updated in place.

    Returns
    -------
    SolutionTriple
        ``converged`` tells whether both residuals met their tolerances
        before ``max_iters``.
    """
    ops = _Operators(problem, config)
    if factor is None:
        factor = VUpdateFactor(problem.B, problem.C, config.P, config.lam)
    L, N, K, J = ops.L, ops.N, ops.K, ops.J
    nv = N + K + (L if ops.slack else 0)
    nu = (3 if ops.slack else 2) * L
    nz = N + J + (L if ops.slack else 0)
    if state is None:
        state = AdmmState(np.zeros(nv), np.zeros(nu), np.zeros(nz), np.zeros(nu), np.zeros(nz))
    y, s, t = problem.y, problem.s, problem.t
    rho = config.rho
    v, alpha, beta = state.v, state.alpha, state.beta
    u, z = state.u, state.z

    Ev = ops.E(v)
    Qv = ops.Q(v)
    r_norm = d_norm = math.inf
    history = []
    converged = False
    it = 0
    for it in range(1, config.max_iters + 1):
        target = Ev - alpha
        if ops.slack:
            px, pw, pxi = project_block(target[:L], target[L:2 * L], target[2 * L:], y, s, t, True)
            u = np.concatenate([px, pw, pxi])
        else:
            px, pw, _ = project_block(target[:L], target[L:], None, y, s, t, False)
            u = np.concatenate([px, pw])
        z = soft_threshold(Qv - beta, 1.0 / rho)
        v_old = v
        v = factor.apply(ops.Et(alpha + u) + ops.Qt(beta + z))
        Ev_old, Qv_old = Ev, Qv
        Ev = ops.E(v)
        Qv = ops.Q(v)
        ru = u - Ev
        rz = z - Qv
        alpha = alpha + ru
        beta = beta + rz

        r_norm = math.sqrt(ru @ ru + rz @ rz)
        dE = Ev - Ev_old
        dQ = Qv - Qv_old
        d_norm = rho * math.sqrt(dE @ dE + dQ @ dQ)
        if not (math.isfinite(r_norm) and math.isfinite(d_norm)):
            raise AdmmDivergence(it)
        if config.record_history:
            history.append((r_norm, d_norm, ops.objective(v)))
        if config.callback is not None and it % config.callback_stride == 0:
            config.callback(it, r_norm, d_norm, ops.objective(v))
        scale = 1.0 + math.sqrt(Ev @ Ev)
        if r_norm <= config.primal_tol * scale and d_norm <= config.dual_tol * scale:
            converged = True
            break

    state.v, state.u, state.z, state.alpha, state.beta = v, u, z, alpha, beta
    m, h, lxi = ops.split_v(v)
    xi = lxi / config.lam if ops.slack else np.zeros(L)
    if not converged:
        log.debug("ADMM stopped at max_iters=%d (primal %.3e, dual %.3e)", config.max_iters, r_norm, d_norm)
    return SolutionTriple(
        h=h.copy(), m=m.copy(), xi=np.array(xi), iterations=it,
        primal_residual=float(r_norm), dual_residual=float(d_norm),
        converged=converged, history=history,
    )


def preset_l1_bh(problem, rho=1.0, **kwargs):
    """Plain l1-BranchHull: ``min |h|_1 + |m|_1``, no slack."""
    return admm_solve(problem, SolverConfig(rho=rho, lam=math.inf, P=None, **kwargs))


def preset_rbh(problem, rho=1.0, lam=1e3, **kwargs):
    """Robust l1-BranchHull with slack weight ``lam``."""
    if not math.isfinite(lam):
        raise ValueError("robust program needs a finite lam")
    return admm_solve(problem, SolverConfig(rho=rho, lam=lam, P=None, **kwargs))


def preset_tv_bh(problem, tv, rho=1e-4, lam=1e3, **kwargs):
    """Total-variation BranchHull: ``P = D B`` with ``D`` the TV operator."""
    if tv.L != problem.L:
        raise ValueError(f"TV operator is for L={tv.L}, problem has L={problem.L}")
    B = problem.B
    P = tv.D @ B
    if sp.issparse(P) and not sp.issparse(B):
        P = P.toarray()
    return admm_solve(problem, SolverConfig(rho=rho, lam=lam, P=P, **kwargs))
