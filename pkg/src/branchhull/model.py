"""Problem data, measurement synthesis and scaling-ambiguity utilities."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "BilinearProblem",
    "GroundTruth",
    "SolutionTriple",
    "synthesize_measurements",
    "balanced_scaling",
    "effective_sparsity_ratio",
    "recovery_distance",
    "unnormalized_distance",
    "constraint_function_f",
]


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class BilinearProblem:
    """Dictionaries, measurements and sign information.

    ``B`` and ``C`` may be dense arrays or scipy sparse matrices.
    """

    B: object
    C: object
    y: np.ndarray
    s: np.ndarray
    t: np.ndarray

    def __post_init__(self):
        for name in ("y", "s", "t"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        L = len(self.y)
        if self.B.shape[0] != L or self.C.shape[0] != L or len(self.s) != L or len(self.t) != L:
            raise ValueError(
                f"inconsistent dimensions: B {self.B.shape}, C {self.C.shape}, "
                f"y {len(self.y)}, s {len(self.s)}, t {len(self.t)}"
            )
        if not np.array_equal(self.s, np.sign(self.y)):
            raise ValueError("s must equal sign(y)")
        if not np.all(np.abs(self.t) == 1):
            raise ValueError("t must have entries in {-1, +1}")

    @property
    def L(self) -> int:
        return len(self.y)

    @property
    def K(self) -> int:
        return self.B.shape[1]

    @property
    def N(self) -> int:
        return self.C.shape[1]


@dataclass(frozen=True)
class GroundTruth:
    h_nat: np.ndarray
    m_nat: np.ndarray
    xi: np.ndarray
    S1: int
    S2: int
    one_sided: bool = True

    def __post_init__(self):
        for name in ("h_nat", "m_nat", "xi"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        if np.count_nonzero(self.h_nat) > self.S1 or np.count_nonzero(self.m_nat) > self.S2:
            raise ValueError("ground truth exceeds its declared sparsity")
        if self.one_sided and np.any(self.xi < -1):
            raise ValueError("noise must satisfy xi >= -1")

    def balanced(self):
        return balanced_scaling(self.h_nat, self.m_nat)


@dataclass(frozen=True)
class SolutionTriple:
    h: np.ndarray
    m: np.ndarray
    xi: np.ndarray
    iterations: int
    primal_residual: float
    dual_residual: float
    converged: bool = False
    history: list = field(default_factory=list, compare=False, repr=False)

    def objective(self, P=None, lam=None):
        Ph = self.h if P is None else P @ self.h
        val = float(np.abs(Ph).sum() + np.abs(self.m).sum())
        if lam is not None and np.isfinite(lam):
            val += lam * float(np.abs(self.xi).sum())
        return val

    def is_feasible(self, problem, tol=1e-6):
        w = problem.B @ self.h
        x = problem.C @ self.m
        ay = np.abs(problem.y)
        hyper = problem.s * (x + self.xi) * w >= ay - tol * np.maximum(1.0, ay)
        return bool(np.all(hyper & (problem.t * w >= -tol)))


def synthesize_measurements(B, C, h_nat, m_nat, xi=None, one_sided=True):
    """Form ``y = (B h) * (C m) * (1 + xi)`` with ``s = sign(y)``, ``t = sign(B h)``.

    Raises
    ------
    ValueError
        On dimension mismatch, inadmissible noise, or when some entry of
        ``B h`` is exactly zero (its sign is then undefined).
    """
    h_nat = np.asarray(h_nat, dtype=float)
    m_nat = np.asarray(m_nat, dtype=float)
    L = B.shape[0]
    if C.shape[0] != L or B.shape[1] != len(h_nat) or C.shape[1] != len(m_nat):
        raise ValueError("dimension mismatch between dictionaries and coefficients")
    xi = np.zeros(L) if xi is None else np.asarray(xi, dtype=float)
    if len(xi) != L:
        raise ValueError("noise length must equal the number of measurements")
    if one_sided and np.any(1 + xi < 0):
        raise ValueError("noise must satisfy xi >= -1")
    w = np.asarray(B @ h_nat).ravel()
    x = np.asarray(C @ m_nat).ravel()
    t = np.sign(w)
    if np.any(t == 0):
        raise ValueError("some entry of B h is zero; its sign is undefined")
    y = w * x * (1 + xi)
    return y, np.sign(y), t


def balanced_scaling(h, m):
    """Rescale ``(h, m) -> (c h, m / c)`` so both have the same l1 norm."""
    h = np.asarray(h, dtype=float)
    m = np.asarray(m, dtype=float)
    nh = np.abs(h).sum()
    nm = np.abs(m).sum()
    if nh == 0 or nm == 0:
        raise ValueError("balanced scaling needs nonzero vectors")
    c = math.sqrt(nm / nh)
    return h * c, m / c


def effective_sparsity_ratio(h, m):
    """``alpha`` with ``|h|_1/|h|_2 = alpha * |m|_1/|m|_2``."""
    h = np.asarray(h, dtype=float)
    m = np.asarray(m, dtype=float)
    nh2 = np.linalg.norm(h)
    nm2 = np.linalg.norm(m)
    if nh2 == 0 or nm2 == 0:
        raise ValueError("effective sparsity undefined for zero vectors")
    return (np.abs(h).sum() / nh2) / (np.abs(m).sum() / nm2)


def _golden_min(f, lo, hi, tol):
    g = (math.sqrt(5) - 1) / 2
    a, b = lo, hi
    c = b - g * (b - a)
    d = a + g * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - g * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + g * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def _scan_then_golden(f, lo=-20.0, hi=20.0, tol=1e-12, n=401):
    # The objective can be multimodal in log c; bracket the global minimum
    # by a coarse scan before the golden-section refinement.
    grid = np.linspace(lo, hi, n)
    vals = np.array([f(g) for g in grid])
    k = int(np.argmin(vals))
    a = grid[max(k - 1, 0)]
    b = grid[min(k + 1, n - 1)]
    return _golden_min(f, a, b, tol)


def recovery_distance(h_tilde, m_tilde, h_hat, m_hat):
    """Relative distance from ``(h_tilde, m_tilde)`` to the ambiguity curve.

    Minimizes ``|(h~, m~) - (c h^, m^/c)| / |(c h^, m^/c)|`` over ``c > 0``.

    Returns
    -------
    dist : float
    c_star : float
        The minimizing scale.
    """
    h_tilde, m_tilde, h_hat, m_hat = (np.asarray(v, dtype=float) for v in (h_tilde, m_tilde, h_hat, m_hat))
    nh2 = float(h_hat @ h_hat)
    nm2 = float(m_hat @ m_hat)
    if nh2 == 0 and nm2 == 0:
        raise ValueError("reference point is zero")

    def obj(logc):
        c = math.exp(logc)
        num = np.sum((h_tilde - c * h_hat) ** 2) + np.sum((m_tilde - m_hat / c) ** 2)
        den = c * c * nh2 + nm2 / (c * c)
        return math.sqrt(num / den)

    logc = _scan_then_golden(obj)
    return obj(logc), math.exp(logc)


def unnormalized_distance(h_tilde, m_tilde, h_hat, m_hat, optimize_scale=True):
    """Euclidean distance to ``(c h^, m^/c)``.

    With ``optimize_scale`` the numerator is minimized over ``c > 0`` (its
    stationary points are real positive roots of a quartic in ``c``);
    otherwise ``c = 1``, i.e. the plain distance to the given reference.

    Returns ``(dist, c_star)``.
    """
    from .polyroots import real_roots

    h_tilde, m_tilde, h_hat, m_hat = (np.asarray(v, dtype=float) for v in (h_tilde, m_tilde, h_hat, m_hat))

    def num(c):
        return math.sqrt(np.sum((h_tilde - c * h_hat) ** 2) + np.sum((m_tilde - m_hat / c) ** 2))

    if not optimize_scale:
        return num(1.0), 1.0
    nh2 = float(h_hat @ h_hat)
    nm2 = float(m_hat @ m_hat)
    if nh2 == 0 or nm2 == 0:
        raise ValueError("reference vectors must be nonzero")
    # d/dc = 0  <=>  c^4 |h^|^2 - c^3 <h~,h^> + c <m~,m^> - |m^|^2 = 0
    coeffs = [nh2, -float(h_tilde @ h_hat), 0.0, float(m_tilde @ m_hat), -nm2]
    cands = [r for r in real_roots(coeffs) if r > 0]
    if not cands:
        logc = _scan_then_golden(lambda lc: num(math.exp(lc)))
        cands = [math.exp(logc)]
    c_star = min(cands, key=num)
    return num(c_star), c_star


def constraint_function_f(w_l, x_l, y_l, s_l, t_l, alpha_l):
    """Level-set reformulation of one BranchHull constraint.

    ``f <= 0`` exactly when ``s w x >= |y|`` and ``t w >= 0``.  ``alpha_l``
    is the positive weight of the piecewise scaling factor.
    """
    if alpha_l <= 0:
        raise ValueError("alpha must be positive")
    w = np.asarray(w_l, dtype=float)
    x = np.asarray(x_l, dtype=float)
    core = np.sqrt(4 * abs(y_l) + (w - s_l * x) ** 2) - t_l * (w + s_l * x)
    gamma = np.where((alpha_l > 1) & (core <= 0), 1.0, alpha_l)
    out = gamma * core
    return float(out) if out.ndim == 0 else out
