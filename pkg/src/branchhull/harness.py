"""Experiment drivers: synthetic instances, phase portraits, noisy-bound
checks, image distortion removal, and a brute-force projection oracle."""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.optimize as so
import scipy.sparse as sp

from .admm import AdmmDivergence, SolverConfig, admm_solve, preset_l1_bh, preset_tv_bh
from .dictionaries import bessel_dictionary, gaussian_dictionary, partial_idct_dictionary, tv_operator
from .model import (
    BilinearProblem,
    GroundTruth,
    balanced_scaling,
    recovery_distance,
    synthesize_measurements,
    unnormalized_distance,
)

__all__ = [
    "PhaseCell",
    "generate_synthetic",
    "sparsity_count",
    "line_value",
    "phase_portrait",
    "phase_rows",
    "TrialResult",
    "run_noiseless_trial",
    "noisy_bound_check",
    "shift_noise",
    "ImageResult",
    "prepare_image",
    "image_pipeline",
    "brute_force_projection_oracle",
    "default_workers",
]

log = logging.getLogger(__name__)

THREADS_ENV = "BRANCHHULL_THREADS"
PHASE_HEADER = ["N", "K", "L", "S1", "S2", "trials", "successes", "line_value"]


def default_workers():
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def sparsity_count(N, fraction):
    if not 0 < fraction <= 1:
        raise ValueError("sparsity fraction must lie in (0, 1]")
    return max(1, int(round(fraction * N)))


def line_value(S1, S2, K, N, const=0.25):
    """Sample-complexity curve ``const (S1 + S2) log^2(K + N)``."""
    return const * (S1 + S2) * math.log(K + N) ** 2


def _sparse_pm1(rng, n, k):
    v = np.zeros(n)
    v[rng.choice(n, size=k, replace=False)] = rng.choice([-1.0, 1.0], size=k)
    return v


def generate_synthetic(K, N, L, sparsity_fraction=0.05, seed=None, S1=None, S2=None,
                       noise=None, max_resample=100):
    """Random instance with Gaussian dictionaries and +-1 sparse coefficients.

    Dictionary entries are ``N(0, 1/L)``.  Both coefficient vectors get
    ``max(1, round(fraction * N))`` nonzeros unless ``S1``/``S2`` are given.
    ``noise`` is an optional callable ``rng, L -> xi``.  The instance is
    redrawn if some entry of ``B h`` vanishes.
    """
    S = sparsity_count(N, sparsity_fraction)
    S1 = S if S1 is None else S1
    S2 = S if S2 is None else S2
    if S1 > K or S2 > N:
        raise ValueError(f"sparsity ({S1}, {S2}) exceeds dimensions ({K}, {N})")
    rng = np.random.default_rng(seed)
    for _ in range(max_resample):
        B = gaussian_dictionary(L, K, 1 / math.sqrt(L), rng)
        C = gaussian_dictionary(L, N, 1 / math.sqrt(L), rng)
        h = _sparse_pm1(rng, K, S1)
        m = _sparse_pm1(rng, N, S2)
        xi = np.zeros(L) if noise is None else np.asarray(noise(rng, L), dtype=float)
        try:
            y, s, t = synthesize_measurements(B, C, h, m, xi)
        except ValueError:
            continue
        if np.any(y == 0):
            continue
        return BilinearProblem(B, C, y, s, t), GroundTruth(h, m, xi, S1, S2)
    raise RuntimeError("could not draw an instance with nonzero measurements")


def trial_seed(seed, N, L, trial):
    """Deterministic per-trial seed derived from the grid position."""
    return np.random.SeedSequence([int(seed), int(N), int(L), int(trial)])


@dataclass
class PhaseCell:
    N: int
    L: int
    trials: int
    successes: int
    threshold: float
    K: int = 0
    S1: int = 0
    S2: int = 0
    line_value: float = 0.0
    failures: int = 0
    distances: list = field(default_factory=list)

    def __post_init__(self):
        if not 0 <= self.successes <= self.trials:
            raise ValueError("successes must lie in [0, trials]")

    @property
    def fraction(self):
        return self.successes / self.trials if self.trials else float("nan")


@dataclass
class TrialResult:
    distance: float
    success: bool
    balanced_gap: float
    iterations: int
    converged: bool
    error: str = ""


def run_noiseless_trial(K, N, L, fraction, seed, threshold=1e-6, rho=1.0, max_iters=50_000,
                        tol=1e-9, metric="balanced"):
    """Solve one plain l1-BranchHull instance and score it.

    ``metric="balanced"`` measures the plain distance to the balanced truth;
    ``metric="curve"`` minimizes that distance over the scaling ambiguity.
    """
    problem, truth = generate_synthetic(K, N, L, fraction, seed)
    h_hat, m_hat = truth.balanced()
    try:
        sol = preset_l1_bh(problem, rho=rho, max_iters=max_iters, primal_tol=tol, dual_tol=tol)
    except (AdmmDivergence, ArithmeticError, np.linalg.LinAlgError) as exc:
        return TrialResult(math.inf, False, math.inf, 0, False, repr(exc))
    dist, _ = unnormalized_distance(sol.h, sol.m, h_hat, m_hat, optimize_scale=(metric == "curve"))
    nh, nm = np.abs(sol.h).sum(), np.abs(sol.m).sum()
    gap = abs(nh - nm) / max(nh, nm, 1e-300)
    return TrialResult(dist, bool(dist < threshold), gap, sol.iterations, sol.converged)


def _cell_job(args):
    N, L, trials, threshold, rho, seed, fraction, max_iters, tol, metric = args
    K = N
    S = sparsity_count(N, fraction)
    cell = PhaseCell(N=N, L=L, trials=trials, successes=0, threshold=threshold, K=K, S1=S, S2=S,
                     line_value=line_value(S, S, K, N))
    for trial in range(trials):
        res = run_noiseless_trial(K, N, L, fraction, trial_seed(seed, N, L, trial), threshold,
                                  rho, max_iters, tol, metric)
        cell.successes += res.success
        cell.failures += bool(res.error)
        cell.distances.append(res.distance)
    return cell


def phase_portrait(grid, trials=10, threshold=1e-6, rho=1.0, seed=0, fraction=0.05,
                   max_iters=50_000, tol=1e-9, metric="balanced", workers=None):
    """Empirical recovery rates over a grid of ``(N, L)`` pairs with ``K = N``.

    Solver failures count as unsuccessful trials.  Cells are returned in
    grid order regardless of ``workers``.
    """
    grid = list(grid)
    if not grid:
        raise ValueError("grid must be nonempty")
    jobs = [(int(N), int(L), trials, threshold, rho, seed, fraction, max_iters, tol, metric) for N, L in grid]
    workers = default_workers() if workers is None else workers
    if trials == 0:
        return [_cell_job(j) for j in jobs]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(_cell_job, jobs))
    return [_cell_job(j) for j in jobs]


def phase_rows(cells):
    return [[c.N, c.K, c.L, c.S1, c.S2, c.trials, c.successes, repr(c.line_value)] for c in cells]


def shift_noise(xi):
    """Rewrite two-sided noise as a common scale times one-sided noise.

    Returns ``(scale, eta)`` with ``scale = 1 + max(xi)`` and
    ``eta = (1 - scale + xi) / scale``, so ``1 + xi = scale (1 + eta)``,
    ``eta <= 0`` and ``eta >= -1`` whenever ``xi >= -1``.
    """
    xi = np.asarray(xi, dtype=float)
    scale = 1.0 + xi.max()
    return scale, (1.0 - scale + xi) / scale


def noisy_bound_check(K, N, L, S1, S2, noise_level, trials, seed=0, rho=1.0, max_iters=50_000,
                      tol=1e-9, const=37.0, atol=1e-8):
    """Compare the relative recovery error with ``const * sqrt(max|xi|)``.

    Noise is uniform on ``[-noise_level, 0]``.  ``atol`` absorbs the
    solver's own round-off, which matters only when the bound is near 0.

    Returns
    -------
    dict
        Per-trial lists ``distance``, ``bound``, ``holds``, the shift
        diagnostics, and the summary ``fraction_holding``.
    """
    report = dict(K=K, N=N, L=L, S1=S1, S2=S2, noise_level=noise_level, trials=trials, seed=seed,
                  rho=rho, distance=[], bound=[], holds=[], c_star=[], shift_ok=[], iterations=[])

    def noise(rng, n):
        return -noise_level * rng.random(n) if noise_level > 0 else np.zeros(n)

    for trial in range(trials):
        problem, truth = generate_synthetic(K, N, L, seed=trial_seed(seed, N, L, trial), S1=S1, S2=S2,
                                            noise=noise)
        h_hat, m_hat = truth.balanced()
        sol = preset_l1_bh(problem, rho=rho, max_iters=max_iters, primal_tol=tol, dual_tol=tol)
        dist, c_star = recovery_distance(sol.h, sol.m, h_hat, m_hat)
        bound = const * math.sqrt(np.abs(truth.xi).max())
        scale, eta = shift_noise(truth.xi)
        clean = (problem.B @ truth.h_nat) * (problem.C @ truth.m_nat)
        shift_ok = bool(
            np.all(eta <= 1e-15) and np.all(eta >= -1) and np.isclose(eta.max(), 0.0, atol=1e-15)
            and np.allclose(scale * clean * (1 + eta), problem.y, rtol=1e-12, atol=0)
        )
        report["distance"].append(dist)
        report["bound"].append(bound)
        report["holds"].append(bool(dist <= bound + atol))
        report["c_star"].append(c_star)
        report["shift_ok"].append(shift_ok)
        report["iterations"].append(sol.iterations)
    report["fraction_holding"] = float(np.mean(report["holds"])) if trials else float("nan")
    return report


@dataclass
class ImageResult:
    recovered: np.ndarray
    distortion: np.ndarray
    diagnostics: dict


def prepare_image(img, eps=1 / 255):
    """Map a non-negative image to ``[eps, 1]`` by its maximum.

    Dividing by the maximum makes the pipeline invariant to global positive
    rescaling; the floor keeps every measurement strictly positive.
    """
    img = np.asarray(img, dtype=float)
    if img.ndim != 2:
        raise ValueError("expected a 2-d grayscale image")
    if np.any(img < 0) or img.max() <= 0:
        raise ValueError("image must be non-negative with a positive maximum")
    return np.maximum(img / img.max(), eps)


def build_distortion_dictionary(L, dict_kind, ncols, seed):
    if dict_kind == "dct":
        return partial_idct_dictionary(L, ncols, seed=seed, include_ones_column=True)[0]
    if dict_kind == "bessel":
        return bessel_dictionary(L, ncols, seed=seed)
    raise ValueError(f"unknown dictionary kind {dict_kind!r}")


def image_pipeline(image, dict_kind="dct", dict_params=None, rho=1e-4, lam=1e3, seed=0,
                   max_iters=50_000, tol=1e-9, eps=1 / 255, C=None):
    """Separate a piecewise-constant image from a smooth multiplicative distortion.

    The image is vectorized column by column, ``B`` is the identity, ``t = 1``
    and the TV-regularized robust program is solved with ``P = D``.

    Parameters
    ----------
    image : ndarray or str
        Grayscale image or the path of a PGM file.
    dict_kind : {"dct", "bessel"}
    dict_params : dict, optional
        ``ncols`` (default 300 for dct, 50 for bessel, capped at L).
    C : ndarray, optional
        Use this distortion dictionary instead of building one.
    """
    if isinstance(image, (str, os.PathLike)):
        from .io import read_pgm

        image, _ = read_pgm(image)
    y_img = prepare_image(image, eps)
    p, q = y_img.shape
    L = p * q
    y = y_img.flatten(order="F")
    params = dict(dict_params or {})
    if C is None:
        ncols = params.get("ncols", 300 if dict_kind == "dct" else 50)
        ncols = min(ncols, L)
        C = build_distortion_dictionary(L, dict_kind, ncols, seed)
    B = sp.identity(L, format="csr")
    problem = BilinearProblem(B, C, y, np.sign(y), np.ones(L))
    tv = tv_operator(p, q)
    sol = preset_tv_bh(problem, tv, rho=rho, lam=lam, max_iters=max_iters, primal_tol=tol, dual_tol=tol)
    w = np.asarray(B @ sol.h)
    x = np.asarray(C @ sol.m)
    diagnostics = dict(
        dict_kind=dict_kind, ncols=C.shape[1], rho=rho, lam=lam, seed=seed, p=p, q=q,
        iterations=sol.iterations, converged=sol.converged,
        primal_residual=sol.primal_residual, dual_residual=sol.dual_residual,
        tv=tv.tv(w), m_l1=float(np.abs(sol.m).sum()), xi_l1=float(np.abs(sol.xi).sum()),
    )
    return ImageResult(w.reshape((p, q), order="F"), x.reshape((p, q), order="F"), diagnostics), sol


def _feasible_mask(x, w, xi, y, s, t):
    tot = x if xi is None else x + xi
    return (np.abs(y) - s * tot * w <= 0) & (t * w >= 0)


def brute_force_projection_oracle(point, y_l, s_l, t_l, with_slack=True, grid_radius=None,
                                  grid_steps=41, max_widen=8):
    """Nearest feasible point by grid search plus local refinement.

    A box grid around ``point`` locates the nearest feasible grid point;
    the hyperbolic boundary, parameterized directly, is then searched with
    Nelder-Mead starting from there.  Uses no multiplier algebra, so it
    serves as an independent check of the closed-form projection.
    """
    point = np.asarray(point, dtype=float)
    dim = 3 if with_slack else 2
    if point.shape != (dim,):
        raise ValueError(f"point must have {dim} coordinates")
    xi0 = point[2] if with_slack else None
    if _feasible_mask(point[0], point[1], xi0, y_l, s_l, t_l):
        return point.copy()
    if y_l == 0:
        return np.array([point[0], 0.0] + ([point[2]] if with_slack else []))

    radius = grid_radius or (np.abs(point).max() + 2.0 * math.sqrt(abs(y_l)) + 1.0)
    best = None
    for _ in range(max_widen):
        axes = [np.linspace(c - radius, c + radius, grid_steps) for c in point]
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([g.ravel() for g in mesh], axis=1)
        feas = _feasible_mask(pts[:, 0], pts[:, 1], pts[:, 2] if with_slack else None, y_l, s_l, t_l)
        if np.any(feas):
            cand = pts[feas]
            best = cand[np.argmin(np.sum((cand - point) ** 2, axis=1))]
            break
        radius *= 2.0
    if best is None:
        raise RuntimeError("no feasible grid point found")

    ay = abs(y_l)

    # Boundary: w = t e^a and s (x + xi) w = |y|.  With slack, x - xi is
    # free; for fixed w the nearest boundary point keeps x - xi = x' - xi'.
    diff = point[0] - point[2] if with_slack else 0.0

    def boundary(a):
        w = t_l * math.exp(a)
        total = ay / (s_l * w)
        if with_slack:
            return np.array([(total + diff) / 2, w, (total - diff) / 2])
        return np.array([total, w])

    def dist2(a):
        return float(np.sum((boundary(a) - point) ** 2))

    a0 = math.log(max(abs(best[1]), 1e-8))
    # coarse scan in log w guards against a poor grid start
    scan = a0 + np.linspace(-6, 6, 241)
    k = int(np.argmin([dist2(a) for a in scan]))
    lo, hi = scan[max(k - 1, 0)], scan[min(k + 1, len(scan) - 1)]
    res = so.minimize_scalar(dist2, bounds=(lo, hi), method="bounded", options=dict(xatol=1e-13))
    refined = boundary(res.x)
    if np.sum((refined - point) ** 2) <= np.sum((best - point) ** 2):
        return refined
    return best
