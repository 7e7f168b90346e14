"""Command-line interface: ``branchhull {synth,solve,phase,bound,image}``."""

from __future__ import annotations

import argparse
import logging
import math
import sys
import warnings

import numpy as np

from . import __version__
from .admm import AdmmDivergence, SolverConfig, admm_solve
from .dictionaries import tv_operator
from .harness import (
    PHASE_HEADER,
    image_pipeline,
    generate_synthetic,
    noisy_bound_check,
    phase_portrait,
    phase_rows,
)
from .io import load_problem, read_pgm, save_arrays, save_problem, write_csv, write_manifest, write_pgm
from .model import recovery_distance, unnormalized_distance

log = logging.getLogger("branchhull")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NOT_CONVERGED = 3
EXIT_DIVERGED = 4


def manifest_path(out):
    return f"{out}.manifest.txt"


def _base_manifest(command, args):
    entries = {"command": command, "version": __version__}
    for k, v in sorted(vars(args).items()):
        if k in ("func", "verbose"):
            continue
        entries[k] = v
    return entries


def cmd_synth(args):
    problem, truth = generate_synthetic(args.K, args.N, args.L, args.sparsity, args.seed)
    header = dict(seed=args.seed, generator="gaussian-pm1", sparsity=args.sparsity)
    save_problem(args.out, problem, truth, header)
    entries = _base_manifest("synth", args)
    entries.update(S1=truth.S1, S2=truth.S2, output=args.out)
    write_manifest(manifest_path(args.out), entries)
    print(f"wrote {args.out} (L={problem.L}, K={problem.K}, N={problem.N}, S1={truth.S1}, S2={truth.S2})")
    return EXIT_OK


def _solver_config(args, problem, header):
    tol = args.tol
    common = dict(rho=args.rho, max_iters=args.max_iters, primal_tol=tol, dual_tol=tol)
    if args.program == "bh":
        if args.lam is not None:
            warnings.warn("--lambda is ignored for --program bh", stacklevel=2)
            print("warning: --lambda is ignored for --program bh", file=sys.stderr)
        return SolverConfig(lam=math.inf, **common), None
    lam = 1e3 if args.lam is None else args.lam
    if args.program == "rbh":
        return SolverConfig(lam=lam, **common), None
    shape = args.shape or header.get("image_shape")
    if not shape:
        raise SystemExit("--program tvbh needs --shape P Q (or image_shape in the problem header)")
    p, q = int(shape[0]), int(shape[1])
    tv = tv_operator(p, q)
    if tv.L != problem.L:
        raise SystemExit(f"--shape {p} {q} does not match L={problem.L}")
    P = tv.D @ problem.B
    return SolverConfig(lam=lam, P=np.asarray(P.toarray() if hasattr(P, "toarray") else P), **common), (p, q)


def cmd_solve(args):
    problem, truth, header = load_problem(args.problem)
    config, shape = _solver_config(args, problem, header)
    entries = _base_manifest("solve", args)
    try:
        sol = admm_solve(problem, config)
    except AdmmDivergence as exc:
        entries.update(status="diverged", diverged_at=exc.iteration)
        write_manifest(manifest_path(args.out), entries)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    save_arrays(args.out, dict(kind="solution", program=args.program, iterations=sol.iterations,
                               converged=sol.converged, primal_residual=sol.primal_residual,
                               dual_residual=sol.dual_residual),
                h=sol.h, m=sol.m, xi=sol.xi)
    entries.update(iterations=sol.iterations, converged=sol.converged,
                   primal_residual=sol.primal_residual, dual_residual=sol.dual_residual,
                   objective=sol.objective(config.P, config.lam if config.with_slack else None))
    if truth is not None:
        h_hat, m_hat = truth.balanced()
        rel, c_star = recovery_distance(sol.h, sol.m, h_hat, m_hat)
        plain, _ = unnormalized_distance(sol.h, sol.m, h_hat, m_hat, optimize_scale=False)
        entries.update(relative_distance=rel, c_star=c_star, balanced_distance=plain)
        print(f"relative recovery distance {rel:.3e} (c* = {c_star:.6g}); "
              f"distance to balanced truth {plain:.3e}")
    print(f"iterations {sol.iterations}, converged {sol.converged}, "
          f"primal {sol.primal_residual:.3e}, dual {sol.dual_residual:.3e}")
    status = "converged" if sol.converged else "max_iters"
    entries["status"] = status
    write_manifest(manifest_path(args.out), entries)
    if not sol.converged and not args.allow_maxiter:
        print("error: tolerance not met within --max-iters (pass --allow-maxiter to accept)", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def _int_list(text):
    if ":" in text:
        start, stop, step = (int(v) for v in text.split(":"))
        return list(range(start, stop + 1, step))
    return [int(v) for v in text.split(",") if v]


def cmd_phase(args):
    grid = [(N, L) for N in args.N for L in args.L]
    cells = phase_portrait(grid, trials=args.trials, threshold=args.threshold, rho=args.rho, seed=args.seed,
                           fraction=args.sparsity, max_iters=args.max_iters, tol=args.tol, metric=args.metric,
                           workers=args.workers)
    write_csv(args.out, PHASE_HEADER, phase_rows(cells))
    entries = _base_manifest("phase", args)
    entries.update(cells=len(cells), solver_failures=sum(c.failures for c in cells), output=args.out)
    write_manifest(manifest_path(args.out), entries)
    for c in cells:
        print(f"N={c.N:4d} L={c.L:4d} success {c.successes}/{c.trials}  line {c.line_value:.2f}")
    return EXIT_OK


def cmd_bound(args):
    rep = noisy_bound_check(args.K, args.N, args.L, args.S1, args.S2, args.noise, args.trials, args.seed,
                            rho=args.rho, max_iters=args.max_iters, tol=args.tol)
    entries = _base_manifest("bound", args)
    entries.update(fraction_holding=rep["fraction_holding"], distance=rep["distance"], bound=rep["bound"],
                   shift_ok=all(rep["shift_ok"]))
    write_manifest(args.out, entries)
    print(f"bound holds in {sum(rep['holds'])}/{args.trials} trials; max distance {max(rep['distance']):.3e}")
    return EXIT_OK


def cmd_image(args):
    img, _ = read_pgm(args.input)
    res, _sol = image_pipeline(img, args.dict, {"ncols": args.ncols}, rho=args.rho, lam=args.lam,
                               seed=args.seed, max_iters=args.max_iters, tol=args.tol)
    rec = res.recovered
    span = rec.max() - rec.min()
    scaled = np.zeros_like(rec) if span <= 0 else (rec - rec.min()) / span
    write_pgm(args.out, np.rint(255 * scaled).astype(np.uint8), 255)
    entries = _base_manifest("image", args)
    entries.update(res.diagnostics)
    entries["output"] = args.out
    write_manifest(manifest_path(args.out), entries)
    print(f"wrote {args.out} ({res.diagnostics['p']}x{res.diagnostics['q']}, "
          f"{res.diagnostics['iterations']} iterations)")
    return EXIT_OK


def _add_solver_flags(p, rho, tol=1e-9, max_iters=50_000):
    p.add_argument("--rho", type=float, default=rho, help="ADMM penalty (default %(default)s)")
    p.add_argument("--max-iters", type=int, default=max_iters)
    p.add_argument("--tol", type=float, default=tol, help="relative residual tolerance")


def build_parser():
    parser = argparse.ArgumentParser(prog="branchhull", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a random sparse bilinear instance")
    p.add_argument("--K", type=int, required=True)
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--L", type=int, required=True)
    p.add_argument("--sparsity", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("solve", help="solve a stored instance")
    p.add_argument("problem")
    p.add_argument("--program", choices=["bh", "rbh", "tvbh"], default="bh")
    p.add_argument("--lambda", dest="lam", type=float, default=None)
    p.add_argument("--shape", type=int, nargs=2, metavar=("P", "Q"))
    p.add_argument("--allow-maxiter", action="store_true")
    p.add_argument("--out", required=True)
    _add_solver_flags(p, rho=1.0)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("phase", help="empirical phase portrait as CSV")
    p.add_argument("--N", type=_int_list, required=True, help="comma list or start:stop:step")
    p.add_argument("--L", type=_int_list, required=True, help="comma list or start:stop:step")
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--threshold", type=float, default=1e-6)
    p.add_argument("--sparsity", type=float, default=0.05)
    p.add_argument("--metric", choices=["balanced", "curve"], default="balanced")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--out", required=True)
    _add_solver_flags(p, rho=1.0)
    p.set_defaults(func=cmd_phase)

    p = sub.add_parser("bound", help="check the noisy recovery bound empirically")
    p.add_argument("--K", type=int, default=40)
    p.add_argument("--N", type=int, default=40)
    p.add_argument("--L", type=int, default=120)
    p.add_argument("--S1", type=int, default=2)
    p.add_argument("--S2", type=int, default=2)
    p.add_argument("--noise", type=float, default=1e-4)
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    _add_solver_flags(p, rho=1.0)
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("image", help="remove a smooth distortion from a PGM image")
    p.add_argument("--input", required=True)
    p.add_argument("--dict", choices=["dct", "bessel"], default="dct")
    p.add_argument("--ncols", type=int, default=300)
    p.add_argument("--lambda", dest="lam", type=float, default=1e3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    _add_solver_flags(p, rho=1e-4, max_iters=5000)
    p.set_defaults(func=cmd_image)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
