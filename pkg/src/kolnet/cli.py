"""Command-line entry point for reproducible experiments.

Subcommands: certify, simulate, build, train, evaluate, scaling-study.
All outputs are CSV with a comment line recording the config hash and
seeds; identical invocations produce byte-identical files.
"""

from __future__ import annotations

import argparse
import hashlib
import sys
import time
from pathlib import Path

import numpy as np

from . import rng
from .bounds import (
    ApproximationFamily,
    kolmogorov_certificate,
    put_family,
    scaling_audit,
)
from .constructive import BuildSpec, build_mc_network
from .learning import (
    TrainConfig,
    generate_dataset,
    l2_error,
    noise_floor,
    train_erm,
)
from .nets import (
    Architecture,
    ClippedNetwork,
    load_network,
    put_payoff_network,
    save_network,
)
from .analytic import lognormal_capped_put
from .sde import (
    KolmogorovProblem,
    SimulationError,
    gbm_coefficients,
    load_problem,
    mc_reference_grid,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERIC = 3


class UsageError(ValueError):
    pass


def _config_hash(args: argparse.Namespace) -> str:
    # The output directory is where results land, not what the experiment is;
    # leaving it out makes reruns into different directories byte-identical.
    blob = repr(
        sorted(
            (k, str(v))
            for k, v in vars(args).items()
            if k not in ("func", "out_dir")
        )
    )
    return hashlib.sha256(blob.encode()).hexdigest()[:12]


def _write_csv(path, header: str, rows, comment: str) -> None:
    with open(path, "w") as fh:
        fh.write(f"# {comment}\n")
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(str(x) for x in row) + "\n")


def _grid_points(problem: KolmogorovProblem, size: int, seed: int) -> np.ndarray:
    """Deterministic evaluation grid: equispaced for d=1, low-star uniform else."""
    d = problem.dim
    if d == 1:
        return np.linspace(problem.u, problem.v, size)[:, None]
    key = rng.stream_key(rng.child_seeds(seed, 0x671D))
    U = rng.uniforms(key, np.arange(size * d)).reshape(size, d)
    return problem.u + (problem.v - problem.u) * U


def _closed_form_reference(problem: KolmogorovProblem, points: np.ndarray):
    """Exact reference for the d=1 GBM capped put; None when not applicable."""
    if problem.dim != 1 or not problem.gbm_flag:
        return None
    arch = problem.payoff.architecture
    if arch.widths != (1, 1, 1, 1):
        return None
    W1, B1 = problem.payoff.layers[0]
    c = -float(W1[0, 0])
    cap = float(B1[0])
    if c <= 0 or cap != problem.clip_amplitude:
        return None
    mu = float(problem.coeffs.A[0, 0])
    sig = float(problem.coeffs.C[1][0, 0])
    vals = lognormal_capped_put(points[:, 0], c, cap, mu, sig, problem.horizon)
    return [(points[i], float(vals[i]), 0.0) for i in range(points.shape[0])]


def _reference(problem, points, n_paths, seed):
    closed = _closed_form_reference(problem, points)
    if closed is not None:
        return closed, "closed_form"
    ref = mc_reference_grid(problem, list(points), n_paths, seed)
    return [(points[i], ref[i][0], ref[i][1]) for i in range(len(ref))], "monte_carlo"


def cmd_certify(args) -> int:
    if not 0 < args.eps < 1:
        raise UsageError("eps must lie in (0, 1)")
    if not 0 < args.rho < 1:
        raise UsageError("rho must lie in (0, 1)")
    if args.d < 1:
        raise UsageError("d must be a positive integer")
    if args.family == "put":
        fam = put_family()

        def arch_of_delta(delta):
            return Architecture((args.d, 1, 1, 1)), args.D
    else:
        fam = ApproximationFamily(
            c=args.c, nu=args.nu, alpha=args.alpha, beta=args.beta,
            gamma=args.gamma, kappa=args.kappa, lmbda=args.lmbda,
        )

        def arch_of_delta(delta):
            return Architecture((args.d, 1, 1, 1)), args.D

    cert = kolmogorov_certificate(
        args.d, args.eps, args.rho, fam, arch_of_delta, C=args.C, D=args.D
    )
    rows = [(q, v, f'"{formula}"') for q, v, formula in cert.rows()]
    out = Path(args.out_dir) / "certificate.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    _write_csv(out, "quantity,value,formula", rows, f"config_hash={_config_hash(args)}")
    width = max(len(q) for q, _, _ in cert.rows())
    print(f"certificate for d={args.d} eps={args.eps} rho={args.rho} C={args.C}")
    for q, v, formula in cert.rows():
        print(f"  {q:<{width}}  {v:<24}  {formula}")
    print(f"wrote {out}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    problem = load_problem(args.problem)
    points = _grid_points(problem, args.grid, args.seed)
    ref = mc_reference_grid(problem, list(points), args.paths, args.seed)
    rows = [
        tuple(f"{x:.17g}" for x in points[i]) + (f"{ref[i][0]:.17g}", f"{ref[i][1]:.17g}")
        for i in range(len(ref))
    ]
    header = ",".join(f"x_{i + 1}" for i in range(problem.dim)) + ",estimate,std_error"
    out = Path(args.out_dir) / "reference.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    _write_csv(out, header, rows, f"config_hash={_config_hash(args)} seed={args.seed}")
    print(f"wrote {out} ({len(rows)} points, {args.paths} paths each)")
    return EXIT_OK


def cmd_build(args) -> int:
    problem = load_problem(args.problem)
    spec = BuildSpec(
        n=args.n,
        payoff=problem.payoff,
        retries=args.retries,
        grid_size=args.grid,
        ref_paths=args.paths,
        seed=args.seed,
    )
    built, report = build_mc_network(problem, spec)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    save_network(built, out_dir / "built_network.txt")
    report.save_csv(out_dir / "build_report.csv")
    print(
        f"built n={args.n} network: P(a)={report.param_count}, "
        f"max|theta|={report.theta_norm:.6g}, best retry {report.chosen_retry} "
        f"(est. L2 {report.retry_errors[report.chosen_retry]:.3e})"
    )
    print(f"wrote {out_dir / 'built_network.txt'} and {out_dir / 'build_report.csv'}")
    return EXIT_OK


def _run_pipeline(problem, args, out_dir: Path, comment: str):
    """generate -> train -> evaluate against reference; returns summary dict."""
    t0 = time.perf_counter()
    data = generate_dataset(problem, args.m, args.seed)
    arch = Architecture(tuple(int(w) for w in args.arch.split(",")))
    config = TrainConfig(
        architecture=arch,
        clip_amplitude=problem.clip_amplitude,
        parameter_bound=args.R,
        batch_size=args.batch,
        step_size=args.lr,
        iterations=args.iters,
        eval_every=args.eval_every,
        seed=rng.child_seed(args.seed, 0x7124),
        project=args.R is not None and args.project,
    )
    fit = train_erm(data, config)
    points = _grid_points(problem, args.grid, args.seed)
    reference, ref_kind = _reference(
        problem, points, args.paths, rng.child_seed(args.seed, 0xE7A1)
    )
    net = ClippedNetwork(fit.trained, problem.clip_amplitude)
    err = l2_error(net, reference)
    floor = noise_floor(reference)
    out_dir.mkdir(parents=True, exist_ok=True)
    save_network(fit.trained, out_dir / "trained_network.txt")
    fit.save_trace(out_dir / "trace.csv")
    summary = {
        "d": problem.dim,
        "m": args.m,
        "architecture": "-".join(str(w) for w in arch.widths),
        "final_empirical_risk": fit.final_risk,
        "l2_error": err,
        "noise_floor": floor,
        "reference": ref_kind,
        "wall_clock_s": round(time.perf_counter() - t0, 3),
    }
    _write_csv(
        out_dir / "summary.csv",
        ",".join(summary),
        [tuple(summary.values())],
        comment,
    )
    return summary


def cmd_train(args) -> int:
    problem = load_problem(args.problem)
    out_dir = Path(args.out_dir)
    summary = _run_pipeline(
        problem, args, out_dir, f"config_hash={_config_hash(args)} seed={args.seed}"
    )
    for k, v in summary.items():
        print(f"  {k}: {v}")
    print(f"wrote {out_dir / 'summary.csv'}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    problem = load_problem(args.problem)
    params = load_network(args.network)
    net = ClippedNetwork(params, problem.clip_amplitude)
    points = _grid_points(problem, args.grid, args.seed)
    reference, ref_kind = _reference(
        problem, points, args.paths, rng.child_seed(args.seed, 0xE7A1)
    )
    err = l2_error(net, reference)
    floor = noise_floor(reference)
    out = Path(args.out_dir) / "evaluation.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    _write_csv(
        out,
        "l2_error,noise_floor,reference,grid",
        [(f"{err:.17g}", f"{floor:.17g}", ref_kind, args.grid)],
        f"config_hash={_config_hash(args)} seed={args.seed}",
    )
    print(f"l2_error={err:.6e} noise_floor={floor:.6e} ({ref_kind})")
    print(f"wrote {out}")
    return EXIT_OK


def cmd_scaling_study(args) -> int:
    dims = [int(x) for x in args.dims.split(",")]
    if len(set(dims)) < 3:
        raise UsageError("scaling study needs at least 3 distinct dimensions")
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    results = []
    all_hit = True
    for d in dims:
        problem = KolmogorovProblem(
            coeffs=gbm_coefficients(d, args.mu, args.sigma),
            horizon=args.T,
            payoff=put_payoff_network(np.full(d, 1.0 / d), args.D),
            clip_amplitude=args.D,
            u=args.u,
            v=args.v,
            gbm_flag=True,
        )
        m = int(args.m_base * d**2)
        sub = argparse.Namespace(
            m=m, arch=f"{d},{args.width},{args.width},1", R=None, batch=args.batch,
            lr=args.lr, iters=args.iters, eval_every=args.eval_every,
            grid=args.grid, paths=args.paths, seed=rng.child_seed(args.seed, d),
            project=False,
        )
        summary = _run_pipeline(
            problem, sub, out_dir / f"d{d}", f"config_hash={_config_hash(args)} d={d}"
        )
        hit = summary["l2_error"] <= args.target
        all_hit = all_hit and hit
        rows.append(
            (d, m, f"{summary['l2_error']:.17g}", f"{summary['noise_floor']:.17g}", hit)
        )
        results.append((d, m))
        print(
            f"  d={d}: m={m} l2={summary['l2_error']:.3e} "
            f"target={'hit' if hit else 'MISSED'}"
        )
    audit = scaling_audit(results, threshold=args.threshold)
    verdict = "PASS" if (audit.passed and all_hit) else "FAIL"
    rows_out = [r + (f"{audit.slope:.17g}", f"{audit.r_squared:.17g}", verdict) for r in rows]
    _write_csv(
        out_dir / "scaling.csv",
        "d,m,l2_error,noise_floor,target_hit,slope,r_squared,verdict",
        rows_out,
        f"config_hash={_config_hash(args)} seed={args.seed}",
    )
    print(
        f"audit: slope={audit.slope:.3f} (threshold {args.threshold}), "
        f"R^2={audit.r_squared:.3f} -> {verdict}"
    )
    return EXIT_OK if verdict == "PASS" else EXIT_NUMERIC


def _add_common(p, grid_default=256):
    p.add_argument("--seed", type=int, required=True, help="master seed (no wall-clock defaults)")
    p.add_argument("--out-dir", default="out", help="output directory")
    p.add_argument("--grid", type=int, default=grid_default, help="evaluation grid size")
    p.add_argument("--paths", type=int, default=100_000, help="Monte-Carlo paths per reference point")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="kolnet", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("certify", help="print size/sample certificates")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--rho", type=float, required=True)
    p.add_argument("--C", type=float, default=1.0, help="scale constant (existential; default 1)")
    p.add_argument("--D", type=float, default=1.0)
    p.add_argument("--family", choices=["put", "custom"], default="put")
    for name, default in [("c", 6.0), ("nu", 0.5), ("alpha", 0.0), ("beta", 0.0),
                          ("gamma", 1.0), ("kappa", 0.0), ("lmbda", 0.0)]:
        p.add_argument(f"--{name}", type=float, default=default)
    p.add_argument("--out-dir", default="out")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("simulate", help="Monte-Carlo reference grid")
    p.add_argument("problem")
    _add_common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("build", help="assemble the Monte-Carlo average network")
    p.add_argument("problem")
    p.add_argument("--n", type=int, required=True, help="Monte-Carlo width")
    p.add_argument("--retries", type=int, default=3)
    _add_common(p, grid_default=64)
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("train", help="generate data, train by ERM, evaluate")
    p.add_argument("problem")
    p.add_argument("--m", type=int, required=True, help="training sample count")
    p.add_argument("--arch", required=True, help="comma-separated widths, e.g. 1,32,32,1")
    p.add_argument("--R", type=float, default=None, help="parameter bound (optional)")
    p.add_argument("--project", action="store_true", help="project parameters into [-R, R]")
    p.add_argument("--batch", type=int, default=256)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--iters", type=int, default=100_000)
    p.add_argument("--eval-every", type=int, default=1000)
    _add_common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="L2 error of a network file vs reference")
    p.add_argument("problem")
    p.add_argument("network")
    _add_common(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("scaling-study", help="error-vs-dimension audit")
    p.add_argument("--dims", required=True, help="comma-separated dimensions, e.g. 1,2,4,8")
    p.add_argument("--m-base", type=int, default=20000, help="m = m_base * d^2")
    p.add_argument("--target", type=float, default=5e-3)
    p.add_argument("--threshold", type=float, default=3.0)
    p.add_argument("--mu", type=float, default=0.0)
    p.add_argument("--sigma", type=float, default=0.2)
    p.add_argument("--T", type=float, default=1.0)
    p.add_argument("--D", type=float, default=1.0)
    p.add_argument("--u", type=float, default=0.5)
    p.add_argument("--v", type=float, default=1.5)
    p.add_argument("--width", type=int, default=32)
    p.add_argument("--batch", type=int, default=512)
    p.add_argument("--lr", type=float, default=2e-3)
    p.add_argument("--iters", type=int, default=15000)
    p.add_argument("--eval-every", type=int, default=1000)
    _add_common(p, grid_default=128)
    p.set_defaults(func=cmd_scaling_study)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except (UsageError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SimulationError, OverflowError, ArithmeticError, RuntimeError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
