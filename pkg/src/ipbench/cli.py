"""Command-line entry point: ``ipbench {gen,solve,bench,profile,calibrate}``.

Exit codes: 0 solved (Optimal/Acceptable), 2 iteration or time limit,
3 any other failure.  A ``--config`` file of ``key = value`` lines supplies
defaults that explicit flags override.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import bench
from .ipm import SolverOptions, Status
from .ldl import WORKERS_ENV, default_workers, make_backend
from .problems import GENERATORS, analytic_suite, generate, write_manifest

EXIT_OK, EXIT_LIMIT, EXIT_ERROR = 0, 2, 3
ANALYTIC = {g.name: g for g in analytic_suite()}
KINDS = sorted(GENERATORS) + sorted(ANALYTIC)
PAPER_SWEEP_TEXT = f"{bench.PAPER_SWEEP[0]}..{bench.PAPER_SWEEP[-1]} step 2"


def exit_code(status: Status | str) -> int:
    status = Status(status)
    if status.solved:
        return EXIT_OK
    if status in (Status.ITERATION_LIMIT, Status.TIME_LIMIT):
        return EXIT_LIMIT
    return EXIT_ERROR


def parse_range(text: str) -> list[int]:
    """``start:stop:step`` (stop exclusive, step defaults to 1)."""
    parts = [int(p) for p in text.split(":")]
    if len(parts) == 2:
        parts.append(1)
    if len(parts) != 3 or parts[2] <= 0:
        raise argparse.ArgumentTypeError(f"bad range {text!r}; use start:stop:step")
    values = list(range(*parts))
    if not values:
        raise argparse.ArgumentTypeError(f"range {text!r} is empty")
    return values


def read_config(path) -> dict:
    out = {}
    for n, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{n}: expected 'key = value'")
        k, v = (s.strip() for s in line.split("=", 1))
        out[k.replace("-", "_")] = v
    return out


def _instances(args) -> list:
    kinds = args.kind
    sizes = args.n_range if args.n_range else args.n
    out = []
    for kind in kinds:
        if kind in ANALYTIC:
            out.append(ANALYTIC[kind])
        else:
            out.extend(generate(kind, n) for n in sizes)
    return out


def _workers(args) -> int:
    return args.workers if args.workers is not None else default_workers()


def _solver_options(args) -> SolverOptions:
    return SolverOptions(tol=args.tol, max_iter=args.max_iter, time_limit=args.time_limit)


def cmd_gen(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for g in _instances(args):
        path = write_manifest(g, out / f"{g.name}.manifest")
        print(path)
    return EXIT_OK


def cmd_solve(args) -> int:
    code = EXIT_OK
    records = []
    workers = _workers(args)
    opts = _solver_options(args)
    for g in _instances(args):
        for name in args.backend:
            backend = make_backend(name, workers)
            rec = bench.run_cell(g.name, g.problem, name, backend, opts)
            records.append(rec)
            res_line = (f"{g.name} backend={name} status={rec.status} iterations={rec.iterations} "
                        f"objective={rec.objective!r} seconds={rec.wall_seconds:.3f}")
            print(res_line)
            if rec.status == Status.DEGREES_OF_FREEDOM.value:
                print(f"{g.name}: too few degrees of freedom", file=sys.stderr)
            code = max(code, exit_code(rec.status))
    if args.out:
        print(bench.write_records(records, Path(args.out) / "records.csv"))
    return code


def cmd_bench(args) -> int:
    workers = _workers(args)
    backends = {name: make_backend(name, workers) for name in args.backend}
    records = bench.run_matrix(_instances(args), backends, _solver_options(args), args.reps)
    for r in records:
        print(f"{r.problem_id} {r.backend_id} {r.status} {r.wall_seconds:.3f}s")
    print(bench.write_records(records, Path(args.out) / "records.csv"))
    return EXIT_OK


def cmd_profile(args) -> int:
    records = bench.read_records(args.records)
    prof = bench.performance_profile(records, args.total)
    out = Path(args.out)
    for p in bench.write_profiles(prof, out):
        print(p)
    print(bench.plot_profiles(prof, out / "profile.svg", args.split))
    return EXIT_OK


def cmd_calibrate(args) -> int:
    counts = list(bench.PAPER_SWEEP) if args.paper_sweep else args.worker_counts
    reps = bench.PAPER_REPS if args.paper_sweep and args.reps is None else (args.reps or 1)
    insts = _instances(args)
    if len(insts) != 1:
        print("calibrate needs exactly one instance", file=sys.stderr)
        return EXIT_ERROR
    g = insts[0]
    name = args.backend[0]
    res = bench.calibrate(
        g, lambda w: make_backend(name, w), counts, reps, _solver_options(args),
        problem_id=g.name, backend_id=name,
    )
    out = Path(args.out)
    bench.write_records(res.records, out / "calibration_records.csv")
    bench.write_calibration(res, out / "calibration.csv")
    for w, m in res.means.items():
        flag = "" if w not in res.invalid else " (unsolved)"
        print(f"workers={w} mean={m:.4f}s normalized={res.normalized.get(w, float('nan')):.3f}{flag}")
    print(f"best_workers={res.best_workers} min_mean={res.min_mean:.4f} max_mean={res.max_mean:.4f}")
    return EXIT_OK if res.best_workers is not None else EXIT_ERROR


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="file of 'key = value' defaults")
    p.add_argument("--kind", nargs="+", choices=KINDS,
                   help="problem family or analytic instance")
    size = p.add_mutually_exclusive_group()
    size.add_argument("--n", type=int, nargs="+", default=[8], help="grid dimension(s)")
    size.add_argument("--n-range", type=parse_range, help="grid dimensions as start:stop:step")
    p.add_argument("--backend", nargs="+", choices=["sparse", "dense"], default=["sparse"])
    p.add_argument("--workers", type=int, help=f"factorization threads (default ${WORKERS_ENV} or 1)")
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--max-iter", type=int, default=9999)
    p.add_argument("--time-limit", type=float, default=14400.0)
    p.add_argument("--out", default="ipbench_out", help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ipbench", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="write instance manifests")
    _add_common(p)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("solve", help="solve instances and print a summary")
    _add_common(p)
    p.set_defaults(func=cmd_solve, out=None)

    p = sub.add_parser("bench", help="run an experiment matrix to a records CSV")
    _add_common(p)
    p.add_argument("--reps", type=int, default=1)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("profile", help="performance profiles from a records CSV")
    p.add_argument("--config", help="file of 'key = value' defaults")
    p.add_argument("--records", required=True, help="records CSV written by bench")
    p.add_argument("--total", type=int, help="number of problems (default: those recorded)")
    p.add_argument("--split", type=float, help="seconds where the time axis turns logarithmic")
    p.add_argument("--out", default="ipbench_out")
    p.set_defaults(func=cmd_profile)

    p = sub.add_parser("calibrate", help="sweep worker counts on one instance")
    _add_common(p)
    p.add_argument("--worker-counts", type=int, nargs="+", default=[1, 2])
    p.add_argument("--paper-sweep", action="store_true",
                   help=f"workers {PAPER_SWEEP_TEXT} with {bench.PAPER_REPS} repetitions")
    p.add_argument("--reps", type=int)
    p.set_defaults(func=cmd_calibrate)
    return parser


def _config_defaults(parser: argparse.ArgumentParser, argv: list[str]) -> list[str]:
    """Apply ``--config`` values as subparser defaults; flags given on the line win."""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return argv
    cfg = read_config(known.config)
    # turn config entries into leading flags so argparse validates them
    cmd = argv[0] if argv else ""
    extra = []
    given = {a.split("=", 1)[0] for a in argv if a.startswith("--")}
    for k, v in cfg.items():
        flag = "--" + k.replace("_", "-")
        if flag in given:
            continue
        if v.lower() in ("true", "yes"):
            extra.append(flag)
        elif v.lower() in ("false", "no"):
            continue
        else:
            extra.extend([flag, *v.split()])
    return [cmd, *extra, *argv[1:]]


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        argv = _config_defaults(parser, argv)
    except (OSError, ValueError) as exc:
        parser.error(str(exc))
    args = parser.parse_args(argv)
    if getattr(args, "kind", "absent") is None:
        parser.error("--kind is required")
    try:
        return args.func(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
