"""Command-line entry point.

    ossqp gen --m 3 --n 8 --seed 7 -o p.json
    ossqp solve p.json -o sol.json --trace trace.jsonl --plot solve.png
    ossqp estimate p.json trace.jsonl -o cost.json --plot cost.png
    ossqp svm-train data.libsvm --C 1 -o model.json
    ossqp svm-predict model.json data.libsvm

Exit codes: 0 optimal (or success), 2 iteration limit, 1 any other
failure, 64 bad usage, 74 unreadable or unwritable files.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .backends import BACKENDS
from .cost import cost_report
from .driver import (
    SolverConfig,
    Status,
    center_to_neighborhood,
    read_trace,
    run_ifqipm,
    write_trace,
)
from .errors import OssqpError, ParseError
from .nullspace import build_null_basis
from .problem import (
    PrimalDualPoint,
    central_path_metrics,
    dump_problem,
    lift_start,
    load_problem,
    restrict_point,
    synthesize_instance,
    validate_and_preprocess,
)
from .svm import DEFAULT_EPS_REG, load_model, parse_dataset, save_model, train_svm

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_ITER_LIMIT = 2
EXIT_USAGE = 64
EXIT_IO = 74

logger = logging.getLogger("ossqp")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _solver_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("solver")
    d = SolverConfig()
    g.add_argument("--theta", type=float, default=None, help="neighborhood radius (default 0.9 theta_max)")
    g.add_argument("--beta", type=float, default=d.beta, help="sigma = 1 - beta/sqrt(n) (default %(default)s)")
    g.add_argument("--delta", type=float, default=d.delta, help="OSS residual fraction (default %(default)s)")
    g.add_argument("--eps", type=float, default=d.eps, help="stop when x^T s <= n eps (default %(default)s)")
    g.add_argument("--backend", choices=BACKENDS, default=d.backend)
    g.add_argument("--seed", type=int, default=d.seed, help="seed of the noisy backend")
    g.add_argument("--max-iters", type=int, default=d.max_iters)
    g.add_argument("--trace", type=Path, default=None, help="write per-iteration JSON lines here")
    g.add_argument("--timing", action="store_true", help="keep wall_time in the trace file")
    g.add_argument("--trace-kappa", action="store_true", help="record cond(M) per iteration (dense SVD)")


def _config(args) -> SolverConfig:
    try:
        return SolverConfig(
            theta=args.theta,
            beta=args.beta,
            delta=args.delta,
            eps=args.eps,
            backend=args.backend,
            seed=args.seed,
            max_iters=args.max_iters,
            trace_kappa=args.trace_kappa,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ossqp", description="Inexact feasible IPM for convex QPs via the OSS system.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="verb", required=True, parser_class=_Parser)

    p = sub.add_parser("gen", help="write a random feasible instance with an interior start")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--density", type=float, default=0.3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--q-scale", type=float, default=1.0, help="||Q V V^T||_F of the instance")
    p.add_argument("-o", "--output", type=Path, required=True)

    p = sub.add_parser("solve", help="solve a problem file")
    p.add_argument("problem", type=Path)
    p.add_argument("--start", type=Path, default=None, help="JSON point {x, y, s}; default is the bundled start")
    p.add_argument("-o", "--output", type=Path, default=None, help="solution JSON")
    p.add_argument("--plot", type=Path, default=None, help="render the solve figure here (PNG)")
    p.add_argument("--json", action="store_true", help="machine-readable summary on stdout")
    _solver_flags(p)

    p = sub.add_parser("estimate", help="replay a trace through the quantum cost model")
    p.add_argument("problem", type=Path)
    p.add_argument("trace_file", type=Path, metavar="trace")
    p.add_argument("--cost-eps", type=float, default=None, help="target accuracy (default: smallest traced mu)")
    p.add_argument("-o", "--output", type=Path, default=None, help="report JSON")
    p.add_argument("--plot", type=Path, default=None, help="render the cost figure here (PNG)")
    p.add_argument("--json", action="store_true")

    p = sub.add_parser("svm-train", help="train a linear l1 soft-margin SVM")
    p.add_argument("dataset", type=Path)
    p.add_argument("--C", type=float, default=1.0)
    p.add_argument("--eps-reg", type=float, default=DEFAULT_EPS_REG)
    _dataset_flags(p)
    p.add_argument("-o", "--output", type=Path, required=True, help="model JSON")
    p.add_argument("--plot", type=Path, default=None)
    p.add_argument("--json", action="store_true")
    _solver_flags(p)

    p = sub.add_parser("svm-predict", help="apply a trained model to a dataset")
    p.add_argument("model", type=Path)
    p.add_argument("dataset", type=Path)
    _dataset_flags(p)
    p.add_argument("-o", "--output", type=Path, default=None, help="write one predicted label per line")
    p.add_argument("--json", action="store_true")
    return parser


def _dataset_flags(p) -> None:
    p.add_argument("--format", choices=("libsvm", "csv"), default="libsvm")
    p.add_argument("--delimiter", default=",")
    p.add_argument("--map01", action="store_true", help="read labels 0/1 as -1/+1")


def _emit(args, summary: dict, table: str) -> None:
    if args.json:
        print(json.dumps(summary, indent=2, sort_keys=True))
    else:
        print(table)


def _kv_table(pairs) -> str:
    width = max(len(k) for k, _ in pairs)
    return "\n".join(f"{k:<{width}}  {v}" for k, v in pairs)


def _status_code(status: Status) -> int:
    return {Status.OPTIMAL: EXIT_OK, Status.ITER_LIMIT: EXIT_ITER_LIMIT}.get(status, EXIT_ERROR)


def cmd_gen(args) -> int:
    problem, start = synthesize_instance(args.m, args.n, args.density, args.seed, q_scale=args.q_scale)
    dump_problem(args.output, problem, start)
    print(f"wrote {args.output} (m={problem.m}, n={problem.n})")
    return EXIT_OK


def _load_start(path) -> PrimalDualPoint:
    text = Path(path).read_text()
    try:
        d = json.loads(text)
        return PrimalDualPoint.from_json_dict(d.get("start", d))
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, exc.lineno) from None
    except (KeyError, TypeError, ValueError, AttributeError) as exc:
        raise ParseError(f"cannot read start point from {path}: {exc}") from None


def cmd_solve(args) -> int:
    config = _config(args)
    original, start = load_problem(args.problem)
    if args.start is not None:
        start = _load_start(args.start)
    if start is None:
        raise UsageError("no start point: bundle one in the problem file or pass --start")
    problem = validate_and_preprocess(original)
    start = lift_start(problem, start)
    basis = build_null_basis(problem)
    try:
        theta = config.resolve_theta(problem, basis)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    centered = False
    if not central_path_metrics(start, theta).in_neighborhood:
        start = center_to_neighborhood(problem, start, config, basis=basis)
        centered = True
    result = run_ifqipm(problem, start, config, basis=basis)
    point = restrict_point(original, result.point)

    if args.trace is not None:
        write_trace(args.trace, result.traces, timing=args.timing)
    summary = {
        "status": result.status.value,
        "iterations": result.iterations,
        "centered": centered,
        "theta": result.theta,
        "mu": result.final.mu,
        "gap": result.final.gap,
        "objective": original.objective(point.x),
        "backend": config.backend,
        "n": original.n,
        "m": original.m,
        "split_columns": [list(p) for p in problem.split_columns],
    }
    if args.output is not None:
        Path(args.output).write_text(json.dumps({**summary, **point.to_json_dict()}, indent=2) + "\n")
    if args.plot is not None and result.traces:
        from .plotting import plot_solve_trace

        plot_solve_trace(result.traces, args.plot, theta=result.theta, delta=config.delta)
    _emit(args, summary, _kv_table([(k, v) for k, v in summary.items()]))
    return _status_code(result.status)


def cmd_estimate(args) -> int:
    original, _ = load_problem(args.problem)
    problem = validate_and_preprocess(original)
    traces = read_trace(args.trace_file)
    report = cost_report(problem, traces, eps=args.cost_eps, strict=False)
    bad = report.violations()
    if args.output is not None:
        Path(args.output).write_text(report.to_json() + "\n")
    if args.plot is not None:
        from .plotting import plot_cost_report

        plot_cost_report(report, args.plot)
    if args.json:
        print(report.to_json())
    else:
        print(report.render_table())
    for line in bad:
        print(f"invariant violated: {line}", file=sys.stderr)
    return EXIT_ERROR if bad else EXIT_OK


def cmd_svm_train(args) -> int:
    config = _config(args)
    dataset = parse_dataset(args.dataset, args.format, args.delimiter, args.map01)
    model, acc, result = train_svm(dataset, args.C, args.eps_reg, config)
    save_model(args.output, model)
    if args.trace is not None:
        write_trace(args.trace, result.traces, timing=args.timing)
    if args.plot is not None and result.traces:
        from .plotting import plot_solve_trace

        plot_solve_trace(result.traces, args.plot, theta=result.theta, delta=config.delta)
    summary = {
        "status": result.status.value,
        "iterations": result.iterations,
        "points": dataset.n,
        "features": dataset.m,
        "C": args.C,
        "eps_reg": args.eps_reg,
        "objective": model.objective,
        "w": model.w.tolist(),
        "t": model.t,
        "accuracy": acc,
        "note": "Q carries eps_reg*I on (w+, w-, t+, t-) so the dual has an interior",
    }
    _emit(args, summary, _kv_table([(k, v) for k, v in summary.items()]))
    return _status_code(result.status)


def cmd_svm_predict(args) -> int:
    model = load_model(args.model)
    dataset = parse_dataset(args.dataset, args.format, args.delimiter, args.map01)
    acc = model.accuracy(dataset)
    pred = model.predict(dataset.features)
    if args.output is not None:
        Path(args.output).write_text("".join(f"{int(v):+d}\n" for v in pred))
    summary = {"points": dataset.n, "accuracy": acc}
    _emit(args, summary, f"accuracy  {acc:.6f}  ({int(np.sum(pred == dataset.labels))}/{dataset.n})")
    return EXIT_OK


COMMANDS = {
    "gen": cmd_gen,
    "solve": cmd_solve,
    "estimate": cmd_estimate,
    "svm-train": cmd_svm_train,
    "svm-predict": cmd_svm_predict,
}


def run_command(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        return COMMANDS[args.verb](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"ossqp: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"ossqp: {exc}", file=sys.stderr)
        return EXIT_IO
    except (OssqpError, ValueError) as exc:
        print(f"ossqp: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


def main() -> None:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    sys.exit(run_command())


if __name__ == "__main__":
    main()
