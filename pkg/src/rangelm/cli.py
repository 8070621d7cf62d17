"""Command-line driver: ``rangelm {simulate,solve,sweep,report}``.

Exit codes: 0 discrepancy reached (or command done), 1 invalid input,
2 ``kmax`` reached, 3 no admissible multiplier, 4 iterate left the domain.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from .linalg import InnerProduct
from .manifest import PRESETS, RunManifest, preset, read_manifest, write_manifest
from .problems import ProblemInstance, linear_diagonal, nonlinear_exp
from .report import build_report, format_number, write_iterations
from .solver import RunResult, run

log = logging.getLogger("rangelm")

EXIT_CODES = {"discrepancy": 0, "kmax": 2, "infeasible": 3, "domain-violation": 4}
EXIT_INVALID = 1


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage, which would collide with kmax
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


# -- problem and data -----------------------------------------------------

def build_problem(m: RunManifest) -> ProblemInstance:
    if m.problem == "eit":
        from .eit import eit_problem
        return eit_problem(m.mesh_n, m.pattern, eta=m.eta)
    if m.problem == "linear_diagonal":
        return linear_diagonal(m.n, m.s)
    return nonlinear_exp(m.n, m.s)


def _uniform_noise(ip: InnerProduct, size, seed):
    noi = np.random.default_rng(seed).uniform(-1.0, 1.0, size)
    return noi / ip.norm(noi)


def make_dataset(m: RunManifest, problem: ProblemInstance, delta: float) -> dict:
    """Exact data, noisy data and absolute noise level for relative noise ``delta``."""
    if m.problem == "eit":
        from .eit import simulate_data, structured_mesh
        sd = simulate_data(structured_mesh(m.data_mesh_n, m.pattern), delta, m.seed,
                           problem.meta["model"])
        return dict(y=sd.y, y_delta=sd.y_delta, delta=sd.delta,
                    delta_abs=sd.delta_abs, seed=m.seed)
    y = problem.exact_data()
    ynorm = problem.y_ip.norm(y)
    if delta == 0:
        return dict(y=y, y_delta=y.copy(), delta=0.0, delta_abs=0.0, seed=m.seed)
    y_delta = y + delta * ynorm * _uniform_noise(problem.y_ip, y.size, m.seed)
    return dict(y=y, y_delta=y_delta, delta=float(delta),
                delta_abs=float(delta * ynorm), seed=m.seed)


def write_dataset(data: dict, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    for key in ("y", "y_delta"):
        np.savetxt(out / f"{key}.txt", data[key], fmt="%.17g")
    with open(out / "data.cfg", "w") as fh:
        fh.write(f"delta = {data['delta']!r}\n")
        fh.write(f"delta_abs = {data['delta_abs']!r}\n")
        fh.write(f"seed = {data['seed']}\n")


def read_dataset(path: Path) -> dict:
    path = Path(path)
    try:
        meta = {}
        for line in (path / "data.cfg").read_text().splitlines():
            if "=" in line:
                k, _, v = line.partition("=")
                meta[k.strip()] = v.strip()
        return dict(y=np.loadtxt(path / "y.txt", ndmin=1),
                    y_delta=np.loadtxt(path / "y_delta.txt", ndmin=1),
                    delta=float(meta["delta"]), delta_abs=float(meta["delta_abs"]),
                    seed=int(meta["seed"]))
    except (OSError, KeyError, ValueError) as exc:
        raise UsageError(f"cannot read data from {path}: {exc}") from None


def _delta_tag(delta: float) -> str:
    return f"delta_{delta!r}"


# -- outputs --------------------------------------------------------------

def summary_of(result: RunResult) -> dict:
    return {
        "kstar": result.kstar,
        "total_subproblems": result.total_subproblems,
        "E_kstar": result.final_rel_error,
        "final_residual": result.final_residual,
        "stop_reason": result.stop_reason,
    }


def write_summary(result: RunResult, path: Path) -> None:
    with open(path, "w") as fh:
        for k, v in summary_of(result).items():
            fh.write(f"{k} = {v if isinstance(v, str) else format_number(v)}\n")
        if result.message:
            fh.write(f"message = {result.message}\n")


def solve_one(m: RunManifest, problem, data, out: Path, **overrides) -> RunResult:
    cfg = m.solver_config(data["delta_abs"], **overrides)
    if len(data["y_delta"]) != problem.dim_y:
        raise UsageError(f"data has {len(data['y_delta'])} values, "
                         f"problem expects {problem.dim_y}")
    result = run(problem, data["y_delta"], cfg, keep_iterates=False)
    out.mkdir(parents=True, exist_ok=True)
    write_iterations(result, out / "iterations.csv")
    write_summary(result, out / "summary.cfg")
    return result


# -- commands -------------------------------------------------------------

def cmd_simulate(m: RunManifest, args) -> int:
    out = Path(args.out)
    problem = build_problem(m)
    out.mkdir(parents=True, exist_ok=True)
    write_manifest(m, out / "manifest.cfg")
    for delta in m.deltas:
        data = make_dataset(m, problem, delta)
        write_dataset(data, out / _delta_tag(delta))
        print(f"delta={delta:g} delta_abs={data['delta_abs']:.6g} -> {out / _delta_tag(delta)}")
    return 0


def cmd_solve(m: RunManifest, args) -> int:
    out = Path(args.out)
    problem = build_problem(m)
    if args.data:
        data = read_dataset(Path(args.data))
    else:
        data = make_dataset(m, problem, m.deltas[0])
        write_dataset(data, out / "data")
    out.mkdir(parents=True, exist_ok=True)
    write_manifest(m, out / "manifest.cfg")
    result = solve_one(m, problem, data, out)
    print(" ".join(f"{k}={v if isinstance(v, str) else format_number(v)}"
                   for k, v in summary_of(result).items()))
    return EXIT_CODES[result.stop_reason]


SWEEP_COLUMNS = ("delta", "strategy", "r0", "kstar", "total_subproblems", "E_kstar",
                 "stop_reason", "message")


def cmd_sweep(m: RunManifest, args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_manifest(m, out / "manifest.cfg")
    problem = build_problem(m)
    rows = []
    for delta in m.deltas:
        try:
            data = make_dataset(m, problem, delta)
        except Exception as exc:  # recorded per row, the sweep goes on
            for strategy, ratio in m.runs:
                rows.append([delta, strategy, ratio, None, None, None, "error", str(exc)])
            continue
        for strategy, ratio in m.runs:
            tag = f"{_delta_tag(delta)}_{strategy}_r{ratio!r}"
            try:
                res = solve_one(m, problem, data, out / "runs" / tag,
                                strategy=strategy, r0=ratio)
                rows.append([delta, strategy, ratio, res.kstar, res.total_subproblems,
                             res.final_rel_error, res.stop_reason, res.message])
            except Exception as exc:
                log.exception("sweep row %s failed", tag)
                rows.append([delta, strategy, ratio, None, None, None, "error", str(exc)])
            print(",".join(format_number(v) if not isinstance(v, str) else v
                           for v in rows[-1][:7]), flush=True)
    with open(out / "sweep.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SWEEP_COLUMNS)
        for row in rows:
            w.writerow([v if isinstance(v, str) else format_number(v) for v in row])
    return 0


def cmd_report(m: RunManifest, args) -> int:
    try:
        paths = build_report(args.runs, args.out)
    except FileNotFoundError as exc:
        raise UsageError(str(exc)) from None
    for p in paths:
        print(p)
    return 0


# -- entry point ----------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="key = value manifest file")
    common.add_argument("--preset", choices=PRESETS,
                        help="base manifest before --config is applied (default desk)")
    common.add_argument("--seed", type=int, metavar="N", help="noise seed override")
    common.add_argument("--out", metavar="DIR", default=".", help="output directory")
    common.add_argument("-v", "--verbose", action="count", default=0)

    parser = _Parser(prog="rangelm", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("simulate", parents=[common], help="write exact and noisy data")
    p = sub.add_parser("solve", parents=[common], help="run the solver on one dataset")
    p.add_argument("--data", metavar="DIR", help="dataset written by simulate")
    sub.add_parser("sweep", parents=[common], help="all noise levels and strategies")
    p = sub.add_parser("report", parents=[common], help="plot-ready columns from runs")
    p.add_argument("runs", nargs="+", metavar="RUN_DIR")
    return parser


def load_manifest(args) -> RunManifest:
    base = preset(args.preset) if args.preset else None
    if args.config:
        m = read_manifest(args.config, base)
    else:
        m = base or preset("desk")
    if args.seed is not None:
        m = m.replace(seed=args.seed)
    return m


COMMANDS = {"simulate": cmd_simulate, "solve": cmd_solve, "sweep": cmd_sweep,
            "report": cmd_report}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:  # usage errors and --help
        return exc.code if isinstance(exc.code, int) else EXIT_INVALID
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        m = load_manifest(args)
        bad = m.validate()
        if bad:
            raise UsageError("invalid config: " + "; ".join(bad))
        return COMMANDS[args.command](m, args)
    except (UsageError, ValueError, OSError) as exc:
        print(f"rangelm: error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
