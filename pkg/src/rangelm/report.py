"""Iteration CSV files and plot-ready column files built from them.

Every number is written with 17 significant digits. Missing values are
written as ``nan``.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

from .solver import RunResult

__all__ = [
    "ITERATION_COLUMNS",
    "format_number",
    "write_iterations",
    "read_iterations",
    "summarize_table",
    "write_columns",
    "build_report",
    "find_runs",
]

ITERATION_COLUMNS = ("k", "alpha", "ratio", "residual", "linres", "c", "d",
                     "c_hat", "d_hat", "rel_error", "subproblem_solves", "secant_used")


def format_number(v) -> str:
    if v is None:
        return "nan"
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if math.isnan(v):
        return "nan"
    return "%.17g" % v


def write_iterations(result: RunResult, path) -> None:
    """One row per executed step plus the closing row at ``k*``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ITERATION_COLUMNS)
        for rec in result.records:
            w.writerow([format_number(getattr(rec, c)) for c in ITERATION_COLUMNS])


def read_iterations(path) -> dict:
    """Column name -> float array."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != ITERATION_COLUMNS:
        raise ValueError(f"{path}: not an iteration file")
    data = np.array([[float(v) for v in row] for row in rows[1:]], dtype=float)
    data = data.reshape(-1, len(ITERATION_COLUMNS))
    return {name: data[:, i] for i, name in enumerate(ITERATION_COLUMNS)}


def summarize_table(table: dict) -> dict:
    """``kstar``, ``total_subproblems`` and ``E_kstar`` recomputed from an iteration table."""
    if len(table["k"]) == 0:
        raise ValueError("empty iteration table")
    return {
        "kstar": int(table["k"][-1]),
        "total_subproblems": int(np.nansum(table["subproblem_solves"])),
        "E_kstar": float(table["rel_error"][-1]),
    }


def write_columns(path, header, columns) -> None:
    """Whitespace-separated columns, shorter ones padded with ``nan``."""
    length = max((len(c) for c in columns), default=0)
    with open(path, "w") as fh:
        fh.write("# " + " ".join(header) + "\n")
        for i in range(length):
            fh.write(" ".join(format_number(c[i]) if i < len(c) else "nan"
                              for c in columns) + "\n")


def find_runs(paths) -> list:
    """Expand directories into the run directories (holding ``iterations.csv``) below them."""
    found = []
    for p in map(Path, paths):
        if (p / "iterations.csv").is_file():
            found.append(p)
        elif p.is_dir():
            found += sorted(q.parent for q in p.rglob("iterations.csv"))
    return found


def build_report(run_dirs, out) -> list:
    """Write residual, error and alpha tables against ``k`` plus one overlay per run.

    ``residual.dat``, ``error.dat`` and ``alpha.dat`` have a ``k`` column and
    one column per run, aligned on ``k`` and padded after each run's end.
    ``overlay_<name>.dat`` holds ``k, H, c, d`` for the executed steps.
    Returns the written paths.
    """
    runs = find_runs(run_dirs)
    if not runs:
        raise FileNotFoundError("no iterations.csv found under " + ", ".join(map(str, run_dirs)))
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    names, tables = [], []
    for r in runs:
        name = r.name
        while name in names:
            name += "_"
        names.append(name)
        tables.append(read_iterations(r / "iterations.csv"))

    kmax = max(len(t["k"]) for t in tables)
    ks = np.arange(kmax, dtype=float)
    written = []
    for fname, col in (("residual.dat", "residual"), ("error.dat", "rel_error"),
                       ("alpha.dat", "alpha")):
        cols = []
        for t in tables:
            v = np.full(kmax, np.nan)
            v[t["k"].astype(int)] = t[col]
            cols.append(v)
        path = out / fname
        write_columns(path, ["k"] + names, [ks] + cols)
        written.append(path)
    for name, t in zip(names, tables):
        steps = ~np.isnan(t["linres"])
        path = out / f"overlay_{name}.dat"
        write_columns(path, ["k", "H", "c", "d"],
                      [t["k"][steps], t["linres"][steps], t["c"][steps], t["d"][steps]])
        written.append(path)
    return written
