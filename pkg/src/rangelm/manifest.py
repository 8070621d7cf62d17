"""Run manifests and their ``key = value`` config files.

A manifest names the problem, its size, the noise levels and seed, and
every solver constant. Writing a manifest and reading it back gives an
equal manifest; floats are written with ``repr`` so no digit is lost.

Keys::

    preset        desk | paper43
    problem       eit | linear_diagonal | nonlinear_exp
    mesh_n        inversion mesh refinement (eit)
    data_mesh_n   data mesh refinement, at least 2 * mesh_n (eit)
    pattern       unionjack | diagonal (eit)
    n, s          size and decay of the synthetic problems
    deltas        comma-separated relative noise levels
    runs          comma-separated strategy:ratio pairs for sweeps
    seed          noise seed
    eta tau eps p alpha0 r0 a1 a2 p1 p2 kmax strategy r_max max_secant cg_tol
                  solver constants
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields
from typing import Tuple

from .solver import SolverConfig, paper43_constants, validate_config

__all__ = ["RunManifest", "PRESETS", "preset", "read_manifest", "write_manifest",
           "parse_manifest", "format_manifest"]

PROBLEMS = ("eit", "linear_diagonal", "nonlinear_exp")
PRESETS = ("desk", "paper43")

_SOLVER_KEYS = ("eta", "tau", "eps", "p", "alpha0", "r0", "a1", "a2", "p1", "p2",
                "kmax", "strategy", "r_max", "max_secant", "cg_tol")

_DEFAULT_RUNS = (("adaptive", 0.5), ("adaptive", 0.1), ("adaptive", 0.9),
                 ("geometric", 0.1), ("geometric", 0.5), ("geometric", 0.9))


@dataclass(frozen=True)
class RunManifest:
    preset: str = "desk"
    problem: str = "eit"
    mesh_n: int = 16
    data_mesh_n: int = 32
    pattern: str = "unionjack"
    n: int = 50
    s: float = 1.0
    deltas: Tuple[float, ...] = (0.008, 0.004, 0.002, 0.001)
    runs: Tuple[Tuple[str, float], ...] = _DEFAULT_RUNS
    seed: int = 0
    eta: float = 0.4
    tau: float = paper43_constants(0.4)["tau"]
    eps: float = paper43_constants(0.4)["eps"]
    p: float = 0.1
    alpha0: float = 2.0
    r0: float = 0.5
    a1: float = 2.0
    a2: float = 0.5
    p1: float = 1 / 3
    p2: float = 2 / 3
    kmax: int = 200
    strategy: str = "adaptive"
    r_max: float = 0.99
    max_secant: int = 30
    cg_tol: float = 1e-10

    def replace(self, **kw) -> "RunManifest":
        return dataclasses.replace(self, **kw)

    def solver_config(self, delta_abs: float = 0.0, **overrides) -> SolverConfig:
        kw = {k: getattr(self, k) for k in _SOLVER_KEYS}
        kw.update(delta=float(delta_abs), seed=self.seed)
        kw.update(overrides)
        return SolverConfig(**kw)

    def validate(self) -> list:
        """Return a list of problems (empty when the manifest is usable)."""
        bad = []
        if self.preset not in PRESETS:
            bad.append(f"preset={self.preset!r} not one of {PRESETS}")
        if self.problem not in PROBLEMS:
            bad.append(f"problem={self.problem!r} not one of {PROBLEMS}")
        if self.problem == "eit":
            if self.mesh_n < 4:
                bad.append("mesh_n must be at least 4")
            if self.data_mesh_n < 2 * self.mesh_n:
                bad.append("data_mesh_n must be at least twice mesh_n")
            if self.pattern not in ("unionjack", "diagonal"):
                bad.append(f"pattern={self.pattern!r} not unionjack or diagonal")
        elif self.n < 2 or not self.s > 0:
            bad.append("need n >= 2 and s > 0")
        if not self.deltas or any(not 0 <= d < 1 for d in self.deltas):
            bad.append("deltas must be a nonempty list of values in [0, 1)")
        for strategy, ratio in self.runs:
            if strategy not in ("adaptive", "geometric") or not 0 < ratio < 1:
                bad.append(f"bad run {strategy}:{ratio!r}")
        bad += validate_config(self.solver_config())
        return bad


def preset(name: str) -> RunManifest:
    """Base manifest of a named preset; both use the same solver constants."""
    if name == "desk":
        return RunManifest(preset="desk", mesh_n=16, data_mesh_n=32)
    if name == "paper43":
        return RunManifest(preset="paper43", mesh_n=27, data_mesh_n=54)
    raise ValueError(f"unknown preset {name!r}; expected one of {PRESETS}")


def _format_value(v) -> str:
    if isinstance(v, tuple):
        if v and isinstance(v[0], tuple):
            return ", ".join(f"{a}:{b!r}" for a, b in v)
        return ", ".join(repr(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def format_manifest(m: RunManifest) -> str:
    lines = ["# rangelm run manifest"]
    lines += [f"{f.name} = {_format_value(getattr(m, f.name))}" for f in fields(m)]
    return "\n".join(lines) + "\n"


def _parse_value(name, text, default):
    text = text.strip()
    if name == "runs":
        out = []
        for item in filter(None, (t.strip() for t in text.split(","))):
            strategy, _, ratio = item.partition(":")
            out.append((strategy.strip(), float(ratio)))
        return tuple(out)
    if name == "deltas":
        return tuple(float(t) for t in text.split(",") if t.strip())
    if isinstance(default, int):
        return int(text)
    if isinstance(default, float):
        return float(text)
    return text


def parse_manifest(text: str, base: RunManifest = None) -> RunManifest:
    """Apply ``key = value`` lines to ``base`` (or to the preset named in the text).

    Raises ``ValueError`` on unknown keys or malformed lines.
    """
    pairs = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
        pairs.append((lineno, key.strip(), value))
    if base is None:
        named = [v.strip() for _, k, v in pairs if k == "preset"]
        base = preset(named[-1]) if named else RunManifest()
    known = {f.name: f for f in fields(base)}
    updates = {}
    for lineno, key, value in pairs:
        if key not in known:
            raise ValueError(f"line {lineno}: unknown key {key!r}")
        try:
            updates[key] = _parse_value(key, value, getattr(base, key))
        except ValueError as exc:
            raise ValueError(f"line {lineno}: bad value for {key}: {exc}") from None
    return base.replace(**updates)


def read_manifest(path, base: RunManifest = None) -> RunManifest:
    with open(path) as fh:
        return parse_manifest(fh.read(), base)


def write_manifest(m: RunManifest, path) -> None:
    with open(path, "w") as fh:
        fh.write(format_manifest(m))
