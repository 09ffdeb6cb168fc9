"""TOML run configurations: potential schema plus per-command options.

Unknown keys are rejected everywhere so a typo cannot silently change a
run.  Flags on the command line override scalars parsed here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:      # Python 3.10
    import tomli as tomllib

from .potential import Potential

__all__ = ["ConfigError", "RunOptions", "VerifySpec", "TrappedSpec",
           "RunConfig", "load_config", "parse_config"]

_METHODS = ("auto", "linear", "obstacle", "transfer")


class ConfigError(ValueError):
    pass


@dataclass
class RunOptions:
    a: float | None = None
    window: tuple[float, float] | None = None
    step: float | None = None
    h_target: float | None = None
    margin: float | None = None
    tol: float = 1e-8
    method: str = "auto"
    jobs: int = 0            # 0 = all available cores
    max_iter: int = 1_000_000
    refine_width: float | None = None
    out: str | None = None


@dataclass
class VerifySpec:
    tol: float = 1e-3
    perturbations: list[Potential] = field(default_factory=list)
    comparisons: list[Potential] = field(default_factory=list)
    delta: list[tuple[float, float]] = field(default_factory=list)
    nondecreasing: bool = False


@dataclass
class TrappedSpec:
    alpha: float = 1.0
    beta: float | None = None
    b: float | None = None
    c: float | None = None
    betas: list[float] = field(default_factory=list)
    widths: list[float] = field(default_factory=list)

    @property
    def grid_mode(self) -> bool:
        return bool(self.betas)


@dataclass
class RunConfig:
    potential: Potential
    run: RunOptions
    verify: VerifySpec | None = None
    trapped: TrappedSpec | None = None


def _reject_unknown(d: dict, allowed: set[str], where: str) -> None:
    unknown = set(d) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")


def _positive(x, name: str) -> float:
    x = float(x)
    if not (math.isfinite(x) and x > 0.0):
        raise ConfigError(f"{name} must be a positive number, got {x}")
    return x


def _parse_run(d: dict) -> RunOptions:
    _reject_unknown(d, {"a", "window", "step", "h", "margin", "tol",
                        "method", "jobs", "max_iter", "refine_width",
                        "out"}, "[run]")
    opts = RunOptions()
    if "a" in d:
        opts.a = float(d["a"])
    if "window" in d:
        w = d["window"]
        if not (isinstance(w, (list, tuple)) and len(w) == 2):
            raise ConfigError("run.window must be [lo, hi]")
        lo, hi = float(w[0]), float(w[1])
        if hi < lo:
            raise ConfigError("run.window must satisfy lo <= hi")
        opts.window = (lo, hi)
    if "step" in d:
        opts.step = _positive(d["step"], "run.step")
    if "h" in d:
        opts.h_target = _positive(d["h"], "run.h")
    if "margin" in d:
        opts.margin = _positive(d["margin"], "run.margin")
    if "tol" in d:
        opts.tol = _positive(d["tol"], "run.tol")
    if "method" in d:
        if d["method"] not in _METHODS:
            raise ConfigError(f"run.method must be one of {_METHODS}")
        opts.method = d["method"]
    if "jobs" in d:
        jobs = int(d["jobs"])
        if jobs < 0:
            raise ConfigError("run.jobs must be >= 0 (0 = all cores)")
        opts.jobs = jobs
    if "max_iter" in d:
        max_iter = int(d["max_iter"])
        if max_iter <= 0:
            raise ConfigError("run.max_iter must be positive")
        opts.max_iter = max_iter
    if "refine_width" in d:
        opts.refine_width = _positive(d["refine_width"], "run.refine_width")
    if "out" in d:
        opts.out = str(d["out"])
    return opts


def _parse_measure(d: dict, where: str) -> Potential:
    _reject_unknown(d, {"density", "atoms"}, where)
    try:
        return Potential.from_dict(d)
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def _parse_potential(d: dict, where: str) -> Potential:
    try:
        return Potential.from_dict(d)
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def _parse_verify(d: dict) -> VerifySpec:
    _reject_unknown(d, {"tol", "perturbation", "comparison", "delta",
                        "nondecreasing"}, "[verify]")
    spec = VerifySpec()
    if "tol" in d:
        spec.tol = _positive(d["tol"], "verify.tol")
    for sub in d.get("perturbation", []):
        spec.perturbations.append(_parse_measure(sub, "verify.perturbation"))
    for sub in d.get("comparison", []):
        spec.comparisons.append(_parse_potential(sub, "verify.comparison"))
    for pair in d.get("delta", []):
        if not (isinstance(pair, (list, tuple)) and len(pair) == 2):
            raise ConfigError("verify.delta entries must be [alpha, beta]")
        spec.delta.append((float(pair[0]), float(pair[1])))
    if "nondecreasing" in d:
        spec.nondecreasing = bool(d["nondecreasing"])
    return spec


def _parse_trapped(d: dict) -> TrappedSpec:
    _reject_unknown(d, {"alpha", "beta", "b", "c", "betas", "widths"},
                    "[trapped]")
    spec = TrappedSpec()
    if "alpha" in d:
        spec.alpha = _positive(d["alpha"], "trapped.alpha")
    single = {"beta", "b", "c"} & set(d)
    grid = {"betas", "widths"} & set(d)
    if single and grid:
        raise ConfigError("[trapped] is either a single well or a grid")
    if grid:
        spec.betas = [_positive(x, "trapped.betas") for x in d.get("betas", [])]
        spec.widths = [_positive(x, "trapped.widths")
                       for x in d.get("widths", [])]
        if not spec.betas or not spec.widths:
            raise ConfigError("[trapped] grid needs betas and widths")
    elif single:
        if single != {"beta", "b", "c"}:
            raise ConfigError("[trapped] single well needs beta, b and c")
        spec.beta = _positive(d["beta"], "trapped.beta")
        spec.b, spec.c = float(d["b"]), float(d["c"])
        if not spec.b < spec.c:
            raise ConfigError("[trapped] needs b < c")
    else:
        raise ConfigError("[trapped] needs well parameters or a grid")
    return spec


def parse_config(data: dict) -> RunConfig:
    _reject_unknown(data, {"bounded", "density", "atoms", "run", "verify",
                           "trapped"}, "config")
    pot = _parse_potential({k: data[k] for k in ("bounded", "density", "atoms")
                            if k in data}, "potential")
    run = _parse_run(data.get("run", {}))
    verify = _parse_verify(data["verify"]) if "verify" in data else None
    trapped = _parse_trapped(data["trapped"]) if "trapped" in data else None
    return RunConfig(pot, run, verify, trapped)


def load_config(path: str | Path) -> RunConfig:
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from exc
    return parse_config(data)
