"""Config-driven command line: build a potential, run inner/outer solves and
validators, emit CSV curves and line-oriented summaries.

Exit codes: 0 success, 1 config error, 2 solver non-convergence,
3 validation failure.
"""

from __future__ import annotations

import argparse
import math
import sys
import time

from . import analysis
from .analysis import BoundReport
from .config import ConfigError, RunConfig, load_config
from .inner import (
    MethodInapplicableError,
    make_inner_problem,
    solve_linear,
    solve_obstacle,
    solve_transfer,
)
from .outer import (
    OuterResult,
    OuterSolverError,
    minimize,
    sweep,
    trapped_mode_criterion,
)
from .potential import Potential

__all__ = ["main"]

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NOCONV = 2
EXIT_CHECK = 3


def _fmt(x) -> str:
    if isinstance(x, float):
        return format(x, ".12g")
    return str(x)


def _emit(lines: list[str]) -> None:
    sys.stdout.write("\n".join(lines) + "\n")


def _write_csv(out: str | None, header: str, rows: list[str]) -> None:
    text = header + "\n" + "".join(r + "\n" for r in rows)
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write("\n" + text)


def _summary(command: str, pairs: list[tuple[str, object]],
             started: float) -> list[str]:
    lines = [f"command = {command}"]
    lines += [f"{k} = {_fmt(v)}" for k, v in pairs]
    lines.append(f"wall_time_s = {time.perf_counter() - started:.3f}")
    return lines


def _solve_inner_any(p: Potential, cfg: RunConfig):
    run = cfg.run
    if run.method in ("auto", "transfer"):
        try:
            return solve_transfer(p, run.a)
        except MethodInapplicableError:
            if run.method == "transfer":
                raise
    problem = make_inner_problem(p, run.a, margin=run.margin,
                                 h_target=run.h_target)
    if run.method in ("auto", "linear"):
        try:
            return solve_linear(problem)
        except MethodInapplicableError:
            if run.method == "linear":
                raise
    return solve_obstacle(problem, tol=run.tol, max_iter=run.max_iter)


def cmd_inner(cfg: RunConfig) -> int:
    if cfg.run.a is None:
        raise ConfigError("inner needs run.a (the peak location)")
    t0 = time.perf_counter()
    sol = _solve_inner_any(cfg.potential, cfg)
    rows = [f"{_fmt(float(x))},{_fmt(float(u))}"
            for x, u in zip(sol.x, sol.u)]
    pairs = [
        ("a", cfg.run.a),
        ("F", sol.value),
        ("method", sol.method),
        ("certificate", sol.certificate),
        ("converged", sol.converged),
        ("kkt_residual", sol.kkt_residual),
        ("iterations", sol.iterations),
        ("contact_nodes", len(sol.contact_set)),
        ("nodes", len(sol.x)),
    ]
    _emit(_summary("inner", pairs, t0))
    _write_csv(cfg.run.out, "x,u", rows)
    return EXIT_OK if sol.converged else EXIT_NOCONV


def cmd_sweep(cfg: RunConfig) -> int:
    run = cfg.run
    if run.window is None or run.step is None:
        raise ConfigError("sweep needs run.window and run.step")
    t0 = time.perf_counter()
    sw = sweep(cfg.potential, run.window, run.step, method=run.method,
               h_target=run.h_target, margin=run.margin, tol=run.tol,
               max_iter=run.max_iter, jobs=run.jobs)
    rows = [f"{_fmt(float(a))},{_fmt(float(f))},{c}" for a, f, c in sw.rows()]
    ok = sw.converged
    pairs = [
        ("points", len(sw.a_values)),
        ("flagged", int((~ok).sum())),
        ("min_F", float(sw.F_values[ok].min()) if ok.any() else math.nan),
    ]
    _emit(_summary("sweep", pairs, t0))
    _write_csv(run.out, "a,F,certificate", rows)
    return EXIT_OK if ok.all() else EXIT_NOCONV


def _minimize_pairs(res: OuterResult) -> list[tuple[str, object]]:
    pairs = [
        ("m_estimate", res.m_estimate),
        ("argmin", res.argmin),
        ("attained", res.attained),
    ]
    if res.boundary_side:
        pairs.append(("boundary_side", res.boundary_side))
    pairs += [
        ("refinement_width", res.refinement_width),
        ("certificate", res.certificate),
    ]
    if res.m_estimate > 0.0:
        pairs.append(("best_constant", analysis.best_constant(res.m_estimate)))
    else:
        pairs.append(("no_inequality",
                      "true (m <= 0: the sup-norm inequality fails)"))
    return pairs


def cmd_minimize(cfg: RunConfig) -> int:
    run = cfg.run
    t0 = time.perf_counter()
    res = minimize(cfg.potential, window=run.window, step=run.step,
                   method=run.method, h_target=run.h_target,
                   margin=run.margin, tol=run.tol, max_iter=run.max_iter,
                   jobs=run.jobs, refine_width=run.refine_width)
    _emit(_summary("minimize", _minimize_pairs(res), t0))
    if run.out:
        rows = [f"{_fmt(float(a))},{_fmt(float(f))},{c}"
                for a, f, c in res.sweep.rows()]
        _write_csv(run.out, "a,F,certificate", rows)
    return EXIT_OK if res.sweep.converged.all() else EXIT_NOCONV


def _outer_m(p: Potential, cfg: RunConfig) -> float:
    run = cfg.run
    return minimize(p, method=run.method, h_target=run.h_target,
                    margin=run.margin, tol=run.tol, max_iter=run.max_iter,
                    jobs=run.jobs).m_estimate


def cmd_verify(cfg: RunConfig) -> int:
    if cfg.verify is None:
        raise ConfigError("verify needs a [verify] section")
    spec = cfg.verify
    t0 = time.perf_counter()
    base = cfg.potential
    reports: list[BoundReport] = []

    need_base = bool(spec.perturbations or spec.comparisons
                     or spec.nondecreasing)
    m_base = _outer_m(base, cfg) if need_base else math.nan

    for mu in spec.perturbations:
        m_pert = _outer_m(base + mu, cfg)
        lo, hi = analysis.perturbation_bounds(m_base, mu)
        passed = lo - spec.tol <= m_pert <= hi + spec.tol
        reports.append(BoundReport("perturbation", lo, m_pert, hi, passed,
                                   min(m_pert - lo, hi - m_pert)))
        inv = analysis.invariance_check(base, mu, m_base, m_pert, spec.tol)
        if inv.applicable:
            reports.append(inv)

    for other in spec.comparisons:
        m_other = _outer_m(other, cfg)
        if other.pointwise_geq(base):
            reports.append(analysis.comparison_check(other, base, m_other,
                                                     m_base, spec.tol))
        else:
            reports.append(analysis.comparison_check(base, other, m_base,
                                                     m_other, spec.tol))

    for alpha, beta in spec.delta:
        exact = analysis.delta_closed_form(alpha, beta)
        from .potential import delta_potential
        m = _outer_m(delta_potential(alpha, beta), cfg)
        passed = abs(m - exact) <= spec.tol
        reports.append(BoundReport("delta", exact, m, exact, passed,
                                   spec.tol - abs(m - exact)))

    if spec.nondecreasing:
        try:
            exact = analysis.nondecreasing_limit(base)
            passed = abs(m_base - exact) <= spec.tol
            reports.append(BoundReport("nondecreasing", exact, m_base, exact,
                                       passed, spec.tol - abs(m_base - exact)))
        except ValueError as exc:
            reports.append(BoundReport("nondecreasing", math.nan, m_base,
                                       math.nan, False, math.nan,
                                       applicable=False, note=str(exc)))

    failed = [r for r in reports if r.applicable and not r.passed]
    pairs = [
        ("checks", len(reports)),
        ("failed", len(failed)),
        ("not_applicable", sum(not r.applicable for r in reports)),
    ]
    _emit(_summary("verify", pairs, t0))
    _write_csv(cfg.run.out, "theorem,lower,computed,upper,pass,slack",
               [r.csv_row() for r in reports])
    return EXIT_CHECK if failed else EXIT_OK


def cmd_trapped(cfg: RunConfig) -> int:
    if cfg.trapped is None:
        raise ConfigError("trapped needs a [trapped] section")
    spec = cfg.trapped
    run = cfg.run
    t0 = time.perf_counter()

    def well_result(beta: float, b: float, c: float) -> tuple[bool, OuterResult]:
        crit = trapped_mode_criterion(spec.alpha, beta, b, c)
        p = Potential.square_well(spec.alpha, beta, b, c)
        window = (b, c) if crit else run.window
        res = minimize(p, window=window, step=run.step, method=run.method,
                       h_target=run.h_target, margin=run.margin, tol=run.tol,
                       max_iter=run.max_iter, jobs=run.jobs,
                       refine_width=run.refine_width)
        return crit, res

    if not spec.grid_mode:
        crit, res = well_result(spec.beta, spec.b, spec.c)
        pairs = [("alpha", spec.alpha), ("beta", spec.beta),
                 ("width", spec.c - spec.b),
                 ("criterion", crit)] + _minimize_pairs(res)
        _emit(_summary("trapped", pairs, t0))
        if run.out:
            rows = [f"{_fmt(float(a))},{_fmt(float(f))},{c}"
                    for a, f, c in res.sweep.rows()]
            _write_csv(run.out, "a,F,certificate", rows)
        return EXIT_OK if res.sweep.converged.all() else EXIT_NOCONV

    rows = []
    flagged = False
    for beta in spec.betas:
        for width in spec.widths:
            crit, res = well_result(beta, -0.5 * width, 0.5 * width)
            flagged |= not res.sweep.converged.all()
            rows.append(f"{_fmt(beta)},{_fmt(width)},{str(crit).lower()},"
                        f"{res.attained},{_fmt(res.argmin)}")
    pairs = [("wells", len(rows)), ("alpha", spec.alpha)]
    _emit(_summary("trapped", pairs, t0))
    _write_csv(run.out, "beta,width,criterion,attained,argmin", rows)
    return EXIT_NOCONV if flagged else EXIT_OK


_COMMANDS = {
    "inner": cmd_inner,
    "sweep": cmd_sweep,
    "minimize": cmd_minimize,
    "verify": cmd_verify,
    "trapped": cmd_trapped,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="supsharp",
        description="Sharp constants for sup-norm Sobolev-type inequalities "
                    "with step + point-mass potentials.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True)
        sp.add_argument("--out", default=None)
        sp.add_argument("--h", type=float, default=None)
        sp.add_argument("--margin", type=float, default=None)
        sp.add_argument("--tol", type=float, default=None)
        sp.add_argument("--method", default=None,
                        choices=["auto", "linear", "obstacle", "transfer"])
        sp.add_argument("--jobs", type=int, default=None)
    return parser


def _apply_flags(cfg: RunConfig, args: argparse.Namespace) -> None:
    run = cfg.run
    if args.out is not None:
        run.out = args.out
    for flag, attr in (("h", "h_target"), ("margin", "margin"),
                       ("tol", "tol")):
        val = getattr(args, flag)
        if val is not None:
            if val <= 0.0:
                raise ConfigError(f"--{flag} must be positive")
            setattr(run, attr, val)
    if args.method is not None:
        run.method = args.method
    if args.jobs is not None:
        if args.jobs < 0:
            raise ConfigError("--jobs must be >= 0")
        run.jobs = args.jobs


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        _apply_flags(cfg, args)
        return _COMMANDS[args.command](cfg)
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OuterSolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_NOCONV
    except MethodInapplicableError as exc:
        print(f"method not applicable: {exc}", file=sys.stderr)
        return EXIT_NOCONV
    except Exception as exc:   # contract: no tracebacks on bad input
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
