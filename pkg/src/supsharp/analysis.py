"""Theorem-backed validators and closed forms for the global minimum value.

Validators never recompute the minimum; they consume values produced by the
outer solver, so a failed report isolates either a solver bug or a breached
tolerance rather than a duplicated pipeline.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .potential import Potential

__all__ = [
    "BoundReport",
    "NoInequalityError",
    "comparison_check",
    "perturbation_bounds",
    "delta_closed_form",
    "best_constant",
    "nondecreasing_limit",
    "invariance_check",
    "DEFAULT_CHECK_TOL",
]

DEFAULT_CHECK_TOL = 1e-3


class NoInequalityError(ValueError):
    """The sup-norm inequality fails (nonpositive minimum value)."""


@dataclass
class BoundReport:
    theorem: str
    lower: float
    computed: float
    upper: float
    passed: bool
    slack: float
    applicable: bool = True
    note: str = ""

    def csv_row(self) -> str:
        status = ("pass" if self.passed else "fail") if self.applicable else "na"
        return (f"{self.theorem},{_fmt(self.lower)},{_fmt(self.computed)},"
                f"{_fmt(self.upper)},{status},{_fmt(self.slack)}")


def _fmt(x: float) -> str:
    return format(x, ".12g")


def _report(theorem: str, lower: float, computed: float, upper: float,
            tol: float) -> BoundReport:
    passed = (lower - tol <= computed <= upper + tol)
    slack = min(computed - lower, upper - computed)
    return BoundReport(theorem, lower, computed, upper, passed, slack)


def comparison_check(p1: Potential, p2: Potential, m1: float, m2: float,
                     tol: float = DEFAULT_CHECK_TOL) -> BoundReport:
    """p1 >= p2 pointwise forces m2 <= m1; not applicable when the pointwise
    dominance cannot be verified on this class."""
    if not p1.pointwise_geq(p2):
        return BoundReport("comparison", -math.inf, m2, m1, False,
                           math.nan, applicable=False,
                           note="pointwise dominance not verified")
    return _report("comparison", -math.inf, m2, m1, tol)


def perturbation_bounds(base_m: float, mu: Potential) -> tuple[float, float]:
    """Two-sided bound for the perturbed minimum: the value moves down by at
    most the negative mass of ``mu`` and up by at most its positive mass."""
    _, tv_plus, tv_minus = mu.total_variation()
    return base_m - tv_minus, base_m + tv_plus


def delta_closed_form(alpha: float, beta: float) -> float:
    """Exact minimum for constant ``alpha`` plus a point mass ``beta``:
    2*sqrt(alpha) - max(-beta, 0)."""
    if alpha <= 0.0:
        raise ValueError("alpha must be positive")
    return 2.0 * math.sqrt(alpha) - max(-beta, 0.0)


def best_constant(m: float) -> float:
    """Sharp constant of the sup-norm inequality, m**(-1/2); the inequality
    holds iff m > 0."""
    if m <= 0.0:
        raise NoInequalityError(f"no sup-norm inequality: m = {m} <= 0")
    return 1.0 / math.sqrt(m)


def _is_nondecreasing(p: Potential) -> bool:
    vals = p.bounded.region_values
    return all(b >= a for a, b in zip(vals, vals[1:]))


def _is_nonincreasing(p: Potential) -> bool:
    vals = p.bounded.region_values
    return all(b <= a for a, b in zip(vals, vals[1:]))


def nondecreasing_limit(p: Potential) -> float:
    """Closed form 2*sqrt(ess-inf) for a nondecreasing positive bounded
    potential with no measure part; raises when the shape does not apply."""
    if p.atoms or not p.density.is_zero():
        raise ValueError("closed form needs a pure bounded part")
    v0, _ = p.essential_bounds()
    if v0 <= 0.0 or not _is_nondecreasing(p):
        raise ValueError("closed form needs a nondecreasing positive part")
    return 2.0 * math.sqrt(v0)


def _nonnegative_measure(mu: Potential) -> bool:
    return (all(v >= 0.0 for v in mu.density.region_values)
            and all(a.weight >= 0.0 for a in mu.atoms))


def invariance_check(p: Potential, mu: Potential, m_base: float,
                     m_pert: float, tol: float = DEFAULT_CHECK_TOL) -> BoundReport:
    """A nonnegative decaying perturbation leaves the minimum unchanged when
    the base is a monotone positive bounded potential (its outer infimum
    escapes to infinity, where the perturbation is not felt)."""
    v0, _ = p.essential_bounds()
    monotone = _is_nondecreasing(p) or _is_nonincreasing(p)
    if (p.atoms or not p.density.is_zero() or v0 <= 0.0 or not monotone
            or not _nonnegative_measure(mu)):
        return BoundReport("invariance", m_base, m_pert, m_base, False,
                           math.nan, applicable=False,
                           note="preconditions not met")
    return _report("invariance", m_base, m_pert, m_base, tol)
