"""Generalized 1-D potentials: bounded step part, compactly supported step
density, and a finite list of signed point masses.

Everything here is immutable after construction and safe to share across
workers.  The representable class is deliberately small: piecewise-constant
bounded parts with constant tails, piecewise-constant densities with zero
tails, and finitely many atoms.  All later assembly and closed-form solves
are exact on this class.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "StepFunction",
    "Atom",
    "Potential",
    "ThresholdDecompositionError",
    "decompose_threshold",
    "delta_potential",
]


class ThresholdDecompositionError(ValueError):
    """Raised when the over-threshold part of a step function would have
    infinite total variation (a tail exceeds the threshold)."""


def _as_float_tuple(xs) -> tuple[float, ...]:
    return tuple(float(x) for x in xs)


@dataclass(frozen=True)
class StepFunction:
    """Piecewise-constant function on the line.

    ``breakpoints`` are strictly increasing.  With k breakpoints there are
    k - 1 interior pieces (``values``) plus the two tail values; with zero
    breakpoints the function is the constant ``left_tail == right_tail``.
    """

    breakpoints: tuple[float, ...] = ()
    values: tuple[float, ...] = ()
    left_tail: float = 0.0
    right_tail: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "breakpoints", _as_float_tuple(self.breakpoints))
        object.__setattr__(self, "values", _as_float_tuple(self.values))
        object.__setattr__(self, "left_tail", float(self.left_tail))
        object.__setattr__(self, "right_tail", float(self.right_tail))
        bps = self.breakpoints
        if any(not math.isfinite(x) for x in bps):
            raise ValueError("breakpoints must be finite")
        if any(b2 <= b1 for b1, b2 in zip(bps, bps[1:])):
            raise ValueError("breakpoints must be strictly increasing")
        if bps:
            if len(self.values) != len(bps) - 1:
                raise ValueError(
                    f"expected {len(bps) - 1} interior values for "
                    f"{len(bps)} breakpoints, got {len(self.values)}"
                )
        else:
            if self.values:
                raise ValueError("values given without breakpoints")
            if self.left_tail != self.right_tail:
                raise ValueError("constant function needs equal tails")

    @staticmethod
    def constant(v: float) -> "StepFunction":
        return StepFunction((), (), v, v)

    @staticmethod
    def zero() -> "StepFunction":
        return StepFunction.constant(0.0)

    @property
    def region_values(self) -> tuple[float, ...]:
        """Values on the k+1 regions cut out by the k breakpoints."""
        if not self.breakpoints:
            return (self.left_tail,)
        return (self.left_tail,) + self.values + (self.right_tail,)

    def is_zero(self) -> bool:
        return all(v == 0.0 for v in self.region_values)

    def has_compact_support(self) -> bool:
        return self.left_tail == 0.0 and self.right_tail == 0.0

    def __call__(self, x: float) -> float:
        i = int(np.searchsorted(self.breakpoints, x, side="right"))
        return self.region_values[i]

    def values_at(self, xs: np.ndarray) -> np.ndarray:
        """Vectorized evaluation (right-continuous at breakpoints)."""
        idx = np.searchsorted(np.asarray(self.breakpoints), xs, side="right")
        return np.asarray(self.region_values, dtype=float)[idx]

    def essential_bounds(self, lo: float = -math.inf, hi: float = math.inf) -> tuple[float, float]:
        """Exact ess-inf / ess-sup over [lo, hi], from covered piece values."""
        if lo > hi:
            raise ValueError(f"empty interval [{lo}, {hi}]")
        edges = (-math.inf,) + self.breakpoints + (math.inf,)
        vals = self.region_values
        if lo == hi:
            covered = [vals[i] for i in range(len(vals))
                       if edges[i] <= lo <= edges[i + 1]]
        else:
            covered = [vals[i] for i in range(len(vals))
                       if max(lo, edges[i]) < min(hi, edges[i + 1])]
        return min(covered), max(covered)

    def total_variation(self) -> tuple[float, float, float]:
        """(tv, tv_plus, tv_minus) of the function seen as an L1 density.

        Requires compact support; tails carry infinite mass otherwise.
        """
        if not self.has_compact_support():
            raise ValueError("total variation needs zero tails")
        tv_plus = tv_minus = 0.0
        for (b1, b2, v) in self.pieces():
            w = b2 - b1
            if v > 0.0:
                tv_plus += v * w
            else:
                tv_minus += -v * w
        return tv_plus + tv_minus, tv_plus, tv_minus

    def pieces(self):
        """Interior pieces as (left, right, value) triples."""
        for i, v in enumerate(self.values):
            yield self.breakpoints[i], self.breakpoints[i + 1], v

    def shift(self, h: float) -> "StepFunction":
        return StepFunction(tuple(b + h for b in self.breakpoints),
                            self.values, self.left_tail, self.right_tail)

    def refine_to(self, breakpoints: tuple[float, ...]) -> "StepFunction":
        """Same function expressed on a superset of breakpoints."""
        merged = tuple(sorted(set(self.breakpoints) | set(breakpoints)))
        if not merged:
            return self
        mids = [merged[0] - 1.0]
        mids += [(a + b) / 2.0 for a, b in zip(merged, merged[1:])]
        mids.append(merged[-1] + 1.0)
        vals = [self(m) for m in mids]
        return StepFunction(merged, tuple(vals[1:-1]), vals[0], vals[-1])

    def __add__(self, other: "StepFunction") -> "StepFunction":
        merged = tuple(sorted(set(self.breakpoints) | set(other.breakpoints)))
        a = self.refine_to(merged)
        b = other.refine_to(merged)
        return StepFunction(merged,
                            tuple(x + y for x, y in zip(a.values, b.values)),
                            a.left_tail + b.left_tail,
                            a.right_tail + b.right_tail)

    def __neg__(self) -> "StepFunction":
        return StepFunction(self.breakpoints,
                            tuple(-v for v in self.values),
                            -self.left_tail, -self.right_tail)


@dataclass(frozen=True)
class Atom:
    """Signed point mass at ``location`` with ``weight``."""

    location: float
    weight: float

    def __post_init__(self):
        object.__setattr__(self, "location", float(self.location))
        object.__setattr__(self, "weight", float(self.weight))
        if not (math.isfinite(self.location) and math.isfinite(self.weight)):
            raise ValueError("atom location and weight must be finite")


def _merge_atoms(atoms) -> tuple[Atom, ...]:
    acc: dict[float, float] = {}
    for a in atoms:
        a = a if isinstance(a, Atom) else Atom(*a)
        acc[a.location] = acc.get(a.location, 0.0) + a.weight
    return tuple(Atom(loc, w) for loc, w in sorted(acc.items()) if w != 0.0)


@dataclass(frozen=True)
class Potential:
    """V = bounded step part + compactly supported step density + atoms."""

    bounded: StepFunction = field(default_factory=StepFunction.zero)
    density: StepFunction = field(default_factory=StepFunction.zero)
    atoms: tuple[Atom, ...] = ()

    def __post_init__(self):
        if not self.density.has_compact_support():
            raise ValueError("density part must have zero tails")
        object.__setattr__(self, "atoms", _merge_atoms(self.atoms))

    # -- constructors -------------------------------------------------

    @staticmethod
    def constant(v: float, atoms=()) -> "Potential":
        return Potential(StepFunction.constant(v), atoms=atoms)

    @staticmethod
    def step(x0: float, left: float, right: float) -> "Potential":
        return Potential(StepFunction((x0,), (), left, right))

    @staticmethod
    def square_well(alpha: float, beta: float, b: float, c: float) -> "Potential":
        """alpha outside (b, c), -beta inside."""
        if not b < c:
            raise ValueError("well needs b < c")
        return Potential(StepFunction((b, c), (-beta,), alpha, alpha))

    # -- structure ----------------------------------------------------

    def support_points(self) -> list[float]:
        """Locations where the potential deviates from its tails."""
        pts = list(self.bounded.breakpoints) + list(self.density.breakpoints)
        pts += [a.location for a in self.atoms]
        return sorted(set(pts))

    def atom_at(self, x: float) -> float:
        for a in self.atoms:
            if a.location == x:
                return a.weight
        return 0.0

    def step_part(self) -> StepFunction:
        """Bounded part plus density as one step function."""
        return self.bounded + self.density

    def measure_part(self) -> "Potential":
        """Density + atoms with zero bounded part (the perturbation mu)."""
        return Potential(StepFunction.zero(), self.density, self.atoms)

    # -- operations ---------------------------------------------------

    def essential_bounds(self, lo: float = -math.inf, hi: float = math.inf) -> tuple[float, float]:
        """(ess-inf, ess-sup) of the bounded part over [lo, hi]; atoms and
        density are excluded."""
        return self.bounded.essential_bounds(lo, hi)

    def total_variation(self) -> tuple[float, float, float]:
        """(tv, tv_plus, tv_minus) of the measure part (density + atoms)."""
        tv_plus = tv_minus = 0.0
        if not self.density.is_zero():
            _, dp, dm = self.density.total_variation()
            tv_plus += dp
            tv_minus += dm
        for a in self.atoms:
            if a.weight > 0.0:
                tv_plus += a.weight
            else:
                tv_minus += -a.weight
        return tv_plus + tv_minus, tv_plus, tv_minus

    def shift(self, h: float) -> "Potential":
        return Potential(self.bounded.shift(h), self.density.shift(h),
                         tuple(Atom(a.location + h, a.weight) for a in self.atoms))

    def pointwise_geq(self, other: "Potential") -> bool:
        """True iff (self - other) has nonnegative step part everywhere and
        nonnegative atom weights.  Sufficient for the bilinear-form order."""
        diff = self.step_part() + (-other.step_part())
        if any(v < 0.0 for v in diff.region_values):
            return False
        weights: dict[float, float] = {}
        for a in self.atoms:
            weights[a.location] = weights.get(a.location, 0.0) + a.weight
        for a in other.atoms:
            weights[a.location] = weights.get(a.location, 0.0) - a.weight
        return all(w >= 0.0 for w in weights.values())

    def __add__(self, other: "Potential") -> "Potential":
        return Potential(self.bounded + other.bounded,
                         self.density + other.density,
                         self.atoms + other.atoms)

    def __neg__(self) -> "Potential":
        return Potential(-self.bounded, -self.density,
                         tuple(Atom(a.location, -a.weight) for a in self.atoms))

    # -- serialization (config schema) ---------------------------------

    def to_dict(self) -> dict:
        return {
            "bounded": {
                "breakpoints": list(self.bounded.breakpoints),
                "values": list(self.bounded.values),
                "left_tail": self.bounded.left_tail,
                "right_tail": self.bounded.right_tail,
            },
            "density": {
                "breakpoints": list(self.density.breakpoints),
                "values": list(self.density.values),
                "left_tail": 0.0,
                "right_tail": 0.0,
            },
            "atoms": [[a.location, a.weight] for a in self.atoms],
        }

    @staticmethod
    def from_dict(d: dict) -> "Potential":
        """Build from the config schema:

        ``bounded.breakpoints`` (increasing reals), ``bounded.values`` (one
        per gap), ``bounded.left_tail``, ``bounded.right_tail``;
        ``density.*`` with the same shape and zero tails;
        ``atoms = [[location, weight], ...]``.  Unknown keys are rejected.
        """
        def step_from(sub: dict, what: str) -> StepFunction:
            allowed = {"breakpoints", "values", "left_tail", "right_tail"}
            unknown = set(sub) - allowed
            if unknown:
                raise ValueError(f"unknown keys in {what}: {sorted(unknown)}")
            return StepFunction(tuple(sub.get("breakpoints", ())),
                                tuple(sub.get("values", ())),
                                float(sub.get("left_tail", 0.0)),
                                float(sub.get("right_tail", 0.0)))

        unknown = set(d) - {"bounded", "density", "atoms"}
        if unknown:
            raise ValueError(f"unknown potential keys: {sorted(unknown)}")
        bounded = step_from(d.get("bounded", {}), "bounded") if "bounded" in d \
            else StepFunction.zero()
        density = step_from(d.get("density", {}), "density") if "density" in d \
            else StepFunction.zero()
        atoms = tuple(Atom(loc, w) for loc, w in d.get("atoms", ()))
        return Potential(bounded, density, atoms)


def decompose_threshold(f: StepFunction) -> tuple[StepFunction, StepFunction]:
    """Split a step function into a part clipped at modulus 1 and an
    integrable excess: bounded(x) = f(x) where |f(x)| <= 1 else 0, and
    l1(x) = f(x) - bounded(x).  The sum reproduces f piecewise.
    """
    if abs(f.left_tail) > 1.0 or abs(f.right_tail) > 1.0:
        raise ThresholdDecompositionError(
            "tail exceeds threshold 1; excess part would not be integrable")
    keep = [v if abs(v) <= 1.0 else 0.0 for v in f.region_values]
    excess = [v if abs(v) > 1.0 else 0.0 for v in f.region_values]
    bounded = StepFunction(f.breakpoints, tuple(keep[1:-1]), keep[0], keep[-1])
    l1 = StepFunction(f.breakpoints, tuple(excess[1:-1]), excess[0], excess[-1])
    return bounded, l1


def delta_potential(alpha: float, beta: float, location: float = 0.0) -> Potential:
    """Constant alpha plus a point mass beta at ``location``."""
    return Potential.constant(alpha, atoms=(Atom(location, beta),))
