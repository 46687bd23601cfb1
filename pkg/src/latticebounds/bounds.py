"""Pointwise and population bounds on treatment effects and potential outcomes.

Everything here is plug-in arithmetic over per-treatment cell statistics
(probabilities and conditional outcome means) together with global outcome
bounds.  The informativeness of each cell for the contrast ``y(t1) - y(t2)``
is driven by its stratum class; under semi-monotone treatment response the
lower bound collapses to zero and the upper bound uses the tighter
monotonicity cases.

Conventions:

* A cell with probability zero contributes exactly zero to every aggregate,
  and its conditional mean is never read.
* Intervals are never clamped.  An interval whose lower end exceeds its
  upper end, or an aggregate that uses a cell mean outside the declared
  outcome range, is reported with ``empty=True``: the maintained assumptions
  are jointly inconsistent with the data.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Mapping

from .lattice import Point, TreatmentLattice, incomparable, leq, lt
from .partition import (
    PairNotOrdered,
    StratumClass,
    StratumPartition,
    SublatticeFlags,
    classify,
    entailed_flags,
)


class SameTreatment(ValueError):
    """An effect contrast needs two distinct treatments."""


@dataclass(frozen=True)
class OutcomeBounds:
    """Global bounds assumed to contain every potential outcome."""

    k_lo: float
    k_hi: float

    def __post_init__(self) -> None:
        if not self.k_lo <= self.k_hi:
            raise ValueError(f"need k_lo <= k_hi, got [{self.k_lo}, {self.k_hi}]")

    @property
    def width(self) -> float:
        return self.k_hi - self.k_lo

    def contains(self, y: float) -> bool:
        return self.k_lo <= y <= self.k_hi


@dataclass(frozen=True)
class BoundInterval:
    """Lower/upper pair for a partially identified scalar.

    ``empty=True`` marks falsification of the maintained assumptions; the
    numeric endpoints are still reported as computed.
    """

    lower: float
    upper: float
    empty: bool = False
    note: str | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "lower", float(self.lower))
        object.__setattr__(self, "upper", float(self.upper))
        object.__setattr__(self, "empty", bool(self.empty))

    @classmethod
    def of(cls, lower: float, upper: float, note: str | None = None) -> "BoundInterval":
        return cls(lower=lower, upper=upper, empty=lower > upper, note=note)

    def negated(self) -> "BoundInterval":
        return BoundInterval(
            lower=-self.upper, upper=-self.lower, empty=self.empty, note=self.note
        )

    def with_note(self, note: str) -> "BoundInterval":
        return replace(self, note=note)

    def contains(self, value: float, tol: float = 0.0) -> bool:
        return (not self.empty) and self.lower - tol <= value <= self.upper + tol


@dataclass(frozen=True)
class CellStats:
    """Per-treatment empirical frequencies and conditional outcome means.

    Means are aligned with ``lattice.points``; entries for zero-probability
    cells are ``None`` and must never be read.
    """

    lattice: TreatmentLattice
    probs: tuple[float, ...]
    means: tuple[float | None, ...]

    def __post_init__(self) -> None:
        n = len(self.lattice.points)
        if len(self.probs) != n or len(self.means) != n:
            raise ValueError("probs/means must align with lattice.points")
        total = sum(self.probs)
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"cell probabilities sum to {total}, expected 1")
        for p, m in zip(self.probs, self.means):
            if p < 0:
                raise ValueError("cell probabilities must be nonnegative")
            if p > 0 and m is None:
                raise ValueError("a positive-probability cell needs a mean")

    def prob(self, t: Point) -> float:
        return self.probs[self.lattice.index(t)]

    def mean(self, t: Point) -> float:
        m = self.means[self.lattice.index(t)]
        if m is None:
            raise ValueError(f"conditional mean of empty cell {t} was read")
        return m

    @classmethod
    def from_mappings(
        cls,
        lattice: TreatmentLattice,
        probs: Mapping[Point, float],
        means: Mapping[Point, float],
    ) -> "CellStats":
        pvec = tuple(float(probs.get(t, 0.0)) for t in lattice.points)
        mvec = tuple(
            (float(means[t]) if pvec[i] > 0 else means.get(t))
            for i, t in enumerate(lattice.points)
        )
        return cls(lattice=lattice, probs=pvec, means=mvec)


def no_assumption_po_bounds(
    t: Point, stats: CellStats, k: OutcomeBounds
) -> BoundInterval:
    """Worst-case bounds on the average potential outcome at ``t``.

    The observed cell mean is weighted by its frequency; the unobserved
    remainder is filled with the global outcome bounds.  Shape restrictions
    on effects do not tighten these.
    """
    p = stats.prob(t)
    observed = stats.mean(t) * p if p > 0 else 0.0
    return BoundInterval.of(
        observed + k.k_lo * (1.0 - p),
        observed + k.k_hi * (1.0 - p),
    )


# Interval cases keyed on stratum class, without monotone response: each maps
# to (lower, upper) expressed in terms of the observed value y and the global
# bounds.  Self-strata (z equal to a target) are handled separately.
_SELF_HIGH = "self-high"  # z == t1
_SELF_LOW = "self-low"  # z == t2


def pointwise_region(
    t1: Point,
    t2: Point,
    z: Point,
    y_obs: float,
    label: StratumClass | str,
    k: OutcomeBounds,
    monotone: bool = False,
) -> BoundInterval:
    """Identification region for an individual effect ``y(t1) - y(t2)``.

    ``label`` is the stratum class of ``z`` (or one of the self-markers when
    ``z`` is a target treatment).  With ``monotone=True`` the region follows
    the semi-monotone cases: the lower endpoint is zero and the upper endpoint
    depends only on how ``z`` relates to the pair.
    """
    lo, hi = k.k_lo, k.k_hi
    if monotone:
        if leq(z, t2) or label in (
            StratumClass.HIGH_FLANK_MODULAR,
            StratumClass.HIGH_FLANK_SUPERMODULAR,
        ):
            return BoundInterval.of(0.0, hi - y_obs)
        if leq(t1, z) or label in (
            StratumClass.LOW_FLANK_MODULAR,
            StratumClass.LOW_FLANK_SUBMODULAR,
        ):
            return BoundInterval.of(0.0, y_obs - lo)
        return BoundInterval.of(0.0, hi - lo)

    if label == _SELF_LOW or label in (
        StratumClass.BELOW_MODULAR,
        StratumClass.HIGH_FLANK_MODULAR,
    ):
        return BoundInterval.of(lo - y_obs, hi - y_obs)
    if label == _SELF_HIGH or label in (
        StratumClass.ABOVE_MODULAR,
        StratumClass.LOW_FLANK_MODULAR,
    ):
        return BoundInterval.of(y_obs - hi, y_obs - lo)
    if label in (StratumClass.ABOVE_SUPERMODULAR, StratumClass.LOW_FLANK_SUBMODULAR):
        return BoundInterval.of(lo - hi, y_obs - lo)
    if label in (StratumClass.BELOW_SUBMODULAR, StratumClass.HIGH_FLANK_SUPERMODULAR):
        return BoundInterval.of(lo - hi, hi - y_obs)
    if label in (StratumClass.ABOVE_SUBMODULAR, StratumClass.LOW_FLANK_SUPERMODULAR):
        return BoundInterval.of(y_obs - hi, hi - lo)
    if label in (StratumClass.BELOW_SUPERMODULAR, StratumClass.HIGH_FLANK_SUBMODULAR):
        return BoundInterval.of(lo - y_obs, hi - lo)
    if label == StratumClass.UNRESTRICTED:
        return BoundInterval.of(lo - hi, hi - lo)
    raise ValueError(f"unknown stratum label {label!r}")


def _cell_label(t1: Point, t2: Point, z: Point, partition: StratumPartition):
    if z == t1:
        return _SELF_HIGH
    if z == t2:
        return _SELF_LOW
    return partition.label(z)


def ate_bounds(
    t1: Point,
    t2: Point,
    stats: CellStats,
    partition: StratumPartition,
    k: OutcomeBounds,
    monotone: bool = False,
) -> BoundInterval:
    """Population bounds on ``E[y(t1) - y(t2)]`` for an ordered pair t2 < t1.

    The aggregate is the probability-weighted sum of the pointwise regions,
    cell by cell in the canonical lattice order.  With ``monotone=True`` the
    lower bound is exactly zero.  If any positive-probability cell mean falls
    outside the declared outcome range, the declared assumptions are falsified
    and the interval is flagged empty.
    """
    if partition.t1 != t1 or partition.t2 != t2:
        raise PairNotOrdered("partition was built for a different pair")
    lower = 0.0
    upper = 0.0
    falsified = False
    for i, z in enumerate(stats.lattice.points):
        p = stats.probs[i]
        if p == 0.0:
            continue
        y = stats.mean(z)
        if not k.contains(y):
            falsified = True
        region = pointwise_region(
            t1, t2, z, y, _cell_label(t1, t2, z, partition), k, monotone
        )
        if region.empty:
            falsified = True
        lower += region.lower * p
        upper += region.upper * p
    if monotone:
        lower = 0.0
    interval = BoundInterval.of(lower, upper)
    if falsified and not interval.empty:
        interval = BoundInterval(lower=lower, upper=upper, empty=True)
    return interval


def no_assumption_ate_bounds(
    t1: Point, t2: Point, stats: CellStats, k: OutcomeBounds
) -> BoundInterval:
    """Worst-case bounds on ``E[y(t1) - y(t2)]`` for any distinct pair.

    Works for incomparable pairs as well; equals the stratum-class machinery
    with no restrictions declared when the pair is ordered.
    """
    if t1 == t2:
        raise SameTreatment("effect requires two distinct treatments")
    lower = 0.0
    upper = 0.0
    falsified = False
    for i, z in enumerate(stats.lattice.points):
        p = stats.probs[i]
        if p == 0.0:
            continue
        y = stats.mean(z)
        if not k.contains(y):
            falsified = True
        if z == t1:
            cell_lo, cell_hi = y - k.k_hi, y - k.k_lo
        elif z == t2:
            cell_lo, cell_hi = k.k_lo - y, k.k_hi - y
        else:
            cell_lo, cell_hi = k.k_lo - k.k_hi, k.k_hi - k.k_lo
        lower += cell_lo * p
        upper += cell_hi * p
    interval = BoundInterval.of(lower, upper)
    if falsified and not interval.empty:
        interval = BoundInterval(lower=lower, upper=upper, empty=True)
    return interval


INCOMPARABLE_PAIR_NOTE = (
    "target treatments are incomparable; shape restrictions do not apply "
    "and worst-case bounds are reported"
)


def effect_bounds_any_pair(
    t1: Point,
    t2: Point,
    lattice: TreatmentLattice,
    stats: CellStats,
    k: OutcomeBounds,
    flags: tuple[SublatticeFlags, ...] = (),
    monotone: bool = False,
) -> BoundInterval:
    """Bounds on ``E[y(t1) - y(t2)]`` for an arbitrary distinct pair.

    Ordered pairs dispatch to the stratum-class bounds (negating when
    ``t1 < t2``); incomparable pairs fall back to the worst-case bounds with
    an explanatory note.
    """
    if t1 == t2:
        raise SameTreatment("effect requires two distinct treatments")
    if incomparable(t1, t2):
        return no_assumption_ate_bounds(t1, t2, stats, k).with_note(
            INCOMPARABLE_PAIR_NOTE
        )
    closed = entailed_flags(lattice, tuple(flags))
    if lt(t2, t1):
        partition = classify(t1, t2, lattice, closed)
        return ate_bounds(t1, t2, stats, partition, k, monotone)
    partition = classify(t2, t1, lattice, closed)
    return ate_bounds(t2, t1, stats, partition, k, monotone).negated()
