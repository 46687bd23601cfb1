"""Classification of observed treatments relative to an ordered target pair.

For a target effect contrast between treatments ``t1`` and ``t2`` with
``t2 < t1``, the informativeness of an observation at a third treatment ``t3``
depends on two things: where ``t3`` sits relative to the pair (above both,
below both, flanking one of them, or unrestricted) and which shape
restrictions (supermodularity, submodularity, or both, i.e. modularity)
hold on a four-point sublattice containing all three points.
Crossing the four positions with the three assumption classes, plus a residual
class, yields a thirteen-way partition of ``T \\ {t1, t2}``.  Every pointwise
bound formula downstream is keyed on this label.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum
from functools import lru_cache
from typing import Iterable, Mapping

from .lattice import Diamond, Point, TreatmentLattice, enumerate_diamonds, lt, leq


class PairNotOrdered(ValueError):
    """The target pair must satisfy t2 < t1 in the product order."""


class StratumClass(IntEnum):
    """Label of a third treatment relative to an ordered pair t2 < t1.

    ABOVE:      t2 < t1 < t3
    BELOW:      t3 < t2 < t1
    LOW_FLANK:  t3 < t1 and t3 incomparable to t2
    HIGH_FLANK: t2 < t3 and t3 incomparable to t1
    The suffix records which restriction binds on a shared sublattice:
    MODULAR (both directions), SUPERMODULAR only, or SUBMODULAR only.
    UNRESTRICTED collects everything else (no shared restricted sublattice,
    t3 strictly between the pair, or t3 incomparable to both).
    """

    ABOVE_MODULAR = 1
    ABOVE_SUPERMODULAR = 2
    ABOVE_SUBMODULAR = 3
    BELOW_MODULAR = 4
    BELOW_SUPERMODULAR = 5
    BELOW_SUBMODULAR = 6
    LOW_FLANK_MODULAR = 7
    LOW_FLANK_SUPERMODULAR = 8
    LOW_FLANK_SUBMODULAR = 9
    HIGH_FLANK_MODULAR = 10
    HIGH_FLANK_SUPERMODULAR = 11
    HIGH_FLANK_SUBMODULAR = 12
    UNRESTRICTED = 13


@dataclass(frozen=True)
class SublatticeFlags:
    """Shape restrictions declared on one diamond.

    The effective class is derived: modular iff both flags, supermodular-only
    iff spm and not sbm, submodular-only iff sbm and not spm.
    """

    sublattice_id: int
    spm: bool = False
    sbm: bool = False

    @property
    def modular(self) -> bool:
        return self.spm and self.sbm

    @property
    def spm_only(self) -> bool:
        return self.spm and not self.sbm

    @property
    def sbm_only(self) -> bool:
        return self.sbm and not self.spm


def flags_everywhere(
    lattice: TreatmentLattice, *, spm: bool = False, sbm: bool = False
) -> tuple[SublatticeFlags, ...]:
    """The same (spm, sbm) declaration on every diamond of the lattice."""
    return tuple(
        SublatticeFlags(sublattice_id=d.id, spm=spm, sbm=sbm)
        for d in enumerate_diamonds(lattice)
    )


def merge_flag_sets(
    lattice: TreatmentLattice,
    spm_ids: Iterable[int] = (),
    sbm_ids: Iterable[int] = (),
) -> tuple[SublatticeFlags, ...]:
    """Build one flags record per diamond from separate spm/sbm id sets."""
    spm_set = set(spm_ids)
    sbm_set = set(sbm_ids)
    return tuple(
        SublatticeFlags(sublattice_id=d.id, spm=d.id in spm_set, sbm=d.id in sbm_set)
        for d in enumerate_diamonds(lattice)
    )


def _flag_row(d: Diamond, lattice: TreatmentLattice) -> list[float]:
    """Coefficients of the supermodularity gap y(l)+y(r)-y(b)-y(t)."""
    row = [0.0] * len(lattice)
    row[lattice.index(d.left)] += 1.0
    row[lattice.index(d.right)] += 1.0
    row[lattice.index(d.bottom)] -= 1.0
    row[lattice.index(d.top)] -= 1.0
    return row


@lru_cache(maxsize=512)
def entailed_flags(
    lattice: TreatmentLattice, flags: tuple[SublatticeFlags, ...]
) -> tuple[SublatticeFlags, ...]:
    """Restrictions that hold on every diamond given the declared ones.

    Declarations on overlapping diamonds imply restrictions elsewhere (summing
    the inequalities of two stacked diamonds restricts the diamond spanned by
    their far corners; a pair of modular diamonds can pin a third by
    subtraction).  Classifying with only the literal declarations would
    silently drop that information and yield valid but non-sharp bounds, so
    the bound layer classifies against this closure.

    Entailment is decided exactly by linear programming: a restriction holds
    on a diamond iff the worst-case sign of its gap over all response
    functions consistent with the declared system is nonpositive.  The gap
    rows are balanced, so the outcome box does not matter and the unit box is
    used.
    """
    from scipy.optimize import linprog

    diamonds = enumerate_diamonds(lattice)
    declared_rows: list[list[float]] = []
    for f in flags:
        d = diamonds[f.sublattice_id]
        row = _flag_row(d, lattice)
        if f.spm:
            declared_rows.append(row)
        if f.sbm:
            declared_rows.append([-v for v in row])
    if not declared_rows:
        return ()

    a_ub = declared_rows
    b_ub = [0.0] * len(declared_rows)
    bounds = [(0.0, 1.0)] * len(lattice)

    def entailed(row: list[float]) -> bool:
        # max row.y subject to declared system == -min (-row).y
        res = linprog([-v for v in row], A_ub=a_ub, b_ub=b_ub, bounds=bounds, method="highs")
        if not res.success:
            raise RuntimeError(f"entailment solve failed: {res.message}")
        return -res.fun <= 1e-9

    out = []
    for d in diamonds:
        row = _flag_row(d, lattice)
        spm = entailed(row)
        sbm = entailed([-v for v in row])
        if spm or sbm:
            out.append(SublatticeFlags(sublattice_id=d.id, spm=spm, sbm=sbm))
    return tuple(out)


@dataclass(frozen=True)
class StratumPartition:
    """Complete labelling of T \\ {t1, t2} for one ordered pair."""

    t1: Point
    t2: Point
    assignment: Mapping[Point, StratumClass]

    def label(self, t3: Point) -> StratumClass:
        return self.assignment[t3]


def classify(
    t1: Point,
    t2: Point,
    lattice: TreatmentLattice,
    flags: Iterable[SublatticeFlags] = (),
) -> StratumPartition:
    """Assign every third treatment its stratum class for the pair t2 < t1.

    Diamonds without a flags record carry no restriction.  Within the ABOVE
    and BELOW positions the pair may share several diamonds with ``t3``;
    modularity on one of them (or supermodularity on one and submodularity
    on another) dominates, then supermodular-only, then submodular-only.
    In the flank positions at most one diamond contains all three points, so
    the classes are exclusive by construction.
    """
    if not lt(t2, t1):
        raise PairNotOrdered(f"need t2 < t1, got t2={t2}, t1={t1}")
    if t1 not in lattice or t2 not in lattice:
        raise PairNotOrdered(f"pair ({t1}, {t2}) not contained in the lattice")

    diamonds = enumerate_diamonds(lattice)
    by_id = {f.sublattice_id: f for f in flags}
    # Diamonds containing both targets, bucketed by effective restriction.
    mod_members: list[frozenset[Point]] = []
    spm_members: list[frozenset[Point]] = []
    sbm_members: list[frozenset[Point]] = []
    for d in diamonds:
        if t1 not in d.members or t2 not in d.members:
            continue
        f = by_id.get(d.id)
        if f is None:
            continue
        if f.modular:
            mod_members.append(d.members)
        elif f.spm_only:
            spm_members.append(d.members)
        elif f.sbm_only:
            sbm_members.append(d.members)

    def bucket(t3: Point) -> tuple[bool, bool, bool]:
        in_mod = any(t3 in s for s in mod_members)
        in_spm = any(t3 in s for s in spm_members)
        in_sbm = any(t3 in s for s in sbm_members)
        return in_mod, in_spm, in_sbm

    assignment: dict[Point, StratumClass] = {}
    for t3 in lattice:
        if t3 == t1 or t3 == t2:
            continue
        in_mod, in_spm, in_sbm = bucket(t3)
        if lt(t1, t3):  # t2 < t1 < t3
            if in_mod or (in_spm and in_sbm):
                label = StratumClass.ABOVE_MODULAR
            elif in_spm:
                label = StratumClass.ABOVE_SUPERMODULAR
            elif in_sbm:
                label = StratumClass.ABOVE_SUBMODULAR
            else:
                label = StratumClass.UNRESTRICTED
        elif lt(t3, t2):  # t3 < t2 < t1
            if in_mod or (in_spm and in_sbm):
                label = StratumClass.BELOW_MODULAR
            elif in_spm:
                label = StratumClass.BELOW_SUPERMODULAR
            elif in_sbm:
                label = StratumClass.BELOW_SUBMODULAR
            else:
                label = StratumClass.UNRESTRICTED
        elif lt(t3, t1) and not leq(t3, t2) and not leq(t2, t3):
            # t3 below t1, incomparable to t2
            if in_mod:
                label = StratumClass.LOW_FLANK_MODULAR
            elif in_spm:
                label = StratumClass.LOW_FLANK_SUPERMODULAR
            elif in_sbm:
                label = StratumClass.LOW_FLANK_SUBMODULAR
            else:
                label = StratumClass.UNRESTRICTED
        elif lt(t2, t3) and not leq(t3, t1) and not leq(t1, t3):
            # t3 above t2, incomparable to t1
            if in_mod:
                label = StratumClass.HIGH_FLANK_MODULAR
            elif in_spm:
                label = StratumClass.HIGH_FLANK_SUPERMODULAR
            elif in_sbm:
                label = StratumClass.HIGH_FLANK_SUBMODULAR
            else:
                label = StratumClass.UNRESTRICTED
        else:
            # strictly between the pair, or incomparable to both
            label = StratumClass.UNRESTRICTED
        assignment[t3] = label
    return StratumPartition(t1=t1, t2=t2, assignment=assignment)
