"""Instrument-based bounds: covariates whose conditional effects are monotone.

A supermodular instrument is a covariate along which conditional average
treatment effects are weakly increasing; cells at or below the target level
then sharpen the lower bound and cells at or above it the upper bound.  The
within-cell building blocks are the worst-case conditional potential-outcome
bounds, or the full shape-restriction machinery when combining with declared
diamond restrictions and monotone response.

Cells are indexed by the level of one instrument column (optionally binned),
holding any remaining conditioning covariates fixed; all sup/inf over levels
are max/min over the finite observed support.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np

from .bounds import (
    BoundInterval,
    CellStats,
    OutcomeBounds,
    ate_bounds,
    no_assumption_ate_bounds,
)
from .lattice import Point, TreatmentLattice
from .partition import SublatticeFlags, classify, entailed_flags

logger = logging.getLogger(__name__)

Direction = Literal["supermodular", "submodular", "modular"]


class EmptyCell(ValueError):
    """A conditioning cell with no observations."""


@dataclass(frozen=True)
class InstrumentSpec:
    """How to slice the sample along one instrument covariate.

    ``bin_edges`` (optional, sorted) converts a numeric column into level
    codes 0..len(edges) via right-open binning; otherwise levels are the
    sorted distinct observed values.  ``cell`` pins the remaining
    conditioning covariates to fixed values; rows outside the cell are
    excluded before anything else happens.
    """

    column: str
    direction: Direction = "supermodular"
    bin_edges: tuple[float, ...] | None = None
    cell: tuple[tuple[str, float], ...] = ()

    def levels_for(self, values: np.ndarray) -> np.ndarray:
        if self.bin_edges is not None:
            return np.searchsorted(np.asarray(self.bin_edges), values, side="right")
        return values


@dataclass(frozen=True)
class CellSystem:
    """Per-level cell statistics for one instrument within one fixed cell."""

    levels: tuple[float, ...]  # sorted observed support
    stats: tuple[CellStats, ...]
    weights: tuple[float, ...]  # P(level | cell)

    def index(self, level: float) -> int:
        try:
            return self.levels.index(level)
        except ValueError:
            raise EmptyCell(
                f"instrument level {level!r} has no observations; "
                f"observed support is {list(self.levels)}"
            ) from None


def build_cells(
    lattice: TreatmentLattice,
    y: np.ndarray,
    z_index: np.ndarray,
    instrument_values: np.ndarray,
    spec: InstrumentSpec,
    covariates: dict[str, np.ndarray] | None = None,
) -> CellSystem:
    """Group rows by instrument level (within the held-fixed cell)."""
    mask = np.ones(len(y), dtype=bool)
    for name, value in spec.cell:
        if covariates is None or name not in covariates:
            raise EmptyCell(f"conditioning covariate {name!r} not supplied")
        mask &= covariates[name] == value
    if not mask.any():
        raise EmptyCell("held-fixed covariate cell contains no rows")
    y = y[mask]
    z_index = z_index[mask]
    levels = spec.levels_for(instrument_values[mask])
    support = sorted(float(v) for v in np.unique(levels))
    if spec.bin_edges is not None:
        declared = set(range(len(spec.bin_edges) + 1))
        missing = declared - {int(v) for v in support}
        if missing:
            logger.warning(
                "instrument %s: no observations in bins %s; those levels are "
                "skipped in the max/min composition",
                spec.column,
                sorted(missing),
            )
    stats = []
    weights = []
    n_points = len(lattice.points)
    for level in support:
        sel = levels == level
        weights.append(float(sel.sum()) / len(y))
        counts = np.bincount(z_index[sel], minlength=n_points).astype(float)
        probs = counts / counts.sum()
        means: list[float | None] = []
        for j in range(n_points):
            cell_rows = sel & (z_index == j)
            means.append(float(y[cell_rows].mean()) if counts[j] > 0 else None)
        stats.append(
            CellStats(
                lattice=lattice, probs=tuple(float(v) for v in probs), means=tuple(means)
            )
        )
    return CellSystem(levels=tuple(support), stats=tuple(stats), weights=tuple(weights))


def conditional_outcome_bounds(
    t: Point, stats: CellStats, k: OutcomeBounds
) -> tuple[float, float]:
    """Worst-case bounds on E[y(t) | cell] from the within-cell statistics."""
    p = stats.prob(t)
    observed = stats.mean(t) * p if p > 0 else 0.0
    return observed + k.k_lo * (1.0 - p), observed + k.k_hi * (1.0 - p)


def _cell_delta_bounds(
    t1: Point, t2: Point, stats: CellStats, k: OutcomeBounds
) -> BoundInterval:
    """Worst-case conditional effect bounds within one cell."""
    return no_assumption_ate_bounds(t1, t2, stats, k)


def _compose_monotone(
    cell_intervals: Sequence[BoundInterval],
    target_index: int,
    increasing: bool,
) -> BoundInterval:
    """Max/min composition for effects monotone across ordered cells.

    With conditional effects weakly increasing in the level, every cell at or
    below the target supplies a lower bound and every cell at or above it an
    upper bound; ``increasing=False`` mirrors the roles.
    """
    n = len(cell_intervals)
    if increasing:
        below = range(0, target_index + 1)
        above = range(target_index, n)
    else:
        below = range(target_index, n)
        above = range(0, target_index + 1)
    lower = max(cell_intervals[i].lower for i in below)
    upper = min(cell_intervals[i].upper for i in above)
    empty = lower > upper or any(cell_intervals[i].empty for i in range(n))
    return BoundInterval(lower=lower, upper=upper, empty=empty)


def supermod_iv_ate_bounds(
    t1: Point,
    t2: Point,
    cells: CellSystem,
    k: OutcomeBounds,
    target_level: float,
    direction: Direction = "supermodular",
) -> BoundInterval:
    """Conditional effect bounds at one instrument level.

    Uses only the within-cell worst-case bounds plus the monotonicity of
    conditional effects in the level.  A modular instrument (effects constant
    across levels) intersects both directions; an empty intersection
    falsifies the declaration.
    """
    idx = cells.index(target_level)
    intervals = [_cell_delta_bounds(t1, t2, s, k) for s in cells.stats]
    if direction == "supermodular":
        return _compose_monotone(intervals, idx, increasing=True)
    if direction == "submodular":
        return _compose_monotone(intervals, idx, increasing=False)
    up = _compose_monotone(intervals, idx, increasing=True)
    down = _compose_monotone(intervals, idx, increasing=False)
    lower = max(up.lower, down.lower)
    upper = min(up.upper, down.upper)
    return BoundInterval(lower=lower, upper=upper, empty=lower > upper or up.empty or down.empty)


def supermod_iv_po_bounds(
    t1: Point,
    t2: Point,
    cells: CellSystem,
    k: OutcomeBounds,
    target_level: float,
    which: Point,
) -> BoundInterval:
    """Bounds on a conditional average potential outcome under the instrument.

    The effect bounds shift the other arm's worst-case bounds; the composite
    never tightens the effect bounds themselves, only the outcome levels.
    ``which`` selects the arm (must be ``t1`` or ``t2``).
    """
    idx = cells.index(target_level)
    b1 = [conditional_outcome_bounds(t1, s, k) for s in cells.stats]
    b2 = [conditional_outcome_bounds(t2, s, k) for s in cells.stats]
    sup_term = max(b1[i][0] - b2[i][1] for i in range(0, idx + 1))
    inf_term = min(b1[i][1] - b2[i][0] for i in range(idx, len(cells.stats)))
    if which == t1:
        lower = max(b1[idx][0], sup_term + b2[idx][0])
        upper = min(b1[idx][1], inf_term + b2[idx][1])
    elif which == t2:
        lower = max(b2[idx][0], b1[idx][0] - inf_term)
        upper = min(b2[idx][1], b1[idx][1] - sup_term)
    else:
        raise ValueError("which must be one of the two target treatments")
    return BoundInterval.of(lower, upper)


def combined_iv_shape_bounds(
    t1: Point,
    t2: Point,
    cells: CellSystem,
    lattice: TreatmentLattice,
    flags: tuple[SublatticeFlags, ...],
    k: OutcomeBounds,
    target_level: float,
    monotone: bool = False,
    direction: Direction = "supermodular",
) -> BoundInterval:
    """Instrument composition applied to within-cell shape-restriction bounds.

    Each cell's effect interval comes from the full diamond/monotone
    machinery; the instrument then takes the max of lower bounds over levels
    on one side of the target and the min of upper bounds on the other.
    """
    idx = cells.index(target_level)
    closed = entailed_flags(lattice, flags)
    partition = classify(t1, t2, lattice, closed)
    intervals = [
        ate_bounds(t1, t2, s, partition, k, monotone=monotone) for s in cells.stats
    ]
    if direction == "supermodular":
        return _compose_monotone(intervals, idx, increasing=True)
    if direction == "submodular":
        return _compose_monotone(intervals, idx, increasing=False)
    up = _compose_monotone(intervals, idx, increasing=True)
    down = _compose_monotone(intervals, idx, increasing=False)
    lower = max(up.lower, down.lower)
    upper = min(up.upper, down.upper)
    return BoundInterval(lower=lower, upper=upper, empty=lower > upper or up.empty or down.empty)


SELECTION_NOTE = (
    "selection-monotonicity bounds use the realized target treatments as a "
    "two-level instrument; the form is analogous to the supermodular-"
    "instrument bounds rather than a stated sharp result"
)


def supermod_selection_bounds(
    t1: Point,
    t2: Point,
    lattice: TreatmentLattice,
    y: np.ndarray,
    z_index: np.ndarray,
    k: OutcomeBounds,
) -> BoundInterval:
    """Population effect bounds under supermodular treatment selection.

    The assumption orders the conditional effect across the two realized
    target cells (those who chose the higher treatment gain at least as much
    as those who chose the lower one).  Implemented by treating membership of
    {z == t2, z == t1} as a two-level instrument: the low cell's upper bound
    and the high cell's lower bound borrow from the opposite cell.  Rows
    realized elsewhere carry the worst-case width; the assumption is silent
    about them.
    """
    i1 = lattice.index(t1)
    i2 = lattice.index(t2)
    n = len(y)
    low_mask = z_index == i2
    high_mask = z_index == i1
    lo_total = 0.0
    hi_total = 0.0
    falsified = False
    width = k.k_hi - k.k_lo

    cell_bounds = {}
    for name, mask, own_arm in (("low", low_mask, t2), ("high", high_mask, t1)):
        if not mask.any():
            continue
        mean = float(y[mask].mean())
        if not k.contains(mean):
            falsified = True
        if own_arm == t2:
            # only the lower arm observed: effect in [k_lo - mean, k_hi - mean]
            cell_bounds[name] = (k.k_lo - mean, k.k_hi - mean, mask.sum() / n)
        else:
            cell_bounds[name] = (mean - k.k_hi, mean - k.k_lo, mask.sum() / n)

    if "low" in cell_bounds and "high" in cell_bounds:
        lo_l, hi_l, w_l = cell_bounds["low"]
        lo_h, hi_h, w_h = cell_bounds["high"]
        low_iv = (lo_l, min(hi_l, hi_h))
        high_iv = (max(lo_l, lo_h), hi_h)
        if low_iv[0] > low_iv[1] or high_iv[0] > high_iv[1]:
            falsified = True
        lo_total += low_iv[0] * w_l + high_iv[0] * w_h
        hi_total += low_iv[1] * w_l + high_iv[1] * w_h
    else:
        for lo_c, hi_c, w_c in cell_bounds.values():
            lo_total += lo_c * w_c
            hi_total += hi_c * w_c

    other_weight = 1.0 - low_mask.mean() - high_mask.mean()
    lo_total += -width * other_weight
    hi_total += width * other_weight
    interval = BoundInterval.of(lo_total, hi_total, note=SELECTION_NOTE)
    if falsified and not interval.empty:
        interval = BoundInterval(lower=lo_total, upper=hi_total, empty=True, note=SELECTION_NOTE)
    return interval
