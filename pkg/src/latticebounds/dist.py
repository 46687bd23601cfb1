"""Dependency bounds on the distribution of a treatment-effect difference.

Under random assignment the marginal outcome distributions of each arm are
point identified, but the joint coupling, and hence the distribution of the
individual effect ``y(t1) - y(t2)``, is not.  The classical dependency
bounds give, at every point, the tightest CDF and quantile envelopes
consistent with the two marginals.  Complementarity restrictions add
first-order stochastic dominance relations between effect distributions on a
diamond, which sharpen the quantile envelopes further.

All distributions here are finite-support step functions; envelope extrema
are computed exactly over atom/breakpoint sets rather than by grid search.

Conventions for step inputs (the published formulas leave one-sided limits
implicit, so these are pinned by exhaustive-coupling tests): the quantile
bound at level q uses the left-continuous generalized inverse of the first
marginal and the right-continuous one of the subtracted marginal, evaluated
at the finitely many atom levels.  At the endpoints q=0 and q=1 both curves
collapse to the extreme support differences min(F1) - max(F2) and
max(F1) - min(F2); interior q carry the sharpness guarantee.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .bounds import BoundInterval
from .lattice import Diamond, Point, TreatmentLattice, enumerate_diamonds
from .partition import SublatticeFlags


class QOutOfRange(ValueError):
    """Quantile level outside [0, 1]."""


@dataclass(frozen=True)
class StepDistribution:
    """Finite-support distribution with exact CDF/quantile evaluation."""

    values: tuple[float, ...]  # sorted ascending, unique
    probs: tuple[float, ...]  # positive, summing to one

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=float)
        p = np.asarray(self.probs, dtype=float)
        if v.size == 0:
            raise ValueError("a step distribution needs at least one atom")
        if v.size != p.size:
            raise ValueError("values and probs must align")
        if np.any(np.diff(v) <= 0):
            raise ValueError("values must be strictly increasing")
        if np.any(p <= 0):
            raise ValueError("atom probabilities must be positive")
        if abs(p.sum() - 1.0) > 1e-9:
            raise ValueError(f"atom probabilities sum to {p.sum()}, expected 1")

    @classmethod
    def from_samples(cls, samples: Iterable[float]) -> "StepDistribution":
        arr = np.asarray(list(samples), dtype=float)
        if arr.size == 0:
            raise ValueError("cannot build a distribution from no samples")
        values, counts = np.unique(arr, return_counts=True)
        return cls(tuple(values), tuple(counts / arr.size))

    @classmethod
    def from_pmf(cls, pmf: Mapping[float, float]) -> "StepDistribution":
        items = sorted((float(v), float(p)) for v, p in pmf.items() if p > 0)
        return cls(tuple(v for v, _ in items), tuple(p for _, p in items))

    @property
    def cum(self) -> np.ndarray:
        return np.cumsum(self.probs)

    def cdf(self, u: float) -> float:
        """P(X <= u)."""
        idx = np.searchsorted(self.values, u, side="right")
        return float(self.cum[idx - 1]) if idx > 0 else 0.0

    def cdf_left(self, u: float) -> float:
        """P(X < u)."""
        idx = np.searchsorted(self.values, u, side="left")
        return float(self.cum[idx - 1]) if idx > 0 else 0.0

    def quantile(self, q: float) -> float:
        """Left-continuous generalized inverse; the minimum support at q=0."""
        if not 0.0 <= q <= 1.0:
            raise QOutOfRange(f"quantile level {q} outside [0, 1]")
        if q <= 0.0:
            return self.values[0]
        idx = int(np.searchsorted(self.cum, q, side="left"))
        idx = min(idx, len(self.values) - 1)
        return self.values[idx]

    def quantile_right(self, s: float) -> float:
        """inf{w : P(X <= w) > s}; the maximum support once s reaches 1."""
        idx = int(np.searchsorted(self.cum, s, side="right"))
        idx = min(idx, len(self.values) - 1)
        return self.values[idx]

    def min(self) -> float:
        return self.values[0]

    def max(self) -> float:
        return self.values[-1]


def wd_cdf_bounds(
    f1: StepDistribution, f2: StepDistribution, w: float
) -> tuple[float, float]:
    """Pointwise envelope of P(X1 - X2 <= w) over all couplings.

    Both extrema are attained on the union of first-marginal atoms and
    second-marginal atoms shifted by w; the lower envelope evaluates the
    subtracted CDF by its left limit, the upper one at the point.
    """
    candidates = list(f1.values) + [b + w for b in f2.values]
    lower = 0.0
    upper_slack = 0.0
    for c in candidates:
        lower = max(lower, f1.cdf(c) - f2.cdf_left(c - w))
        upper_slack = min(upper_slack, f1.cdf(c) - f2.cdf(c - w))
    return lower, 1.0 + upper_slack


def wd_quantile_bounds(
    f1: StepDistribution, f2: StepDistribution, q: float
) -> tuple[float, float]:
    """Envelope of the q-quantile of X1 - X2 over all couplings.

    The upper bound scans the atoms of the first marginal at or above level
    q; the lower bound scans the atoms of the second marginal holding more
    than 1-q mass.  Interior q are sharp against exhaustive couplings; the
    endpoints use the extreme-support convention.
    """
    if not 0.0 <= q <= 1.0:
        raise QOutOfRange(f"quantile level {q} outside [0, 1]")
    if q == 0.0:
        edge = f1.min() - f2.max()
        return edge, edge
    if q == 1.0:
        edge = f1.max() - f2.min()
        return edge, edge
    cum1 = f1.cum
    upper = min(
        f1.values[i] - f2.quantile_right(float(cum1[i]) - q)
        for i in range(len(f1.values))
        if cum1[i] >= q
    )
    cum2 = f2.cum
    lower = max(
        f1.quantile(float(cum2[j]) - (1.0 - q)) - f2.values[j]
        for j in range(len(f2.values))
        if cum2[j] > 1.0 - q
    )
    return lower, upper


def quantile_bound_curve(
    f1: StepDistribution, f2: StepDistribution, grid: Sequence[float]
) -> list[tuple[float, float, float]]:
    """(q, lower, upper) rows over a quantile grid."""
    return [(float(q), *wd_quantile_bounds(f1, f2, float(q))) for q in grid]


def quantile_bound_curves(
    f1: StepDistribution, f2: StepDistribution, grid: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized envelope over a grid of interior quantile levels.

    Same values as ``wd_quantile_bounds`` per level, evaluated for the whole
    grid at once; used by the bootstrap loop.
    """
    qs = np.asarray(grid, dtype=float)
    if np.any((qs <= 0.0) | (qs >= 1.0)):
        raise QOutOfRange("vectorized curves cover interior levels only")
    v1 = np.asarray(f1.values)
    v2 = np.asarray(f2.values)
    cum1 = f1.cum
    cum2 = f2.cum
    # upper: min over atoms i with cum1[i] >= q of v1[i] - Q2plus(cum1[i] - q)
    s = cum1[None, :] - qs[:, None]
    idx = np.minimum(np.searchsorted(cum2, s, side="right"), len(v2) - 1)
    cand = v1[None, :] - v2[idx]
    cand[s < 0.0] = np.inf
    upper = cand.min(axis=1)
    # lower: max over atoms j with cum2[j] > 1 - q of Q1(cum2[j] - (1-q)) - v2[j]
    s2 = cum2[None, :] - (1.0 - qs)[:, None]
    idx1 = np.minimum(np.searchsorted(cum1, s2, side="left"), len(v1) - 1)
    cand2 = v1[idx1] - v2[None, :]
    cand2[s2 <= 0.0] = -np.inf
    lower = cand2.max(axis=1)
    return lower, upper


def default_quantile_grid(extra: Iterable[float] = ()) -> tuple[float, ...]:
    """99 centiles plus any user-requested levels, deduplicated and sorted."""
    grid = {round(0.01 * i, 2) for i in range(1, 100)}
    grid.update(float(q) for q in extra)
    return tuple(sorted(grid))


# ---------------------------------------------------------------------------
# Dominance refinements from complementarity under random assignment.


def _edge_key(hi: Point, lo: Point) -> tuple[Point, Point]:
    return (hi, lo)


def dominance_relations(
    lattice: TreatmentLattice, flags: Iterable[SublatticeFlags]
) -> dict[tuple[Point, Point], set[tuple[Point, Point]]]:
    """Effect pairs stochastically dominated by each effect pair.

    For every diamond with complementarity declared, the lower-edge effect is
    first-order dominated by the opposite upper-edge effect; substitutability
    reverses the roles; a modular declaration yields both directions.  The
    map sends an edge to all edges it dominates, closed transitively.
    """
    diamonds = {d.id: d for d in enumerate_diamonds(lattice)}
    dominated: dict[tuple[Point, Point], set[tuple[Point, Point]]] = {}

    def add(big: tuple[Point, Point], small: tuple[Point, Point]) -> None:
        dominated.setdefault(big, set()).add(small)

    for f in flags:
        d = diamonds[f.sublattice_id]
        lower_edges = [(d.left, d.bottom), (d.right, d.bottom)]
        upper_edges = [(d.top, d.right), (d.top, d.left)]
        for low, up in zip(lower_edges, upper_edges):
            if f.spm:
                add(up, low)
            if f.sbm:
                add(low, up)

    # transitive closure (first-order dominance composes)
    changed = True
    while changed:
        changed = False
        for big, smalls in list(dominated.items()):
            extra = set()
            for s in smalls:
                extra |= dominated.get(s, set())
            if not extra <= smalls:
                dominated[big] = smalls | extra
                changed = True
    return dominated


def refined_quantile_bounds(
    t1: Point,
    t2: Point,
    marginals: Mapping[Point, StepDistribution],
    q: float,
    relations: Mapping[tuple[Point, Point], set[tuple[Point, Point]]] | None = None,
) -> BoundInterval:
    """Quantile bounds for the effect t1 - t2, sharpened by dominance.

    The raw envelope for the pair is intersected with the lower envelopes of
    every effect it dominates and the upper envelopes of every effect that
    dominates it.  An empty result falsifies the declared restrictions
    jointly with random assignment.
    """
    lower, upper = wd_quantile_bounds(marginals[t1], marginals[t2], q)
    if relations:
        key = _edge_key(t1, t2)
        for small in relations.get(key, ()):
            lo_s, _ = wd_quantile_bounds(marginals[small[0]], marginals[small[1]], q)
            lower = max(lower, lo_s)
        for big, smalls in relations.items():
            if key in smalls:
                _, hi_b = wd_quantile_bounds(marginals[big[0]], marginals[big[1]], q)
                upper = min(upper, hi_b)
    return BoundInterval.of(lower, upper)


def diamond_refined_quantile_bounds(
    diamond: Diamond,
    marginals: Mapping[Point, StepDistribution],
    q: float,
    supermodular: bool = True,
) -> dict[tuple[Point, Point], BoundInterval]:
    """Refined bounds for the four edge effects of a single diamond.

    With complementarity, each lower-edge effect is dominated by the opposite
    upper-edge effect, so the upper edges inherit improved lower bounds and
    the lower edges improved upper bounds; substitutability mirrors this.
    """
    lattice = TreatmentLattice(
        dimension=len(diamond.bottom), points=tuple(sorted(diamond.members))
    )
    (own,) = enumerate_diamonds(lattice)
    flags = (
        SublatticeFlags(sublattice_id=own.id, spm=supermodular, sbm=not supermodular),
    )
    relations = dominance_relations(lattice, flags)
    edges = [
        (diamond.top, diamond.left),
        (diamond.top, diamond.right),
        (diamond.left, diamond.bottom),
        (diamond.right, diamond.bottom),
    ]
    return {
        edge: refined_quantile_bounds(edge[0], edge[1], marginals, q, relations)
        for edge in edges
    }


def conditional_quantile_iv_bounds(
    t1: Point,
    t2: Point,
    cell_marginals: Sequence[tuple[float, Mapping[Point, StepDistribution]]],
    q: float,
    target_level: float,
) -> BoundInterval:
    """Quantile-level instrument bounds.

    ``cell_marginals`` lists (level, marginals) sorted by level; conditional
    effect quantiles are assumed weakly increasing in the level, so levels at
    or below the target tighten the lower endpoint and levels at or above it
    the upper one.
    """
    levels = [lvl for lvl, _ in cell_marginals]
    if target_level not in levels:
        raise ValueError(
            f"target level {target_level!r} not among observed levels {levels}"
        )
    idx = levels.index(target_level)
    lowers = []
    uppers = []
    for i, (_, marg) in enumerate(cell_marginals):
        lo, hi = wd_quantile_bounds(marg[t1], marg[t2], q)
        if i <= idx:
            lowers.append(lo)
        if i >= idx:
            uppers.append(hi)
    return BoundInterval.of(max(lowers), min(uppers))
