"""Brute-force verification of bound sharpness, plus synthetic populations.

The closed-form bounds assert that certain extrema of ``E[y(t1) - y(t2)]`` are
attainable.  This module checks those claims independently: it enumerates
every response-function completion on a small outcome grid that satisfies the
declared restrictions, takes exact extrema, and aggregates them across
observed strata.  Strata decouple because the restrictions bind within an
individual's response function only, so the population extrema are the
probability-weighted sums of per-stratum extrema.

Also hosts the seeded data generators used by statistical tests and the demo
pipeline; generators emit both the observable rows and the latent response
functions so that tests can compute ground truth.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from .bounds import BoundInterval
from .lattice import Point, TreatmentLattice, enumerate_diamonds, grid_lattice, leq
from .partition import SublatticeFlags

MAX_POINTS = 10
MAX_GRID = 8
MAX_COMPLETIONS = 2_000_000


class BudgetExceeded(ValueError):
    """Instance too large for exhaustive enumeration."""


class Infeasible(Exception):
    """No response-function completion satisfies the declared restrictions."""


@dataclass(frozen=True)
class Stratum:
    """One observed cell: realized treatment, observed outcome, weight."""

    z: Point
    y_obs: float
    weight: float


@dataclass(frozen=True)
class OracleInstance:
    """A desk-scale enumeration problem.

    ``grid`` optionally fixes the outcome grid shared by all strata (it must
    contain k_lo, k_hi, and every observed value).  When omitted, each stratum
    enumerates over the minimal grid {k_lo, k_hi, y_obs}; the grid-sufficiency
    tests confirm that enlarging the grid never moves the extrema.
    """

    lattice: TreatmentLattice
    k_lo: float
    k_hi: float
    strata: tuple[Stratum, ...]
    flags: tuple[SublatticeFlags, ...] = ()
    monotone: bool = False
    grid: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        if len(self.lattice) > MAX_POINTS:
            raise BudgetExceeded(
                f"lattice has {len(self.lattice)} points, budget is {MAX_POINTS}"
            )
        if self.grid is not None:
            g = sorted(set(self.grid))
            if len(g) > MAX_GRID:
                raise BudgetExceeded(
                    f"outcome grid has {len(g)} values, budget is {MAX_GRID}"
                )
            if self.k_lo not in g or self.k_hi not in g:
                raise ValueError("outcome grid must contain k_lo and k_hi")
            for s in self.strata:
                if s.y_obs not in g and self.k_lo <= s.y_obs <= self.k_hi:
                    raise ValueError(f"observed value {s.y_obs} missing from grid")
            object.__setattr__(self, "grid", tuple(g))

    def stratum_grid(self, y_obs: float) -> tuple[float, ...]:
        if self.grid is not None:
            return self.grid
        return tuple(sorted({self.k_lo, self.k_hi, y_obs}))


def _constraint_masks(
    instance: OracleInstance, values: np.ndarray, lattice: TreatmentLattice
) -> np.ndarray:
    """Feasibility of each enumerated completion (rows of ``values``)."""
    ok = np.ones(values.shape[0], dtype=bool)
    diamonds = {d.id: d for d in enumerate_diamonds(lattice)}
    for f in instance.flags:
        d = diamonds[f.sublattice_id]
        ib = lattice.index(d.bottom)
        il = lattice.index(d.left)
        ir = lattice.index(d.right)
        it = lattice.index(d.top)
        pair_sum = values[:, il] + values[:, ir]
        corner_sum = values[:, it] + values[:, ib]
        if f.spm:
            ok &= pair_sum <= corner_sum + 1e-12
        if f.sbm:
            ok &= pair_sum >= corner_sum - 1e-12
    if instance.monotone:
        pts = lattice.points
        for i, a in enumerate(pts):
            for j, b in enumerate(pts):
                if i != j and leq(a, b) and a != b:
                    ok &= values[:, i] <= values[:, j] + 1e-12
    return ok


@lru_cache(maxsize=4096)
def _enumerate_stratum(
    instance: OracleInstance, z: Point, y_obs: float
) -> np.ndarray:
    """All feasible completions for one stratum, as a value matrix.

    Cached because population extrema query the same strata once per target
    pair; the returned array is treated as read-only.
    """
    lattice = instance.lattice
    if not instance.k_lo <= y_obs <= instance.k_hi:
        raise Infeasible(f"observed outcome {y_obs} outside [{instance.k_lo}, {instance.k_hi}]")
    grid = instance.stratum_grid(y_obs)
    z_idx = lattice.index(z)
    axes: list[Sequence[float]] = []
    total = 1
    for i in range(len(lattice)):
        axis = (y_obs,) if i == z_idx else grid
        axes.append(axis)
        total *= len(axis)
        if total > MAX_COMPLETIONS:
            raise BudgetExceeded(
                f"{total}+ completions for |T|={len(lattice)}, |grid|={len(grid)}"
            )
    values = np.array(list(itertools.product(*axes)), dtype=float)
    feasible = values[_constraint_masks(instance, values, lattice)]
    if feasible.shape[0] == 0:
        raise Infeasible(f"no completion satisfies the restrictions at z={z}")
    return feasible


def stratum_extrema(
    t1: Point, t2: Point, z: Point, y_obs: float, instance: OracleInstance
) -> tuple[float, float]:
    """Exact attainable range of ``y(t1) - y(t2)`` within one stratum."""
    feasible = _enumerate_stratum(instance, z, y_obs)
    diffs = feasible[:, instance.lattice.index(t1)] - feasible[:, instance.lattice.index(t2)]
    return float(diffs.min()), float(diffs.max())


def population_extrema(
    t1: Point, t2: Point, instance: OracleInstance
) -> tuple[float, float]:
    """Attainable range of the population effect, summed over strata.

    Raises ``Infeasible`` when any positive-weight stratum admits no
    completion, which corresponds to an empty closed-form interval.
    """
    lo = 0.0
    hi = 0.0
    for s in instance.strata:
        if s.weight == 0.0:
            continue
        s_lo, s_hi = stratum_extrema(t1, t2, s.z, s.y_obs, instance)
        lo += s_lo * s.weight
        hi += s_hi * s.weight
    return lo, hi


def population_interval(
    t1: Point, t2: Point, instance: OracleInstance
) -> BoundInterval:
    """Population extrema as a bound interval; infeasibility maps to empty."""
    try:
        lo, hi = population_extrema(t1, t2, instance)
    except Infeasible:
        return BoundInterval(lower=np.nan, upper=np.nan, empty=True)
    return BoundInterval.of(lo, hi)


@lru_cache(maxsize=4096)
def _stratum_polytope(
    instance: OracleInstance, z: Point, y_obs: float
) -> tuple[tuple[tuple[float, ...], ...], tuple[tuple[float, float], ...]]:
    """Inequality rows and box for one stratum's continuous feasible set."""
    lattice = instance.lattice
    n = len(lattice)
    rows: list[tuple[float, ...]] = []
    diamonds = {d.id: d for d in enumerate_diamonds(lattice)}
    for f in instance.flags:
        d = diamonds[f.sublattice_id]
        row = [0.0] * n
        row[lattice.index(d.left)] += 1.0
        row[lattice.index(d.right)] += 1.0
        row[lattice.index(d.bottom)] -= 1.0
        row[lattice.index(d.top)] -= 1.0
        if f.spm:
            rows.append(tuple(row))
        if f.sbm:
            rows.append(tuple(-v for v in row))
    if instance.monotone:
        pts = lattice.points
        for i, a in enumerate(pts):
            for j, b in enumerate(pts):
                if i != j and leq(a, b):
                    row = [0.0] * n
                    row[i] = 1.0
                    row[j] = -1.0
                    rows.append(tuple(row))
    box = [(instance.k_lo, instance.k_hi)] * n
    box[lattice.index(z)] = (y_obs, y_obs)
    return tuple(rows), tuple(box)


def stratum_extrema_exact(
    t1: Point, t2: Point, z: Point, y_obs: float, instance: OracleInstance
) -> tuple[float, float]:
    """Attainable range of ``y(t1) - y(t2)`` over the continuous feasible set.

    Solves the stratum problem as a linear program instead of a grid scan.
    This is exact even when the extremal completion needs outcome values away
    from {k_lo, k_hi, y_obs}, which happens once modularity-style equality
    systems chain values across diamonds.  Operates on the declared
    restrictions directly, independent of the flag-entailment closure used by
    the closed-form side.
    """
    from scipy.optimize import linprog

    if not instance.k_lo <= y_obs <= instance.k_hi:
        raise Infeasible(
            f"observed outcome {y_obs} outside [{instance.k_lo}, {instance.k_hi}]"
        )
    rows, box = _stratum_polytope(instance, z, y_obs)
    lattice = instance.lattice
    c = [0.0] * len(lattice)
    c[lattice.index(t1)] += 1.0
    c[lattice.index(t2)] -= 1.0
    a_ub = [list(r) for r in rows] or None
    b_ub = [0.0] * len(rows) if rows else None
    low = linprog(c, A_ub=a_ub, b_ub=b_ub, bounds=list(box), method="highs")
    if low.status == 2:
        raise Infeasible(f"no admissible response function at z={z}")
    high = linprog([-v for v in c], A_ub=a_ub, b_ub=b_ub, bounds=list(box), method="highs")
    if not (low.success and high.success):
        raise RuntimeError(f"stratum solve failed: {low.message} / {high.message}")
    return float(low.fun), float(-high.fun)


def population_extrema_exact(
    t1: Point, t2: Point, instance: OracleInstance
) -> tuple[float, float]:
    """Weighted sum of exact stratum extrema over the observed strata."""
    lo = 0.0
    hi = 0.0
    for s in instance.strata:
        if s.weight == 0.0:
            continue
        s_lo, s_hi = stratum_extrema_exact(t1, t2, s.z, s.y_obs, instance)
        lo += s_lo * s.weight
        hi += s_hi * s.weight
    return lo, hi


# ---------------------------------------------------------------------------
# Synthetic populations.


@dataclass(frozen=True)
class SyntheticPopulation:
    """Observable draw plus the latent response functions behind it.

    ``responses[i, j]`` is individual i's potential outcome at
    ``lattice.points[j]``.  ``z_index[i]`` indexes the realized treatment;
    the realized outcome is ``responses[i, z_index[i]]``.
    """

    lattice: TreatmentLattice
    responses: np.ndarray
    z_index: np.ndarray
    covariates: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def realized_y(self) -> np.ndarray:
        return self.responses[np.arange(len(self.z_index)), self.z_index]

    @property
    def realized_z(self) -> np.ndarray:
        pts = np.array(self.lattice.points, dtype=int)
        return pts[self.z_index]


_TWO_BY_TWO = grid_lattice([[0, 1], [0, 1]])


def _rejection_sample_2x2(
    rng: np.random.Generator, size: int, supermodular: bool, grid_steps: int = 8
) -> np.ndarray:
    """Response functions on two binary treatments with the declared
    curvature, drawn uniformly from a finite outcome grid by rejection."""
    order = _TWO_BY_TWO.points  # (0,0), (0,1), (1,0), (1,1)
    accepted: list[np.ndarray] = []
    count = 0
    while count < size:
        block = rng.integers(0, grid_steps + 1, size=(size * 3, 4)) / grid_steps
        pair = block[:, 1] + block[:, 2]
        corners = block[:, 0] + block[:, 3]
        keep = pair <= corners if supermodular else pair >= corners
        block = block[keep]
        accepted.append(block)
        count += block.shape[0]
    out = np.concatenate(accepted)[:size]
    assert order[0] == (0, 0) and order[3] == (1, 1)
    return out


def _monotone_sample(
    rng: np.random.Generator, size: int, lattice: TreatmentLattice, grid_steps: int = 8
) -> np.ndarray:
    """Weakly increasing response functions: running maxima of iid grid
    draws along the product order."""
    base = rng.integers(0, grid_steps + 1, size=(size, len(lattice))) / grid_steps
    out = base.copy()
    pts = lattice.points
    # The canonical sort is a linear extension, so a single forward sweep
    # accumulating over lower covers yields max over the whole down-set.
    for j, b in enumerate(pts):
        for i, a in enumerate(pts[:j]):
            if leq(a, b):
                out[:, j] = np.maximum(out[:, j], out[:, i])
    return out


# demo treatment space: a binary policy crossed with four intensity levels
DEMO_LATTICE = grid_lattice([[0, 1], [1, 2, 3, 4]])


def _demo_sample(
    rng: np.random.Generator, size: int, scale_levels: np.ndarray
) -> np.ndarray:
    """Responses on the 2 x 4 demo lattice that are weakly increasing and
    submodular on every diamond (the binary-dimension effect shrinks as the
    second dimension rises).

    Construction: draw the treated profile increasing in the second dimension,
    then subtract a nonnegative decreasing effect profile scaled per
    individual; the untreated profile inherits monotonicity automatically.
    All pieces live on a coarse grid so outcomes have small finite support.
    """
    steps = 20
    treated = np.sort(rng.integers(0, steps + 1, size=(size, 4)), axis=1) / steps
    cap = treated[:, :1]  # effect may not exceed the lowest treated level
    effect = (
        -np.sort(-rng.integers(0, steps + 1, size=(size, 4)), axis=1) / steps
    ) * cap
    effect = np.round(effect * steps) / steps  # keep outcomes on the grid
    effect = effect * scale_levels[:, None]
    untreated = treated - effect
    # Canonical point order is (0,1), (0,2), (0,3), (0,4), (1,1), ..., (1,4).
    responses = np.concatenate([untreated, treated], axis=1)
    return responses


def synth_population(
    kind: str,
    size: int,
    seed: int,
) -> SyntheticPopulation:
    """Deterministic synthetic population of the requested kind.

    ``supermodular`` / ``submodular``: two binary treatments, random
    assignment, response functions with the declared curvature.
    ``smtr``: two binary treatments, weakly increasing responses.
    ``mixed``: the 2 x 4 demo population: increasing responses, submodular
    on every diamond, with a covariate ``pct_nonwhite`` whose level scales
    the first-dimension effect (so conditional effects rise with it) and
    selection into treatment that depends on that covariate.
    """
    rng = np.random.default_rng(seed)
    if kind in ("supermodular", "submodular"):
        responses = _rejection_sample_2x2(rng, size, kind == "supermodular")
        z_index = rng.integers(0, 4, size=size)
        return SyntheticPopulation(_TWO_BY_TWO, responses, z_index)
    if kind == "smtr":
        responses = _monotone_sample(rng, size, _TWO_BY_TWO)
        z_index = rng.integers(0, 4, size=size)
        return SyntheticPopulation(_TWO_BY_TWO, responses, z_index)
    if kind == "mixed":
        pct = rng.integers(0, 100, size=size) / 100.0
        # Four covariate bands with effect scale rising across bands.
        band = np.minimum((pct * 4).astype(int), 3)
        scale = (band + 1) / 4.0
        responses = _demo_sample(rng, size, scale)
        commercial = (rng.random(size) < 0.25 + 0.5 * pct).astype(int)
        density = rng.integers(0, 4, size=size)
        z_index = commercial * 4 + density
        return SyntheticPopulation(
            DEMO_LATTICE,
            responses,
            z_index,
            covariates={"pct_nonwhite": pct},
        )
    raise ValueError(f"unknown population kind {kind!r}")
