"""Plug-in estimation and percentile-bootstrap confidence intervals.

Point estimates plug empirical cell frequencies and means into the bound
formulas.  These analog estimators are consistent but biased toward narrow
intervals in finite samples whenever a bound takes a max/min over cells, so
every report carries that caveat; no bias correction is attempted here.

The bootstrap resamples rows with replacement and re-runs the entire bound
procedure per replicate.  Replicate r draws from a generator seeded by
(seed, r), so results are reproducible and independent of evaluation order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .bounds import BoundInterval, CellStats
from .lattice import TreatmentLattice

PLUG_IN_CAVEAT = (
    "plug-in bounds are consistent but biased in finite samples; "
    "the estimated bounds will generally be too narrow"
)


class EmptyDataset(ValueError):
    pass


class UnknownTreatment(ValueError):
    """A row's treatment code is not a member of the declared lattice."""


@dataclass(frozen=True)
class Dataset:
    """Analysis rows: outcome, realized-treatment index, covariate columns.

    ``z_index`` indexes into ``lattice.points``; use ``from_arrays`` to map
    raw treatment-coordinate columns and validate membership.
    """

    lattice: TreatmentLattice
    y: np.ndarray
    z_index: np.ndarray
    covariates: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if len(self.y) == 0:
            raise EmptyDataset("dataset has no rows")
        if len(self.y) != len(self.z_index):
            raise ValueError("outcome and treatment columns differ in length")
        for name, col in self.covariates.items():
            if len(col) != len(self.y):
                raise ValueError(f"covariate {name!r} has the wrong length")

    def __len__(self) -> int:
        return len(self.y)

    @classmethod
    def from_arrays(
        cls,
        lattice: TreatmentLattice,
        y: Sequence[float],
        z_coords: Sequence[Sequence[int]],
        covariates: Mapping[str, Sequence[float]] | None = None,
    ) -> "Dataset":
        y_arr = np.asarray(y, dtype=float)
        index_of = {pt: i for i, pt in enumerate(lattice.points)}
        z_index = np.empty(len(y_arr), dtype=int)
        for row, coords in enumerate(z_coords):
            if any(c != int(c) for c in coords):
                raise UnknownTreatment(
                    f"row {row}: treatment coordinates {tuple(coords)} are not integers"
                )
            pt = tuple(int(c) for c in coords)
            try:
                z_index[row] = index_of[pt]
            except KeyError:
                raise UnknownTreatment(
                    f"row {row}: treatment {pt} is not in the declared lattice"
                ) from None
        covs = {
            name: np.asarray(col, dtype=float)
            for name, col in (covariates or {}).items()
        }
        return cls(lattice=lattice, y=y_arr, z_index=z_index, covariates=covs)

    def resample(self, rng: np.random.Generator) -> "Dataset":
        idx = rng.integers(0, len(self.y), size=len(self.y))
        return Dataset(
            lattice=self.lattice,
            y=self.y[idx],
            z_index=self.z_index[idx],
            covariates={k: v[idx] for k, v in self.covariates.items()},
        )

    def subset(self, mask: np.ndarray) -> "Dataset":
        return Dataset(
            lattice=self.lattice,
            y=self.y[mask],
            z_index=self.z_index[mask],
            covariates={k: v[mask] for k, v in self.covariates.items()},
        )


def cell_stats(data: Dataset, mask: np.ndarray | None = None) -> CellStats:
    """Empirical frequencies and within-cell means per treatment."""
    y = data.y if mask is None else data.y[mask]
    z = data.z_index if mask is None else data.z_index[mask]
    if len(y) == 0:
        raise EmptyDataset("no rows in the requested cell")
    n_points = len(data.lattice.points)
    counts = np.bincount(z, minlength=n_points).astype(float)
    probs = counts / counts.sum()
    sums = np.bincount(z, weights=y, minlength=n_points)
    means: list[float | None] = [
        float(sums[j] / counts[j]) if counts[j] > 0 else None for j in range(n_points)
    ]
    return CellStats(
        lattice=data.lattice, probs=tuple(float(v) for v in probs), means=tuple(means)
    )


@dataclass(frozen=True)
class BoundWithCI:
    """A point interval with percentile-bootstrap bands on each endpoint.

    The outer band [ci_lower_of_lower, ci_upper_of_upper] typically contains
    the point interval; when resampling noise inverts that, the values are
    reported as computed.  ``failed_replicates`` counts draws on which the
    bound procedure was undefined (for example an empty resampled arm);
    ``empty_replicates`` counts draws that produced a falsified interval.
    """

    point: BoundInterval
    ci_lower_of_lower: float
    ci_upper_of_upper: float
    replicates: int
    seed: int
    level: float
    empty_replicates: int = 0
    failed_replicates: int = 0


def replicate_rng(seed: int, replicate: int) -> np.random.Generator:
    """Generator for one replicate, derived deterministically from (seed, r)."""
    return np.random.default_rng(np.random.SeedSequence((seed, replicate)))


def bootstrap_table(
    evaluator: Callable[[Dataset], Mapping[object, BoundInterval]],
    data: Dataset,
    replicates: int,
    seed: int,
    level: float = 0.95,
) -> dict[object, BoundWithCI]:
    """Bootstrap a whole table of bounds on shared resamples.

    ``evaluator`` maps a dataset to keyed intervals; every key sees the same
    replicate datasets, which keeps a multi-row report internally coherent.
    Keys missing from a replicate's result (a bound undefined on that draw)
    count as failed replicates for that key.  Point estimates never depend on
    seed or replicate count.
    """
    if replicates < 1:
        raise ValueError("need at least one replicate")
    if not 0.0 < level < 1.0:
        raise ValueError("confidence level must be inside (0, 1)")
    points = dict(evaluator(data))
    lows: dict[object, list[float]] = {key: [] for key in points}
    highs: dict[object, list[float]] = {key: [] for key in points}
    empties = {key: 0 for key in points}
    for r in range(replicates):
        sample = data.resample(replicate_rng(seed, r))
        values = evaluator(sample)
        for key in points:
            interval = values.get(key)
            if interval is None:
                continue
            if interval.empty:
                empties[key] += 1
            lows[key].append(interval.lower)
            highs[key].append(interval.upper)
    alpha = (1.0 - level) / 2.0
    out: dict[object, BoundWithCI] = {}
    for key, point in points.items():
        if lows[key]:
            ci_lo = float(np.quantile(np.array(lows[key]), alpha))
            ci_hi = float(np.quantile(np.array(highs[key]), 1.0 - alpha))
        else:
            ci_lo = float("nan")
            ci_hi = float("nan")
        out[key] = BoundWithCI(
            point=point,
            ci_lower_of_lower=ci_lo,
            ci_upper_of_upper=ci_hi,
            replicates=replicates,
            seed=seed,
            level=level,
            empty_replicates=empties[key],
            failed_replicates=replicates - len(lows[key]),
        )
    return out


def bootstrap_map(
    procedures: Mapping[object, Callable[[Dataset], BoundInterval]],
    data: Dataset,
    replicates: int,
    seed: int,
    level: float = 0.95,
) -> dict[object, BoundWithCI]:
    """Bootstrap several independent bound procedures on shared resamples."""

    def evaluator(sample: Dataset) -> dict[object, BoundInterval]:
        values: dict[object, BoundInterval] = {}
        for key, proc in procedures.items():
            try:
                values[key] = proc(sample)
            except (EmptyDataset, ValueError):
                continue
        return values

    return bootstrap_table(evaluator, data, replicates, seed, level)


def bootstrap_bounds(
    procedure: Callable[[Dataset], BoundInterval],
    data: Dataset,
    replicates: int,
    seed: int,
    level: float = 0.95,
) -> BoundWithCI:
    """Percentile bootstrap for a single bound procedure."""
    return bootstrap_map({"only": procedure}, data, replicates, seed, level)["only"]
