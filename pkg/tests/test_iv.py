import numpy as np
import pytest

from latticebounds.bounds import BoundInterval, CellStats, OutcomeBounds, no_assumption_ate_bounds
from latticebounds.iv import (
    EmptyCell,
    InstrumentSpec,
    _compose_monotone,
    build_cells,
    combined_iv_shape_bounds,
    conditional_outcome_bounds,
    supermod_iv_ate_bounds,
    supermod_iv_po_bounds,
    supermod_selection_bounds,
)
from latticebounds.lattice import grid_lattice
from latticebounds.partition import flags_everywhere

K01 = OutcomeBounds(0.0, 1.0)
TWO_BY_TWO = grid_lattice([[0, 1], [0, 1]])


def make_stats(means, probs):
    order = TWO_BY_TWO.points
    return CellStats.from_mappings(
        TWO_BY_TWO, dict(zip(order, probs)), dict(zip(order, means))
    )


def cells_from_rows(rows, spec=None, lattice=TWO_BY_TWO, covariates=None):
    """rows: list of (y, point, level)."""
    y = np.array([r[0] for r in rows], dtype=float)
    z_index = np.array([lattice.index(r[1]) for r in rows])
    inst = np.array([r[2] for r in rows], dtype=float)
    spec = spec or InstrumentSpec(column="w")
    return build_cells(lattice, y, z_index, inst, spec, covariates)


class TestConditionalOutcomeBounds:
    def test_full_support_cell(self):
        stats = make_stats((None, None, 0.5, None), (0, 0, 1, 0))
        assert conditional_outcome_bounds((1, 0), stats, K01) == (0.5, 0.5)

    def test_empty_arm(self):
        stats = make_stats((0.4, None, None, None), (1, 0, 0, 0))
        assert conditional_outcome_bounds((1, 0), stats, K01) == (0.0, 1.0)

    def test_partial_support(self):
        stats = make_stats((0.9, None, 0.4, None), (0.5, 0, 0.5, 0))
        lo, hi = conditional_outcome_bounds((1, 0), stats, K01)
        assert lo == pytest.approx(0.2)
        assert hi == pytest.approx(0.7)


class TestComposeMonotone:
    CELLS = [BoundInterval.of(-0.2, 0.5), BoundInterval.of(-0.4, 0.9)]

    def test_target_high_cell(self):
        out = _compose_monotone(self.CELLS, 1, increasing=True)
        assert (out.lower, out.upper) == (-0.2, 0.9)

    def test_target_low_cell(self):
        out = _compose_monotone(self.CELLS, 0, increasing=True)
        assert (out.lower, out.upper) == (-0.2, 0.5)

    def test_single_cell_identity(self):
        only = [BoundInterval.of(-0.3, 0.4)]
        out = _compose_monotone(only, 0, increasing=True)
        assert (out.lower, out.upper) == (-0.3, 0.4)

    def test_decreasing_direction_mirrors(self):
        # effects decreasing in the level: every cell at or above the target
        # bounds from below, every cell at or below it bounds from above
        out = _compose_monotone(self.CELLS, 0, increasing=False)
        assert (out.lower, out.upper) == (-0.2, 0.5)
        out = _compose_monotone(self.CELLS, 1, increasing=False)
        assert (out.lower, out.upper) == (-0.4, 0.5)

    def test_crossing_bounds_marked_empty(self):
        cells = [BoundInterval.of(0.6, 0.9), BoundInterval.of(-0.4, 0.2)]
        out = _compose_monotone(cells, 1, increasing=True)
        assert out.empty


def two_level_rows():
    # level 0: quarter of mass on each treatment, means 0.2/0.3/0.6/0.8
    # level 1: mass on (0,0) and (1,1) only, means 0.1/0.9
    rows = []
    for y, pt in [(0.2, (0, 0)), (0.3, (0, 1)), (0.6, (1, 0)), (0.8, (1, 1))]:
        rows.append((y, pt, 0.0))
    for y, pt in [(0.1, (0, 0)), (0.9, (1, 1))]:
        rows.append((y, pt, 1.0))
    return rows


class TestBuildCells:
    def test_levels_and_weights(self):
        cells = cells_from_rows(two_level_rows())
        assert cells.levels == (0.0, 1.0)
        assert cells.weights == pytest.approx((4 / 6, 2 / 6))

    def test_cell_statistics(self):
        cells = cells_from_rows(two_level_rows())
        s0 = cells.stats[0]
        assert s0.prob((1, 1)) == pytest.approx(0.25)
        assert s0.mean((1, 0)) == pytest.approx(0.6)
        s1 = cells.stats[1]
        assert s1.prob((0, 1)) == 0.0
        assert s1.mean((1, 1)) == pytest.approx(0.9)

    def test_binning(self):
        spec = InstrumentSpec(column="w", bin_edges=(0.5,))
        rows = [(0.2, (0, 0), 0.1), (0.4, (1, 1), 0.9)]
        cells = cells_from_rows(rows, spec=spec)
        assert cells.levels == (0.0, 1.0)

    def test_missing_cell_covariate_rejected(self):
        spec = InstrumentSpec(column="w", cell=(("region", 2.0),))
        with pytest.raises(EmptyCell):
            cells_from_rows(two_level_rows(), spec=spec)

    def test_cell_filter_applied(self):
        spec = InstrumentSpec(column="w", cell=(("region", 1.0),))
        rows = two_level_rows()
        region = np.array([1.0, 1.0, 1.0, 1.0, 2.0, 2.0])
        y = np.array([r[0] for r in rows])
        z_index = np.array([TWO_BY_TWO.index(r[1]) for r in rows])
        inst = np.array([r[2] for r in rows])
        cells = build_cells(TWO_BY_TWO, y, z_index, inst, spec, {"region": region})
        assert cells.levels == (0.0,)


class TestSupermodIvAteBounds:
    def test_matches_manual_composition(self):
        cells = cells_from_rows(two_level_rows())
        manual = [
            no_assumption_ate_bounds((1, 0), (0, 0), s, K01) for s in cells.stats
        ]
        for target, expected in ((0.0, 0), (1.0, 1)):
            out = supermod_iv_ate_bounds((1, 0), (0, 0), cells, K01, target)
            lower = max(iv.lower for iv in manual[: expected + 1])
            upper = min(iv.upper for iv in manual[expected:])
            assert out.lower == pytest.approx(lower)
            assert out.upper == pytest.approx(upper)

    def test_single_cell_is_within_cell_bounds(self):
        rows = [(r, pt, 0.0) for r, pt, _ in two_level_rows()]
        cells = cells_from_rows(rows)
        out = supermod_iv_ate_bounds((1, 0), (0, 0), cells, K01, 0.0)
        within = no_assumption_ate_bounds((1, 0), (0, 0), cells.stats[0], K01)
        assert (out.lower, out.upper) == (within.lower, within.upper)

    def test_unknown_target_level_rejected(self):
        cells = cells_from_rows(two_level_rows())
        with pytest.raises(EmptyCell):
            supermod_iv_ate_bounds((1, 0), (0, 0), cells, K01, 2.0)

    def test_monotone_tightening_in_target_level(self):
        cells = cells_from_rows(two_level_rows())
        low = supermod_iv_ate_bounds((1, 0), (0, 0), cells, K01, 0.0)
        high = supermod_iv_ate_bounds((1, 0), (0, 0), cells, K01, 1.0)
        assert low.lower <= high.lower
        assert low.upper <= high.upper

    def test_modular_is_intersection(self):
        cells = cells_from_rows(two_level_rows())
        up = supermod_iv_ate_bounds((1, 0), (0, 0), cells, K01, 0.0, "supermodular")
        down = supermod_iv_ate_bounds((1, 0), (0, 0), cells, K01, 0.0, "submodular")
        both = supermod_iv_ate_bounds((1, 0), (0, 0), cells, K01, 0.0, "modular")
        assert both.lower == max(up.lower, down.lower)
        assert both.upper == min(up.upper, down.upper)


class TestSupermodIvPoBounds:
    def test_single_cell_reduces_to_within_cell_po_bounds(self):
        rows = [(r, pt, 0.0) for r, pt, _ in two_level_rows()]
        cells = cells_from_rows(rows)
        out = supermod_iv_po_bounds((1, 0), (0, 0), cells, K01, 0.0, which=(1, 0))
        lo, hi = conditional_outcome_bounds((1, 0), cells.stats[0], K01)
        assert (out.lower, out.upper) == (lo, hi)
        out2 = supermod_iv_po_bounds((1, 0), (0, 0), cells, K01, 0.0, which=(0, 0))
        lo2, hi2 = conditional_outcome_bounds((0, 0), cells.stats[0], K01)
        assert (out2.lower, out2.upper) == (lo2, hi2)

    def test_two_cell_composition_hand_computed(self):
        cells = cells_from_rows(two_level_rows())
        b1 = [conditional_outcome_bounds((1, 0), s, K01) for s in cells.stats]
        b2 = [conditional_outcome_bounds((0, 0), s, K01) for s in cells.stats]
        idx = 1
        sup_term = max(b1[i][0] - b2[i][1] for i in (0, 1))
        inf_term = b1[1][1] - b2[1][0]
        expected_lower = max(b1[1][0], sup_term + b2[1][0])
        expected_upper = min(b1[1][1], inf_term + b2[1][1])
        out = supermod_iv_po_bounds((1, 0), (0, 0), cells, K01, 1.0, which=(1, 0))
        assert out.lower == pytest.approx(expected_lower)
        assert out.upper == pytest.approx(expected_upper)

    def test_po_difference_contains_effect_interval(self):
        rng = np.random.default_rng(3)
        for _ in range(30):
            rows = []
            for level in (0.0, 1.0, 2.0):
                for pt in TWO_BY_TWO.points:
                    if rng.random() < 0.3:
                        continue
                    rows.append((float(rng.integers(0, 5)) / 4, pt, level))
            if not rows:
                continue
            cells = cells_from_rows(rows)
            for target in cells.levels:
                effect = supermod_iv_ate_bounds((1, 1), (0, 0), cells, K01, target)
                if effect.empty:
                    continue
                po1 = supermod_iv_po_bounds((1, 1), (0, 0), cells, K01, target, (1, 1))
                po2 = supermod_iv_po_bounds((1, 1), (0, 0), cells, K01, target, (0, 0))
                assert po1.lower - po2.upper <= effect.lower + 1e-12
                assert effect.upper <= po1.upper - po2.lower + 1e-12

    def test_invalid_arm_rejected(self):
        cells = cells_from_rows(two_level_rows())
        with pytest.raises(ValueError):
            supermod_iv_po_bounds((1, 0), (0, 0), cells, K01, 0.0, which=(1, 1))


class TestCombinedIvShapeBounds:
    def test_single_cell_equals_shape_bounds(self):
        from latticebounds.bounds import ate_bounds
        from latticebounds.partition import classify

        rows = [(r, pt, 0.0) for r, pt, _ in two_level_rows()]
        cells = cells_from_rows(rows)
        flags = flags_everywhere(TWO_BY_TWO, spm=True)
        out = combined_iv_shape_bounds(
            (1, 0), (0, 0), cells, TWO_BY_TWO, flags, K01, 0.0
        )
        part = classify((1, 0), (0, 0), TWO_BY_TWO, flags)
        direct = ate_bounds((1, 0), (0, 0), cells.stats[0], part, K01)
        assert (out.lower, out.upper) == (direct.lower, direct.upper)

    def test_monotone_keeps_zero_lower_bound(self):
        cells = cells_from_rows(two_level_rows())
        flags = flags_everywhere(TWO_BY_TWO, spm=True)
        for target in cells.levels:
            out = combined_iv_shape_bounds(
                (1, 0), (0, 0), cells, TWO_BY_TWO, flags, K01, target, monotone=True
            )
            assert out.lower == 0.0

    def test_nests_inside_no_assumption_iv(self):
        cells = cells_from_rows(two_level_rows())
        flags = flags_everywhere(TWO_BY_TWO, spm=True)
        for target in cells.levels:
            plain = supermod_iv_ate_bounds((1, 0), (0, 0), cells, K01, target)
            shaped = combined_iv_shape_bounds(
                (1, 0), (0, 0), cells, TWO_BY_TWO, flags, K01, target
            )
            assert plain.lower <= shaped.lower <= shaped.upper <= plain.upper


class TestSelectionBounds:
    def _arrays(self, rows):
        y = np.array([r[0] for r in rows])
        z_index = np.array([TWO_BY_TWO.index(r[1]) for r in rows])
        return y, z_index

    def test_two_cell_population_contains_zero_with_equal_means(self):
        rows = [(0.5, (0, 0), None)] * 3 + [(0.5, (1, 0), None)] * 3
        y, z_index = self._arrays(rows)
        out = supermod_selection_bounds((1, 0), (0, 0), TWO_BY_TWO, y, z_index, K01)
        assert out.lower <= 0.0 <= out.upper
        assert out.note is not None

    def test_single_realized_treatment(self):
        rows = [(0.4, (1, 0), None)] * 4
        y, z_index = self._arrays(rows)
        out = supermod_selection_bounds((1, 0), (0, 0), TWO_BY_TWO, y, z_index, K01)
        assert out.lower == pytest.approx(0.4 - 1.0)
        assert out.upper == pytest.approx(0.4)

    def test_degenerate_case_equals_explicit_instrument_evaluation(self):
        # all mass on the two target cells: treating cell membership as a
        # two-level instrument and weighting the per-cell composites must
        # reproduce the selection bounds
        rows = [(0.5, (0, 0), None)] * 2 + [(0.5, (1, 0), None)] * 2
        y, z_index = self._arrays(rows)
        out = supermod_selection_bounds((1, 0), (0, 0), TWO_BY_TWO, y, z_index, K01)
        w = (z_index == TWO_BY_TWO.index((1, 0))).astype(float)
        cells = build_cells(
            TWO_BY_TWO, y, z_index, w, InstrumentSpec(column="member")
        )
        lower = upper = 0.0
        for level, weight in zip(cells.levels, cells.weights):
            iv = supermod_iv_ate_bounds((1, 0), (0, 0), cells, K01, level)
            lower += iv.lower * weight
            upper += iv.upper * weight
        assert out.lower == pytest.approx(lower)
        assert out.upper == pytest.approx(upper)
        assert out.lower <= 0.0 <= out.upper

    def test_contained_in_no_assumption_interval(self):
        rng = np.random.default_rng(11)
        for _ in range(40):
            rows = [
                (float(rng.integers(0, 5)) / 4, TWO_BY_TWO.points[rng.integers(0, 4)], None)
                for _ in range(rng.integers(2, 20))
            ]
            y, z_index = self._arrays(rows)
            out = supermod_selection_bounds((1, 0), (0, 0), TWO_BY_TWO, y, z_index, K01)
            counts = np.bincount(z_index, minlength=4).astype(float)
            probs = counts / counts.sum()
            means = [
                float(y[z_index == j].mean()) if counts[j] else None for j in range(4)
            ]
            stats = CellStats(TWO_BY_TWO, tuple(probs), tuple(means))
            plain = no_assumption_ate_bounds((1, 0), (0, 0), stats, K01)
            assert plain.lower - 1e-12 <= out.lower
            assert out.upper <= plain.upper + 1e-12
