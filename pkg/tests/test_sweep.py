"""Tests for sweep module."""

import numpy as np
import pytest

from src.graph import builtin_graph
from src.network import SyncConfig
from src.sweep import (
    ColumnResult,
    EmpiricalOptimum,
    RegionMap,
    SweepGrid,
    TopologyResult,
    boundary_curve,
    compare_topologies,
    empirical_optimum,
    format_report,
    grid_values,
    run_sweep,
    unimodality_score,
)
from src.theory import SpectralPair


def region_from(verdicts, gammas=None, taus=None):
    """RegionMap over a small grid from a [gamma][tau] boolean table."""
    verdicts = np.array(verdicts, dtype=bool)
    n_gamma, n_tau = verdicts.shape
    grid = SweepGrid(
        gammas or tuple(float(g) for g in range(1, n_gamma + 1)),
        taus or tuple(round(0.1 * t, 12) for t in range(n_tau)),
    )
    return RegionMap(grid, verdicts, np.zeros_like(verdicts), np.where(verdicts, 0.0, 1.0))


# Short sync settings keep integration fast in tests
QUICK_SYNC = SyncConfig(transient=20.0, window=10.0)


class TestGridValues:
    """Tests for grid_values and SweepGrid."""

    def test_inclusive(self):
        """The stop value is included when it lies on the grid."""
        assert grid_values((0.0, 0.2, 0.05)) == (0.0, 0.05, 0.1, 0.15, 0.2)

    def test_no_float_drift(self):
        """Values are rounded to the intended decimals."""
        values = grid_values((0.0, 6.0, 0.05))
        assert len(values) == 121
        assert values[-1] == 6.0
        assert values[3] == 0.15

    def test_single_point(self):
        """start == stop gives one value."""
        assert grid_values((2.0, 2.0, 0.5)) == (2.0,)

    def test_tau_step(self):
        """tau_step is the grid spacing, 0 for one column."""
        assert SweepGrid.from_ranges((1, 2, 1), (0, 1, 0.25)).tau_step == pytest.approx(0.25)
        assert SweepGrid((1.0,), (0.0,)).tau_step == 0.0

    def test_unsorted_rejected(self):
        """Grids must ascend strictly."""
        with pytest.raises(ValueError):
            SweepGrid((2.0, 1.0), (0.0,))


class TestRegionMap:
    """Tests for RegionMap."""

    def test_frame_layout(self):
        """One row per cell, gamma-major."""
        region = region_from([[True, False], [True, True]])
        frame = region.to_frame()
        assert list(frame.columns) == ['gamma', 'tau', 'synchronized', 'diverged', 'max_error']
        assert frame['gamma'].tolist() == [1.0, 1.0, 2.0, 2.0]
        assert frame['synchronized'].tolist() == [True, False, True, True]

    def test_from_frame(self):
        """A cell table rebuilds the same verdicts."""
        region = region_from([[True, False, False], [True, True, False]])
        rebuilt = RegionMap.from_frame(region.to_frame())
        np.testing.assert_array_equal(rebuilt.verdicts, region.verdicts)

    def test_shape_mismatch(self):
        """Arrays must match the grid."""
        grid = SweepGrid((1.0, 2.0), (0.0,))
        with pytest.raises(ValueError):
            RegionMap(grid, np.zeros((3, 1), bool), np.zeros((2, 1), bool), np.zeros((2, 1)))


class TestBoundaryCurve:
    """Tests for boundary_curve and empirical_optimum."""

    def test_contiguous_from_zero(self):
        """tau_max is the last tau of the unbroken run from tau = 0."""
        region = region_from([
            [False, False, False, False],
            [True, True, False, False],
            [True, True, True, False],
            [True, False, False, False],
        ])
        curve = boundary_curve(region)

        assert curve.points == ((2.0, 0.1), (3.0, 0.2), (4.0, 0.0))
        assert curve.gamma_indices == (1, 2, 3)

    def test_holes_are_reported(self):
        """Synchronized cells above the first gap count as holes."""
        region = region_from([[True, False, True, True], [False, True, False, False]])
        curve = boundary_curve(region)

        assert curve.points == ((1.0, 0.0),)
        assert curve.holes == {0: 2, 1: 1}

    def test_full_column(self):
        """A column synchronized everywhere reaches the top of the grid."""
        curve = boundary_curve(region_from([[True, True, True]]))
        assert curve.points == ((1.0, 0.2),)

    def test_optimum_ties_take_smallest_gamma(self):
        """Among equal tau_max the smallest gamma wins."""
        region = region_from([[True, True, False], [True, True, False], [True, False, False]])
        assert empirical_optimum(region) == EmpiricalOptimum(1.0, 0.1, 0, 1)

    def test_no_synchronized_cells(self):
        """An empty region has no optimum."""
        assert empirical_optimum(region_from([[False, False], [False, False]])) is None

    def test_boundary_frame(self):
        """The boundary CSV has columns gamma, tau_max."""
        frame = boundary_curve(region_from([[True, True], [True, False]])).to_frame()
        assert list(frame.columns) == ['gamma', 'tau_max']


class TestUnimodalityScore:
    """Tests for unimodality_score function."""

    def test_rise_then_fall(self):
        """A single peak is unimodal."""
        score = unimodality_score([(1, 0.5), (2, 1.0), (3, 1.5), (4, 1.0), (5, 0.2)])
        assert score.is_unimodal
        assert score.violations == 0

    def test_second_peak(self):
        """Rising again after a fall is a violation."""
        score = unimodality_score([(1, 1.0), (2, 0.2), (3, 1.0), (4, 0.1)])
        assert not score.is_unimodal
        assert score.violations == 1

    def test_tolerance_absorbs_grid_noise(self):
        """Wiggles within one grid step are not violations."""
        score = unimodality_score([(1, 1.0), (2, 0.95), (3, 1.0), (4, 0.5)], tol=0.05)
        assert score.is_unimodal

    def test_too_few_points(self):
        """At least three points are needed."""
        with pytest.raises(ValueError):
            unimodality_score([(1, 1.0), (2, 2.0)])


class TestCompareTopologies:
    """Tests for compare_topologies and format_report."""

    @staticmethod
    def result(name, tau, lambda2, lambda_k, gamma=2.0):
        return TopologyResult(
            name=name,
            optimum=EmpiricalOptimum(gamma, tau, 0, 0),
            spectral=SpectralPair(lambda2, lambda_k),
            tau_step=0.05,
        )

    def test_consistent_results_pass(self):
        """Orderings matching the quotients pass every check."""
        report = compare_topologies([
            self.result('g1', 4.25, 1.0, 1.0),
            self.result('g2', 1.10, 1 / 3, 1.0),
            self.result('g4', 0.33, 0.1464, 0.8536),
        ])
        assert report['passed']
        assert len(report['topologies']) == 3
        assert report['topologies'][0]['reference_tau_star'] == 4.25

    def test_inverted_order_fails(self):
        """A larger quotient with a larger tau* fails."""
        report = compare_topologies([
            self.result('a', 1.0, 1.0, 1.0),
            self.result('b', 2.0, 0.5, 1.0),
        ])
        assert not report['passed']

    def test_equal_quotients_within_tolerance(self):
        """Equal quotients must give equal tau* within two grid steps."""
        report = compare_topologies([
            self.result('g5', 2.55, 0.5, 1.0),
            self.result('g6', 2.50, 0.5, 1.0),
        ])
        pair = report['checks'][0]
        assert pair['tau_order'] == '='
        assert pair['case'] == 'equal-quotient'
        assert pair['passed']

    def test_missing_optimum(self):
        """A topology with no synchronized cells fails its checks."""
        empty = TopologyResult('x', None, SpectralPair(1.0, 1.0))
        report = compare_topologies([empty, self.result('y', 1.0, 0.5, 1.0)])
        assert not report['passed']

    def test_needs_two(self):
        """Comparison needs at least two topologies."""
        with pytest.raises(ValueError):
            compare_topologies([self.result('a', 1.0, 1.0, 1.0)])

    def test_format_report(self):
        """The report renders with an overall verdict."""
        report = compare_topologies([
            self.result('g1', 4.25, 1.0, 1.0),
            self.result('g2', 1.10, 1 / 3, 1.0),
        ])
        text = format_report(report)
        assert 'g1 vs g2' in text
        assert text.endswith('Overall: PASS')


class TestRunSweep:
    """Tests for run_sweep function."""

    @pytest.fixture
    def grid(self):
        return SweepGrid.from_ranges((0.0, 2.0, 2.0), (0.0, 0.1, 0.1))

    def test_shape_and_metadata(self, grid):
        """Every cell is evaluated and the settings are recorded."""
        region = run_sweep(builtin_graph('g1'), 'hindmarsh-rose', grid, QUICK_SYNC)

        assert region.verdicts.shape == (2, 2)
        assert not region.verdicts[0].any()
        assert region.metadata['graph'] == 'g1'
        assert region.metadata['epsilon'] == QUICK_SYNC.epsilon

    def test_no_divergence(self, grid):
        """Coupled Hindmarsh-Rose networks stay bounded in every cell."""
        region = run_sweep(builtin_graph('g4'), 'hindmarsh-rose', grid, QUICK_SYNC)
        assert not region.diverged.any()
        assert region.diverged_fraction == 0.0

    @pytest.mark.parametrize('workers', [4, 8])
    def test_workers_do_not_change_results(self, workers):
        """One process or a pool of any size give identical verdicts and errors."""
        graph = builtin_graph('g1')
        grid = SweepGrid.from_ranges((0.0, 3.0, 1.0), (0.0, 0.3, 0.1))
        inline = run_sweep(graph, 'hindmarsh-rose', grid, QUICK_SYNC, workers=1)
        pooled = run_sweep(graph, 'hindmarsh-rose', grid, QUICK_SYNC, workers=workers)

        np.testing.assert_array_equal(inline.verdicts, pooled.verdicts)
        np.testing.assert_array_equal(inline.diverged, pooled.diverged)
        np.testing.assert_array_equal(inline.max_error, pooled.max_error)

    def test_completed_columns_are_skipped(self, grid):
        """Stored columns are reused and only new ones reach the callback."""
        stored = ColumnResult(np.array([True, True]), np.array([False, False]), np.zeros(2))
        seen = []

        region = run_sweep(
            builtin_graph('g1'), 'hindmarsh-rose', grid, QUICK_SYNC,
            completed={0: stored},
            on_column=lambda tau_index, column: seen.append(tau_index),
        )

        assert seen == [1]
        np.testing.assert_array_equal(region.verdicts[:, 0], [True, True])

    def test_invalid_workers(self, grid):
        """workers must be positive."""
        with pytest.raises(ValueError):
            run_sweep(builtin_graph('g1'), 'hindmarsh-rose', grid, QUICK_SYNC, workers=0)


@pytest.mark.slow
class TestReferenceOrdering:
    """Coarse sweeps reproduce the ordering of the published optima."""

    # tau resolution follows each graph's published tau*
    GRIDS = {
        'g1': SweepGrid.from_ranges((0.5, 12.0, 0.5), (0.0, 6.0, 0.25)),
        'g2': SweepGrid.from_ranges((0.5, 12.0, 0.5), (0.0, 2.0, 0.1)),
        'g4': SweepGrid.from_ranges((0.5, 12.0, 0.5), (0.0, 1.0, 0.05)),
    }

    @pytest.fixture(scope='class')
    def regions(self):
        return {
            name: run_sweep(builtin_graph(name), 'hindmarsh-rose', grid, SyncConfig(), workers=4)
            for name, grid in self.GRIDS.items()
        }

    def test_no_divergence(self, regions):
        """No cell of the reference sweeps diverges."""
        for region in regions.values():
            assert not region.diverged.any()

    def test_tau_star_ordering(self, regions):
        """Larger quotients tolerate shorter delays: g1 > g2 > g4."""
        optima = {name: empirical_optimum(region) for name, region in regions.items()}
        assert all(optimum is not None for optimum in optima.values())
        assert optima['g1'].tau_star_emp > optima['g2'].tau_star_emp > optima['g4'].tau_star_emp

    def test_gamma_star_ordering(self, regions):
        """The optimal coupling grows as lambda2 shrinks: g1 < g2 < g4."""
        optima = {name: empirical_optimum(region) for name, region in regions.items()}
        assert optima['g1'].gamma_star_emp < optima['g2'].gamma_star_emp < optima['g4'].gamma_star_emp

    def test_boundary_is_unimodal(self, regions):
        """Each swept boundary rises then falls along gamma."""
        for region in regions.values():
            assert unimodality_score(boundary_curve(region)).is_unimodal
