"""Parallel (gamma, tau) sweeps, region extraction and topology comparison."""

import math
import sys
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field
from itertools import combinations
from typing import NamedTuple

import numpy as np
import pandas as pd

from src.config import REFERENCE_RESULTS, validate_range
from src.graph import WeightedGraph
from src.models import get_model, initial_conditions
from src.network import NetworkSystem, SyncConfig, sync_verdicts
from src.theory import EQUAL_REL_TOL, SpectralPair, quotient_compare


def grid_values(bounds) -> tuple[float, ...]:
    """
    Inclusive grid a, a+step, ..., <= b.

    Examples:
        (0.0, 0.2, 0.05) -> (0.0, 0.05, 0.1, 0.15, 0.2)
    """
    start, stop, step = bounds
    validate_range(bounds)
    count = math.floor((stop - start) / step + 1e-9) + 1
    return tuple(float(v) for v in np.round(start + step * np.arange(count), 12))


@dataclass(frozen=True)
class SweepGrid:
    gamma_values: tuple[float, ...]
    tau_values: tuple[float, ...]

    def __post_init__(self):
        for label, values in (('gamma', self.gamma_values), ('tau', self.tau_values)):
            array = np.asarray(values, dtype=float)
            if array.size == 0:
                raise ValueError(f"{label} grid is empty")
            if not np.all(np.isfinite(array)) or np.any(array < 0):
                raise ValueError(f"{label} grid must be finite and nonnegative")
            if np.any(np.diff(array) <= 0):
                raise ValueError(f"{label} grid must be strictly ascending")

    @classmethod
    def from_ranges(cls, gamma_range, tau_range) -> 'SweepGrid':
        return cls(grid_values(gamma_range), grid_values(tau_range))

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.gamma_values), len(self.tau_values)

    @property
    def tau_step(self) -> float:
        if len(self.tau_values) < 2:
            return 0.0
        return float(np.min(np.diff(self.tau_values)))


class ColumnResult(NamedTuple):
    """Verdicts of every gamma at one tau."""

    synchronized: np.ndarray
    diverged: np.ndarray
    max_error: np.ndarray


@dataclass
class RegionMap:
    """Synchronization verdicts over a grid, indexed [gamma][tau]."""

    grid: SweepGrid
    verdicts: np.ndarray
    diverged: np.ndarray
    max_error: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ('verdicts', 'diverged', 'max_error'):
            if getattr(self, name).shape != self.grid.shape:
                raise ValueError(f"{name} shape {getattr(self, name).shape} != grid {self.grid.shape}")

    @property
    def diverged_fraction(self) -> float:
        return float(self.diverged.mean())

    def to_frame(self) -> pd.DataFrame:
        """One row per cell: gamma, tau, synchronized, diverged, max_error."""
        gammas, taus = np.meshgrid(self.grid.gamma_values, self.grid.tau_values, indexing='ij')
        return pd.DataFrame({
            'gamma': gammas.ravel(),
            'tau': taus.ravel(),
            'synchronized': self.verdicts.ravel(),
            'diverged': self.diverged.ravel(),
            'max_error': self.max_error.ravel(),
        })

    @classmethod
    def from_frame(cls, frame: pd.DataFrame, metadata: dict | None = None) -> 'RegionMap':
        """Rebuild a region from the cell table written by to_frame."""
        gammas = tuple(sorted(frame['gamma'].unique()))
        taus = tuple(sorted(frame['tau'].unique()))
        grid = SweepGrid(gammas, taus)
        table = frame.set_index(['gamma', 'tau']).reindex(
            pd.MultiIndex.from_product([gammas, taus], names=['gamma', 'tau'])
        )
        if table.isna().any().any():
            raise ValueError("Cell table does not cover the full grid")
        shape = grid.shape
        return cls(
            grid=grid,
            verdicts=table['synchronized'].to_numpy(dtype=bool).reshape(shape),
            diverged=table['diverged'].to_numpy(dtype=bool).reshape(shape),
            max_error=table['max_error'].to_numpy(dtype=float).reshape(shape),
            metadata=dict(metadata or {}),
        )


@dataclass(frozen=True)
class BoundaryCurve:
    """tau_max per gamma column, with counts of synchronized cells above the first gap."""

    points: tuple[tuple[float, float], ...]
    gamma_indices: tuple[int, ...]
    tau_indices: tuple[int, ...]
    holes: dict
    tau_step: float = 0.0

    def __len__(self) -> int:
        return len(self.points)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(list(self.points), columns=['gamma', 'tau_max'])


class EmpiricalOptimum(NamedTuple):
    gamma_star_emp: float
    tau_star_emp: float
    gamma_index: int
    tau_index: int


class UnimodalityScore(NamedTuple):
    is_unimodal: bool
    violations: int


def evaluate_column(
    graph: WeightedGraph,
    model_name: str,
    gammas: tuple[float, ...],
    tau: float,
    sync: SyncConfig,
    seeds: tuple[int, ...],
    normalize: bool = False,
    h: float | None = None,
    record_stride: int = 10,
) -> ColumnResult:
    """
    Evaluate every gamma at one tau as a single batched integration per seed.

    Multiple seeds combine as AND of verdicts, OR of divergence flags and
    max of errors.
    """
    model = get_model(model_name)
    net = NetworkSystem(model, graph, np.asarray(gammas, dtype=float), tau, normalize=normalize)

    synchronized = np.ones(len(gammas), dtype=bool)
    diverged = np.zeros(len(gammas), dtype=bool)
    max_error = np.zeros(len(gammas))

    for seed in seeds:
        x0 = initial_conditions(model, graph.k, seed)
        try:
            column_sync, error, div = sync_verdicts(net, sync, x0, h=h, record_stride=record_stride)
        except (ValueError, ArithmeticError) as e:
            # Recorded as failed cells; the sweep carries on
            print(f"    Integration failed at tau={tau:g} (seed {seed}): {e}", file=sys.stderr)
            failed = np.ones(len(gammas), dtype=bool)
            return ColumnResult(~failed, failed, np.full(len(gammas), np.inf))
        synchronized &= column_sync
        diverged |= div
        max_error = np.maximum(max_error, error)

    return ColumnResult(synchronized, diverged, max_error)


def run_sweep(
    graph: WeightedGraph,
    model_name: str,
    grid: SweepGrid,
    sync: SyncConfig,
    workers: int = 1,
    seed: int = 0,
    seeds: int = 1,
    normalize: bool = False,
    h: float | None = None,
    record_stride: int = 10,
    completed: dict | None = None,
    on_column=None,
) -> RegionMap:
    """
    Evaluate every (gamma, tau) cell and merge the verdicts into a RegionMap.

    One task is one tau column, so the result does not depend on `workers`.

    Args:
        graph: Network topology
        model_name: Node model registry name
        grid: Sweep grid
        sync: Synchronization detection settings
        workers: Process pool size; 1 runs inline
        seed: First initial-condition seed
        seeds: Number of consecutive seeds combined per cell
        normalize: Max-degree normalize the graph before simulating
        h: Fixed step (default: min(tau/4, 0.01) per column)
        record_stride: Steps between recorded samples in the window
        completed: Already computed columns {tau_index: ColumnResult}, skipped
        on_column: Optional callback(tau_index, ColumnResult) for each new column

    Returns:
        RegionMap: Verdicts indexed [gamma][tau]
    """
    if workers < 1:
        raise ValueError(f"workers must be >= 1, got {workers}")
    if seeds < 1:
        raise ValueError(f"seeds must be >= 1, got {seeds}")

    shape = grid.shape
    verdicts = np.zeros(shape, dtype=bool)
    diverged = np.zeros(shape, dtype=bool)
    max_error = np.zeros(shape)

    def store(tau_index: int, column: ColumnResult):
        verdicts[:, tau_index] = column.synchronized
        diverged[:, tau_index] = column.diverged
        max_error[:, tau_index] = column.max_error

    completed = completed or {}
    for tau_index, column in completed.items():
        store(tau_index, column)

    pending = [i for i in range(len(grid.tau_values)) if i not in completed]
    seed_list = tuple(range(seed, seed + seeds))
    task_args = {
        i: (graph, model_name, grid.gamma_values, grid.tau_values[i], sync,
            seed_list, normalize, h, record_stride)
        for i in pending
    }

    total = len(pending)
    if completed:
        print(f"Resuming: {len(completed)} column(s) already stored, {total} to run", file=sys.stderr)

    def finish(done: int, tau_index: int, column: ColumnResult):
        store(tau_index, column)
        if on_column is not None:
            on_column(tau_index, column)
        print(f"  column {done}/{total} (tau={grid.tau_values[tau_index]:g}) done", file=sys.stderr)

    if workers == 1:
        for done, tau_index in enumerate(pending, start=1):
            finish(done, tau_index, evaluate_column(*task_args[tau_index]))
    else:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            futures = {
                executor.submit(evaluate_column, *args): tau_index
                for tau_index, args in task_args.items()
            }
            for done, future in enumerate(as_completed(futures), start=1):
                finish(done, futures[future], future.result())

    metadata = {
        'graph': graph.name,
        'model': model_name,
        'seed': seed,
        'seeds': seeds,
        'normalize': normalize,
        'h': h,
        'transient': sync.transient,
        'window': sync.window,
        'epsilon': sync.epsilon,
    }
    return RegionMap(grid, verdicts, diverged, max_error, metadata)


def boundary_curve(r: RegionMap) -> BoundaryCurve:
    """
    Largest tau per gamma column such that it and every smaller tau synchronize.

    Synchronized cells above the first desynchronized cell are counted as
    holes; columns whose first cell is desynchronized are omitted.
    """
    points, gamma_indices, tau_indices = [], [], []
    holes = {}

    for i, gamma in enumerate(r.grid.gamma_values):
        column = r.verdicts[i]
        if column.all():
            top = len(column) - 1
        else:
            top = int(np.argmin(column)) - 1

        above = int(column[top + 1:].sum())
        if above:
            holes[i] = above
        if top < 0:
            continue

        points.append((gamma, r.grid.tau_values[top]))
        gamma_indices.append(i)
        tau_indices.append(top)

    return BoundaryCurve(
        points=tuple(points),
        gamma_indices=tuple(gamma_indices),
        tau_indices=tuple(tau_indices),
        holes=holes,
        tau_step=r.grid.tau_step,
    )


def empirical_optimum(r: RegionMap) -> EmpiricalOptimum | None:
    """Boundary point with the largest tau_max (smallest gamma on ties); None if empty."""
    curve = boundary_curve(r)
    if not curve.points:
        return None

    best = 0
    for position in range(1, len(curve.points)):
        if curve.points[position][1] > curve.points[best][1]:
            best = position

    gamma, tau = curve.points[best]
    return EmpiricalOptimum(gamma, tau, curve.gamma_indices[best], curve.tau_indices[best])


def unimodality_score(curve, tol: float | None = None) -> UnimodalityScore:
    """
    Check that tau_max rises then falls along gamma.

    A fall counts once tau_max drops more than `tol` below the running peak;
    a later rise of more than `tol` above the running trough is a violation.
    The default tolerance is one tau grid step.

    Raises:
        ValueError: If the curve has fewer than 3 points
    """
    if isinstance(curve, BoundaryCurve):
        if tol is None:
            tol = curve.tau_step
        points = curve.points
    else:
        points = tuple(curve)
    tol = 0.0 if tol is None else tol

    if len(points) < 3:
        raise ValueError(f"Unimodality needs at least 3 boundary points, got {len(points)}")

    values = [tau for _, tau in points]
    peak = values[0]
    trough = None
    violations = 0

    for value in values[1:]:
        if trough is None:
            if value > peak:
                peak = value
            elif value < peak - tol - 1e-12:
                trough = value
        elif value < trough:
            trough = value
        elif value > trough + tol + 1e-12:
            violations += 1
            peak = value
            trough = None

    return UnimodalityScore(violations == 0, violations)


@dataclass(frozen=True)
class TopologyResult:
    """Empirical optimum and spectrum of one swept topology."""

    name: str
    optimum: EmpiricalOptimum | None
    spectral: SpectralPair
    tau_step: float = 0.0


def _tau_tolerance(a: TopologyResult, b: TopologyResult, relative: float) -> float:
    step = max(a.tau_step, b.tau_step)
    return max(2.0 * step, relative * max(a.optimum.tau_star_emp, b.optimum.tau_star_emp))


def compare_topologies(results: list[TopologyResult], relative: float = 0.1) -> dict:
    """
    Tabulate optima against spectra and check the quotient predictions pairwise.

    Checks per pair: equal quotient gives equal tau* (within two grid steps or
    `relative`), a larger quotient gives a strictly smaller tau*. Every q = 1
    topology must attain the largest tau* of the set.

    Returns:
        dict: {'topologies': rows, 'checks': [...], 'passed': bool}
    """
    if len(results) < 2:
        raise ValueError("compare_topologies needs at least two topologies")

    rows = []
    for result in results:
        reference = REFERENCE_RESULTS.get(result.name, {})
        rows.append({
            'name': result.name,
            'gamma_star_emp': result.optimum.gamma_star_emp if result.optimum else None,
            'tau_star_emp': result.optimum.tau_star_emp if result.optimum else None,
            'lambda2': result.spectral.lambda2,
            'lambda_k': result.spectral.lambda_k,
            'quotient': result.spectral.quotient,
            'reference_gamma_star': reference.get('gamma_star'),
            'reference_tau_star': reference.get('tau_star'),
        })

    checks = []
    for a, b in combinations(results, 2):
        prediction = quotient_compare(a.spectral, b.spectral)
        check = {
            'pair': [a.name, b.name],
            'tau_order': prediction.tau_order,
            'gamma_order': prediction.gamma_order,
            'case': prediction.case,
        }

        if a.optimum is None or b.optimum is None:
            check.update(observed=None, passed=False, reason='no synchronized cells')
            checks.append(check)
            continue

        tau_a, tau_b = a.optimum.tau_star_emp, b.optimum.tau_star_emp
        tolerance = _tau_tolerance(a, b, relative)
        if prediction.tau_order == '=':
            passed = abs(tau_a - tau_b) <= tolerance
        elif prediction.tau_order == '<':
            passed = tau_a < tau_b
        else:
            passed = tau_a > tau_b

        check.update(observed=[tau_a, tau_b], passed=bool(passed))
        checks.append(check)

    found = [r for r in results if r.optimum is not None]
    if found:
        best = max(r.optimum.tau_star_emp for r in found)
        for result in found:
            if math.isclose(result.spectral.quotient, 1.0, rel_tol=EQUAL_REL_TOL):
                tolerance = max(2.0 * result.tau_step, relative * best)
                checks.append({
                    'pair': [result.name],
                    'tau_order': 'max',
                    'gamma_order': 'incomparable',
                    'case': 'best-case',
                    'observed': [result.optimum.tau_star_emp, best],
                    'passed': bool(result.optimum.tau_star_emp >= best - tolerance),
                })

    return {
        'topologies': rows,
        'checks': checks,
        'passed': all(check['passed'] for check in checks),
    }


def format_report(report: dict) -> str:
    """Human-readable tables of a compare_topologies report."""
    table = pd.DataFrame(report['topologies']).set_index('name')
    checks = pd.DataFrame(report['checks'])
    if not checks.empty:
        checks['pair'] = checks['pair'].apply(' vs '.join)
    lines = [
        table.to_string(float_format=lambda v: f"{v:.4f}"),
        '',
        checks.to_string(index=False) if not checks.empty else 'No pairwise checks',
        '',
        f"Overall: {'PASS' if report['passed'] else 'FAIL'}",
    ]
    return '\n'.join(lines)
