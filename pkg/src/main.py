"""Main entry point for delay-sync."""

import argparse
import sys
from pathlib import Path

import numpy as np
import pandas as pd

from src.artifacts import (
    emit_region_artifacts,
    read_json,
    trajectory_frame,
    write_csv,
    write_json,
)
from src.config import ConfigError, RunConfig, build_config, parse_range
from src.database import (
    SessionLocal,
    column_cells,
    get_completed_taus,
    get_or_create_run,
    init_db,
    load_columns,
    upsert_cells,
)
from src.graph import eigenvalues, graph_spectrum, is_connected, laplacian, normalize_max_degree, resolve_graph
from src.models import get_model, initial_conditions
from src.network import NetworkSystem, SyncConfig, boundedness_check, simulate, sync_error
from src.sweep import (
    EmpiricalOptimum,
    SweepGrid,
    TopologyResult,
    boundary_curve,
    compare_topologies,
    empirical_optimum,
    format_report,
    run_sweep,
    unimodality_score,
)
from src.theory import (
    SemipassiveConstants,
    SpectralPair,
    derived_constants,
    gamma_star,
    gamma_tilde,
    in_region,
    phi_curve,
    tau_star,
    tau_star_max,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3

# Settings that determine stored cell values
SWEEP_IDENTITY_KEYS = (
    'graph', 'model', 'normalize', 'gamma_range', 'tau_range', 'h', 'record_stride',
    'transient', 'window', 'epsilon', 'seed', 'seeds',
)


def compute_missing_columns(completed: set[int], n_taus: int) -> list[int]:
    """
    Compute the tau columns still needing evaluation.

    Args:
        completed: Tau indices already fully stored
        n_taus: Number of tau values in the grid

    Returns:
        list: Missing tau indices in ascending order
    """
    return [i for i in range(n_taus) if i not in completed]


def build_parser() -> argparse.ArgumentParser:
    """Argument parser with one subcommand per workflow."""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', type=str, metavar='FILE',
                        help='TOML config, or a metadata JSON from a previous run')
    common.add_argument('--graph', type=str,
                        help='Builtin topology (g1..g7, k2, path3, ring:6, ...) or a graph file')
    common.add_argument('--model', type=str, help='Node model (default: hindmarsh-rose)')
    common.add_argument('--normalize', action='store_true', default=None,
                        help='Scale weights so the largest weighted degree is 1')
    common.add_argument('--eigen-method', type=str, choices=['jacobi', 'eigh'],
                        help='Eigensolver (default: jacobi)')
    common.add_argument('--out', type=str, help='Main output file')

    sync = argparse.ArgumentParser(add_help=False)
    sync.add_argument('--transient', type=float, help='Discarded transient T0 [ms]')
    sync.add_argument('--window', type=float, help='Measurement window W [ms]')
    sync.add_argument('--epsilon', type=float, help='Synchronization threshold')
    sync.add_argument('--h', type=float, help='Integration step (default min(tau/4, 0.01))')
    sync.add_argument('--record-stride', type=int, help='Steps between recorded samples')
    sync.add_argument('--seed', type=int, help='Initial-condition seed')

    sweep = argparse.ArgumentParser(add_help=False)
    sweep.add_argument('--gamma-range', type=str, metavar='A:B:STEP', help='Coupling strength grid')
    sweep.add_argument('--tau-range', type=str, metavar='A:B:STEP', help='Delay grid [ms]')
    sweep.add_argument('--workers', type=int, help='Worker processes (env DELAY_SYNC_WORKERS)')
    sweep.add_argument('--seeds', type=int, help='Seeds per cell; verdicts are AND-ed')

    parser = argparse.ArgumentParser(
        description='delay-sync - synchronization regions of delay-coupled oscillator networks'
    )
    subparsers = parser.add_subparsers(dest='subcommand', required=True)

    subparsers.add_parser('spectrum', parents=[common], help='Laplacian spectrum of a topology')

    simulate_parser = subparsers.add_parser('simulate', parents=[common, sync],
                                            help='Integrate one network')
    simulate_parser.add_argument('--gamma', type=float, help='Coupling strength')
    simulate_parser.add_argument('--tau', type=float, help='Delay [ms]')
    simulate_parser.add_argument('--t-end', type=float, help='Integration horizon [ms]')
    simulate_parser.add_argument('--bound', type=float, help='Boundedness check radius')
    simulate_parser.add_argument('--sync', action='store_true',
                                 help='Report the synchronization verdict of the run')

    sweep_parser = subparsers.add_parser('sweep', parents=[common, sync, sweep],
                                         help='Map the synchronization region')
    sweep_parser.add_argument('--boundary-out', type=str, help='Boundary CSV (gamma,tau_max)')
    sweep_parser.add_argument('--summary-out', type=str, help='Summary JSON')
    sweep_parser.add_argument('--store', action='store_true', default=None,
                              help='Persist cells in the database and resume from it')

    theory_parser = subparsers.add_parser('theory', parents=[common],
                                          help='Closed-form region predictions')
    for name in ('alpha', 'c0', 'c1', 'c2'):
        theory_parser.add_argument(f'--{name}', type=float, help=f'Semipassivity constant {name}')
    theory_parser.add_argument('--lambda2', type=float, help='Smallest nonzero Laplacian eigenvalue')
    theory_parser.add_argument('--lambdak', type=float, help='Largest Laplacian eigenvalue')
    theory_parser.add_argument('--delta-bar', type=float, help='Optional coupling bound delta_bar')
    theory_parser.add_argument('--literal-threshold', action='store_true', default=None,
                               help='Use gamma > gamma\' instead of lambda2*gamma > gamma\'')
    theory_parser.add_argument('--phi-range', type=str, metavar='A:B:STEP',
                               help='Gamma grid of the phi curve')
    theory_parser.add_argument('--gamma', type=float, help='Check region membership at this gamma')
    theory_parser.add_argument('--tau', type=float, help='Check region membership at this tau')

    compare_parser = subparsers.add_parser('compare', parents=[common, sync, sweep],
                                           help='Compare topologies against the quotient predictions')
    compare_parser.add_argument('--graphs', nargs='+', help='Topologies to sweep and compare')
    compare_parser.add_argument('--summary', nargs='+', dest='summaries', metavar='JSON',
                                help='Compare previously written sweep summaries instead')

    return parser


def _load_graph(config: RunConfig):
    graph = resolve_graph(config.graph)
    return normalize_max_degree(graph) if config.normalize else graph


def _sync_config(config: RunConfig) -> SyncConfig:
    return SyncConfig(transient=config.transient, window=config.window, epsilon=config.epsilon)


def run_spectrum(config: RunConfig) -> int:
    """Print the Laplacian spectrum as CSV (index,eigenvalue)."""
    graph = _load_graph(config)
    values = eigenvalues(laplacian(graph), config.eigen_method)
    frame = pd.DataFrame({'index': np.arange(1, len(values) + 1), 'eigenvalue': values})

    if config.out:
        write_csv(config.out, frame, {'config': config.to_dict()})
        print(f"Wrote {config.out}", file=sys.stderr)
    else:
        sys.stdout.write(frame.to_csv(index=False, lineterminator='\n'))

    if is_connected(graph):
        result = graph_spectrum(graph, config.eigen_method)
        print(f"{graph.name}: lambda2={result.lambda2:.4f}, lambda_k={result.lambda_k:.4f}, "
              f"quotient={result.quotient:.4f}", file=sys.stderr)
    else:
        print(f"{graph.name}: graph is disconnected", file=sys.stderr)
    return EXIT_OK


def run_simulate(config: RunConfig) -> int:
    """Integrate one network and optionally judge synchronization."""
    graph = resolve_graph(config.graph)
    model = get_model(config.model)
    net = NetworkSystem(model, graph, config.gamma, config.tau, normalize=config.normalize)
    x0 = initial_conditions(model, graph.k, config.seed)

    print(f"Simulating {graph.name}: gamma={config.gamma:g}, tau={config.tau:g} ms, "
          f"t_end={config.t_end:g} ms", file=sys.stderr)
    traj = simulate(net, x0, t_end=config.t_end, h=config.h, record_stride=config.record_stride)
    diverged = traj.any_diverged

    report = {'h': traj.h, 'tau': traj.tau, 'seed': config.seed,
              'initial_condition': x0.tolist(), 'diverged': diverged}

    if config.sync:
        window = (max(0.0, config.t_end - config.window), config.t_end)
        error = sync_error(traj, window)
        bounded = boundedness_check(traj, config.bound, transient=min(config.transient, config.t_end))
        report.update(max_error=error, synchronized=(not diverged and error < config.epsilon),
                      bounded=bounded)
        print(f"synchronized={report['synchronized']} max_error={error:.6g} bounded={bounded}")

    if config.out:
        write_csv(config.out, trajectory_frame(traj, model), {'config': config.to_dict(), **report})
        print(f"Wrote {len(traj.times)} samples to {config.out}", file=sys.stderr)

    if diverged:
        print("Error: trajectory crossed the divergence guard", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def _sweep_graph(config: RunConfig, graph, grid: SweepGrid):
    """Run (or resume) one sweep, storing columns when config.store is set."""
    sync = _sync_config(config)
    kwargs = dict(
        workers=config.workers,
        seed=config.seed,
        seeds=config.seeds,
        normalize=config.normalize,
        h=config.h,
        record_stride=config.record_stride,
    )

    if not config.store:
        return run_sweep(graph, config.model, grid, sync, **kwargs)

    init_db()
    session = SessionLocal()
    try:
        identity = {key: getattr(config, key) for key in SWEEP_IDENTITY_KEYS}
        identity['graph'] = graph.name
        run = get_or_create_run(session, graph.name, identity)

        n_taus = len(grid.tau_values)
        completed = get_completed_taus(session, run.id, len(grid.gamma_values))
        missing = compute_missing_columns(completed, n_taus)
        print(f"Stored run {run.id}: {n_taus - len(missing)}/{n_taus} column(s) complete",
              file=sys.stderr)

        def store_column(tau_index, column):
            results = upsert_cells(session, run.id, column_cells(grid, tau_index, column))
            if results['updated']:
                print(f"    {results['updated']} stored cell(s) updated", file=sys.stderr)

        stored = load_columns(session, run.id, grid, completed)
        return run_sweep(graph, config.model, grid, sync, completed=stored,
                         on_column=store_column, **kwargs)
    finally:
        session.close()


def _derived_path(out: str, suffix: str) -> str:
    path = Path(out)
    return str(path.with_name(f"{path.stem}_{suffix}"))


def run_sweep_command(config: RunConfig) -> int:
    """Sweep the (gamma, tau) grid and emit region artifacts."""
    graph = resolve_graph(config.graph)
    grid = SweepGrid.from_ranges(parse_range(config.gamma_range), parse_range(config.tau_range))
    print(f"Sweeping {graph.name}: {grid.shape[0]} gamma x {grid.shape[1]} tau cells, "
          f"{config.workers} worker(s)", file=sys.stderr)

    region = _sweep_graph(config, graph, grid)
    curve = boundary_curve(region)
    optimum = empirical_optimum(region)
    unimodality = unimodality_score(curve) if len(curve) >= 3 else None
    spectrum = graph_spectrum(_load_graph(config), config.eigen_method).to_dict()

    if config.out:
        boundary_out = config.boundary_out or _derived_path(config.out, 'boundary.csv')
        summary_out = config.summary_out or _derived_path(config.out, 'summary.json')
        emit_region_artifacts(region, curve, optimum, config.to_dict(), config.out,
                              boundary_out, summary_out, spectrum, unimodality)
        print(f"Wrote {config.out}, {boundary_out}, {summary_out}", file=sys.stderr)

    if optimum is None:
        print("No synchronized cells")
    else:
        print(f"gamma_star_emp={optimum.gamma_star_emp:g} tau_star_emp={optimum.tau_star_emp:g} ms")
    if unimodality is not None:
        print(f"unimodal={unimodality.is_unimodal} violations={unimodality.violations}")

    if region.diverged_fraction > 0.5:
        print(f"Error: {region.diverged_fraction:.0%} of cells diverged", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def run_theory(config: RunConfig) -> int:
    """Print the closed-form constants, optima and optionally the phi curve."""
    constants = SemipassiveConstants(config.alpha, config.c0, config.c1, config.c2)
    d = derived_constants(constants)

    if config.lambda2 is not None or config.lambdak is not None:
        if config.lambda2 is None or config.lambdak is None:
            raise ConfigError("Pass both --lambda2 and --lambdak, or neither to use --graph")
        sp = SpectralPair(config.lambda2, config.lambdak)
    else:
        sp = SpectralPair.from_spectrum(graph_spectrum(_load_graph(config), config.eigen_method))

    values = {
        'gamma_prime': d.gamma_prime,
        'cbar1': d.cbar1,
        'cbar2': d.cbar2,
        'lambda2': sp.lambda2,
        'lambda_k': sp.lambda_k,
        'quotient': sp.quotient,
        'gamma_star': gamma_star(d, sp),
        'gamma_tilde': gamma_tilde(d, constants, sp),
        'tau_star': tau_star(d, sp),
        'tau_star_max': tau_star_max(d),
    }
    for name, value in values.items():
        print(f"{name}={value:.10g}")

    if config.check_region:
        inside = in_region(config.gamma, config.tau, d, sp, config.delta_bar, config.literal_threshold)
        print(f"in_region(gamma={config.gamma:g}, tau={config.tau:g})={inside}")

    if config.out:
        if config.phi_range:
            start, stop, step = parse_range(config.phi_range)
            gammas = np.arange(start, stop + 0.5 * step, step)
            gammas = gammas[gammas > 0]
        else:
            gammas = np.linspace(0.5 * d.gamma_prime / sp.lambda2, 5.0 * values['gamma_star'], 500)
        curve = phi_curve(gammas, d, sp)[['gamma', 'phi']]
        write_csv(config.out, curve, {'config': config.to_dict(), 'theory': values})
        print(f"Wrote {len(curve)} phi samples to {config.out}", file=sys.stderr)

    return EXIT_OK


def _result_from_summary(path: str) -> TopologyResult:
    summary = read_json(path)
    optimum = None
    if summary.get('tau_star_emp') is not None:
        optimum = EmpiricalOptimum(summary['gamma_star_emp'], summary['tau_star_emp'], -1, -1)
    spectrum = summary['spectrum']
    return TopologyResult(
        name=summary['graph'],
        optimum=optimum,
        spectral=SpectralPair(spectrum['lambda2'], spectrum['lambda_k']),
        tau_step=summary.get('tau_step', 0.0),
    )


def run_compare(config: RunConfig) -> int:
    """Compare topologies from fresh sweeps or from stored summaries."""
    if config.summaries:
        results = [_result_from_summary(path) for path in config.summaries]
    else:
        grid = SweepGrid.from_ranges(parse_range(config.gamma_range), parse_range(config.tau_range))
        results = []
        for name in config.graphs or ('g1', 'g2', 'g4'):
            graph = resolve_graph(name)
            print(f"\nSweeping {graph.name}...", file=sys.stderr)
            region = _sweep_graph(config, graph, grid)
            results.append(TopologyResult(
                name=graph.name,
                optimum=empirical_optimum(region),
                spectral=SpectralPair.from_spectrum(graph_spectrum(
                    normalize_max_degree(graph) if config.normalize else graph, config.eigen_method)),
                tau_step=grid.tau_step,
            ))

    report = compare_topologies(results)
    print(format_report(report))

    if config.out:
        write_json(config.out, {**report, 'config': config.to_dict()})
        print(f"Wrote {config.out}", file=sys.stderr)
    return EXIT_OK


HANDLERS = {
    'spectrum': run_spectrum,
    'simulate': run_simulate,
    'sweep': run_sweep_command,
    'theory': run_theory,
    'compare': run_compare,
}


def parse_and_dispatch(argv=None) -> int:
    """
    Parse arguments, build the effective config and run the subcommand.

    Returns:
        int: 0 on success, 2 on configuration errors, 3 on runtime failures
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_CONFIG

    overrides = {key: value for key, value in vars(args).items() if key != 'config'}

    try:
        config = build_config(overrides, args.config)
    except ConfigError as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        return HANDLERS[config.subcommand](config)
    except ValueError as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (RuntimeError, OSError, ArithmeticError) as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_RUNTIME


def main():
    """Main entry point."""
    sys.exit(parse_and_dispatch())


if __name__ == '__main__':
    main()
