"""Configuration management for delay-sync."""

import json
import math
import os
import tomllib
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

from dotenv import load_dotenv

load_dotenv()


class ConfigError(ValueError):
    """Raised when a run configuration is invalid."""


# Worker pool size for sweeps
DEFAULT_WORKERS = int(os.getenv('DELAY_SYNC_WORKERS', '1'))

# Results store
DATABASE_URL = os.getenv('DELAY_SYNC_DATABASE_URL', 'sqlite:///delay_sync.db')

# Synchronization detection (time units; 1 unit = 1 ms)
SYNC_EPSILON = 1e-2
SYNC_TRANSIENT = 300.0
SYNC_WINDOW = 100.0
INITIAL_OFFSET = 0.5

# Integrator
MAX_STEP = 0.01
DIVERGENCE_GUARD = 1e9
TIME_UNIT = 'ms'

# Default sweep grid
GAMMA_RANGE = (0.25, 12.0, 0.25)
TAU_RANGE = (0.0, 6.0, 0.05)

# Semipassivity parameters of the Hindmarsh-Rose storage function
SIGMA = 0.01
VARSIGMA1 = 0.5
VARSIGMA2 = 0.5

# Builtin topologies: (kind, k), all with uniform weights 1/k
BUILTIN_GRAPHS = {
    'g1': ('complete', 2),
    'g2': ('path', 3),
    'g3': ('complete', 3),
    'g4': ('path', 4),
    'g5': ('ring', 4),
    'g6': ('diamond', 4),
    'g7': ('complete', 4),
}

GRAPH_ALIASES = {
    'k2': 'g1',
    'path3': 'g2',
    'k3': 'g3',
    'path4': 'g4',
    'ring4': 'g5',
    'diamond4': 'g6',
    'k4': 'g7',
}

# Published optimum, maximum delay [ms] and Laplacian spectrum per topology
REFERENCE_RESULTS = {
    'g1': {'gamma_star': 2.00, 'tau_star': 4.25, 'lambda_k': 1.0, 'lambda2': 1.0, 'quotient': 1.0},
    'g2': {'gamma_star': 5.70, 'tau_star': 1.10, 'lambda_k': 1.0, 'lambda2': 1 / 3, 'quotient': 3.0},
    'g3': {'gamma_star': 1.95, 'tau_star': 4.25, 'lambda_k': 1.0, 'lambda2': 1.0, 'quotient': 1.0},
    'g4': {'gamma_star': 10.6, 'tau_star': 0.33, 'lambda_k': 0.8536, 'lambda2': 0.1464, 'quotient': 5.8306},
    'g5': {'gamma_star': 3.85, 'tau_star': 2.55, 'lambda_k': 1.0, 'lambda2': 0.5, 'quotient': 2.0},
    'g6': {'gamma_star': 3.75, 'tau_star': 2.50, 'lambda_k': 1.0, 'lambda2': 0.5, 'quotient': 2.0},
    'g7': {'gamma_star': 1.90, 'tau_star': 4.15, 'lambda_k': 1.0, 'lambda2': 1.0, 'quotient': 1.0},
}

SUBCOMMANDS = ('spectrum', 'simulate', 'sweep', 'theory', 'compare')


def get_database_url():
    """Return the SQLAlchemy URL of the results store."""
    return DATABASE_URL


def parse_range(text: str) -> tuple[float, float, float]:
    """
    Parse an 'a:b:step' range specification.

    Examples:
        '0.25:12:0.25' -> (0.25, 12.0, 0.25)
        '0:6:0.05' -> (0.0, 6.0, 0.05)
    """
    parts = text.split(':')
    if len(parts) != 3:
        raise ConfigError(f"Range must look like a:b:step, got {text!r}")
    try:
        start, stop, step = (float(p) for p in parts)
    except ValueError:
        raise ConfigError(f"Range contains a non-numeric value: {text!r}") from None
    validate_range((start, stop, step), text)
    return start, stop, step


def validate_range(bounds, label: str = 'range'):
    """Check that a (start, stop, step) triple describes a nonempty ascending grid."""
    start, stop, step = bounds
    if not all(math.isfinite(v) for v in (start, stop, step)):
        raise ConfigError(f"{label}: values must be finite")
    if step <= 0:
        raise ConfigError(f"{label}: step must be positive, got {step}")
    if stop < start:
        raise ConfigError(f"{label}: stop {stop} is below start {start}")
    if start < 0:
        raise ConfigError(f"{label}: values must be nonnegative, got start {start}")


def format_range(bounds) -> str:
    """Inverse of parse_range."""
    return ':'.join(repr(float(v)) for v in bounds)


@dataclass(frozen=True)
class RunConfig:
    """Effective configuration of one command-line run."""

    subcommand: str = 'spectrum'
    graph: str = 'g1'
    model: str = 'hindmarsh-rose'
    normalize: bool = False
    eigen_method: str = 'jacobi'
    gamma: float = 2.0
    tau: float = 0.0
    t_end: float = SYNC_TRANSIENT + SYNC_WINDOW
    h: float | None = None
    record_stride: int = 10
    transient: float = SYNC_TRANSIENT
    window: float = SYNC_WINDOW
    epsilon: float = SYNC_EPSILON
    bound: float = 100.0
    sync: bool = False
    seed: int = 0
    seeds: int = 1
    workers: int = DEFAULT_WORKERS
    gamma_range: str = format_range(GAMMA_RANGE)
    tau_range: str = format_range(TAU_RANGE)
    alpha: float = 1.0
    c0: float = 1.0
    c1: float = 1.0
    c2: float = 1.0
    lambda2: float | None = None
    lambdak: float | None = None
    delta_bar: float | None = None
    literal_threshold: bool = False
    check_region: bool = False
    phi_range: str | None = None
    store: bool = False
    out: str | None = None
    boundary_out: str | None = None
    summary_out: str | None = None
    graphs: tuple[str, ...] = ()
    summaries: tuple[str, ...] = ()
    time_unit: str = TIME_UNIT

    def to_dict(self) -> dict:
        """Return the configuration as a JSON-serializable dict."""
        return asdict(self)

    def validate(self) -> 'RunConfig':
        """
        Validate every field before any computation.

        Returns:
            RunConfig: self, for chaining

        Raises:
            ConfigError: on the first invalid value
        """
        if self.subcommand not in SUBCOMMANDS:
            raise ConfigError(f"Unknown subcommand: {self.subcommand}")
        if self.eigen_method not in ('jacobi', 'eigh'):
            raise ConfigError(f"Unknown eigen method: {self.eigen_method}")
        for name in ('gamma', 'tau', 'transient', 'window', 'bound'):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise ConfigError(f"{name} must be finite and nonnegative, got {value}")
        if self.t_end <= 0 or not math.isfinite(self.t_end):
            raise ConfigError(f"t_end must be positive, got {self.t_end}")
        if self.window <= 0:
            raise ConfigError(f"window must be positive, got {self.window}")
        if not self.epsilon > 0:
            raise ConfigError(f"epsilon must be positive, got {self.epsilon}")
        if self.h is not None and not self.h > 0:
            raise ConfigError(f"h must be positive, got {self.h}")
        if self.record_stride < 1:
            raise ConfigError(f"record_stride must be >= 1, got {self.record_stride}")
        if self.seeds < 1:
            raise ConfigError(f"seeds must be >= 1, got {self.seeds}")
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")
        for name in ('alpha', 'c0', 'c1', 'c2'):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be strictly positive, got {getattr(self, name)}")
        for name in ('lambda2', 'lambdak', 'delta_bar'):
            value = getattr(self, name)
            if value is not None and not value > 0:
                raise ConfigError(f"{name} must be strictly positive, got {value}")
        parse_range(self.gamma_range)
        parse_range(self.tau_range)
        if self.phi_range is not None:
            parse_range(self.phi_range)
        return self


def read_config_file(path: str) -> dict:
    """
    Read a TOML config file, or the config echoed in a metadata JSON file.

    Args:
        path: Path to a .toml file, or a .json file written by a previous run

    Returns:
        dict: Raw key/value pairs (unknown keys are rejected later)
    """
    file = Path(path)
    if not file.exists():
        raise ConfigError(f"Config file not found: {path}")

    if file.suffix == '.json':
        data = json.loads(file.read_text())
        return data.get('config', data)

    with open(file, 'rb') as f:
        data = tomllib.load(f)

    # Allow grouping under a [run] table
    return data.get('run', data)


def build_config(overrides: dict, config_file: str | None = None) -> RunConfig:
    """
    Merge defaults < config file < command-line overrides into a RunConfig.

    Args:
        overrides: Values given on the command line (None means "not given")
        config_file: Optional TOML/JSON config path

    Returns:
        RunConfig: The validated effective configuration
    """
    known = {f.name for f in fields(RunConfig)}
    merged = {}

    if config_file:
        for key, value in read_config_file(config_file).items():
            key = key.replace('-', '_')
            if key not in known:
                raise ConfigError(f"Unknown config key: {key}")
            merged[key] = value

    for key, value in overrides.items():
        if value is not None and key in known:
            merged[key] = value

    # theory reports region membership once both coordinates are given
    if merged.get('subcommand') == 'theory':
        point = {'gamma', 'tau'}
        if point <= {key for key, value in overrides.items() if value is not None}:
            merged['check_region'] = True
        elif point <= merged.keys():
            merged.setdefault('check_region', True)

    for key in ('graphs', 'summaries'):
        if key in merged:
            merged[key] = tuple(merged[key])

    try:
        config = replace(RunConfig(), **merged)
    except TypeError as e:
        raise ConfigError(str(e)) from None

    return config.validate()
