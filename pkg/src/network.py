"""Diffusively delay-coupled networks of identical nodes and synchronization measures."""

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from src.config import SYNC_EPSILON, SYNC_TRANSIENT, SYNC_WINDOW
from src.dde import DelaySystem, IntegratorConfig, Trajectory, default_step, integrate
from src.graph import WeightedGraph, is_connected, laplacian, normalize_max_degree
from src.models import NodeModel


@dataclass(frozen=True)
class SyncConfig:
    """Transient to discard, measurement window and disagreement threshold."""

    transient: float = SYNC_TRANSIENT
    window: float = SYNC_WINDOW
    epsilon: float = SYNC_EPSILON

    def __post_init__(self):
        if not (self.transient >= 0 and math.isfinite(self.transient)):
            raise ValueError(f"transient must be finite and nonnegative, got {self.transient}")
        if not (self.window > 0 and math.isfinite(self.window)):
            raise ValueError(f"window must be positive, got {self.window}")
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")

    @property
    def t_end(self) -> float:
        return self.transient + self.window


class SyncVerdict(NamedTuple):
    synchronized: bool
    max_error: float
    diverged: bool


@dataclass(frozen=True, eq=False)
class NetworkSystem:
    """
    k identical nodes coupled through a graph with strength gamma and delay tau.

    gamma may be a 1-D array, in which case the network is a batch of
    independent copies, one per coupling strength.
    """

    model: NodeModel
    graph: WeightedGraph
    gamma: float | np.ndarray
    tau: float
    normalize: bool = False
    L: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not is_connected(self.graph):
            raise ValueError(f"Graph {self.graph.name} is not connected")

        gamma = np.asarray(self.gamma, dtype=float)
        if gamma.ndim > 1:
            raise ValueError(f"gamma must be a scalar or a 1-D array, got shape {gamma.shape}")
        if not np.all(np.isfinite(gamma)) or np.any(gamma < 0):
            raise ValueError(f"gamma must be finite and nonnegative, got {self.gamma}")
        if not (math.isfinite(self.tau) and self.tau >= 0):
            raise ValueError(f"tau must be finite and nonnegative, got {self.tau}")

        graph = normalize_max_degree(self.graph) if self.normalize else self.graph
        object.__setattr__(self, 'L', laplacian(graph))

    @property
    def k(self) -> int:
        return self.graph.k

    @property
    def batch_shape(self) -> tuple[int, ...]:
        return np.shape(self.gamma)


def coupling_input(y_delayed, L, gamma) -> np.ndarray:
    """
    Diffusive input u = -gamma (L kron I_m) y_delayed.

    Evaluated as u_i = gamma * sum_j a_ij (y_j - y_i) so that equal outputs
    give exactly zero.

    Args:
        y_delayed: Delayed outputs, shape (..., k, m) or a flat vector of k*m
        L: Laplacian (k x k)
        gamma: Coupling strength, scalar or array matching the leading axes

    Returns:
        np.ndarray: Inputs with the same shape as y_delayed
    """
    L = np.asarray(L, dtype=float)
    k = L.shape[0]
    y = np.asarray(y_delayed, dtype=float)

    flat = y.ndim == 1
    if flat:
        if y.size % k:
            raise ValueError(f"Output vector of length {y.size} does not fit {k} nodes")
        y = y.reshape(k, -1)
    elif y.shape[-2] != k:
        raise ValueError(f"Outputs have {y.shape[-2]} nodes, Laplacian has {k}")

    adjacency = -L.copy()
    np.fill_diagonal(adjacency, 0.0)

    differences = y[..., np.newaxis, :, :] - y[..., :, np.newaxis, :]
    summed = np.einsum('ij,...ijm->...im', adjacency, differences)

    gamma = np.asarray(gamma, dtype=float)
    u = gamma.reshape(gamma.shape + (1, 1)) * summed
    return u.reshape(-1) if flat else u


class NetworkDelaySystem(DelaySystem):
    """Closed loop: node dynamics on current states, coupling on delayed outputs."""

    def __init__(self, net: NetworkSystem):
        self.net = net
        self.model = net.model
        self.tau = float(net.tau)
        self.batch_shape = net.batch_shape
        self.L = net.L
        self.gamma = np.asarray(net.gamma, dtype=float)

    def derivative(self, t, x, x_delayed):
        u = coupling_input(self.model.output(x_delayed), self.L, self.gamma)
        return self.model.derivative(x, u)


def as_delay_system(net: NetworkSystem) -> NetworkDelaySystem:
    """Stacked delay system of a network, ready for dde.integrate."""
    return NetworkDelaySystem(net)


def simulate(
    net: NetworkSystem,
    x0,
    t_end: float,
    h: float | None = None,
    record_stride: int = 1,
    record_from: float = 0.0,
) -> Trajectory:
    """Integrate a network from the constant history x0 of shape (k, n)."""
    cfg = IntegratorConfig(
        h=h if h is not None else default_step(net.tau),
        t_end=t_end,
        record_stride=record_stride,
        record_from=record_from,
    )
    return integrate(as_delay_system(net), x0, cfg)


def _pairwise_gap(states: np.ndarray) -> np.ndarray:
    """Largest Euclidean distance between any two nodes, per leading index."""
    differences = states[..., :, np.newaxis, :] - states[..., np.newaxis, :, :]
    return np.sqrt(np.sum(differences * differences, axis=-1)).max(axis=(-2, -1))


def sync_error(traj: Trajectory, window) -> float | np.ndarray:
    """
    Max over recorded times in [t_a, t_b] of the max pairwise full-state gap.

    Batched trajectories give one value per batch element; diverged
    elements report inf.

    Raises:
        ValueError: If no recorded time falls inside the window
    """
    t_a, t_b = window
    mask = (traj.times >= t_a - 1e-9) & (traj.times <= t_b + 1e-9)
    if not mask.any():
        raise ValueError(f"No recorded samples inside window [{t_a}, {t_b}]")

    errors = _pairwise_gap(traj.states[mask]).max(axis=0)
    errors = np.where(traj.diverged, np.inf, errors)
    return float(errors) if errors.ndim == 0 else errors


def sync_verdicts(
    net: NetworkSystem,
    cfg: SyncConfig,
    x0,
    h: float | None = None,
    record_stride: int = 10,
):
    """
    Integrate over [0, T0 + W] and judge synchronization on [T0, T0 + W].

    Returns:
        tuple: (synchronized, max_error, diverged) arrays shaped like gamma
    """
    traj = simulate(
        net,
        x0,
        t_end=cfg.t_end,
        h=h,
        record_stride=record_stride,
        record_from=cfg.transient,
    )
    max_error = np.asarray(sync_error(traj, (cfg.transient, cfg.t_end)))
    diverged = np.asarray(traj.diverged)
    synchronized = ~diverged & (max_error < cfg.epsilon)
    return synchronized, max_error, diverged


def is_synchronized(
    net: NetworkSystem,
    cfg: SyncConfig,
    x0,
    h: float | None = None,
    record_stride: int = 10,
) -> SyncVerdict:
    """Synchronization verdict of a single (unbatched) network."""
    if net.batch_shape:
        raise ValueError("is_synchronized takes a scalar gamma; use sync_verdicts for batches")
    synchronized, max_error, diverged = sync_verdicts(net, cfg, x0, h, record_stride)
    return SyncVerdict(bool(synchronized), float(max_error), bool(diverged))


def boundedness_check(traj: Trajectory, bound: float, transient: float = 0.0) -> bool:
    """True iff no element diverged and every node's |x_i(t)| <= bound past the transient."""
    if traj.any_diverged:
        return False
    mask = traj.times >= transient - 1e-9
    if not mask.any():
        return True
    norms = np.sqrt(np.sum(traj.states[mask] ** 2, axis=-1))
    return bool(np.all(norms <= bound))


def reduced_laplacian(L) -> np.ndarray:
    """
    Lower-right (k-1)x(k-1) block of M L M^-1, M = [[1, 0], [1, -I]].

    M is its own inverse. The block carries the spectrum of L without the zero eigenvalue.
    """
    L = np.asarray(L, dtype=float)
    k = L.shape[0]
    M = np.zeros((k, k))
    M[0, 0] = 1.0
    M[1:, 0] = 1.0
    M[1:, 1:] = -np.eye(k - 1)
    return (M @ L @ M)[1:, 1:]


def reduced_spectrum(L) -> np.ndarray:
    """Sorted real parts of the eigenvalues of the reduced Laplacian."""
    return np.sort(np.linalg.eigvals(reduced_laplacian(L)).real)
