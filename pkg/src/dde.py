"""
Fixed-step integration of delay differential equations with one constant delay.

The integrator is classical four-stage Runge-Kutta. Delayed arguments at
stage times are read from a uniform-grid ring buffer of past states and
derivatives through cubic Hermite interpolation, which keeps the overall
scheme fourth order between derivative discontinuities of the solution.
The initial function is the constant x(s) = x0 for s in [-tau, 0].
"""

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np

from src.config import DIVERGENCE_GUARD, MAX_STEP

# Delay/step ratios this close to an integer are treated as integers
GRID_SNAP = 1e-9


class HistoryWindowError(ValueError):
    """Raised when a delayed lookup falls outside the stored history."""


class DelaySystem(ABC):
    """
    x'(t) = f(t, x(t), x(t - tau)) with a constant delay tau >= 0.

    State arrays have shape batch_shape + state_shape; elements along the
    batch axes are independent systems sharing one integration grid.
    """

    tau: float = 0.0
    batch_shape: tuple[int, ...] = ()

    @abstractmethod
    def derivative(self, t: float, x: np.ndarray, x_delayed: np.ndarray) -> np.ndarray:
        """Right-hand side evaluated at time t."""


class FunctionSystem(DelaySystem):
    """DelaySystem wrapping a plain callable f(t, x, x_delayed)."""

    def __init__(self, func, tau: float = 0.0):
        if tau < 0 or not math.isfinite(tau):
            raise ValueError(f"Delay must be finite and nonnegative, got {tau}")
        self.func = func
        self.tau = float(tau)

    def derivative(self, t, x, x_delayed):
        return self.func(t, x, x_delayed)


def lag_steps(tau: float, h: float) -> float:
    """Delay measured in steps, snapped to an integer when within GRID_SNAP."""
    d = tau / h
    nearest = round(d)
    if abs(d - nearest) < GRID_SNAP:
        return float(nearest)
    return d


def default_step(tau: float) -> float:
    """Step size min(tau/4, MAX_STEP); MAX_STEP for undelayed systems."""
    if tau <= 0:
        return MAX_STEP
    return min(tau / 4.0, MAX_STEP)


class HistoryBuffer:
    """
    Ring buffer of (state, derivative) pairs on the grid t0 + i*h.

    Node indices run from -ceil(tau/h) (the start of the constant initial
    segment) up to the newest stored node. Lookups are made by position in
    index units; positions at or before node 0 return x0 exactly.
    """

    def __init__(self, x0, tau: float, h: float, t0: float = 0.0):
        if tau < 0 or not math.isfinite(tau):
            raise ValueError(f"Delay must be finite and nonnegative, got {tau}")
        if not h > 0:
            raise ValueError(f"Step must be positive, got {h}")

        x0 = np.array(x0, dtype=float)
        self.h = float(h)
        self.t0 = float(t0)
        self.tau = float(tau)
        self.lag = lag_steps(tau, h)
        self.capacity = math.ceil(self.lag) + 2

        self._x0 = x0.copy()
        self._states = np.empty((self.capacity,) + x0.shape)
        self._derivs = np.zeros((self.capacity,) + x0.shape)

        self.oldest = -math.ceil(self.lag)
        self.newest = 0
        for index in range(self.oldest, 1):
            self._states[index % self.capacity] = x0

    def __len__(self) -> int:
        return self.newest - self.oldest + 1

    @property
    def current_state(self) -> np.ndarray:
        return self._states[self.newest % self.capacity]

    def set_derivative(self, index: int, value):
        """Store the derivative at a node already in the buffer."""
        if not self.oldest <= index <= self.newest:
            raise HistoryWindowError(f"Node {index} is not stored")
        self._derivs[index % self.capacity] = value

    def push(self, state):
        """Append the state at the next grid node, dropping the oldest if full."""
        self.newest += 1
        slot = self.newest % self.capacity
        self._states[slot] = state
        self._derivs[slot] = 0.0
        self.oldest = max(self.oldest, self.newest - self.capacity + 1)

    def value_at(self, position: float) -> np.ndarray:
        """
        Interpolated state at a grid position measured in steps from t0.

        Raises:
            HistoryWindowError: If the position lies outside the stored window
        """
        nearest = round(position)
        if abs(position - nearest) < GRID_SNAP:
            position = float(nearest)

        if position < self.oldest or position > self.newest:
            raise HistoryWindowError(
                f"Position {position} outside stored window [{self.oldest}, {self.newest}]"
            )

        if position <= 0:
            return self._x0.copy()

        left = math.floor(position)
        theta = position - left
        left_slot = left % self.capacity
        if theta == 0.0:
            return self._states[left_slot].copy()

        right_slot = (left + 1) % self.capacity
        one_minus = 1.0 - theta
        h00 = (1.0 + 2.0 * theta) * one_minus * one_minus
        h10 = theta * one_minus * one_minus
        h01 = theta * theta * (3.0 - 2.0 * theta)
        h11 = theta * theta * (theta - 1.0)

        return (
            h00 * self._states[left_slot]
            + h10 * self.h * self._derivs[left_slot]
            + h01 * self._states[right_slot]
            + h11 * self.h * self._derivs[right_slot]
        )


def init_history(x0, tau: float, h: float) -> HistoryBuffer:
    """Constant-history buffer holding x0 on [-tau, 0]."""
    return HistoryBuffer(x0, tau, h)


def delayed_state(buf: HistoryBuffer, t_query: float) -> np.ndarray:
    """State at time t_query by cubic Hermite interpolation; exact on grid nodes."""
    return buf.value_at((t_query - buf.t0) / buf.h)


@dataclass(frozen=True)
class IntegratorConfig:
    """
    Fixed-step RK4 settings.

    Node n (time n*h) is recorded when n is a multiple of record_stride and
    n*h >= record_from. The last node never lies past t_end; when t_end is
    not a multiple of h the run stops at the last grid time before it.
    """

    h: float
    t_end: float
    record_stride: int = 1
    record_from: float = 0.0
    guard: float = DIVERGENCE_GUARD

    def __post_init__(self):
        if not (self.h > 0 and math.isfinite(self.h)):
            raise ValueError(f"Step h must be positive, got {self.h}")
        if not (self.t_end > 0 and math.isfinite(self.t_end)):
            raise ValueError(f"t_end must be positive, got {self.t_end}")
        if self.record_stride < 1:
            raise ValueError(f"record_stride must be >= 1, got {self.record_stride}")
        if self.record_from > self.t_end:
            raise ValueError(f"record_from {self.record_from} is beyond t_end {self.t_end}")

    @property
    def n_steps(self) -> int:
        return math.floor(self.t_end / self.h + GRID_SNAP)


@dataclass(frozen=True)
class Trajectory:
    """Recorded samples of one integration run."""

    times: np.ndarray
    states: np.ndarray
    diverged: np.ndarray
    h: float
    tau: float

    @property
    def any_diverged(self) -> bool:
        return bool(np.any(self.diverged))

    def at(self, t: float) -> np.ndarray:
        """Recorded state at time t (must be a recorded time)."""
        matches = np.flatnonzero(np.abs(self.times - t) < 1e-9 * max(1.0, abs(t)))
        if matches.size == 0:
            raise ValueError(f"Time {t} was not recorded")
        return self.states[matches[0]]


def _diverged_mask(x: np.ndarray, batch_ndim: int, guard: float) -> np.ndarray:
    bad = ~np.isfinite(x) | (np.abs(x) > guard)
    return bad.reshape(bad.shape[:batch_ndim] + (-1,)).any(axis=-1)


def integrate(system: DelaySystem, x0, cfg: IntegratorConfig) -> Trajectory:
    """
    Integrate a delay system from the constant history x0.

    Batch elements that cross the divergence guard (or turn non-finite) are
    flagged and frozen at their last good state; integration halts early once
    every element has diverged and the partial trajectory is returned.

    Raises:
        ValueError: If tau > 0 and h > tau
    """
    tau = float(system.tau)
    h = cfg.h
    if tau > 0 and h > tau * (1.0 + GRID_SNAP):
        raise ValueError(f"Step h={h} must not exceed the delay tau={tau}")

    batch_shape = tuple(system.batch_shape)
    batch_ndim = len(batch_shape)

    x = np.array(x0, dtype=float)
    if batch_ndim and x.shape[:batch_ndim] != batch_shape:
        x = np.broadcast_to(x, batch_shape + x.shape).copy()

    history = HistoryBuffer(x, tau, h)
    delayed = tau > 0
    lag = history.lag
    half = 0.5 * h

    diverged = _diverged_mask(x, batch_ndim, cfg.guard)
    times, records = [], []

    def record(n, state):
        t = n * h
        if n % cfg.record_stride == 0 and t >= cfg.record_from - GRID_SNAP:
            times.append(t)
            records.append(state.copy())

    record(0, x)

    with np.errstate(over='ignore', invalid='ignore'):
        for n in range(cfg.n_steps):
            if diverged.all():
                break

            t = n * h
            if delayed:
                d1 = system.derivative(t, x, history.value_at(n - lag))
                history.set_derivative(n, d1)
                mid = history.value_at(n + 0.5 - lag)
                x2 = x + half * d1
                d2 = system.derivative(t + half, x2, mid)
                x3 = x + half * d2
                d3 = system.derivative(t + half, x3, mid)
                x4 = x + h * d3
                d4 = system.derivative(t + h, x4, history.value_at(n + 1 - lag))
            else:
                d1 = system.derivative(t, x, x)
                x2 = x + half * d1
                d2 = system.derivative(t + half, x2, x2)
                x3 = x + half * d2
                d3 = system.derivative(t + half, x3, x3)
                x4 = x + h * d3
                d4 = system.derivative(t + h, x4, x4)

            x_new = x + (h / 6.0) * (d1 + 2.0 * d2 + 2.0 * d3 + d4)

            bad = _diverged_mask(x_new, batch_ndim, cfg.guard) & ~diverged
            if bad.any():
                diverged = diverged | bad
            if diverged.any():
                frozen = diverged.reshape(batch_shape + (1,) * (x.ndim - batch_ndim))
                x_new = np.where(frozen, x, x_new)

            x = x_new
            if delayed:
                history.push(x)
            record(n + 1, x)

    if records:
        states = np.stack(records)
    else:
        states = np.empty((0,) + x.shape)

    return Trajectory(
        times=np.array(times),
        states=states,
        diverged=diverged,
        h=h,
        tau=tau,
    )
