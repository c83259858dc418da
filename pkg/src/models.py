"""Node dynamics: the model interface, the Hindmarsh-Rose neuron and its diagnostics."""

import math
import warnings
from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np
from scipy.stats import qmc

from src.config import INITIAL_OFFSET, SIGMA, VARSIGMA1, VARSIGMA2

FD_STEP = 1e-6


@dataclass(frozen=True)
class NodeState:
    """Internal state zeta (dimension n-m) and output y (dimension m) of one node."""

    zeta: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, 'zeta', np.atleast_1d(np.asarray(self.zeta, dtype=float)))
        object.__setattr__(self, 'y', np.atleast_1d(np.asarray(self.y, dtype=float)))

    @classmethod
    def from_vector(cls, x, m: int = 1) -> 'NodeState':
        x = np.asarray(x, dtype=float)
        return cls(zeta=x[:-m], y=x[-m:])

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.zeta, self.y])

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.zeta)) and np.all(np.isfinite(self.y)))


class NodeModel(ABC):
    """
    Node dynamics in normal form: zeta' = q(zeta, y), y' = a(zeta, y) + u.

    States are arrays whose last axis has length n, laid out as
    (zeta_1..zeta_{n-m}, y_1..y_m); any leading axes (nodes, batch) are
    carried through elementwise.
    """

    name: str = 'node'
    n: int = 1
    m: int = 1
    state_names: tuple[str, ...] = ()

    # Box the initial conditions are drawn from: (low, high) per coordinate
    initial_box: tuple[tuple[float, float], ...] = ()

    @abstractmethod
    def derivative(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        """Time derivative for states x (..., n) and inputs u (..., m)."""

    def output(self, x: np.ndarray) -> np.ndarray:
        return x[..., self.n - self.m:]

    def internal_jacobian(self, x) -> np.ndarray:
        """
        dq/dzeta at a single state, by central finite differences.

        Models with a closed-form Jacobian override this.
        """
        x = np.asarray(x, dtype=float)
        p = self.n - self.m
        u = np.zeros(self.m)
        jac = np.empty((p, p))
        for j in range(p):
            step = np.zeros(self.n)
            step[j] = FD_STEP
            forward = self.derivative(x + step, u)[:p]
            backward = self.derivative(x - step, u)[:p]
            jac[:, j] = (forward - backward) / (2.0 * FD_STEP)
        return jac


class HindmarshRose(NodeModel):
    """Hindmarsh-Rose neuron, state (zeta1, zeta2, y), one output channel."""

    name = 'hindmarsh-rose'
    n = 3
    m = 1
    state_names = ('zeta1', 'zeta2', 'y1')
    initial_box = ((-10.0, 0.0), (2.8, 3.4), (-1.5, 2.0))

    def derivative(self, x, u):
        zeta1 = x[..., 0]
        zeta2 = x[..., 1]
        y = x[..., 2]
        y2 = y * y
        return np.stack(
            [
                1.0 - 5.0 * y2 - zeta1,
                0.005 * (4.0 * y + 6.472 - zeta2),
                -(y2 * y) + 3.0 * y2 + zeta1 - zeta2 + 3.25 + u[..., 0],
            ],
            axis=-1,
        )

    def internal_jacobian(self, x) -> np.ndarray:
        # q does not couple zeta1 and zeta2 and is linear in both
        return np.array([[-1.0, 0.0], [0.0, -0.005]])


MODELS = {
    HindmarshRose.name: HindmarshRose,
}


def get_model(name: str) -> NodeModel:
    """Instantiate a node model by its config name."""
    try:
        return MODELS[name]()
    except KeyError:
        raise ValueError(f"Unknown model: {name}. Available: {', '.join(MODELS)}") from None


def initial_conditions(
    model: NodeModel,
    k: int,
    seed: int,
    offset: float = INITIAL_OFFSET,
) -> np.ndarray:
    """
    Reproducible perturbed initial states for k nodes.

    A common base point is drawn uniformly from the model's initial box and
    node i is moved from it by `offset` along its own random unit direction.
    offset=0 returns k identical states (a point on the synchronization
    manifold).

    Returns:
        np.ndarray: Array of shape (k, n)
    """
    rng = np.random.default_rng(seed)
    low, high = np.array(model.initial_box).T
    base = rng.uniform(low, high)

    directions = rng.standard_normal((k, model.n))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)

    return base + offset * directions


def _hr_array(s) -> np.ndarray:
    if isinstance(s, NodeState):
        return s.as_vector()
    return np.asarray(s, dtype=float)


def hr_derivative(s, u: float = 0.0) -> NodeState:
    """
    Hindmarsh-Rose vector field at a single node state.

    Raises:
        ValueError: If the state or the input is not finite
    """
    x = _hr_array(s)
    if not (np.all(np.isfinite(x)) and math.isfinite(u)):
        raise ValueError(f"Non-finite state or input: state={x}, u={u}")
    dx = HindmarshRose().derivative(x, np.array([u], dtype=float))
    return NodeState.from_vector(dx, m=1)


@dataclass(frozen=True)
class SemipassivityParams:
    """Constants of the Hindmarsh-Rose storage function and its H function."""

    sigma: float = SIGMA
    varsigma1: float = VARSIGMA1
    varsigma2: float = VARSIGMA2

    def __post_init__(self):
        for label, value in (('varsigma1', self.varsigma1), ('varsigma2', self.varsigma2)):
            if not 0.0 < value < 1.0:
                raise ValueError(f"{label} must lie in (0, 1), got {value}")
        upper = 4.0 * self.varsigma1 * (1.0 - self.varsigma2) / 25.0
        if not 0.0 < self.sigma < upper:
            raise ValueError(f"sigma must lie in (0, {upper}), got {self.sigma}")


def hr_storage(s, p: SemipassivityParams = SemipassivityParams()):
    """V = y^2/2 + sigma*zeta1^2 + 25*zeta2^2, vectorized over leading axes."""
    x = _hr_array(s)
    zeta1, zeta2, y = x[..., 0], x[..., 1], x[..., 2]
    return 0.5 * y * y + p.sigma * zeta1 * zeta1 + 25.0 * zeta2 * zeta2


def hr_H(s, p: SemipassivityParams = SemipassivityParams()):
    """The H function of the Hindmarsh-Rose dissipation inequality, term by term."""
    x = _hr_array(s)
    zeta1, zeta2, y = x[..., 0], x[..., 1], x[..., 2]
    sigma, vs1, vs2 = p.sigma, p.varsigma1, p.varsigma2

    y2 = y * y
    shifted_zeta1 = zeta1 - y / (2.0 * sigma * (1.0 - vs2))
    shifted_y2 = y2 + 5.0 * sigma * zeta1 / (2.0 * (1.0 - vs1))

    return (
        vs1 * y2 * y2
        - 3.0 * y2 * y
        - y2 / (4.0 * sigma * (1.0 - vs2))
        + (sigma * vs2 - 25.0 * sigma * sigma / (4.0 * (1.0 - vs1))) * zeta1 * zeta1
        + 0.25 * zeta2 * zeta2
        - 1.618 * zeta2
        + sigma * (1.0 - vs2) * shifted_zeta1 * shifted_zeta1
        - sigma * zeta1
        + (1.0 - vs1) * shifted_y2 * shifted_y2
        - 3.25 * y
    )


def far_field_scan(
    p: SemipassivityParams,
    delta: float,
    R: float,
    samples: int,
    seed: int = 0,
) -> bool:
    """
    Spot-check H(x) - delta*|y|^2 > 0 on the shell R < |x| <= 4R.

    Points come from a scrambled Sobol sequence mapped to the shell with a
    volume-uniform radius. This is a sampled diagnostic, not a proof.

    Args:
        p: Semipassivity parameters
        delta: Dissipation margin (> 0)
        R: Inner shell radius (> 0)
        samples: Minimum number of points; rounded up to a power of two
        seed: Scrambling seed

    Returns:
        bool: True iff the inequality held at every sampled point
    """
    if not delta > 0:
        raise ValueError(f"delta must be positive, got {delta}")
    if not R > 0:
        raise ValueError(f"R must be positive, got {R}")
    if samples <= 0:
        warnings.warn("far_field_scan called with no samples; result is vacuously True")
        return True

    sampler = qmc.Sobol(d=3, scramble=True, seed=seed)
    points = sampler.random_base2(m=max(0, math.ceil(math.log2(samples))))

    radius = R * np.cbrt(1.0 + 63.0 * points[:, 0])
    cos_polar = 1.0 - 2.0 * points[:, 1]
    sin_polar = np.sqrt(np.clip(1.0 - cos_polar * cos_polar, 0.0, None))
    azimuth = 2.0 * np.pi * points[:, 2]

    x = np.column_stack([
        radius * sin_polar * np.cos(azimuth),
        radius * sin_polar * np.sin(azimuth),
        radius * cos_polar,
    ])

    y = x[:, 2]
    margin = hr_H(x, p) - delta * y * y
    return bool(np.all(margin > 0))


def demidovich_check(
    model: NodeModel,
    states,
    P,
    c: float = 0.0,
) -> tuple[float, bool]:
    """
    Check the Demidovich condition of the internal dynamics.

    At every sample state the eigenvalues of 0.5*(P*J + J^T*P) are computed,
    with J = dq/dzeta.

    Args:
        model: Node model
        states: Nonempty iterable of full node states (length n each)
        P: Symmetric positive-definite (n-m)x(n-m) matrix
        c: Required margin; the check passes iff the max eigenvalue <= -c

    Returns:
        tuple: (largest eigenvalue found, passed)

    Raises:
        ValueError: If P is not symmetric positive definite or no states are given
    """
    P = np.asarray(P, dtype=float)
    if not np.allclose(P, P.T, atol=1e-12):
        raise ValueError("P must be symmetric")
    try:
        np.linalg.cholesky(P)
    except np.linalg.LinAlgError:
        raise ValueError("P must be positive definite") from None

    states = [np.asarray(s, dtype=float) for s in states]
    if not states:
        raise ValueError("demidovich_check needs at least one sample state")

    largest = -math.inf
    for state in states:
        jac = model.internal_jacobian(state)
        sym = 0.5 * (P @ jac + jac.T @ P)
        largest = max(largest, float(np.linalg.eigvalsh(sym).max()))

    return largest, largest <= -c + 1e-12
