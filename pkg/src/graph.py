"""Weighted undirected communication graphs, Laplacians and spectra."""

import json
import math
import tomllib
from dataclasses import dataclass
from pathlib import Path

import networkx as nx
import numpy as np

from src.config import BUILTIN_GRAPHS, GRAPH_ALIASES, REFERENCE_RESULTS

# Tolerances
SYMMETRY_TOL = 1e-12
ZERO_EIGENVALUE_TOL = 1e-10
CONNECTIVITY_TOL = 1e-9

TOPOLOGY_KINDS = ('complete', 'path', 'ring', 'star', 'diamond', 'custom')


@dataclass(frozen=True)
class WeightedGraph:
    """
    Simple undirected graph on nodes 0..k-1 with nonnegative edge weights.

    Each unordered pair is stored once as (i, j, weight) with i < j.
    """

    k: int
    edges: tuple[tuple[int, int, float], ...]
    name: str = 'custom'

    def __post_init__(self):
        if self.k < 2:
            raise ValueError(f"A graph needs at least 2 nodes, got k={self.k}")

        seen = set()
        for i, j, weight in self.edges:
            if i == j:
                raise ValueError(f"Self-loop on node {i} is not allowed")
            if not (0 <= i < self.k and 0 <= j < self.k):
                raise ValueError(f"Edge ({i}, {j}) references a node outside 0..{self.k - 1}")
            if i > j:
                raise ValueError(f"Edge ({i}, {j}) must be stored with i < j")
            if (i, j) in seen:
                raise ValueError(f"Duplicate edge ({i}, {j})")
            if not math.isfinite(weight) or weight < 0:
                raise ValueError(f"Edge ({i}, {j}) has invalid weight {weight}")
            seen.add((i, j))

    def adjacency(self) -> np.ndarray:
        """Return the dense symmetric weighted adjacency matrix A."""
        matrix = np.zeros((self.k, self.k))
        for i, j, weight in self.edges:
            matrix[i, j] = weight
            matrix[j, i] = weight
        return matrix

    def degrees(self) -> np.ndarray:
        """Weighted degree d_i of every node."""
        return self.adjacency().sum(axis=1)

    def scaled(self, factor: float) -> 'WeightedGraph':
        """Return a copy with every weight multiplied by factor."""
        if not factor > 0:
            raise ValueError(f"Scale factor must be positive, got {factor}")
        edges = tuple((i, j, weight * factor) for i, j, weight in self.edges)
        return WeightedGraph(self.k, edges, self.name)

    def to_networkx(self) -> nx.Graph:
        """Return the graph as a networkx Graph (edges with positive weight only)."""
        graph = nx.Graph()
        graph.add_nodes_from(range(self.k))
        graph.add_weighted_edges_from(
            (i, j, weight) for i, j, weight in self.edges if weight > 0
        )
        return graph


@dataclass(frozen=True)
class LaplacianSpectrum:
    """Sorted Laplacian eigenvalues of a connected graph."""

    eigenvalues: tuple[float, ...]
    lambda2: float
    lambda_k: float
    quotient: float

    def to_dict(self) -> dict:
        return {
            'eigenvalues': list(self.eigenvalues),
            'lambda2': self.lambda2,
            'lambda_k': self.lambda_k,
            'quotient': self.quotient,
        }


def _template_edges(kind: str, k: int) -> list[tuple[int, int]]:
    """Unweighted edge set of a named topology."""
    if kind == 'complete':
        graph = nx.complete_graph(k)
    elif kind == 'path':
        graph = nx.path_graph(k)
    elif kind == 'ring':
        graph = nx.cycle_graph(k)
    elif kind == 'star':
        graph = nx.star_graph(k - 1)
    elif kind == 'diamond':
        # Complete graph with the edge between the first and last node removed
        if k < 3:
            raise ValueError(f"A diamond topology needs k >= 3, got k={k}")
        graph = nx.complete_graph(k)
        graph.remove_edge(0, k - 1)
    else:
        raise ValueError(f"Unknown topology kind: {kind}")

    return sorted((min(i, j), max(i, j)) for i, j in graph.edges())


def build_topology(
    kind: str,
    k: int,
    weight: float | None = None,
    edges=None,
    name: str | None = None,
) -> WeightedGraph:
    """
    Build a weighted undirected graph of the requested shape.

    Args:
        kind: One of complete, path, ring, star, diamond, custom
        k: Number of nodes (>= 2)
        weight: Explicit common edge weight; None means the uniform rule 1/k
        edges: For kind='custom', 0-based (i, j) or (i, j, weight) entries
        name: Label carried into outputs

    Returns:
        WeightedGraph: The constructed graph

    Raises:
        ValueError: On k < 2, unknown kinds, self-loops or negative weights
    """
    if k < 2:
        raise ValueError(f"A graph needs at least 2 nodes, got k={k}")
    if weight is not None and (not math.isfinite(weight) or weight < 0):
        raise ValueError(f"Edge weight must be nonnegative, got {weight}")

    uniform = 1.0 / k if weight is None else float(weight)

    if kind == 'custom':
        if not edges:
            raise ValueError("A custom topology needs an edge list")
        triples = []
        for entry in edges:
            if len(entry) == 2:
                i, j = entry
                w = uniform
            elif len(entry) == 3:
                i, j, w = entry
            else:
                raise ValueError(f"Edge entries must be (i, j) or (i, j, weight), got {entry!r}")
            i, j = int(i), int(j)
            if i == j:
                raise ValueError(f"Self-loop on node {i} is not allowed")
            triples.append((min(i, j), max(i, j), float(w)))
        triples.sort()
        return WeightedGraph(k, tuple(triples), name or 'custom')

    if edges:
        raise ValueError(f"Edge lists are only accepted for kind='custom', got kind={kind}")

    pairs = _template_edges(kind, k)
    return WeightedGraph(k, tuple((i, j, uniform) for i, j in pairs), name or f"{kind}:{k}")


def normalize_max_degree(g: WeightedGraph) -> WeightedGraph:
    """Scale all weights by one factor so the largest weighted degree is 1."""
    max_degree = g.degrees().max()
    if not max_degree > 0:
        raise ValueError("Cannot normalize a graph whose weights are all zero")
    edges = tuple((i, j, weight / max_degree) for i, j, weight in g.edges)
    return WeightedGraph(g.k, edges, g.name)


def laplacian(g: WeightedGraph) -> np.ndarray:
    """
    Return L = D - A as a read-only dense array.

    Rows sum to zero and the matrix is symmetric by construction.
    """
    adjacency = g.adjacency()
    matrix = np.diag(adjacency.sum(axis=1)) - adjacency
    matrix.setflags(write=False)
    return matrix


def is_connected(g: WeightedGraph) -> bool:
    """True iff the positive-weight edges form a single connected component."""
    return nx.is_connected(g.to_networkx())


def jacobi_eigenvalues(matrix, tol: float = 1e-12, max_sweeps: int = 100) -> np.ndarray:
    """
    Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.

    Args:
        matrix: Symmetric square array
        tol: Stop once off(A) < tol * ||A||_F
        max_sweeps: Upper bound on full sweeps over the off-diagonal

    Returns:
        np.ndarray: Eigenvalues in ascending order

    Raises:
        RuntimeError: If the off-diagonal mass does not drop below tol
    """
    a = np.array(matrix, dtype=float)
    n = a.shape[0]
    threshold = tol * np.linalg.norm(a)

    for _ in range(max_sweeps):
        off = np.linalg.norm(a - np.diag(np.diag(a)))
        if off <= threshold:
            return np.sort(np.diag(a))

        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue

                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = 1.0 / (abs(theta) + math.sqrt(theta * theta + 1.0))
                if theta < 0:
                    t = -t
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c

                col_p = a[:, p].copy()
                col_q = a[:, q].copy()
                a[:, p] = c * col_p - s * col_q
                a[:, q] = s * col_p + c * col_q

                row_p = a[p, :].copy()
                row_q = a[q, :].copy()
                a[p, :] = c * row_p - s * row_q
                a[q, :] = s * row_p + c * row_q

                a[p, q] = 0.0
                a[q, p] = 0.0

    raise RuntimeError(f"Jacobi eigensolver did not converge in {max_sweeps} sweeps")


def eigenvalues(L, method: str = 'jacobi') -> np.ndarray:
    """
    Sorted eigenvalues of a symmetric Laplacian, without connectivity checks.

    Eigenvalues within 1e-10 * ||L|| of zero are snapped to exactly 0.0.
    """
    matrix = np.asarray(L, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ValueError(f"Laplacian must be square, got shape {matrix.shape}")

    asymmetry = np.abs(matrix - matrix.T).max()
    if asymmetry > SYMMETRY_TOL:
        raise ValueError(f"Laplacian is not symmetric (max asymmetry {asymmetry:.3e})")

    if method == 'jacobi':
        values = jacobi_eigenvalues(matrix)
    elif method == 'eigh':
        values = np.linalg.eigvalsh(matrix)
    else:
        raise ValueError(f"Unknown eigen method: {method}")

    scale = np.linalg.norm(matrix)
    values = np.where(np.abs(values) <= ZERO_EIGENVALUE_TOL * scale, 0.0, values)
    return np.sort(values)


def spectrum(L, method: str = 'jacobi') -> LaplacianSpectrum:
    """
    Full sorted spectrum with lambda2, lambda_k and the quotient lambda_k/lambda2.

    Raises:
        ValueError: On a non-symmetric matrix, or when lambda2 vanishes
            (the graph is disconnected)
    """
    values = eigenvalues(L, method)
    lambda2 = float(values[1])
    if lambda2 <= CONNECTIVITY_TOL:
        raise ValueError(f"Graph is disconnected (lambda2 = {lambda2:.3e})")

    lambda_k = float(values[-1])
    return LaplacianSpectrum(
        eigenvalues=tuple(float(v) for v in values),
        lambda2=lambda2,
        lambda_k=lambda_k,
        quotient=lambda_k / lambda2,
    )


def graph_spectrum(g: WeightedGraph, method: str = 'jacobi') -> LaplacianSpectrum:
    """Spectrum of a graph, requiring connectivity by graph search first."""
    if not is_connected(g):
        raise ValueError(f"Graph {g.name} is not connected")
    return spectrum(laplacian(g), method)


def validate_reference_spectrum(name: str, result: LaplacianSpectrum):
    """
    Check a builtin topology against its published spectrum.

    The published quotients were formed from eigenvalues rounded to four
    decimals, so the quotient is compared with a relative tolerance.
    """
    reference = REFERENCE_RESULTS[name]
    if abs(result.lambda2 - reference['lambda2']) > 5e-5:
        raise RuntimeError(f"{name}: lambda2 {result.lambda2:.5f} != {reference['lambda2']:.4f}")
    if abs(result.lambda_k - reference['lambda_k']) > 5e-5:
        raise RuntimeError(f"{name}: lambda_k {result.lambda_k:.5f} != {reference['lambda_k']:.4f}")
    if abs(result.quotient - reference['quotient']) > 1e-3 * reference['quotient']:
        raise RuntimeError(f"{name}: quotient {result.quotient:.5f} != {reference['quotient']:.4f}")


def builtin_graph(name: str) -> WeightedGraph:
    """
    Resolve a builtin topology name.

    Examples:
        'g4' -> path(4), weights 1/4
        'path3' -> path(3), weights 1/3
        'ring:6' -> ring(6), weights 1/6
    """
    key = GRAPH_ALIASES.get(name.lower(), name.lower())

    if key in BUILTIN_GRAPHS:
        kind, k = BUILTIN_GRAPHS[key]
        graph = build_topology(kind, k, name=key)
        validate_reference_spectrum(key, graph_spectrum(graph))
        return graph

    if ':' in key:
        kind, _, count = key.partition(':')
        try:
            k = int(count)
        except ValueError:
            raise ValueError(f"Invalid node count in graph name: {name}") from None
        return build_topology(kind, k, name=key)

    raise ValueError(f"Unknown graph: {name}")


def load_graph(path: str) -> WeightedGraph:
    """
    Load a graph from a TOML or JSON file.

    Expected keys: k, kind, optional weight, optional edges = [[i, j, w], ...]
    with 1-based node indices.
    """
    file = Path(path)
    if not file.exists():
        raise ValueError(f"Graph file not found: {path}")

    if file.suffix == '.json':
        data = json.loads(file.read_text())
    else:
        with open(file, 'rb') as f:
            data = tomllib.load(f)

    if 'k' not in data:
        raise ValueError(f"Graph file {path} is missing 'k'")

    edges = data.get('edges')
    kind = data.get('kind', 'custom' if edges else None)
    if kind is None:
        raise ValueError(f"Graph file {path} needs 'kind' or 'edges'")

    if edges:
        edges = [(entry[0] - 1, entry[1] - 1, *entry[2:]) for entry in edges]

    return build_topology(
        kind,
        int(data['k']),
        weight=data.get('weight'),
        edges=edges,
        name=data.get('name', file.stem),
    )


def resolve_graph(name: str) -> WeightedGraph:
    """Resolve a builtin name, an alias, a 'kind:k' string or a graph file path."""
    if name.endswith(('.toml', '.json')) or Path(name).is_file():
        return load_graph(name)
    return builtin_graph(name)
