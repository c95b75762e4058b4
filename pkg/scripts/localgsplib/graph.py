import logging
from collections import deque
from enum import Enum
from typing import Dict, Hashable, Iterable, List, Optional, Sequence, Set, Tuple

import networkx as nx
import numpy as np
import scipy.sparse as sp

from .errors import LocalGspError

logger = logging.getLogger("localgsp")

Edge = Tuple[int, int]


class GraphError(LocalGspError):
    pass


class GsoKind(str, Enum):
    LAPLACIAN = "laplacian"
    ADJACENCY = "adjacency"
    WEIGHTED_LAPLACIAN = "weighted-laplacian"

    @classmethod
    def parse(cls, value) -> "GsoKind":
        try:
            return cls(value)
        except ValueError:
            raise GraphError(f"Unknown shift operator kind '{value}', expected one of {[k.value for k in cls]}")


def _frozen_array(values) -> np.ndarray:
    array = np.array(values, dtype=np.float64)
    array.flags.writeable = False
    return array


class Graph:
    """
    A finite simple undirected graph on the dense node ids 0..n-1, with optional nonnegative edge weights and an
    optional real node signal. Instances are immutable once built; use build_graph to construct one.
    """

    def __init__(
        self,
        n: int,
        edges: Tuple[Edge, ...],
        weights: Optional[np.ndarray] = None,
        signal: Optional[np.ndarray] = None,
        labels: Optional[Tuple[Hashable, ...]] = None,
        name: Optional[str] = None,
    ):
        self.n = n
        self.edges = edges
        self.weights = weights
        self.signal = signal
        self.labels = labels
        self.name = name
        adjacency: List[List[int]] = [[] for _ in range(n)]
        self._edge_index: Dict[Edge, int] = {}
        for i, (u, v) in enumerate(edges):
            adjacency[u].append(v)
            adjacency[v].append(u)
            self._edge_index[(min(u, v), max(u, v))] = i
        self.neighbors: Tuple[Tuple[int, ...], ...] = tuple(tuple(sorted(nbrs)) for nbrs in adjacency)

    @property
    def weighted(self) -> bool:
        return self.weights is not None

    def degree(self, v: int) -> int:
        return len(self.neighbors[v])

    def degrees(self) -> np.ndarray:
        return np.array([len(nbrs) for nbrs in self.neighbors], dtype=np.int64)

    @property
    def max_degree(self) -> int:
        return max((len(nbrs) for nbrs in self.neighbors), default=0)

    def has_edge(self, u: int, v: int) -> bool:
        return (min(u, v), max(u, v)) in self._edge_index

    def edge_weight(self, u: int, v: int) -> float:
        index = self._edge_index[(min(u, v), max(u, v))]
        return 1.0 if self.weights is None else float(self.weights[index])

    def weighted_degrees(self) -> np.ndarray:
        degrees = np.zeros(self.n)
        for i, (u, v) in enumerate(self.edges):
            w = 1.0 if self.weights is None else self.weights[i]
            degrees[u] += w
            degrees[v] += w
        return degrees

    def signal_or_zero(self) -> np.ndarray:
        return self.signal if self.signal is not None else _frozen_array(np.zeros(self.n))

    def signal_bound(self) -> float:
        if self.signal is None or self.n == 0:
            return 0.0
        return float(np.max(np.abs(self.signal)))

    def with_signal(self, signal: Optional[Sequence[float]]) -> "Graph":
        return build_graph(self.n, self.edges, self.weights, signal, labels=self.labels, name=self.name)

    def relabeled(self, permutation: Sequence[int]) -> "Graph":
        """
        Returns the isomorphic graph in which node v is renamed permutation[v]; the signal moves with its node.
        """
        edges = [(permutation[u], permutation[v]) for u, v in self.edges]
        signal = None
        if self.signal is not None:
            signal = np.empty(self.n)
            signal[list(permutation)] = self.signal
        return build_graph(self.n, edges, self.weights, signal, name=self.name)

    def without_zero_weight_edges(self) -> "Graph":
        if self.weights is None:
            return self
        keep = [i for i, w in enumerate(self.weights) if w != 0.0]
        return build_graph(
            self.n,
            [self.edges[i] for i in keep],
            [self.weights[i] for i in keep],
            self.signal,
            labels=self.labels,
            name=self.name,
        )

    def to_networkx(self) -> nx.Graph:
        graph = nx.Graph()
        graph.add_nodes_from(range(self.n))
        for i, (u, v) in enumerate(self.edges):
            graph.add_edge(u, v, weight=1.0 if self.weights is None else float(self.weights[i]))
        if self.signal is not None:
            nx.set_node_attributes(graph, {v: float(self.signal[v]) for v in range(self.n)}, "signal")
        return graph

    def __eq__(self, other) -> bool:
        if not isinstance(other, Graph):
            return NotImplemented
        return (
            self.n == other.n
            and self.edges == other.edges
            and _arrays_equal(self.weights, other.weights)
            and _arrays_equal(self.signal, other.signal)
        )

    def __repr__(self) -> str:
        return f"Graph(n={self.n}, edges={len(self.edges)}, weighted={self.weighted}, signal={self.signal is not None})"


def _arrays_equal(a: Optional[np.ndarray], b: Optional[np.ndarray]) -> bool:
    if a is None or b is None:
        return a is None and b is None
    return a.shape == b.shape and bool(np.array_equal(a, b))


def build_graph(
    n: int,
    edges: Iterable[Sequence[int]],
    weights: Optional[Sequence[float]] = None,
    signal: Optional[Sequence[float]] = None,
    labels: Optional[Sequence[Hashable]] = None,
    name: Optional[str] = None,
) -> Graph:
    if n < 0:
        raise GraphError(f"Node count must be nonnegative, got {n}")
    checked: List[Edge] = []
    seen: Set[Edge] = set()
    for pair in edges:
        if len(pair) != 2:
            raise GraphError(f"Edge {tuple(pair)} is not a node pair")
        u, v = int(pair[0]), int(pair[1])
        if u == v:
            raise GraphError(f"Self-loop at node {u} is not allowed")
        if not (0 <= u < n and 0 <= v < n):
            raise GraphError(f"Edge ({u}, {v}) has an endpoint outside 0..{n - 1}")
        key = (min(u, v), max(u, v))
        if key in seen:
            raise GraphError(f"Duplicate edge ({u}, {v})")
        seen.add(key)
        checked.append((u, v))

    weight_array = None
    if weights is not None:
        if len(weights) != len(checked):
            raise GraphError(f"Got {len(weights)} weights for {len(checked)} edges")
        # + 0.0 folds -0.0 into 0.0 so that weights compare bitwise
        weight_array = _frozen_array([float(w) + 0.0 for w in weights])
        if np.any(~np.isfinite(weight_array)) or np.any(weight_array < 0):
            raise GraphError("Edge weights must be finite and nonnegative")

    signal_array = None
    if signal is not None:
        if len(signal) != n:
            raise GraphError(f"Signal has length {len(signal)} but the graph has {n} nodes")
        signal_array = _frozen_array(signal)
        if np.any(~np.isfinite(signal_array)):
            raise GraphError("Signal values must be finite")

    if labels is not None and len(labels) != n:
        raise GraphError(f"Got {len(labels)} node labels for {n} nodes")

    return Graph(
        n,
        tuple(checked),
        weight_array,
        signal_array,
        labels=tuple(labels) if labels is not None else None,
        name=name,
    )


def _check_node(G: Graph, v: int):
    if not 0 <= v < G.n:
        raise GraphError(f"Node {v} is outside 0..{G.n - 1}")


def k_hop_neighborhood(G: Graph, seed: Iterable[int], k: int) -> Set[int]:
    if k < 0:
        raise GraphError(f"Hop count must be nonnegative, got {k}")
    frontier = set()
    for v in seed:
        _check_node(G, v)
        frontier.add(v)
    reached = set(frontier)
    for _ in range(k):
        frontier = {u for v in frontier for u in G.neighbors[v]} - reached
        if not frontier:
            break
        reached |= frontier
    return reached


class ShiftOperator:
    """
    A graph shift operator S: a symmetric sparse matrix whose off-diagonal pattern is the graph adjacency.
    """

    def __init__(self, kind: GsoKind, matrix: sp.csr_matrix):
        self.kind = kind
        self.matrix = matrix

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def apply(self, x: np.ndarray) -> np.ndarray:
        return self.matrix @ x

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()


def build_gso(G: Graph, kind: GsoKind = GsoKind.LAPLACIAN) -> ShiftOperator:
    kind = GsoKind.parse(kind)
    if kind == GsoKind.WEIGHTED_LAPLACIAN and G.weights is None:
        raise GraphError("A weighted Laplacian needs edge weights")

    m = len(G.edges)
    us = np.fromiter((u for u, _ in G.edges), dtype=np.int64, count=m)
    vs = np.fromiter((v for _, v in G.edges), dtype=np.int64, count=m)
    if kind == GsoKind.WEIGHTED_LAPLACIAN:
        assert G.weights is not None
        off = -np.asarray(G.weights)
        diagonal = G.weighted_degrees()
    elif kind == GsoKind.LAPLACIAN:
        off = -np.ones(m)
        diagonal = G.degrees().astype(np.float64)
    else:
        off = np.ones(m)
        diagonal = None

    rows = [us, vs]
    cols = [vs, us]
    data = [off, off]
    if diagonal is not None:
        nodes = np.arange(G.n)
        rows.append(nodes)
        cols.append(nodes)
        data.append(diagonal)
    matrix = sp.coo_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))), shape=(G.n, G.n)
    ).tocsr()
    return ShiftOperator(kind, matrix)


class SignalizedBall:
    """
    A rooted K-ball with the signal (and weights, if any) restricted to its nodes. The ball is stored as a Graph
    on local ids; nodes[i] is the id of local node i in the graph it came from, when it came from one.
    """

    def __init__(self, graph: Graph, root: int, depth: int, nodes: Optional[Tuple[Hashable, ...]] = None):
        if graph.signal is None:
            raise GraphError("A signalized ball needs a signal")
        self.graph = graph
        self.root = root
        self.depth = depth
        self.nodes = nodes

    @property
    def n(self) -> int:
        return self.graph.n

    @property
    def signal(self) -> np.ndarray:
        assert self.graph.signal is not None
        return self.graph.signal

    @property
    def weights(self) -> Optional[np.ndarray]:
        return self.graph.weights

    @property
    def root_value(self) -> float:
        return float(self.signal[self.root])

    def distances(self) -> List[int]:
        return bfs_distances(self.graph, self.root)

    def with_signal(self, signal: Sequence[float]) -> "SignalizedBall":
        return SignalizedBall(self.graph.with_signal(signal), self.root, self.depth, self.nodes)

    def relabeled(self, permutation: Sequence[int]) -> "SignalizedBall":
        nodes = None
        if self.nodes is not None:
            renamed: List[Hashable] = [None] * self.n
            for i, p in enumerate(permutation):
                renamed[p] = self.nodes[i]
            nodes = tuple(renamed)
        return SignalizedBall(self.graph.relabeled(permutation), permutation[self.root], self.depth, nodes)

    def __repr__(self) -> str:
        return f"SignalizedBall(n={self.n}, edges={len(self.graph.edges)}, root={self.root}, depth={self.depth})"


def bfs_distances(G: Graph, root: int) -> List[int]:
    distance = [-1] * G.n
    distance[root] = 0
    queue = deque([root])
    while queue:
        v = queue.popleft()
        for u in G.neighbors[v]:
            if distance[u] < 0:
                distance[u] = distance[v] + 1
                queue.append(u)
    return distance


def extract_rooted_ball(G: Graph, r: int, K: int) -> SignalizedBall:
    _check_node(G, r)
    if K < 0:
        raise GraphError(f"Ball depth must be nonnegative, got {K}")
    # Breadth-first order, so the root is local node 0
    order = [r]
    distance = {r: 0}
    queue = deque([r])
    while queue:
        v = queue.popleft()
        if distance[v] == K:
            continue
        for u in G.neighbors[v]:
            if u not in distance:
                distance[u] = distance[v] + 1
                order.append(u)
                queue.append(u)
    local = {v: i for i, v in enumerate(order)}
    edges = []
    weights: Optional[List[float]] = [] if G.weights is not None else None
    for v in order:
        for u in G.neighbors[v]:
            if u in local and v < u:
                edges.append((local[v], local[u]))
                if weights is not None:
                    weights.append(G.edge_weight(v, u))
    signal = G.signal_or_zero()[order]
    ball = build_graph(len(order), edges, weights, signal)
    return SignalizedBall(ball, 0, K, tuple(order))


def from_networkx(graph: nx.Graph, signal_attr: str = "signal", weight_attr: Optional[str] = None) -> Graph:
    """
    Remaps arbitrary networkx node labels onto dense ids (in sorted label order when sortable) and records the labels.
    """
    try:
        labels = sorted(graph.nodes)
    except TypeError:
        labels = list(graph.nodes)
    index = {label: i for i, label in enumerate(labels)}
    edges = [(index[u], index[v]) for u, v in graph.edges]
    weights = None
    if weight_attr is not None:
        weights = [graph.edges[u, v].get(weight_attr, 1.0) for u, v in graph.edges]
    signal = None
    values = nx.get_node_attributes(graph, signal_attr)
    if values:
        signal = [values.get(label, 0.0) for label in labels]
    return build_graph(len(labels), edges, weights, signal, labels=labels)


def cycle_graph(n: int, signal: Optional[Sequence[float]] = None) -> Graph:
    return build_graph(n, nx.cycle_graph(n).edges, signal=signal, name=f"C{n}")


def path_graph(n: int, signal: Optional[Sequence[float]] = None) -> Graph:
    return build_graph(n, nx.path_graph(n).edges, signal=signal, name=f"P{n}")


def star_graph(leaves: int, signal: Optional[Sequence[float]] = None) -> Graph:
    return build_graph(leaves + 1, nx.star_graph(leaves).edges, signal=signal, name=f"S{leaves}")


def complete_graph(n: int, signal: Optional[Sequence[float]] = None) -> Graph:
    return build_graph(n, nx.complete_graph(n).edges, signal=signal, name=f"K{n}")


def random_bounded_degree_graph(
    n: int, max_degree: int, seed: int, edge_probability: Optional[float] = None, signal_bound: Optional[float] = 1.0
) -> Graph:
    """
    Erdos-Renyi graph with edges that would exceed max_degree dropped, plus a uniform signal in
    [-signal_bound, signal_bound] (no signal when signal_bound is None).
    """
    rng = np.random.default_rng(seed)
    if edge_probability is None:
        edge_probability = min(1.0, max_degree / max(n - 1, 1))
    candidate = nx.gnp_random_graph(n, edge_probability, seed=int(rng.integers(2**31)))
    degree = [0] * n
    edges = []
    for u, v in sorted(candidate.edges):
        if degree[u] < max_degree and degree[v] < max_degree:
            edges.append((u, v))
            degree[u] += 1
            degree[v] += 1
    signal = None
    if signal_bound is not None:
        signal = rng.uniform(-signal_bound, signal_bound, size=n)
    return build_graph(n, edges, signal=signal, name=f"random-{n}-{max_degree}-{seed}")


def sine_signal(n: int, frequency: int = 1) -> np.ndarray:
    return np.sin(2 * np.pi * frequency * np.arange(n) / n)
