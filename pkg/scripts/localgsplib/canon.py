"""
Exact isomorphism of rooted balls.

A ball is canonically labeled by individualization-refinement: colors start from (distance to root, degree), are
refined by neighbor-color multisets until stable, and every remaining tie is split by backtracking. Each leaf of the
search is a discrete ordering of the nodes; the canonical form is the leaf with the lexicographically smallest
(edge list, weight list) encoding. Automorphisms found along the way prune equivalent branches.

Byte layout of a code (big-endian):

    magic        1 byte   0xB1
    version      1 byte   FORMAT_VERSION
    node count   uint32
    root         uint32   always 0, the root is first in canonical order
    edge count   uint32
    edges        edge count x (uint32, uint32), sorted, u < v
    weighted     1 byte   0 or 1
    weights      edge count x float64, in edge order (only when weighted)
"""
import functools
import logging
import math
import struct
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from .config import get_aut_cap, get_aut_max_order
from .errors import LocalGspError
from .graph import Graph, SignalizedBall, bfs_distances, build_graph

logger = logging.getLogger("localgsp")

MAGIC = 0xB1
FORMAT_VERSION = 1

_HEADER = struct.Struct(">BBIII")
_EDGE = struct.Struct(">II")
_WEIGHT = struct.Struct(">d")

Permutation = Tuple[int, ...]


class CanonError(LocalGspError):
    pass


class CanonicalCode:
    """
    The canonical byte string of a rooted ball, plus the relabeling that carried the input ball onto canonical form:
    relabeling[v] is the canonical position of input node v. Codes read back from storage have no relabeling.
    """

    def __init__(self, data: bytes, relabeling: Optional[Permutation] = None):
        self.bytes = data
        self.relabeling = relabeling

    def __eq__(self, other) -> bool:
        if not isinstance(other, CanonicalCode):
            return NotImplemented
        return self.bytes == other.bytes

    def __hash__(self) -> int:
        return hash(self.bytes)

    def __lt__(self, other: "CanonicalCode") -> bool:
        return self.bytes < other.bytes

    def __repr__(self) -> str:
        return f"CanonicalCode({self.bytes.hex()})"

    @property
    def node_count(self) -> int:
        return decode(self.bytes)[0]

    @property
    def weighted(self) -> bool:
        return decode(self.bytes)[2] is not None

    def to_ball(self, signal: Sequence[float], depth: int) -> SignalizedBall:
        """
        Rebuilds the canonical ball, root at position 0, carrying a signal given in canonical node order.
        """
        n, edges, weights = decode(self.bytes)
        return SignalizedBall(build_graph(n, edges, weights, signal), 0, depth)

    def canonical_signal(self, signal: Sequence[float]) -> np.ndarray:
        """
        Moves a signal given in input node order into canonical node order.
        """
        if self.relabeling is None:
            raise CanonError("This code carries no relabeling")
        moved = np.empty(len(self.relabeling))
        moved[list(self.relabeling)] = signal
        return moved


@functools.lru_cache(maxsize=4096)
def decode(data: bytes) -> Tuple[int, Tuple[Tuple[int, int], ...], Optional[Tuple[float, ...]]]:
    if len(data) < _HEADER.size:
        raise CanonError("Canonical code is truncated")
    magic, version, n, root, m = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise CanonError(f"Not a canonical code (magic byte {magic:#x})")
    if version != FORMAT_VERSION:
        raise CanonError(f"Unsupported canonical code version {version}, expected {FORMAT_VERSION}")
    offset = _HEADER.size
    edges = []
    for _ in range(m):
        edges.append(_EDGE.unpack_from(data, offset))
        offset += _EDGE.size
    weighted = data[offset]
    offset += 1
    weights = None
    if weighted:
        weights = tuple(_WEIGHT.unpack_from(data, offset + i * _WEIGHT.size)[0] for i in range(m))
        offset += m * _WEIGHT.size
    if offset != len(data):
        raise CanonError("Canonical code has trailing bytes")
    return n, tuple(edges), weights


def _encode(n: int, edges: Sequence[Tuple[int, int]], weights: Optional[Sequence[float]]) -> bytes:
    parts = [_HEADER.pack(MAGIC, FORMAT_VERSION, n, 0, len(edges))]
    parts.extend(_EDGE.pack(u, v) for u, v in edges)
    parts.append(bytes([1 if weights is not None else 0]))
    if weights is not None:
        parts.extend(_WEIGHT.pack(w) for w in weights)
    return b"".join(parts)


class RootedStructure:
    """
    Adjacency of a rooted ball with stable root-aware colors. Automorphism searches and canonical labeling both run
    on this view; signals are not part of it.
    """

    def __init__(self, graph: Graph, root: int):
        self.n = graph.n
        self.root = root
        self.weighted = graph.weights is not None
        self.adjacency: List[Dict[int, float]] = [{} for _ in range(self.n)]
        for i, (u, v) in enumerate(graph.edges):
            w = float(graph.weights[i]) if graph.weights is not None else 0.0
            self.adjacency[u][v] = w
            self.adjacency[v][u] = w
        distance = bfs_distances(graph, root)
        self.colors = self.refine([(distance[v], len(self.adjacency[v])) for v in range(self.n)])
        # BFS order keeps each newly placed node adjacent to an earlier one, which prunes the match search early
        self.order = sorted(range(self.n), key=lambda v: (distance[v], self.colors[v], v))
        self.cells: Dict[int, List[int]] = {}
        for v in range(self.n):
            self.cells.setdefault(self.colors[v], []).append(v)

    def refine(self, initial: Sequence) -> List[int]:
        ranking = {key: i for i, key in enumerate(sorted(set(initial)))}
        colors = [ranking[key] for key in initial]
        while True:
            signatures = [
                (colors[v], tuple(sorted((colors[u], w) for u, w in self.adjacency[v].items()))) for v in range(self.n)
            ]
            ranking = {sig: i for i, sig in enumerate(sorted(set(signatures)))}
            refined = [ranking[sig] for sig in signatures]
            if len(ranking) == len(set(colors)):
                return refined
            colors = refined

    def leaf_key(self, position: Sequence[int]) -> Tuple[Tuple[Tuple[int, int], ...], Tuple[float, ...]]:
        edges = []
        for u in range(self.n):
            for v, w in self.adjacency[u].items():
                if u < v:
                    a, b = position[u], position[v]
                    edges.append((min(a, b), max(a, b), w))
        edges.sort()
        return tuple((a, b) for a, b, _ in edges), tuple(w for _, _, w in edges) if self.weighted else ()

    def canonical_form(self) -> CanonicalCode:
        best: List = [None, None]
        automorphisms: List[Permutation] = []

        def visit(colors: List[int], prefix: Tuple[int, ...]):
            cells: Dict[int, List[int]] = {}
            for v in range(self.n):
                cells.setdefault(colors[v], []).append(v)
            target = next((cells[c] for c in sorted(cells) if len(cells[c]) > 1), None)
            if target is None:
                key = self.leaf_key(colors)
                if best[0] is None or key < best[0]:
                    best[0], best[1] = key, list(colors)
                elif key == best[0]:
                    # Two leaves with equal keys differ by an automorphism
                    inverse = [0] * self.n
                    for v, p in enumerate(best[1]):
                        inverse[p] = v
                    automorphisms.append(tuple(inverse[colors[v]] for v in range(self.n)))
                return
            explored: List[int] = []
            for v in target:
                if explored and self._same_orbit(v, explored, prefix, automorphisms):
                    continue
                split = [(c, 0 if u == v else 1) for u, c in enumerate(colors)]
                visit(self.refine(split), prefix + (v,))
                explored.append(v)

        visit(list(self.colors), ())
        key, position = best
        edges, weights = key
        return CanonicalCode(_encode(self.n, edges, weights if self.weighted else None), tuple(position))

    def _same_orbit(self, v: int, explored: List[int], prefix: Tuple[int, ...], automorphisms: List[Permutation]):
        parent = list(range(self.n))

        def find(a: int) -> int:
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        for g in automorphisms:
            if all(g[p] == p for p in prefix):
                for a in range(self.n):
                    ra, rb = find(a), find(g[a])
                    if ra != rb:
                        parent[ra] = rb
        root = find(v)
        return any(find(u) == root for u in explored)

    def _consistent(self, v: int, u: int, image: Dict[int, int]) -> bool:
        adjacency_v = self.adjacency[v]
        adjacency_u = self.adjacency[u]
        for w, weight in adjacency_v.items():
            if w in image:
                mapped = image[w]
                if mapped not in adjacency_u or adjacency_u[mapped] != weight:
                    return False
        mapped_neighbors = sum(1 for w in adjacency_v if w in image)
        images_adjacent = sum(1 for w in image if image[w] in adjacency_u)
        return mapped_neighbors == images_adjacent

    def matches(
        self, accept: Callable[[int, int], bool] = lambda v, u: True, limit: Optional[int] = None
    ) -> Iterator[Permutation]:
        """
        Yields root-fixing automorphisms g (as tuples, g[v] is the image of v) with accept(v, g[v]) for every v.
        """
        image: Dict[int, int] = {}
        used = [False] * self.n
        produced = 0

        def extend(i: int) -> Iterator[Permutation]:
            nonlocal produced
            if limit is not None and produced >= limit:
                return
            if i == self.n:
                produced += 1
                yield tuple(image[v] for v in range(self.n))
                return
            v = self.order[i]
            for u in self.cells[self.colors[v]]:
                if used[u] or not accept(v, u) or not self._consistent(v, u, image):
                    continue
                image[v] = u
                used[u] = True
                yield from extend(i + 1)
                del image[v]
                used[u] = False

        yield from extend(0)

    def orbit_distance(self, x: np.ndarray, y: np.ndarray) -> float:
        """
        min over automorphisms g of sum_v (x[g(v)] - y[v])^2, by branch and bound with the identity as incumbent.
        """
        best = float(np.sum((x - y) ** 2))
        if best == 0.0:
            return 0.0
        lower = []
        for v in self.order:
            lower.append(min((x[u] - y[v]) ** 2 for u in self.cells[self.colors[v]]))
        remaining = [0.0] * (self.n + 1)
        for i in range(self.n - 1, -1, -1):
            remaining[i] = remaining[i + 1] + lower[i]
        image: Dict[int, int] = {}
        used = [False] * self.n

        def extend(i: int, partial: float):
            nonlocal best
            if i == self.n:
                best = min(best, partial)
                return
            v = self.order[i]
            candidates = sorted(
                (u for u in self.cells[self.colors[v]] if not used[u]), key=lambda u: (x[u] - y[v]) ** 2
            )
            for u in candidates:
                cost = partial + (x[u] - y[v]) ** 2
                if cost + remaining[i + 1] >= best:
                    # candidates are sorted by cost, so no later one can do better
                    break
                if not self._consistent(v, u, image):
                    continue
                image[v] = u
                used[u] = True
                extend(i + 1, cost)
                del image[v]
                used[u] = False
                if best == 0.0:
                    return

        extend(0, 0.0)
        return best

    def orbit_minimum(self, x: np.ndarray) -> np.ndarray:
        """
        The lexicographically smallest signal in the automorphism orbit of x, read in node order. Two signals lie in
        one orbit exactly when their orbit minima are equal.
        """
        best: List = [None, None]
        automorphisms: List[Permutation] = []
        image: Dict[int, int] = {}
        used = [False] * self.n
        values: List[float] = []

        def extend(v: int):
            if v == self.n:
                leaf = tuple(image[p] for p in range(self.n))
                if best[0] is None or values < best[0]:
                    best[0], best[1] = list(values), leaf
                elif values == best[0]:
                    # Equal sequences: the leaves differ by an automorphism that preserves x
                    sigma = [0] * self.n
                    for p in range(self.n):
                        sigma[best[1][p]] = leaf[p]
                    automorphisms.append(tuple(sigma))
                return
            prefix = tuple(image[p] for p in range(v))
            explored: List[int] = []
            for u in sorted((u for u in self.cells[self.colors[v]] if not used[u]), key=lambda u: x[u]):
                if best[0] is not None and best[0][:v] == values and x[u] > best[0][v]:
                    break
                if not self._consistent(v, u, image):
                    continue
                if explored and self._same_orbit(u, explored, prefix, automorphisms):
                    continue
                image[v] = u
                used[u] = True
                values.append(float(x[u]))
                extend(v + 1)
                values.pop()
                del image[v]
                used[u] = False
                explored.append(u)

        extend(0)
        return np.array(best[0], dtype=np.float64)


def canonical_form(ball: SignalizedBall) -> CanonicalCode:
    return RootedStructure(ball.graph, ball.root).canonical_form()


@functools.lru_cache(maxsize=4096)
def structure_of_code(data: bytes) -> RootedStructure:
    n, edges, weights = decode(data)
    return RootedStructure(build_graph(n, edges, weights), 0)


class AutomorphismGroup:
    """
    The explicit list of root-fixing automorphisms of a rooted ball; elements[i][v] is the image of node v.
    """

    def __init__(self, elements: List[Permutation]):
        self.elements = elements

    @property
    def order(self) -> int:
        return len(self.elements)

    def __contains__(self, permutation) -> bool:
        return tuple(permutation) in set(self.elements)

    def __iter__(self):
        return iter(self.elements)

    @staticmethod
    def act(g: Permutation, x: Sequence[float]) -> np.ndarray:
        """
        The action [g(x)]_{g(v)} = x_v.
        """
        moved = np.empty(len(g))
        moved[list(g)] = x
        return moved


def automorphisms(ball: SignalizedBall, cap: Optional[int] = None, max_order: Optional[int] = None) -> AutomorphismGroup:
    cap = get_aut_cap() if cap is None else cap
    max_order = get_aut_max_order() if max_order is None else max_order
    if ball.n > cap:
        logger.warning("Refusing to enumerate automorphisms of a %d-node ball (cap %d)", ball.n, cap)
        raise CanonError(f"Ball has {ball.n} nodes, more than the automorphism cap of {cap}")
    structure = RootedStructure(ball.graph, ball.root)
    elements = list(structure.matches(limit=max_order + 1))
    if len(elements) > max_order:
        raise CanonError(f"Automorphism group has more than {max_order} elements")
    elements.sort()
    return AutomorphismGroup(elements)


def _as_vector(values: Sequence[float], n: int, name: str) -> np.ndarray:
    vector = np.asarray(values, dtype=np.float64)
    if vector.shape != (n,):
        raise CanonError(f"Signal {name} has shape {vector.shape}, expected ({n},)")
    return vector


def quotient_distance(ball: SignalizedBall, x: Sequence[float], y: Sequence[float]) -> float:
    """
    Distance between the automorphism orbits of x and y on the ball: min over g of ||g(x) - y||_2.
    """
    return structure_distance(RootedStructure(ball.graph, ball.root), x, y)


def structure_distance(structure: RootedStructure, x: Sequence[float], y: Sequence[float]) -> float:
    x_vector = _as_vector(x, structure.n, "x")
    y_vector = _as_vector(y, structure.n, "y")
    # [g(x)]_v = x_{h(v)} with h = g^-1, and h ranges over the whole group as g does
    return math.sqrt(structure.orbit_distance(x_vector, y_vector))


def same_orbit(structure: RootedStructure, x: Sequence[float], y: Sequence[float]) -> bool:
    """
    True when some automorphism carries x exactly onto y, i.e. the quotient distance is exactly zero.
    """
    x_vector = _as_vector(x, structure.n, "x")
    y_vector = _as_vector(y, structure.n, "y")
    if np.array_equal(x_vector, y_vector):
        return True
    if sorted(x_vector) != sorted(y_vector):
        return False
    match = structure.matches(accept=lambda v, u: x_vector[u] == y_vector[v], limit=1)
    return next(match, None) is not None
