"""
Graphings as sampling oracles: a node sampler, a finite symmetric neighbor oracle and a signal evaluator.

Two constructions are built in. A finite-derived graphing blows each node i of a finite graph up into the interval
[i/n, (i+1)/n); points are (i, s) with s the offset inside the interval, and (i, s) is adjacent to (j, s) whenever
ij is an edge. A rotation graphing lives on the circle [0, 1) with t adjacent to t + alpha and t - alpha; points are
(t, k), meaning t + k alpha, so that orbit collisions are decided on the integer k and never in floating point.
"""
import ast
import logging
import math
import operator
import os
from abc import ABC, abstractmethod
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Callable, Dict, Hashable, List, Optional, Sequence, Union

import numpy as np
import pandas as pd
from tqdm import tqdm

from .distribution import BallDistribution, from_points, point_from_ball, pushforward
from .errors import InputValidationError, LocalGspError
from .graph import Graph, GsoKind, SignalizedBall, build_graph, build_gso
from .graphio import load_graph, read_json
from .parallel import parallel_map
from .spectral import moment_global, moment_local
from .transport import wasserstein1

logger = logging.getLogger("localgsp")

GOLDEN_ROTATION = (math.sqrt(5) - 1) / 2
BOUND_TOLERANCE = 1e-9

Point = Hashable


class GraphingError(LocalGspError):
    pass


class Graphing(ABC):
    kind = ""

    def __init__(self, degree_bound: int, signal_bound: float):
        self.degree_bound = degree_bound
        self.signal_bound = signal_bound

    @abstractmethod
    def sample_point(self, rng: np.random.Generator) -> Point:
        """
        Draws a node from the node measure.
        """

    @abstractmethod
    def neighbors(self, v: Point) -> List[Point]:
        pass

    @abstractmethod
    def signal(self, v: Point) -> float:
        pass

    def edge_weight(self, v: Point, u: Point) -> Optional[float]:
        return None

    @property
    def weighted(self) -> bool:
        return False

    def describe(self) -> Dict[str, Any]:
        return {"kind": self.kind, "degree_bound": self.degree_bound, "signal_bound": self.signal_bound}


class FiniteGraphing(Graphing):
    kind = "finite-derived"

    def __init__(self, graph: Graph):
        if graph.signal is None:
            raise GraphingError("A finite-derived graphing needs a graph with a signal")
        super().__init__(graph.max_degree, graph.signal_bound())
        self.graph = graph

    def sample_point(self, rng: np.random.Generator) -> Point:
        return int(rng.integers(self.graph.n)), float(rng.random())

    def neighbors(self, v: Point) -> List[Point]:
        i, s = v
        return [(j, s) for j in self.graph.neighbors[i]]

    def signal(self, v: Point) -> float:
        assert self.graph.signal is not None
        return float(self.graph.signal[v[0]])

    def edge_weight(self, v: Point, u: Point) -> Optional[float]:
        return self.graph.edge_weight(v[0], u[0]) if self.graph.weighted else None

    @property
    def weighted(self) -> bool:
        return self.graph.weighted

    def representatives(self) -> List[Point]:
        """
        One point per interval, for exhaustive sampling.
        """
        return [(i, 0.0) for i in range(self.graph.n)]

    def describe(self) -> Dict[str, Any]:
        return dict(super().describe(), graph=self.graph.name, n=self.graph.n)


SignalFunction = Callable[[float], float]


class RotationGraphing(Graphing):
    """
    The circle rotation by alpha. A Fraction alpha = p/q gives q-cycle components; alpha=None is the irrational
    rotation, whose components are bi-infinite paths. In that case signal values are evaluated at
    t + k * irrational_value mod 1.
    """

    kind = "rotation"

    def __init__(
        self,
        alpha: Optional[Fraction],
        signal_function: SignalFunction,
        signal_bound: float,
        irrational_value: float = GOLDEN_ROTATION,
    ):
        if alpha is not None and not 0 < alpha < 1:
            raise GraphingError(f"Rotation parameter must lie in (0, 1), got {alpha}")
        if alpha is None and not 0 < irrational_value < 1:
            raise GraphingError(f"Rotation parameter must lie in (0, 1), got {irrational_value}")
        super().__init__(2, signal_bound)
        self.alpha = alpha
        self.signal_function = signal_function
        self.irrational_value = irrational_value

    @property
    def period(self) -> Optional[int]:
        return self.alpha.denominator if self.alpha is not None else None

    def _point(self, t: float, k: int) -> Point:
        if self.period is not None:
            k %= self.period
        return t, k

    def sample_point(self, rng: np.random.Generator) -> Point:
        return float(rng.random()), 0

    def neighbors(self, v: Point) -> List[Point]:
        t, k = v
        forward = self._point(t, k + 1)
        backward = self._point(t, k - 1)
        return [forward] if forward == backward else [forward, backward]

    def position(self, v: Point) -> float:
        t, k = v
        if self.alpha is not None:
            return (t + float((k * self.alpha) % 1)) % 1.0
        return (t + k * self.irrational_value) % 1.0

    def signal(self, v: Point) -> float:
        return float(self.signal_function(self.position(v)))

    def describe(self) -> Dict[str, Any]:
        alpha = str(self.alpha) if self.alpha is not None else "irrational"
        return dict(super().describe(), alpha=alpha)


_BINARY_OPERATORS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: operator.pow,
    ast.Mod: operator.mod,
}
_UNARY_OPERATORS = {ast.UAdd: operator.pos, ast.USub: operator.neg}
_FUNCTIONS = {
    "sin": np.sin,
    "cos": np.cos,
    "tan": np.tan,
    "exp": np.exp,
    "log": np.log,
    "sqrt": np.sqrt,
    "abs": np.abs,
    "tanh": np.tanh,
    "floor": np.floor,
    "sign": np.sign,
}
_CONSTANTS = {"pi": math.pi, "e": math.e}


def compile_expression(text: str) -> SignalFunction:
    """
    Compiles an arithmetic expression in the variable t, e.g. "sin(2*pi*t)". Only numbers, t, pi, e, the
    arithmetic operators and a fixed set of numpy functions are accepted.
    """
    try:
        tree = ast.parse(text, mode="eval")
    except SyntaxError as error:
        raise InputValidationError(f"Cannot parse signal expression '{text}': {error.msg}")

    def check(node: ast.AST):
        if isinstance(node, ast.Expression):
            check(node.body)
        elif isinstance(node, ast.Constant):
            if not isinstance(node.value, (int, float)) or isinstance(node.value, bool):
                raise InputValidationError(f"Unsupported constant {node.value!r} in '{text}'")
        elif isinstance(node, ast.Name):
            if node.id != "t" and node.id not in _CONSTANTS:
                raise InputValidationError(f"Unknown name '{node.id}' in '{text}'")
        elif isinstance(node, ast.BinOp) and type(node.op) in _BINARY_OPERATORS:
            check(node.left)
            check(node.right)
        elif isinstance(node, ast.UnaryOp) and type(node.op) in _UNARY_OPERATORS:
            check(node.operand)
        elif isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id in _FUNCTIONS:
            if node.keywords or len(node.args) != 1:
                raise InputValidationError(f"{node.func.id}() takes exactly one argument in '{text}'")
            check(node.args[0])
        else:
            raise InputValidationError(f"Unsupported syntax {type(node).__name__} in '{text}'")

    def evaluate(node: ast.AST, t: float) -> float:
        if isinstance(node, ast.Constant):
            return float(node.value)
        if isinstance(node, ast.Name):
            return t if node.id == "t" else _CONSTANTS[node.id]
        if isinstance(node, ast.BinOp):
            return _BINARY_OPERATORS[type(node.op)](evaluate(node.left, t), evaluate(node.right, t))
        if isinstance(node, ast.UnaryOp):
            return _UNARY_OPERATORS[type(node.op)](evaluate(node.operand, t))
        assert isinstance(node, ast.Call) and isinstance(node.func, ast.Name)
        return float(_FUNCTIONS[node.func.id](evaluate(node.args[0], t)))

    check(tree)
    return lambda t: evaluate(tree.body, t)


def piecewise_signal(breaks: Sequence[float], values: Sequence[float]) -> SignalFunction:
    """
    values[0] on [0, breaks[0]), values[i] on [breaks[i-1], breaks[i]), values[-1] on [breaks[-1], 1).
    """
    if len(values) != len(breaks) + 1:
        raise InputValidationError(f"A piecewise signal with {len(breaks)} breaks needs {len(breaks) + 1} values")
    if list(breaks) != sorted(breaks) or any(not 0 < b < 1 for b in breaks):
        raise InputValidationError("Piecewise breaks must be increasing and inside (0, 1)")
    edges = np.asarray(breaks, dtype=np.float64)
    levels = np.asarray(values, dtype=np.float64)
    return lambda t: float(levels[np.searchsorted(edges, t, side="right")])


def signal_from_spec(spec: Optional[Dict[str, Any]]):
    """
    Returns (function, bound) for a signal spec of type constant, piecewise or expr. An expr spec may state its
    bound; otherwise the bound is measured on a fine grid.
    """
    if spec is None:
        return (lambda t: 0.0), 0.0
    kind = spec.get("type")
    if kind == "constant":
        value = float(spec.get("value", 0.0))
        return (lambda t: value), abs(value)
    if kind == "piecewise":
        function = piecewise_signal(spec.get("breaks", []), spec.get("values", []))
        return function, float(np.max(np.abs(spec["values"])))
    if kind == "expr":
        function = compile_expression(str(spec.get("expr", "")))
        if "bound" in spec:
            return function, float(spec["bound"])
        grid = np.linspace(0.0, 1.0, 65537, endpoint=False)
        bound = float(max(abs(function(float(t))) for t in grid))
        logger.info("Measured signal bound %g for '%s'", bound, spec["expr"])
        return function, bound
    raise InputValidationError(f"Unknown signal type '{kind}', expected constant, piecewise or expr")


def parse_alpha(alpha: Union[str, float, Fraction, None]) -> Optional[Fraction]:
    """
    "irrational" (or None) selects the irrational rotation; anything else is read as an exact rational and reduced.
    """
    if alpha is None or alpha == "irrational":
        return None
    try:
        value = Fraction(alpha) if not isinstance(alpha, float) else Fraction(str(alpha))
    except (ValueError, ZeroDivisionError):
        raise GraphingError(f"Cannot read rotation parameter '{alpha}'")
    if not 0 < value < 1:
        raise GraphingError(f"Rotation parameter must lie in (0, 1), got {alpha}")
    return value


def graphing_from_graph(G: Graph) -> FiniteGraphing:
    return FiniteGraphing(G)


def rotation_graphing(
    alpha: Union[str, float, Fraction, None], signal_spec: Optional[Dict[str, Any]] = None
) -> RotationGraphing:
    function, bound = signal_from_spec(signal_spec)
    return RotationGraphing(parse_alpha(alpha), function, bound)


def load_graphing(path: str) -> Graphing:
    """
    Reads {"kind": "rotation", "alpha": "1/5" | "irrational", "signal": {...}} or
    {"kind": "finite-derived", "graph": "g.json"}; graph paths are relative to the spec file.
    """
    spec = read_json(path)
    if not isinstance(spec, dict):
        raise InputValidationError(f"Graphing spec {path} must be a JSON object")
    kind = spec.get("kind")
    if kind == "rotation":
        return rotation_graphing(spec.get("alpha", "irrational"), spec.get("signal"))
    if kind == "finite-derived":
        if "graph" not in spec:
            raise InputValidationError("A finite-derived graphing spec needs a 'graph' path")
        graph_path = os.path.join(os.path.dirname(path), spec["graph"])
        return graphing_from_graph(load_graph(graph_path))
    raise InputValidationError(f"Unknown graphing kind '{kind}', expected rotation or finite-derived")


def sample_rooted_ball(
    g: Graphing, K: int, seed: Optional[int] = None, root: Optional[Point] = None, rng=None
) -> SignalizedBall:
    """
    Draws a root (unless one is given) and explores its K-ball through the neighbor oracle.
    """
    if K < 0:
        raise GraphingError(f"Ball depth must be nonnegative, got {K}")
    if root is None:
        root = g.sample_point(rng if rng is not None else np.random.default_rng(seed))
    order = [root]
    distance = {root: 0}
    adjacency: Dict[Point, List[Point]] = {}

    def neighbors_of(v: Point) -> List[Point]:
        if v not in adjacency:
            found = list(dict.fromkeys(g.neighbors(v)))
            if len(found) > g.degree_bound:
                raise GraphingError(f"Point {v} has {len(found)} neighbors, more than the degree bound {g.degree_bound}")
            adjacency[v] = found
        return adjacency[v]

    head = 0
    while head < len(order):
        v = order[head]
        head += 1
        if distance[v] == K:
            continue
        for u in neighbors_of(v):
            if u not in distance:
                distance[u] = distance[v] + 1
                order.append(u)

    local = {v: i for i, v in enumerate(order)}
    edges = []
    weights: Optional[List[float]] = [] if g.weighted else None
    for v in order:
        for u in neighbors_of(v):
            if u not in local:
                continue
            if v not in neighbors_of(u):
                raise GraphingError(f"Neighbor oracle is not symmetric at {v} and {u}")
            if local[v] < local[u]:
                edges.append((local[v], local[u]))
                if weights is not None:
                    weights.append(float(g.edge_weight(v, u)))
    signal = [g.signal(v) for v in order]
    return SignalizedBall(build_graph(len(order), edges, weights, signal), 0, K, tuple(order))


def _sample_rng(seed: int, i: int) -> np.random.Generator:
    return np.random.default_rng([seed, i])


def graphing_distribution(
    g: Graphing, K: int, samples: int = 1000, seed: int = 0, exhaustive: bool = False, workers=None
) -> BallDistribution:
    """
    The empirical K-ball distribution of a graphing. In exhaustive mode, available for finite-derived graphings, one
    ball per interval is taken, which reproduces the finite graph's distribution exactly.
    """
    if exhaustive:
        if not isinstance(g, FiniteGraphing):
            raise GraphingError("Exhaustive sampling needs a finite-derived graphing")
        roots = g.representatives()
        points = parallel_map(lambda v: point_from_ball(sample_rooted_ball(g, K, root=v)), roots, workers)
    else:
        if samples < 1:
            raise GraphingError(f"Sample count must be positive, got {samples}")
        points = parallel_map(
            lambda i: point_from_ball(sample_rooted_ball(g, K, rng=_sample_rng(seed, i))), range(samples), workers
        )
    source = dict(g.describe(), samples=len(points), seed=None if exhaustive else seed, exhaustive=exhaustive)
    return from_points(points, [1.0] * len(points), K, source)


@dataclass
class MomentEstimate:
    K: int
    value: float
    stderr: float
    samples: int
    seed: int


def graphing_moment(g: Graphing, K: int, samples: int = 1000, seed: int = 0, workers=None) -> MomentEstimate:
    """
    Monte-Carlo estimate of the K-th spectral moment of the graphing signal, averaging the local moment over sampled
    K-balls.
    """
    if samples < 2:
        raise GraphingError(f"A moment estimate needs at least 2 samples, got {samples}")
    values = np.array(
        parallel_map(
            lambda i: moment_local(sample_rooted_ball(g, K, rng=_sample_rng(seed, i))), range(samples), workers
        )
    )
    stderr = float(values.std(ddof=1) / math.sqrt(samples))
    return MomentEstimate(K, float(values.mean()), stderr, samples, seed)


@dataclass
class LaplacianEvaluation:
    ball: SignalizedBall
    values: np.ndarray
    root_powers: List[float]


def graphing_laplacian_apply(g: Graphing, v: Point, depth: int) -> LaplacianEvaluation:
    """
    [Sx]_u = sum over neighbors w of u of (x_u - x_w), on the depth-ball around v. values is Sx on the ball (exact
    at points closer than depth to v); root_powers[k] is [S^k x]_v for k = 0..depth.
    """
    if depth < 1:
        raise GraphingError(f"Laplacian evaluation needs depth >= 1, got {depth}")
    ball = sample_rooted_ball(g, depth, root=v)
    S = build_gso(ball.graph, GsoKind.WEIGHTED_LAPLACIAN if ball.weights is not None else GsoKind.LAPLACIAN)
    powers = [ball.signal]
    for _ in range(depth):
        powers.append(S.apply(powers[-1]))
    return LaplacianEvaluation(ball, powers[1], [float(p[ball.root]) for p in powers])


@dataclass
class ConvergenceReport:
    frame: pd.DataFrame
    limit: List[MomentEstimate]
    reference: BallDistribution


def _check_bounds(G: Graph, degree_bound: int, signal_bound: float):
    if G.max_degree > degree_bound:
        raise GraphingError(f"Graph {G.name} has degree {G.max_degree}, above the bound {degree_bound}")
    if G.signal_bound() > signal_bound * (1 + BOUND_TOLERANCE) + BOUND_TOLERANCE:
        logger.warning("Graph %s violates the signal bound %g", G.name, signal_bound)
        raise GraphingError(f"Graph {G.name} has signal bound {G.signal_bound()}, above {signal_bound}")


def convergence_experiment(
    sequence: Sequence[Graph],
    g: Graphing,
    K: int,
    C: float = 1.0,
    samples: int = 1000,
    seed: int = 0,
    exhaustive: bool = False,
    workers=None,
    progress: bool = False,
) -> ConvergenceReport:
    """
    Compares each graph of a sequence with a graphing: W_1 between K-ball distributions, and the moments m_0..m_K.
    The last row of the frame holds the graphing's Monte-Carlo moment estimates.
    """
    for G in sequence:
        _check_bounds(G, g.degree_bound, g.signal_bound)
    reference = graphing_distribution(g, K, samples, seed, exhaustive=exhaustive, workers=workers)
    for point in reference.points:
        if np.max(np.abs(point.signal)) > g.signal_bound * (1 + BOUND_TOLERANCE) + BOUND_TOLERANCE:
            logger.warning("Sampled graphing signal exceeds the bound %g", g.signal_bound)
            raise GraphingError(f"Graphing signal exceeds its bound {g.signal_bound}")

    rows = []
    for G in tqdm(sequence, desc="Graphs", disable=not progress):
        if G.signal is None:
            G = G.with_signal(np.zeros(G.n))
        distance, _ = wasserstein1(pushforward(G, K, workers=workers), reference, C, workers)
        row: Dict[str, Any] = {"graph": G.name, "n": G.n, "wasserstein": distance}
        for k in range(K + 1):
            row[f"m{k}"] = moment_global(G, k)
        rows.append(row)

    limit = [graphing_moment(g, k, max(samples, 2), seed, workers) for k in range(K + 1)]
    row = {"graph": f"graphing:{g.kind}", "n": None, "wasserstein": None}
    for estimate in limit:
        row[f"m{estimate.K}"] = estimate.value
    rows.append(row)
    return ConvergenceReport(pd.DataFrame(rows), limit, reference)
