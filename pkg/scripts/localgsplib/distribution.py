import base64
import logging
from typing import Any, Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .canon import CanonicalCode, RootedStructure, canonical_form, decode, structure_of_code
from .errors import InputValidationError, LocalGspError
from .graph import Graph, SignalizedBall, extract_rooted_ball
from .graphio import read_json, write_json
from .parallel import parallel_map

logger = logging.getLogger("localgsp")


class DistributionError(LocalGspError):
    pass


class OmegaPoint:
    """
    A point of Omega_K: a canonical rooted ball together with a signal listed in canonical node order.
    Edge weights, when present, are part of the code and listed in canonical edge order.
    """

    def __init__(self, code: CanonicalCode, signal: Sequence[float], depth: int):
        self.code = code
        self.signal = np.asarray(signal, dtype=np.float64)
        self.signal.flags.writeable = False
        self.depth = depth
        if self.signal.shape != (code.node_count,):
            raise DistributionError(
                f"Signal of length {len(self.signal)} does not fit a ball with {code.node_count} nodes"
            )

    @property
    def weights(self) -> Optional[Tuple[float, ...]]:
        return decode(self.code.bytes)[2]

    @property
    def node_count(self) -> int:
        return len(self.signal)

    @property
    def root_value(self) -> float:
        return float(self.signal[0])

    def structure(self) -> RootedStructure:
        return structure_of_code(self.code.bytes)

    def ball(self) -> SignalizedBall:
        return self.code.to_ball(self.signal, self.depth)

    def sort_key(self) -> Tuple[bytes, Tuple[float, ...]]:
        return self.code.bytes, tuple(self.signal.tolist())

    def __eq__(self, other) -> bool:
        if not isinstance(other, OmegaPoint):
            return NotImplemented
        return self.depth == other.depth and self.code == other.code and np.array_equal(self.signal, other.signal)

    def __repr__(self) -> str:
        return f"OmegaPoint(nodes={self.node_count}, depth={self.depth}, root_value={self.root_value})"


def point_from_ball(ball: SignalizedBall) -> OmegaPoint:
    """
    The Omega_K point of a ball. Its signal is the orbit minimum of the canonical signal, so isomorphic signalized
    balls map to equal points.
    """
    code = canonical_form(ball)
    signal = structure_of_code(code.bytes).orbit_minimum(code.canonical_signal(ball.signal))
    return OmegaPoint(CanonicalCode(code.bytes), signal, ball.depth)


class SupportBound(NamedTuple):
    degree_bound: int
    signal_bound: float
    ball_count: int


class BallDistribution:
    """
    An empirical probability measure on Omega_K. Atoms are sorted by code bytes, then signal, and no two atoms
    share a code and an automorphism orbit of signals.
    """

    def __init__(self, K: int, atoms: List[Tuple[OmegaPoint, float]], source: Optional[Dict[str, Any]] = None):
        self.K = K
        self.atoms = atoms
        self.source = source or {}

    @property
    def points(self) -> List[OmegaPoint]:
        return [point for point, _ in self.atoms]

    @property
    def masses(self) -> np.ndarray:
        return np.array([mass for _, mass in self.atoms])

    @property
    def weighted(self) -> bool:
        return any(point.weights is not None for point, _ in self.atoms)

    def __len__(self) -> int:
        return len(self.atoms)

    def expectation(self, summary) -> float:
        """
        E[summary] where summary maps a SignalizedBall to a real.
        """
        return float(sum(mass * summary(point.ball()) for point, mass in self.atoms))

    def to_dict(self) -> Dict[str, Any]:
        atoms = []
        for point, mass in self.atoms:
            atom: Dict[str, Any] = {
                "code": base64.b64encode(point.code.bytes).decode("ascii"),
                "signal": point.signal.tolist(),
            }
            if point.weights is not None:
                atom["weights"] = list(point.weights)
            atom["mass"] = mass
            atoms.append(atom)
        return {"K": self.K, "atoms": atoms, "source": self.source}

    @classmethod
    def from_dict(cls, payload: Dict[str, Any]) -> "BallDistribution":
        try:
            K = int(payload["K"])
            atoms = [
                (OmegaPoint(CanonicalCode(base64.b64decode(atom["code"])), atom["signal"], K), float(atom["mass"]))
                for atom in payload["atoms"]
            ]
        except (KeyError, TypeError, ValueError) as error:
            raise InputValidationError(f"Malformed distribution JSON: {error}")
        return cls(K, atoms, payload.get("source", {}))

    def save(self, path: str, metadata: Optional[Dict[str, Any]] = None):
        payload = self.to_dict()
        if metadata is not None:
            payload["metadata"] = metadata
        write_json(path, payload)

    @classmethod
    def load(cls, path: str) -> "BallDistribution":
        return cls.from_dict(read_json(path))


def from_points(
    points: Sequence[OmegaPoint], weights: Sequence[float], K: int, source: Optional[Dict[str, Any]] = None
) -> BallDistribution:
    """
    Merges weighted samples into atoms. Points carry orbit-minimal signals, so samples with equal codes whose
    signals lie in one automorphism orbit share a sort key and become one atom.
    """
    total = float(np.sum(weights))
    if not points or total <= 0:
        raise DistributionError("Cannot build a distribution from no mass")
    groups: Dict[Tuple[bytes, Tuple[float, ...]], List[Any]] = {}
    for point, weight in zip(points, weights):
        if weight <= 0:
            continue
        if point.depth > K:
            raise DistributionError(f"Sample of depth {point.depth} does not belong to Omega_{K}")
        entry = groups.setdefault(point.sort_key(), [point, 0.0])
        entry[1] += weight
    atoms = [(point, weight / total) for _, (point, weight) in sorted(groups.items(), key=lambda item: item[0])]
    return BallDistribution(K, atoms, source)


def pushforward(
    G: Graph,
    K: int,
    node_weights: Optional[Sequence[float]] = None,
    glue_zero_weights: bool = False,
    workers: Optional[int] = None,
) -> BallDistribution:
    """
    The distribution of signalized rooted K-balls of G under the uniform measure on nodes, or under node_weights.
    With glue_zero_weights, zero-weight edges are treated as absent.
    """
    if G.n == 0:
        raise DistributionError("A graph without nodes has no ball distribution")
    if glue_zero_weights:
        G = G.without_zero_weight_edges()
    if G.signal is None:
        logger.warning("Graph %s has no signal, using the zero signal", G.name or "")
    if node_weights is None:
        node_weights = [1.0] * G.n
    elif len(node_weights) != G.n or min(node_weights) < 0:
        raise DistributionError(f"Node weights must be {G.n} nonnegative values")

    logger.info("Extracting %d rooted %d-balls", G.n, K)
    points = parallel_map(lambda v: point_from_ball(extract_rooted_ball(G, v, K)), range(G.n), workers)
    source = {
        "graph": G.name,
        "n": G.n,
        "max_degree": G.max_degree,
        "signal_bound": G.signal_bound(),
        "zero_signal": G.signal is None,
        "weighted": G.weighted,
        "uniform": all(w == node_weights[0] for w in node_weights),
    }
    return from_points(points, node_weights, K, source)


def sample_points(dist: BallDistribution, m: int, seed: int) -> List[OmegaPoint]:
    if len(dist) == 0:
        raise DistributionError("Cannot sample from an empty distribution")
    if m < 1:
        raise DistributionError(f"Sample count must be positive, got {m}")
    masses = dist.masses
    rng = np.random.default_rng(seed)
    picks = rng.choice(len(dist), size=m, p=masses / masses.sum())
    return [dist.atoms[i][0] for i in picks]


def empirical_distribution(dist: BallDistribution, m: int, seed: int) -> BallDistribution:
    points = sample_points(dist, m, seed)
    source = dict(dist.source, samples=m, seed=seed)
    return from_points(points, [1.0] * m, dist.K, source)


def support_bound(dist: BallDistribution) -> SupportBound:
    """
    The compact support witnessed by the atoms: a degree bound, a signal bound and the number of distinct balls.
    """
    degree = int(dist.source.get("max_degree", 0))
    signal = 0.0
    codes = set()
    for point, _ in dist.atoms:
        codes.add(point.code.bytes)
        structure = point.structure()
        degree = max(degree, max((len(nbrs) for nbrs in structure.adjacency), default=0))
        if point.node_count:
            signal = max(signal, float(np.max(np.abs(point.signal))))
    return SupportBound(degree, signal, len(codes))
