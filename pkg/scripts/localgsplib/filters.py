import logging
from typing import Any, Dict, Optional, Sequence

import numpy as np
import scipy.sparse as sp

from .distribution import point_from_ball
from .errors import InputValidationError, LocalGspError
from .graph import Graph, GsoKind, ShiftOperator, SignalizedBall, build_gso, extract_rooted_ball
from .graphio import read_json, write_json

logger = logging.getLogger("localgsp")

LAPLACIAN_KINDS = (GsoKind.LAPLACIAN, GsoKind.WEIGHTED_LAPLACIAN)


class FilterError(LocalGspError):
    pass


class Filter:
    """
    A K-tap polynomial filter H(S) = sum_k taps[k] S^k over a shift operator of the given kind.
    """

    def __init__(self, taps: Sequence[float], gso_kind=GsoKind.LAPLACIAN):
        if len(taps) == 0:
            raise FilterError("A filter needs at least one tap")
        self.taps = np.asarray(taps, dtype=np.float64)
        if np.any(~np.isfinite(self.taps)):
            raise FilterError("Filter taps must be finite")
        self.gso_kind = GsoKind.parse(gso_kind)

    @property
    def order(self) -> int:
        return len(self.taps) - 1

    def to_dict(self) -> Dict[str, Any]:
        return {"taps": self.taps.tolist(), "gso": self.gso_kind.value}

    @classmethod
    def from_dict(cls, payload: Dict[str, Any]) -> "Filter":
        if not isinstance(payload, dict) or "taps" not in payload:
            raise InputValidationError("Filter JSON must be an object with 'taps'")
        return cls(payload["taps"], payload.get("gso", GsoKind.LAPLACIAN.value))

    def save(self, path: str):
        write_json(path, self.to_dict())

    @classmethod
    def load(cls, path: str) -> "Filter":
        return cls.from_dict(read_json(path))

    def __repr__(self) -> str:
        return f"Filter(taps={self.taps.tolist()}, gso={self.gso_kind.value})"


class NodeMap:
    """
    A node map from G to G2, given as mapping[v] for every node v of G. It need not be injective or surjective.
    """

    def __init__(self, mapping: Sequence[int]):
        self.mapping = tuple(int(u) for u in mapping)

    def __getitem__(self, v: int) -> int:
        return self.mapping[v]

    def __len__(self) -> int:
        return len(self.mapping)

    def check_total(self, G: Graph, G2: Graph):
        if len(self.mapping) != G.n:
            raise FilterError(f"Node map covers {len(self.mapping)} nodes but the source graph has {G.n}")
        for v, u in enumerate(self.mapping):
            if not 0 <= u < G2.n:
                raise FilterError(f"Node {v} is mapped to {u}, outside 0..{G2.n - 1}")


def _check_kind(f: Filter, S: ShiftOperator):
    if f.gso_kind != S.kind:
        raise FilterError(f"Filter expects a {f.gso_kind.value} shift operator, got {S.kind.value}")


def apply_filter(f: Filter, S: ShiftOperator, x: Sequence[float]) -> np.ndarray:
    _check_kind(f, S)
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (S.n,):
        raise FilterError(f"Signal has shape {x.shape} but the shift operator is {S.n}x{S.n}")
    y = f.taps[0] * x
    shifted = x
    for tap in f.taps[1:]:
        shifted = S.apply(shifted)
        y = y + tap * shifted
    return y


def filter_matrix(f: Filter, S: ShiftOperator) -> sp.csr_matrix:
    """
    H(S) as a sparse matrix, built by repeated sparse products.
    """
    _check_kind(f, S)
    identity = sp.identity(S.n, format="csr")
    H = f.taps[0] * identity
    power = identity
    for tap in f.taps[1:]:
        power = power @ S.matrix
        H = H + tap * power
    return sp.csr_matrix(H)


def _ball_gso(f: Filter, ball: SignalizedBall) -> ShiftOperator:
    return build_gso(ball.graph, f.gso_kind)


def local_filter_value(f: Filter, ball: SignalizedBall) -> float:
    """
    [H(S_ball) x_ball] at the root. Agrees with the global filter output at the node the ball was cut around.
    """
    if ball.depth < f.order:
        raise FilterError(f"A {f.order}-tap filter needs a ball of depth {f.order}, got depth {ball.depth}")
    return float(apply_filter(f, _ball_gso(f, ball), ball.signal)[ball.root])


def verify_k_morphism(G: Graph, G2: Graph, mapping: NodeMap, K: int) -> bool:
    mapping.check_total(G, G2)
    targets = {}
    for v in range(G.n):
        u = mapping[v]
        if u not in targets:
            targets[u] = point_from_ball(extract_rooted_ball(G2, u, K))
        target = targets[u]
        point = point_from_ball(extract_rooted_ball(G, v, K))
        if point != target:
            logger.info("Rooted %d-ball at %d is not isomorphic to the one at its image %d", K, v, u)
            return False
    return True


def _check_mse_inputs(f: Filter, sigma2: float):
    if sigma2 < 0:
        raise FilterError(f"Noise variance must be nonnegative, got {sigma2}")
    if f.gso_kind not in LAPLACIAN_KINDS:
        raise FilterError("The MSE summary is defined for Laplacian filters")


def mse_summary_global(f: Filter, sigma2: float, G: Graph) -> float:
    """
    J(G, x) = E ||x - H(x + eta)||^2 / n for eta ~ N(0, sigma2 I), in closed form:
    ||x - Hx||^2 / n + sigma2 ||H||_F^2 / n.
    """
    _check_mse_inputs(f, sigma2)
    if G.signal is None:
        raise FilterError("The MSE summary needs a signal")
    S = build_gso(G, f.gso_kind)
    residual = G.signal - apply_filter(f, S, G.signal)
    H = filter_matrix(f, S)
    frobenius = float(H.multiply(H).sum())
    return float(residual @ residual) / G.n + sigma2 * frobenius / G.n


def _root_column(f: Filter, S: ShiftOperator, root: int) -> np.ndarray:
    delta = np.zeros(S.n)
    delta[root] = 1.0
    return apply_filter(f, S, delta)


def mse_summary_local(f: Filter, sigma2: float, ball: SignalizedBall) -> float:
    """
    The per-node MSE term (x_r - [Hx]_r)^2 + sigma2 [H^2]_rr. The diagonal term looks 2K hops out, so the ball must
    have depth at least 2K.
    """
    _check_mse_inputs(f, sigma2)
    if ball.depth < 2 * f.order:
        raise FilterError(f"The MSE term of a {f.order}-tap filter needs depth {2 * f.order}, got {ball.depth}")
    S = _ball_gso(f, ball)
    residual = ball.root_value - float(apply_filter(f, S, ball.signal)[ball.root])
    column = _root_column(f, S, ball.root)
    return residual**2 + sigma2 * float(column @ column)


def mse_lipschitz_bound(f: Filter, ball: SignalizedBall, signal_bound: Optional[float] = None) -> float:
    """
    A Lipschitz constant of the MSE term in the signal, valid for signals bounded by signal_bound:
    2 ||(I - H) delta_r||_1 ||(I - H) delta_r||_2 a.
    """
    if ball.depth < f.order:
        raise FilterError(f"A {f.order}-tap filter needs a ball of depth {f.order}, got depth {ball.depth}")
    if signal_bound is None:
        signal_bound = ball.graph.signal_bound()
    S = _ball_gso(f, ball)
    residual = -_root_column(f, S, ball.root)
    residual[ball.root] += 1.0
    return 2.0 * float(np.abs(residual).sum()) * float(np.linalg.norm(residual)) * signal_bound
