import logging
import math
from typing import Callable, List, NamedTuple, Optional, Tuple

import numpy as np
import ot
import pandas as pd

from .canon import structure_distance
from .distribution import BallDistribution, OmegaPoint, empirical_distribution
from .errors import LocalGspError
from .graph import SignalizedBall
from .parallel import parallel_map

logger = logging.getLogger("localgsp")


class TransportError(LocalGspError):
    pass


class GroundMetricParams:
    """
    Parameter C of the ground metric d_C on Omega_K: the cost between different balls, half the cap within one ball.
    """

    def __init__(self, C: float):
        if not (math.isfinite(C) and C > 0):
            raise TransportError(f"The ground metric needs a finite C > 0, got {C}")
        self.C = float(C)


class TransportPlan:
    def __init__(self, rows: List[OmegaPoint], cols: List[OmegaPoint], flows: np.ndarray, cost: float):
        self.rows = rows
        self.cols = cols
        self.flows = flows
        self.cost = cost

    def to_frame(self) -> pd.DataFrame:
        """
        The nonzero flows as (row, col, flow) records.
        """
        i, j = np.nonzero(self.flows)
        return pd.DataFrame({"row": i, "col": j, "flow": self.flows[i, j]})


def _check_point(point: OmegaPoint):
    if point.weights is not None:
        raise TransportError("The ground metric is only defined on unweighted balls")


def ball_metric(a: OmegaPoint, b: OmegaPoint, C: float) -> float:
    """
    d_C(a, b): the quotient distance between the signals capped at 2C when both sit on the same ball, C otherwise.
    """
    params = GroundMetricParams(C)
    if a.depth != b.depth:
        raise TransportError(f"Cannot compare points of depth {a.depth} and {b.depth}")
    _check_point(a)
    _check_point(b)
    if a.code != b.code:
        return params.C
    return min(structure_distance(a.structure(), a.signal, b.signal), 2 * params.C)


def _check_pair(mu: BallDistribution, nu: BallDistribution):
    if mu.K != nu.K:
        raise TransportError(f"Cannot compare distributions of depth {mu.K} and {nu.K}")
    if len(mu) == 0 or len(nu) == 0:
        raise TransportError("Cannot transport an empty distribution")
    if mu.weighted or nu.weighted:
        raise TransportError("Wasserstein distances are only defined between unweighted ball distributions")


def cost_matrix(mu: BallDistribution, nu: BallDistribution, C: float, workers=None) -> np.ndarray:
    rows = parallel_map(lambda a: [ball_metric(a, b, C) for b in nu.points], mu.points, workers)
    return np.array(rows, dtype=np.float64).reshape(len(mu), len(nu))


def wasserstein1(mu: BallDistribution, nu: BallDistribution, C: float, workers=None) -> Tuple[float, TransportPlan]:
    """
    Exact 1-Wasserstein distance between two ball distributions under d_C, solved by network simplex.
    """
    _check_pair(mu, nu)
    GroundMetricParams(C)
    M = cost_matrix(mu, nu, C, workers)
    a = mu.masses / mu.masses.sum()
    b = nu.masses / nu.masses.sum()
    logger.info("Solving a %dx%d transportation problem", len(a), len(b))
    flows = ot.emd(a, b, M)
    cost = float(np.sum(flows * M))
    return cost, TransportPlan(mu.points, nu.points, flows, cost)


def transfer_bound(mu: BallDistribution, nu: BallDistribution, L: float, workers=None) -> float:
    """
    L W_1(mu, nu; 1/L), which bounds |E_mu[J] - E_nu[J]| for every L-Lipschitz J with values in [0, 1].
    """
    if not (math.isfinite(L) and L > 0):
        raise TransportError(f"The Lipschitz constant must be positive, got {L}")
    return L * wasserstein1(mu, nu, 1.0 / L, workers)[0]


def tighter_bound(
    mu: BallDistribution,
    nu: BallDistribution,
    L: float,
    A: float = 1.0,
    grid: int = 64,
    c_min: float = 1e-3,
    workers=None,
) -> float:
    """
    min over a log-spaced grid of C in [c_min, 1] of (L / C) W_1(mu, nu; A C / L), for J with range width A.
    Being a grid minimum, it bounds the infimum over (0, 1] from above.
    """
    if not (math.isfinite(L) and L > 0 and math.isfinite(A) and A > 0):
        raise TransportError(f"Need L > 0 and A > 0, got L={L}, A={A}")
    if grid < 2 or not 0 < c_min < 1:
        raise TransportError(f"Need grid >= 2 and 0 < c_min < 1, got grid={grid}, c_min={c_min}")
    values = [(L / C) * wasserstein1(mu, nu, A * C / L, workers)[0] for C in np.geomspace(c_min, 1.0, grid)]
    return float(min(values))


class LipschitzEstimate(NamedTuple):
    value: float
    radius: float
    pairs: int


def lipschitz_estimate(
    summary: Callable[[SignalizedBall], float],
    dist: BallDistribution,
    trials: int,
    seed: int,
    radius: float = 0.1,
    bound: Optional[float] = None,
) -> LipschitzEstimate:
    """
    An empirical lower bound on the Lipschitz constant of summary: the largest difference quotient over pairs of
    random perturbations (of size up to radius, clipped to [-bound, bound]) of atom signals.
    """
    if trials < 1 or radius <= 0:
        raise TransportError(f"Need trials >= 1 and radius > 0, got trials={trials}, radius={radius}")
    rng = np.random.default_rng(seed)
    best = 0.0
    pairs = 0
    for _ in range(trials):
        point = dist.atoms[int(rng.integers(len(dist)))][0]
        x = point.signal + rng.uniform(-radius, radius, point.node_count)
        y = point.signal + rng.uniform(-radius, radius, point.node_count)
        if bound is not None:
            x = np.clip(x, -bound, bound)
            y = np.clip(y, -bound, bound)
        distance = structure_distance(point.structure(), x, y)
        if distance == 0.0:
            continue
        ball = point.ball()
        change = abs(summary(ball.with_signal(x)) - summary(ball.with_signal(y)))
        best = max(best, change / distance)
        pairs += 1
    return LipschitzEstimate(best, radius, pairs)


def empirical_wasserstein(
    mu: BallDistribution, nu: BallDistribution, m: int, C: float, seed: int, workers=None
) -> float:
    """
    W_1 between m i.i.d. samples of mu and m i.i.d. samples of nu, the estimator available when only samples are.
    """
    mu_hat = empirical_distribution(mu, m, seed)
    nu_hat = empirical_distribution(nu, m, seed + 1)
    return wasserstein1(mu_hat, nu_hat, C, workers)[0]
