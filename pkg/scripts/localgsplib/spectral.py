import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import scipy.linalg

from .distribution import BallDistribution
from .errors import LocalGspError
from .graph import Graph, GsoKind, ShiftOperator, SignalizedBall, build_gso

logger = logging.getLogger("localgsp")

EIGEN_TOLERANCE = 1e-8
NEGATIVE_TOLERANCE = 1e-10
# Jumps lighter than this fraction of the total mass are numerical noise from orthogonal eigenvectors
MASS_TOLERANCE = 1e-12


class SpectralError(LocalGspError):
    pass


class EigenSystem:
    """
    Ascending eigenvalues and orthonormal eigenvectors (as columns) of a symmetric shift operator. Each eigenvector
    has its first clearly nonzero component positive.
    """

    def __init__(self, eigenvalues: np.ndarray, eigenvectors: np.ndarray, kind: GsoKind):
        self.eigenvalues = eigenvalues
        self.eigenvectors = eigenvectors
        self.kind = kind

    @property
    def n(self) -> int:
        return len(self.eigenvalues)

    def gft(self, x: Sequence[float]) -> np.ndarray:
        """
        Graph Fourier coefficients <x, u_j>.
        """
        return self.eigenvectors.T @ np.asarray(x, dtype=np.float64)

    def inverse_gft(self, coefficients: Sequence[float]) -> np.ndarray:
        return self.eigenvectors @ np.asarray(coefficients, dtype=np.float64)


def eigendecompose(S: ShiftOperator) -> EigenSystem:
    dense = S.toarray()
    scale = max(1.0, float(np.abs(dense).max(initial=0.0)))
    if np.abs(dense - dense.T).max(initial=0.0) > 1e-12 * scale:
        raise SpectralError("The shift operator is not symmetric")
    eigenvalues, eigenvectors = scipy.linalg.eigh(dense)
    if S.kind in (GsoKind.LAPLACIAN, GsoKind.WEIGHTED_LAPLACIAN) and S.n > 0:
        if eigenvalues[0] < -NEGATIVE_TOLERANCE * scale:
            raise SpectralError(f"Laplacian has a negative eigenvalue {eigenvalues[0]}")
        eigenvalues = np.maximum(eigenvalues, 0.0)
    for j in range(eigenvectors.shape[1]):
        column = eigenvectors[:, j]
        leading = np.flatnonzero(np.abs(column) > 1e-12)
        if len(leading) and column[leading[0]] < 0:
            eigenvectors[:, j] = -column
    return EigenSystem(eigenvalues, eigenvectors, S.kind)


def _eigen_tolerance(eigenvalues: np.ndarray) -> float:
    return EIGEN_TOLERANCE * max(1.0, float(eigenvalues[-1]) if len(eigenvalues) else 1.0)


class SpectralDistribution:
    """
    The normalized power spectral distribution of a signal: a step function with a jump of mass x_j^2 / n at each
    distinct eigenvalue. The CDF is zero below 0 and reaches totalmass = ||x||^2 / n. support_limit, when known, is
    the right end of an interval [0, support_limit] that holds every possible jump (2 D_max for a Laplacian).
    """

    def __init__(self, jumps: List[Tuple[float, float]], totalmass: float, support_limit: Optional[float] = None):
        self.jumps = jumps
        self.totalmass = totalmass
        self.support_limit = support_limit
        self.lambdas = np.array([lam for lam, _ in jumps], dtype=np.float64)
        self.masses = np.array([mass for _, mass in jumps], dtype=np.float64)

    def cdf(self, lam) -> np.ndarray:
        cumulative = np.concatenate([[0.0], np.cumsum(self.masses)])
        return cumulative[np.searchsorted(self.lambdas, lam, side="right")]

    def moment(self, K: int) -> float:
        return float(np.sum(self.masses * self.lambdas**K))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"lambda": self.lambdas, "mass": self.masses, "cdf": np.cumsum(self.masses)})

    def __len__(self) -> int:
        return len(self.jumps)

    def __repr__(self) -> str:
        return f"SpectralDistribution(jumps={len(self.jumps)}, totalmass={self.totalmass})"


def _spectral_kind(G: Graph, kind: Optional[GsoKind]) -> GsoKind:
    if kind is None:
        return GsoKind.WEIGHTED_LAPLACIAN if G.weighted else GsoKind.LAPLACIAN
    kind = GsoKind.parse(kind)
    if kind not in (GsoKind.LAPLACIAN, GsoKind.WEIGHTED_LAPLACIAN):
        raise SpectralError("Power spectral distributions are defined for Laplacian shift operators")
    return kind


def _require_signal(G: Graph) -> np.ndarray:
    if G.signal is None:
        raise SpectralError(f"Graph {G.name or ''} has no signal")
    return G.signal


def psd(G: Graph, kind: Optional[GsoKind] = None, eigensystem: Optional[EigenSystem] = None) -> SpectralDistribution:
    x = _require_signal(G)
    kind = _spectral_kind(G, kind)
    if eigensystem is None:
        eigensystem = eigendecompose(build_gso(G, kind))
    if kind == GsoKind.WEIGHTED_LAPLACIAN:
        support_limit = 2.0 * float(G.weighted_degrees().max(initial=0.0))
    else:
        support_limit = 2.0 * G.max_degree
    totalmass = float(x @ x) / G.n
    masses = eigensystem.gft(x) ** 2 / G.n
    eigenvalues = eigensystem.eigenvalues
    tolerance = _eigen_tolerance(eigenvalues)

    # Degenerate eigenvalues share one jump: the per-eigenspace mass does not depend on the basis
    jumps: List[Tuple[float, float]] = []
    start = 0
    for j in range(1, len(eigenvalues) + 1):
        if j == len(eigenvalues) or eigenvalues[j] - eigenvalues[start] > tolerance:
            mass = float(masses[start:j].sum())
            if mass > MASS_TOLERANCE * totalmass:
                jumps.append((float(eigenvalues[start:j].mean()), mass))
            start = j
    return SpectralDistribution(jumps, totalmass, support_limit)


def _powers_at(S: ShiftOperator, x: np.ndarray, K: int) -> np.ndarray:
    shifted = x
    for _ in range(K):
        shifted = S.apply(shifted)
    return shifted


def moment_global(G: Graph, K: int, kind: Optional[GsoKind] = None) -> float:
    """
    m_K = <x, S^K x> / n, by K sparse products.
    """
    if K < 0:
        raise SpectralError(f"Moment order must be nonnegative, got {K}")
    x = _require_signal(G)
    S = build_gso(G, _spectral_kind(G, kind))
    return float(x @ _powers_at(S, x, K)) / G.n


def moment_local(ball: SignalizedBall, order: Optional[int] = None) -> float:
    """
    x_r [S^M x]_r on the ball, with M the ball depth unless a lower order is given. Weighted balls use the weighted
    Laplacian.
    """
    M = ball.depth if order is None else order
    if not 0 <= M <= ball.depth:
        raise SpectralError(f"Moment order {M} is outside 0..{ball.depth} for a depth-{ball.depth} ball")
    kind = GsoKind.WEIGHTED_LAPLACIAN if ball.weights is not None else GsoKind.LAPLACIAN
    S = build_gso(ball.graph, kind)
    return ball.root_value * float(_powers_at(S, ball.signal, M)[ball.root])


def moment_via_distribution(dist: BallDistribution, order: Optional[int] = None) -> float:
    M = dist.K if order is None else order
    return dist.expectation(lambda ball: moment_local(ball, M))


def psd_weak_distance(P: SpectralDistribution, Q: SpectralDistribution, upper: Optional[float] = None) -> float:
    """
    L1 distance between the two CDFs over [0, upper]. When the total masses differ, the defect sits at upper, so it
    costs |defect| times the distance from the last jump to upper. upper defaults to the larger support limit of the
    two distributions (2 D_max for distributions from psd). Without one, it is the largest jump location, which is
    only allowed when the total masses agree.
    """
    support = np.concatenate([P.lambdas, Q.lambdas])
    if upper is None:
        limits = [limit for limit in (P.support_limit, Q.support_limit) if limit is not None]
        if limits:
            upper = max(limits)
        elif abs(P.totalmass - Q.totalmass) > MASS_TOLERANCE * max(1.0, P.totalmass, Q.totalmass):
            raise SpectralError("Distributions with different total masses need an upper limit")
        else:
            upper = float(support.max(initial=0.0))
    if len(support) and support.max() > upper:
        raise SpectralError(f"Spectral support reaches {support.max()}, beyond the upper limit {upper}")
    breakpoints = np.unique(np.concatenate([[0.0], support, [upper]]))
    left = breakpoints[:-1]
    widths = np.diff(breakpoints)
    return float(np.sum(np.abs(P.cdf(left) - Q.cdf(left)) * widths))
