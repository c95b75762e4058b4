import itertools

import numpy as np
import pytest
from conftest import random_graph
from scipy.optimize import linprog

from localgsplib.distribution import pushforward
from localgsplib.filters import Filter, mse_lipschitz_bound, mse_summary_local
from localgsplib.graph import build_graph, cycle_graph
from localgsplib.spectral import moment_local
from localgsplib.transport import (
    GroundMetricParams,
    TransportError,
    ball_metric,
    cost_matrix,
    empirical_wasserstein,
    lipschitz_estimate,
    tighter_bound,
    transfer_bound,
    wasserstein1,
)


def linprog_wasserstein(mu, nu, C):
    M = cost_matrix(mu, nu, C)
    rows, cols = M.shape
    equalities = []
    for i in range(rows):
        constraint = np.zeros((rows, cols))
        constraint[i, :] = 1.0
        equalities.append(constraint.ravel())
    for j in range(cols):
        constraint = np.zeros((rows, cols))
        constraint[:, j] = 1.0
        equalities.append(constraint.ravel())
    result = linprog(
        M.ravel(),
        A_eq=np.array(equalities),
        b_eq=np.concatenate([mu.masses, nu.masses]),
        bounds=(0, None),
        method="highs",
    )
    assert result.success
    return result.fun


def test_single_node_signals(single_node):
    mu = pushforward(single_node(0.2), 0)
    nu = pushforward(single_node(0.5), 0)
    cost, plan = wasserstein1(mu, nu, 1.0)
    assert cost == pytest.approx(0.3)
    assert plan.flows.tolist() == [[1.0]]
    # the cap of 2C applies within one ball
    assert wasserstein1(mu, nu, 0.1)[0] == pytest.approx(0.2)


def test_different_balls_cost_c(c4):
    c3 = build_graph(3, [(0, 1), (1, 2), (0, 2)], signal=[0.0] * 3)
    cost, _ = wasserstein1(pushforward(c4, 1), pushforward(c3, 1), 1.0)
    assert cost == pytest.approx(1.0)
    assert wasserstein1(pushforward(c4, 1), pushforward(c3, 1), 0.25)[0] == pytest.approx(0.25)


def test_distance_to_itself_is_zero(fig1):
    dist = pushforward(fig1, 2)
    cost, plan = wasserstein1(dist, dist, 1.0)
    assert cost == pytest.approx(0.0, abs=1e-12)
    frame = plan.to_frame()
    assert list(frame.columns) == ["row", "col", "flow"]
    assert (frame["row"] == frame["col"]).all()


def test_ground_metric_axioms():
    points = []
    for seed in range(3):
        points.extend(pushforward(random_graph(seed, n=12, max_degree=3), 1).points)
    C = 0.5
    for a, b in itertools.combinations(points, 2):
        assert ball_metric(a, b, C) == pytest.approx(ball_metric(b, a, C), abs=1e-12)
        assert 0.0 <= ball_metric(a, b, C) <= 2 * C
        if a.code != b.code:
            assert ball_metric(a, b, C) == C
    for a in points:
        assert ball_metric(a, a, C) == 0.0
    for a, b, c in itertools.islice(itertools.permutations(points, 3), 2000):
        assert ball_metric(a, c, C) <= ball_metric(a, b, C) + ball_metric(b, c, C) + 1e-12


def test_ground_metric_needs_positive_c(fig1):
    point = pushforward(fig1, 1).points[0]
    for C in (0.0, -1.0, float("inf")):
        with pytest.raises(TransportError, match="C > 0"):
            ball_metric(point, point, C)
    assert GroundMetricParams(2).C == 2.0


def test_matches_linear_program():
    for seed in range(4):
        mu = pushforward(random_graph(seed, n=10, max_degree=3), 1)
        nu = pushforward(random_graph(seed + 50, n=12, max_degree=3), 1)
        for C in (0.1, 1.0, 5.0):
            assert wasserstein1(mu, nu, C)[0] == pytest.approx(linprog_wasserstein(mu, nu, C), abs=1e-9)


def test_plan_has_the_right_marginals():
    mu = pushforward(random_graph(1, n=15), 2)
    nu = pushforward(random_graph(2, n=9), 2)
    _, plan = wasserstein1(mu, nu, 1.0)
    assert plan.flows.sum(axis=1) == pytest.approx(mu.masses)
    assert plan.flows.sum(axis=0) == pytest.approx(nu.masses)


def test_rejects_mismatched_inputs(fig1):
    with pytest.raises(TransportError, match="depth"):
        wasserstein1(pushforward(fig1, 1), pushforward(fig1, 2), 1.0)
    weighted = build_graph(2, [(0, 1)], weights=[2.0], signal=[0.0, 0.0])
    with pytest.raises(TransportError, match="unweighted"):
        wasserstein1(pushforward(weighted, 1), pushforward(fig1, 1), 1.0)


def test_bounds_on_single_node(single_node):
    mu = pushforward(single_node(0.2), 0)
    nu = pushforward(single_node(0.5), 0)
    assert transfer_bound(mu, nu, 1.0) == pytest.approx(0.3)
    assert tighter_bound(mu, nu, 1.0) <= 0.3 + 1e-12
    with pytest.raises(TransportError, match="positive"):
        transfer_bound(mu, nu, 0.0)
    with pytest.raises(TransportError, match="grid"):
        tighter_bound(mu, nu, 1.0, grid=1)


def clamped_mse(f, sigma2):
    def summary(ball):
        return min(1.0, max(0.0, mse_summary_local(f, sigma2, ball)))

    return summary


def test_transfer_bound_controls_the_summary_gap():
    f = Filter([1.0, -0.3])
    sigma2 = 0.1
    J = clamped_mse(f, sigma2)
    K = 2 * f.order
    for seed in range(4):
        mu = pushforward(random_graph(seed, n=20), K)
        nu = pushforward(random_graph(seed + 10, n=25), K)
        L = max(mse_lipschitz_bound(f, point.ball(), signal_bound=1.0) for point in mu.points + nu.points)
        L = max(L, lipschitz_estimate(J, mu, 50, seed, bound=1.0).value)
        gap = abs(mu.expectation(J) - nu.expectation(J))
        bound = transfer_bound(mu, nu, L)
        assert gap <= bound + 1e-12
        tighter = tighter_bound(mu, nu, L, grid=16)
        assert gap <= tighter + 1e-12
        assert tighter <= bound + 1e-12


def test_lipschitz_estimate():
    f = Filter([1.0, -0.3])
    dist = pushforward(random_graph(3, n=20), 2)
    estimate = lipschitz_estimate(clamped_mse(f, 0.0), dist, 100, seed=0, bound=1.0)
    assert estimate.pairs == 100
    bound = max(mse_lipschitz_bound(f, point.ball(), signal_bound=1.0) for point in dist.points)
    assert 0.0 < estimate.value <= bound + 1e-12
    assert lipschitz_estimate(moment_local, dist, 20, seed=1) == lipschitz_estimate(moment_local, dist, 20, seed=1)
    with pytest.raises(TransportError, match="trials"):
        lipschitz_estimate(moment_local, dist, 0, seed=1)


def test_empirical_wasserstein_shrinks_with_samples(fig1):
    dist = pushforward(fig1, 1)
    means = []
    for m in (10, 100, 1000):
        means.append(np.mean([empirical_wasserstein(dist, dist, m, 1.0, seed) for seed in range(8)]))
    assert means[0] > means[1] > means[2]
    assert means[2] < 0.1


def test_cycles_of_different_length_are_close():
    near = wasserstein1(pushforward(cycle_graph(8), 2), pushforward(cycle_graph(16), 2), 1.0)[0]
    assert near == 0.0


def test_tighter_bound_meets_transfer_bound_at_unit_range(single_node, c4):
    mu = pushforward(single_node(0.2), 0)
    nu = pushforward(single_node(0.5), 0)
    assert tighter_bound(mu, nu, 1.0, A=1.0, grid=64) == pytest.approx(transfer_bound(mu, nu, 1.0))
    c3 = build_graph(3, [(0, 1), (1, 2), (0, 2)], signal=[0.0] * 3)
    mu, nu = pushforward(c4, 1), pushforward(c3, 1)
    # every ball moves at cost A C / L, so each grid value is A
    assert transfer_bound(mu, nu, 2.5) == pytest.approx(1.0)
    assert tighter_bound(mu, nu, 2.5, A=1.0, grid=8) == pytest.approx(1.0)
    assert tighter_bound(mu, nu, 2.5, A=0.5, grid=8) == pytest.approx(0.5)
    assert tighter_bound(mu, mu, 2.5, grid=8) == pytest.approx(0.0, abs=1e-12)
