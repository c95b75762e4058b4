import numpy as np
import pytest
from conftest import random_graph, random_permutation

from localgsplib.distribution import (
    BallDistribution,
    DistributionError,
    OmegaPoint,
    empirical_distribution,
    from_points,
    point_from_ball,
    pushforward,
    sample_points,
    support_bound,
)
from localgsplib.graph import build_graph, cycle_graph, extract_rooted_ball


def atom_summary(dist: BallDistribution):
    return [(point.code.bytes, tuple(point.signal.tolist()), mass) for point, mass in dist.atoms]


def test_c4_zero_signal_is_a_point_mass(c4):
    dist = pushforward(c4, 1)
    assert len(dist) == 1
    point, mass = dist.atoms[0]
    assert mass == 1.0
    assert point.node_count == 3
    assert point.signal.tolist() == [0.0, 0.0, 0.0]
    assert support_bound(dist) == (2, 0.0, 1)


def test_missing_signal_is_recorded(caplog):
    dist = pushforward(cycle_graph(4), 1)
    assert dist.source["zero_signal"] is True
    assert "no signal" in caplog.text


def test_fig1_has_three_ball_classes(fig1):
    dist = pushforward(fig1, 1)
    assert sorted(dist.masses.tolist()) == [0.25, 0.25, 0.5]
    sizes = {point.node_count: mass for point, mass in dist.atoms}
    assert sizes == {2: 0.5, 3: 0.25, 4: 0.25}
    for point in dist.points:
        n, edges, _ = point.structure().n, len(point.code.to_ball(point.signal, 1).graph.edges), None
        # triangle-free: every 1-ball is a star around its root
        assert edges == n - 1


def test_depth_zero_is_a_signal_histogram():
    G = build_graph(4, [(0, 1), (2, 3)], signal=[1.0, 2.0, 1.0, 3.0])
    dist = pushforward(G, 0)
    assert [(p.signal.tolist(), m) for p, m in dist.atoms] == [([1.0], 0.5), ([2.0], 0.25), ([3.0], 0.25)]


def test_k3_support_bound(k3):
    assert support_bound(pushforward(k3, 1)) == (2, 1.0, 1)


def test_empty_edge_graph_support_bound():
    G = build_graph(5, [], signal=[0.0, 1.0, 2.0, 3.0, -4.0])
    assert support_bound(pushforward(G, 3)) == (0, 4.0, 1)


def test_masses_sum_to_one_and_depth_is_bounded():
    for seed in range(5):
        G = random_graph(seed, n=40)
        for K in (1, 2, 3):
            dist = pushforward(G, K)
            assert dist.masses.sum() == pytest.approx(1.0, abs=1e-12)
            assert all(point.depth == K for point in dist.points)
            assert all(mass > 0 for mass in dist.masses)


def test_pushforward_is_permutation_invariant():
    for seed in range(5):
        G = random_graph(seed, n=30)
        H = G.relabeled(random_permutation(G.n, seed))
        assert atom_summary(pushforward(H, 2)) == atom_summary(pushforward(G, 2))


def test_disjoint_double_has_the_same_distribution():
    G = random_graph(3, n=15)
    double = build_graph(
        2 * G.n,
        list(G.edges) + [(u + G.n, v + G.n) for u, v in G.edges],
        signal=np.concatenate([G.signal, G.signal]),
    )
    assert atom_summary(pushforward(double, 2)) == atom_summary(pushforward(G, 2))


def test_symmetric_signals_merge():
    # both endpoints of a path see the same rooted ball up to the reflection
    G = build_graph(3, [(0, 1), (1, 2)], signal=[1.0, 0.0, 1.0])
    dist = pushforward(G, 1)
    assert len(dist) == 2
    mirrored = build_graph(3, [(0, 1), (0, 2)], signal=[0.0, 1.0, 2.0])
    flipped = build_graph(3, [(0, 1), (0, 2)], signal=[0.0, 2.0, 1.0])
    merged = from_points(
        [point_from_ball(extract_rooted_ball(H, 0, 1)) for H in (mirrored, flipped)], [1.0, 1.0], 1
    )
    assert len(merged) == 1
    assert merged.atoms[0][1] == 1.0
    assert merged.atoms[0][0].signal.tolist() == sorted(merged.atoms[0][0].signal.tolist())


def test_results_do_not_depend_on_workers():
    G = random_graph(9, n=60)
    assert atom_summary(pushforward(G, 2, workers=4)) == atom_summary(pushforward(G, 2, workers=1))


def test_node_weights_replace_uniform_measure():
    G = build_graph(2, [], signal=[0.0, 1.0])
    dist = pushforward(G, 0, node_weights=[3.0, 1.0])
    assert dist.masses.tolist() == [0.75, 0.25]
    assert dist.source["uniform"] is False
    with pytest.raises(DistributionError, match="nonnegative"):
        pushforward(G, 0, node_weights=[1.0])


def test_glue_zero_weights():
    G = build_graph(3, [(0, 1), (1, 2)], weights=[1.0, 0.0], signal=[0.0, 0.0, 0.0])
    plain = pushforward(G, 1)
    glued = pushforward(G, 1, glue_zero_weights=True)
    assert len(glued) < len(plain) or glued.points[0].node_count < 3
    sizes = sorted(point.node_count for point in glued.points)
    assert sizes == [1, 2]


def test_json_round_trip(tmp_path, fig1):
    dist = pushforward(fig1, 2)
    path = str(tmp_path / "d.json")
    dist.save(path, metadata={"command": "dist"})
    loaded = BallDistribution.load(path)
    assert loaded.K == 2
    assert atom_summary(loaded) == atom_summary(dist)
    assert loaded.source["n"] == 8


def test_weighted_points_serialize_weights(tmp_path):
    G = build_graph(2, [(0, 1)], weights=[0.5], signal=[1.0, 2.0])
    dist = pushforward(G, 1)
    payload = dist.to_dict()
    assert all(atom["weights"] == [0.5] for atom in payload["atoms"])
    assert dist.weighted


def test_point_rejects_wrong_signal_length(fig1):
    point = pushforward(fig1, 1).points[0]
    with pytest.raises(DistributionError, match="does not fit"):
        OmegaPoint(point.code, [0.0] * (point.node_count + 1), 1)


def test_sample_points_is_deterministic(fig1):
    dist = pushforward(fig1, 1)
    assert sample_points(dist, 20, seed=3) == sample_points(dist, 20, seed=3)
    point_mass = pushforward(cycle_graph(4), 1)
    assert sample_points(point_mass, 5, seed=0) == [point_mass.points[0]] * 5
    with pytest.raises(DistributionError):
        sample_points(dist, 0, seed=0)


def test_sample_frequencies_follow_masses(fig1):
    dist = pushforward(fig1, 1)
    m = 100000
    samples = sample_points(dist, m, seed=11)
    for point, mass in dist.atoms:
        frequency = sum(1 for sample in samples if sample is point) / m
        assert abs(frequency - mass) <= 3 * np.sqrt(mass * (1 - mass) / m)


def test_empirical_distribution(fig1):
    dist = pushforward(fig1, 1)
    empirical = empirical_distribution(dist, 1000, seed=5)
    assert len(empirical) == 3
    assert empirical.masses.sum() == pytest.approx(1.0)
    assert empirical.source["samples"] == 1000
