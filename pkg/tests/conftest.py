import os

import numpy as np
import pytest

from localgsplib.graph import Graph, build_graph, random_bounded_degree_graph
from localgsplib.graphio import load_graph

DATA_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "data")


def data_path(name: str) -> str:
    return os.path.join(DATA_DIR, name)


def random_graph(seed: int, n: int = 30, max_degree: int = 4, signal_bound: float = 1.0) -> Graph:
    return random_bounded_degree_graph(n, max_degree, seed, edge_probability=0.2, signal_bound=signal_bound)


def random_permutation(n: int, seed: int):
    return [int(p) for p in np.random.default_rng(seed).permutation(n)]


@pytest.fixture
def fig1() -> Graph:
    return load_graph(data_path("fig1.json"))


@pytest.fixture
def k3() -> Graph:
    return load_graph(data_path("k3.json"))


@pytest.fixture
def c4() -> Graph:
    return load_graph(data_path("c4.json"))


@pytest.fixture
def p2() -> Graph:
    return load_graph(data_path("p2.json"))


@pytest.fixture
def single_node():
    def make(value: float) -> Graph:
        return build_graph(1, [], signal=[value])

    return make


@pytest.fixture(autouse=True)
def isolate_environment(monkeypatch):
    for name in ("LOCALGSP_LOG_LEVEL", "LOCALGSP_WORKERS", "LOCALGSP_AUT_CAP", "LOCALGSP_AUT_MAX_ORDER", "LOCALGSP_SEED"):
        monkeypatch.delenv(name, raising=False)
