import json

import pytest
from conftest import data_path

from localgsplib.errors import InputValidationError
from localgsplib.graph import GraphError, build_graph
from localgsplib.graphio import load_graph, read_signal, save_graph_json, save_graph_tsv


def test_load_fig1_json(fig1):
    assert fig1.n == 8
    assert len(fig1.edges) == 7
    assert fig1.labels[2] == "c"
    assert fig1.name == "fig1.json"


def test_load_fig1_tsv_matches_json(fig1):
    G = load_graph(data_path("fig1.tsv"), data_path("fig1.signal.txt"))
    assert G.labels == ("a", "c", "b", "f", "d", "e", "g", "h")
    for u, v in fig1.edges:
        assert G.has_edge(G.labels.index(fig1.labels[u]), G.labels.index(fig1.labels[v]))
    by_label = dict(zip(G.labels, G.signal.tolist()))
    assert [by_label[label] for label in fig1.labels] == fig1.signal.tolist()


def test_json_round_trip_is_exact(tmp_path):
    G = build_graph(3, [(0, 1), (1, 2)], weights=[0.1, 1 / 3], signal=[0.1, 0.2, 2 / 7])
    path = str(tmp_path / "g.json")
    save_graph_json(G, path)
    assert load_graph(path) == G


def test_tsv_round_trip_keeps_integer_ids(tmp_path):
    G = build_graph(4, [(2, 3), (0, 1)], weights=[0.5, 1e-300], signal=[0.1, 0.2, 0.3, 1 / 3])
    path = str(tmp_path / "g.tsv")
    signal_path = str(tmp_path / "x.txt")
    save_graph_tsv(G, path, signal_path)
    loaded = load_graph(path, signal_path)
    assert loaded == G
    assert loaded.labels is None


def test_tsv_isolated_nodes_come_from_signal(tmp_path):
    path = tmp_path / "g.tsv"
    path.write_text("0\t1\n")
    signal_path = tmp_path / "x.txt"
    signal_path.write_text("1\n2\n3\n")
    G = load_graph(str(path), str(signal_path))
    assert G.n == 3
    assert G.degree(2) == 0


def test_tsv_rejects_mixed_weights(tmp_path):
    path = tmp_path / "g.tsv"
    path.write_text("0\t1\t1.0\n1\t2\n")
    with pytest.raises(GraphError, match="every edge"):
        load_graph(str(path))


def test_tsv_rejects_bad_rows(tmp_path):
    path = tmp_path / "g.tsv"
    path.write_text("0\t1\t2\t3\n")
    with pytest.raises(InputValidationError, match="expected 2 or 3"):
        load_graph(str(path))
    path.write_text("0\t1\theavy\n")
    with pytest.raises(InputValidationError, match="not a number"):
        load_graph(str(path))


def test_missing_and_malformed_files(tmp_path):
    with pytest.raises(InputValidationError, match="File not found"):
        load_graph(str(tmp_path / "missing.json"))
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    with pytest.raises(InputValidationError, match="Malformed JSON"):
        load_graph(str(bad))
    bad.write_text(json.dumps({"edges": []}))
    with pytest.raises(InputValidationError, match="'n' and 'edges'"):
        load_graph(str(bad))
    signal = tmp_path / "x.txt"
    signal.write_text("1.0\nabc\n")
    with pytest.raises(InputValidationError, match="Malformed signal"):
        read_signal(str(signal))


def test_invalid_graph_in_json_is_a_graph_error(tmp_path):
    path = tmp_path / "loop.json"
    path.write_text(json.dumps({"n": 2, "edges": [[1, 1]]}))
    with pytest.raises(GraphError, match="Self-loop"):
        load_graph(str(path))


def test_tsv_round_trip_keeps_isolated_nodes(tmp_path):
    path = str(tmp_path / "g.tsv")
    G = build_graph(4, [(0, 1)])
    save_graph_tsv(G, path)
    loaded = load_graph(path)
    assert loaded == G
    assert loaded.n == 4 and loaded.degree(3) == 0


def test_tsv_round_trip_keeps_isolated_labels(tmp_path):
    path = str(tmp_path / "g.tsv")
    G = build_graph(3, [(0, 1)], signal=[0.5, -1.0, 2 / 3], labels=["a", "b", "z"])
    signal_path = str(tmp_path / "x.txt")
    save_graph_tsv(G, path, signal_path)
    loaded = load_graph(path, signal_path)
    assert loaded == G
    assert loaded.labels == ("a", "b", "z")


def test_tsv_declared_labels_keep_their_order(tmp_path):
    path = str(tmp_path / "g.tsv")
    G = build_graph(3, [(0, 1), (1, 2)], labels=[2, 0, 1])
    save_graph_tsv(G, path)
    loaded = load_graph(path)
    assert loaded.labels == ("2", "0", "1")
    assert loaded.edges == G.edges


def test_tsv_header_must_fit_the_edges(tmp_path):
    path = tmp_path / "g.tsv"
    path.write_text("# n=2\n0\t5\n")
    with pytest.raises(InputValidationError, match="declared n=2"):
        load_graph(str(path))
    path.write_text("# n=two\n0\t1\n")
    with pytest.raises(InputValidationError, match="not an integer"):
        load_graph(str(path))
    path.write_text("# n=3\na\tb\n")
    with pytest.raises(InputValidationError, match="declares n=3"):
        load_graph(str(path))
