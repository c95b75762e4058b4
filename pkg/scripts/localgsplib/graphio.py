import csv
import json
import logging
import os
from typing import Any, Dict, Hashable, List, Optional

from .errors import InputValidationError
from .graph import Graph, GraphError, build_graph

logger = logging.getLogger("localgsp")


def read_json(path: str) -> Any:
    if not os.path.exists(path):
        raise InputValidationError(f"File not found: {path}")
    try:
        with open(path, encoding="utf-8") as f:
            return json.load(f)
    except json.JSONDecodeError as error:
        raise InputValidationError(f"Malformed JSON in {path}: {error}")


def write_json(path: str, payload: Any):
    # json writes floats with repr, which round-trips bit-exactly
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2)
        f.write("\n")


def graph_to_dict(G: Graph) -> Dict[str, Any]:
    payload: Dict[str, Any] = {"n": G.n, "edges": [[u, v] for u, v in G.edges]}
    if G.weights is not None:
        payload["weights"] = [float(w) for w in G.weights]
    if G.signal is not None:
        payload["signal"] = [float(x) for x in G.signal]
    if G.labels is not None:
        payload["labels"] = list(G.labels)
    return payload


def graph_from_dict(payload: Dict[str, Any], name: Optional[str] = None) -> Graph:
    if not isinstance(payload, dict) or "n" not in payload or "edges" not in payload:
        raise InputValidationError("Graph JSON must be an object with 'n' and 'edges'")
    try:
        return build_graph(
            int(payload["n"]),
            payload["edges"],
            payload.get("weights"),
            payload.get("signal"),
            labels=payload.get("labels"),
            name=name,
        )
    except (TypeError, ValueError) as error:
        raise InputValidationError(f"Malformed graph JSON: {error}")


def load_graph(path: str, signal_path: Optional[str] = None) -> Graph:
    """
    Loads a graph from JSON, or from a TSV edge list when the file does not end in .json.
    """
    if path.endswith(".json"):
        graph = graph_from_dict(read_json(path), name=os.path.basename(path))
        if signal_path is not None:
            graph = graph.with_signal(read_signal(signal_path))
        return graph
    return load_graph_tsv(path, signal_path)


def save_graph_json(G: Graph, path: str):
    write_json(path, graph_to_dict(G))


def read_signal(path: str) -> List[float]:
    if not os.path.exists(path):
        raise InputValidationError(f"File not found: {path}")
    with open(path, encoding="utf-8") as f:
        try:
            return [float(line) for line in f if line.strip()]
        except ValueError as error:
            raise InputValidationError(f"Malformed signal file {path}: {error}")


def _read_directive(row: List[str], path: str, line_number: int, header: Dict[str, Any]):
    # '# n=<count>' fixes the node count and '# node<tab><label>' declares a label, in id order
    text = "\t".join(row)[1:].strip()
    if text.startswith("n="):
        try:
            header["n"] = int(text[2:])
        except ValueError:
            raise InputValidationError(f"{path}:{line_number}: node count '{text[2:]}' is not an integer")
    elif row[0].strip() == "# node" and len(row) == 2:
        header["labels"].append(row[1])


def load_graph_tsv(path: str, signal_path: Optional[str] = None) -> Graph:
    """
    Reads `u <tab> v [<tab> w]` lines. Without `# node` declarations, labels that are exactly the integers 0..n-1
    are used as node ids (nodes missing from the edge list are isolated, and a `# n=<count>` header or else the
    signal file decides n). Other labels are remapped to dense ids, first the `# node` declarations and then in
    first-seen order, and kept on the graph. The optional signal file holds one value per line in id order.
    """
    if not os.path.exists(path):
        raise InputValidationError(f"File not found: {path}")
    pairs = []
    weights: List[float] = []
    header: Dict[str, Any] = {"n": None, "labels": []}
    with open(path, encoding="utf-8", newline="") as f:
        for line_number, row in enumerate(csv.reader(f, delimiter="\t"), start=1):
            if not row:
                continue
            if row[0].startswith("#"):
                _read_directive(row, path, line_number, header)
                continue
            if len(row) not in (2, 3):
                raise InputValidationError(f"{path}:{line_number}: expected 2 or 3 tab-separated fields")
            pairs.append((row[0], row[1]))
            if len(row) == 3:
                try:
                    weights.append(float(row[2]))
                except ValueError:
                    raise InputValidationError(f"{path}:{line_number}: weight '{row[2]}' is not a number")
    if weights and len(weights) != len(pairs):
        raise GraphError(f"{path}: either every edge or no edge must carry a weight")
    signal = read_signal(signal_path) if signal_path is not None else None

    labels: List[Hashable] = []
    index: Dict[Hashable, int] = {}
    for label in header["labels"] + [label for pair in pairs for label in pair]:
        if label not in index:
            index[label] = len(labels)
            labels.append(label)
    declared_n = header["n"]
    if not header["labels"] and all(label.isdigit() and label == str(int(label)) for label in labels):
        n = max((int(label) + 1 for label in labels), default=0)
        if declared_n is not None:
            if declared_n < n:
                raise InputValidationError(f"{path}: node id {n - 1} is outside the declared n={declared_n}")
            n = declared_n
        elif signal is not None:
            n = max(n, len(signal))
        edges = [(int(u), int(v)) for u, v in pairs]
        kept_labels = None
    else:
        n = len(labels)
        if declared_n is not None and declared_n != n:
            raise InputValidationError(f"{path}: found {n} node labels but the header declares n={declared_n}")
        edges = [(index[u], index[v]) for u, v in pairs]
        kept_labels = labels
    return build_graph(n, edges, weights or None, signal, labels=kept_labels, name=os.path.basename(path))


def save_graph_tsv(G: Graph, path: str, signal_path: Optional[str] = None):
    names = [str(label) for label in G.labels] if G.labels is not None else [str(v) for v in range(G.n)]
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(f"# n={G.n}\n")
        writer = csv.writer(f, delimiter="\t", lineterminator="\n")
        if G.labels is not None:
            for name in names:
                writer.writerow(["# node", name])
        for i, (u, v) in enumerate(G.edges):
            row = [names[u], names[v]]
            if G.weights is not None:
                row.append(repr(float(G.weights[i])))
            writer.writerow(row)
    if signal_path is not None:
        if G.signal is None:
            raise GraphError("Graph has no signal to save")
        with open(signal_path, "w", encoding="utf-8") as f:
            for x in G.signal:
                f.write(f"{float(x)!r}\n")
