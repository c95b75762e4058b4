import base64
import json
import os
from datetime import datetime, timezone
from typing import Any, Dict, List, Optional

import pandas as pd

from . import __version__
from .distribution import BallDistribution
from .errors import InputValidationError
from .graphio import write_json


def build_metadata(command: str, inputs: Dict[str, Any], seed: Optional[int] = None) -> Dict[str, Any]:
    return {
        "command": command,
        "inputs": inputs,
        "seed": seed,
        "version": __version__,
        "timestamp": datetime.now(timezone.utc).isoformat(),
    }


def write_csv(frame: pd.DataFrame, path: str, metadata: Optional[Dict[str, Any]] = None):
    """
    Writes a frame as CSV at full float precision, preceded by a '# ' line holding the metadata as JSON.
    """
    try:
        with open(path, "w", encoding="utf-8", newline="") as f:
            if metadata is not None:
                f.write("# " + json.dumps(metadata, sort_keys=True) + "\n")
            frame.to_csv(f, index=False, lineterminator="\n")
    except OSError as error:
        raise InputValidationError(f"Cannot write {path}: {error}")


def read_csv(path: str) -> pd.DataFrame:
    return pd.read_csv(path, comment="#")


def save_json(path: str, payload: Dict[str, Any]):
    try:
        write_json(path, payload)
    except OSError as error:
        raise InputValidationError(f"Cannot write {path}: {error}")


def sidecar_path(path: str) -> str:
    return os.path.splitext(path)[0] + ".codes.json"


def histogram_frame(dist: BallDistribution) -> pd.DataFrame:
    """
    One row per atom: an integer id per distinct ball (stable within one file), ball size, mass and a signal summary.
    """
    code_ids: Dict[bytes, int] = {}
    rows: List[Dict[str, Any]] = []
    for point, mass in dist.atoms:
        code_id = code_ids.setdefault(point.code.bytes, len(code_ids))
        rows.append(
            {
                "code_id": code_id,
                "ball_size": point.node_count,
                "mass": mass,
                "root_value": point.root_value,
                "signal_mean": float(point.signal.mean()),
            }
        )
    return pd.DataFrame(rows, columns=["code_id", "ball_size", "mass", "root_value", "signal_mean"])


def emit_histogram(dist: BallDistribution, out: str, metadata: Optional[Dict[str, Any]] = None) -> str:
    """
    Writes the histogram CSV and a sidecar JSON mapping each code id to its base64 canonical code. Returns the
    sidecar path.
    """
    write_csv(histogram_frame(dist), out, metadata)
    codes: Dict[str, str] = {}
    for point in dist.points:
        encoded = base64.b64encode(point.code.bytes).decode("ascii")
        if encoded not in codes.values():
            codes[str(len(codes))] = encoded
    sidecar = sidecar_path(out)
    save_json(sidecar, {"codes": codes, "metadata": metadata})
    return sidecar
