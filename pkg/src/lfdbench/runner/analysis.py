"""Dataset serialization and held-out analysis of a saved policy."""

from __future__ import annotations

import json
from enum import IntEnum
from pathlib import Path

import numpy as np

from ..core import Dataset
from ..envs import Action, Branch
from ..learners import policy_from_json
from .metrics import heldout_surrogate_loss

_ENUMS = {"Action": Action, "Branch": Branch}


def _encode(x):
    if isinstance(x, IntEnum):
        return x.name
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, tuple):
        return list(x)
    if isinstance(x, np.generic):
        return x.item()
    return x


def dataset_to_json(data: Dataset) -> dict:
    """Labels that are enum members are written by name; ``label_type``
    records which enum to read them back into."""
    label_type = None
    if data.labels and isinstance(data.labels[0], IntEnum):
        label_type = type(data.labels[0]).__name__
    state_type = "int"
    if data.states:
        s0 = data.states[0]
        state_type = "array" if isinstance(s0, np.ndarray) else "cell" if isinstance(s0, tuple) else "int"
    return {
        "state_type": state_type,
        "label_type": label_type,
        "states": [_encode(s) for s in data.states],
        "labels": [_encode(u) for u in data.labels],
        "provenance": list(data.provenance),
        "boundaries": list(data.boundaries),
    }


def dataset_from_json(doc: dict | str) -> Dataset:
    if isinstance(doc, str):
        doc = json.loads(doc)
    try:
        states, labels = doc["states"], doc["labels"]
        bounds, prov = doc["boundaries"], doc["provenance"]
    except KeyError as exc:
        raise ValueError(f"dataset JSON is missing {exc}") from None
    if len(states) != len(labels) or len(prov) != len(states):
        raise ValueError("dataset JSON has ragged states/labels/provenance")
    if bounds and (bounds[-1] != len(states) or any(b <= a for a, b in zip([0] + bounds, bounds))):
        raise ValueError("dataset JSON has invalid trajectory boundaries")
    kind = doc.get("state_type", "int")
    decode_state = {"array": lambda s: np.asarray(s, dtype=float),
                    "cell": lambda s: tuple(int(v) for v in s),
                    "int": int}[kind]
    enum = _ENUMS.get(doc.get("label_type"))
    if enum is not None:
        decode_label = lambda u: enum[u]  # noqa: E731
    else:
        decode_label = lambda u: np.asarray(u, dtype=float)  # noqa: E731
    out = Dataset()
    lo = 0
    for hi in bounds:
        out.add_trajectory([decode_state(s) for s in states[lo:hi]],
                           [decode_label(u) for u in labels[lo:hi]], prov[lo])
        lo = hi
    return out


def save_dataset(data: Dataset, path: str | Path) -> None:
    Path(path).write_text(json.dumps(dataset_to_json(data)) + "\n")


def load_dataset(path: str | Path) -> Dataset:
    return dataset_from_json(Path(path).read_text())


def analyze(heldout_path: str | Path, policy_path: str | Path) -> np.ndarray:
    """Per-dimension held-out surrogate loss of a serialized policy."""
    data = load_dataset(heldout_path)
    policy = policy_from_json(Path(policy_path).read_text())
    return heldout_surrogate_loss(policy, data)
