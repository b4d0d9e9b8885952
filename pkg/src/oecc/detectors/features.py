"""Per-layer feature extraction and the layer-tagged feature CSV format.

Columns are named ``L<layer>_<unit>`` plus an optional trailing ``label``
column. When features come from a file the last layer is taken to be the
logits, which is what class assignment uses.
"""

from __future__ import annotations

import re

import numpy as np

from ..core_nn import MlpModel, forward
from ..io_utils import read_csv, write_csv

_COLUMN = re.compile(r"^L(\d+)_(\d+)$")


def layer_features(model: MlpModel, x) -> list[np.ndarray]:
    """Hidden post-activations followed by the logits."""
    return list(forward(model, x).post)


def save_feature_csv(path, feats: list[np.ndarray], labels=None) -> None:
    header = [f"L{l}_{j}" for l, f in enumerate(feats) for j in range(f.shape[1])]
    table = np.hstack(feats)
    if labels is not None:
        header.append("label")
        rows = ([*map(float, r), int(y)] for r, y in zip(table, labels))
    else:
        rows = (list(map(float, r)) for r in table)
    write_csv(path, header, rows)


def load_feature_csv(path) -> tuple[list[np.ndarray], np.ndarray | None]:
    header, rows = read_csv(path)
    labels = None
    cols = header
    if header and header[-1] == "label":
        cols = header[:-1]
    layout = []
    for name in cols:
        m = _COLUMN.match(name)
        if not m:
            raise ValueError(f"{path}: bad feature column {name!r}, expected L<layer>_<unit>")
        layout.append((int(m.group(1)), int(m.group(2))))
    layers = sorted({l for l, _ in layout})
    if layers != list(range(len(layers))):
        raise ValueError(f"{path}: layer tags must be contiguous from 0")
    try:
        table = np.array([[float(v) for v in r] for r in rows], dtype=np.float64)
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from None
    if table.size == 0:
        raise ValueError(f"{path}: no samples")
    if table.ndim != 2 or table.shape[1] != len(header):
        raise ValueError(f"{path}: ragged rows")
    if len(cols) != len(header):
        labels = table[:, -1].astype(np.int64)
    feats = []
    for l in layers:
        idx = [i for i, (ll, _) in enumerate(layout) if ll == l]
        idx.sort(key=lambda i: layout[i][1])
        feats.append(table[:, idx])
    return feats, labels
