"""Neural paths and SDE trajectories, plus their versioned CSV schema.

CSV files start with one comment line ``# schema=1 ...`` followed by a
header row. Path files come in two layouts:

``full``     sample_id, layer, [scheme,] coord_0 ... coord_{n-1}
``reduced``  sample_id, layer, [scheme,] norm, log_norm_ratio

``log_norm_ratio`` is ``log(|state_l| / |state_0|)`` and is left empty
when either norm is zero.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = ["Path", "SCHEMA_VERSION", "write_paths_csv", "write_table_csv", "read_csv"]

SCHEMA_VERSION = 1


@dataclass
class Path:
    """Sequence of states ``states[i]`` observed at ``grid[i]``.

    For a ResNet the grid holds layer indices ``0..L``; for an SDE it holds
    times. ``scheme`` is ``"resnet"``, ``"euler"`` or ``"exact"``.
    """

    states: np.ndarray
    grid: np.ndarray
    scheme: str = "resnet"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.states = np.asarray(self.states, dtype=float)
        if self.states.ndim == 1:
            self.states = self.states[:, None]
        self.grid = np.asarray(self.grid)

    def __len__(self):
        return self.states.shape[0]

    @property
    def width(self) -> int:
        return self.states.shape[1]

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def norms(self) -> np.ndarray:
        return np.linalg.norm(self.states, axis=1)

    def post_norms(self, activation) -> np.ndarray:
        return np.linalg.norm(activation.value(self.states), axis=1)


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return "" if math.isnan(x) else repr(float(x))
    return str(x)


def _header(fh, **meta):
    parts = [f"schema={SCHEMA_VERSION}"] + [f"{k}={v}" for k, v in meta.items()]
    fh.write("# " + " ".join(parts) + "\n")


def write_paths_csv(fh, states, grid, *, mode: str = "reduced", scheme: str | None = None,
                    sample_ids=None, **meta):
    """Write a stack of paths ``states[sample, step, coord]``.

    ``fh`` is an open text file. ``scheme`` adds a ``scheme`` column (SDE
    files use ``euler`` or ``exact``).
    """
    states = np.asarray(states, dtype=float)
    if states.ndim == 2:
        states = states[None]
    n_samples, n_steps, width = states.shape
    if sample_ids is None:
        sample_ids = range(n_samples)
    _header(fh, kind="paths", mode=mode, **meta)
    writer = csv.writer(fh, lineterminator="\n")
    cols = ["sample_id", "layer"] + (["scheme"] if scheme else [])
    if mode == "full":
        cols += [f"coord_{i}" for i in range(width)]
    elif mode == "reduced":
        cols += ["norm", "log_norm_ratio"]
    else:
        raise ValueError(f"unknown CSV mode {mode!r}")
    writer.writerow(cols)
    for sid, path in zip(sample_ids, states):
        norms = np.linalg.norm(path, axis=1)
        for step in range(n_steps):
            row = [sid, _fmt(grid[step])] + ([scheme] if scheme else [])
            if mode == "full":
                row += [_fmt(v) for v in path[step]]
            else:
                if norms[0] > 0 and norms[step] > 0:
                    ratio = math.log(norms[step] / norms[0])
                else:
                    ratio = float("nan")
                row += [_fmt(norms[step]), _fmt(ratio)]
            writer.writerow(row)


def write_table_csv(fh, columns, rows, **meta):
    """Plain table with the schema comment line."""
    _header(fh, kind="table", **meta)
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])


def read_csv(source):
    """Parse a schema-1 CSV into ``(meta, header, rows)`` with string cells."""
    if isinstance(source, str) and "\n" not in source:
        with open(source, newline="") as fh:
            text = fh.read()
    else:
        text = source if isinstance(source, str) else source.read()
    lines = io.StringIO(text)
    first = lines.readline()
    if not first.startswith("# schema="):
        raise ValueError("missing '# schema=' header line")
    meta = dict(tok.split("=", 1) for tok in first[2:].split())
    reader = csv.reader(lines)
    header = next(reader)
    return meta, header, [row for row in reader]
