"""Deterministic writers for run outputs.

CSV and JSON bytes depend only on the values written: fixed column order,
``repr`` floats, sorted JSON keys, no timestamps.  SVG plots are rendered
from a CSV file on disk, never from in-memory state.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np


def jsonable(obj):
    if isinstance(obj, Mapping):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def write_json(path: Path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    text = json.dumps(jsonable(obj), sort_keys=True, indent=2, allow_nan=False)
    path.write_text(text + "\n")
    return path


def read_json(path: Path):
    return json.loads(Path(path).read_text())


def write_csv(path: Path, columns: Mapping[str, Sequence], units: Mapping[str, str]) -> Path:
    """Header cells read ``name [unit]``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    names = list(columns)
    lengths = {len(columns[n]) for n in names}
    if len(lengths) > 1:
        raise ValueError(f"columns have different lengths: {sorted(lengths)}")
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([f"{n} [{units.get(n, '1')}]" for n in names])
        for row in zip(*(columns[n] for n in names)):
            writer.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return path


def read_csv(path: Path) -> dict[str, np.ndarray]:
    with Path(path).open() as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = list(reader)
    names = [h.split(" [")[0] for h in header]
    out = {}
    for j, name in enumerate(names):
        col = [r[j] for r in rows]
        try:
            out[name] = np.array([float(v) for v in col])
        except ValueError:
            out[name] = np.array(col)
    return out


def plot_csv(csv_path: Path, svg_path: Path, x: str, ys: Iterable[str], title: str = "",
             logy: bool = False) -> Path:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = "ricci-smoothing"
    data = read_csv(csv_path)
    fig, ax = plt.subplots(figsize=(6, 4))
    plotted = False
    for y in ys:
        if y in data and np.issubdtype(data[y].dtype, np.floating) and np.isfinite(data[y]).any():
            ax.plot(data[x], data[y], label=y)
            plotted = True
    ax.set_xlabel(x)
    if logy:
        ax.set_yscale("log")
    if title:
        ax.set_title(title)
    if plotted:
        ax.legend()
    fig.tight_layout()
    svg_path = Path(svg_path)
    svg_path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(svg_path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return svg_path
