"""CSV/JSON writers for traces and metric series."""

from __future__ import annotations

import csv
import io
import json

import numpy as np


def _fmt(v: float) -> str:
    return f"{v:.17g}"


def trace_to_csv(trace) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    m = trace.data.m
    xs = trace.predictors
    header = ["t", "i"] + ([f"x_{k + 1}" for k in range(m)] if xs is not None else [])
    w.writerow(header + ["network_loss", "disagreement", "cv_increment"])
    for t in range(trace.T):
        for i in range(trace.n):
            row = [t + 1, i]
            if xs is not None:
                row += [_fmt(v) for v in xs[t, i]]
            row += [_fmt(trace.network_loss[t, i]), _fmt(trace.disagreement_by_node[t, i]),
                    _fmt(trace.cv_by_node[t, i])]
            w.writerow(row)
    return buf.getvalue()


def series_to_csv(series: np.ndarray) -> str:
    """Rows (t, node, value) for a (T, n) array; a (T,) array is written with node -1."""
    series = np.asarray(series, dtype=float)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "node", "value"])
    if series.ndim == 1:
        series = series[:, None]
        nodes = [-1]
    else:
        nodes = list(range(series.shape[1]))
    for t in range(series.shape[0]):
        for col, node in enumerate(nodes):
            w.writerow([t + 1, node, _fmt(series[t, col])])
    return buf.getvalue()


def read_series_csv(text: str) -> dict[int, np.ndarray]:
    """Inverse of :func:`series_to_csv`: node -> values ordered by t."""
    rows = list(csv.DictReader(io.StringIO(text)))
    out: dict[int, list[tuple[int, float]]] = {}
    for r in rows:
        out.setdefault(int(r["node"]), []).append((int(r["t"]), float(r["value"])))
    return {k: np.array([v for _, v in sorted(vals)]) for k, vals in out.items()}


def dump_json(obj, path) -> None:
    with open(path, "w") as f:
        json.dump(obj, f, indent=2, sort_keys=True)
        f.write("\n")
