"""Output files: JSON summaries, per-vertex fields, CSV traces and SVG plots."""

from __future__ import annotations

import csv
import enum
import json
import math
from pathlib import Path

import numpy as np

from .exceptions import ParseError


def _fmt_float(x):
    x = float(x)
    if math.isnan(x) or math.isinf(x):
        return "null"
    text = f"{x:.17g}"
    if not any(c in text for c in ".en"):
        text += ".0"
    return text


def _encode(obj, indent, level):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, enum.Enum):
        obj = obj.value
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(obj)
    if isinstance(obj, str):
        return _quote(obj)
    if isinstance(obj, Path):
        return _quote(str(obj))
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{_quote(str(k))}: {_encode(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(isinstance(v, (int, float, np.integer, np.floating, bool, np.bool_)) or v is None for v in obj):
            return "[" + ", ".join(_encode(v, indent, level + 1) for v in obj) + "]"
        items = [pad + _encode(v, indent, level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _quote(s):
    return json.dumps(s)


def dumps_json(obj, indent=2):
    """JSON text with every float printed at 17 significant digits.

    Output is a pure function of ``obj``, so equal inputs give identical bytes.
    NaN and infinities become ``null``.
    """
    return _encode(obj, indent, 0) + "\n"


def write_json(path, obj):
    Path(path).write_text(dumps_json(obj))


def write_field(path, values):
    """One value per line, aligned with the mesh vertex order."""
    values = np.asarray(values, dtype=float).ravel()
    Path(path).write_text("".join(f"{v:.17g}\n" for v in values))


def read_field(path, n_vertices=None):
    """Read a ``.field`` file written by :func:`write_field`.

    Raises
    ------
    ParseError
        On non-numeric content or a length mismatch with ``n_vertices``.
    """
    lines = [ln for ln in Path(path).read_text().split() if ln]
    try:
        values = np.array([float(v) for v in lines])
    except ValueError as exc:
        raise ParseError(f"{path}: {exc}") from None
    if n_vertices is not None and values.size != n_vertices:
        raise ParseError(f"{path}: expected {n_vertices} values, found {values.size}")
    return values


def sparse_vector(x, tol=0.0):
    """Nonzero entries of ``x`` as ``{"index": [...], "value": [...]}``."""
    x = np.asarray(x, dtype=float)
    idx = np.flatnonzero(np.abs(x) > tol)
    return {"length": int(x.size), "index": idx.tolist(), "value": x[idx].tolist()}


TRACE_COLUMNS = ("step", "E", "pseudo_norm", "dt", "accepted")


def write_trace_csv(path, traces):
    """Write one or more flow traces; several traces get a leading ``node`` column."""
    if not isinstance(traces, (list, tuple)):
        traces = [traces]
        named = False
    else:
        named = True
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow((("node",) if named else ()) + TRACE_COLUMNS)
        for node, tr in enumerate(traces):
            for r in tr.records:
                row = [r.step, _fmt_float(r.energy), _fmt_float(r.pseudo_norm), _fmt_float(r.dt), int(r.accepted)]
                w.writerow(([node] if named else []) + row)


def plot_series_svg(path, series, ylabel, logy=False):
    """Static line plot of ``{label: (x, y)}`` as SVG."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = "conformal-spectra"
    fig, ax = plt.subplots(figsize=(6, 3.5))
    for label, (x, y) in series.items():
        ax.plot(x, y, marker=".", lw=1, label=label)
    ax.set_xlabel("step")
    ax.set_ylabel(ylabel)
    if logy:
        ax.set_yscale("log")
    if len(series) > 1:
        ax.legend(fontsize="small")
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
