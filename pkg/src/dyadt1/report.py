"""Self-describing CSV/JSON output and optional figure rendering for experiment runs."""
from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import math
import os
from pathlib import Path

from . import __version__

log = logging.getLogger(__name__)

OUTPUT_ENV = "DYADT1_OUTPUT_DIR"


def config_hash(config: dict) -> str:
    """Short SHA-256 of the canonical JSON form of a configuration."""
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def fmt(v) -> str:
    """Deterministic text for one CSV cell.

    Floats use ``repr`` precision; magnitudes below 1e-4 (other than zero) are
    always written in exponent notation.
    """
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        if v == 0.0:
            return "0"
        if abs(v) < 1e-4:
            return f"{v:.16e}"
        return repr(float(v))
    if v is None:
        return ""
    try:
        import numpy as np
        if isinstance(v, np.integer):
            return str(int(v))
        if isinstance(v, np.floating):
            return fmt(float(v))
    except ImportError:  # pragma: no cover
        pass
    return str(v)


def csv_text(header: list, rows: list, config: dict, bound: str) -> str:
    """CSV body: a metadata row (config hash, version, bound formula), the column header, then rows."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(["config_hash", config_hash(config), "version", __version__, "bound", bound])
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(v) for v in r])
    return buf.getvalue()


def read_csv(path) -> tuple[dict, list, list]:
    """Inverse of :func:`write_csv`: (metadata, header, rows as strings)."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    meta = dict(zip(rows[0][0::2], rows[0][1::2]))
    return meta, rows[1], rows[2:]


def output_dir(explicit: str | None = None) -> Path:
    d = Path(explicit or os.environ.get(OUTPUT_ENV) or "dyadt1-out")
    d.mkdir(parents=True, exist_ok=True)
    return d


def write_csv(path: Path, header: list, rows: list, config: dict, bound: str) -> Path:
    path = Path(path)
    path.write_text(csv_text(header, rows, config, bound), newline="")
    return path


def write_json(path: Path, payload: dict) -> Path:
    path = Path(path)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, default=_json_default) + "\n")
    return path


def _json_default(o):
    try:
        import numpy as np
        if isinstance(o, np.generic):
            return o.item()
        if isinstance(o, np.ndarray):
            return o.tolist()
    except ImportError:  # pragma: no cover
        pass
    return str(o)


def render_figure(path: Path, series: dict, xlabel: str, ylabel: str, logy: bool = False) -> Path | None:
    """Line plot of ``{label: (xs, ys)}`` to PNG; returns None when matplotlib is unavailable.

    The CSV files remain the primary output; figures are a convenience.
    """
    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        log.warning("matplotlib is not installed; skipping %s", path)
        return None
    fig, ax = plt.subplots(figsize=(5.0, 3.5), dpi=120)
    for label, (xs, ys) in series.items():
        ax.plot(xs, ys, marker="o", ms=3, lw=1, label=str(label))
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if logy:
        ax.set_yscale("log")
    if len(series) > 1:
        ax.legend(fontsize=7, ncol=2)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return Path(path)
