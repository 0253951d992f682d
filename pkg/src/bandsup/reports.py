"""Report emission: CSV tables, JSON documents, tidy plot data and a run manifest.

Payload files are deterministic functions of the configuration: floats are
written with ``repr`` precision, JSON keys are sorted, and nothing
time-dependent is included.  Wall time, timestamps and library versions go
to a separate ``manifest.json``.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import platform
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

PLOT_COLUMNS = ("figure", "series", "x", "y")


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if v is None:
        return ""
    return str(v)


def jsonable(obj):
    """Plain-JSON view of reports: numpy scalars and arrays unwrapped, non-finite floats as strings."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isfinite(x):
            return x
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    if obj is None or isinstance(obj, str):
        return obj
    if hasattr(obj, "to_dict"):
        return jsonable(obj.to_dict())
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def json_text(payload) -> str:
    return json.dumps(jsonable(payload), indent=2, sort_keys=True) + "\n"


def csv_text(header, rows, preamble: dict | None = None) -> str:
    """CSV with optional ``# key: value`` comment lines before the header."""
    buf = io.StringIO()
    for key, value in (preamble or {}).items():
        text = value if isinstance(value, str) else json.dumps(jsonable(value), sort_keys=True,
                                                               separators=(",", ":"))
        buf.write(f"# {key}: {text}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def read_csv(path) -> tuple[dict, list[str], list[list[str]]]:
    """Inverse of :func:`csv_text`: ``(preamble, header, rows)`` with cells as strings."""
    preamble, body = {}, []
    for line in Path(path).read_text().splitlines():
        if line.startswith("# ") and not body:
            key, _, value = line[2:].partition(": ")
            preamble[key] = value
        else:
            body.append(line)
    reader = list(csv.reader(body))
    return preamble, reader[0], reader[1:]


def _versions() -> dict:
    import numba
    import scipy

    from . import __version__
    return {"bandsup": __version__, "python": platform.python_version(), "numpy": np.__version__,
            "scipy": scipy.__version__, "numba": numba.__version__}


class ReportWriter:
    """Single writer for one subcommand run.

    All files go through this object so that output is serialized and the
    manifest can list every payload with its SHA-256.
    """

    def __init__(self, directory, config, command: str, formats=("csv", "json")):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self.config = config
        self.command = command
        self.formats = tuple(formats)
        self.files: dict[str, str] = {}
        self._t0 = time.perf_counter()

    @property
    def provenance(self) -> dict:
        return {"command": self.command, "config_sha256": self.config.digest(),
                "master_seed": self.config.monte_carlo.master_seed}

    def _write(self, name: str, text: str) -> Path:
        path = self.directory / name
        path.write_text(text)
        self.files[name] = hashlib.sha256(text.encode()).hexdigest()
        return path

    def csv(self, name: str, header, rows) -> Path | None:
        if "csv" not in self.formats:
            return None
        pre = {**self.provenance, "config": self.config.to_dict()}
        return self._write(f"{name}.csv", csv_text(header, rows, pre))

    def json(self, name: str, payload: dict) -> Path | None:
        if "json" not in self.formats:
            return None
        doc = {**self.provenance, "config": self.config.to_dict(), "report": payload}
        return self._write(f"{name}.json", json_text(doc))

    def plot_data(self, name: str, records) -> Path:
        """Tidy long-format CSV: one ``(figure, series, x, y)`` row per plotted point."""
        pre = {**self.provenance, "config": self.config.to_dict()}
        return self._write(f"{name}.plot.csv", csv_text(PLOT_COLUMNS, records, pre))

    def figure(self, name: str, records, **labels) -> Path:
        from .plotting import render_figure
        path = self.directory / f"{name}.png"
        render_figure(path, records, **labels)
        self.files[path.name] = hashlib.sha256(path.read_bytes()).hexdigest()
        return path

    def finish(self, status: int = 0, summary: dict | None = None) -> Path:
        manifest = {**self.provenance, "config": self.config.to_dict(), "versions": _versions(),
                    "wall_time_seconds": time.perf_counter() - self._t0,
                    "finished_utc": datetime.now(timezone.utc).isoformat(timespec="seconds"),
                    "exit_status": status, "files": dict(sorted(self.files.items())),
                    "summary": summary or {}}
        path = self.directory / "manifest.json"
        path.write_text(json_text(manifest))
        return path
