"""Self-describing result envelopes and their CSV/JSON serialisation."""

from __future__ import annotations

import csv
import io
import json
import math
import os
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Any

CSV_COLUMNS = ("experiment", "series", "x", "y", "count", "stderr")
FORMATS = ("csv", "json")


def _version() -> str:
    from importlib.metadata import PackageNotFoundError, version

    try:
        return version("artifact")
    except PackageNotFoundError:
        return "0+unknown"


def _num(v) -> float | None:
    if v is None:
        return None
    v = float(v)
    return None if math.isnan(v) else v


def row(x, y, count=None, stderr=None) -> dict[str, Any]:
    """One table row; NaN and missing values are stored as ``None``."""
    return {
        "x": _num(x),
        "y": _num(y),
        "count": None if count is None else int(count),
        "stderr": _num(stderr),
    }


@dataclass
class ResultEnvelope:
    """Experiment output together with everything needed to regenerate it.

    ``spec`` echoes the parameters (plain JSON types only) and ``tables``
    maps series names to lists of rows built with :func:`row`.
    """

    experiment: str
    spec: dict[str, Any]
    seed: int | None
    tables: dict[str, list[dict[str, Any]]] = field(default_factory=dict)
    timestamp: str = ""
    version: str = ""

    def __post_init__(self):
        if not self.timestamp:
            self.timestamp = datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
        if not self.version:
            self.version = _version()

    def to_dict(self) -> dict[str, Any]:
        return {
            "experiment": self.experiment,
            "spec": self.spec,
            "seed": self.seed,
            "timestamp": self.timestamp,
            "version": self.version,
            "tables": self.tables,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "ResultEnvelope":
        return cls(d["experiment"], d["spec"], d["seed"], d["tables"], d["timestamp"], d["version"])


def _fmt(v) -> str:
    if v is None:
        return ""
    return repr(v) if isinstance(v, float) else str(v)


def envelope_csv(env: ResultEnvelope) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for series in env.tables:
        for r in env.tables[series]:
            w.writerow([env.experiment, series, _fmt(r["x"]), _fmt(r["y"]), _fmt(r["count"]), _fmt(r["stderr"])])
    return buf.getvalue()


def envelope_json(env: ResultEnvelope) -> str:
    return json.dumps(env.to_dict(), indent=2, sort_keys=True, allow_nan=False) + "\n"


def render(env: ResultEnvelope, format: str = "csv") -> str:
    if format == "csv":
        return envelope_csv(env)
    if format == "json":
        return envelope_json(env)
    raise ValueError(f"unknown format {format!r}; expected one of {FORMATS}")


def export_results(env: ResultEnvelope, format: str, destination) -> None:
    """Write ``env`` as long-format CSV or JSON to a path or text stream.

    Output is a pure function of the envelope, so repeated exports are
    byte-identical.
    """
    text = render(env, format)
    if isinstance(destination, (str, os.PathLike)):
        with open(destination, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        destination.write(text)


def read_envelope(source) -> ResultEnvelope:
    """Load an envelope written with ``format="json"``."""
    if isinstance(source, (str, os.PathLike)):
        with open(source, encoding="utf-8") as fh:
            return ResultEnvelope.from_dict(json.load(fh))
    return ResultEnvelope.from_dict(json.load(source))
