"""Deterministic CSV/JSON output and experiment configuration documents."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from .errors import ConfigError
from .lattice import SpinorState, Torus2D

CSV_VERSION = "# qwalk-topo v1"
EXPERIMENTS = ("walk1d", "phase1d", "phase2d", "edge2d", "boundstate", "asymptotic", "spectrum")


def format_value(v: Any) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return "%.17g" % float(v)
    return str(v)


def write_csv(path: str | Path, columns: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    """Write a versioned CSV; floats carry 17 significant digits."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [CSV_VERSION, ",".join(columns)]
    for row in rows:
        if len(row) != len(columns):
            raise ValueError("row length does not match the header")
        lines.append(",".join(format_value(v) for v in row))
    path.write_text("\n".join(lines) + "\n")
    return path


def read_csv(path: str | Path) -> tuple[list[str], np.ndarray]:
    """Read back a file written by :func:`write_csv` (numeric columns only)."""
    text = Path(path).read_text().splitlines()
    if not text or text[0] != CSV_VERSION:
        raise ConfigError(f"{path} is not a {CSV_VERSION} file")
    cols = text[1].split(",")
    data = np.array([[float(x) if x else np.nan for x in ln.split(",")] for ln in text[2:]])
    return cols, data.reshape(-1, len(cols))


def _jsonable(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if np.isfinite(f) else str(f)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def write_json(path: str | Path, doc: Any) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n")
    return path


def state_rows(state: SpinorState) -> tuple[list[str], list[list[Any]]]:
    """Snapshot rows ``(site [, site_y], re_up, im_up, re_down, im_down)``."""
    a = state.amplitudes
    if isinstance(state.geometry, Torus2D):
        x, y = state.geometry.coords()
        cols = ["site", "site_y", "re_up", "im_up", "re_down", "im_down"]
        flat = a.reshape(-1, 2)
        rows = [[int(i), int(j), u.real, u.imag, d.real, d.imag]
                for i, j, (u, d) in zip(x.ravel(), y.ravel(), flat)]
        return cols, rows
    cols = ["site", "re_up", "im_up", "re_down", "im_down"]
    rows = [[int(s), u.real, u.imag, d.real, d.imag] for s, (u, d) in zip(state.geometry.coords(), a)]
    return cols, rows


def state_to_json(state: SpinorState) -> list[dict]:
    cols, rows = state_rows(state)
    return [dict(zip(cols, r)) for r in rows]


# ---------------------------------------------------------------------------
# configuration documents


@dataclass
class ExperimentConfig:
    """One experiment: its id, parameters and output settings.

    ``params`` holds the experiment-specific payload (protocol family, grid
    sizes, initial state, tolerances) exactly as it appears in the JSON
    document, so a load/dump round trip is lossless.
    """

    experiment: str
    params: dict = field(default_factory=dict)
    paper_figure: str | None = None
    outputs: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; expected one of {EXPERIMENTS}")
        if not isinstance(self.params, dict) or not isinstance(self.outputs, dict):
            raise ConfigError("params and outputs must be JSON objects")

    def to_dict(self) -> dict:
        doc = {"experiment": self.experiment, "params": self.params, "outputs": self.outputs}
        if self.paper_figure is not None:
            doc["paper_figure"] = self.paper_figure
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        if not isinstance(doc, dict) or "experiment" not in doc:
            raise ConfigError("config must be a JSON object with an 'experiment' field")
        extra = set(doc) - {"experiment", "params", "outputs", "paper_figure"}
        if extra:
            raise ConfigError(f"unknown config fields {sorted(extra)}")
        return cls(doc["experiment"], dict(doc.get("params", {})), doc.get("paper_figure"),
                   dict(doc.get("outputs", {})))

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        try:
            doc = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(doc)
