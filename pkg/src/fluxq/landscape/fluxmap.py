"""Rectangular 2D maps over two linear axes and their CSV / JSON forms."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

CSV_MAGIC = "# fluxq-map v1"


@dataclass(frozen=True)
class Axis:
    name: str
    start: float
    stop: float
    count: int

    def __post_init__(self) -> None:
        if self.count < 2:
            raise ValueError(f"axis {self.name!r} needs count >= 2, got {self.count}")
        if not (math.isfinite(self.start) and math.isfinite(self.stop)):
            raise ValueError(f"axis {self.name!r} bounds must be finite")

    @property
    def values(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.count)

    @property
    def step(self) -> float:
        return (self.stop - self.start) / (self.count - 1)

    def with_name(self, name: str) -> "Axis":
        return Axis(name, self.start, self.stop, self.count)

    @classmethod
    def parse(cls, name: str, text: str) -> "Axis":
        """Parse ``"start:stop:count"``."""
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"axis {name!r}: expected start:stop:count, got {text!r}")
        return cls(name, float(parts[0]), float(parts[1]), int(parts[2]))

    def to_dict(self) -> dict[str, Any]:
        return {"name": self.name, "start": self.start, "stop": self.stop, "count": self.count}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "Axis":
        return cls(d["name"], float(d["start"]), float(d["stop"]), int(d["count"]))


@dataclass
class FluxMap:
    """Scalar grid ``values[i, j]`` at ``(rows.values[i], cols.values[j])``.

    NaN marks sentinel cells (failed convergence, non-dispersive guard band);
    every other value is finite.
    """

    rows: Axis
    cols: Axis
    values: np.ndarray
    quantity: str = "value"
    metadata: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=float)
        shape = (self.rows.count, self.cols.count)
        if self.values.shape != shape:
            if self.values.size != shape[0] * shape[1]:
                raise ValueError(f"values has {self.values.size} entries, axes need {shape}")
            self.values = self.values.reshape(shape)
        if np.any(np.isinf(self.values)):
            raise ValueError("map values must be finite or NaN sentinels")

    @property
    def n_sentinel(self) -> int:
        return int(np.count_nonzero(np.isnan(self.values)))

    def col_index(self, value: float, atol: float = 1e-9) -> int:
        idx = int(np.argmin(np.abs(self.cols.values - value)))
        if abs(self.cols.values[idx] - value) > atol:
            raise KeyError(f"no column at {self.cols.name}={value}")
        return idx

    def row_index(self, value: float, atol: float = 1e-9) -> int:
        idx = int(np.argmin(np.abs(self.rows.values - value)))
        if abs(self.rows.values[idx] - value) > atol:
            raise KeyError(f"no row at {self.rows.name}={value}")
        return idx

    # serialization ---------------------------------------------------------

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "format": "fluxq-map",
            "version": 1,
            "quantity": self.quantity,
            "axes": [self.rows.to_dict(), self.cols.to_dict()],
            "values": [[None if math.isnan(v) else float(v) for v in row] for row in self.values],
            "metadata": self.metadata,
        }

    @classmethod
    def from_json_dict(cls, d: dict[str, Any]) -> "FluxMap":
        if d.get("format") != "fluxq-map":
            raise ValueError("not a fluxq map document")
        rows, cols = (Axis.from_dict(a) for a in d["axes"])
        values = np.array(
            [[np.nan if v is None else v for v in row] for row in d["values"]], dtype=float
        )
        return cls(rows, cols, values, d.get("quantity", "value"), d.get("metadata", {}))

    def to_csv(self) -> str:
        lines = [
            CSV_MAGIC,
            f"# quantity: {self.quantity}",
            "# axis_row: " + _axis_text(self.rows),
            "# axis_col: " + _axis_text(self.cols),
            "# metadata: " + json.dumps(self.metadata, sort_keys=True),
            f"{self.rows.name},{self.cols.name},{self.quantity}",
        ]
        rv, cv = self.rows.values, self.cols.values
        for i in range(self.rows.count):
            for j in range(self.cols.count):
                lines.append(f"{_fmt(rv[i])},{_fmt(cv[j])},{_fmt(self.values[i, j])}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, text: str) -> "FluxMap":
        header: dict[str, str] = {}
        body: list[str] = []
        for line in text.splitlines():
            if line.startswith("#"):
                key, _, rest = line[1:].strip().partition(": ")
                header[key] = rest
            elif line.strip():
                body.append(line)
        if "axis_row" not in header or "axis_col" not in header:
            raise ValueError("CSV map lacks axis header comments")
        rows = _parse_axis_text(header["axis_row"])
        cols = _parse_axis_text(header["axis_col"])
        values = np.array([float(line.split(",")[2]) for line in body[1:]], dtype=float)
        meta = json.loads(header.get("metadata", "{}"))
        return cls(rows, cols, values, header.get("quantity", "value"), meta)

    def save(self, path: str | Path) -> Path:
        path = Path(path)
        if path.suffix == ".json":
            path.write_text(json.dumps(self.to_json_dict(), indent=1, sort_keys=True) + "\n")
        elif path.suffix == ".csv":
            path.write_text(self.to_csv())
        else:
            raise ValueError(f"unsupported map file extension {path.suffix!r}")
        return path

    @classmethod
    def load(cls, path: str | Path) -> "FluxMap":
        path = Path(path)
        text = path.read_text()
        if path.suffix == ".json":
            return cls.from_json_dict(json.loads(text))
        if path.suffix == ".csv":
            return cls.from_csv(text)
        raise ValueError(f"unsupported map file extension {path.suffix!r}")


def _fmt(v: float) -> str:
    return "nan" if math.isnan(v) else repr(float(v))


def _axis_text(axis: Axis) -> str:
    return f"{axis.name},{_fmt(axis.start)},{_fmt(axis.stop)},{axis.count}"


def _parse_axis_text(text: str) -> Axis:
    name, start, stop, count = text.split(",")
    return Axis(name, float(start), float(stop), int(count))
