"""Readers for the analysis bundle's file schemas.

Every reader validates its input against the documented schema and raises
:class:`SchemaError` naming the first offending column or metadata key, so a
render failure always says what exactly was malformed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class SchemaError(Exception):
    def __init__(self, path, problem: str):
        super().__init__(f"{path}: {problem}")
        self.path = str(path)
        self.problem = problem


@dataclass(frozen=True)
class Grid:
    kind: str  # "density" or "knn_score"
    title: str
    xmin: float
    xmax: float
    ymin: float
    ymax: float
    values: np.ndarray  # (ny, nx), row 0 at ymin

    @property
    def extent(self):
        return (self.xmin, self.xmax, self.ymin, self.ymax)


GRID_REQUIRED_KEYS = ("kind", "xmin", "xmax", "ymin", "ymax", "nx", "ny")


def read_grid(path) -> Grid:
    meta = {}
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line.startswith("#"):
                body = line[1:].strip()
                if body.startswith("title="):
                    meta["title"] = body.split("=", 1)[1]
                    continue
                for token in body.split():
                    if "=" in token:
                        key, value = token.split("=", 1)
                        meta[key] = value
            elif line:
                rows.append(line.split(","))
    for key in GRID_REQUIRED_KEYS:
        if key not in meta:
            raise SchemaError(path, f"missing grid metadata key {key!r}")
    try:
        nx, ny = int(meta["nx"]), int(meta["ny"])
        bounds = tuple(float(meta[k]) for k in ("xmin", "xmax", "ymin", "ymax"))
    except ValueError as exc:
        raise SchemaError(path, f"non-numeric grid metadata: {exc}") from exc
    if len(rows) != ny:
        raise SchemaError(path, f"expected {ny} value rows, found {len(rows)}")
    try:
        values = np.array([[float(v) for v in row] for row in rows])
    except ValueError as exc:
        raise SchemaError(path, f"non-numeric grid value: {exc}") from exc
    if values.shape != (ny, nx):
        raise SchemaError(path, f"value block is {values.shape}, expected {(ny, nx)}")
    return Grid(
        kind=meta["kind"],
        title=meta.get("title", Path(path).stem),
        xmin=bounds[0], xmax=bounds[1], ymin=bounds[2], ymax=bounds[3],
        values=values,
    )


def read_table(path, required: tuple[str, ...]) -> dict[str, list[str]]:
    """Header-checked CSV into column lists (values stay as strings)."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n").split(",")
        for column in required:
            if column not in header:
                raise SchemaError(path, f"missing column {column!r}")
        columns: dict[str, list[str]] = {name: [] for name in header}
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            cells = line.split(",")
            if len(cells) != len(header):
                raise SchemaError(path, f"line {lineno}: expected {len(header)} fields")
            for name, cell in zip(header, cells):
                columns[name].append(cell)
    return columns


def floats(columns: dict[str, list[str]], name: str, path) -> np.ndarray:
    try:
        return np.array([float(v) for v in columns[name]])
    except ValueError as exc:
        raise SchemaError(path, f"non-numeric value in column {name!r}: {exc}") from exc


def read_manifest(bundle_dir) -> list[dict]:
    path = Path(bundle_dir) / "manifest.json"
    if not path.exists():
        raise SchemaError(path, "manifest.json not found")
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    entries = data.get("entries")
    if not isinstance(entries, list):
        raise SchemaError(path, "manifest has no 'entries' list")
    for i, entry in enumerate(entries):
        for key in ("file", "kind"):
            if key not in entry:
                raise SchemaError(path, f"manifest entry {i} missing {key!r}")
    return entries
