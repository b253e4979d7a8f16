"""Data ingestion and run manifests."""

from __future__ import annotations

import csv
import json
import math
import sys
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from .config import canonical_json
from .errors import DataFormatError

MIN_RETURNS = 8


def _rows(path) -> list[tuple[int, list[str]]]:
    path = Path(path)
    if not path.is_file():
        raise DataFormatError(f"{path}: no such file", code="missing-file")
    out = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            cells = [c.strip() for c in row]
            if any(cells):
                out.append((lineno, cells))
    return out


def _number(text: str, path, lineno: int) -> float:
    try:
        v = float(text)
    except ValueError:
        raise DataFormatError(f"{path}:{lineno}: non-numeric value {text!r}") from None
    if not math.isfinite(v):
        raise DataFormatError(f"{path}:{lineno}: non-finite value {text!r}")
    return v


def _is_header(cells: list[str]) -> bool:
    try:
        [float(c) for c in cells if c]
    except ValueError:
        return True
    return False


def load_columns(path, ncols: int | None = None) -> np.ndarray:
    """Numeric table from a CSV file with an optional header line.

    Blank lines are skipped. Returns a 1-d array for single-column files and
    an (n, ncols) array otherwise.
    """
    rows = _rows(path)
    if rows and _is_header(rows[0][1]):
        rows = rows[1:]
    if not rows:
        raise DataFormatError(f"{path}: no data rows")
    width = ncols or len(rows[0][1])
    data = []
    for lineno, cells in rows:
        if len(cells) != width:
            raise DataFormatError(f"{path}:{lineno}: expected {width} columns, got {len(cells)}")
        data.append([_number(c, path, lineno) for c in cells])
    arr = np.asarray(data, dtype=float)
    return arr[:, 0] if width == 1 else arr


def load_returns_csv(path, prices: bool = False) -> np.ndarray:
    """Log returns from a CSV file.

    Without ``prices`` the file holds one numeric column of returns (an
    optional ``return`` header is allowed). With ``prices`` it holds
    ``date,price`` rows and returns are ``log(p_t / p_{t-1})``.
    """
    rows = _rows(path)
    if rows and _is_header(rows[0][1]):
        rows = rows[1:]
    if prices:
        vals = []
        for lineno, cells in rows:
            if len(cells) != 2:
                raise DataFormatError(f"{path}:{lineno}: expected date,price")
            p = _number(cells[1], path, lineno)
            if p <= 0:
                raise DataFormatError(f"{path}:{lineno}: price must be positive")
            vals.append(p)
        series = np.diff(np.log(np.asarray(vals, dtype=float)))
    else:
        vals = []
        for lineno, cells in rows:
            if len(cells) != 1:
                raise DataFormatError(f"{path}:{lineno}: expected a single return column")
            vals.append(_number(cells[0], path, lineno))
        series = np.asarray(vals, dtype=float)
    if series.size < MIN_RETURNS:
        raise DataFormatError(
            f"{path}: {series.size} usable returns, need at least {MIN_RETURNS}",
            code="insufficient-data",
        )
    return series


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


@dataclass
class RunManifest:
    """Record of one CLI run, sufficient to reproduce its outputs.

    Written once before the work starts (``status="running"``) and rewritten
    when it finishes.
    """

    command: str
    argv: list[str]
    seed: int
    config_path: str | None = None
    resolved_config: dict[str, Any] | None = None
    threads: int = 1
    version: str = __version__
    started: str = field(default_factory=_now)
    finished: str | None = None
    status: str = "running"
    outputs: list[str] = field(default_factory=list)
    error: str | None = None
    python: str = field(default_factory=lambda: sys.version.split()[0])
    numpy: str = np.__version__

    def write(self, path) -> None:
        Path(path).write_text(canonical_json(asdict(self)))

    def finalize(self, path, outputs=(), error: str | None = None) -> None:
        self.finished = _now()
        self.outputs = sorted(str(o) for o in outputs)
        self.error = error
        self.status = "failed" if error else "ok"
        self.write(path)

    @classmethod
    def read(cls, path) -> "RunManifest":
        return cls(**json.loads(Path(path).read_text()))
