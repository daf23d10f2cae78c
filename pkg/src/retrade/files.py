"""Delimited series files, result tables and run summaries.

Series files are comma-delimited with a ``t,price`` or ``t,return`` header,
one observation per line and ``t`` strictly increasing. Lines starting with
``#`` are comments; emitted files use them for provenance. Floats are
written with ``repr`` so files re-ingest to identical values.
"""

from __future__ import annotations

import hashlib
import json
import math
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from . import __version__
from .errors import ParseError, SchemaError
from .series import ReturnSeries
from .tails import returns_from_prices

COLUMNS = ("price", "return")


def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()


def provenance(command: str, config: dict, seed) -> list[str]:
    return [
        f"retrade {__version__}",
        f"numpy {np.__version__}",
        f"command {command}",
        f"config_sha256 {config_hash(config)}",
        f"seed {seed}",
    ]


def _fmt(x) -> str:
    if type(x) is float:
        return repr(x)
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_table(path, header: Sequence[str], rows: Iterable[Sequence], comments: Sequence[str] = ()) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"# {c}" for c in comments]
    lines.append(",".join(header))
    lines.extend(",".join(_fmt(v) for v in row) for row in rows)
    path.write_text("\n".join(lines) + "\n")
    return path


def write_series(path, values, column: str = "return", comments: Sequence[str] = (), t0: int = 1) -> Path:
    """Write a SeriesFile. ``values`` may be a ReturnSeries (its returns are written)."""
    if column not in COLUMNS:
        raise ValueError(f"column must be one of {COLUMNS}")
    if isinstance(values, ReturnSeries):
        values = values.returns
    vals = np.asarray(values, dtype=float).tolist()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"# {c}" for c in comments]
    lines.append(f"t,{column}")
    lines.extend(f"{t},{v!r}" for t, v in zip(range(t0, t0 + len(vals)), vals))
    path.write_text("\n".join(lines) + "\n")
    return path


def read_series(path) -> tuple[str, np.ndarray, np.ndarray]:
    """Parse a SeriesFile into ``(column, t, values)``."""
    column = None
    ts: list = []
    vals: list = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            s = line.strip()
            if not s or s.startswith("#"):
                continue
            fields = [f.strip() for f in s.split(",")]
            if column is None:
                head = [f.lower() for f in fields]
                if len(head) != 2 or head[0] != "t" or head[1] not in COLUMNS:
                    raise SchemaError(f"header must be 't,price' or 't,return', got {s!r}", lineno)
                column = head[1]
                continue
            if len(fields) != 2:
                raise ParseError(f"expected 2 fields, got {len(fields)}", lineno)
            try:
                t = int(fields[0])
            except ValueError:
                raise ParseError(f"t is not an integer: {fields[0]!r}", lineno) from None
            try:
                v = float(fields[1])
            except ValueError:
                raise ParseError(f"{column} is not a number: {fields[1]!r}", lineno) from None
            if not math.isfinite(v):
                raise ParseError(f"{column} is not finite: {fields[1]!r}", lineno)
            if ts and t <= ts[-1]:
                raise SchemaError(f"t must be strictly increasing ({t} after {ts[-1]})", lineno)
            ts.append(t)
            vals.append(v)
    if column is None:
        raise SchemaError("missing header row", None)
    if not vals:
        raise SchemaError("no observations", None)
    return column, np.asarray(ts, dtype=np.int64), np.asarray(vals, dtype=float)


def load_series(path, to_returns: bool = True):
    """Load a SeriesFile.

    Return files come back as a :class:`ReturnSeries` untouched. Price files
    are converted to returns (keeping the prices) unless ``to_returns`` is
    false, in which case the raw price array is returned.
    """
    column, _, vals = read_series(path)
    if column == "return":
        return ReturnSeries(vals)
    return returns_from_prices(vals) if to_returns else vals


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return [_jsonable(v) for v in x.tolist()]
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    return x


def write_summary(path, summary: dict, prov: Optional[Sequence[str]] = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    doc = dict(summary)
    if prov is not None:
        doc["provenance"] = list(prov)
    path.write_text(json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n")
    return path
