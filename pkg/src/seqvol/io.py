"""Data ingestion and machine-readable outputs for the batch pipeline.

CSV inputs carry a header row and an optional leading date column
(auto-detected by a non-numeric first field). Price levels are turned into
log-returns; rows with gaps are rejected with their 1-based line number.

All floats are serialized with 17 significant digits, so identical runs
produce byte-identical files and every double round-trips exactly. The
lower-triangle vech ordering of matrix columns is row-major and documented
in the file's leading comment line.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .errors import DimensionMismatch, NonPositivePrice, ParseError


@dataclass(frozen=True)
class ReturnsTable:
    """Ingested log-return series with column labels and optional dates."""

    columns: list[str]
    times: list[str] | None
    values: np.ndarray


@dataclass(frozen=True)
class RunManifest:
    """Everything needed to reproduce a run byte-for-byte."""

    config: dict
    input_digest: str | None
    seed: int | None
    version: str

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "input_digest": self.input_digest,
            "seed": self.seed,
            "version": self.version,
        }


def sha256_digest(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _parse_float(field: str, line: int, column: str) -> float:
    text = field.strip()
    if not text:
        raise ParseError(f"missing value in column {column!r}", line)
    try:
        value = float(text)
    except ValueError as exc:
        raise ParseError(f"cannot parse {field!r} in column {column!r}", line) from exc
    if math.isnan(value) or math.isinf(value):
        raise ParseError(f"missing value in column {column!r}", line)
    return value


def load_prices_csv(path: str | Path, *, levels: bool = False,
                    scale: float = 1.0) -> ReturnsTable:
    """Load a CSV of price levels or returns into a :class:`ReturnsTable`.

    With ``levels`` the series is transformed to log-returns
    ``ln x_t - ln x_{t-1}`` (non-positive prices are rejected); otherwise
    values pass through. ``scale`` multiplies the returns (default 1, i.e.
    natural-log differences without percent scaling).
    """
    path = Path(path)
    try:
        with path.open(newline="") as handle:
            rows = list(csv.reader(handle))
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    rows = [(i + 1, r) for i, r in enumerate(rows) if r and any(f.strip() for f in r)]
    if not rows:
        raise ParseError("empty file", 1)
    header_line, header = rows[0]
    data_rows = rows[1:]
    if not data_rows:
        raise ParseError("no data rows after header", header_line)

    header = [h.strip() for h in header]
    first_field = data_rows[0][1][0].strip()
    try:
        float(first_field)
        has_dates = False
    except ValueError:
        has_dates = True
    columns = header[1:] if has_dates else header
    if not columns:
        raise ParseError("no numeric columns found", header_line)

    times: list[str] | None = [] if has_dates else None
    raw = np.empty((len(data_rows), len(columns)))
    for out_idx, (line, row) in enumerate(data_rows):
        if len(row) != len(header):
            raise ParseError(
                f"expected {len(header)} fields, got {len(row)}", line
            )
        if has_dates:
            times.append(row[0].strip())
            fields = row[1:]
        else:
            fields = row
        for j, field in enumerate(fields):
            raw[out_idx, j] = _parse_float(field, line, columns[j])

    if levels:
        if np.any(raw <= 0.0):
            bad = int(np.argwhere(raw <= 0.0)[0][0])
            raise NonPositivePrice(
                f"price level <= 0 in data row {bad + 1}", data_rows[bad][0]
            )
        values = np.diff(np.log(raw), axis=0)
        if times is not None:
            times = times[1:]
    else:
        values = raw
    values = values * scale
    if values.shape[0] < 2:
        raise ParseError("need at least 2 return observations", data_rows[-1][0])
    return ReturnsTable(columns=columns, times=times, values=values)


def fmt17(x: float) -> str:
    """Render a float with 17 significant digits (exact double round-trip)."""
    return format(float(x), ".17g")


def render_json(obj: Any, indent: int = 0) -> str:
    """Deterministic JSON with 17-significant-digit floats.

    Keys keep insertion order; the standard library encoder does not expose
    float formatting, hence the hand-rolled renderer.
    """
    pad = "  " * indent
    inner = "  " * (indent + 1)
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x) or math.isinf(x):
            return json.dumps(str(x))
        return fmt17(x)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{inner}{json.dumps(str(k))}: {render_json(v, indent + 1)}"
                 for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + f"\n{pad}}}"
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [f"{inner}{render_json(v, indent + 1)}" for v in obj]
        return "[\n" + ",\n".join(items) + f"\n{pad}]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def write_json(path: str | Path, obj: Any) -> None:
    Path(path).write_text(render_json(obj) + "\n")


def vech_lower(mat: np.ndarray) -> list[float]:
    """Row-major lower-triangle half-vectorization."""
    p = mat.shape[0]
    return [float(mat[i, j]) for i in range(p) for j in range(i + 1)]


def _vech_labels(prefix: str, p: int) -> list[str]:
    return [f"{prefix}_{i}_{j}" for i in range(p) for j in range(i + 1)]


def correlation_from_cov(cov: np.ndarray) -> np.ndarray:
    """Correlation matrix with an exactly-unit diagonal."""
    d = np.sqrt(np.diag(cov))
    corr = cov / np.outer(d, d)
    corr = np.clip(corr, -1.0, 1.0)
    np.fill_diagonal(corr, 1.0)
    return corr


def write_volatility_csv(path: str | Path, records: Sequence) -> None:
    """Per-step posterior volatility: vech of the estimate plus correlations."""
    if not records:
        raise DimensionMismatch("no records to write")
    p = records[0].s_star.shape[0]
    with Path(path).open("w", newline="") as handle:
        handle.write("# vech ordering: row-major lower triangle "
                     "(i=0..p-1, j=0..i); corr diagonal is exactly 1\n")
        writer = csv.writer(handle)
        writer.writerow(["t"] + _vech_labels("cov", p) + _vech_labels("corr", p))
        for rec in records:
            corr = correlation_from_cov(rec.s_star)
            row = ([str(rec.t)]
                   + [fmt17(v) for v in vech_lower(rec.s_star)]
                   + [fmt17(v) for v in vech_lower(corr)])
            writer.writerow(row)


def write_forecast_csv(path: str | Path, records: Sequence) -> None:
    """Per-step forecast mean, forecast error and standardized error."""
    if not records:
        raise DimensionMismatch("no records to write")
    p = len(records[0].e)
    cols = ([f"forecast_{j}" for j in range(p)]
            + [f"e_{j}" for j in range(p)]
            + [f"u_{j}" for j in range(p)])
    with Path(path).open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["t"] + cols)
        for rec in records:
            row = ([str(rec.t)]
                   + [fmt17(v) for v in rec.forecast.location]
                   + [fmt17(v) for v in rec.e]
                   + [fmt17(v) for v in rec.u])
            writer.writerow(row)


def write_returns_csv(path: str | Path, values: np.ndarray,
                      columns: Sequence[str] | None = None) -> None:
    """Write a returns matrix in the same layout the loader ingests."""
    values = np.asarray(values, dtype=float)
    if columns is None:
        columns = [f"y{j}" for j in range(values.shape[1])]
    with Path(path).open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(list(columns))
        for row in values:
            writer.writerow([fmt17(v) for v in row])


def write_search_trace_csv(path: str | Path, trace: Sequence) -> None:
    with Path(path).open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["delta", "sweep", "coordinate", "objective", "accepted", "z"])
        for entry in trace:
            writer.writerow([
                fmt17(entry.delta),
                str(entry.sweep),
                "" if entry.coordinate is None else str(entry.coordinate),
                fmt17(entry.objective),
                str(int(entry.accepted)),
                ";".join(fmt17(v) for v in entry.z),
            ])
