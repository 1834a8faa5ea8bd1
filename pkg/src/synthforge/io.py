"""CSV ingestion and emission with column selectors."""

from __future__ import annotations

import csv
import hashlib
import math
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .dataset import Dataset


class CsvError(ValueError):
    pass


def file_digest(path) -> str:
    """SHA-256 of the file bytes, hex encoded."""
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _resolve(selector: str, header: list) -> int:
    if selector in header:
        return header.index(selector)
    if selector.lstrip("-").isdigit():
        idx = int(selector)
        if 0 <= idx < len(header):
            return idx
        raise CsvError(f"column index {idx} is out of range (file has {len(header)} columns)")
    raise CsvError(f"column {selector!r} not found; header is {', '.join(header)}")


def read_table(path) -> tuple:
    """Header and string rows of a UTF-8 CSV file."""
    path = Path(path)
    if not path.is_file():
        raise CsvError(f"input file {str(path)!r} does not exist")
    with open(path, newline="", encoding="utf-8-sig") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if not rows:
        raise CsvError(f"input file {str(path)!r} is empty")
    header = [h.strip() for h in rows[0]]
    if len(set(header)) != len(header):
        raise CsvError("header contains duplicate column names")
    body = rows[1:]
    if not body:
        raise CsvError(f"input file {str(path)!r} has a header but no data rows")
    for k, r in enumerate(body):
        if len(r) != len(header):
            raise CsvError(f"row {k + 2} has {len(r)} fields, expected {len(header)}")
    return header, body


def ingest_csv(path, inputs: Optional[Sequence[str]] = None, response: Optional[str] = None,
               require_response: bool = True) -> Dataset:
    """Load selected numeric columns.

    Columns are selected by name or 0-based index. With no ``response`` the
    last column is the response; with no ``inputs`` every other column is an
    input. Rows holding a non-numeric or non-finite selected cell are
    rejected, listing their 1-based line numbers.
    """
    header, body = read_table(path)
    if response is None and require_response:
        resp_idx = len(header) - 1
    elif response is None:
        resp_idx = None
    else:
        resp_idx = _resolve(str(response), header)
    if inputs:
        in_idx = [_resolve(str(s), header) for s in inputs]
    else:
        in_idx = [j for j in range(len(header)) if j != resp_idx]
    if not in_idx:
        raise CsvError("no input columns selected")
    if resp_idx is not None and resp_idx in in_idx:
        raise CsvError(f"response column {header[resp_idx]!r} is also selected as an input")
    if len(set(in_idx)) != len(in_idx):
        raise CsvError("an input column is selected twice")

    cols = in_idx + ([] if resp_idx is None else [resp_idx])
    values = np.empty((len(body), len(cols)))
    bad = []
    for i, row in enumerate(body):
        for k, j in enumerate(cols):
            try:
                v = float(row[j])
            except ValueError:
                v = math.nan
            if not math.isfinite(v):
                bad.append(i + 2)
                break
            values[i, k] = v
    if bad:
        shown = ", ".join(map(str, bad[:20])) + (" ..." if len(bad) > 20 else "")
        raise CsvError(f"non-numeric or non-finite values in selected columns at line(s) {shown}")
    names = tuple(header[j] for j in in_idx)
    if resp_idx is None:
        return Dataset(values, None, names)
    return Dataset(values[:, :-1], values[:, -1], names, header[resp_idx])


def format_number(v: float) -> str:
    """Shortest text that survives a float round trip at 17 significant digits."""
    return format(float(v), ".17g")


def write_csv(path, data: Dataset) -> None:
    """Write inputs then response under their column names."""
    names = list(data.names())
    cols = [data.inputs[:, j] for j in range(data.d)]
    if data.has_response:
        names.append(data.response_name or "y")
        cols.append(data.response)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(names)
        for row in zip(*cols):
            writer.writerow([format_number(v) for v in row])


def write_in_order(path, data: Dataset, header: Sequence[str]) -> None:
    """Write the dataset's columns in the order they appear in ``header``."""
    names = list(data.names())
    columns = dict(zip(names, data.inputs.T))
    if data.has_response:
        columns[data.response_name] = data.response
    order = [h for h in header if h in columns]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(order)
        for i in range(data.n):
            writer.writerow([format_number(columns[h][i]) for h in order])
