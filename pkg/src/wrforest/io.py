"""File formats: dataset CSV, query CSV, JSON documents. Writes are atomic."""
from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from pathlib import Path

import numpy as np


class DataFormatError(ValueError):
    pass


def atomic_write_text(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path, obj) -> None:
    atomic_write_text(path, json.dumps(obj, indent=None) + "\n")


def read_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None


def _fmt(v) -> str:
    # repr of a Python float round-trips binary64 exactly
    return repr(float(v))


def write_rows(path, header, rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if header is not None:
        w.writerow(header)
    for row in rows:
        w.writerow(row)
    atomic_write_text(path, buf.getvalue())


def write_dataset_csv(path, x, y, t) -> None:
    x = np.asarray(x)
    y = np.asarray(y).reshape(len(x), -1)
    header = [f"x{k + 1}" for k in range(x.shape[1])]
    header += [f"y{k + 1}" for k in range(y.shape[1])] + ["t"]
    rows = ([_fmt(v) for v in xr] + [_fmt(v) for v in yr] + [str(int(tr))]
            for xr, yr, tr in zip(x, y, t))
    write_rows(path, header, rows)


def _parse_float(cell, path, line, col):
    try:
        v = float(cell)
    except ValueError:
        raise DataFormatError(f"{path}:{line}: column {col}: non-numeric value {cell!r}") from None
    if not np.isfinite(v):
        raise DataFormatError(f"{path}:{line}: column {col}: non-finite value {cell!r}")
    return v


def read_dataset_csv(path):
    """Return (x, y, t) from a ``x1..xd,y1[,y2],t`` CSV."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataFormatError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        xs = [i for i, h in enumerate(header) if h.startswith("x")]
        ys = [i for i, h in enumerate(header) if h.startswith("y")]
        if "t" not in header or not xs or not ys:
            raise DataFormatError(f"{path}:1: header must name x1..xd, y1[,y2] and t columns")
        ti = header.index("t")
        X, Y, T = [], [], []
        for line, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DataFormatError(
                    f"{path}:{line}: expected {len(header)} columns, found {len(row)}")
            vals = [_parse_float(c, path, line, header[i]) for i, c in enumerate(row)]
            tv = vals[ti]
            if tv not in (0.0, 1.0):
                raise DataFormatError(f"{path}:{line}: t must be 0 or 1, found {row[ti]!r}")
            X.append([vals[i] for i in xs])
            Y.append([vals[i] for i in ys])
            T.append(int(tv))
    if not X:
        raise DataFormatError(f"{path}: no data rows")
    return np.array(X), np.array(Y), np.array(T, dtype=np.int64)


def read_matrix_csv(path, width=None) -> np.ndarray:
    """Headerless numeric CSV, one vector per line."""
    out = []
    with open(path, newline="") as fh:
        for line, row in enumerate(csv.reader(fh), start=1):
            if not row:
                continue
            vals = [_parse_float(c, path, line, f"{k + 1}") for k, c in enumerate(row)]
            if width is not None and len(vals) != width:
                raise DataFormatError(f"{path}:{line}: expected {width} values, found {len(vals)}")
            if out and len(vals) != len(out[0]):
                raise DataFormatError(
                    f"{path}:{line}: expected {len(out[0])} values, found {len(vals)}")
            out.append(vals)
    if not out:
        raise DataFormatError(f"{path}: no rows")
    return np.array(out)


def parse_vector(text: str, width=None) -> np.ndarray:
    vals = []
    for k, cell in enumerate(text.split(",")):
        vals.append(_parse_float(cell.strip(), "--x", 1, f"{k + 1}"))
    if width is not None and len(vals) != width:
        raise DataFormatError(f"--x: expected {width} values, found {len(vals)}")
    return np.array(vals)
