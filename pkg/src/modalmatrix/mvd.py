"""Reader and writer for the text MVD (matrix-variate data) format.

::

    mvd 1 <N> <P> <T>
    <P*T floats, row-major>      # N lines
    # <key>: <value>             # optional metadata comments
    # labels: <N integers>       # optional, last line

Floats are written with 17 significant digits, which round-trips float64
exactly.
"""
from __future__ import annotations

import numpy as np

from .errors import DimensionError, ParameterError
from .tensor_core import Dataset

VERSION = 1


class MvdFormatError(ParameterError):
    pass


def _fmt(x: float) -> str:
    return "%.17g" % x


def format_mvd(data, labels=None, meta=None) -> str:
    data = data if isinstance(data, Dataset) else Dataset(data)
    N = len(data)
    P, T = data.shape
    lines = [f"mvd {VERSION} {N} {P} {T}"]
    lines.extend(" ".join(_fmt(x) for x in row) for row in data.flat)
    for key, value in (meta or {}).items():
        lines.append(f"# {key}: {value}")
    if labels is not None:
        labels = np.asarray(labels)
        if labels.shape != (N,):
            raise DimensionError(f"expected {N} labels, got {labels.shape}")
        lines.append("# labels: " + " ".join(str(int(v)) for v in labels))
    return "\n".join(lines) + "\n"


def read_mvd(text: str):
    """Parse MVD text; returns ``(Dataset, labels or None, meta dict)``."""
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise MvdFormatError("empty MVD input")
    head = lines[0].split()
    if len(head) != 5 or head[0] != "mvd":
        raise MvdFormatError(f"bad MVD header {lines[0]!r}")
    try:
        version, N, P, T = (int(x) for x in head[1:])
    except ValueError:
        raise MvdFormatError(f"bad MVD header {lines[0]!r}") from None
    if version != VERSION:
        raise MvdFormatError(f"unsupported MVD version {version}")
    if N < 1 or P < 1 or T < 1:
        raise MvdFormatError(f"bad MVD dimensions {N} {P} {T}")
    rows, labels, meta = [], None, {}
    for ln in lines[1:]:
        if ln.startswith("#"):
            key, _, value = ln[1:].partition(":")
            key = key.strip()
            if key == "labels":
                try:
                    labels = np.array([int(v) for v in value.split()], dtype=np.int64)
                except ValueError:
                    raise MvdFormatError("non-integer label") from None
            else:
                meta[key] = value.strip()
            continue
        toks = ln.split()
        if len(toks) != P * T:
            raise MvdFormatError(f"row {len(rows) + 1} has {len(toks)} values, expected {P * T}")
        try:
            rows.append([float(t) for t in toks])
        except ValueError:
            raise MvdFormatError(f"row {len(rows) + 1} has a non-numeric value") from None
    if len(rows) != N:
        raise MvdFormatError(f"expected {N} rows, found {len(rows)}")
    flat = np.array(rows, dtype=np.float64)
    if not np.all(np.isfinite(flat)):
        raise MvdFormatError("non-finite value in MVD data")
    if labels is not None and labels.shape != (N,):
        raise MvdFormatError(f"expected {N} labels, found {labels.size}")
    return Dataset.from_flat(flat, P, T), labels, meta


def load_mvd(path):
    with open(path, encoding="utf-8") as fh:
        return read_mvd(fh.read())


def save_mvd(path, data, labels=None, meta=None):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_mvd(data, labels, meta))


def read_labels(path) -> np.ndarray:
    """Labels from a one-integer-per-line file or from an MVD ``# labels:`` line."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    if text.lstrip().startswith("mvd"):
        _, labels, _ = read_mvd(text)
        if labels is None:
            raise MvdFormatError(f"{path} has no labels line")
        return labels
    try:
        return np.array([int(t) for t in text.split()], dtype=np.int64)
    except ValueError:
        raise MvdFormatError(f"{path} contains a non-integer label") from None


def write_labels(path, labels):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.writelines(f"{int(v)}\n" for v in labels)
