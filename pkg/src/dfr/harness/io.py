"""Feature CSVs, metrics CSVs and ``key = value`` config files.

Feature CSV: UTF-8, header ``label,f0,...,f{d-1}`` (labeled) or ``f0,...,f{d-1}``,
one sample per row. Floats are written with 17 significant digits, which
round-trips every float64 exactly.
"""
from __future__ import annotations

import csv
import dataclasses
import math
import typing
from pathlib import Path

import numpy as np

from ..errors import ConfigurationError, DataError, StorageError
from .datasets import DomainDataset

METRICS_COLUMNS = ("epoch", "L_R", "L_S", "L_H", "L_T", "n_pt", "target_accuracy", "mmd", "coral", "seconds")


def format_float(x: float) -> str:
    """17 significant digits; NaN (a missing value) becomes an empty cell."""
    x = float(x)
    if math.isnan(x):
        return ""
    return format(x, ".17g")


def load_features(path, name: str | None = None) -> DomainDataset:
    path = Path(path)
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise StorageError(f"cannot open {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header:
            raise DataError(f"{path}:1: missing header")
        header = [h.strip() for h in header]
        labeled = header[0] == "label"
        names = header[1:] if labeled else header
        if not names:
            raise DataError(f"{path}:1: header declares no feature columns")
        for j, col in enumerate(names):
            if col != f"f{j}":
                raise DataError(f"{path}:1: expected column f{j}, found {col!r}")
        width = len(header)
        rows, labels = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != width:
                raise DataError(f"{path}:{lineno}: expected {width} fields, found {len(row)}")
            try:
                values = [float(c) for c in row]
            except ValueError:
                raise DataError(f"{path}:{lineno}: non-numeric cell") from None
            if not all(math.isfinite(v) for v in values):
                raise DataError(f"{path}:{lineno}: non-finite value")
            if labeled:
                lab = values[0]
                if lab != int(lab) or lab < 0:
                    raise DataError(f"{path}:{lineno}: label must be a non-negative integer, got {row[0]!r}")
                labels.append(int(lab))
                values = values[1:]
            rows.append(values)
    if not rows:
        raise DataError(f"{path}: no data rows")
    return DomainDataset(
        np.array(rows, dtype=np.float64),
        np.array(labels, dtype=np.int64) if labeled else None,
        name or path.stem,
    )


def write_features(dataset: DomainDataset, path) -> None:
    d = dataset.dim
    header = ([("label")] if dataset.labeled else []) + [f"f{j}" for j in range(d)]
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for i in range(dataset.n):
                row = [format_float(x) for x in dataset.features[i]]
                if dataset.labeled:
                    row.insert(0, str(int(dataset.labels[i])))
                w.writerow(row)
    except OSError as exc:
        raise StorageError(f"cannot write {path}: {exc}") from exc


def write_metrics(history, path) -> None:
    """One row per epoch under the fixed ``METRICS_COLUMNS`` header; empty cells are missing values."""
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(METRICS_COLUMNS)
            for r in history.records:
                w.writerow(
                    [str(r.epoch)]
                    + [format_float(getattr(r, c)) for c in ("L_R", "L_S", "L_H", "L_T")]
                    + [str(r.n_pt)]
                    + [format_float(getattr(r, c)) for c in ("target_accuracy", "mmd", "coral", "seconds")]
                )
    except OSError as exc:
        raise StorageError(f"cannot write {path}: {exc}") from exc


def read_metrics(path) -> list[dict[str, float]]:
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if tuple(reader.fieldnames or ()) != METRICS_COLUMNS:
                raise DataError(f"{path}: unexpected metrics header {reader.fieldnames}")
            return [{k: float(v) if v else float("nan") for k, v in row.items()} for row in reader]
    except OSError as exc:
        raise StorageError(f"cannot read {path}: {exc}") from exc


def write_table(rows, columns, path) -> None:
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(columns)
            for row in rows:
                w.writerow([format_float(v) if isinstance(v, float) else v for v in row])
    except OSError as exc:
        raise StorageError(f"cannot write {path}: {exc}") from exc


# -- key = value config files ------------------------------------------------

def parse_kv_text(text: str, source: str = "<config>") -> dict[str, str]:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"{source}:{lineno}: expected 'key = value'")
        key, value = (p.strip() for p in line.split("=", 1))
        if not key:
            raise ConfigurationError(f"{source}:{lineno}: empty key")
        if key in out:
            raise ConfigurationError(f"{source}:{lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def _coerce(key: str, value: str, annotation):
    text = value.strip()
    try:
        if annotation in (bool, "bool"):
            low = text.lower()
            if low in ("true", "yes", "on", "1"):
                return True
            if low in ("false", "no", "off", "0"):
                return False
            raise ValueError(text)
        if annotation in (int, "int"):
            return int(text)
        if annotation in (float, "float"):
            return float(text)
        if annotation in (str, "str"):
            return text
        # tuple[float, ...]
        parts = [p for p in text.strip("[]()").replace(" ", "").split(",") if p]
        return tuple(float(p) for p in parts)
    except ValueError:
        raise ConfigurationError(f"{key}: cannot parse {value!r}") from None


def build_config(cls, values: dict[str, str], source: str = "<config>"):
    """Instantiate dataclass ``cls`` from string values; unknown keys are errors."""
    hints = typing.get_type_hints(cls)
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(values) - known)
    if unknown:
        raise ConfigurationError(f"{source}: unknown key(s) {', '.join(unknown)}")
    kwargs = {k: _coerce(k, v, hints[k]) for k, v in values.items()}
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigurationError(f"{source}: {exc}") from exc


def load_config(cls, path):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise StorageError(f"cannot read config {path}: {exc}") from exc
    return build_config(cls, parse_kv_text(text, str(path)), str(path))


def dump_config(cfg) -> str:
    lines = []
    for f in dataclasses.fields(cfg):
        v = getattr(cfg, f.name)
        if isinstance(v, bool):
            text = "true" if v else "false"
        elif isinstance(v, tuple):
            text = ", ".join(repr(float(x)) for x in v)
        else:
            text = str(v)
        lines.append(f"{f.name} = {text}")
    return "\n".join(lines) + "\n"
