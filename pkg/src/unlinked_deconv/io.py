"""CSV and JSON reading/writing for datasets, fits and inference tables."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .data_model import SETTINGS, Dataset


class InputError(ValueError):
    """Malformed or inconsistent user input."""


def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def read_matrix_csv(path, columns: int | None = None) -> np.ndarray:
    """Numeric CSV into an (rows x cols) array. A first row with any
    non-numeric cell is taken as a header. Errors name the offending line."""
    rows = []
    width = columns
    with open(path, newline="") as fh:
        for lineno, record in enumerate(csv.reader(fh), start=1):
            if not record or all(not cell.strip() for cell in record):
                continue
            cells = [cell.strip() for cell in record]
            if lineno == 1 and not all(_is_number(c) for c in cells):
                if width is None:
                    width = len(cells)
                continue
            if width is None:
                width = len(cells)
            if len(cells) != width:
                raise InputError(f"{path}: line {lineno}: expected {width} columns, found {len(cells)}")
            try:
                values = [float(c) for c in cells]
            except ValueError:
                raise InputError(f"{path}: line {lineno}: non-numeric value in {record!r}") from None
            if not all(math.isfinite(v) for v in values):
                raise InputError(f"{path}: line {lineno}: non-finite value")
            rows.append(values)
    if not rows:
        raise InputError(f"{path}: no data rows")
    return np.array(rows, dtype=float)


def read_vector_csv(path) -> np.ndarray:
    return read_matrix_csv(path, columns=1)[:, 0]


def read_sidecar(path) -> dict:
    try:
        meta = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: line {exc.lineno}: invalid JSON ({exc.msg})") from None
    if not isinstance(meta, dict):
        raise InputError(f"{path}: expected a JSON object")
    unknown = set(meta) - {"setting", "sigma", "seed"}
    if unknown:
        raise InputError(f"{path}: unknown keys {sorted(unknown)}")
    if meta.get("setting") not in (None, "custom") + SETTINGS:
        raise InputError(f"{path}: invalid setting {meta['setting']!r}")
    return meta


def load_dataset(x_path, y_path, meta_path=None, sigma: float | None = None) -> Dataset:
    x = read_matrix_csv(x_path)
    y = read_vector_csv(y_path)
    meta = read_sidecar(meta_path) if meta_path else {}
    if sigma is None:
        sigma = meta.get("sigma")
    try:
        return Dataset(x, y, meta.get("setting", "custom"), sigma, meta.get("seed"), linked=False)
    except ValueError as exc:
        raise InputError(str(exc)) from None


def _fmt(value: float) -> str:
    return repr(float(value))


def csv_text(header, rows) -> str:
    lines = [",".join(header)]
    lines.extend(",".join(_fmt(v) for v in row) for row in rows)
    return "\n".join(lines) + "\n"


def write_dataset(directory, dataset: Dataset) -> None:
    """Write ``X.csv``, ``Y.csv`` and ``meta.json`` into ``directory``."""
    directory = Path(directory)
    header = [f"x{j + 1}" for j in range(dataset.d)]
    (directory / "X.csv").write_text(csv_text(header, dataset.covariates))
    (directory / "Y.csv").write_text(csv_text(["y"], dataset.responses[:, None]))
    meta = {"setting": dataset.setting_tag, "sigma": dataset.sigma, "seed": dataset.seed}
    (directory / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


INFER_HEADER = ("y0", "mean", "mode", "lo", "hi", "flagged")


def inference_csv(rows) -> str:
    lines = [",".join(INFER_HEADER)]
    for r in rows:
        lines.append(",".join([_fmt(r.y0), _fmt(r.mean), _fmt(r.mode), _fmt(r.lo), _fmt(r.hi), str(int(r.flagged))]))
    return "\n".join(lines) + "\n"


def read_inference_csv(path) -> list[tuple]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != INFER_HEADER:
            raise InputError(f"{path}: line 1: unexpected header {header!r}")
        return [tuple(float(c) for c in row[:5]) + (bool(int(row[5])),) for row in reader]
