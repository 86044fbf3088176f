"""Readers and writers for the CSV/JSON exchange formats.

All files are UTF-8 with LF line endings and ``.`` as decimal separator.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .errors import SchemaError
from .threshold.contour import ThresholdContour
from .threshold.gp import TrialRecord

TRIALS_HEADER = ["subject", "condition", "x_err_mm", "z_err_mm", "correct"]
SWEEP_HEADER = [
    "phi_deg", "point_id", "disparity_err_arcmin", "visual_dir_err_arcmin",
    "depth_err_diopters", "skew_mm", "fusible",
]
ENCODER_HEADER = ["t_ms", "angle_deg"]
PREDICTION_HEADER = ["t_ms", "angle_deg", "pred_t_ms", "pred_angle_deg"]

_TRUE = {"1", "true", "True", "TRUE"}
_FALSE = {"0", "false", "False", "FALSE"}


def fmt(v) -> str:
    """Compact, round-trippable number formatting; blank for missing values."""
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, np.generic):
        v = v.item()
    if isinstance(v, float):
        if math.isnan(v):
            return ""
        return repr(round(v, 12) + 0.0)
    return str(v)


def write_csv(path, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            values = [row[h] for h in header] if isinstance(row, dict) else row
            w.writerow([fmt(v) for v in values])


def _read_rows(path, header):
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            first = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        if [h.strip() for h in first] != header:
            raise SchemaError(f"{path}: expected header {','.join(header)}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise SchemaError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            rows.append((lineno, [c.strip() for c in row]))
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    return rows


def _float(text, where):
    try:
        v = float(text)
    except ValueError:
        raise SchemaError(f"{where}: not a number: {text!r}") from None
    if not math.isfinite(v):
        raise SchemaError(f"{where}: non-finite value {text!r}")
    return v


def read_trials(path) -> list[TrialRecord]:
    trials = []
    for lineno, (subject, condition, x, z, correct) in _read_rows(path, TRIALS_HEADER):
        where = f"{path}:{lineno}"
        if correct in _TRUE:
            ok = True
        elif correct in _FALSE:
            ok = False
        else:
            raise SchemaError(f"{where}: correct must be 0/1, got {correct!r}")
        if not subject or not condition:
            raise SchemaError(f"{where}: subject and condition are required")
        trials.append(TrialRecord(_float(x, where), _float(z, where), ok, subject, condition))
    return trials


def write_trials(path, trials) -> None:
    write_csv(path, TRIALS_HEADER, (
        [t.subject, t.condition, float(t.x_err_mm), float(t.z_err_mm), bool(t.correct)] for t in trials
    ))


def read_encoder(path) -> tuple[list[float], list[float]]:
    t, a = [], []
    for lineno, (ts, ang) in _read_rows(path, ENCODER_HEADER):
        where = f"{path}:{lineno}"
        t.append(_float(ts, where))
        a.append(_float(ang, where))
    return t, a


def contour_entry(contour: ThresholdContour, **meta) -> dict:
    return {**meta, **contour.to_json()}


def write_json(path, payload) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=False) + "\n", encoding="utf-8")


def read_contours(path) -> list[dict]:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    entries = data.get("contours") if isinstance(data, dict) else None
    if not isinstance(entries, list):
        raise SchemaError(f"{path}: expected an object with a 'contours' list")
    required = {"subject", "p_target", "vertices", "censored_angles", "area_mm2", "centroid"}
    for i, e in enumerate(entries):
        missing = required - set(e)
        if missing:
            raise SchemaError(f"{path}: contour {i} lacks {sorted(missing)}")
    return entries
