# services/validate_service.py
import numpy as np
import pandas as pd


def _coord(v):
    if isinstance(v, (int, float, np.number)) and float(v).is_integer():
        return str(int(v))
    return str(v)


def _label(row, cols):
    return "(" + ", ".join(_coord(row[c]) for c in cols) + ")"


def validate_limits(frame, model, header=None):
    """Check an ingested limits frame against a model's sample space.

    Returns a list of human-readable issues; an empty list means the frame
    can be turned into a LimitsTable.
    """
    issues = []
    cols = list(model.design["point_names"])

    # ---- Header ----
    if header:
        design = header.get("design")
        if design and design != model.design.get("design"):
            issues.append(f"Header design {design!r} does not match model {model.design.get('design')!r}")
        for key in ("n", "n1", "n2"):
            if key in header and key in model.design and str(header[key]) != str(model.design[key]):
                issues.append(f"Header {key}={header[key]} does not match model {key}={model.design[key]}")

    # ---- Columns ----
    missing = [c for c in cols + ["lower", "upper"] if c not in frame.columns]
    if missing:
        issues.append(f"Missing column(s): {', '.join(missing)}")
        return issues

    # ---- Numeric ----
    numeric = []
    for c in ("lower", "upper"):
        values = pd.to_numeric(frame[c], errors="coerce")
        for _, row in frame[values.isna()].iterrows():
            numeric.append(f"{c} not numeric at {_label(row, cols)}")
    for c in cols:
        values = pd.to_numeric(frame[c], errors="coerce")
        if values.isna().any() or (values.dropna() % 1 != 0).any():
            numeric.append(f"Column {c} must hold integers")
    issues.extend(numeric)
    # the remaining checks need numbers
    if numeric:
        return issues

    # ---- Ordering ----
    lower = frame["lower"].astype(float)
    upper = frame["upper"].astype(float)
    for _, row in frame[lower > upper + 1e-12].iterrows():
        issues.append(f"lower > upper at {_label(row, cols)}")

    # ---- Sample space ----
    keys = [tuple(int(v) for v in k) for k in frame[cols].to_numpy().tolist()]
    seen = set()
    for key in keys:
        if key in seen:
            issues.append(f"Duplicate row for sample point {key}")
        seen.add(key)
    expected = {tuple(p) for p in np.asarray(model.points).tolist()}
    for key in sorted(expected - seen):
        issues.append(f"Missing row for sample point {key}")
    for key in sorted(seen - expected):
        issues.append(f"Row {key} is not a sample point of model {model.name}")

    return issues
