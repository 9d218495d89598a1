# extractor/limits_file.py
"""LimitsFile: ``# key: value`` header lines followed by CSV rows keyed by
sample point, e.g.

    # design: prop
    # n: 16
    # alpha: 0.05
    # method: wald
    x,lower,upper
    0,0,0
    ...

Numbers are written with 17 significant digits rather than 10, so a
write/read round trip reproduces the table exactly; files carrying fewer
digits are read as given.
"""
import io
import logging

import pandas as pd

from engine.errors import InputError
from engine.models import LimitsTable
from services.validate_service import validate_limits

logger = logging.getLogger(__name__)

HEADER_KEYS = ("design", "n", "n1", "n2", "alpha", "method", "rounded", "sided", "k")


def _parse_header(lines):
    header = {}
    for line in lines:
        body = line.lstrip("#").strip()
        if ":" not in body:
            continue
        key, value = body.split(":", 1)
        header[key.strip()] = value.strip()
    return header


def read_limits(path):
    """(header dict, DataFrame) from a LimitsFile on disk."""
    try:
        with open(path, "r", encoding="utf-8") as f:
            text = f.read()
    except OSError as e:
        raise InputError(f"cannot read limits file {path}: {e}") from e
    lines = text.splitlines()
    header = _parse_header(l for l in lines if l.startswith("#"))
    body = "\n".join(l for l in lines if l.strip() and not l.startswith("#"))
    if not body:
        raise InputError(f"limits file {path} has no rows")
    frame = pd.read_csv(io.StringIO(body), float_precision="round_trip")
    logger.debug("read %d rows from %s (%s)", len(frame), path, header.get("method", "?"))
    return header, frame


def load_limits(path, model):
    """Read, validate against the model's sample space and build a LimitsTable."""
    header, frame = read_limits(path)
    issues = validate_limits(frame, model, header)
    if issues:
        raise InputError(f"{path}: " + "; ".join(issues[:10]))
    cols = list(model.design["point_names"])
    meta = {k: v for k, v in header.items() if k in HEADER_KEYS}
    if "alpha" in meta:
        meta["alpha"] = float(meta["alpha"])
    meta.update({k: v for k, v in model.design.items()})
    return LimitsTable(
        points=frame[cols].to_numpy(dtype=int),
        lower=frame["lower"].to_numpy(dtype=float),
        upper=frame["upper"].to_numpy(dtype=float),
        theta_range=model.theta_range,
        meta=meta,
    )


def format_limits(table):
    lines = [f"# {k}: {table.meta[k]}" for k in HEADER_KEYS if k in table.meta]
    buf = io.StringIO()
    table.to_frame().to_csv(buf, index=False, float_format="%.17g", lineterminator="\n")
    return "\n".join(lines + [buf.getvalue()])


def write_limits(path, table):
    with open(path, "w", encoding="utf-8") as f:
        f.write(format_limits(table))
    logger.info("wrote %d rows to %s", len(table), path)
