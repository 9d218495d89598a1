# cli/report.py
"""Text / CSV / JSON rendering of command results with pandas."""
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

import config

FORMATS = ("text", "csv", "json")


@dataclass
class Report:
    command: str
    design: dict
    grid: dict = field(default_factory=dict)
    runs: list = field(default_factory=list)
    summary: list = field(default_factory=list)
    notes: dict = field(default_factory=dict)


def limits_frame(run):
    """Reported limits of a run: rounded outward, clipped to the parameter range."""
    frame = run.table.reported().to_frame()
    frame.insert(0, "method", run.label)
    return frame


def _json_value(v):
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating, float)):
        v = float(v)
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return None if math.isnan(v) else v
    if isinstance(v, (np.bool_,)):
        return bool(v)
    if isinstance(v, (list, tuple)):
        return [_json_value(x) for x in v]
    if isinstance(v, dict):
        return {str(k): _json_value(x) for k, x in v.items()}
    return v


def _records(frame):
    return [_json_value(r) for r in frame.to_dict(orient="records")]


def to_dict(report):
    out = {"command": report.command, "design": report.design, "grid": report.grid, "runs": []}
    for run in report.runs:
        entry = {"method": run.label, "limits": _records(limits_frame(run).drop(columns="method"))}
        if run.coverage is not None:
            entry["icp"] = run.coverage.icp
            entry["icp_at"] = list(run.coverage.argmin)
            entry["til"] = run.coverage.til
        if run.trace is not None:
            entry["trace"] = {
                "k": run.trace.k,
                "converged": run.trace.converged,
                "nonincreasing": run.trace.nonincreasing,
                "iterations": _records(run.trace.to_frame()),
            }
        out["runs"].append(entry)
    if report.summary:
        out["summary"] = report.summary
    if report.notes:
        out["notes"] = report.notes
    return _json_value(out)


def render_json(report):
    return json.dumps(to_dict(report), indent=2, ensure_ascii=False)


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.{config.REPORT_DECIMALS}f}" if math.isfinite(v) else ("inf" if v > 0 else "-inf")
    return str(v)


def render_text(report):
    dec = config.REPORT_DECIMALS
    lines = [f"# command: {report.command}"]
    lines.append("# design: " + " ".join(f"{k}={v}" for k, v in report.design.items()))
    if report.grid:
        lines.append("# grid: " + " ".join(f"{k}={v}" for k, v in report.grid.items()))
    for run in report.runs:
        lines.append("")
        lines.append(f"== {run.label} ==")
        if run.coverage is not None:
            lines.append(f"ICP={run.coverage.icp:.{dec}f} TIL={run.coverage.til:.{dec}f}")
        if run.trace is not None:
            state = "converged" if run.trace.converged else "NOT converged"
            lines.append(f"fixed point k={run.trace.k} ({state})")
        frame = limits_frame(run).drop(columns="method")
        lines.append(frame.to_string(index=False, float_format=lambda v: f"{v:.{dec}f}"))
        if run.trace is not None:
            lines.append(run.trace.to_frame().to_string(index=False, float_format=lambda v: f"{v:.8f}"))
    if report.summary:
        lines.append("")
        lines.append(pd.DataFrame(report.summary).to_string(index=False, float_format=lambda v: f"{v:.{dec}f}"))
    for key, value in report.notes.items():
        if isinstance(value, (list, tuple)):
            value = ", ".join(_fmt(v) for v in value)
        lines.append(f"{key}: {_fmt(value)}")
    return "\n".join(lines) + "\n"


def render_csv(report):
    buf = io.StringIO()
    if report.summary:
        pd.DataFrame(report.summary).to_csv(buf, index=False, float_format="%.17g", lineterminator="\n")
    elif report.runs:
        frames = [limits_frame(run) for run in report.runs]
        pd.concat(frames, ignore_index=True).to_csv(buf, index=False, float_format="%.17g",
                                                     lineterminator="\n")
    else:
        pd.DataFrame([report.notes]).to_csv(buf, index=False, lineterminator="\n")
    return buf.getvalue()


def render(report, fmt="text"):
    if fmt == "json":
        return render_json(report)
    if fmt == "csv":
        return render_csv(report)
    return render_text(report)


def trace_frame(run):
    frame = run.trace.to_frame()
    frame.insert(0, "method", run.label)
    return frame
