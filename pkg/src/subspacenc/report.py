"""CSV and JSON reports with per-trial rows plus mean/stddev aggregates."""

from __future__ import annotations

import csv
import io
import json
import math
import os
from typing import Iterable, Optional, Sequence


class IoFailure(OSError):
    pass


def _fmt(x) -> str:
    if isinstance(x, bool):
        return str(int(x))
    if isinstance(x, float):
        if math.isinf(x):
            return "inf"
        return f"{x:.6g}"
    return str(x)


def aggregate(rows: Sequence[dict], metrics: Sequence[str], group_by: Sequence[str] = ()) -> list:
    """Mean and sample standard deviation of ``metrics`` per group."""
    groups = {}
    for r in rows:
        groups.setdefault(tuple(r[k] for k in group_by), []).append(r)
    out = []
    for key in sorted(groups, key=lambda k: tuple(str(x) for x in k)):
        rs = groups[key]
        for stat in ("mean", "stddev"):
            row = dict(zip(group_by, key))
            row["row_type"] = stat
            for m in metrics:
                vals = [float(r[m]) for r in rs if r.get(m) not in (None, "")]
                finite = [v for v in vals if math.isfinite(v)]
                if not vals:
                    row[m] = ""
                elif len(finite) < len(vals):
                    row[m] = math.inf
                elif stat == "mean":
                    row[m] = sum(finite) / len(finite)
                else:
                    mu = sum(finite) / len(finite)
                    row[m] = math.sqrt(sum((v - mu) ** 2 for v in finite) / (len(finite) - 1)) if len(finite) > 1 else 0.0
            out.append(row)
    return out


def to_csv(rows: Sequence[dict], columns: Sequence[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r.get(c, "")) for c in columns])
    return buf.getvalue()


def write_report(out_dir: str, name: str, rows: Sequence[dict], columns: Sequence[str],
                 metrics: Sequence[str] = (), group_by: Sequence[str] = (), extra: Optional[dict] = None) -> tuple:
    """Write ``name``.csv and ``name``.json; returns the two paths.

    Trial rows carry ``row_type=trial``; aggregate rows follow them.  The
    JSON file mirrors the CSV rows and adds ``extra`` if given.
    """
    trial_rows = [{**r, "row_type": "trial"} for r in rows]
    agg = aggregate(rows, metrics, group_by) if metrics and rows else []
    cols = ["row_type"] + [c for c in columns if c != "row_type"]
    all_rows = trial_rows + agg
    try:
        os.makedirs(out_dir, exist_ok=True)
        csv_path = os.path.join(out_dir, f"{name}.csv")
        json_path = os.path.join(out_dir, f"{name}.json")
        with open(csv_path, "w", newline="") as fh:
            fh.write(to_csv(all_rows, cols))
        payload = {"columns": cols, "rows": [{c: _fmt(r.get(c, "")) for c in cols} for r in all_rows]}
        if extra:
            payload.update(extra)
        with open(json_path, "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True, default=str)
            fh.write("\n")
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    return csv_path, json_path


def write_json(out_dir: str, name: str, payload) -> str:
    try:
        os.makedirs(out_dir, exist_ok=True)
        path = os.path.join(out_dir, name)
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True, default=str)
            fh.write("\n")
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    return path
