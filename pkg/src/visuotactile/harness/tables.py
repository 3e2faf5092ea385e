"""Comparison tables across reports with best / second-best flags."""

import json
import math
from pathlib import Path

from ..metrics import MetricsReport, aggregate_report
from ..synthsps.registry import ACRONYMS

# metric -> (per-property key, aggregate columns, higher is better)
LAYOUTS = {
    "r2": ("r_squared", ("mean_r_squared", "mean_mae"), (True, False)),
    "pct_err": ("median_pct_err", ("mean_pct_err", "top8_pct_err"), (False, False)),
}


def load_metrics(path):
    """Accept an experiment report (uses its seed mean) or a bare metrics report."""
    d = json.loads(Path(path).read_text())
    if "mean" in d:
        name = d["config"].get("label") or d["config"]["mode"]
        return name, MetricsReport.from_dict(d["mean"])
    return d.get("name", Path(path).stem), aggregate_report(d["per_property"], d.get("num_samples", 0))


def _flags(values, higher):
    present = sorted({v for v in values if v is not None}, reverse=higher)
    best = present[0] if present else None
    second = present[1] if len(present) > 1 else None
    return ["best" if v is not None and v == best else "second" if v is not None and v == second else ""
            for v in values]


def comparison_table(named_reports, metric="r2"):
    key, agg_cols, agg_higher = LAYOUTS[metric]
    columns = list(ACRONYMS) + list(agg_cols)
    higher = [metric == "r2"] * len(ACRONYMS) + list(agg_higher)
    rows = []
    for name, rep in named_reports:
        vals = [rep.per_property.get(a, {}).get(key) for a in ACRONYMS]
        vals += [rep.aggregates.get(c) for c in agg_cols]
        vals = [None if v is None or not math.isfinite(v) else float(v) for v in vals]
        rows.append({"name": name, "values": vals})
    for j, hi in enumerate(higher):
        for row, flag in zip(rows, _flags([r["values"][j] for r in rows], hi)):
            row.setdefault("flags", []).append(flag)
    return {"metric": metric, "columns": columns, "rows": rows}


def table_csv_rows(table):
    header = ["name"] + table["columns"]
    rows = []
    for r in table["rows"]:
        cells = []
        for v, f in zip(r["values"], r["flags"]):
            mark = {"best": "*", "second": "+"}.get(f, "")
            cells.append("" if v is None else f"{v:.4f}{mark}")
        rows.append([r["name"]] + cells)
    return header, rows
