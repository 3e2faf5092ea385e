"""Regression metrics and per-property report aggregation.

All arithmetic is float64. Percentage errors use ``max(t, eps)`` in the
denominator so zero-valued truths stay finite.
"""

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .synthsps.registry import ACRONYMS, TOP8

METRIC_NAMES = ("r_squared", "mae", "median_pct_err")


class UndefinedMetric(float):
    """NaN that remembers why it is undefined."""

    def __new__(cls, reason):
        obj = super().__new__(cls, math.nan)
        obj.reason = reason
        return obj


def _pair(truth, pred):
    t = np.asarray(truth, dtype=np.float64).reshape(-1)
    p = np.asarray(pred, dtype=np.float64).reshape(-1)
    if t.shape != p.shape:
        raise ValueError(f"truth and prediction lengths differ: {t.size} vs {p.size}")
    if t.size == 0:
        raise ValueError("empty input")
    return t, p


def r_squared(truth, pred, train_mean):
    """``1 - SS_res / SS_tot`` with ``SS_tot`` taken around the training mean."""
    t, p = _pair(truth, pred)
    if t.size < 2:
        raise ValueError("r_squared needs at least two samples")
    denom = float(np.sum((t - float(train_mean)) ** 2))
    if denom == 0.0:
        return UndefinedMetric("truth is constant and equal to the training mean")
    return 1.0 - float(np.sum((t - p) ** 2)) / denom


def mae(truth, pred):
    t, p = _pair(truth, pred)
    return float(np.mean(np.abs(t - p)))


def median_pct_err(truth, pred, epsilon=1.0):
    t, p = _pair(truth, pred)
    if np.any(t < 0) or np.any(t > 100):
        raise ValueError("truth must lie in [0, 100]")
    return float(np.median(100.0 * np.abs(p - t) / np.maximum(t, epsilon)))


def top8_pct_err(per_property_perr):
    """Mean %err over the fixed top-eight property set.

    Accepts a mapping acronym -> value or a 15-sequence in registry order.
    """
    if not isinstance(per_property_perr, dict):
        values = list(per_property_perr)
        if len(values) != len(ACRONYMS):
            raise ValueError(f"expected {len(ACRONYMS)} values in registry order, got {len(values)}")
        per_property_perr = dict(zip(ACRONYMS, values))
    missing = [a for a in TOP8 if a not in per_property_perr or per_property_perr[a] is None]
    if missing:
        raise KeyError(f"missing properties for top-8 error: {', '.join(missing)}")
    return float(np.mean(np.array([per_property_perr[a] for a in TOP8], dtype=np.float64)))


def _mean(values):
    vals = [v for v in values if v is not None]
    if not vals:
        return None
    return float(np.mean(np.array(vals, dtype=np.float64)))


@dataclass
class MetricsReport:
    per_property: dict  # acronym -> {metric: value or None}
    num_samples: int = 0
    property_order: tuple = ACRONYMS
    aggregates: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.aggregates[key]

    @property
    def mean_r_squared(self):
        return self.aggregates["mean_r_squared"]

    @property
    def mean_pct_err(self):
        return self.aggregates["mean_pct_err"]

    @property
    def top8_pct_err(self):
        return self.aggregates["top8_pct_err"]

    def to_dict(self):
        return {
            "num_samples": self.num_samples,
            "property_order": list(self.property_order),
            "per_property": {a: dict(self.per_property[a]) for a in self.property_order if a in self.per_property},
            "aggregates": dict(self.aggregates),
        }

    def to_json(self, **kw):
        return json.dumps(_jsonable(self.to_dict()), sort_keys=True, **kw)

    @classmethod
    def from_dict(cls, d):
        return aggregate_report(d["per_property"], d.get("num_samples", 0), tuple(d.get("property_order", ACRONYMS)))

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("property",) + METRIC_NAMES)
        for a in self.property_order:
            if a in self.per_property:
                row = self.per_property[a]
                w.writerow([a] + [_fmt(row.get(m)) for m in METRIC_NAMES])
        return buf.getvalue()


def _fmt(v):
    return "" if v is None else repr(float(v))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, float) and math.isnan(obj):
        return None
    return obj


def aggregate_report(per_property, num_samples=0, property_order=ACRONYMS):
    """Build a report from per-property metric dicts.

    ``per_property`` maps acronym -> {r_squared, mae, median_pct_err}; any
    metric may be absent. Aggregates are means over the properties that
    report that metric; ``top8_pct_err`` is None unless all eight are present.
    """
    unknown = set(per_property) - set(property_order)
    if unknown:
        raise KeyError(f"unknown properties: {sorted(unknown)}")
    rows = {}
    for a in property_order:
        if a in per_property:
            src = per_property[a]
            rows[a] = {m: (None if src.get(m) is None else float(src[m])) for m in METRIC_NAMES}
    order = [a for a in property_order if a in rows]
    agg = {
        "mean_r_squared": _mean(rows[a]["r_squared"] for a in order),
        "mean_mae": _mean(rows[a]["mae"] for a in order),
        "mean_pct_err": _mean(rows[a]["median_pct_err"] for a in order),
    }
    try:
        agg["top8_pct_err"] = top8_pct_err({a: rows[a]["median_pct_err"] for a in order})
    except KeyError:
        agg["top8_pct_err"] = None
    return MetricsReport(rows, int(num_samples), tuple(property_order), agg)


def evaluate_predictions(truth, pred, train_mean, acronyms, epsilon=1.0):
    """Per-property metrics for (samples, P) raw-unit arrays."""
    truth = np.asarray(truth, dtype=np.float64)
    pred = np.asarray(pred, dtype=np.float64)
    train_mean = np.asarray(train_mean, dtype=np.float64).reshape(-1)
    if truth.ndim == 1:
        truth, pred = truth[:, None], pred[:, None]
    if truth.shape != pred.shape or truth.shape[1] != len(acronyms) or train_mean.size != len(acronyms):
        raise ValueError("truth, prediction, train mean and acronyms must agree in width")
    per = {}
    for j, a in enumerate(acronyms):
        # one validation sample (tiny smoke datasets): R^2 is reported as undefined
        r2 = r_squared(truth[:, j], pred[:, j], train_mean[j]) if len(truth) > 1 else math.nan
        per[a] = {
            "r_squared": None if math.isnan(r2) else r2,
            "mae": mae(truth[:, j], pred[:, j]),
            "median_pct_err": median_pct_err(truth[:, j], pred[:, j], epsilon),
        }
    return per


def mean_reports(reports):
    """Seed-mean report: arithmetic mean of each per-property metric."""
    if not reports:
        raise ValueError("no reports to average")
    order = reports[0].property_order
    per = {}
    for a in order:
        if all(a in r.per_property for r in reports):
            per[a] = {m: _mean(r.per_property[a][m] for r in reports) for m in METRIC_NAMES}
    return aggregate_report(per, reports[0].num_samples, order)
