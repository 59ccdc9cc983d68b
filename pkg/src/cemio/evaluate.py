"""Counterfactual-set evaluation metrics plus an independent convex-hull
membership oracle.

The membership LP is solved with scipy's HiGHS backend rather than the
built-in simplex, so manifold certificates are checked through a solver
path the generator never touches.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from .builder import CHANGE_TOL
from .dataset import Dataset
from .learners import TrainedModel, predict
from .schema import FeatureSchema, Kind


@dataclass
class MetricsReport:
    """One factual instance's scores. Diversity fields are None for singleton
    sets. Continuous distances are in original units; continuous proximity is
    the negated mean distance, so 0 is best and more negative is worse."""

    validity: float
    sparsity: float
    cat_proximity: float | None
    cont_proximity: float
    cat_diversity: float | None = None
    cont_diversity: float | None = None
    count_diversity: float | None = None
    n_counterfactuals: int = 1

    def to_dict(self) -> dict:
        return {
            "validity": self.validity,
            "sparsity": self.sparsity,
            "cat_proximity": self.cat_proximity,
            "cont_proximity": self.cont_proximity,
            "cat_diversity": self.cat_diversity,
            "cont_diversity": self.cont_diversity,
            "count_diversity": self.count_diversity,
            "n_counterfactuals": self.n_counterfactuals,
        }


METRIC_FIELDS = ("validity", "sparsity", "cat_proximity", "cont_proximity",
                 "cat_diversity", "cont_diversity", "count_diversity")


def _changed_features(schema: FeatureSchema, a: dict, b: dict,
                      scale_of: dict[str, float]) -> list[str]:
    out = []
    for f in schema:
        if f.kind is Kind.CATEGORICAL:
            if str(a[f.name]) != str(b[f.name]):
                out.append(f.name)
        else:
            width = scale_of[f.name]
            if abs(float(a[f.name]) - float(b[f.name])) > CHANGE_TOL * width:
                out.append(f.name)
    return out


def _scale_widths(dataset: Dataset) -> dict[str, float]:
    widths = {}
    for f in dataset.schema:
        if f.is_numeric:
            col = dataset.schema.columns_of(f.name)[0]
            lo, hi = dataset.scale_params[col]
            widths[f.name] = hi - lo
        else:
            widths[f.name] = 1.0
    return widths


def score_set(factual: dict, ce_records: list[dict], model: TrainedModel,
              dataset: Dataset, target_label) -> MetricsReport:
    """Score one counterfactual set against its factual instance."""
    if not ce_records:
        raise ValueError("counterfactual set is empty")
    schema = dataset.schema
    widths = _scale_widths(dataset)
    n_feat = len(schema)
    cont = [f.name for f in schema if f.is_numeric]
    cat = [f.name for f in schema if not f.is_numeric]
    m = len(ce_records)

    valid = 0
    for ce in ce_records:
        enc = dataset.encode(ce).vector
        if predict(model, enc) == target_label:
            valid += 1
    validity = valid / m

    changed_sets = [_changed_features(schema, factual, ce, widths) for ce in ce_records]
    sparsity = 1.0 - float(np.mean([len(ch) / n_feat for ch in changed_sets]))

    cat_proximity = None
    if cat:
        cat_changed = [sum(1 for f in ch if f in set(cat)) / len(cat) for ch in changed_sets]
        cat_proximity = 1.0 - float(np.mean(cat_changed))

    l1 = [sum(abs(float(ce[f]) - float(factual[f])) for f in cont) for ce in ce_records]
    cont_proximity = -float(np.mean(l1)) if cont else 0.0

    cat_div = cont_div = count_div = None
    if m > 1:
        pairs = [(i, j) for i in range(m) for j in range(i + 1, m)]
        diff_sets = [ _changed_features(schema, ce_records[i], ce_records[j], widths)
                      for i, j in pairs]
        if cat:
            cat_div = float(np.mean([sum(1 for f in d if f in set(cat)) / len(cat)
                                     for d in diff_sets]))
        if cont:
            cont_div = float(np.mean([
                sum(abs(float(ce_records[i][f]) - float(ce_records[j][f])) for f in cont)
                for i, j in pairs]))
        count_div = float(np.mean([len(d) / n_feat for d in diff_sets]))

    return MetricsReport(validity, sparsity, cat_proximity, cont_proximity,
                         cat_div, cont_div, count_div, n_counterfactuals=m)


@dataclass
class HullCertificate:
    inside: bool
    slack_norm: float
    violation: float  # max(0, slack_norm - epsilon)
    weights: np.ndarray | None


def hull_membership(point: np.ndarray, dataset: Dataset, label, epsilon: float = 0.0,
                    norm: object = 1) -> HullCertificate:
    """Membership of a scaled/encoded point in the epsilon-enlarged convex
    hull of the desired-class rows, decided by an LP independent of the CE
    solver: minimize ||s||_norm subject to sum(lam_i row_i) = point + s."""
    idx = dataset.class_indices(label)
    rows = dataset.encoded[idx]
    point = np.asarray(point, dtype=float)
    k, n = rows.shape

    # variables: lam (k), s (n) split into s+ and s- (n each), plus t for inf-norm
    if norm == "inf":
        n_var = k + 2 * n + 1
        c = np.zeros(n_var)
        c[-1] = 1.0
    else:
        n_var = k + 2 * n
        c = np.concatenate([np.zeros(k), np.ones(2 * n)])

    A_eq = np.zeros((n + 1, n_var))
    b_eq = np.zeros(n + 1)
    A_eq[:n, :k] = rows.T
    A_eq[:n, k:k + n] = -np.eye(n)        # s+
    A_eq[:n, k + n:k + 2 * n] = np.eye(n)  # s-
    b_eq[:n] = point
    A_eq[n, :k] = 1.0
    b_eq[n] = 1.0

    bounds = [(0.0, 1.0)] * k + [(0.0, None)] * (2 * n)
    A_ub = None
    b_ub = None
    if norm == "inf":
        bounds += [(0.0, None)]
        A_ub = np.zeros((2 * n, n_var))
        A_ub[:n, k:k + n] = np.eye(n)
        A_ub[:n, -1] = -1.0
        A_ub[n:, k + n:k + 2 * n] = np.eye(n)
        A_ub[n:, -1] = -1.0
        b_ub = np.zeros(2 * n)

    res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=bounds,
                  method="highs")
    if not res.success:
        return HullCertificate(False, float("inf"), float("inf"), None)
    s_norm = float(res.fun)
    violation = max(0.0, s_norm - epsilon)
    inside = violation <= 1e-6
    lam = res.x[:k]
    return HullCertificate(inside, s_norm, violation, lam)


@dataclass
class AggregateRow:
    mean: dict[str, float | None]
    se: dict[str, float | None]
    count: int = 0
    counts: dict[str, int] = field(default_factory=dict)


def aggregate(reports: list[MetricsReport]) -> AggregateRow:
    """Mean and standard error (sample stdev / sqrt(n)) per metric, skipping
    metrics absent from a report (e.g. diversity for singleton sets)."""
    if not reports:
        raise ValueError("no reports to aggregate")
    mean: dict[str, float | None] = {}
    se: dict[str, float | None] = {}
    counts: dict[str, int] = {}
    for name in METRIC_FIELDS:
        values = [getattr(r, name) for r in reports if getattr(r, name) is not None]
        counts[name] = len(values)
        if not values:
            mean[name] = None
            se[name] = None
            continue
        arr = np.array(values, dtype=float)
        mean[name] = float(arr.mean())
        se[name] = float(arr.std(ddof=1) / np.sqrt(len(arr))) if len(arr) > 1 else 0.0
    return AggregateRow(mean, se, len(reports), counts)


def format_table(rows: dict[str, AggregateRow]) -> str:
    """Aligned text table, one aggregate row per label, mean (s.e.) cells."""
    headers = ["", *METRIC_FIELDS]
    lines = []
    table = [headers]
    for label, agg in rows.items():
        cells = [label]
        for name in METRIC_FIELDS:
            if agg.mean[name] is None:
                cells.append("--")
            else:
                cells.append(f"{agg.mean[name]:.2f} ({agg.se[name]:.2f})")
        table.append(cells)
    widths = [max(len(r[i]) for r in table) for i in range(len(headers))]
    for r in table:
        lines.append("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip())
    return "\n".join(lines)
