"""Staged demo pipelines: generate counterfactuals for one factual
instance while criteria are enabled part by part, printing a diff-style
table and the evaluation metrics after each stage.

Stage definitions are JSON config documents shipped with the package, so
the tables regenerate from config diffs alone.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from importlib import resources

from .builder import CeConfig, CeResult, generate
from .dataset import Dataset
from .datasets import desired_label, load_fixture
from .evaluate import MetricsReport, score_set
from .learners import TrainedModel, predict, train
from .schema import Kind

DEMOS = ("german-credit", "heart")


@dataclass
class PartResult:
    name: str
    criteria: str
    config: CeConfig
    result: CeResult
    metrics: MetricsReport


@dataclass
class DemoResult:
    demo: str
    factual: dict
    factual_index: int
    model: TrainedModel
    dataset: Dataset
    parts: list[PartResult]
    wall_time: float


def _load_json(name: str) -> dict:
    path = resources.files("cemio") / "demo_configs" / name
    return json.loads(path.read_text())


def load_manifest(demo: str) -> dict:
    if demo not in DEMOS:
        raise ValueError(f"unknown demo {demo!r}; available: {DEMOS}")
    return _load_json(f"{demo.replace('-', '_')}.json")


def pick_factual(dataset: Dataset, model: TrainedModel, target) -> int:
    """Training row not already receiving the desired prediction, preferring
    the one whose immutable feature values co-occur most often in the desired
    class, so the manifold stage has a rich conformable hull to work with.
    Deterministic: ties break on the lowest row index."""
    from .schema import Actionability
    # numeric immutables mix continuously inside the hull; only categorical
    # ones restrict which desired rows can carry weight
    immutables = [f.name for f in dataset.schema
                  if f.actionability is Actionability.IMMUTABLE and not f.is_numeric]
    desired_rows = [dataset.rows[i] for i in dataset.class_indices(target)]
    best = None
    for i in range(len(dataset)):
        if predict(model, dataset.encoded[i]) == target:
            continue
        row = dataset.rows[i]
        matches = sum(all(r[name] == row[name] for name in immutables)
                      for r in desired_rows)
        if best is None or matches > best[0]:
            best = (matches, i)
    if best is None:
        raise RuntimeError("every row already receives the desired prediction")
    return best[1]


def _fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:.2f}".rstrip("0").rstrip(".")
    return str(value)


def render_part_table(factual: dict, result: CeResult, dataset: Dataset) -> str:
    """Diff table: factual row pinned on top, one row per counterfactual,
    a dash for unchanged cells. Only features changed somewhere are shown."""
    schema = dataset.schema
    shown = [f.name for f in schema
             if any(ce.changed.get(f.name) for ce in result.counterfactuals)]
    if not shown:
        shown = [schema.features[0].name]
    headers = ["", *shown]
    rows = [headers, ["factual", *[_fmt(factual[f]) for f in shown]]]
    for i, ce in enumerate(result.counterfactuals):
        label = f"({chr(ord('a') + i)})"
        cells = [label]
        for f in shown:
            cells.append(_fmt(ce.record[f]) if ce.changed.get(f) else "--")
        rows.append(cells)
    omitted = [f.name for f in schema if f.name not in shown]
    widths = [max(len(r[i]) for r in rows) for i in range(len(headers))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in rows]
    if omitted:
        lines.append(f"unchanged features not shown: {', '.join(omitted)}")
    return "\n".join(lines)


def render_metrics_line(metrics: MetricsReport) -> str:
    parts = [f"validity={metrics.validity:.2f}", f"sparsity={metrics.sparsity:.2f}"]
    if metrics.cat_proximity is not None:
        parts.append(f"cat_proximity={metrics.cat_proximity:.2f}")
    parts.append(f"cont_proximity={metrics.cont_proximity:.2f}")
    if metrics.cat_diversity is not None:
        parts.append(f"cat_diversity={metrics.cat_diversity:.2f}")
    if metrics.cont_diversity is not None:
        parts.append(f"cont_diversity={metrics.cont_diversity:.2f}")
    if metrics.count_diversity is not None:
        parts.append(f"count_diversity={metrics.count_diversity:.2f}")
    return "  ".join(parts)


def run_demo(demo: str, stream=None, factual_index: int | None = None) -> DemoResult:
    manifest = load_manifest(demo)
    started = time.perf_counter()
    dataset = load_fixture(manifest["dataset"])
    target = manifest.get("target", desired_label(manifest["dataset"]))
    model = train(dataset, manifest["family"], manifest.get("hyperparams"),
                  seed=manifest.get("seed", 0))
    idx = factual_index if factual_index is not None else pick_factual(dataset, model, target)
    factual = dict(dataset.rows[idx])

    def emit(text: str = ""):
        if stream is not None:
            stream.write(text + "\n")

    emit(f"demo {demo}: {manifest['family']} model "
         f"(train accuracy {model.train_accuracy:.2f}), "
         f"factual row {idx}, target {target!r}")

    parts: list[PartResult] = []
    for spec in manifest["parts"]:
        config = CeConfig.from_dict(_load_json(spec["config"]))
        result = generate(factual, model, dataset, config)
        if not result.counterfactuals:
            emit()
            emit(f"{spec['name']}: {spec['criteria']}")
            emit(f"no counterfactuals found (status {result.status}); "
                 f"warnings: {result.warnings}")
            parts.append(PartResult(spec["name"], spec["criteria"], config, result,
                                    MetricsReport(0.0, 0.0, None, 0.0, n_counterfactuals=0)))
            continue
        metrics = score_set(factual, [ce.record for ce in result.counterfactuals],
                            model, dataset, target)
        parts.append(PartResult(spec["name"], spec["criteria"], config, result, metrics))
        emit()
        emit(f"{spec['name']}: {spec['criteria']}")
        emit(render_part_table(factual, result, dataset))
        emit(render_metrics_line(metrics))
        for w in result.warnings:
            emit(f"note: {w}")
    wall = time.perf_counter() - started
    emit()
    emit(f"total {wall:.1f}s")
    return DemoResult(demo, factual, idx, model, dataset, parts, wall)


def causality_residual(part: PartResult, dataset: Dataset, model_cache: dict | None = None) -> float:
    """Max scaled residual of the causal mechanism constraints over the
    part's counterfactuals: |(x_e - xhat_e) - (c(p) - c(phat))|."""
    from .builder import _mechanism_model
    from .learners import score as model_score

    config = part.config
    schema = dataset.schema
    x_hat = dataset.encode(part.result.factual).vector
    worst = 0.0
    for rel in config.causality:
        e_col = schema.columns_of(rel.feature)[0]
        parent_cols = [c for p in rel.parents for c in schema.columns_of(p)]
        if rel.mechanism.get("type") == "learned":
            mech = _mechanism_model(rel, dataset)
            base = model_score(mech, x_hat[parent_cols])
            for ce in part.result.counterfactuals:
                val = model_score(mech, ce.encoded[parent_cols])
                resid = abs((ce.encoded[e_col] - x_hat[e_col]) - (val - base))
                worst = max(worst, resid)
        else:
            coeffs = dict(rel.mechanism.get("coeffs", {}))
            for ce in part.result.counterfactuals:
                delta = 0.0
                for p, a in coeffs.items():
                    p_col = schema.columns_of(p)[0]
                    lo, hi = dataset.scale_params[p_col]
                    delta += float(a) * (ce.encoded[p_col] - x_hat[p_col]) * (hi - lo)
                lo_e, hi_e = dataset.scale_params[e_col]
                resid = abs((ce.encoded[e_col] - x_hat[e_col]) * (hi_e - lo_e) - delta)
                worst = max(worst, resid / (hi_e - lo_e))
    return worst
