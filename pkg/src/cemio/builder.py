"""Assembles the counterfactual-generation MILP from a factual instance, a
trained model, and a criteria configuration, then solves and decodes it.

All criterion blocks are tagged so infeasibility can be diagnosed by
re-solving with one block removed at a time.
"""

from __future__ import annotations

import json
import warnings as _warnings
from dataclasses import dataclass, field

import numpy as np

from .dataset import Dataset, actionability_of
from .embed import ClassTarget, RegressTarget, embed, validity_constraint
from .learners import TrainedModel, from_dict as model_from_dict, predict_index, score, train_arrays
from .milp import MilpModel, Sense, VarKind, Variable
from .schema import Actionability, Kind
from .solver import SolveOptions, SolveResult, check_solution, solve_milp

CHANGE_TOL = 1e-6  # scaled-space threshold defining a "changed" feature


class ConfigError(ValueError):
    pass


class InfeasibleError(RuntimeError):
    """CE model has no feasible point; ``tags`` names the criterion blocks
    whose individual removal restores feasibility."""

    def __init__(self, tags: list[str]):
        super().__init__(f"infeasible counterfactual model; conflicting criteria: {tags}")
        self.tags = tags


@dataclass
class CausalRelation:
    feature: str
    parents: list[str]
    mechanism: dict  # {"type": "linear", ...} | {"type": "learned", ...}

    def to_dict(self) -> dict:
        out = {"feature": self.feature, "parents": list(self.parents)}
        mech = dict(self.mechanism)
        if mech.get("type") == "learned" and "model" in mech and not isinstance(mech["model"], dict):
            from .learners import to_dict as model_to_dict
            mech["model"] = model_to_dict(mech["model"])
        out["mechanism"] = mech
        return out

    @classmethod
    def from_dict(cls, doc: dict) -> "CausalRelation":
        return cls(doc["feature"], list(doc["parents"]), dict(doc["mechanism"]))


@dataclass
class CeConfig:
    target_label: object = None
    regress_direction: str | None = None  # "at-most" | "at-least"
    regress_value: float = 0.0
    margin: float = 1e-4
    distance_norm: str = "l1"  # "l1" | "l2-pwl"
    distance_weights: object = None  # None (unit), "mad", or {feature: weight}
    pwl_breakpoints: int = 8
    sparsity_mode: str = "off"  # off | hard | penalty
    sparsity_k: int = 1
    sparsity_alpha: float | None = None
    coherence: bool = True
    actionability: bool = False
    actionability_overrides: dict = field(default_factory=dict)
    manifold_mode: str = "off"  # off | hard | soft | clustered
    manifold_epsilon: float = 0.0
    manifold_norm: object = 1  # 1 | "inf"
    manifold_beta: float = 1.0
    manifold_clusters: int = 3
    causality: list[CausalRelation] = field(default_factory=list)
    diversity_mode: str = "pool"  # pool | iterative
    m: int = 1
    iterative_strategy: str = "feature-exclusion"  # feature-exclusion | distance | per-cluster
    distance_tau: float = 0.05
    extra_constraints: list[dict] = field(default_factory=list)
    pool_mode: str = "all-feasible"
    time_limit: float | None = 30.0
    node_limit: int = 50_000
    kernel: str | None = None

    def __post_init__(self):
        if self.sparsity_mode not in ("off", "hard", "penalty"):
            raise ConfigError(f"unknown sparsity mode {self.sparsity_mode!r}")
        if self.sparsity_mode == "hard" and self.sparsity_k < 1:
            raise ConfigError("hard sparsity requires k >= 1")
        if self.sparsity_alpha is not None and self.sparsity_alpha < 0:
            raise ConfigError("alpha must be >= 0")
        if self.manifold_mode not in ("off", "hard", "soft", "clustered"):
            raise ConfigError(f"unknown manifold mode {self.manifold_mode!r}")
        if self.manifold_epsilon < 0:
            raise ConfigError("epsilon must be >= 0")
        if self.manifold_beta < 0:
            raise ConfigError("beta must be >= 0")
        if self.manifold_norm not in (1, "inf"):
            raise ConfigError("manifold norm must be 1 or 'inf'")
        if self.m < 1:
            raise ConfigError("m must be >= 1")
        if self.margin < 0:
            raise ConfigError("margin must be >= 0")
        if self.distance_norm not in ("l1", "l2-pwl"):
            raise ConfigError(f"unknown distance norm {self.distance_norm!r}")
        if self.diversity_mode not in ("pool", "iterative"):
            raise ConfigError(f"unknown diversity mode {self.diversity_mode!r}")
        if self.iterative_strategy not in ("feature-exclusion", "distance", "per-cluster"):
            raise ConfigError(f"unknown iterative strategy {self.iterative_strategy!r}")

    # -- JSON document mirroring the criteria blocks -------------------------

    def to_dict(self) -> dict:
        target: dict = {"margin": self.margin}
        if self.regress_direction is not None:
            target.update({"task": "regress", "direction": self.regress_direction,
                           "value": self.regress_value})
        else:
            target["label"] = self.target_label
        return {
            "target": target,
            "distance": {"norm": self.distance_norm, "weights": self.distance_weights,
                         "breakpoints": self.pwl_breakpoints},
            "sparsity": {"mode": self.sparsity_mode, "k": self.sparsity_k,
                         "alpha": self.sparsity_alpha},
            "coherence": self.coherence,
            "actionability": {"enabled": self.actionability,
                              "overrides": dict(self.actionability_overrides)},
            "manifold": {"mode": self.manifold_mode, "epsilon": self.manifold_epsilon,
                         "norm": self.manifold_norm, "beta": self.manifold_beta,
                         "clusters": self.manifold_clusters},
            "causality": [r.to_dict() for r in self.causality],
            "diversity": {"mode": self.diversity_mode, "m": self.m,
                          "strategy": self.iterative_strategy, "tau": self.distance_tau,
                          "pool_mode": self.pool_mode},
            "extra_constraints": list(self.extra_constraints),
            "solver": {"time_limit": self.time_limit, "node_limit": self.node_limit,
                       "kernel": self.kernel},
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "CeConfig":
        try:
            target = doc.get("target", {})
            dist = doc.get("distance", {})
            spars = doc.get("sparsity", {})
            act = doc.get("actionability", {})
            mani = doc.get("manifold", {})
            div = doc.get("diversity", {})
            solver = doc.get("solver", {})
            if isinstance(act, bool):
                act = {"enabled": act}
            norm = mani.get("norm", 1)
            return cls(
                target_label=target.get("label"),
                regress_direction=target.get("direction") if target.get("task") == "regress" else None,
                regress_value=float(target.get("value", 0.0)),
                margin=float(target.get("margin", 1e-4)),
                distance_norm=dist.get("norm", "l1"),
                distance_weights=dist.get("weights"),
                pwl_breakpoints=int(dist.get("breakpoints", 8)),
                sparsity_mode=spars.get("mode", "off"),
                sparsity_k=int(spars.get("k", 1)),
                sparsity_alpha=spars.get("alpha"),
                coherence=bool(doc.get("coherence", True)),
                actionability=bool(act.get("enabled", False)),
                actionability_overrides=dict(act.get("overrides", {})),
                manifold_mode=mani.get("mode", "off"),
                manifold_epsilon=float(mani.get("epsilon", 0.0)),
                manifold_norm=norm if norm == "inf" else int(norm),
                manifold_beta=float(mani.get("beta", 1.0)),
                manifold_clusters=int(mani.get("clusters", 3)),
                causality=[CausalRelation.from_dict(r) for r in doc.get("causality", [])],
                diversity_mode=div.get("mode", "pool"),
                m=int(div.get("m", 1)),
                iterative_strategy=div.get("strategy", "feature-exclusion"),
                distance_tau=float(div.get("tau", 0.05)),
                extra_constraints=list(doc.get("extra_constraints", [])),
                pool_mode=div.get("pool_mode", "all-feasible"),
                time_limit=solver.get("time_limit", 30.0),
                node_limit=int(solver.get("node_limit", 50_000)),
                kernel=solver.get("kernel"),
            )
        except (TypeError, ValueError, KeyError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"malformed config document: {exc}") from exc

    @classmethod
    def from_json(cls, text: str) -> "CeConfig":
        return cls.from_dict(json.loads(text))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


@dataclass
class Counterfactual:
    record: dict
    encoded: np.ndarray
    changed: dict[str, bool]
    objective: float
    predicted: object
    certificate: dict | None = None

    def to_dict(self) -> dict:
        return {
            "record": dict(self.record),
            "encoded": [float(v) for v in self.encoded],
            "changed": dict(self.changed),
            "objective": self.objective,
            "predicted": self.predicted,
            "certificate": self.certificate,
        }


@dataclass
class CeResult:
    counterfactuals: list[Counterfactual]
    status: str
    requested: int
    factual: dict
    factual_prediction: object
    warnings: list[str]
    solve_stats: dict

    @property
    def partial(self) -> bool:
        return len(self.counterfactuals) < self.requested

    def to_dict(self) -> dict:
        return {
            "counterfactuals": [ce.to_dict() for ce in self.counterfactuals],
            "status": self.status,
            "requested": self.requested,
            "partial": self.partial,
            "factual": dict(self.factual),
            "factual_prediction": self.factual_prediction,
            "warnings": list(self.warnings),
            "solve_stats": dict(self.solve_stats),
        }


@dataclass
class Built:
    milp: MilpModel
    x_vars: list[Variable]
    x_hat: np.ndarray
    factual: dict
    int_twins: dict[str, Variable]
    z_by_feature: dict[str, Variable]
    lambda_vars: list[tuple[int, Variable]]  # (training row index, var)
    slack_vars: list[Variable]
    slack_abs_vars: list[Variable]
    cluster_vars: list[Variable]
    output_var: Variable | None
    warnings: list[str]
    config: CeConfig


# -- criterion blocks ---------------------------------------------------------


def feature_weights(dataset: Dataset, config: CeConfig) -> dict[str, float]:
    """Per-feature distance weights in scaled space: unit by default, inverse
    median-absolute-deviation when requested, or explicit overrides."""
    schema = dataset.schema
    if config.distance_weights is None:
        return {f.name: 1.0 for f in schema}
    if config.distance_weights == "mad":
        out = {}
        for f in schema:
            cols = schema.columns_of(f.name)
            col = dataset.encoded[:, cols[0]]
            mad = float(np.median(np.abs(col - np.median(col)))) if f.is_numeric else 0.0
            out[f.name] = 1.0 / max(mad, 1e-2)
        return out
    out = {f.name: 1.0 for f in schema}
    for name, w in dict(config.distance_weights).items():
        if float(w) <= 0:
            raise ConfigError(f"distance weight for {name!r} must be > 0")
        schema.feature(name)
        out[name] = float(w)
    return out


def add_proximity(milp: MilpModel, schema, x_vars, x_hat, weights, norm, n_breakpoints):
    """Distance-to-factual objective terms in scaled space. The l1 form uses
    absolute-deviation links; l2-pwl uses chord epigraphs of the squared
    deviation per numeric column (binary columns are exact either way)."""
    for col, name in enumerate(schema.column_names):
        f = schema.features[schema.column_feature[col]]
        w = weights[f.name]
        xv = x_vars[col]
        ref = float(x_hat[col])
        if norm == "l1" or f.kind is Kind.CATEGORICAL:
            a = milp.add_variable(f"dist_{col}", VarKind.CONTINUOUS, 0.0, 1.0)
            milp.add_abs_link(xv, a, ref, tag="proximity")
            milp.add_objective_term(a, w)
        else:
            lo_d, hi_d = xv.lower - ref, xv.upper - ref
            pts = sorted(set(np.linspace(lo_d, hi_d, n_breakpoints).tolist()) | {0.0})
            pts = [t for t in pts if lo_d - 1e-12 <= t <= hi_d + 1e-12]
            bps = [(ref + t, t * t) for t in pts]
            epi = milp.add_pwl_penalty(xv, bps, tag="proximity", name=f"dist2_{col}")
            milp.add_objective_term(epi, w)


def add_sparsity(milp: MilpModel, schema, x_vars, x_hat, mode, k, alpha):
    """Per-feature binary change indicators; a categorical feature gets one
    indicator bounding all of its one-hot deltas."""
    z_by_feature: dict[str, Variable] = {}
    for f in schema:
        z = milp.add_variable(f"chg_{f.name}", VarKind.BINARY)
        z_by_feature[f.name] = z
        for col in schema.columns_of(f.name):
            xv = x_vars[col]
            ref = float(x_hat[col])
            M = xv.upper - xv.lower
            milp.add_constraint([(xv, 1.0), (z, -M)], Sense.LE, ref, tag="sparsity")
            milp.add_constraint([(xv, 1.0), (z, M)], Sense.GE, ref, tag="sparsity")
    if mode == "hard":
        milp.add_constraint([(z, 1.0) for z in z_by_feature.values()], Sense.LE, float(k),
                            tag="sparsity")
    elif mode == "penalty":
        for z in z_by_feature.values():
            milp.add_objective_term(z, alpha)
    return z_by_feature


def add_coherence(milp: MilpModel, schema, x_vars):
    for name, cols in schema.groups.items():
        milp.add_constraint([(x_vars[c], 1.0) for c in cols], Sense.EQ, 1.0, tag="coherence")


def add_actionability(milp: MilpModel, dataset: Dataset, x_vars, x_hat, factual, overrides):
    schema = dataset.schema
    rules = actionability_of(schema, overrides)
    for f in schema:
        rule = rules[f.name]
        cols = schema.columns_of(f.name)
        if rule is Actionability.FREE:
            continue
        if rule is Actionability.IMMUTABLE:
            for c in cols:
                milp.add_constraint([(x_vars[c], 1.0)], Sense.EQ, float(x_hat[c]),
                                    tag="actionability")
        elif rule is Actionability.NON_DECREASING:
            milp.add_constraint([(x_vars[cols[0]], 1.0)], Sense.GE, float(x_hat[cols[0]]),
                                tag="actionability")
        elif rule is Actionability.NON_INCREASING:
            milp.add_constraint([(x_vars[cols[0]], 1.0)], Sense.LE, float(x_hat[cols[0]]),
                                tag="actionability")
        elif rule is Actionability.NON_NEGATIVE:
            zero_scaled = dataset.scale(f, 0.0)
            if zero_scaled > x_vars[cols[0]].lower + 1e-12:
                milp.add_constraint([(x_vars[cols[0]], 1.0)], Sense.GE, zero_scaled,
                                    tag="actionability")
        elif rule is Actionability.CONDITIONAL:
            if f.kind is not Kind.CATEGORICAL:
                raise ConfigError(f"{f.name}: conditional actionability needs levels")
            current = str(factual[f.name])
            allowed = {current, *f.allowed_transitions.get(current, ())}
            for lv, c in zip(f.levels, cols):
                if lv not in allowed:
                    milp.add_constraint([(x_vars[c], 1.0)], Sense.EQ, 0.0, tag="actionability")


def _kmeans_assign(X: np.ndarray, k: int, seed: int = 0, iters: int = 50) -> np.ndarray:
    rng = np.random.default_rng(seed)
    centers = X[rng.choice(len(X), size=k, replace=False)].copy()
    assign = np.zeros(len(X), dtype=int)
    for _ in range(iters):
        d = ((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        assign = d.argmin(axis=1)
        for c in range(k):
            members = X[assign == c]
            if len(members):
                centers[c] = members.mean(axis=0)
    return assign


def add_manifold(milp: MilpModel, dataset: Dataset, desired_label, x_vars, config: CeConfig,
                 force_cluster: int | None = None):
    """Convex-combination constraints tying the CE (plus slack) to the
    desired-class training rows; the slack norm is capped (hard), penalized
    (soft), or applied per k-means cluster hull (clustered)."""
    idx = dataset.class_indices(desired_label)
    rows = dataset.encoded[idx]
    n_cols = dataset.schema.n_columns

    lam = [(int(i), milp.add_variable(f"lam_{int(i)}", VarKind.CONTINUOUS, 0.0, 1.0))
           for i in idx]
    s_vars = [milp.add_variable(f"slack_{c}", VarKind.CONTINUOUS, -1.0, 1.0)
              for c in range(n_cols)]

    cluster_vars: list[Variable] = []
    if config.manifold_mode == "clustered":
        k = config.manifold_clusters
        if k > len(idx):
            raise ConfigError(f"clusters ({k}) exceed desired-class rows ({len(idx)})")
        assign = _kmeans_assign(rows, k)
        for c in range(k):
            g = milp.add_variable(f"hull_{c}", VarKind.BINARY)
            cluster_vars.append(g)
            members = [lam[i][1] for i in range(len(idx)) if assign[i] == c]
            coeffs = [(v, 1.0) for v in members] + [(g, -1.0)]
            milp.add_constraint(coeffs, Sense.EQ, 0.0, tag="manifold")
        if force_cluster is not None:
            milp.add_constraint([(cluster_vars[force_cluster], 1.0)], Sense.EQ, 1.0,
                                tag="manifold")
        milp.add_constraint([(g, 1.0) for g in cluster_vars], Sense.EQ, 1.0, tag="manifold")
    else:
        milp.add_constraint([(v, 1.0) for _, v in lam], Sense.EQ, 1.0, tag="manifold")

    for c in range(n_cols):
        coeffs = [(v, float(rows[i, c])) for i, (_, v) in enumerate(lam)]
        coeffs += [(x_vars[c], -1.0), (s_vars[c], -1.0)]
        milp.add_constraint(coeffs, Sense.EQ, 0.0, tag="manifold")

    abs_vars: list[Variable] = []
    eps = config.manifold_epsilon
    if config.manifold_mode == "soft":
        for c, s in enumerate(s_vars):
            t = milp.add_variable(f"slackabs_{c}", VarKind.CONTINUOUS, 0.0, 1.0)
            abs_vars.append(t)
            milp.add_abs_link(s, t, 0.0, tag="manifold")
            milp.add_objective_term(t, config.manifold_beta)
    elif config.manifold_norm == "inf":
        for s in s_vars:
            milp.add_constraint([(s, 1.0)], Sense.LE, eps, tag="manifold")
            milp.add_constraint([(s, 1.0)], Sense.GE, -eps, tag="manifold")
    else:
        for c, s in enumerate(s_vars):
            t = milp.add_variable(f"slackabs_{c}", VarKind.CONTINUOUS, 0.0, 1.0)
            abs_vars.append(t)
            milp.add_abs_link(s, t, 0.0, tag="manifold")
        milp.add_constraint([(t, 1.0) for t in abs_vars], Sense.LE, eps, tag="manifold")

    return lam, s_vars, abs_vars, cluster_vars


def _toposort_relations(relations: list[CausalRelation]) -> list[CausalRelation]:
    by_feature = {r.feature: r for r in relations}
    order: list[CausalRelation] = []
    state: dict[str, int] = {}

    def visit(name: str):
        if state.get(name) == 1:
            raise ConfigError(f"causal relations contain a cycle through {name!r}")
        if state.get(name) == 2 or name not in by_feature:
            return
        state[name] = 1
        for p in by_feature[name].parents:
            visit(p)
        state[name] = 2
        order.append(by_feature[name])

    for r in relations:
        visit(r.feature)
    return order


def _mechanism_model(rel: CausalRelation, dataset: Dataset) -> TrainedModel:
    mech = rel.mechanism
    if mech.get("type") != "learned":
        raise ConfigError(f"{rel.feature}: not a learned mechanism")
    if "model" in mech:
        doc = mech["model"]
        return model_from_dict(doc) if isinstance(doc, dict) else doc
    spec = mech.get("train")
    if spec is None:
        raise ConfigError(f"{rel.feature}: learned mechanism needs 'model' or 'train'")
    schema = dataset.schema
    parent_cols = [c for p in rel.parents for c in schema.columns_of(p)]
    target_col = schema.columns_of(rel.feature)[0]
    X = dataset.encoded[:, parent_cols]
    y = dataset.encoded[:, target_col]
    model = train_arrays(X, y, spec.get("family", "mlp"), task="regress",
                         hyperparams=spec.get("hyperparams"), seed=spec.get("seed", 0))
    mech["model"] = model  # cache so repeated builds reuse the same fit
    return model


def add_causality(milp: MilpModel, dataset: Dataset, x_vars, x_hat, relations):
    """Tie each endogenous feature's change to its mechanism's change:
    x_i = x_hat_i + c(parents) - c(parents_hat), all in scaled space."""
    schema = dataset.schema
    for rel in _toposort_relations(relations):
        f = schema.feature(rel.feature)
        if not f.is_numeric:
            raise ConfigError(f"{rel.feature}: causal endogenous feature must be numeric")
        if rel.feature in rel.parents:
            raise ConfigError(f"{rel.feature}: feature cannot be its own parent")
        e_col = schema.columns_of(rel.feature)[0]
        mech = rel.mechanism
        if mech.get("type") == "linear":
            # explicit coefficients are in original units; rescale per column
            e_width = dataset.scale_params[e_col][1] - dataset.scale_params[e_col][0]
            coeffs = [(x_vars[e_col], e_width)]
            rhs = e_width * float(x_hat[e_col])
            for p, a in dict(mech.get("coeffs", {})).items():
                pf = schema.feature(p)
                if not pf.is_numeric:
                    raise ConfigError(f"{rel.feature}: linear mechanism parent {p!r} must be numeric")
                p_col = schema.columns_of(p)[0]
                p_width = dataset.scale_params[p_col][1] - dataset.scale_params[p_col][0]
                coeffs.append((x_vars[p_col], -float(a) * p_width))
                rhs -= float(a) * p_width * float(x_hat[p_col])
            milp.add_constraint(coeffs, Sense.EQ, rhs, tag="causality")
        elif mech.get("type") == "learned":
            model = _mechanism_model(rel, dataset)
            parent_cols = [c for p in rel.parents for c in schema.columns_of(p)]
            parent_vars = [x_vars[c] for c in parent_cols]
            before = len(milp.constraints)
            art = embed(milp, model, parent_vars, name=f"mech_{rel.feature}")
            for con in milp.constraints[before:]:
                con.tag = "causality"  # mechanism embedding relaxes with the block
            base = score(model, x_hat[parent_cols])
            milp.add_constraint([(x_vars[e_col], 1.0), (art.output_var, -1.0)],
                                Sense.EQ, float(x_hat[e_col]) - base, tag="causality")
        else:
            raise ConfigError(f"{rel.feature}: unknown mechanism type {mech.get('type')!r}")


def add_user_constraints(milp: MilpModel, dataset: Dataset, x_vars, rows: list[dict]):
    """Extra linear constraints expressed over original-unit feature values
    and categorical level indicators."""
    schema = dataset.schema
    senses = {"<=": Sense.LE, "=": Sense.EQ, ">=": Sense.GE}
    for row in rows:
        coeffs: list[tuple[Variable, float]] = []
        rhs = float(row["rhs"])
        for term in row["terms"]:
            f = schema.feature(term["feature"])
            coef = float(term["coeff"])
            if f.kind is Kind.CATEGORICAL:
                level = term.get("level")
                if level not in f.levels:
                    raise ConfigError(f"unknown level {level!r} for {f.name}")
                col = schema.columns_of(f.name)[f.levels.index(level)]
                coeffs.append((x_vars[col], coef))
            else:
                col = schema.columns_of(f.name)[0]
                lo, hi = dataset.scale_params[col]
                coeffs.append((x_vars[col], coef * (hi - lo)))
                rhs -= coef * lo
        milp.add_constraint(coeffs, senses[row.get("sense", "<=")], rhs, tag="user")


# -- assembly -----------------------------------------------------------------


def _target_for(model: TrainedModel, config: CeConfig):
    if config.regress_direction is not None:
        return RegressTarget(config.regress_direction, config.regress_value, config.margin)
    if config.target_label is None:
        raise ConfigError("config needs a target label or a regression band")
    if config.target_label not in model.classes:
        raise ConfigError(f"target {config.target_label!r} not among model classes {model.classes}")
    return ClassTarget(model.classes.index(config.target_label), config.margin)


def build(factual: dict, model: TrainedModel, dataset: Dataset, config: CeConfig,
          force_cluster: int | None = None) -> Built:
    """Compile the counterfactual MILP: scaled decision columns with schema
    kinds, the model embedding plus validity, the distance objective, and
    one tagged block per enabled criterion."""
    schema = dataset.schema
    enc = dataset.encode(factual)
    x_hat = enc.vector
    notes = [f"factual value for {n!r} clipped into its training box" for n in enc.clipped]

    milp = MilpModel("counterfactual")
    x_vars: list[Variable] = []
    for col, name in enumerate(schema.column_names):
        f = schema.features[schema.column_feature[col]]
        kind = VarKind.BINARY if f.kind is Kind.CATEGORICAL else VarKind.CONTINUOUS
        x_vars.append(milp.add_variable(f"x_{name}", kind, 0.0, 1.0))

    # integer features keep an original-unit integer twin linked linearly
    int_twins: dict[str, Variable] = {}
    for f in schema:
        if f.kind is Kind.INTEGER:
            col = schema.columns_of(f.name)[0]
            lo, hi = dataset.scale_params[col]
            v = milp.add_variable(f"int_{f.name}", VarKind.INTEGER,
                                  float(np.ceil(lo - 1e-9)), float(np.floor(hi + 1e-9)))
            milp.add_constraint([(v, 1.0), (x_vars[col], -(hi - lo))], Sense.EQ, lo,
                                tag="domain")
            int_twins[f.name] = v

    target = _target_for(model, config)
    if isinstance(target, ClassTarget) and predict_index(model, x_hat) == target.index:
        notes.append("factual already receives the target prediction; "
                     "the nearest counterfactual may equal the factual")

    artifacts = embed(milp, model, x_vars)
    validity_constraint(milp, model, artifacts, target)

    weights = feature_weights(dataset, config)
    add_proximity(milp, schema, x_vars, x_hat, weights, config.distance_norm,
                  config.pwl_breakpoints)

    alpha = config.sparsity_alpha
    if alpha is None:
        alpha = 0.1 * float(np.mean(list(weights.values())))
    need_z = config.sparsity_mode != "off" or (
        config.diversity_mode == "iterative" and config.iterative_strategy == "feature-exclusion")
    z_by_feature: dict[str, Variable] = {}
    if need_z:
        z_by_feature = add_sparsity(milp, schema, x_vars, x_hat, config.sparsity_mode,
                                    config.sparsity_k, alpha)

    if config.coherence:
        add_coherence(milp, schema, x_vars)

    if config.actionability:
        add_actionability(milp, dataset, x_vars, x_hat, factual, config.actionability_overrides)

    lam: list[tuple[int, Variable]] = []
    s_vars: list[Variable] = []
    abs_vars: list[Variable] = []
    cluster_vars: list[Variable] = []
    if config.manifold_mode != "off":
        desired = config.target_label
        lam, s_vars, abs_vars, cluster_vars = add_manifold(
            milp, dataset, desired, x_vars, config, force_cluster=force_cluster)

    if config.causality:
        add_causality(milp, dataset, x_vars, x_hat, config.causality)

    if config.extra_constraints:
        add_user_constraints(milp, dataset, x_vars, config.extra_constraints)

    return Built(milp, x_vars, x_hat, dict(factual), int_twins, z_by_feature, lam,
                 s_vars, abs_vars, cluster_vars, artifacts.output_var, notes, config)


def _changed_map(schema, x_hat: np.ndarray, x: np.ndarray) -> dict[str, bool]:
    changed = {}
    for f in schema:
        cols = schema.columns_of(f.name)
        if f.kind is Kind.CATEGORICAL:
            changed[f.name] = bool(np.argmax(x[cols]) != np.argmax(x_hat[cols]))
        else:
            changed[f.name] = bool(abs(x[cols[0]] - x_hat[cols[0]]) > CHANGE_TOL)
    return changed


def _snap_columns(schema, dataset, x: np.ndarray, x_hat: np.ndarray) -> np.ndarray:
    """Round integral columns and pin sub-threshold deviations back onto the
    factual, so solver noise never shows up as a spurious change."""
    out = x.copy()
    near = np.abs(out - x_hat) <= CHANGE_TOL
    out[near] = x_hat[near]
    for f in schema:
        cols = schema.columns_of(f.name)
        if f.kind is Kind.CATEGORICAL:
            out[cols] = np.round(out[cols])
        elif f.kind is Kind.INTEGER:
            lo, hi = dataset.scale_params[cols[0]]
            orig = lo + out[cols[0]] * (hi - lo)
            out[cols[0]] = (round(orig) - lo) / (hi - lo)
    return np.clip(out, 0.0, 1.0)


def _certificate(built: Built, x_full: np.ndarray) -> dict | None:
    if not built.lambda_vars:
        return None
    support = [(row, float(x_full[v.id])) for row, v in built.lambda_vars
               if x_full[v.id] > 1e-9]
    s_vals = np.array([x_full[v.id] for v in built.slack_vars])
    cfg_norm = built.config.manifold_norm
    s_norm = float(np.abs(s_vals).max()) if cfg_norm == "inf" else float(np.abs(s_vals).sum())
    return {"lambda_support": support, "slack_norm": s_norm, "norm": cfg_norm,
            "lambda_total": float(sum(w for _, w in support))}


def _solve_options(config: CeConfig, pool_size: int, pool_mode: str | None = None,
                   built: "Built | None" = None) -> SolveOptions:
    key_vars = None
    if built is not None:
        key_vars = [v.id for v in built.x_vars if v.kind is not VarKind.CONTINUOUS]
        key_vars += [v.id for v in built.int_twins.values()]
        key_vars += [v.id for v in built.z_by_feature.values()]
    return SolveOptions(
        pool_size=pool_size,
        pool_mode=pool_mode or config.pool_mode,
        time_limit=config.time_limit,
        node_limit=config.node_limit,
        kernel=config.kernel,
        pool_key_vars=key_vars,
    )


def diagnose_infeasibility(built: Built, base_options: SolveOptions) -> list[str]:
    """Deletion probe: re-solve with each criterion block removed in turn;
    a block whose removal restores feasibility is part of the conflict."""
    probe_tags = [t for t in built.milp.constraint_tags()
                  if t in ("validity", "sparsity", "coherence", "manifold",
                           "actionability", "causality", "user", "diversity")]
    conflict = []
    for tag in probe_tags:
        probe = MilpModel(f"probe_without_{tag}")
        for v in built.milp.variables:
            probe.add_variable(v.name, v.kind, v.lower, v.upper)
        for con in built.milp.constraints:
            if con.tag != tag:
                probe.add_constraint(list(con.coeffs), con.sense, con.rhs, con.tag)
        probe.freeze()
        opts = SolveOptions(pool_size=1, time_limit=min(base_options.time_limit or 10.0, 10.0),
                            node_limit=min(base_options.node_limit, 5000),
                            kernel=base_options.kernel)
        if solve_milp(probe, opts).status in ("optimal", "feasible"):
            conflict.append(tag)
    return conflict or probe_tags


def _decode_entries(built: Built, model, dataset, entries, target, seen: list,
                    warnings_out: list[str]):
    out = []
    schema = dataset.schema
    for entry in entries:
        x_cols = _snap_columns(schema, dataset, entry.x[: schema.n_columns], built.x_hat)
        try:
            record = dataset.decode(x_cols)
        except ValueError as exc:
            warnings_out.append(f"dropped pool entry that failed decoding: {exc}")
            continue
        changed = _changed_map(schema, built.x_hat, x_cols)
        for fname, was_changed in changed.items():
            if not was_changed:
                # unchanged features keep the factual value verbatim; going
                # through scale/unscale would perturb the float
                record[fname] = built.factual[fname]
        # two entries are the same counterfactual unless they differ by more
        # than the change threshold somewhere in scaled space
        if any(np.max(np.abs(x_cols - prev)) <= CHANGE_TOL for prev in seen):
            continue
        report = check_solution(built.milp, entry.x)
        if not report.feasible(1e-6):
            warnings_out.append(
                f"dropped pool entry with constraint violation {report.max_violation:.2e}")
            continue
        enc = dataset.encode(record).vector
        if isinstance(target, ClassTarget):
            ok = predict_index(model, enc) == target.index
            predicted = model.classes[predict_index(model, enc)] if model.classes else predict_index(model, enc)
        else:
            s = score(model, enc)
            predicted = s
            ok = s <= target.value - target.margin + 1e-9 if target.direction == "at-most" \
                else s >= target.value + target.margin - 1e-9
        if not ok:
            warnings_out.append("dropped pool entry failing native-model validity")
            continue
        seen.append(x_cols)
        out.append(Counterfactual(
            record=record,
            encoded=x_cols,
            changed=changed,
            objective=float(entry.objective),
            predicted=predicted,
            certificate=_certificate(built, entry.x),
        ))
    return out


def generate(factual: dict, model: TrainedModel, dataset: Dataset, config: CeConfig) -> CeResult:
    """Build and solve the CE model, returning up to ``config.m`` decoded,
    re-validated counterfactuals."""
    target_probe = _target_for(model, config)
    factual_enc = dataset.encode(factual).vector
    if isinstance(target_probe, ClassTarget):
        fp_idx = predict_index(model, factual_enc)
        factual_pred = model.classes[fp_idx] if model.classes else fp_idx
    else:
        factual_pred = score(model, factual_enc)

    warnings_out: list[str] = []
    seen: list = []
    counterfactuals: list[Counterfactual] = []
    stats = {"nodes": 0, "wall_time": 0.0, "solves": 0}

    if config.diversity_mode == "pool":
        built = build(factual, model, dataset, config)
        warnings_out.extend(built.warnings)
        built.milp.freeze()
        mode = config.pool_mode if config.m > 1 else "improving-only"
        # over-request: pool entries can collapse to the same counterfactual
        # once auxiliary binaries are dropped at decode time
        size = config.m if config.m == 1 else config.m + 4
        res = solve_milp(built.milp, _solve_options(config, size, mode, built))
        stats.update(nodes=res.nodes_explored, wall_time=res.wall_time, solves=1)
        if res.status in ("infeasible",):
            tags = diagnose_infeasibility(built, _solve_options(config, 1))
            raise InfeasibleError(tags)
        if res.status == "unbounded":
            raise RuntimeError("counterfactual model is unbounded; check variable bounds")
        counterfactuals = _decode_entries(built, model, dataset, res.pool,
                                          target_probe, seen, warnings_out)[: config.m]
        status = res.status
    else:
        status = "optimal"
        rounds = config.m
        cuts: list[dict] = []
        if config.iterative_strategy == "per-cluster":
            if config.manifold_mode != "clustered":
                raise ConfigError("per-cluster diversity requires the clustered manifold mode")
            rounds = min(config.m, config.manifold_clusters)
        for it in range(rounds):
            force = it if config.iterative_strategy == "per-cluster" else None
            built = build(factual, model, dataset, config, force_cluster=force)
            if it == 0:
                warnings_out.extend(built.warnings)
            _apply_diversity_cuts(built, dataset, cuts, config)
            built.milp.freeze()
            res = solve_milp(built.milp, _solve_options(config, 1, "improving-only"))
            stats["nodes"] += res.nodes_explored
            stats["wall_time"] += res.wall_time
            stats["solves"] += 1
            if res.status == "infeasible":
                if it == 0:
                    tags = diagnose_infeasibility(built, _solve_options(config, 1))
                    raise InfeasibleError(tags)
                warnings_out.append(f"iteration {it + 1}: model infeasible, stopping early")
                status = "optimal"
                break
            if res.status == "limit" and not res.pool:
                warnings_out.append(f"iteration {it + 1}: hit solve limits, stopping early")
                status = "limit"
                break
            found = _decode_entries(built, model, dataset, res.pool[:1],
                                    target_probe, seen, warnings_out)
            if not found:
                break
            ce = found[0]
            counterfactuals.append(ce)
            if config.iterative_strategy == "feature-exclusion":
                cuts.append({"kind": "pattern", "changed": dict(ce.changed)})
            elif config.iterative_strategy == "distance":
                cuts.append({"kind": "distance", "point": ce.encoded.copy()})

    if len(counterfactuals) < config.m:
        warnings_out.append(
            f"requested {config.m} counterfactuals, found {len(counterfactuals)}")
    return CeResult(counterfactuals, status, config.m, dict(factual), factual_pred,
                    warnings_out, stats)


def _apply_diversity_cuts(built: Built, dataset: Dataset, cuts: list[dict], config: CeConfig):
    """Exclusion constraints against previously returned counterfactuals."""
    milp = built.milp
    schema = dataset.schema
    new_change_tau = 0.01  # scaled step that counts as "newly changed"
    for ci, cut in enumerate(cuts):
        if cut["kind"] == "pattern":
            # at least one change-flag must differ from the recorded pattern.
            # Un-changing is enforced through z (z_j = 0 pins the feature);
            # newly-changing needs a lower-side indicator of its own, because
            # z_j = 1 does not force an actual deviation.
            coeffs = []
            rhs = 1.0
            for name, was_changed in cut["changed"].items():
                if was_changed:
                    coeffs.append((built.z_by_feature[name], -1.0))
                    rhs -= 1.0
                else:
                    w = milp.add_variable(f"new_{ci}_{name}", VarKind.BINARY)
                    cols = schema.columns_of(name)
                    f = schema.feature(name)
                    if f.kind is Kind.CATEGORICAL:
                        lvl = int(np.argmax(built.x_hat[cols]))
                        milp.add_constraint([(built.x_vars[cols[lvl]], 1.0), (w, 1.0)],
                                            Sense.LE, 1.0, tag="diversity")
                    else:
                        xv = built.x_vars[cols[0]]
                        ref = float(built.x_hat[cols[0]])
                        M = 2.0 + new_change_tau
                        side = milp.add_variable(f"new_side_{ci}_{name}", VarKind.BINARY)
                        milp.add_constraint([(xv, 1.0), (w, -M), (side, -M)], Sense.GE,
                                            ref + new_change_tau - 2 * M, tag="diversity")
                        milp.add_constraint([(xv, 1.0), (w, M), (side, -M)], Sense.LE,
                                            ref - new_change_tau + M, tag="diversity")
                    coeffs.append((w, 1.0))
            milp.add_constraint(coeffs, Sense.GE, rhs, tag="diversity")
        else:
            prev = cut["point"]
            tau = config.distance_tau
            d_vars = []
            for f in schema:
                cols = schema.columns_of(f.name)
                d = milp.add_variable(f"far_{f.name}", VarKind.BINARY)
                d_vars.append(d)
                if f.kind is Kind.CATEGORICAL:
                    # d = 1 forces the previously selected level off
                    prev_level = int(np.argmax(prev[cols]))
                    milp.add_constraint([(built.x_vars[cols[prev_level]], 1.0), (d, 1.0)],
                                        Sense.LE, 1.0, tag="diversity")
                else:
                    xv = built.x_vars[cols[0]]
                    p = float(prev[cols[0]])
                    M = 2.0 + tau
                    side = milp.add_variable(f"far_side_{f.name}", VarKind.BINARY)
                    # d=1, side=1: x >= p + tau; d=1, side=0: x <= p - tau
                    milp.add_constraint([(xv, 1.0), (d, -M), (side, -M)], Sense.GE,
                                        p + tau - 2 * M, tag="diversity")
                    milp.add_constraint([(xv, 1.0), (d, M), (side, -M)], Sense.LE,
                                        p - tau + M, tag="diversity")
            milp.add_constraint([(d, 1.0) for d in d_vars], Sense.GE, 1.0, tag="diversity")
