"""Compile trained models into MILP constraints tying the decision vector
to an output score variable.

Trees get one binary indicator per leaf with big-M path constraints;
ensembles sum per-tree outputs; ReLU networks use interval-propagated
pre-activation bounds so stably-active or stably-dead neurons need no
binary at all.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .learners import EnsembleModel, LinearModel, ReluNetModel, TreeModel
from .milp import MilpModel, Sense, VarKind, Variable

SPLIT_GAP = 1e-6  # offset separating the open side of a strict tree split


@dataclass
class EmbeddingArtifacts:
    output_var: Variable
    aux: list[Variable] = field(default_factory=list)
    bounds_trace: list[tuple[float, float]] = field(default_factory=list)
    leaf_info: list[list[tuple[Variable, float]]] = field(default_factory=list)
    family: str = ""


def _affine_interval(w: np.ndarray, b: float, lo: np.ndarray, hi: np.ndarray) -> tuple[float, float]:
    low = float(b + np.minimum(w * lo, w * hi).sum())
    high = float(b + np.maximum(w * lo, w * hi).sum())
    return low, high


def _boxes(x_vars: list[Variable]) -> tuple[np.ndarray, np.ndarray]:
    return (np.array([v.lower for v in x_vars]), np.array([v.upper for v in x_vars]))


def embed_linear(milp: MilpModel, model: LinearModel, x_vars: list[Variable],
                 name: str = "y") -> EmbeddingArtifacts:
    if len(x_vars) != len(model.weights):
        raise ValueError("variable count does not match model width")
    lo, hi = _boxes(x_vars)
    L, U = _affine_interval(model.weights, model.bias, lo, hi)
    y = milp.add_variable(name, VarKind.CONTINUOUS, L, U)
    coeffs = [(y, 1.0)] + [(v, -w) for v, w in zip(x_vars, model.weights)]
    milp.add_constraint(coeffs, Sense.EQ, model.bias, tag=f"embedding:{model.family}")
    return EmbeddingArtifacts(y, family=model.family, bounds_trace=[(L, U)])


def embed_tree(milp: MilpModel, model: TreeModel, x_vars: list[Variable],
               name: str = "y") -> EmbeddingArtifacts:
    tag = f"embedding:{model.family}"
    leaves = model.leaves()
    values = [val for _, val in leaves]
    y = milp.add_variable(name, VarKind.CONTINUOUS, min(values), max(values))
    z_vars = [milp.add_variable(f"{name}_leaf{i}", VarKind.BINARY) for i in range(len(leaves))]
    milp.add_constraint([(z, 1.0) for z in z_vars], Sense.EQ, 1.0, tag=tag)
    for z, (path, _) in zip(z_vars, leaves):
        for col, thr, goes_left in path:
            xv = x_vars[col]
            M = (xv.upper - xv.lower) + SPLIT_GAP
            if goes_left:
                # x_c <= thr + M (1 - z)
                milp.add_constraint([(xv, 1.0), (z, M)], Sense.LE, thr + M, tag=tag)
            else:
                # x_c >= thr + gap - M (1 - z)
                milp.add_constraint([(xv, 1.0), (z, -M)], Sense.GE, thr + SPLIT_GAP - M, tag=tag)
    milp.add_constraint([(y, 1.0)] + [(z, -val) for z, (_, val) in zip(z_vars, leaves)],
                        Sense.EQ, 0.0, tag=tag)
    return EmbeddingArtifacts(y, aux=list(z_vars), family=model.family,
                              leaf_info=[list(zip(z_vars, values))])


def embed_ensemble(milp: MilpModel, model: EnsembleModel, x_vars: list[Variable],
                   name: str = "y") -> EmbeddingArtifacts:
    tag = f"embedding:{model.family}"
    parts = [embed_tree(milp, tree, x_vars, name=f"{name}_t{i}")
             for i, tree in enumerate(model.trees)]
    lo = sum(w * p.output_var.lower for w, p in zip(model.weights, parts))
    hi = sum(w * p.output_var.upper for w, p in zip(model.weights, parts))
    y = milp.add_variable(name, VarKind.CONTINUOUS, min(lo, hi), max(lo, hi))
    coeffs = [(y, 1.0)] + [(p.output_var, -w) for w, p in zip(model.weights, parts)]
    milp.add_constraint(coeffs, Sense.EQ, 0.0, tag=tag)
    aux = [v for p in parts for v in (p.aux + [p.output_var])]
    leaf_info = [info for p in parts for info in p.leaf_info]
    return EmbeddingArtifacts(y, aux=aux, family=model.family, leaf_info=leaf_info)


def embed_relunet(milp: MilpModel, model: ReluNetModel, x_vars: list[Variable],
                  name: str = "y") -> EmbeddingArtifacts:
    tag = f"embedding:{model.family}"
    aux: list[Variable] = []
    trace: list[tuple[float, float]] = []
    act_vars: list[Variable] = list(x_vars)
    act_lo, act_hi = _boxes(x_vars)

    for li, (W, b) in enumerate(model.layers):
        last = li == len(model.layers) - 1
        next_vars: list[Variable] = []
        next_lo, next_hi = [], []
        for j in range(W.shape[0]):
            L, U = _affine_interval(W[j], float(b[j]), act_lo, act_hi)
            if not (np.isfinite(L) and np.isfinite(U)):
                raise ArithmeticError("non-finite neuron bounds from box inputs")
            trace.append((L, U))
            pre_coeffs = [(v, -float(w)) for v, w in zip(act_vars, W[j])]
            if last:
                y = milp.add_variable(name, VarKind.CONTINUOUS, L, U)
                milp.add_constraint([(y, 1.0)] + pre_coeffs, Sense.EQ, float(b[j]), tag=tag)
                next_vars.append(y)
                next_lo.append(L)
                next_hi.append(U)
                continue
            if U <= 0.0:
                # stably dead: activation pinned to zero, no binary
                a = milp.add_variable(f"{name}_a{li}_{j}", VarKind.CONTINUOUS, 0.0, 0.0)
            elif L >= 0.0:
                # stably active: activation equals the affine pre-activation
                a = milp.add_variable(f"{name}_a{li}_{j}", VarKind.CONTINUOUS, L, U)
                milp.add_constraint([(a, 1.0)] + pre_coeffs, Sense.EQ, float(b[j]), tag=tag)
            else:
                p = milp.add_variable(f"{name}_p{li}_{j}", VarKind.CONTINUOUS, L, U)
                milp.add_constraint([(p, 1.0)] + pre_coeffs, Sense.EQ, float(b[j]), tag=tag)
                a = milp.add_variable(f"{name}_a{li}_{j}", VarKind.CONTINUOUS, 0.0, U)
                g = milp.add_variable(f"{name}_g{li}_{j}", VarKind.BINARY)
                milp.add_constraint([(a, 1.0), (p, -1.0)], Sense.GE, 0.0, tag=tag)
                # a <= p - L (1 - g)
                milp.add_constraint([(a, 1.0), (p, -1.0), (g, -L)], Sense.LE, -L, tag=tag)
                # a <= U g
                milp.add_constraint([(a, 1.0), (g, -U)], Sense.LE, 0.0, tag=tag)
                aux.extend([p, g])
            aux.append(a)
            next_vars.append(a)
            next_lo.append(max(L, 0.0))
            next_hi.append(max(U, 0.0))
        act_vars = next_vars
        act_lo, act_hi = np.array(next_lo), np.array(next_hi)

    return EmbeddingArtifacts(act_vars[0], aux=aux, bounds_trace=trace, family=model.family)


def embed(milp: MilpModel, model, x_vars: list[Variable], name: str = "y") -> EmbeddingArtifacts:
    if isinstance(model, LinearModel):
        return embed_linear(milp, model, x_vars, name)
    if isinstance(model, TreeModel):
        return embed_tree(milp, model, x_vars, name)
    if isinstance(model, EnsembleModel):
        return embed_ensemble(milp, model, x_vars, name)
    if isinstance(model, ReluNetModel):
        return embed_relunet(milp, model, x_vars, name)
    raise TypeError(f"cannot embed {type(model).__name__}")


@dataclass(frozen=True)
class ClassTarget:
    index: int  # 0 or 1
    margin: float = 1e-4


@dataclass(frozen=True)
class RegressTarget:
    direction: str  # "at-most" | "at-least"
    value: float
    margin: float = 0.0


def validity_constraint(milp: MilpModel, model, artifacts: EmbeddingArtifacts,
                        target: ClassTarget | RegressTarget) -> None:
    """Force the embedded output to the desired class or regression band."""
    y = artifacts.output_var
    if isinstance(target, RegressTarget):
        if target.direction == "at-most":
            milp.add_constraint([(y, 1.0)], Sense.LE, target.value - target.margin, tag="validity")
        elif target.direction == "at-least":
            milp.add_constraint([(y, 1.0)], Sense.GE, target.value + target.margin, tag="validity")
        else:
            raise ValueError(f"unknown direction {target.direction!r}")
        return
    if target.margin < 0:
        raise ValueError("margin must be >= 0")
    # never let the optimum sit exactly on the decision boundary, where
    # re-encoding noise could flip the native prediction
    margin = max(target.margin, 1e-7)
    if isinstance(model, TreeModel):
        winners = [(z, 1.0) for z, val in artifacts.leaf_info[0] if int(round(val)) == target.index]
        milp.add_constraint(winners, Sense.EQ, 1.0, tag="validity")
    elif isinstance(model, EnsembleModel):
        if target.index == 1:
            milp.add_constraint([(y, 1.0)], Sense.GE, 0.5 + margin, tag="validity")
        else:
            milp.add_constraint([(y, 1.0)], Sense.LE, 0.5 - margin, tag="validity")
    else:
        if target.index == 1:
            milp.add_constraint([(y, 1.0)], Sense.GE, margin, tag="validity")
        else:
            milp.add_constraint([(y, 1.0)], Sense.LE, -margin, tag="validity")
