"""In-memory mixed-integer linear program with construction helpers.

Variables carry bounds and a kind (continuous, binary, integer); constraints
are stored sparsely with a sense, a right-hand side, and a tag naming the
criterion block they belong to. The objective is linear, optionally extended
with convex piecewise-linear penalties via epigraph constraints.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum


class VarKind(Enum):
    CONTINUOUS = "continuous"
    BINARY = "binary"
    INTEGER = "integer"


class Sense(Enum):
    LE = "<="
    EQ = "="
    GE = ">="


@dataclass(frozen=True)
class Variable:
    id: int
    name: str
    kind: VarKind
    lower: float
    upper: float

    @property
    def is_integral(self) -> bool:
        return self.kind is not VarKind.CONTINUOUS


@dataclass
class Constraint:
    coeffs: list[tuple[int, float]]
    sense: Sense
    rhs: float
    tag: str = "user"


@dataclass
class Objective:
    coeffs: dict[int, float] = field(default_factory=dict)
    constant: float = 0.0


class ModelError(ValueError):
    """Raised for malformed model construction (bad bounds, NaN coefficients)."""


class MilpModel:
    """Append-only MILP container. Mutable until :meth:`freeze` is called."""

    def __init__(self, name: str = "model"):
        self.name = name
        self.variables: list[Variable] = []
        self.constraints: list[Constraint] = []
        self.objective = Objective()
        self._frozen = False

    # -- construction ------------------------------------------------------

    def _check_mutable(self) -> None:
        if self._frozen:
            raise ModelError("model is frozen")

    def add_variable(
        self,
        name: str,
        kind: VarKind = VarKind.CONTINUOUS,
        lower: float = 0.0,
        upper: float = 1.0,
    ) -> Variable:
        self._check_mutable()
        if kind is VarKind.BINARY:
            lower, upper = max(lower, 0.0), min(upper, 1.0)
        if math.isnan(lower) or math.isnan(upper):
            raise ModelError(f"variable {name!r}: NaN bound")
        if lower > upper:
            raise ModelError(f"variable {name!r}: lower {lower} > upper {upper}")
        var = Variable(len(self.variables), name, kind, float(lower), float(upper))
        self.variables.append(var)
        return var

    def _validate_coeffs(self, coeffs) -> list[tuple[int, float]]:
        n = len(self.variables)
        out = []
        for var, coef in coeffs:
            vid = var.id if isinstance(var, Variable) else int(var)
            if not 0 <= vid < n:
                raise ModelError(f"unknown variable id {vid}")
            coef = float(coef)
            if not math.isfinite(coef):
                raise ModelError(f"non-finite coefficient on variable {vid}")
            out.append((vid, coef))
        return out

    def add_constraint(self, coeffs, sense: Sense, rhs: float, tag: str = "user") -> Constraint:
        """Add sum(coef * var) <sense> rhs. ``coeffs`` is (Variable|id, coef) pairs."""
        self._check_mutable()
        rhs = float(rhs)
        if not math.isfinite(rhs):
            raise ModelError("non-finite rhs")
        con = Constraint(self._validate_coeffs(coeffs), sense, rhs, tag)
        self.constraints.append(con)
        return con

    def add_objective_term(self, var, coef: float) -> None:
        self._check_mutable()
        ((vid, coef),) = self._validate_coeffs([(var, coef)])
        self.objective.coeffs[vid] = self.objective.coeffs.get(vid, 0.0) + coef

    def set_objective(self, coeffs, constant: float = 0.0) -> None:
        """Replace the (minimization) objective."""
        self._check_mutable()
        self.objective = Objective(dict(self._validate_coeffs(coeffs)), float(constant))

    def add_objective_constant(self, value: float) -> None:
        self._check_mutable()
        self.objective.constant += float(value)

    def add_abs_link(self, var, aux, ref: float, tag: str = "user") -> tuple[Constraint, Constraint]:
        """Link ``aux >= |var - ref|`` from above with two inequalities.

        ``aux`` is tight at the absolute deviation only when it is pushed
        down (penalized in the objective or bounded by another constraint).
        """
        c1 = self.add_constraint([(aux, 1.0), (var, -1.0)], Sense.GE, -ref, tag)
        c2 = self.add_constraint([(aux, 1.0), (var, 1.0)], Sense.GE, ref, tag)
        return c1, c2

    def add_pwl_penalty(self, var, breakpoints, tag: str = "user", name: str = "pwl"):
        """Epigraph variable for a convex piecewise-linear function of ``var``.

        ``breakpoints`` is a sorted list of (t, f(t)) with nondecreasing
        segment slopes. Returns the epigraph variable; add it to the
        objective to penalize. Values between breakpoints are the chord
        (over)estimate of the underlying function.
        """
        self._check_mutable()
        pts = [(float(t), float(f)) for t, f in breakpoints]
        if len(pts) < 2:
            raise ModelError("need at least two breakpoints")
        slopes = []
        for (t0, f0), (t1, f1) in zip(pts, pts[1:]):
            if t1 <= t0:
                raise ModelError("breakpoints must be strictly increasing")
            slopes.append((f1 - f0) / (t1 - t0))
        for s0, s1 in zip(slopes, slopes[1:]):
            if s1 < s0 - 1e-12:
                raise ModelError("breakpoints are not convex (decreasing slopes)")
        lo = min(f for _, f in pts)
        hi = max(f for _, f in pts)
        epi = self.add_variable(name, VarKind.CONTINUOUS, lo, hi)
        for slope, (t0, f0) in zip(slopes, pts):
            # epi >= f0 + slope * (var - t0)
            self.add_constraint([(epi, 1.0), (var, -slope)], Sense.GE, f0 - slope * t0, tag)
        return epi

    # -- lifecycle ---------------------------------------------------------

    def freeze(self) -> "MilpModel":
        self._frozen = True
        return self

    @property
    def frozen(self) -> bool:
        return self._frozen

    def integral_ids(self) -> list[int]:
        return [v.id for v in self.variables if v.is_integral]

    def constraint_tags(self) -> list[str]:
        seen: dict[str, None] = {}
        for con in self.constraints:
            seen.setdefault(con.tag, None)
        return list(seen)

    # -- export ------------------------------------------------------------

    def _lp_name(self, var: Variable) -> str:
        safe = "".join(ch if ch.isalnum() or ch in "_." else "_" for ch in var.name)
        return f"v{var.id}_{safe}" if safe else f"v{var.id}"

    def export_lp(self) -> str:
        """Render the model in LP text format (Minimize / Subject To / Bounds /
        Binaries / Generals), with constraint tags emitted as comments."""
        if not self.variables:
            raise ModelError("empty model")
        names = {v.id: self._lp_name(v) for v in self.variables}

        def expr(pairs) -> str:
            parts = []
            for vid, coef in pairs:
                sign = "-" if coef < 0 else "+"
                parts.append(f"{sign} {abs(coef):.12g} {names[vid]}")
            if not parts:
                return "0"
            joined = " ".join(parts)
            return joined[2:] if joined.startswith("+ ") else joined

        lines = [f"\\ {self.name}", "Minimize"]
        obj_pairs = sorted(self.objective.coeffs.items())
        obj = expr(obj_pairs)
        if self.objective.constant:
            obj += f" + {self.objective.constant:.12g}"
        lines.append(f" obj: {obj}")
        lines.append("Subject To")
        for i, con in enumerate(self.constraints):
            op = {Sense.LE: "<=", Sense.EQ: "=", Sense.GE: ">="}[con.sense]
            lines.append(f" c{i}: {expr(sorted(con.coeffs))} {op} {con.rhs:.12g}  \\ {con.tag}")
        lines.append("Bounds")
        for v in self.variables:
            lo = "-inf" if math.isinf(v.lower) else f"{v.lower:.12g}"
            hi = "+inf" if math.isinf(v.upper) else f"{v.upper:.12g}"
            lines.append(f" {lo} <= {names[v.id]} <= {hi}")
        binaries = [names[v.id] for v in self.variables if v.kind is VarKind.BINARY]
        generals = [names[v.id] for v in self.variables if v.kind is VarKind.INTEGER]
        if binaries:
            lines.append("Binaries")
            lines.append(" " + " ".join(binaries))
        if generals:
            lines.append("Generals")
            lines.append(" " + " ".join(generals))
        lines.append("End")
        return "\n".join(lines) + "\n"
