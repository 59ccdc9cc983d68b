"""Feature schema: per-feature kind, bounds, actionability class, and the
one-hot column layout induced by categorical features."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path


class Kind(Enum):
    CONTINUOUS = "continuous"
    INTEGER = "integer"
    CATEGORICAL = "categorical"


class Actionability(Enum):
    FREE = "free"
    IMMUTABLE = "immutable"
    NON_DECREASING = "non-decreasing"
    NON_INCREASING = "non-increasing"
    NON_NEGATIVE = "non-negative"
    CONDITIONAL = "conditional"


class SchemaError(ValueError):
    pass


@dataclass(frozen=True)
class FeatureSpec:
    name: str
    kind: Kind
    levels: tuple[str, ...] = ()
    lower: float | None = None
    upper: float | None = None
    actionability: Actionability = Actionability.FREE
    allowed_transitions: dict[str, tuple[str, ...]] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind is Kind.CATEGORICAL:
            if not self.levels:
                raise SchemaError(f"{self.name}: categorical feature needs levels")
            if len(set(self.levels)) != len(self.levels):
                raise SchemaError(f"{self.name}: duplicate categorical levels")
        else:
            if self.lower is not None and self.upper is not None and self.lower > self.upper:
                raise SchemaError(f"{self.name}: lower {self.lower} > upper {self.upper}")
        if self.actionability is Actionability.CONDITIONAL:
            if self.kind is not Kind.CATEGORICAL:
                raise SchemaError(f"{self.name}: conditional actionability needs a categorical feature")
            for src, dests in self.allowed_transitions.items():
                for lv in (src, *dests):
                    if lv not in self.levels:
                        raise SchemaError(f"{self.name}: unknown level {lv!r} in transitions")

    @property
    def is_numeric(self) -> bool:
        return self.kind is not Kind.CATEGORICAL

    @property
    def width(self) -> int:
        """Number of encoded columns this feature occupies."""
        return len(self.levels) if self.kind is Kind.CATEGORICAL else 1


class FeatureSchema:
    """Ordered feature list plus the label column name. Immutable."""

    def __init__(self, features: list[FeatureSpec], label_column: str):
        names = [f.name for f in features]
        if len(set(names)) != len(names):
            raise SchemaError("feature names must be unique")
        if label_column in names:
            raise SchemaError("label column cannot also be a feature")
        self.features = tuple(features)
        self.label_column = label_column
        self._by_name = {f.name: f for f in features}

        # encoded-column layout: categorical feature j owns a one-hot group
        self.column_names: list[str] = []
        self.column_feature: list[int] = []
        self.groups: dict[str, list[int]] = {}
        for fi, f in enumerate(self.features):
            if f.kind is Kind.CATEGORICAL:
                idx = []
                for lv in f.levels:
                    idx.append(len(self.column_names))
                    self.column_names.append(f"{f.name}={lv}")
                    self.column_feature.append(fi)
                self.groups[f.name] = idx
            else:
                self.column_feature.append(fi)
                self.column_names.append(f.name)

    @property
    def n_columns(self) -> int:
        return len(self.column_names)

    def feature(self, name: str) -> FeatureSpec:
        try:
            return self._by_name[name]
        except KeyError:
            raise SchemaError(f"unknown feature {name!r}") from None

    def columns_of(self, name: str) -> list[int]:
        f = self.feature(name)
        if f.kind is Kind.CATEGORICAL:
            return list(self.groups[name])
        return [self.column_names.index(name)]

    def __iter__(self):
        return iter(self.features)

    def __len__(self):
        return len(self.features)

    # -- JSON round-trip -----------------------------------------------------

    def to_dict(self) -> dict:
        feats = []
        for f in self.features:
            d: dict = {"name": f.name, "kind": f.kind.value,
                       "actionability": f.actionability.value}
            if f.kind is Kind.CATEGORICAL:
                d["levels"] = list(f.levels)
            else:
                d["lower"] = f.lower
                d["upper"] = f.upper
            if f.allowed_transitions:
                d["allowed_transitions"] = {k: list(v) for k, v in f.allowed_transitions.items()}
            feats.append(d)
        return {"label_column": self.label_column, "features": feats}

    @classmethod
    def from_dict(cls, doc: dict) -> "FeatureSchema":
        try:
            feats = []
            for d in doc["features"]:
                feats.append(FeatureSpec(
                    name=d["name"],
                    kind=Kind(d["kind"]),
                    levels=tuple(d.get("levels", ())),
                    lower=d.get("lower"),
                    upper=d.get("upper"),
                    actionability=Actionability(d.get("actionability", "free")),
                    allowed_transitions={k: tuple(v) for k, v in d.get("allowed_transitions", {}).items()},
                ))
            return cls(feats, doc["label_column"])
        except (KeyError, ValueError, TypeError) as exc:
            if isinstance(exc, SchemaError):
                raise
            raise SchemaError(f"malformed schema document: {exc}") from exc

    def to_json(self, path: str | Path | None = None) -> str:
        text = json.dumps(self.to_dict(), indent=2)
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_json(cls, source: str | Path) -> "FeatureSchema":
        text = str(source)
        try:
            p = Path(source)
            if p.exists():
                text = p.read_text()
        except OSError:
            pass  # JSON text longer than a legal path
        return cls.from_dict(json.loads(text))
