"""Tabular dataset ingestion: CSV parsing against a schema, one-hot
encoding, min-max scaling, and decoding back to original feature space.

The optimization layer works entirely in the scaled/encoded space; all
user-facing records and metrics are in original units.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .schema import Actionability, FeatureSchema, FeatureSpec, Kind, SchemaError

COHERENCE_TOL = 1e-6
INT_RESIDUAL_TOL = 1e-6


class ParseError(ValueError):
    """CSV cell failed validation; message carries row and column context."""


class CoherenceError(ValueError):
    """A one-hot group does not decode to exactly one categorical level."""


@dataclass(frozen=True)
class EncodeResult:
    vector: np.ndarray
    clipped: tuple[str, ...] = ()  # features clamped into their training box


class Dataset:
    """Immutable dataset: original rows, labels, and the encoded matrix."""

    def __init__(self, schema: FeatureSchema, rows: list[dict], labels: list):
        self.schema = schema
        self.rows = tuple(dict(r) for r in rows)
        self.labels = tuple(labels)
        if len(self.rows) != len(self.labels):
            raise ValueError("rows and labels must align")
        self.scale_params = self._fit_scale()
        self.encoded = np.vstack([self.encode(r).vector for r in self.rows]) \
            if self.rows else np.zeros((0, schema.n_columns))
        self.encoded.setflags(write=False)

    def _fit_scale(self) -> list[tuple[float, float]]:
        """Per-column (min, max). Schema bounds win when provided; otherwise
        the observed data range. Categorical columns stay 0/1."""
        params: list[tuple[float, float]] = []
        for col, fi in enumerate(self.schema.column_feature):
            f = self.schema.features[fi]
            if f.kind is Kind.CATEGORICAL:
                params.append((0.0, 1.0))
                continue
            values = [float(r[f.name]) for r in self.rows]
            lo = f.lower if f.lower is not None else (min(values) if values else 0.0)
            hi = f.upper if f.upper is not None else (max(values) if values else 1.0)
            if hi <= lo:
                hi = lo + 1.0
            params.append((float(lo), float(hi)))
        return params

    # -- encode / decode ----------------------------------------------------

    def scale(self, feature: FeatureSpec, value: float) -> float:
        col = self.schema.columns_of(feature.name)[0]
        lo, hi = self.scale_params[col]
        return (float(value) - lo) / (hi - lo)

    def unscale(self, col: int, value: float) -> float:
        lo, hi = self.scale_params[col]
        return lo + float(value) * (hi - lo)

    def encode(self, record: dict) -> EncodeResult:
        """One-hot expand and min-max scale a record. Out-of-box numerics are
        clipped and reported via ``clipped`` instead of rejected."""
        vec = np.zeros(self.schema.n_columns)
        clipped: list[str] = []
        for f in self.schema.features:
            if f.name not in record:
                raise ParseError(f"record missing feature {f.name!r}")
            raw = record[f.name]
            cols = self.schema.columns_of(f.name)
            if f.kind is Kind.CATEGORICAL:
                level = str(raw)
                if level not in f.levels:
                    raise ParseError(f"feature {f.name!r}: unknown level {level!r}")
                vec[cols[f.levels.index(level)]] = 1.0
            else:
                try:
                    value = float(raw)
                except (TypeError, ValueError):
                    raise ParseError(f"feature {f.name!r}: non-numeric value {raw!r}") from None
                scaled = self.scale(f, value)
                if scaled < 0.0 or scaled > 1.0:
                    clipped.append(f.name)
                    scaled = min(max(scaled, 0.0), 1.0)
                vec[cols[0]] = scaled
        return EncodeResult(vec, tuple(clipped))

    def decode(self, vector: np.ndarray) -> dict:
        """Invert :meth:`encode`. Raises CoherenceError when a one-hot group
        does not sum to one with a dominant entry; integer features with a
        rounding residual above tolerance raise ValueError."""
        vector = np.asarray(vector, dtype=float)
        if vector.shape != (self.schema.n_columns,):
            raise ValueError("vector length does not match schema")
        record: dict = {}
        for f in self.schema.features:
            cols = self.schema.columns_of(f.name)
            if f.kind is Kind.CATEGORICAL:
                group = vector[cols]
                total = float(group.sum())
                if abs(total - 1.0) > COHERENCE_TOL:
                    raise CoherenceError(
                        f"feature {f.name!r}: one-hot sum {total:.6g} != 1")
                top = int(np.argmax(group))
                if group[top] < 1.0 - COHERENCE_TOL:
                    raise CoherenceError(
                        f"feature {f.name!r}: no dominant level (max {group[top]:.6g})")
                record[f.name] = f.levels[top]
            else:
                value = self.unscale(cols[0], float(vector[cols[0]]))
                if f.kind is Kind.INTEGER:
                    snapped = round(value)
                    if abs(value - snapped) > self._int_tol(cols[0]):
                        raise ValueError(
                            f"feature {f.name!r}: integer residual {value - snapped:.3g}")
                    value = int(snapped)
                record[f.name] = value
        return record

    def _int_tol(self, col: int) -> float:
        lo, hi = self.scale_params[col]
        return max(INT_RESIDUAL_TOL * (hi - lo), 1e-6)

    # -- selection ----------------------------------------------------------

    def class_indices(self, label) -> np.ndarray:
        if label not in self.labels:
            raise ValueError(f"label {label!r} not present in dataset")
        idx = np.array([i for i, y in enumerate(self.labels) if y == label], dtype=np.int64)
        if idx.size == 0:
            raise ValueError(f"no rows with label {label!r}")
        return idx

    def class_labels(self) -> list:
        seen: dict = {}
        for y in self.labels:
            seen.setdefault(y, None)
        return list(seen)

    def __len__(self) -> int:
        return len(self.rows)


def load_csv(path: str | Path, schema: FeatureSchema) -> Dataset:
    """Parse a CSV (comma separated, header row, '.' decimals) into a Dataset.

    Every cell is validated against the schema; errors carry the offending
    row and column."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        needed = [f.name for f in schema.features] + [schema.label_column]
        for name in needed:
            if name not in header:
                raise ParseError(f"{path}: missing column {name!r}")
        col_of = {name: header.index(name) for name in needed}

        rows: list[dict] = []
        labels: list = []
        for rownum, cells in enumerate(reader, start=2):
            if not cells or all(not c.strip() for c in cells):
                continue
            if len(cells) != len(header):
                raise ParseError(f"{path}:{rownum}: expected {len(header)} cells, got {len(cells)}")
            record: dict = {}
            for f in schema.features:
                raw = cells[col_of[f.name]].strip()
                if f.kind is Kind.CATEGORICAL:
                    if raw not in f.levels:
                        raise ParseError(
                            f"{path}:{rownum}: column {f.name!r}: unknown level {raw!r}")
                    record[f.name] = raw
                else:
                    try:
                        value = float(raw)
                    except ValueError:
                        raise ParseError(
                            f"{path}:{rownum}: column {f.name!r}: non-numeric {raw!r}") from None
                    if f.kind is Kind.INTEGER:
                        if abs(value - round(value)) > 1e-9:
                            raise ParseError(
                                f"{path}:{rownum}: column {f.name!r}: non-integer {raw!r}")
                        value = int(round(value))
                    record[f.name] = value
            rows.append(record)
            labels.append(cells[col_of[schema.label_column]].strip())
    return Dataset(schema, rows, labels)


def actionability_of(schema: FeatureSchema, overrides: dict[str, str] | None = None) -> dict[str, Actionability]:
    """Effective per-feature actionability after request-level overrides."""
    result = {f.name: f.actionability for f in schema.features}
    for name, value in (overrides or {}).items():
        schema.feature(name)
        result[name] = Actionability(value)
    return result
