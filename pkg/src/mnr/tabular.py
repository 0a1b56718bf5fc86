"""Typed tabular schemas, instances, and CSV ingestion.

Categorical features are ordinally encoded: the position of a value in its
declared admissible list is the contract, both for the tree learner and for
the counterfactual search's candidate enumeration.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import yaml

__all__ = [
    "SchemaError",
    "ValidationError",
    "FeatureSpec",
    "FeatureSchema",
    "Instance",
    "LabeledDataset",
    "load_csv",
    "save_csv",
    "encode",
    "load_schema_file",
    "save_schema_file",
    "format_value",
]


class SchemaError(ValueError):
    """Schema construction or schema/file mismatch problem."""


class ValidationError(ValueError):
    """A value failed validation; carries row/column location when known."""

    def __init__(self, message: str, *, row: int | None = None, column: str | None = None):
        super().__init__(message)
        self.row = row
        self.column = column


@dataclass(frozen=True)
class FeatureSpec:
    """One feature axis: either categorical (ordered value list) or numeric.

    For numeric features ``lower``/``upper`` bound admissible values and
    ``integer`` marks integer-valued features (affects counterfactual
    candidate snapping). ``mutable`` controls whether the counterfactual
    search may alter the feature.
    """

    name: str
    kind: str  # "categorical" | "numeric"
    values: tuple[str, ...] = ()
    lower: float = 0.0
    upper: float = 0.0
    integer: bool = False
    mutable: bool = True

    def __post_init__(self):
        if not self.name:
            raise SchemaError("feature name must be non-empty")
        if self.kind == "categorical":
            if not self.values:
                raise SchemaError(f"categorical feature {self.name!r} needs at least one value")
            if len(set(self.values)) != len(self.values):
                raise SchemaError(f"categorical feature {self.name!r} has duplicate values")
        elif self.kind == "numeric":
            if self.lower > self.upper:
                raise SchemaError(
                    f"numeric feature {self.name!r}: lower bound {self.lower} > upper bound {self.upper}"
                )
        else:
            raise SchemaError(f"feature {self.name!r}: unknown kind {self.kind!r}")

    @property
    def is_categorical(self) -> bool:
        return self.kind == "categorical"

    def validate_value(self, value) -> None:
        """Raise ValidationError unless *value* is admissible for this spec."""
        if self.is_categorical:
            if not isinstance(value, str) or value not in self.values:
                raise ValidationError(
                    f"value {value!r} not in admissible list for feature {self.name!r}",
                    column=self.name,
                )
        else:
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ValidationError(
                    f"feature {self.name!r} expects a number, got {value!r}", column=self.name
                )
            if not (self.lower <= float(value) <= self.upper):
                raise ValidationError(
                    f"value {value!r} outside [{self.lower}, {self.upper}] for feature {self.name!r}",
                    column=self.name,
                )


@dataclass(frozen=True)
class FeatureSchema:
    """Ordered feature specs plus the binary target definition.

    ``k`` (the feature count) is the denominator of the per-narrative
    feature-faithfulness fraction, so it lives here.
    """

    features: tuple[FeatureSpec, ...]
    target_name: str
    target_labels: tuple[str, str]

    def __post_init__(self):
        if len(self.features) < 1:
            raise SchemaError("schema needs at least one feature")
        names = [f.name for f in self.features]
        if len(set(names)) != len(names):
            raise SchemaError("feature names must be unique")
        if self.target_name in names:
            raise SchemaError(f"target {self.target_name!r} collides with a feature name")
        if len(self.target_labels) != 2 or self.target_labels[0] == self.target_labels[1]:
            raise SchemaError("target_labels must be two distinct labels")

    @property
    def k(self) -> int:
        return len(self.features)

    @property
    def feature_names(self) -> tuple[str, ...]:
        return tuple(f.name for f in self.features)

    def feature_index(self, name: str) -> int:
        try:
            return self.feature_names.index(name)
        except ValueError:
            raise SchemaError(f"unknown feature {name!r}") from None

    def label_index(self, label: str) -> int:
        try:
            return self.target_labels.index(label)
        except ValueError:
            raise SchemaError(f"unknown label {label!r}") from None


@dataclass(frozen=True)
class Instance:
    """One row: values aligned 1:1 with schema features (str or float)."""

    values: tuple

    def validate(self, schema: FeatureSchema) -> None:
        if len(self.values) != schema.k:
            raise ValidationError(
                f"instance has {len(self.values)} values, schema expects {schema.k}"
            )
        for spec, value in zip(schema.features, self.values):
            spec.validate_value(value)

    def value_of(self, schema: FeatureSchema, name: str):
        return self.values[schema.feature_index(name)]

    def as_dict(self, schema: FeatureSchema) -> dict:
        return {spec.name: value for spec, value in zip(schema.features, self.values)}

    def replace(self, index: int, value) -> "Instance":
        vals = list(self.values)
        vals[index] = value
        return Instance(tuple(vals))


@dataclass(frozen=True)
class LabeledDataset:
    """Validated rows with their class labels."""

    schema: FeatureSchema
    rows: tuple[Instance, ...]
    labels: tuple[str, ...]

    def __post_init__(self):
        if len(self.rows) != len(self.labels):
            raise ValidationError(
                f"{len(self.rows)} rows but {len(self.labels)} labels"
            )
        for label in self.labels:
            if label not in self.schema.target_labels:
                raise ValidationError(f"label {label!r} not in target_labels")

    def __len__(self) -> int:
        return len(self.rows)


def _parse_cell(raw: str, spec: FeatureSpec, row_index: int):
    text = raw.strip()
    if text == "":
        raise ValidationError(
            f"row {row_index}: missing value in column {spec.name!r}",
            row=row_index,
            column=spec.name,
        )
    if spec.is_categorical:
        if text not in spec.values:
            raise ValidationError(
                f"row {row_index}: value {text!r} not admissible for column {spec.name!r}",
                row=row_index,
                column=spec.name,
            )
        return text
    try:
        value = float(text)
    except ValueError:
        raise ValidationError(
            f"row {row_index}: {text!r} is not numeric in column {spec.name!r}",
            row=row_index,
            column=spec.name,
        ) from None
    if not (spec.lower <= value <= spec.upper):
        raise ValidationError(
            f"row {row_index}: {value} outside [{spec.lower}, {spec.upper}] "
            f"in column {spec.name!r}",
            row=row_index,
            column=spec.name,
        )
    return value


def load_csv(path, schema: FeatureSchema) -> LabeledDataset:
    """Load and validate a headed CSV against *schema*.

    The header must contain every schema feature plus the target column
    (order-insensitive, extra columns rejected). Any invalid row aborts the
    load with its row index, column, and offending value; there is no
    silent coercion or imputation.
    """
    try:
        handle = open(path, newline="", encoding="utf-8")
    except FileNotFoundError:
        raise SchemaError(f"dataset file not found: {path}") from None
    with handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file, expected a header row") from None
        header = [h.strip() for h in header]
        expected = set(schema.feature_names) | {schema.target_name}
        if set(header) != expected:
            missing = sorted(expected - set(header))
            extra = sorted(set(header) - expected)
            raise SchemaError(
                f"{path}: header mismatch (missing: {missing}, unexpected: {extra})"
            )
        if len(header) != len(expected):
            raise SchemaError(f"{path}: duplicate header columns")
        col_of = {name: header.index(name) for name in header}

        rows: list[Instance] = []
        labels: list[str] = []
        for row_index, record in enumerate(reader):
            if len(record) != len(header):
                raise ValidationError(
                    f"row {row_index}: expected {len(header)} cells, got {len(record)}",
                    row=row_index,
                )
            values = tuple(
                _parse_cell(record[col_of[spec.name]], spec, row_index)
                for spec in schema.features
            )
            label = record[col_of[schema.target_name]].strip()
            if label not in schema.target_labels:
                raise ValidationError(
                    f"row {row_index}: label {label!r} not in target_labels",
                    row=row_index,
                    column=schema.target_name,
                )
            rows.append(Instance(values))
            labels.append(label)
    return LabeledDataset(schema=schema, rows=tuple(rows), labels=tuple(labels))


def format_value(value) -> str:
    """Render a feature value for CSV/prompt output (ints without '.0')."""
    if isinstance(value, float) and value.is_integer():
        return str(int(value))
    return str(value)


def save_csv(dataset: LabeledDataset, path) -> None:
    """Write a dataset back to CSV (feature columns in schema order, then target)."""
    schema = dataset.schema
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(list(schema.feature_names) + [schema.target_name])
        for instance, label in zip(dataset.rows, dataset.labels):
            writer.writerow([format_value(v) for v in instance.values] + [label])


def encode(instance: Instance, schema: FeatureSchema) -> list[float]:
    """Map an instance to a real vector of length k.

    Categorical values become their index in the declared admissible list;
    numeric values pass through. The instance must already be valid.
    """
    out: list[float] = []
    for spec, value in zip(schema.features, instance.values):
        if spec.is_categorical:
            out.append(float(spec.values.index(value)))
        else:
            out.append(float(value))
    return out


# --- schema files ---------------------------------------------------------
#
# Schemas live in YAML:
#
#   target: income
#   labels: ["<=50K", ">50K"]
#   features:
#     - name: age
#       kind: numeric
#       lower: 17
#       upper: 90
#       integer: true
#     - name: workclass
#       kind: categorical
#       values: [Government, Private, Self-Employed, Other]
#       mutable: true
#
# `mutable` defaults to true, `integer` to false.


def _spec_from_mapping(entry: dict) -> FeatureSpec:
    if not isinstance(entry, dict) or "name" not in entry or "kind" not in entry:
        raise SchemaError(f"feature entry needs 'name' and 'kind': {entry!r}")
    kind = entry["kind"]
    if kind == "categorical":
        values = entry.get("values")
        if not isinstance(values, list):
            raise SchemaError(f"categorical feature {entry['name']!r} needs a 'values' list")
        return FeatureSpec(
            name=str(entry["name"]),
            kind="categorical",
            values=tuple(str(v) for v in values),
            mutable=bool(entry.get("mutable", True)),
        )
    if kind == "numeric":
        if "lower" not in entry or "upper" not in entry:
            raise SchemaError(f"numeric feature {entry['name']!r} needs 'lower' and 'upper'")
        return FeatureSpec(
            name=str(entry["name"]),
            kind="numeric",
            lower=float(entry["lower"]),
            upper=float(entry["upper"]),
            integer=bool(entry.get("integer", False)),
            mutable=bool(entry.get("mutable", True)),
        )
    raise SchemaError(f"feature {entry.get('name')!r}: unknown kind {kind!r}")


def schema_from_mapping(doc: dict) -> FeatureSchema:
    if not isinstance(doc, dict):
        raise SchemaError("schema document must be a mapping")
    for key in ("target", "labels", "features"):
        if key not in doc:
            raise SchemaError(f"schema document missing {key!r}")
    labels = doc["labels"]
    if not isinstance(labels, list) or len(labels) != 2:
        raise SchemaError("'labels' must list exactly two class labels")
    return FeatureSchema(
        features=tuple(_spec_from_mapping(entry) for entry in doc["features"]),
        target_name=str(doc["target"]),
        target_labels=(str(labels[0]), str(labels[1])),
    )


def schema_to_mapping(schema: FeatureSchema) -> dict:
    features = []
    for spec in schema.features:
        if spec.is_categorical:
            entry = {
                "name": spec.name,
                "kind": "categorical",
                "values": list(spec.values),
                "mutable": spec.mutable,
            }
        else:
            entry = {
                "name": spec.name,
                "kind": "numeric",
                "lower": spec.lower,
                "upper": spec.upper,
                "integer": spec.integer,
                "mutable": spec.mutable,
            }
        features.append(entry)
    return {
        "target": schema.target_name,
        "labels": list(schema.target_labels),
        "features": features,
    }


def load_schema_file(path) -> FeatureSchema:
    try:
        with open(path, encoding="utf-8") as handle:
            doc = yaml.safe_load(handle)
    except FileNotFoundError:
        raise SchemaError(f"schema file not found: {path}") from None
    except yaml.YAMLError as exc:
        raise SchemaError(f"{path}: malformed schema file: {exc}") from None
    return schema_from_mapping(doc)


def save_schema_file(schema: FeatureSchema, path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        yaml.safe_dump(schema_to_mapping(schema), handle, sort_keys=False)
