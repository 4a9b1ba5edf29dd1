"""Table schemas, typed column stores, CSV ingestion and deterministic splits.

A schema declares each column as categorical (closed vocabulary) or numeric,
plus an optional label column used for class conditioning. Datasets hold one
numpy array per column: int64 vocabulary indices for categorical columns,
float64 values for numeric ones.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    EmptyFile,
    InvalidFraction,
    MissingColumn,
    SchemaError,
    SchemaNotFound,
    UnknownCategory,
    UnparseableNumeric,
    VocabularyOverflow,
)


@dataclass(frozen=True)
class Column:
    """One schema column. ``vocabulary is None`` means numeric."""

    name: str
    vocabulary: tuple[str, ...] | None = None

    @property
    def is_categorical(self) -> bool:
        return self.vocabulary is not None


@dataclass(frozen=True)
class TableSchema:
    columns: tuple[Column, ...]
    label_column: str | None = None

    def __post_init__(self):
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise SchemaError("duplicate column names")
        for c in self.columns:
            if c.is_categorical:
                if len(c.vocabulary) == 0:
                    raise SchemaError(f"column {c.name!r} has an empty vocabulary")
                if len(set(c.vocabulary)) != len(c.vocabulary):
                    raise SchemaError(f"column {c.name!r} has duplicate vocabulary entries")
        if self.label_column is not None:
            col = self.find(self.label_column)
            if col is None:
                raise SchemaError(f"label column {self.label_column!r} not in schema")
            if not col.is_categorical:
                raise SchemaError(f"label column {self.label_column!r} must be categorical")

    def find(self, name: str) -> Column | None:
        for c in self.columns:
            if c.name == name:
                return c
        return None

    @property
    def names(self) -> list[str]:
        return [c.name for c in self.columns]

    @property
    def categorical_columns(self) -> list[Column]:
        return [c for c in self.columns if c.is_categorical]

    @property
    def numeric_columns(self) -> list[Column]:
        return [c for c in self.columns if not c.is_categorical]

    @property
    def n_classes(self) -> int:
        """Number of conditioning classes (1 when no label column is set)."""
        if self.label_column is None:
            return 1
        return len(self.find(self.label_column).vocabulary)

    def with_label(self, label_column: str | None) -> "TableSchema":
        return TableSchema(self.columns, label_column)

    def to_json_dict(self) -> dict:
        return {
            "columns": [
                {
                    "name": c.name,
                    "kind": "categorical" if c.is_categorical else "numeric",
                    "vocabulary": list(c.vocabulary) if c.is_categorical else None,
                }
                for c in self.columns
            ],
            "label_column": self.label_column,
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "TableSchema":
        try:
            cols = []
            for entry in doc["columns"]:
                kind = entry["kind"]
                if kind == "categorical":
                    cols.append(Column(entry["name"], tuple(entry["vocabulary"])))
                elif kind == "numeric":
                    cols.append(Column(entry["name"], None))
                else:
                    raise SchemaError(f"unknown column kind {kind!r}")
            return cls(tuple(cols), doc.get("label_column"))
        except (KeyError, TypeError) as exc:
            raise SchemaError(f"malformed schema document: {exc}") from exc

    def digest(self) -> str:
        """Deterministic content hash, used to pin checkpoints to their schema."""
        payload = json.dumps(self.to_json_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def load_schema(path) -> TableSchema:
    if not os.path.exists(path):
        raise SchemaNotFound(f"schema file not found: {path}")
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"schema file {path} is not valid JSON: {exc}") from exc
    return TableSchema.from_json_dict(doc)


def save_schema(schema: TableSchema, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(schema.to_json_dict(), fh, indent=2)
        fh.write("\n")


@dataclass
class Dataset:
    """Column store conforming to a schema.

    Categorical columns are int64 vocabulary indices, numeric columns float64.
    Instances are read-only by convention once constructed.
    """

    schema: TableSchema
    columns: dict[str, np.ndarray] = field(repr=False)

    @property
    def n_rows(self) -> int:
        if not self.schema.columns:
            return 0
        return len(self.columns[self.schema.columns[0].name])

    def validate(self) -> None:
        n = self.n_rows
        for col in self.schema.columns:
            values = self.columns[col.name]
            if len(values) != n:
                raise SchemaError(f"column {col.name!r} has inconsistent length")
            if col.is_categorical:
                if n and (values.min() < 0 or values.max() >= len(col.vocabulary)):
                    raise SchemaError(f"column {col.name!r} has out-of-vocabulary codes")
            else:
                if n and not np.isfinite(values).all():
                    raise SchemaError(f"column {col.name!r} has non-finite values")

    def take(self, indices) -> "Dataset":
        idx = np.asarray(indices)
        return Dataset(self.schema, {name: vals[idx] for name, vals in self.columns.items()})

    def categorical_matrix(self) -> np.ndarray:
        """(R, n_categorical) int64 codes in schema order; (R, 0) when none."""
        cats = self.schema.categorical_columns
        if not cats:
            return np.zeros((self.n_rows, 0), dtype=np.int64)
        return np.stack([self.columns[c.name] for c in cats], axis=1)

    def numeric_matrix(self) -> np.ndarray:
        """(R, n_numeric) float64 values in schema order; (R, 0) when none."""
        nums = self.schema.numeric_columns
        if not nums:
            return np.zeros((self.n_rows, 0), dtype=np.float64)
        return np.stack([self.columns[c.name] for c in nums], axis=1)

    def label_codes(self) -> np.ndarray:
        """(R,) int64 conditioning class per row; zeros when no label column."""
        if self.schema.label_column is None:
            return np.zeros(self.n_rows, dtype=np.int64)
        return self.columns[self.schema.label_column]

    @classmethod
    def from_matrices(cls, schema: TableSchema, cat_codes: np.ndarray,
                      num_values: np.ndarray) -> "Dataset":
        columns: dict[str, np.ndarray] = {}
        for j, col in enumerate(schema.categorical_columns):
            columns[col.name] = np.ascontiguousarray(cat_codes[:, j], dtype=np.int64)
        for j, col in enumerate(schema.numeric_columns):
            columns[col.name] = np.ascontiguousarray(num_values[:, j], dtype=np.float64)
        return cls(schema, columns)


def load_csv(path, schema: TableSchema) -> Dataset:
    """Read a CSV under ``schema``, resolving category tokens to indices.

    The header must contain every schema column (order-insensitive); extra
    file columns are rejected. Values must all parse: there is no imputation.
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyFile(f"{path}: no header row") from None
        name_to_pos = {name: i for i, name in enumerate(header)}
        if len(name_to_pos) != len(header):
            raise SchemaError(f"{path}: duplicate header names")
        missing = [c.name for c in schema.columns if c.name not in name_to_pos]
        if missing:
            raise MissingColumn(f"{path}: missing columns {missing}")
        extra = [n for n in header if schema.find(n) is None]
        if extra:
            raise SchemaError(f"{path}: columns {extra} not in schema")

        vocab_maps = {
            c.name: {tok: i for i, tok in enumerate(c.vocabulary)}
            for c in schema.categorical_columns
        }
        raw: dict[str, list] = {c.name: [] for c in schema.columns}
        n_rows = 0
        for row_number, record in enumerate(reader, start=1):
            if len(record) != len(header):
                raise SchemaError(f"{path}: row {row_number} has {len(record)} fields, expected {len(header)}")
            n_rows += 1
            for col in schema.columns:
                token = record[name_to_pos[col.name]]
                if col.is_categorical:
                    code = vocab_maps[col.name].get(token)
                    if code is None:
                        raise UnknownCategory(col.name, row_number, token)
                    raw[col.name].append(code)
                else:
                    try:
                        value = float(token)
                    except ValueError:
                        raise UnparseableNumeric(col.name, row_number, token) from None
                    if not math.isfinite(value):
                        raise UnparseableNumeric(col.name, row_number, token)
                    raw[col.name].append(value)

    if n_rows == 0:
        raise EmptyFile(f"{path}: no data rows")

    columns = {}
    for col in schema.columns:
        dtype = np.int64 if col.is_categorical else np.float64
        columns[col.name] = np.asarray(raw[col.name], dtype=dtype)
    return Dataset(schema, columns)


def write_csv(data: Dataset, path) -> None:
    """Write a Dataset back to CSV; floats use shortest round-trip formatting."""
    schema = data.schema
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(schema.names)
        cols = []
        for col in schema.columns:
            values = data.columns[col.name]
            if col.is_categorical:
                vocab = col.vocabulary
                cols.append([vocab[int(v)] for v in values])
            else:
                cols.append([repr(float(v)) for v in values])
        for i in range(data.n_rows):
            writer.writerow([c[i] for c in cols])


def split(data: Dataset, train_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Deterministic shuffle-split; train gets floor(R * train_fraction) rows."""
    if not (0.0 < train_fraction < 1.0):
        raise InvalidFraction(f"train_fraction must be in (0, 1), got {train_fraction}")
    n = data.n_rows
    perm = np.random.default_rng(seed).permutation(n)
    n_train = int(math.floor(n * train_fraction))
    return data.take(perm[:n_train]), data.take(perm[n_train:])


def infer_schema(path, max_vocab: int = 64) -> TableSchema:
    """Guess a schema from a CSV: all-parseable columns become numeric, the
    rest categorical with sorted deduplicated vocabularies."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyFile(f"{path}: no header row") from None
        values: list[list[str]] = [[] for _ in header]
        n_rows = 0
        for record in reader:
            n_rows += 1
            for i, token in enumerate(record[: len(header)]):
                values[i].append(token)
    if n_rows == 0:
        raise EmptyFile(f"{path}: no data rows")

    columns = []
    for name, column_values in zip(header, values):
        if _all_numeric(column_values):
            columns.append(Column(name, None))
        else:
            vocab = sorted(set(column_values))
            if len(vocab) > max_vocab:
                raise VocabularyOverflow(
                    f"column {name!r} has {len(vocab)} distinct values (max_vocab={max_vocab})"
                )
            columns.append(Column(name, tuple(vocab)))
    return TableSchema(tuple(columns), None)


def _all_numeric(tokens) -> bool:
    for tok in tokens:
        try:
            if not math.isfinite(float(tok)):
                return False
        except ValueError:
            return False
    return True
