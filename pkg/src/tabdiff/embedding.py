"""Category embeddings and the row <-> vector mapping around diffusion.

Every category of every categorical column owns one row of a shared weight
matrix; a table row encodes as the concatenation of its categories' vectors
followed by the scaled numeric block. Decoding picks, per column, the
category whose vector is closest to the corresponding slice.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .schema import Dataset, TableSchema


@dataclass
class EmbeddingMatrix:
    dim: int
    weights: np.ndarray                       # (total categories, dim) float32
    offsets: dict[str, tuple[int, int]]       # column name -> [start, stop)

    @property
    def total_categories(self) -> int:
        return self.weights.shape[0]

    def column_block(self, name: str) -> np.ndarray:
        start, stop = self.offsets[name]
        return self.weights[start:stop]

    def min_pairwise_distance(self, name: str) -> float:
        """Smallest distance between two category vectors of one column."""
        block = self.column_block(name).astype(np.float64)
        if block.shape[0] < 2:
            return np.inf
        diffs = block[:, None, :] - block[None, :, :]
        d = np.sqrt((diffs ** 2).sum(axis=2))
        return float(d[np.triu_indices(block.shape[0], k=1)].min())


@dataclass
class EncodedBatch:
    data: np.ndarray      # (rows, width) float32
    labels: np.ndarray    # (rows,) int64 conditioning class


def encoded_width(schema: TableSchema, dim: int) -> int:
    return len(schema.categorical_columns) * dim + len(schema.numeric_columns)


def init_embeddings(schema: TableSchema, dim: int, seed) -> EmbeddingMatrix:
    """Standard-normal weights, one contiguous index range per column."""
    if dim < 1:
        raise ValueError("embedding dim must be >= 1")
    rng = np.random.default_rng(seed)
    offsets = {}
    start = 0
    for col in schema.categorical_columns:
        stop = start + len(col.vocabulary)
        offsets[col.name] = (start, stop)
        start = stop
    weights = rng.standard_normal((start, dim)).astype(np.float32)
    return EmbeddingMatrix(dim, weights, offsets)


def flat_category_indices(data: Dataset, embeddings: EmbeddingMatrix) -> np.ndarray:
    """(R, n_categorical) indices into the shared weight matrix."""
    cats = data.schema.categorical_columns
    codes = data.categorical_matrix()
    starts = np.array([embeddings.offsets[c.name][0] for c in cats], dtype=np.int64)
    return codes + starts[None, :]


def assemble(flat_idx: np.ndarray, scaled_num: np.ndarray,
             embeddings: EmbeddingMatrix) -> np.ndarray:
    """Gather current embedding vectors and append the numeric block."""
    n = flat_idx.shape[0]
    emb_part = embeddings.weights[flat_idx].reshape(n, -1)
    return np.concatenate([emb_part, scaled_num.astype(np.float32)], axis=1)


def encode(data: Dataset, embeddings: EmbeddingMatrix, scaler) -> EncodedBatch:
    flat_idx = flat_category_indices(data, embeddings)
    scaled = scaler.scale(data.numeric_matrix())
    return EncodedBatch(assemble(flat_idx, scaled, embeddings), data.label_codes())


def decode(matrix: np.ndarray, embeddings: EmbeddingMatrix, scaler,
           schema: TableSchema) -> Dataset:
    """Map diffusion-space vectors back to schema-valid rows.

    Each categorical slice snaps to the nearest category vector within its
    column's index range (ties to the lowest index); the numeric block goes
    through the scaler inverse.
    """
    n = matrix.shape[0]
    dim = embeddings.dim
    cats = schema.categorical_columns
    codes = np.zeros((n, len(cats)), dtype=np.int64)
    for j, col in enumerate(cats):
        block = embeddings.column_block(col.name)
        queries = matrix[:, j * dim:(j + 1) * dim]
        codes[:, j] = kernels.nearest_codes(queries, block)
    num_start = len(cats) * dim
    numeric = scaler.unscale(matrix[:, num_start:].astype(np.float64))
    return Dataset.from_matrices(schema, codes, numeric)
