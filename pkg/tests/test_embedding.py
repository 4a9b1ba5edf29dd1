import numpy as np
import pytest

from tabdiff.embedding import (
    decode,
    encode,
    encoded_width,
    init_embeddings,
)
from tabdiff.scalers import fit_scaler
from tabdiff.schema import Column, Dataset, TableSchema

from conftest import make_toy_dataset


def test_offsets_are_contiguous_and_disjoint():
    schema = TableSchema((Column("a", tuple("xy")), Column("b", tuple("abcdefghijk"))))
    emb = init_embeddings(schema, 2, seed=0)
    assert emb.offsets["a"] == (0, 2)
    assert emb.offsets["b"] == (2, 13)
    assert emb.weights.shape == (13, 2)


def test_init_deterministic():
    schema = TableSchema((Column("a", tuple("xyz")),))
    e1 = init_embeddings(schema, 4, seed=9)
    e2 = init_embeddings(schema, 4, seed=9)
    np.testing.assert_array_equal(e1.weights, e2.weights)


def test_credit_default_shaped_width():
    # 10 categorical and 13 numeric columns at dim 2 encode to width 33.
    cols = [Column(f"c{i}", ("a", "b", "c")) for i in range(9)]
    cols += [Column(f"n{i}", None) for i in range(13)]
    cols += [Column("label", ("0", "1"))]
    schema = TableSchema(tuple(cols), label_column="label")
    assert len(schema.categorical_columns) == 10
    assert encoded_width(schema, 2) == 33


def test_encode_width_and_lookup(toy_schema, toy_data):
    scaler = fit_scaler(toy_data, "standard")
    emb = init_embeddings(toy_schema, 2, seed=1)
    batch = encode(toy_data, emb, scaler)
    assert batch.data.shape == (toy_data.n_rows, encoded_width(toy_schema, 2))
    # Categorical slices are exact embedding rows
    code = toy_data.columns["color"][0]
    start, _ = emb.offsets["color"]
    np.testing.assert_array_equal(batch.data[0, :2], emb.weights[start + code])
    np.testing.assert_array_equal(batch.labels, toy_data.columns["label"])


def test_encode_small_width():
    schema = TableSchema((Column("c", ("a", "b")), Column("n", None)))
    data = Dataset(schema, {"c": np.array([0, 1], dtype=np.int64),
                            "n": np.array([1.0, 2.0])})
    scaler = fit_scaler(data, "standard")
    emb = init_embeddings(schema, 2, seed=2)
    batch = encode(data, emb, scaler)
    assert batch.data.shape == (2, 3)


def test_decode_inverts_encode(toy_schema, toy_data):
    for method in ("standard", "yeo-johnson", "quantile"):
        scaler = fit_scaler(toy_data, method)
        emb = init_embeddings(toy_schema, 2, seed=3)
        batch = encode(toy_data, emb, scaler)
        out = decode(batch.data, emb, scaler, toy_schema)
        for col in toy_schema.categorical_columns:
            np.testing.assert_array_equal(out.columns[col.name], toy_data.columns[col.name])
        if method != "quantile":
            for col in toy_schema.numeric_columns:
                np.testing.assert_allclose(out.columns[col.name],
                                           toy_data.columns[col.name], atol=1e-6)


def test_decode_robust_to_small_noise(toy_schema):
    # Oracle: exhaustive pairwise distances on the fitted matrix. Noise of
    # norm under half the per-column minimum leaves every decode unchanged.
    data = make_toy_dataset(toy_schema, 300, seed=11)
    scaler = fit_scaler(data, "standard")
    emb = init_embeddings(toy_schema, 2, seed=4)
    batch = encode(data, emb, scaler)
    rng = np.random.default_rng(5)
    noisy = batch.data.copy()
    for j, col in enumerate(toy_schema.categorical_columns):
        block = emb.column_block(col.name).astype(np.float64)
        d = np.linalg.norm(block[:, None, :] - block[None, :, :], axis=2)
        np.fill_diagonal(d, np.inf)
        margin = d.min()
        assert margin == pytest.approx(emb.min_pairwise_distance(col.name))
        direction = rng.normal(size=(data.n_rows, 2))
        direction /= np.linalg.norm(direction, axis=1, keepdims=True)
        radius = 0.49 * margin * rng.random((data.n_rows, 1))
        noisy[:, 2 * j:2 * j + 2] += (direction * radius).astype(np.float32)
    out = decode(noisy, emb, scaler, toy_schema)
    for col in toy_schema.categorical_columns:
        np.testing.assert_array_equal(out.columns[col.name], data.columns[col.name])


def test_decode_shift_invariance(toy_schema, toy_data):
    # Adding one constant vector to a column's embeddings and to the queries
    # must not change any decoded category.
    scaler = fit_scaler(toy_data, "standard")
    emb = init_embeddings(toy_schema, 2, seed=6)
    batch = encode(toy_data, emb, scaler)
    rng = np.random.default_rng(7)
    noisy = batch.data + rng.normal(0, 0.4, batch.data.shape).astype(np.float32)
    base = decode(noisy, emb, scaler, toy_schema)

    shift = np.float32(rng.normal(0, 10.0, 2))
    col = toy_schema.categorical_columns[1]
    start, stop = emb.offsets[col.name]
    emb.weights[start:stop] += shift
    shifted = noisy.copy()
    shifted[:, 2:4] += shift
    out = decode(shifted, emb, scaler, toy_schema)
    np.testing.assert_array_equal(out.columns[col.name], base.columns[col.name])


def test_single_category_vocabulary():
    schema = TableSchema((Column("only", ("unique",)), Column("n", None)))
    data = Dataset(schema, {"only": np.zeros(5, dtype=np.int64),
                            "n": np.arange(5.0)})
    scaler = fit_scaler(data, "standard")
    emb = init_embeddings(schema, 2, seed=8)
    out = decode(encode(data, emb, scaler).data, emb, scaler, schema)
    np.testing.assert_array_equal(out.columns["only"], data.columns["only"])
