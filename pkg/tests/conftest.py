import numpy as np
import pytest

from tabdiff.schema import Column, Dataset, TableSchema


@pytest.fixture
def toy_schema():
    return TableSchema(
        (
            Column("color", ("red", "green", "blue")),
            Column("size", ("s", "m", "l", "xl", "xxl")),
            Column("x1", None),
            Column("x2", None),
            Column("label", ("no", "yes")),
        ),
        label_column="label",
    )


def make_toy_dataset(schema, n, seed, rho=0.8):
    """Correlated mixed-type rows: label drives color, color drives size."""
    rng = np.random.default_rng(seed)
    y = rng.integers(0, 2, n)
    pa = np.where(y[:, None] == 0, [0.6, 0.3, 0.1], [0.1, 0.3, 0.6])
    color = (rng.random(n)[:, None] > pa.cumsum(axis=1)).sum(axis=1)
    pb = np.array([
        [0.4, 0.3, 0.1, 0.1, 0.1],
        [0.1, 0.4, 0.3, 0.1, 0.1],
        [0.1, 0.1, 0.4, 0.3, 0.1],
    ])
    size = (rng.random(n)[:, None] > pb[color].cumsum(axis=1)).sum(axis=1)
    xy = rng.multivariate_normal([0.0, 0.0], [[1.0, rho], [rho, 1.0]], size=n)
    return Dataset(schema, {
        "color": color.astype(np.int64),
        "size": size.astype(np.int64),
        "x1": xy[:, 0],
        "x2": xy[:, 1],
        "label": y.astype(np.int64),
    })


@pytest.fixture
def toy_data(toy_schema):
    return make_toy_dataset(toy_schema, 600, seed=7)


def random_dataset(schema, n, seed):
    """Unstructured rows for metric/oracle checks."""
    rng = np.random.default_rng(seed)
    columns = {}
    for col in schema.columns:
        if col.is_categorical:
            columns[col.name] = rng.integers(0, len(col.vocabulary), n)
        else:
            columns[col.name] = rng.normal(0.0, 1.0 + rng.random(), n)
    return Dataset(schema, columns)
