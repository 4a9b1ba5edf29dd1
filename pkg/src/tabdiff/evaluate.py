"""Synthetic-data quality scores: fidelity, utility, synthesis, privacy.

Column fidelity compares marginals (1 - KS for numerics, 1 - TVD/2 for
categoricals), row fidelity compares pairwise dependence (Pearson gap for
numeric pairs, joint-distribution TVD for categorical pairs), utility is the
mean accuracy of classifiers trained on synthetic rows and tested on real
rows, synthesis is the fraction of generated rows that match no real row,
and privacy is the median distance from each synthetic row to its closest
real row.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from sklearn.linear_model import LogisticRegression
from sklearn.naive_bayes import GaussianNB
from sklearn.tree import DecisionTreeClassifier

from . import kernels
from .errors import (
    EmptyColumn,
    EmptyDataset,
    MissingLabelColumn,
    SchemaMismatch,
)
from .schema import Dataset


def ks_statistic(real_values, synth_values) -> float:
    """Two-sample Kolmogorov-Smirnov statistic, exact over all thresholds."""
    a = np.sort(np.asarray(real_values, dtype=np.float64))
    b = np.sort(np.asarray(synth_values, dtype=np.float64))
    if a.size == 0 or b.size == 0:
        raise EmptyColumn("ks_statistic needs non-empty columns")
    grid = np.concatenate([a, b])
    cdf_a = np.searchsorted(a, grid, side="right") / a.size
    cdf_b = np.searchsorted(b, grid, side="right") / b.size
    return float(np.abs(cdf_a - cdf_b).max())


def tvd(real_codes, synth_codes, n_categories: int) -> float:
    """Total variation distance (unhalved): sum of |frequency differences|."""
    a = np.asarray(real_codes, dtype=np.int64)
    b = np.asarray(synth_codes, dtype=np.int64)
    if a.size == 0 or b.size == 0:
        raise EmptyColumn("tvd needs non-empty columns")
    pa = np.bincount(a, minlength=n_categories) / a.size
    pb = np.bincount(b, minlength=n_categories) / b.size
    return float(np.abs(pa - pb).sum())


def pearson(x, y) -> float:
    """Population Pearson correlation, cov / (sigma_x * sigma_y)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    cov = ((x - x.mean()) * (y - y.mean())).mean()
    return float(cov / (x.std() * y.std()))


def _check_schemas(real: Dataset, synth: Dataset) -> None:
    if real.schema.columns != synth.schema.columns:
        raise SchemaMismatch("datasets have different schemas")


def fidelity_column(real: Dataset, synth: Dataset) -> tuple[float, dict[str, float]]:
    """Mean per-column marginal similarity in [0, 1]."""
    _check_schemas(real, synth)
    per_column = {}
    for col in real.schema.columns:
        if col.is_categorical:
            d = tvd(real.columns[col.name], synth.columns[col.name], len(col.vocabulary))
            per_column[col.name] = 1.0 - 0.5 * d
        else:
            per_column[col.name] = 1.0 - ks_statistic(real.columns[col.name],
                                                      synth.columns[col.name])
    aggregate = float(np.mean(list(per_column.values())))
    return aggregate, per_column


def _joint_tvd(a1, a2, b1, b2, n1: int, n2: int) -> float:
    # TVD over the contingency (joint) distribution of two categorical columns.
    ja = a1 * n2 + a2
    jb = b1 * n2 + b2
    pa = np.bincount(ja, minlength=n1 * n2) / ja.size
    pb = np.bincount(jb, minlength=n1 * n2) / jb.size
    return float(np.abs(pa - pb).sum())


def fidelity_row(real: Dataset, synth: Dataset) -> tuple[float, dict[str, float], dict]:
    """Mean per-pair dependence similarity over same-kind column pairs.

    Mixed-kind pairs are not scored. Numeric pairs where either dataset has
    a constant column score 1.0 if both datasets are degenerate on the same
    columns, else 0.5; such pairs are listed in the returned notes.
    """
    _check_schemas(real, synth)
    if real.n_rows < 2 or synth.n_rows < 2:
        raise EmptyDataset("fidelity_row needs at least 2 rows per dataset")
    per_pair: dict[str, float] = {}
    notes: dict = {"degenerate_pairs": [], "skipped_mixed_pairs": 0}

    numeric = real.schema.numeric_columns
    for i in range(len(numeric)):
        for j in range(i + 1, len(numeric)):
            a, b = numeric[i].name, numeric[j].name
            key = f"{a}|{b}"
            real_const = _constants(real, a, b)
            synth_const = _constants(synth, a, b)
            if real_const or synth_const:
                per_pair[key] = 1.0 if real_const == synth_const else 0.5
                notes["degenerate_pairs"].append(key)
                continue
            rho_real = pearson(real.columns[a], real.columns[b])
            rho_synth = pearson(synth.columns[a], synth.columns[b])
            per_pair[key] = 1.0 - 0.5 * abs(rho_real - rho_synth)

    cats = real.schema.categorical_columns
    for i in range(len(cats)):
        for j in range(i + 1, len(cats)):
            a, b = cats[i], cats[j]
            key = f"{a.name}|{b.name}"
            d = _joint_tvd(real.columns[a.name], real.columns[b.name],
                           synth.columns[a.name], synth.columns[b.name],
                           len(a.vocabulary), len(b.vocabulary))
            per_pair[key] = 1.0 - 0.5 * d

    notes["skipped_mixed_pairs"] = len(numeric) * len(cats)
    aggregate = float(np.mean(list(per_pair.values()))) if per_pair else 1.0
    return aggregate, per_pair, notes


def _constants(data: Dataset, *names) -> frozenset:
    return frozenset(n for n in names
                     if data.columns[n].min() == data.columns[n].max())


def _dcr_matrices(real: Dataset, synth: Dataset):
    # Numeric columns standardized with the real dataset's statistics;
    # zero-variance columns fall back to unit scale.
    real_num = real.numeric_matrix()
    synth_num = synth.numeric_matrix()
    if real_num.shape[1]:
        mean = real_num.mean(axis=0)
        std = real_num.std(axis=0)
        std[std == 0.0] = 1.0
        real_num = (real_num - mean) / std
        synth_num = (synth_num - mean) / std
    return synth_num, real_num, synth.categorical_matrix(), real.categorical_matrix()


def privacy_dcr(real: Dataset, synth: Dataset) -> float:
    """Median over synthetic rows of the distance to the closest real row."""
    _check_schemas(real, synth)
    if real.n_rows == 0 or synth.n_rows == 0:
        raise EmptyDataset("privacy_dcr needs non-empty datasets")
    synth_num, real_num, synth_cat, real_cat = _dcr_matrices(real, synth)
    distances = kernels.min_euclidean(synth_num, real_num, synth_cat, real_cat)
    return float(np.median(distances))


def synthesis_score(real: Dataset, synth: Dataset) -> float:
    """Fraction of synthetic rows that are novel (match no real row).

    A synthetic row matches a real row when every categorical cell is equal
    and every numeric cell lies within 1% of the real value (absolute 1e-9
    when the real value is 0).
    """
    _check_schemas(real, synth)
    if real.n_rows == 0 or synth.n_rows == 0:
        raise EmptyDataset("synthesis_score needs non-empty datasets")
    matched = kernels.match_mask(synth.numeric_matrix(), real.numeric_matrix(),
                                 synth.categorical_matrix(), real.categorical_matrix())
    return float(1.0 - matched.mean())


# --- utility ----------------------------------------------------------------

def _feature_matrix(data: Dataset, label_column: str, num_mean, num_std):
    blocks = []
    for col in data.schema.columns:
        if col.name == label_column:
            continue
        values = data.columns[col.name]
        if col.is_categorical:
            onehot = np.zeros((data.n_rows, len(col.vocabulary)))
            onehot[np.arange(data.n_rows), values] = 1.0
            blocks.append(onehot)
        else:
            j = [c.name for c in data.schema.numeric_columns].index(col.name)
            blocks.append(((values - num_mean[j]) / num_std[j])[:, None])
    if not blocks:
        return np.zeros((data.n_rows, 0))
    return np.concatenate(blocks, axis=1)


def utility(synth_train: Dataset, real_test: Dataset, label_column: str,
            seed: int = 0) -> tuple[float, dict[str, float]]:
    """Train each classifier on synthetic rows, report accuracy on real rows."""
    _check_schemas(synth_train, real_test)
    col = synth_train.schema.find(label_column)
    if col is None or not col.is_categorical:
        raise MissingLabelColumn(f"label column {label_column!r} missing or not categorical")

    num = synth_train.numeric_matrix()
    if num.shape[1]:
        mean = num.mean(axis=0)
        std = num.std(axis=0)
        std[std == 0.0] = 1.0
    else:
        mean = std = np.zeros(0)
    x_train = _feature_matrix(synth_train, label_column, mean, std)
    x_test = _feature_matrix(real_test, label_column, mean, std)
    y_train = synth_train.columns[label_column]
    y_test = real_test.columns[label_column]

    classifiers = {
        "logistic_regression": LogisticRegression(max_iter=2000),
        "naive_bayes": GaussianNB(),
        "decision_tree": DecisionTreeClassifier(max_depth=8, random_state=seed),
    }
    per_classifier = {}
    for name, clf in classifiers.items():
        if len(np.unique(y_train)) < 2:
            # Degenerate synthetic labels: predict the single seen class.
            pred = np.full(y_test.shape, y_train[0])
        else:
            clf.fit(x_train, y_train)
            pred = clf.predict(x_test)
        per_classifier[name] = float((pred == y_test).mean())
    return float(np.mean(list(per_classifier.values()))), per_classifier


# --- report ------------------------------------------------------------------

@dataclass
class EvaluationReport:
    fidelity_column: float
    fidelity_column_detail: dict[str, float]
    fidelity_row: float
    fidelity_row_detail: dict[str, float]
    utility: float | None      # None when the schema has no label column
    utility_detail: dict[str, float]
    synthesis: float
    privacy_dcr: float
    metadata: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "fidelity_column": self.fidelity_column,
            "fidelity_column_detail": self.fidelity_column_detail,
            "fidelity_row": self.fidelity_row,
            "fidelity_row_detail": self.fidelity_row_detail,
            "utility": self.utility,
            "utility_detail": self.utility_detail,
            "synthesis": self.synthesis,
            "privacy_dcr": self.privacy_dcr,
            "metadata": self.metadata,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def summary_row(self) -> dict[str, float]:
        return {
            "Fidelity Column": self.fidelity_column,
            "Fidelity Row": self.fidelity_row,
            "Utility": self.utility,
            "Synthesis": self.synthesis,
            "Privacy": self.privacy_dcr,
        }


HEADLINE_METRICS = ("Fidelity Column", "Fidelity Row", "Utility", "Synthesis", "Privacy")


def render_table(rows: dict[str, dict]) -> str:
    """Plain-text score table: one line per model, five metric columns.

    Each row value is either a float or a (mean, std) tuple rendered as
    ``mean +/- std``.
    """
    name_width = max([len(n) for n in rows] + [5])
    header = "Model".ljust(name_width) + "".join(m.rjust(18) for m in HEADLINE_METRICS)
    lines = [header, "-" * len(header)]
    for name, scores in rows.items():
        cells = []
        for metric in HEADLINE_METRICS:
            value = scores[metric]
            if value is None:
                cells.append("n/a".rjust(18))
            elif isinstance(value, tuple):
                cells.append(f"{value[0]:.3f} +/- {value[1]:.3f}".rjust(18))
            else:
                cells.append(f"{value:.3f}".rjust(18))
        lines.append(name.ljust(name_width) + "".join(cells))
    return "\n".join(lines)


def evaluate_all(real_train: Dataset, real_test: Dataset, synth: Dataset,
                 seed: int = 0) -> EvaluationReport:
    """Full scoring pass.

    Fidelity and utility are measured against the held-out test rows;
    synthesis and the privacy distance are measured against the training
    rows, since those are what a leaky generator would reproduce.
    """
    _check_schemas(real_train, synth)
    _check_schemas(real_test, synth)

    fc, fc_detail = fidelity_column(real_test, synth)
    fr, fr_detail, fr_notes = fidelity_row(real_test, synth)

    label_column = synth.schema.label_column
    if label_column is not None:
        util, util_detail = utility(synth, real_test, label_column, seed)
    else:
        util, util_detail = None, {}

    synth_score = synthesis_score(real_train, synth)
    dcr = privacy_dcr(real_train, synth)

    metadata = {
        "seed": seed,
        "n_real_train": real_train.n_rows,
        "n_real_test": real_test.n_rows,
        "n_synth": synth.n_rows,
        "label_column": label_column,
        "classifiers": sorted(util_detail) if util_detail else [],
        "classifier_zoo_note": "3-classifier zoo: logistic regression, Gaussian "
                               "naive Bayes, depth-limited decision tree",
        "fidelity_row_notes": fr_notes,
    }
    return EvaluationReport(fc, fc_detail, fr, fr_detail, util, util_detail,
                            synth_score, dcr, metadata)
