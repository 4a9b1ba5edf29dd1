"""Numeric column scaling: standard, Yeo-Johnson power, and quantile-normal.

All three map each numeric column to a roughly standard-normal scale before
diffusion and invert afterwards. Fitting uses population statistics.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr, ndtri

from .errors import ConstantColumn

SCALER_METHODS = ("standard", "yeo-johnson", "quantile")

# Lambda search grid for the Yeo-Johnson fit: [-2, 2] in steps of 0.01.
YJ_GRID = np.round(np.linspace(-2.0, 2.0, 401), 2)

# Probabilities are clamped away from {0, 1} before the normal inverse CDF.
CDF_EPS = 1e-7


@dataclass
class NumericScaler:
    """Fitted per-column transform parameters for one scaling method.

    standard:     mean, std
    yeo-johnson:  lam, mean, std (post-transform standardization),
                  t_lo/t_hi (transformed training extremes, inverse anchors)
    quantile:     quantiles (n_columns, Q) reference grid
    """

    method: str
    column_names: tuple[str, ...]
    mean: np.ndarray | None = None
    std: np.ndarray | None = None
    lam: np.ndarray | None = None
    t_lo: np.ndarray | None = None
    t_hi: np.ndarray | None = None
    quantiles: np.ndarray | None = field(default=None, repr=False)

    @property
    def n_columns(self) -> int:
        return len(self.column_names)

    def scale(self, values: np.ndarray) -> np.ndarray:
        """Map raw (R, n_columns) values to the diffusion scale, float64."""
        x = np.asarray(values, dtype=np.float64)
        if self.n_columns == 0:
            return x.copy()
        if self.method == "standard":
            return (x - self.mean) / self.std
        if self.method == "yeo-johnson":
            out = np.empty_like(x)
            for j in range(self.n_columns):
                t = yeo_johnson(x[:, j], self.lam[j])
                out[:, j] = (t - self.mean[j]) / self.std[j]
            return out
        out = np.empty_like(x)
        probs = np.linspace(0.0, 1.0, self.quantiles.shape[1])
        for j in range(self.n_columns):
            u = np.interp(x[:, j], self.quantiles[j], probs)
            out[:, j] = ndtri(np.clip(u, CDF_EPS, 1.0 - CDF_EPS))
        return out

    def unscale(self, scaled: np.ndarray) -> np.ndarray:
        """Invert ``scale``. Quantile inputs outside the reference range clamp
        to the extreme reference values; Yeo-Johnson inputs beyond the
        transformed training extremes extend linearly with the boundary
        derivative."""
        y = np.asarray(scaled, dtype=np.float64)
        if self.n_columns == 0:
            return y.copy()
        if self.method == "standard":
            return y * self.std + self.mean
        if self.method == "yeo-johnson":
            out = np.empty_like(y)
            for j in range(self.n_columns):
                t = y[:, j] * self.std[j] + self.mean[j]
                out[:, j] = _yj_inverse_extended(t, self.lam[j], self.t_lo[j], self.t_hi[j])
            return out
        out = np.empty_like(y)
        probs = np.linspace(0.0, 1.0, self.quantiles.shape[1])
        for j in range(self.n_columns):
            u = ndtr(y[:, j])
            out[:, j] = np.interp(u, probs, self.quantiles[j])
        return out


def fit_scaler(train, method: str, quantile_count: int = 1000) -> NumericScaler:
    """Fit a scaler on a Dataset's numeric columns. Constant columns are
    rejected for every method."""
    if method not in SCALER_METHODS:
        raise ValueError(f"unknown scaler method {method!r}")
    names = tuple(c.name for c in train.schema.numeric_columns)
    x = train.numeric_matrix()

    for j, name in enumerate(names):
        if x[:, j].min() == x[:, j].max():
            raise ConstantColumn(f"numeric column {name!r} is constant")

    if method == "standard":
        mean = x.mean(axis=0) if names else np.zeros(0)
        std = x.std(axis=0) if names else np.zeros(0)
        return NumericScaler("standard", names, mean=mean, std=std)

    if method == "yeo-johnson":
        lam = np.empty(len(names))
        mean = np.empty(len(names))
        std = np.empty(len(names))
        t_lo = np.empty(len(names))
        t_hi = np.empty(len(names))
        for j in range(len(names)):
            lam[j] = _select_lambda(x[:, j])
            t = yeo_johnson(x[:, j], lam[j])
            mean[j] = t.mean()
            std[j] = t.std()
            if std[j] == 0.0:
                raise ConstantColumn(f"numeric column {names[j]!r} is constant after transform")
            t_lo[j] = t.min()
            t_hi[j] = t.max()
        return NumericScaler("yeo-johnson", names, mean=mean, std=std, lam=lam,
                             t_lo=t_lo, t_hi=t_hi)

    if quantile_count < 2:
        raise ValueError("quantile_count must be >= 2")
    probs = np.linspace(0.0, 1.0, quantile_count)
    refs = np.empty((len(names), quantile_count))
    for j in range(len(names)):
        refs[j] = np.quantile(x[:, j], probs)
    # Reference grids are held at float32 resolution so that checkpoints,
    # whose payload arrays are 32-bit, reload bit-identically.
    refs = refs.astype(np.float32).astype(np.float64)
    return NumericScaler("quantile", names, quantiles=refs)


def yeo_johnson(x: np.ndarray, lam: float) -> np.ndarray:
    """The piecewise power transform: sign-preserving, defined for all reals."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    if lam != 0.0:
        out[pos] = (np.power(x[pos] + 1.0, lam) - 1.0) / lam
    else:
        out[pos] = np.log1p(x[pos])
    if lam != 2.0:
        out[~pos] = -(np.power(1.0 - x[~pos], 2.0 - lam) - 1.0) / (2.0 - lam)
    else:
        out[~pos] = -np.log1p(-x[~pos])
    return out


def yeo_johnson_inverse(t: np.ndarray, lam: float) -> np.ndarray:
    """Exact inverse of ``yeo_johnson`` on its range."""
    t = np.asarray(t, dtype=np.float64)
    out = np.empty_like(t)
    pos = t >= 0
    if lam != 0.0:
        out[pos] = np.power(1.0 + lam * t[pos], 1.0 / lam) - 1.0
    else:
        out[pos] = np.expm1(t[pos])
    if lam != 2.0:
        out[~pos] = 1.0 - np.power(1.0 - (2.0 - lam) * t[~pos], 1.0 / (2.0 - lam))
    else:
        out[~pos] = -np.expm1(-t[~pos])
    return out


def _yj_inverse_derivative(t: float, lam: float) -> float:
    # d(inverse)/dt at a point inside the valid range.
    if t >= 0:
        if lam == 0.0:
            return float(np.exp(t))
        return float(np.power(1.0 + lam * t, 1.0 / lam - 1.0))
    if lam == 2.0:
        return float(np.exp(-t))
    return float(np.power(1.0 - (2.0 - lam) * t, 1.0 / (2.0 - lam) - 1.0))


def _yj_inverse_extended(t: np.ndarray, lam: float, t_lo: float, t_hi: float) -> np.ndarray:
    """Inverse transform, linearized outside the transformed training span.

    For lambda outside (0, 2) the exact inverse has a bounded domain with an
    unbounded derivative at the edge, so sampler outputs past the training
    span extend linearly from the span boundary instead.
    """
    out = np.empty_like(t)
    inside = (t >= t_lo) & (t <= t_hi)
    out[inside] = yeo_johnson_inverse(t[inside], lam)
    above = t > t_hi
    if above.any():
        x_hi = float(yeo_johnson_inverse(np.array([t_hi]), lam)[0])
        out[above] = x_hi + (t[above] - t_hi) * _yj_inverse_derivative(t_hi, lam)
    below = t < t_lo
    if below.any():
        x_lo = float(yeo_johnson_inverse(np.array([t_lo]), lam)[0])
        out[below] = x_lo + (t[below] - t_lo) * _yj_inverse_derivative(t_lo, lam)
    return out


def yeo_johnson_log_likelihood(x: np.ndarray, lam: float) -> float:
    """Gaussian log-likelihood of the transformed sample, up to constants."""
    with np.errstate(over="ignore"):
        t = yeo_johnson(x, lam)
        var = t.var()
    if not np.isfinite(var) or var <= 0.0:
        return -np.inf
    n = len(x)
    jacobian = np.sign(x) * np.log1p(np.abs(x))
    return float(-0.5 * n * np.log(var) + (lam - 1.0) * jacobian.sum())


def _select_lambda(x: np.ndarray) -> float:
    best_lam = YJ_GRID[0]
    best_ll = -np.inf
    for lam in YJ_GRID:
        ll = yeo_johnson_log_likelihood(x, lam)
        if ll > best_ll:
            best_ll = ll
            best_lam = lam
    return float(best_lam)
