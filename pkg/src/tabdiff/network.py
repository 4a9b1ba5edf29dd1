"""Dense noise-prediction network with hand-derived gradients.

Architecture: the input vector, a sinusoidal step embedding and a class
embedding are each projected (or looked up) to the hidden width and summed,
then passed through a stack of dense+activation layers and a linear output
head of the input width. Matrix work stays in numpy (BLAS); loss reductions
accumulate in float64.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NonFiniteLoss, OddDimension

DEFAULT_TIME_DIM = 128


def relu(x):
    return np.maximum(x, 0.0)


def relu_grad(x):
    # Derivative at exactly 0 is defined as 0.
    return (x > 0).astype(x.dtype)


def silu(x):
    s = 1.0 / (1.0 + np.exp(-x))
    return x * s


def silu_grad(x):
    s = 1.0 / (1.0 + np.exp(-x))
    return s * (1.0 + x * (1.0 - s))


ACTIVATIONS = {
    "relu": (relu, relu_grad),
    "silu": (silu, silu_grad),
}


def time_embedding(t, dim: int) -> np.ndarray:
    """Sinusoidal step encoding: pairs (sin(t*w_i), cos(t*w_i)) with
    w_i = 10000^(-2i/dim)."""
    if dim % 2 != 0:
        raise OddDimension(f"time embedding dim must be even, got {dim}")
    t = np.asarray(t, dtype=np.float64)
    half = dim // 2
    freqs = np.power(10000.0, -2.0 * np.arange(half) / dim)
    angles = t[..., None] * freqs
    out = np.empty(t.shape + (dim,), dtype=np.float64)
    out[..., 0::2] = np.sin(angles)
    out[..., 1::2] = np.cos(angles)
    return out


@dataclass
class DenoiserNetwork:
    input_dim: int
    hidden_dim: int
    n_hidden: int
    n_classes: int
    activation: str = "relu"
    time_dim: int = DEFAULT_TIME_DIM
    params: dict[str, np.ndarray] = field(default_factory=dict, repr=False)

    @property
    def dtype(self):
        return self.params["input_w"].dtype

    def param_names(self) -> list[str]:
        names = ["input_w", "input_b", "time_w", "time_b", "label_emb"]
        for i in range(self.n_hidden):
            names += [f"hidden_{i}_w", f"hidden_{i}_b"]
        names += ["out_w", "out_b"]
        return names


def _glorot(rng, fan_in, fan_out, dtype):
    bound = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_in, fan_out)).astype(dtype)


def init_network(input_dim: int, hidden_dim: int, n_hidden: int, n_classes: int,
                 seed, activation: str = "relu", time_dim: int = DEFAULT_TIME_DIM,
                 dtype=np.float32) -> DenoiserNetwork:
    """Glorot-uniform weights, zero biases, small-normal class embeddings."""
    if hidden_dim < 1 or n_hidden < 1:
        raise ValueError("hidden_dim and n_hidden must be >= 1")
    if time_dim % 2 != 0:
        raise OddDimension(f"time embedding dim must be even, got {time_dim}")
    if activation not in ACTIVATIONS:
        raise ValueError(f"unknown activation {activation!r}")
    rng = np.random.default_rng(seed)
    params = {
        "input_w": _glorot(rng, input_dim, hidden_dim, dtype),
        "input_b": np.zeros(hidden_dim, dtype=dtype),
        "time_w": _glorot(rng, time_dim, hidden_dim, dtype),
        "time_b": np.zeros(hidden_dim, dtype=dtype),
        "label_emb": (rng.standard_normal((n_classes, hidden_dim)) * 0.02).astype(dtype),
    }
    for i in range(n_hidden):
        params[f"hidden_{i}_w"] = _glorot(rng, hidden_dim, hidden_dim, dtype)
        params[f"hidden_{i}_b"] = np.zeros(hidden_dim, dtype=dtype)
    params["out_w"] = _glorot(rng, hidden_dim, input_dim, dtype)
    params["out_b"] = np.zeros(input_dim, dtype=dtype)
    return DenoiserNetwork(input_dim, hidden_dim, n_hidden, n_classes,
                           activation, time_dim, params)


def forward(net: DenoiserNetwork, x, t, labels, cache: dict | None = None) -> np.ndarray:
    """Predict the noise component for each row of ``x`` at steps ``t``.

    ``cache``, when provided, collects intermediates for ``backward``.
    """
    p = net.params
    dtype = net.dtype
    act, _ = ACTIVATIONS[net.activation]

    x = np.asarray(x, dtype=dtype)
    labels = np.asarray(labels, dtype=np.int64)
    t = np.broadcast_to(np.asarray(t), (x.shape[0],))
    temb = time_embedding(t, net.time_dim).astype(dtype)

    h = (x @ p["input_w"] + p["input_b"]
         + temb @ p["time_w"] + p["time_b"]
         + p["label_emb"][labels])
    pre_acts = []
    hidden_inputs = [h]
    for i in range(net.n_hidden):
        z = h @ p[f"hidden_{i}_w"] + p[f"hidden_{i}_b"]
        pre_acts.append(z)
        h = act(z)
        hidden_inputs.append(h)
    out = h @ p["out_w"] + p["out_b"]

    if cache is not None:
        cache.update(x=x, labels=labels, temb=temb,
                     pre_acts=pre_acts, hidden_inputs=hidden_inputs)
    return out


def backward(net: DenoiserNetwork, x, t, labels, target) -> tuple[float, dict[str, np.ndarray]]:
    """Mean-squared-error loss against ``target`` and its exact gradients.

    Returns (loss, grads); ``grads["x"]`` is the gradient with respect to the
    input rows, used to train the category embeddings jointly.
    """
    p = net.params
    _, act_grad = ACTIVATIONS[net.activation]
    cache: dict = {}
    out = forward(net, x, t, labels, cache=cache)

    target = np.asarray(target, dtype=net.dtype)
    diff = out - target
    loss = float(np.mean(diff.astype(np.float64) ** 2))
    if not math.isfinite(loss):
        raise NonFiniteLoss(f"loss diverged to {loss}")

    n_out = diff.size
    grads: dict[str, np.ndarray] = {}
    d_out = diff * np.asarray(2.0 / n_out, dtype=net.dtype)

    h_last = cache["hidden_inputs"][-1]
    grads["out_w"] = h_last.T @ d_out
    grads["out_b"] = d_out.sum(axis=0)
    d_h = d_out @ p["out_w"].T

    for i in range(net.n_hidden - 1, -1, -1):
        d_z = d_h * act_grad(cache["pre_acts"][i])
        grads[f"hidden_{i}_w"] = cache["hidden_inputs"][i].T @ d_z
        grads[f"hidden_{i}_b"] = d_z.sum(axis=0)
        d_h = d_z @ p[f"hidden_{i}_w"].T

    grads["input_w"] = cache["x"].T @ d_h
    grads["input_b"] = d_h.sum(axis=0)
    grads["time_w"] = cache["temb"].T @ d_h
    grads["time_b"] = d_h.sum(axis=0)
    label_grad = np.zeros_like(p["label_emb"])
    np.add.at(label_grad, cache["labels"], d_h)
    grads["label_emb"] = label_grad
    grads["x"] = d_h @ p["input_w"].T
    return loss, grads
