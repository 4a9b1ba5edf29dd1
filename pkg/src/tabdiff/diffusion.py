"""Noise schedule, forward corruption, training loop and ancestral sampling.

Steps are 1-indexed over [1, T]; schedule arrays index as ``arr[t - 1]``. The
cumulative signal product alpha_bar[t-1] gives the closed-form corruption
x_t = sqrt(alpha_bar_t) * x_0 + sqrt(1 - alpha_bar_t) * noise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import embedding as emb_mod
from .embedding import EmbeddingMatrix
from .errors import InvalidRange, StepOutOfRange
from .network import DenoiserNetwork, backward, forward
from .optim import AdamState, adam_step, cosine_lr
from .schema import Dataset, TableSchema

DEFAULT_BETA_START = 1e-4
DEFAULT_BETA_END = 0.02

# Learning-rate multiplier for the embedding group under joint training.
# The noise-matching loss alone rewards collapsing a column's category
# vectors onto each other (a collapsed slice is perfectly predictable), so
# embeddings take much smaller steps than the network to retain their
# geometry while still adapting.
EMBEDDING_LR_SCALE = 0.02


@dataclass
class NoiseSchedule:
    steps: int
    beta: np.ndarray        # (T,) float64
    alpha: np.ndarray       # 1 - beta
    alpha_bar: np.ndarray   # cumulative product of alpha

    @property
    def beta_hat(self) -> np.ndarray:
        """Cumulative noise level, 1 - alpha_bar."""
        return 1.0 - self.alpha_bar


def linear_schedule(steps: int, beta_start: float = DEFAULT_BETA_START,
                    beta_end: float = DEFAULT_BETA_END) -> NoiseSchedule:
    if steps < 1:
        raise InvalidRange(f"steps must be >= 1, got {steps}")
    if not (0.0 < beta_start <= beta_end < 1.0):
        raise InvalidRange(f"need 0 < beta_start <= beta_end < 1, got ({beta_start}, {beta_end})")
    beta = np.linspace(beta_start, beta_end, steps)
    alpha = 1.0 - beta
    return NoiseSchedule(steps, beta, alpha, np.cumprod(alpha))


def forward_sample(schedule: NoiseSchedule, x0: np.ndarray, t, rng: np.random.Generator):
    """Corrupt x0 to step t in closed form; returns (x_t, noise)."""
    t = np.broadcast_to(np.asarray(t, dtype=np.int64), (x0.shape[0],))
    if t.size and (t.min() < 1 or t.max() > schedule.steps):
        raise StepOutOfRange(f"steps must lie in [1, {schedule.steps}]")
    ab = schedule.alpha_bar[t - 1][:, None]
    noise = rng.standard_normal(x0.shape, dtype=x0.dtype)
    signal = np.sqrt(ab).astype(x0.dtype)
    spread = np.sqrt(1.0 - ab).astype(x0.dtype)
    return signal * x0 + spread * noise, noise


def training_step(net: DenoiserNetwork, embeddings: EmbeddingMatrix, scaler,
                  schedule: NoiseSchedule, batch: Dataset, opt: AdamState,
                  rng: np.random.Generator, epoch: int = 0,
                  freeze_embeddings: bool = False) -> float:
    """One optimization step on a row batch; returns the batch loss."""
    flat_idx = emb_mod.flat_category_indices(batch, embeddings)
    scaled = scaler.scale(batch.numeric_matrix())
    return _training_step_encoded(net, embeddings, flat_idx, scaled,
                                  batch.label_codes(), schedule, opt, rng,
                                  epoch, freeze_embeddings)


def _training_step_encoded(net, embeddings, flat_idx, scaled_num, labels,
                           schedule, opt, rng, epoch, freeze_embeddings) -> float:
    x0 = emb_mod.assemble(flat_idx, scaled_num, embeddings)
    t = rng.integers(1, schedule.steps + 1, size=x0.shape[0])
    x_t, noise = forward_sample(schedule, x0, t, rng)
    loss, grads = backward(net, x_t, t, labels, noise)

    params = {name: net.params[name] for name in net.param_names()}
    x_grad = grads.pop("x")
    if not freeze_embeddings and embeddings.total_categories:
        # d loss / d x0 = sqrt(alpha_bar_t) * d loss / d x_t, scattered into
        # the embedding rows each categorical slice was gathered from.
        signal = np.sqrt(schedule.alpha_bar[t - 1]).astype(x_grad.dtype)[:, None]
        x0_grad = x_grad * signal
        emb_grad = np.zeros_like(embeddings.weights)
        dim = embeddings.dim
        for j in range(flat_idx.shape[1]):
            np.add.at(emb_grad, flat_idx[:, j], x0_grad[:, j * dim:(j + 1) * dim])
        params["embedding"] = embeddings.weights
        grads["embedding"] = emb_grad

    adam_step(opt, params, grads, epoch)
    return loss


def train(net: DenoiserNetwork, embeddings: EmbeddingMatrix, scaler,
          schedule: NoiseSchedule, data: Dataset, epochs: int, batch_size: int,
          base_lr: float, rng: np.random.Generator, freeze_embeddings: bool = False,
          patience: int = 200, log_fn=None) -> dict:
    """Mini-batch training over shuffled epochs with plateau early stopping.

    Returns {"epochs_run", "final_loss", "history"}; ``log_fn`` receives
    (epoch, mean_loss, lr) after every epoch.
    """
    opt = AdamState(base_lr=base_lr, total_epochs=epochs,
                    lr_scales={"embedding": EMBEDDING_LR_SCALE})
    flat_idx = emb_mod.flat_category_indices(data, embeddings)
    scaled = scaler.scale(data.numeric_matrix())
    labels = data.label_codes()
    n = data.n_rows

    history = []
    best = np.inf
    since_best = 0
    for epoch in range(epochs):
        perm = rng.permutation(n)
        losses = []
        for start in range(0, n, batch_size):
            idx = perm[start:start + batch_size]
            loss = _training_step_encoded(
                net, embeddings, flat_idx[idx], scaled[idx], labels[idx],
                schedule, opt, rng, epoch, freeze_embeddings)
            losses.append(loss)
        mean_loss = float(np.mean(losses))
        history.append(mean_loss)
        if log_fn is not None:
            log_fn(epoch, mean_loss, cosine_lr(base_lr, epoch, epochs))
        if mean_loss < best:
            best = mean_loss
            since_best = 0
        else:
            since_best += 1
            if since_best >= patience:
                break
    return {"epochs_run": len(history), "final_loss": history[-1], "history": history}


def sample(net: DenoiserNetwork, embeddings: EmbeddingMatrix, scaler,
           schedule: NoiseSchedule, n: int, label, rng: np.random.Generator,
           schema: TableSchema, label_prior=None) -> Dataset:
    """Generate n rows by reverse diffusion from pure noise.

    ``label`` may be a class index, per-row indices, or None; None draws
    per-row classes from ``label_prior`` (uniform over one class when absent).
    The final step adds no noise so decoding sees the posterior mean.
    """
    if label is None:
        if label_prior is not None and len(label_prior) > 1:
            p = np.asarray(label_prior, dtype=np.float64)
            labels = rng.choice(len(p), size=n, p=p / p.sum())
        else:
            labels = np.zeros(n, dtype=np.int64)
    else:
        labels = np.broadcast_to(np.asarray(label, dtype=np.int64), (n,)).copy()

    width = emb_mod.encoded_width(schema, embeddings.dim)
    x = rng.standard_normal((n, width), dtype=np.float32)
    dtype = x.dtype
    for t in range(schedule.steps, 0, -1):
        eps_hat = forward(net, x, t, labels)
        beta_t = schedule.beta[t - 1]
        inv_sqrt_alpha = dtype.type(1.0 / np.sqrt(schedule.alpha[t - 1]))
        noise_coef = dtype.type(beta_t / np.sqrt(1.0 - schedule.alpha_bar[t - 1]))
        x = inv_sqrt_alpha * (x - noise_coef * eps_hat)
        if t > 1:
            sigma = dtype.type(np.sqrt(beta_t))
            x = x + sigma * rng.standard_normal(x.shape, dtype=dtype)
    return emb_mod.decode(x, embeddings, scaler, schema)
