"""Diffusion-based synthesizer for mixed categorical/numeric tables."""

from .schema import (
    Column,
    Dataset,
    TableSchema,
    infer_schema,
    load_csv,
    load_schema,
    save_schema,
    split,
    write_csv,
)
from .scalers import NumericScaler, fit_scaler
from .embedding import EmbeddingMatrix, EncodedBatch, decode, encode, encoded_width, init_embeddings
from .network import DenoiserNetwork, backward, forward, init_network, time_embedding
from .optim import AdamState, adam_step, cosine_lr
from .diffusion import NoiseSchedule, forward_sample, linear_schedule, sample, train, training_step
from .evaluate import (
    EvaluationReport,
    evaluate_all,
    fidelity_column,
    fidelity_row,
    ks_statistic,
    pearson,
    privacy_dcr,
    render_table,
    synthesis_score,
    tvd,
    utility,
)
from .checkpoint import ModelCheckpoint, load_checkpoint, save_checkpoint

__version__ = "0.1.0"
