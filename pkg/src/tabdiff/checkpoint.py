"""Single-file model container.

Layout: magic ``FNDF``, little-endian uint32 format version, little-endian
uint32 header length, UTF-8 JSON header, then raw little-endian float32
array payloads at the offsets the header's array directory declares. Scalar
parameters (scaler statistics, hyperparameters, provenance) live in the
header at full precision; only bulk arrays go to the payload.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np

from .diffusion import NoiseSchedule, linear_schedule
from .embedding import EmbeddingMatrix
from .errors import CorruptCheckpoint
from .network import DenoiserNetwork
from .scalers import NumericScaler
from .schema import TableSchema

MAGIC = b"FNDF"
FORMAT_VERSION = 1


@dataclass
class ModelCheckpoint:
    schema: TableSchema
    scaler: NumericScaler
    embeddings: EmbeddingMatrix
    net: DenoiserNetwork
    schedule: NoiseSchedule
    provenance: dict

    @property
    def label_prior(self) -> np.ndarray | None:
        counts = self.provenance.get("label_counts")
        if counts is None:
            return None
        return np.asarray(counts, dtype=np.float64)


def _scaler_header(scaler: NumericScaler) -> dict:
    doc = {"method": scaler.method, "columns": list(scaler.column_names)}
    for name in ("mean", "std", "lam", "t_lo", "t_hi"):
        arr = getattr(scaler, name)
        if arr is not None:
            doc[name] = [float(v) for v in arr]
    return doc


def _scaler_from_header(doc: dict, quantiles) -> NumericScaler:
    kwargs = {}
    for name in ("mean", "std", "lam", "t_lo", "t_hi"):
        if name in doc:
            kwargs[name] = np.asarray(doc[name], dtype=np.float64)
    return NumericScaler(doc["method"], tuple(doc["columns"]),
                         quantiles=quantiles, **kwargs)


def save_checkpoint(path, schema: TableSchema, scaler: NumericScaler,
                    embeddings: EmbeddingMatrix, net: DenoiserNetwork,
                    schedule_params: dict, provenance: dict) -> None:
    arrays: list[tuple[str, np.ndarray]] = [("embedding_weights", embeddings.weights)]
    for name in net.param_names():
        arrays.append((f"net/{name}", net.params[name]))
    if scaler.quantiles is not None:
        arrays.append(("scaler_quantiles", scaler.quantiles))

    directory = []
    payloads = []
    offset = 0
    for name, arr in arrays:
        raw = np.ascontiguousarray(arr, dtype="<f4").tobytes()
        directory.append({"name": name, "shape": list(arr.shape), "offset": offset})
        payloads.append(raw)
        offset += len(raw)

    header = {
        "schema": schema.to_json_dict(),
        "schema_hash": schema.digest(),
        "scaler": _scaler_header(scaler),
        "network": {
            "input_dim": net.input_dim,
            "hidden_dim": net.hidden_dim,
            "n_hidden": net.n_hidden,
            "n_classes": net.n_classes,
            "activation": net.activation,
            "time_dim": net.time_dim,
        },
        "embedding": {
            "dim": embeddings.dim,
            "offsets": {k: list(v) for k, v in embeddings.offsets.items()},
        },
        "schedule": schedule_params,
        "provenance": provenance,
        "arrays": directory,
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", FORMAT_VERSION))
        fh.write(struct.pack("<I", len(header_bytes)))
        fh.write(header_bytes)
        for raw in payloads:
            fh.write(raw)


def load_checkpoint(path) -> ModelCheckpoint:
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise CorruptCheckpoint(f"cannot read checkpoint: {exc}") from exc

    if len(blob) < 12 or blob[:4] != MAGIC:
        raise CorruptCheckpoint("bad magic bytes")
    version = struct.unpack_from("<I", blob, 4)[0]
    if version != FORMAT_VERSION:
        raise CorruptCheckpoint(f"unsupported format version {version}")
    header_len = struct.unpack_from("<I", blob, 8)[0]
    header_end = 12 + header_len
    if header_end > len(blob):
        raise CorruptCheckpoint("truncated header")
    try:
        header = json.loads(blob[12:header_end].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CorruptCheckpoint(f"unreadable header: {exc}") from exc

    try:
        schema = TableSchema.from_json_dict(header["schema"])
        if schema.digest() != header["schema_hash"]:
            raise CorruptCheckpoint("schema hash mismatch")

        payload = blob[header_end:]
        loaded: dict[str, np.ndarray] = {}
        for entry in header["arrays"]:
            shape = tuple(entry["shape"])
            count = int(np.prod(shape)) if shape else 1
            start = entry["offset"]
            stop = start + 4 * count
            if stop > len(payload):
                raise CorruptCheckpoint(f"array {entry['name']!r} overruns payload")
            loaded[entry["name"]] = np.frombuffer(
                payload[start:stop], dtype="<f4").reshape(shape)

        quantiles = None
        if "scaler_quantiles" in loaded:
            quantiles = loaded["scaler_quantiles"].astype(np.float64)
        scaler = _scaler_from_header(header["scaler"], quantiles)

        emb_doc = header["embedding"]
        embeddings = EmbeddingMatrix(
            emb_doc["dim"],
            loaded["embedding_weights"].astype(np.float32),
            {k: tuple(v) for k, v in emb_doc["offsets"].items()},
        )

        net_doc = header["network"]
        net = DenoiserNetwork(
            net_doc["input_dim"], net_doc["hidden_dim"], net_doc["n_hidden"],
            net_doc["n_classes"], net_doc["activation"], net_doc["time_dim"],
            params={},
        )
        for name in net.param_names():
            key = f"net/{name}"
            if key not in loaded:
                raise CorruptCheckpoint(f"missing network array {key!r}")
            net.params[name] = loaded[key].astype(np.float32)

        sched_doc = header["schedule"]
        schedule = linear_schedule(sched_doc["steps"], sched_doc["beta_start"],
                                   sched_doc["beta_end"])
        provenance = header.get("provenance", {})
    except CorruptCheckpoint:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptCheckpoint(f"malformed checkpoint: {exc}") from exc

    return ModelCheckpoint(schema, scaler, embeddings, net, schedule, provenance)
