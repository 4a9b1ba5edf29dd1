"""Command-line surface: train, sample, evaluate.

Exit codes: 0 success, 2 input/configuration error, 3 training divergence,
4 corrupt checkpoint. Training progress is logged as one JSON object per
epoch on standard error.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .checkpoint import load_checkpoint, save_checkpoint
from .diffusion import linear_schedule, sample, train
from .embedding import encoded_width, init_embeddings
from .errors import CorruptCheckpoint, NonFiniteLoss, TabdiffError, UnknownLabel
from .evaluate import HEADLINE_METRICS, evaluate_all, render_table
from .network import init_network
from .scalers import SCALER_METHODS, fit_scaler
from .schema import load_csv, load_schema, split, write_csv

TRAIN_FRACTION = 0.7
PLATEAU_PATIENCE = 200


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tabdiff",
        description="Train, sample and evaluate a tabular diffusion synthesizer.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="fit a model and write a checkpoint")
    p_train.add_argument("--data", required=True, help="training CSV")
    p_train.add_argument("--schema", required=True, help="schema JSON")
    p_train.add_argument("--epochs", type=int, default=3000)
    p_train.add_argument("--batch-size", type=int, default=512)
    p_train.add_argument("--steps", type=int, default=500, help="diffusion steps")
    p_train.add_argument("--embed-dim", type=int, default=2)
    p_train.add_argument("--hidden", type=int, default=1024)
    p_train.add_argument("--layers", type=int, default=6)
    p_train.add_argument("--lr", type=float, default=1e-3)
    p_train.add_argument("--scaler", choices=SCALER_METHODS, default="standard")
    p_train.add_argument("--freeze-embeddings", action="store_true")
    p_train.add_argument("--seed", type=int, default=0)
    p_train.add_argument("--out", required=True, help="checkpoint path")
    p_train.set_defaults(func=cmd_train)

    p_sample = sub.add_parser("sample", help="generate synthetic rows from a checkpoint")
    p_sample.add_argument("--model", required=True)
    p_sample.add_argument("--n", type=int, required=True)
    p_sample.add_argument("--label", default=None,
                          help="conditioning class token; omitted = draw from training prior")
    p_sample.add_argument("--seed", type=int, default=0)
    p_sample.add_argument("--out", required=True, help="output CSV")
    p_sample.set_defaults(func=cmd_sample)

    p_eval = sub.add_parser("evaluate", help="score a synthetic CSV against real data")
    p_eval.add_argument("--real", required=True)
    p_eval.add_argument("--synth", required=True)
    p_eval.add_argument("--schema", required=True)
    p_eval.add_argument("--label-column", default=None)
    p_eval.add_argument("--seed", type=int, default=0)
    p_eval.add_argument("--repeats", type=int, default=1)
    p_eval.add_argument("--report", required=True, help="output report JSON")
    p_eval.set_defaults(func=cmd_evaluate)
    return parser


def cmd_train(args) -> int:
    schema = load_schema(args.schema)
    data = load_csv(args.data, schema)
    train_data, _ = split(data, TRAIN_FRACTION, args.seed)

    scaler = fit_scaler(train_data, args.scaler)
    emb_seed, net_seed, train_seed = np.random.SeedSequence(args.seed).spawn(3)
    embeddings = init_embeddings(schema, args.embed_dim, emb_seed)
    width = encoded_width(schema, args.embed_dim)
    net = init_network(width, args.hidden, args.layers, schema.n_classes, net_seed)
    schedule = linear_schedule(args.steps)

    def log_fn(epoch, loss, lr):
        print(json.dumps({"epoch": epoch, "loss": loss, "lr": lr}), file=sys.stderr)

    result = train(net, embeddings, scaler, schedule, train_data,
                   epochs=args.epochs, batch_size=args.batch_size,
                   base_lr=args.lr, rng=np.random.default_rng(train_seed),
                   freeze_embeddings=args.freeze_embeddings,
                   patience=PLATEAU_PATIENCE, log_fn=log_fn)

    label_counts = np.bincount(train_data.label_codes(),
                               minlength=schema.n_classes)
    provenance = {
        "seed": args.seed,
        "epochs_run": result["epochs_run"],
        "final_loss": result["final_loss"],
        "label_counts": [int(c) for c in label_counts],
        "config": {
            "epochs": args.epochs,
            "batch_size": args.batch_size,
            "steps": args.steps,
            "embed_dim": args.embed_dim,
            "hidden": args.hidden,
            "layers": args.layers,
            "lr": args.lr,
            "scaler": args.scaler,
            "freeze_embeddings": args.freeze_embeddings,
            "train_fraction": TRAIN_FRACTION,
        },
    }
    save_checkpoint(args.out, schema, scaler, embeddings, net,
                    {"steps": args.steps,
                     "beta_start": float(schedule.beta[0]),
                     "beta_end": float(schedule.beta[-1])},
                    provenance)
    return 0


def cmd_sample(args) -> int:
    ckpt = load_checkpoint(args.model)
    schema = ckpt.schema
    label = None
    if args.label is not None:
        if schema.label_column is None:
            raise UnknownLabel("model was trained without a label column")
        vocab = schema.find(schema.label_column).vocabulary
        if args.label not in vocab:
            raise UnknownLabel(f"label {args.label!r} not in vocabulary {list(vocab)}")
        label = vocab.index(args.label)

    rng = np.random.default_rng(args.seed)
    data = sample(ckpt.net, ckpt.embeddings, ckpt.scaler, ckpt.schedule,
                  args.n, label, rng, schema, label_prior=ckpt.label_prior)
    write_csv(data, args.out)
    return 0


def cmd_evaluate(args) -> int:
    schema = load_schema(args.schema)
    if args.label_column is not None:
        schema = schema.with_label(args.label_column)
    real = load_csv(args.real, schema)
    synth = load_csv(args.synth, schema)

    runs = []
    seeds = [args.seed + i for i in range(max(args.repeats, 1))]
    for seed in seeds:
        real_train, real_test = split(real, TRAIN_FRACTION, seed)
        runs.append(evaluate_all(real_train, real_test, synth, seed))

    if len(runs) == 1:
        doc = runs[0].to_dict()
        table = render_table({"synthetic": runs[0].summary_row()})
    else:
        aggregate = {}
        for metric in HEADLINE_METRICS:
            values = [r.summary_row()[metric] for r in runs]
            if any(v is None for v in values):
                aggregate[metric] = None
            else:
                aggregate[metric] = (float(np.mean(values)), float(np.std(values)))
        doc = {
            "repeats": len(runs),
            "seeds": seeds,
            "aggregate": {
                k: (None if v is None else {"mean": v[0], "std": v[1]})
                for k, v in aggregate.items()
            },
            "runs": [r.to_dict() for r in runs],
        }
        table = render_table({"synthetic": aggregate})

    with open(args.report, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(table)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CorruptCheckpoint as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 4
    except NonFiniteLoss as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    except TabdiffError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
