"""Train on an exported range-angle dataset and emit a predictions CSV."""

from __future__ import annotations

import argparse
import csv
import sys

import torch

from .data import RaExport, WindowDataset, subsample
from .model import BlockagePredictor
from .train import TrainSpec, load_model, predict_scores, save_model, train_model


def write_predictions(path: str, rows) -> None:
    """(seq_id, frame_index, score, pred) rows in the radar lane's format."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["seq_id", "frame_index", "score", "pred"])
        for sid, t, score, pred in rows:
            writer.writerow([sid, t, repr(float(score)), int(pred)])


def cmd_train(args):
    torch.set_num_threads(args.threads)
    export = RaExport(args.data)
    train_samples = subsample(export.split_samples("train"), args.train_stride)
    val_samples = export.split_samples("val")
    if not train_samples or not val_samples:
        raise SystemExit("export has an empty train or val split")
    spec = TrainSpec(
        learning_rate=args.lr,
        max_epochs=args.epochs,
        patience=args.patience,
        batch_size=args.batch_size,
        seed=args.seed,
    )
    result = train_model(
        WindowDataset(export, train_samples),
        WindowDataset(export, val_samples),
        spec,
        obs_window=export.obs_window,
        verbose=True,
    )
    save_model(args.out, result.model, spec)
    print(f"best epoch {result.best_epoch} (val loss {result.best_val_loss:.4f}) -> {args.out}")
    return 0


def cmd_predict(args):
    torch.set_num_threads(args.threads)
    export = RaExport(args.data)
    model = load_model(args.model)
    samples = export.split_samples(args.split)
    if not samples:
        raise SystemExit(f"no samples with split {args.split!r}")
    scores = predict_scores(model, WindowDataset(export, samples))
    rows = [
        (s.seq_id, s.frame_index, float(sc), int(sc > 0.5))
        for s, sc in zip(samples, scores)
    ]
    write_predictions(args.out, rows)
    print(f"wrote {len(rows)} predictions to {args.out}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="radarblock-neural",
        description="CNN+LSTM blockage predictor over exported range-angle windows",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="fit on the export's train/val splits")
    p.add_argument("--data", required=True, help="radarblock export-ra output directory")
    p.add_argument("--out", required=True, help="model checkpoint path")
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--patience", type=int, default=5)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--train-stride", type=int, default=1,
                   help="keep every Nth training window (CPU budget control)")
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="predictions CSV for one split")
    p.add_argument("--data", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--split", default="test")
    p.add_argument("--out", required=True)
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=cmd_predict)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
