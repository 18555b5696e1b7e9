"""Training loop: Adam + binary cross-entropy with early stopping.

Checkpoints the epoch with the lowest validation loss and stops after
``patience`` epochs without improvement.  Deterministic for a given seed up
to the CPU backend's guarantees.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
import torch
import torch.nn as nn
from torch.utils.data import DataLoader, Dataset

from .model import BlockagePredictor


@dataclass
class TrainSpec:
    learning_rate: float = 1e-3
    max_epochs: int = 30
    patience: int = 5
    batch_size: int = 32
    threshold: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if not self.patience < self.max_epochs:
            raise ValueError("patience must be smaller than max_epochs")


@dataclass
class EpochLog:
    epoch: int
    train_loss: float
    val_loss: Optional[float]


@dataclass
class TrainResult:
    model: BlockagePredictor
    log: List[EpochLog] = field(default_factory=list)
    best_epoch: int = -1
    best_val_loss: float = math.inf


def _loader(dataset: Dataset, spec: TrainSpec, shuffle: bool) -> DataLoader:
    gen = torch.Generator()
    gen.manual_seed(spec.seed)
    return DataLoader(dataset, batch_size=spec.batch_size, shuffle=shuffle, generator=gen)


def _epoch_loss(model, loader, criterion) -> float:
    model.eval()
    total = 0.0
    count = 0
    with torch.no_grad():
        for windows, labels in loader:
            probs = model(windows)
            total += criterion(probs, labels).item() * len(labels)
            count += len(labels)
    return total / max(count, 1)


def train_model(
    train_set: Dataset,
    val_set: Optional[Dataset],
    spec: TrainSpec = TrainSpec(),
    model: Optional[BlockagePredictor] = None,
    obs_window: int = 8,
    stop_below_train_loss: Optional[float] = None,
    verbose: bool = False,
) -> TrainResult:
    """Fit the predictor; returns the best-validation checkpoint.

    Without a validation set the early-stopping criterion is skipped and the
    final weights are returned (used by the overfit sanity check, optionally
    with ``stop_below_train_loss`` as its exit condition).
    """
    torch.manual_seed(spec.seed)
    if model is None:
        model = BlockagePredictor(obs_window=obs_window)
    criterion = nn.BCELoss()
    optimizer = torch.optim.Adam(model.parameters(), lr=spec.learning_rate)
    train_loader = _loader(train_set, spec, shuffle=True)
    val_loader = _loader(val_set, spec, shuffle=False) if val_set is not None else None

    result = TrainResult(model=model)
    best_state = None
    since_best = 0
    for epoch in range(spec.max_epochs):
        model.train()
        total = 0.0
        count = 0
        for windows, labels in train_loader:
            optimizer.zero_grad()
            probs = model(windows)
            loss = criterion(probs, labels)
            if not torch.isfinite(loss):
                raise RuntimeError(
                    f"non-finite training loss at epoch {epoch} "
                    f"(batch mean prob {probs.mean().item():.3g})"
                )
            loss.backward()
            optimizer.step()
            total += loss.item() * len(labels)
            count += len(labels)
        train_loss = total / max(count, 1)

        val_loss = _epoch_loss(model, val_loader, criterion) if val_loader else None
        result.log.append(EpochLog(epoch=epoch, train_loss=train_loss, val_loss=val_loss))
        if verbose:
            shown = "n/a" if val_loss is None else f"{val_loss:.4f}"
            print(f"epoch {epoch:2d}: train {train_loss:.4f}  val {shown}", flush=True)

        if val_loss is not None:
            if val_loss < result.best_val_loss:
                result.best_val_loss = val_loss
                result.best_epoch = epoch
                best_state = copy.deepcopy(model.state_dict())
                since_best = 0
            else:
                since_best += 1
                if since_best >= spec.patience:
                    break
        if stop_below_train_loss is not None and train_loss < stop_below_train_loss:
            break

    if best_state is not None:
        model.load_state_dict(best_state)
    return result


def predict_scores(model: BlockagePredictor, dataset: Dataset, batch_size: int = 32):
    """Soft predictions for every sample, in dataset order."""
    model.eval()
    loader = DataLoader(dataset, batch_size=batch_size, shuffle=False)
    scores = []
    with torch.no_grad():
        for windows, _labels in loader:
            scores.append(model(windows).numpy())
    return np.concatenate(scores) if scores else np.empty(0)


def save_model(path: str, model: BlockagePredictor, spec: TrainSpec) -> None:
    torch.save(
        {
            "format": "neuralblock-model-v1",
            "obs_window": model.obs_window,
            "spec": vars(spec),
            "state_dict": model.state_dict(),
        },
        path,
    )


def load_model(path: str) -> BlockagePredictor:
    payload = torch.load(path, map_location="cpu", weights_only=False)
    if payload.get("format") != "neuralblock-model-v1":
        raise ValueError(f"{path}: unknown model format {payload.get('format')!r}")
    model = BlockagePredictor(obs_window=int(payload["obs_window"]))
    model.load_state_dict(payload["state_dict"])
    model.eval()
    return model
