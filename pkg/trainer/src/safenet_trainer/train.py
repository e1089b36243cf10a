"""Training loop: BCE-on-logits segmentation with class rebalancing."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np
import torch

from . import formats
from .model import SegmentationUNet


class DivergenceError(RuntimeError):
    """Loss became non-finite; training aborted."""


@dataclass
class TrainConfig:
    dataset: str
    output: str
    epochs: int = 30
    batch_size: int = 64
    learning_rate: float = 1e-3
    val_split: float = 0.1
    seed: int = 0
    deterministic: bool = True

    def __post_init__(self):
        if not 0 < self.val_split < 1:
            raise ValueError("val_split must be in (0, 1)")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    val_loss: float
    val_accuracy: float
    val_iou: float


def _metrics(logits: torch.Tensor, labels: torch.Tensor) -> tuple[float, float]:
    pred = logits > 0
    truth = labels > 0.5
    correct = (pred == truth).float().mean().item()
    inter = (pred & truth).sum().item()
    union = (pred | truth).sum().item()
    iou = inter / union if union else 1.0
    return correct, iou


def train(config: TrainConfig) -> dict:
    """Train, evaluate on the held-out split, export SFNW weights.

    Deterministic for a fixed seed when config.deterministic is set
    (within torch's CPU determinism guarantees).
    """
    if config.deterministic:
        torch.manual_seed(config.seed)
        torch.use_deterministic_algorithms(True)
    heights, labels = formats.load_dataset(config.dataset)
    if len(heights) < 100:
        raise ValueError("training needs at least 100 samples")
    rng = np.random.default_rng(config.seed)
    order = rng.permutation(len(heights))
    n_val = max(1, int(round(config.val_split * len(heights))))
    val_idx, train_idx = order[:n_val], order[n_val:]

    x_train = torch.from_numpy(heights[train_idx]).unsqueeze(1)
    y_train = torch.from_numpy(labels[train_idx].astype(np.float32)).unsqueeze(1)
    x_val = torch.from_numpy(heights[val_idx]).unsqueeze(1)
    y_val = torch.from_numpy(labels[val_idx].astype(np.float32)).unsqueeze(1)

    # reachability makes unsafe the majority class; rebalance the positives
    n_pos = float(y_train.sum().item())
    n_neg = float(y_train.numel() - n_pos)
    pos_weight = torch.tensor(n_neg / max(n_pos, 1.0))

    model = SegmentationUNet()
    optimizer = torch.optim.Adam(model.parameters(), lr=config.learning_rate)
    loss_fn = torch.nn.BCEWithLogitsLoss(pos_weight=pos_weight)

    history: list[EpochStats] = []
    n = len(x_train)
    for epoch in range(config.epochs):
        model.train()
        perm = torch.from_numpy(rng.permutation(n))
        total = 0.0
        for start in range(0, n, config.batch_size):
            idx = perm[start:start + config.batch_size]
            optimizer.zero_grad()
            out = model(x_train[idx])
            loss = loss_fn(out, y_train[idx])
            if not torch.isfinite(loss):
                raise DivergenceError(f"non-finite loss at epoch {epoch}")
            loss.backward()
            optimizer.step()
            total += loss.item() * len(idx)
        model.eval()
        with torch.no_grad():
            val_logits = model(x_val)
            val_loss = loss_fn(val_logits, y_val).item()
            accuracy, iou = _metrics(val_logits, y_val)
        history.append(EpochStats(epoch, total / n, val_loss, accuracy, iou))

    tensors = model.export_tensors()
    formats.save_weights(tensors, config.output)
    report = {
        "samples": len(heights),
        "train_samples": int(len(train_idx)),
        "val_samples": int(len(val_idx)),
        "pos_weight": float(pos_weight),
        "final": asdict(history[-1]),
        "history": [asdict(h) for h in history],
        "output": str(config.output),
    }
    return report


def evaluate(weights_path, dataset_path) -> dict:
    """Metrics of exported weights on a dataset, recomputed from confusion counts."""
    tensors = formats.load_weights(weights_path)
    model = SegmentationUNet()
    model.load_tensors(tensors)
    model.eval()
    heights, labels = formats.load_dataset(dataset_path)
    x = torch.from_numpy(heights).unsqueeze(1)
    with torch.no_grad():
        logits = model(x)
    pred = (logits.numpy()[:, 0] > 0)
    truth = labels > 0
    tp = int((pred & truth).sum())
    tn = int((~pred & ~truth).sum())
    fp = int((pred & ~truth).sum())
    fn = int((~pred & truth).sum())
    return {
        "accuracy": (tp + tn) / max(tp + tn + fp + fn, 1),
        "iou": tp / max(tp + fp + fn, 1),
        "confusion": {"tp": tp, "tn": tn, "fp": fp, "fn": fn},
    }
