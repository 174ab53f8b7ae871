"""Loss, SGD with momentum, step-decay schedule, and train/eval loops."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .autodiff import AutodiffError, Tensor
from .formats import ScoreTable
from .network import StreamNetwork

class TrainingDiverged(RuntimeError):
    pass

@dataclass
class TrainConfig:
    epochs: int = 120
    batch_size: int = 32
    base_lr: float = 0.1
    lr_drop_epochs: tuple[int, ...] = (60, 90)
    lr_drop_factor: float = 10.0
    momentum: float = 0.9
    weight_decay: float = 1e-4
    seed: int = 0
    drop_rate: float = 0.0

    def __post_init__(self):
        if self.base_lr <= 0:
            raise ValueError(f"base_lr must be positive, got {self.base_lr}")
        if list(self.lr_drop_epochs) != sorted(self.lr_drop_epochs):
            raise ValueError(f"lr_drop_epochs must be ascending: {self.lr_drop_epochs}")

def cross_entropy(logits: Tensor, labels) -> Tensor:
    """Mean negative log-likelihood; log-space softmax for stability."""
    labels = np.asarray(labels)
    n, k = logits.shape
    if labels.shape != (n,):
        raise AutodiffError(f"expected {n} labels, got shape {labels.shape}")
    if labels.min() < 0 or labels.max() >= k:
        raise AutodiffError(f"labels must lie in [0, {k})")
    log_probs = ad.log_softmax(logits, axis=1)
    onehot = np.zeros((n, k), dtype=logits.data.dtype)
    onehot[np.arange(n), labels] = 1.0
    return ad.neg(ad.mul(log_probs, onehot).sum(axis=1).mean())

def lr_at_epoch(epoch: int, config: TrainConfig) -> float:
    drops = sum(1 for e in config.lr_drop_epochs if e <= epoch)
    return config.base_lr / config.lr_drop_factor ** drops

class SGD:
    """v <- momentum*v + grad + wd*param; param <- param - lr*v."""

    def __init__(self, params: list[Tensor], momentum: float = 0.9,
                 weight_decay: float = 1e-4):
        self.params = params
        self.momentum = momentum
        self.weight_decay = weight_decay
        self.velocity = [np.zeros_like(p.data) for p in params]

    def step(self, lr: float) -> None:
        for p, v in zip(self.params, self.velocity):
            grad = np.zeros_like(p.data) if p.grad is None else p.grad
            if grad.shape != p.data.shape:
                raise AutodiffError(f"grad shape {grad.shape} != param shape {p.shape}")
            v *= self.momentum
            v += grad + self.weight_decay * p.data
            p.data = p.data - lr * v

def sgd_step(param: np.ndarray, grad: np.ndarray, velocity: np.ndarray,
             lr: float, momentum: float, weight_decay: float) -> np.ndarray:
    """Single-array SGD update; mutates velocity, returns the new parameter."""
    if param.shape != grad.shape:
        raise AutodiffError(f"grad shape {grad.shape} != param shape {param.shape}")
    velocity *= momentum
    velocity += grad + weight_decay * param
    return param - lr * velocity

@dataclass
class EpochMetrics:
    epoch: int
    split: str
    loss: float
    accuracy: float
    lr: float
    seconds: float

    def to_json(self) -> str:
        return json.dumps({
            "epoch": self.epoch, "split": self.split,
            "loss": round(self.loss, 8), "accuracy": round(self.accuracy, 6),
            "lr": self.lr, "seconds": round(self.seconds, 3),
        }, sort_keys=True)

def train_epoch(model: StreamNetwork, data: np.ndarray, labels: np.ndarray,
                optimizer: SGD, lr: float, rng: np.random.Generator,
                batch_size: int = 32) -> tuple[float, float]:
    """One shuffled pass; returns (mean loss, accuracy)."""
    if len(data) == 0:
        raise ValueError("empty dataset")
    model.train()
    order = rng.permutation(len(data))
    total_loss = 0.0
    correct = 0
    for start in range(0, len(order), batch_size):
        idx = order[start:start + batch_size]
        logits = model.forward(Tensor(data[idx]))
        loss = cross_entropy(logits, labels[idx])
        if not np.isfinite(loss.data):
            raise TrainingDiverged(f"non-finite loss {float(loss.data)} at batch {start}")
        model.zero_grad()
        loss.backward()
        optimizer.step(lr)
        total_loss += float(loss.data) * len(idx)
        correct += int((logits.data.argmax(axis=1) == labels[idx]).sum())
    return total_loss / len(order), correct / len(order)

def evaluate(model: StreamNetwork, data: np.ndarray, labels: np.ndarray,
             sample_ids: list[str] | None = None,
             batch_size: int = 32) -> tuple[float, ScoreTable]:
    """Eval-mode pass; returns (loss, ScoreTable with softmaxed probabilities)."""
    model.eval()
    probs = []
    total_loss = 0.0
    for start in range(0, len(data), batch_size):
        logits = model.forward(Tensor(data[start:start + batch_size]))
        loss = cross_entropy(logits, labels[start:start + batch_size])
        total_loss += float(loss.data) * (min(start + batch_size, len(data)) - start)
        probs.append(ad.softmax(logits, axis=1).data)
    probs = np.concatenate(probs, axis=0)
    if sample_ids is None:
        sample_ids = [f"sample-{i:05d}" for i in range(len(data))]
    table = ScoreTable(list(sample_ids), np.asarray(labels).copy(), probs)
    return total_loss / len(data), table

def desk_train_config(seed: int = 0, drop_rate: float = 0.1) -> TrainConfig:
    """Small-scale defaults for the synthetic task (full-scale stays 120/0.1)."""
    return TrainConfig(epochs=50, batch_size=32, base_lr=0.02,
                       lr_drop_epochs=(30, 42), lr_drop_factor=10.0,
                       momentum=0.9, weight_decay=1e-4, seed=seed,
                       drop_rate=drop_rate)

def train(model: StreamNetwork, train_data, train_labels, test_data, test_labels,
          config: TrainConfig, run_dir: str | Path | None = None,
          deterministic: bool = False, test_ids: list[str] | None = None,
          stop_when=None) -> tuple[list[EpochMetrics], ScoreTable]:
    """Full training run; writes metrics.jsonl under run_dir if given.

    Under `deterministic` the wall-clock field is recorded as 0 so metrics
    files from identical runs compare byte-for-byte. `stop_when(train_acc,
    eval_acc)` may end the run early.
    """
    rng = np.random.default_rng(config.seed)
    optimizer = SGD(model.parameters(), config.momentum, config.weight_decay)
    history: list[EpochMetrics] = []
    run_path = Path(run_dir) if run_dir is not None else None
    if run_path is not None:
        run_path.mkdir(parents=True, exist_ok=True)
    final_table = None
    for epoch in range(config.epochs):
        lr = lr_at_epoch(epoch, config)
        t0 = time.monotonic()
        loss, acc = train_epoch(model, train_data, train_labels, optimizer, lr,
                                rng, config.batch_size)
        seconds = 0.0 if deterministic else time.monotonic() - t0
        history.append(EpochMetrics(epoch, "train", loss, acc, lr, seconds))
        t0 = time.monotonic()
        eval_loss, table = evaluate(model, test_data, test_labels, test_ids,
                                    config.batch_size)
        seconds = 0.0 if deterministic else time.monotonic() - t0
        history.append(EpochMetrics(epoch, "eval", eval_loss, table.accuracy(),
                                    lr, seconds))
        final_table = table
        if stop_when is not None and stop_when(acc, table.accuracy()):
            break
    if run_path is not None:
        with open(run_path / "metrics.jsonl", "w") as fh:
            for m in history:
                fh.write(m.to_json() + "\n")
    return history, final_table
