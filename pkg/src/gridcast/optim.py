"""Adam optimizer and the early-stopping training loop."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Mapping, Protocol, Sequence

import numpy as np

from .autodiff import Tensor, gradients, release
from .errors import TrainingDiverged


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    batch_size: int = 256
    max_epochs: int = 300
    patience: int = 10
    min_delta: float = 1e-4
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.patience < 1:
            raise ValueError(f"patience must be >= 1, got {self.patience}")


@dataclass
class TrainingStats:
    epochs_run: int = 0
    wall_seconds: float = 0.0
    best_validation_loss: float = float("inf")
    loss_curve: list[tuple[float, float]] = field(default_factory=list)


@dataclass
class AdamState:
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    t: int = 0


def adam_step(
    params: Mapping[str, Tensor],
    grads: Mapping[str, np.ndarray],
    state: AdamState,
    learning_rate: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> AdamState:
    """One Adam update with bias correction; mutates params in place."""
    state.t += 1
    bc1 = 1.0 - beta1**state.t
    bc2 = 1.0 - beta2**state.t
    for name, p in params.items():
        g = grads[name]
        if not np.all(np.isfinite(g)):
            raise TrainingDiverged(f"non-finite gradient for parameter {name!r}", state.t - 1)
        if name not in state.m:
            state.m[name] = np.zeros_like(p.data)
            state.v[name] = np.zeros_like(p.data)
        m = state.m[name]
        v = state.v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * (g * g)
        p.data -= learning_rate * (m / bc1) / (np.sqrt(v / bc2) + eps)
    return state


class TrainableModel(Protocol):
    """What the generic loop needs from a model."""

    def parameters(self) -> dict[str, Tensor]: ...

    def loss(self, batch: Sequence[np.ndarray]) -> Tensor: ...


def _batch(arrays: Sequence[np.ndarray], idx: np.ndarray) -> list[np.ndarray]:
    return [a[idx] for a in arrays]


def _eval_loss(model: TrainableModel, data: Sequence[np.ndarray], chunk: int = 128) -> float:
    # evaluation still builds the autodiff tape, so the chunk size bounds
    # peak memory for activation-heavy models (deep dilated conv stacks)
    n = len(data[0])
    total = 0.0
    for lo in range(0, n, chunk):
        hi = min(lo + chunk, n)
        part = [a[lo:hi] for a in data]
        loss = model.loss(part)
        total += float(loss.data) * (hi - lo)
        release(loss)
    return total / n


def fit(
    model: TrainableModel,
    train_data: Sequence[np.ndarray],
    val_data: Sequence[np.ndarray],
    cfg: TrainConfig,
) -> TrainingStats:
    """Minibatch Adam with early stopping on validation loss.

    Stops once `patience` consecutive epochs fail to improve the best
    validation loss by more than `min_delta`, then restores the parameters
    of the best epoch. Raises TrainingDiverged on a non-finite loss.
    """
    if not len(train_data[0]) or not len(val_data[0]):
        raise ValueError("train and validation sets must be non-empty")
    params = model.parameters()
    rng = np.random.default_rng(cfg.seed)
    state = AdamState()
    stats = TrainingStats()
    best_snapshot = {k: p.data.copy() for k, p in params.items()}
    best_val = float("inf")
    stale = 0
    n = len(train_data[0])
    started = time.perf_counter()
    for epoch in range(1, cfg.max_epochs + 1):
        order = rng.permutation(n)
        epoch_loss = 0.0
        for lo in range(0, n, cfg.batch_size):
            idx = order[lo : lo + cfg.batch_size]
            loss = model.loss(_batch(train_data, idx))
            value = float(loss.data)
            if not np.isfinite(value):
                stats.wall_seconds = time.perf_counter() - started
                raise TrainingDiverged(
                    f"training loss became non-finite in epoch {epoch}", epoch - 1
                )
            grads = gradients(loss, params)
            adam_step(params, grads, state, cfg.learning_rate)
            epoch_loss += value * len(idx)
        train_loss = epoch_loss / n
        val_loss = _eval_loss(model, val_data)
        if not np.isfinite(val_loss):
            stats.wall_seconds = time.perf_counter() - started
            raise TrainingDiverged(f"validation loss became non-finite in epoch {epoch}", epoch - 1)
        stats.loss_curve.append((train_loss, val_loss))
        stats.epochs_run = epoch
        if best_val - val_loss > cfg.min_delta:
            best_val = val_loss
            best_snapshot = {k: p.data.copy() for k, p in params.items()}
            stale = 0
        else:
            stale += 1
            if stale >= cfg.patience:
                break
    for k, p in params.items():
        p.data = best_snapshot[k]
    stats.best_validation_loss = best_val
    stats.wall_seconds = time.perf_counter() - started
    return stats
