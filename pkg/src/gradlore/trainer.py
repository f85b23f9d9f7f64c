"""Supervised training loop combining value and derivative matching.

The update per step is theta+ = theta - alpha*eta*dE/dtheta -
(1-alpha)*eta*dE_grad/dtheta; with the derivative term disabled the loop
reduces exactly (bit-for-bit) to plain gradient descent on the value loss.
Full-batch descent is the default so per-epoch parameter-delta series are
free of minibatch noise.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .mlp import GiBatch, Mlp, apply_update, forward_batch, param_grad_gi, param_grad_target
from .numerics import BadParams, Rng


class Empty(ValueError):
    """Metric asked for on an empty vector."""


class ZeroVariance(ValueError):
    """Correlation undefined: one of the vectors is constant."""


@dataclass
class TrainConfig:
    epochs: int
    eta: float
    alpha: float = 0.5
    use_gi: bool = False
    batch_size: int = 0  # 0 = full batch
    seed: int = 0
    train_size: int = 0
    test_size: int = 0

    def __post_init__(self):
        if self.epochs < 0:
            raise BadParams(f"train: epochs must be >= 0, got {self.epochs}")
        if not self.eta > 0:
            raise BadParams(f"train: eta must be > 0, got {self.eta}")
        if not 0.0 <= self.alpha <= 1.0:
            raise BadParams(f"train: alpha must be in [0, 1], got {self.alpha}")
        if self.batch_size < 0:
            raise BadParams(f"train: batch_size must be >= 0, got {self.batch_size}")


@dataclass
class TrainHistory:
    """One record per completed epoch."""

    train_rmse: list[float] = field(default_factory=list)
    test_rmse: list[float] = field(default_factory=list)
    mean_abs_param_delta: list[float] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.train_rmse)


def rmse(pred: np.ndarray, truth: np.ndarray) -> float:
    pred = np.asarray(pred, dtype=np.float64).ravel()
    truth = np.asarray(truth, dtype=np.float64).ravel()
    if pred.size == 0 or truth.size == 0:
        raise Empty("rmse: empty input")
    if pred.size != truth.size:
        raise Empty(f"rmse: length mismatch {pred.size} vs {truth.size}")
    return float(np.sqrt(np.mean((pred - truth) ** 2)))


def pearson(pred: np.ndarray, truth: np.ndarray) -> float:
    pred = np.asarray(pred, dtype=np.float64).ravel()
    truth = np.asarray(truth, dtype=np.float64).ravel()
    if pred.size != truth.size or pred.size == 0:
        raise Empty("pearson: empty or mismatched input")
    p = pred - pred.mean()
    t = truth - truth.mean()
    denom = np.sqrt(np.sum(p**2) * np.sum(t**2))
    if denom == 0.0:
        raise ZeroVariance("pearson: zero-variance input")
    return float(np.clip(np.sum(p * t) / denom, -1.0, 1.0))


def train(
    net: Mlp,
    data: GiBatch,
    cfg: TrainConfig,
    test_data: GiBatch | None = None,
) -> tuple[Mlp, TrainHistory]:
    """Run cfg.epochs passes; records RMSE and parameter delta after each epoch.

    The derivative term is active only when cfg.use_gi and alpha < 1; a
    conventional run behaves as alpha = 1. Both paths consume randomness
    identically (shuffles only, and only in minibatch mode), so paired runs
    with the same seed isolate the update rule.
    """
    n = data.n
    if n == 0:
        raise Empty("train: empty training batch")
    rng = Rng(cfg.seed)
    history = TrainHistory()
    alpha = cfg.alpha if cfg.use_gi else 1.0
    full_batch = cfg.batch_size == 0 or cfg.batch_size >= n
    for _ in range(cfg.epochs):
        if full_batch:
            batches = [data]
        else:
            perm, rng = rng.permutation(n)
            batches = [
                data.take(perm[i : i + cfg.batch_size])
                for i in range(0, n, cfg.batch_size)
            ]
        deltas = []
        for sub in batches:
            g_t = param_grad_target(net, sub)
            g_g = param_grad_gi(net, sub) if (cfg.use_gi and alpha < 1.0) else None
            net, d = apply_update(net, g_t, g_g, cfg.eta, alpha)
            deltas.append(d)
        history.mean_abs_param_delta.append(float(np.mean(deltas)))
        history.train_rmse.append(rmse(forward_batch(net, data.inputs), data.targets))
        if test_data is not None:
            history.test_rmse.append(
                rmse(forward_batch(net, test_data.inputs), test_data.targets)
            )
    return net, history


def save_history(path, history: TrainHistory) -> None:
    """history.csv: epoch, train_rmse, test_rmse, param_delta."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "train_rmse", "test_rmse", "param_delta"])
        for i in range(len(history)):
            test = history.test_rmse[i] if i < len(history.test_rmse) else ""
            writer.writerow(
                [
                    i,
                    repr(history.train_rmse[i]),
                    repr(test) if test != "" else "",
                    repr(history.mean_abs_param_delta[i]),
                ]
            )
