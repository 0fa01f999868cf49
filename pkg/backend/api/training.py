"""L1 loss, manual reverse-mode gradients, SGD, and empirical loss evaluation."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd

import networks
from networks import Arch, BiasMode, ForwardTrace, NetworkParams
from problem import Dataset, SensingMatrix
from rng import child_stream

logger = logging.getLogger(__name__)


class TrainingDivergedError(RuntimeError):
    def __init__(self, epoch: int, loss: float):
        super().__init__(f"training diverged at epoch {epoch}: loss={loss}")
        self.epoch = epoch
        self.loss = loss


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.01
    epochs: int = 500
    batch_size: int = 32
    seed: int = 0
    projection: Optional[tuple[float, float]] = None
    clip_output: bool = True
    shuffle: bool = True
    early_stop_tol: float = 1e-6
    patience: int = 20

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be nonnegative")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be positive")
        if self.projection is not None:
            object.__setattr__(self, "projection", tuple(float(v) for v in self.projection))

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        return cls(**data)


@dataclass(frozen=True)
class GradientSet:
    W1: tuple[np.ndarray, ...]
    W2: Optional[tuple[np.ndarray, ...]] = None


def loss(prediction, target) -> float:
    """Mean absolute error over coordinates."""
    prediction = np.asarray(prediction, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if prediction.shape != target.shape:
        raise ValueError(f"length mismatch: {prediction.shape} vs {target.shape}")
    return float(np.mean(np.abs(prediction - target)))


def batch_loss(predictions: np.ndarray, targets: np.ndarray) -> float:
    """Per-sample loss averaged over the batch."""
    return float(np.mean(np.abs(predictions - targets)))


def backprop(params: NetworkParams, y, trace: ForwardTrace, grad_out) -> GradientSet:
    """Pull a cotangent on h^L back to every weight matrix.

    Kinks take the zero subgradient: S_lam' = 1 only for |x| > lam, relu' = 1
    only for x > 0.
    """
    y = np.atleast_2d(np.asarray(y, dtype=np.float64))
    hs = [np.atleast_2d(h) for h in trace.h]
    pres = [np.atleast_2d(p) for p in trace.pre]
    g = np.atleast_2d(np.asarray(grad_out, dtype=np.float64))
    if len(pres) != params.L or g.shape != hs[-1].shape:
        raise ValueError("trace does not match the network parameters")

    learned = params.bias_mode is BiasMode.LEARNED
    dW1 = [None] * params.L
    dW2 = [None] * params.L if learned else None

    if params.arch is Arch.ADMM:
        zs = [np.atleast_2d(z) for z in trace.z]
        us = [np.atleast_2d(u) for u in trace.u]
        g_h = g
        g_z = np.zeros_like(g)
        g_u = np.zeros_like(g)
        for layer in reversed(range(params.L)):
            l = layer + 1
            # u^l = u^{l-1} - gamma (h^l - z^l)
            g_h = g_h - params.gamma * g_u
            g_z = g_z + params.gamma * g_u
            g_u_prev = g_u
            # z^l = S(h^l - u^{l-1})
            d = g_z * (np.abs(pres[layer]) > params.lam)
            g_h = g_h + d
            g_u_prev = g_u_prev - d
            # h^l = W^l (z^{l-1} + u^{l-1}) + bias
            s_prev = zs[l - 1] + us[l - 1]
            dW1[layer] = g_h.T @ s_prev
            if learned:
                dW2[layer] = g_h.T @ y
            back = g_h @ params.W1[layer]
            g_z = back
            g_u = g_u_prev + back
            g_h = np.zeros_like(g_h)
    else:
        for layer in reversed(range(params.L)):
            if params.arch is Arch.RELU:
                mask = pres[layer] > 0
            else:
                mask = np.abs(pres[layer]) > params.lam
            d = g * mask
            dW1[layer] = d.T @ hs[layer]
            if learned:
                dW2[layer] = d.T @ y
            g = d @ params.W1[layer]

    return GradientSet(W1=tuple(dW1), W2=tuple(dW2) if learned else None)


def backward(params: NetworkParams, sensing: SensingMatrix, sample, trace: ForwardTrace):
    """Loss and its gradient for one sample (x, y) or a batch (xs, ys).

    The batch loss is the mean of the per-sample losses.
    """
    x, y = sample
    x = np.asarray(x, dtype=np.float64)
    out = trace.h[-1]
    if out.shape != x.shape:
        raise ValueError("trace and target shapes differ")

    prediction = trace.prediction
    value = batch_loss(prediction, x)
    count = x.shape[0] if x.ndim == 2 else 1
    n_x = x.shape[-1]
    g = np.sign(prediction - x) / (n_x * count)
    if params.clip_output:
        g = g * ((out >= -1.0) & (out <= 1.0))
    return value, backprop(params, y, trace, g)


def apply_step(params: NetworkParams, grads: GradientSet, learning_rate: float) -> NetworkParams:
    W1 = tuple(W - learning_rate * dW for W, dW in zip(params.W1, grads.W1))
    W2 = params.W2
    if grads.W2 is not None:
        W2 = tuple(W - learning_rate * dW for W, dW in zip(params.W2, grads.W2))
    return replace(params, W1=W1, W2=W2)


def evaluate(params: NetworkParams, sensing: SensingMatrix, test_set: Dataset) -> float:
    if len(test_set) == 0:
        raise ValueError("test set is empty")
    prediction = networks.predict(params, sensing, test_set.ys)
    return batch_loss(prediction, test_set.xs)


def train(params: NetworkParams, sensing: SensingMatrix, train_set: Dataset, cfg: TrainConfig):
    """Minibatch SGD on the mean L1 loss. Returns (trained params, per-epoch train loss)."""
    m = len(train_set)
    batch_size = min(cfg.batch_size, m)
    params = replace(params, clip_output=cfg.clip_output)
    if cfg.projection is not None:
        params = networks.project_weights(params, *cfg.projection)
    rng = child_stream(cfg.seed, "sgd")

    history: list[float] = []
    best = math.inf
    stale = 0
    logger.info("training %s L=%d lambda=%.3g on %d samples", params.arch.value, params.L, params.lam, m)
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(m) if cfg.shuffle else np.arange(m)
        for start in range(0, m, batch_size):
            idx = order[start:start + batch_size]
            ys = train_set.ys[idx]
            trace = networks.forward(params, sensing, ys)
            _, grads = backward(params, sensing, (train_set.xs[idx], ys), trace)
            params = apply_step(params, grads, cfg.learning_rate)
            if cfg.projection is not None:
                params = networks.project_weights(params, *cfg.projection)

        epoch_loss = evaluate(params, sensing, train_set)
        if not math.isfinite(epoch_loss):
            raise TrainingDivergedError(epoch, epoch_loss)
        history.append(epoch_loss)

        if best - epoch_loss >= cfg.early_stop_tol:
            best = epoch_loss
            stale = 0
        else:
            stale += 1
            if stale >= cfg.patience:
                logger.debug("early stop at epoch %d, train loss %.6g", epoch, epoch_loss)
                break

    logger.info("finished after %d epochs, train loss %.6g", len(history), history[-1])
    return params, history


def export_history_csv(history, path) -> Path:
    table = pd.DataFrame({"epoch": np.arange(1, len(history) + 1), "train_loss": list(history)})
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    table.to_csv(path, index=False)
    return path
