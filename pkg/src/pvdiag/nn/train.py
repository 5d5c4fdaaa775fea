"""Mini-batch training with adaptive moments and early stopping."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import NonFiniteLoss
from .network import Network, softmax_cross_entropy

EVAL_BATCH = 256


@dataclass(frozen=True)
class TrainSettings:
    learning_rate: float = 1e-3
    batch_size: int = 32
    max_epochs: int = 100
    patience: int = 15
    weight_decay: float = 1e-4
    seed: int = 0


class Adam:
    """Adaptive moment estimation with bias correction, in-place updates."""

    def __init__(self, learning_rate: float = 1e-3, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8,
                 weight_decay: float = 0.0):
        self.lr = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.weight_decay = weight_decay
        self.t = 0
        self._m: dict[int, np.ndarray] = {}
        self._v: dict[int, np.ndarray] = {}

    def step(self, params: list) -> None:
        self.t += 1
        b1c = 1.0 - self.beta1 ** self.t
        b2c = 1.0 - self.beta2 ** self.t
        for idx, (layer, wn, gn) in enumerate(params):
            w = getattr(layer, wn)
            g = getattr(layer, gn)
            if self.weight_decay:
                g = g + self.weight_decay * w
            if idx not in self._m:
                self._m[idx] = np.zeros_like(w)
                self._v[idx] = np.zeros_like(w)
            m = self._m[idx]
            v = self._v[idx]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            w -= self.lr * (m / b1c) / (np.sqrt(v / b2c) + self.eps)


@dataclass
class TrainResult:
    history: list[dict] = field(default_factory=list)
    best_val_accuracy: float = 0.0
    n_epochs: int = 0
    stopped_early: bool = False


def batched_loss_accuracy(net: Network, x: np.ndarray, y: np.ndarray,
                          batch_size: int = EVAL_BATCH) -> tuple[float, float]:
    """Forward-only loss and accuracy over a labelled set."""
    loss_sum = 0.0
    correct = 0
    for k in range(0, len(x), batch_size):
        xb, yb = x[k:k + batch_size], y[k:k + batch_size]
        logits = net.forward(xb)
        loss, _ = softmax_cross_entropy(logits, yb)
        loss_sum += loss * len(xb)
        correct += int((np.argmax(logits, axis=1) == yb).sum())
    return loss_sum / len(x), correct / len(x)


def train(net: Network, x_train: np.ndarray, y_train: np.ndarray,
          x_val: np.ndarray, y_val: np.ndarray,
          settings: TrainSettings = TrainSettings()) -> TrainResult:
    """Train to best validation accuracy; restores the best weights.

    Shuffling and every weight update derive from settings.seed, so a
    rerun with identical inputs reproduces the weights bit for bit.

    Raises:
        NonFiniteLoss: the loss left the finite range (diverged).
    """
    rng = np.random.default_rng(settings.seed)
    params = net.parameters()
    opt = Adam(learning_rate=settings.learning_rate,
               weight_decay=settings.weight_decay)
    result = TrainResult()
    best_snapshot = [getattr(layer, wn).copy() for layer, wn, _ in params]
    best_acc = -1.0
    stale = 0
    for epoch in range(1, settings.max_epochs + 1):
        perm = rng.permutation(len(x_train))
        loss_sum = 0.0
        correct = 0
        for k in range(0, len(perm), settings.batch_size):
            idx = perm[k:k + settings.batch_size]
            xb, yb = x_train[idx], y_train[idx]
            logits = net.forward(xb)
            loss, dlogits = softmax_cross_entropy(logits, yb)
            if not np.isfinite(loss):
                raise NonFiniteLoss(f"epoch {epoch}, batch at {k}: loss={loss}")
            loss_sum += loss * len(idx)
            correct += int((np.argmax(logits, axis=1) == yb).sum())
            net.backward(dlogits)
            opt.step(params)
        val_loss, val_acc = batched_loss_accuracy(net, x_val, y_val)
        result.history.append({
            "epoch": epoch,
            "train_loss": loss_sum / len(x_train),
            "train_acc": correct / len(x_train),
            "val_loss": val_loss,
            "val_acc": val_acc,
        })
        result.n_epochs = epoch
        if val_acc > best_acc:
            best_acc = val_acc
            best_snapshot = [getattr(layer, wn).copy() for layer, wn, _ in params]
            stale = 0
        else:
            stale += 1
            if stale >= settings.patience:
                result.stopped_early = True
                break
    for (layer, wn, _), saved in zip(params, best_snapshot):
        np.copyto(getattr(layer, wn), saved)
    result.best_val_accuracy = best_acc
    return result
