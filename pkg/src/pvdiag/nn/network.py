"""Network container, loss, and the three classifier architectures."""

from __future__ import annotations

import numpy as np

from .attention import CBAM
from .layers import Conv2D, Dense, Flatten, GlobalAvgPool, Layer, ReLU


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def softmax_cross_entropy(logits: np.ndarray, labels: np.ndarray):
    """Mean cross-entropy loss and its gradient w.r.t. the logits."""
    n = logits.shape[0]
    p = softmax(logits)
    picked = np.clip(p[np.arange(n), labels], 1e-12, None)
    loss = float(-np.mean(np.log(picked)))
    dlogits = p.astype(np.float64)
    dlogits[np.arange(n), labels] -= 1.0
    return loss, (dlogits / n).astype(logits.dtype)


class Network:
    """A plain layer sequence ending in class logits."""

    def __init__(self, layers: list[Layer], name: str):
        self.layers = layers
        self.name = name

    def iter_layers(self):
        """Depth-first walk over all layers, composites included."""
        stack = list(reversed(self.layers))
        while stack:
            layer = stack.pop()
            yield layer
            stack.extend(reversed(layer.sublayers()))

    def parameters(self) -> list[tuple[Layer, str, str]]:
        """(layer, weight attribute, gradient attribute) triples, stable order."""
        return [(layer, wn, gn)
                for layer in self.iter_layers()
                for wn, gn in layer.trainable]

    @property
    def n_parameters(self) -> int:
        return sum(getattr(layer, wn).size for layer, wn, _ in self.parameters())

    def forward(self, x: np.ndarray) -> np.ndarray:
        for layer in self.layers:
            x = layer.forward(x)
        return x

    def forward_shapes(self, x: np.ndarray) -> list[tuple[str, tuple[int, ...]]]:
        """Per-layer output shapes (batch axis dropped), for inspection."""
        out = []
        for layer in self.layers:
            x = layer.forward(x)
            out.append((type(layer).__name__, x.shape[1:]))
        return out

    def backward(self, dlogits: np.ndarray) -> np.ndarray:
        d = dlogits
        for layer in reversed(self.layers):
            d = layer.backward(d)
        return d

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        return softmax(self.forward(x))

    def predict(self, x: np.ndarray) -> np.ndarray:
        return np.argmax(self.forward(x), axis=1)


def build_cbam_cnn(n_classes: int, input_shape=(50, 50, 2), reduction: int = 8,
                   seed: int = 0, dtype=np.float32) -> Network:
    """Attention CNN: two conv stages gated by CBAM, pooled to a small head."""
    rng = np.random.default_rng(seed)
    c_in = input_shape[2]
    layers = [
        Conv2D(3, 3, c_in, 8, rng=rng, dtype=dtype),
        ReLU(),
        Conv2D(3, 3, 8, 32, rng=rng, dtype=dtype),
        ReLU(),
        CBAM(32, reduction=reduction, rng=rng, dtype=dtype),
        Conv2D(3, 3, 32, 64, rng=rng, dtype=dtype),
        ReLU(),
        CBAM(64, reduction=reduction, rng=rng, dtype=dtype),
        GlobalAvgPool(),
        Dense(64, 16, rng=rng, dtype=dtype),
        ReLU(),
        Dense(16, n_classes, rng=rng, dtype=dtype),
    ]
    return Network(layers, "CbamCnn")


def build_multilayer_cnn(n_classes: int, input_shape=(50, 50, 2),
                         seed: int = 0, dtype=np.float32) -> Network:
    """The same convolutional trunk without the attention blocks."""
    rng = np.random.default_rng(seed)
    c_in = input_shape[2]
    layers = [
        Conv2D(3, 3, c_in, 8, rng=rng, dtype=dtype),
        ReLU(),
        Conv2D(3, 3, 8, 32, rng=rng, dtype=dtype),
        ReLU(),
        Conv2D(3, 3, 32, 64, rng=rng, dtype=dtype),
        ReLU(),
        GlobalAvgPool(),
        Dense(64, 16, rng=rng, dtype=dtype),
        ReLU(),
        Dense(16, n_classes, rng=rng, dtype=dtype),
    ]
    return Network(layers, "MultilayerCnn")


def build_ann(n_classes: int, input_shape=(50, 50, 2),
              seed: int = 0, dtype=np.float32) -> Network:
    """Flat baseline: one hidden dense layer over the raveled tensor."""
    rng = np.random.default_rng(seed)
    d_in = int(np.prod(input_shape))
    layers = [
        Flatten(),
        Dense(d_in, 128, rng=rng, dtype=dtype),
        ReLU(),
        Dense(128, n_classes, rng=rng, dtype=dtype),
    ]
    return Network(layers, "Ann")


ARCHITECTURES = {
    "cbam_cnn": build_cbam_cnn,
    "multilayer_cnn": build_multilayer_cnn,
    "ann": build_ann,
}
