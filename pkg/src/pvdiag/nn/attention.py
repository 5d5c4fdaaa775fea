"""Convolutional block attention: channel and spatial gates.

The channel gate squeezes space with both average and max pooling,
runs the two vectors through one shared bottleneck MLP and adds the
results before the sigmoid.  The spatial gate pools over channels,
stacks the two maps and convolves them down to a single sigmoid mask.
The block applies the channel gate first, then the spatial gate.
"""

from __future__ import annotations

import numpy as np

from ..errors import ShapeMismatch
from .layers import Conv2D, Layer, init_uniform


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


class ChannelAttention(Layer):
    """Per-channel gate in (0, 1): sigmoid(MLP(avg) + MLP(max))."""

    trainable = (("w1", "dw1"), ("b1", "db1"), ("w2", "dw2"), ("b2", "db2"))

    def __init__(self, channels: int, reduction: int = 8,
                 rng: np.random.Generator | None = None, dtype=np.float32):
        rng = np.random.default_rng() if rng is None else rng
        self.channels = channels
        hidden = max(channels // reduction, 1)
        self.w1 = init_uniform(rng, (channels, hidden), channels, dtype)
        self.b1 = np.zeros(hidden, dtype=dtype)
        self.w2 = init_uniform(rng, (hidden, channels), hidden, dtype)
        self.b2 = np.zeros(channels, dtype=dtype)
        self.dw1 = np.zeros_like(self.w1)
        self.db1 = np.zeros_like(self.b1)
        self.dw2 = np.zeros_like(self.w2)
        self.db2 = np.zeros_like(self.b2)

    def forward(self, f: np.ndarray) -> np.ndarray:
        if f.ndim != 4 or f.shape[3] != self.channels:
            raise ShapeMismatch(
                f"channel attention expects (N, H, W, {self.channels}), got {f.shape}")
        n, h, w, c = f.shape
        self._shape = f.shape
        self._avg = f.mean(axis=(1, 2))
        flat = f.reshape(n, h * w, c)
        self._argmax = flat.argmax(axis=1)  # (N, C), first max wins
        self._max = np.take_along_axis(flat, self._argmax[:, None, :], axis=1)[:, 0, :]
        self._ha = np.maximum(self._avg @ self.w1 + self.b1, 0)
        self._hm = np.maximum(self._max @ self.w1 + self.b1, 0)
        s = (self._ha @ self.w2 + self.b2) + (self._hm @ self.w2 + self.b2)
        self._mc = _sigmoid(s)
        return self._mc[:, None, None, :]

    def backward(self, d_mc: np.ndarray) -> np.ndarray:
        n, h, w, c = self._shape
        ds = d_mc.reshape(n, c) * self._mc * (1.0 - self._mc)
        dha = (ds @ self.w2.T) * (self._ha > 0)
        dhm = (ds @ self.w2.T) * (self._hm > 0)
        self.dw2 = self._ha.T @ ds + self._hm.T @ ds
        self.db2 = 2.0 * ds.sum(axis=0)
        self.dw1 = self._avg.T @ dha + self._max.T @ dhm
        self.db1 = dha.sum(axis=0) + dhm.sum(axis=0)
        d_avg = dha @ self.w1.T
        d_max = dhm @ self.w1.T
        df = np.broadcast_to(d_avg[:, None, None, :] / (h * w), self._shape).copy()
        flat = df.reshape(n, h * w, c)
        flat[np.arange(n)[:, None], self._argmax, np.arange(c)[None, :]] += d_max
        return df


class SpatialAttention(Layer):
    """Per-pixel gate: sigmoid of a 7x7 convolution over pooled channels."""

    def __init__(self, kernel: int = 7, rng: np.random.Generator | None = None,
                 dtype=np.float32):
        self.conv = Conv2D(kernel, kernel, 2, 1, padding=(kernel - 1) // 2,
                           rng=rng, dtype=dtype)

    def sublayers(self) -> tuple[Layer, ...]:
        return (self.conv,)

    def forward(self, f: np.ndarray) -> np.ndarray:
        self._channels = f.shape[3]
        avg = f.mean(axis=3, keepdims=True)
        self._argmax = f.argmax(axis=3)  # (N, H, W)
        mx = np.take_along_axis(f, self._argmax[..., None], axis=3)
        z = self.conv.forward(np.concatenate([avg, mx], axis=3))
        self._ms = _sigmoid(z)
        return self._ms  # (N, H, W, 1)

    def backward(self, d_ms: np.ndarray) -> np.ndarray:
        dz = d_ms * self._ms * (1.0 - self._ms)
        du = self.conv.backward(dz)
        c = self._channels
        df = np.broadcast_to(du[..., 0:1] / c, du.shape[:3] + (c,)).copy()
        scatter = np.zeros_like(df)
        np.put_along_axis(scatter, self._argmax[..., None], du[..., 1:2], axis=3)
        return df + scatter


class CBAM(Layer):
    """Sequential channel-then-spatial attention with residual products."""

    def __init__(self, channels: int, reduction: int = 8, sam_kernel: int = 7,
                 rng: np.random.Generator | None = None, dtype=np.float32):
        self.cam = ChannelAttention(channels, reduction=reduction, rng=rng, dtype=dtype)
        self.sam = SpatialAttention(kernel=sam_kernel, rng=rng, dtype=dtype)

    def sublayers(self) -> tuple[Layer, ...]:
        return (self.cam, self.sam)

    def forward(self, f: np.ndarray) -> np.ndarray:
        self._f = f
        self._mc = self.cam.forward(f)
        self._f1 = f * self._mc
        self._ms = self.sam.forward(self._f1)
        return self._f1 * self._ms

    def backward(self, dy: np.ndarray) -> np.ndarray:
        d_f1 = dy * self._ms
        d_ms = (dy * self._f1).sum(axis=3, keepdims=True)
        d_f1 = d_f1 + self.sam.backward(d_ms)
        df = d_f1 * self._mc
        d_mc = (d_f1 * self._f).sum(axis=(1, 2), keepdims=True)
        return df + self.cam.backward(d_mc)
