"""Basic layers with explicit forward and backward passes.

Image activations are channels-last (N, H, W, C), vectors are (N, D).
Every layer caches what its backward pass needs during forward.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import ShapeMismatch


def init_uniform(rng: np.random.Generator, shape, fan_in: int, dtype) -> np.ndarray:
    """Fan-in scaled uniform initialization.

    The sqrt(6 / fan_in) limit keeps activation variance roughly
    constant through stacked ReLU layers; smaller limits make deep
    stacks converge noticeably slower.
    """
    limit = np.sqrt(6.0 / fan_in)
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


class Layer:
    """Base layer: parameterless and stateless by default.

    ``trainable`` pairs the attribute names of parameters with their
    gradient attributes; composite layers expose children through
    ``sublayers`` instead of holding parameters themselves.
    """

    trainable: tuple[tuple[str, str], ...] = ()

    def sublayers(self) -> tuple["Layer", ...]:
        return ()

    def forward(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def backward(self, dy: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class Conv2D(Layer):
    """2-d convolution (cross-correlation), stride 1, optional zero padding.

    All three products run as one GEMM per kernel offset on views of
    the (padded) input, so no pass ever materializes the full
    im2col window tensor.
    """

    trainable = (("w", "dw"), ("b", "db"))

    def __init__(self, kh: int, kw: int, c_in: int, c_out: int, padding: int = 0,
                 rng: np.random.Generator | None = None, dtype=np.float32):
        rng = np.random.default_rng() if rng is None else rng
        self.kh, self.kw = kh, kw
        self.c_in, self.c_out = c_in, c_out
        self.padding = padding
        self.w = init_uniform(rng, (kh, kw, c_in, c_out), kh * kw * c_in, dtype)
        self.b = np.zeros(c_out, dtype=dtype)
        self.dw = np.zeros_like(self.w)
        self.db = np.zeros_like(self.b)
        self._xp = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.ndim != 4 or x.shape[3] != self.c_in:
            raise ShapeMismatch(
                f"conv expects (N, H, W, {self.c_in}), got {x.shape}")
        p = self.padding
        if p:
            x = np.pad(x, ((0, 0), (p, p), (p, p), (0, 0)))
        if x.shape[1] < self.kh or x.shape[2] < self.kw:
            raise ShapeMismatch(
                f"input {x.shape} smaller than kernel {self.kh}x{self.kw}")
        self._xp = x
        n, h, w, _ = x.shape
        ho, wo = h - self.kh + 1, w - self.kw + 1
        # accumulate at the promoted dtype so float64 inputs keep full
        # precision instead of being rounded through a float32 buffer
        y = np.zeros((n, ho, wo, self.c_out),
                     dtype=np.result_type(x.dtype, self.w.dtype))
        for dy_ in range(self.kh):
            for dx_ in range(self.kw):
                y += x[:, dy_:dy_ + ho, dx_:dx_ + wo, :] @ self.w[dy_, dx_]
        y += self.b
        return y

    def backward(self, dy: np.ndarray) -> np.ndarray:
        x = self._xp
        n, ho, wo, _ = dy.shape
        dy_flat = dy.reshape(-1, self.c_out)
        self.db = dy_flat.sum(axis=0)
        p = self.padding
        if self.kh * self.kw > 9:
            # large kernels: one windowed contraction per product beats
            # a long loop of tiny per-offset GEMMs
            win = sliding_window_view(x, (self.kh, self.kw), axis=(1, 2))
            self.dw = np.tensordot(win, dy,
                                   axes=([0, 1, 2], [0, 1, 2])).transpose(1, 2, 0, 3)
            dyp = np.pad(dy, ((0, 0), (self.kh - 1, self.kh - 1),
                              (self.kw - 1, self.kw - 1), (0, 0)))
            winy = sliding_window_view(dyp, (self.kh, self.kw), axis=(1, 2))
            dxp = np.tensordot(winy, self.w[::-1, ::-1],
                               axes=([4, 5, 3], [0, 1, 3]))
        else:
            self.dw = np.empty_like(self.w)
            dxp = np.zeros_like(x)
            for dy_ in range(self.kh):
                for dx_ in range(self.kw):
                    xs = x[:, dy_:dy_ + ho, dx_:dx_ + wo, :].reshape(-1, self.c_in)
                    self.dw[dy_, dx_] = xs.T @ dy_flat
                    dxp[:, dy_:dy_ + ho, dx_:dx_ + wo, :] += dy @ self.w[dy_, dx_].T
        if p:
            dxp = dxp[:, p:-p, p:-p, :]
        return dxp


class Dense(Layer):
    trainable = (("w", "dw"), ("b", "db"))

    def __init__(self, d_in: int, d_out: int,
                 rng: np.random.Generator | None = None, dtype=np.float32):
        rng = np.random.default_rng() if rng is None else rng
        self.d_in, self.d_out = d_in, d_out
        self.w = init_uniform(rng, (d_in, d_out), d_in, dtype)
        self.b = np.zeros(d_out, dtype=dtype)
        self.dw = np.zeros_like(self.w)
        self.db = np.zeros_like(self.b)
        self._x = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.ndim != 2 or x.shape[1] != self.d_in:
            raise ShapeMismatch(f"dense expects (N, {self.d_in}), got {x.shape}")
        self._x = x
        return x @ self.w + self.b

    def backward(self, dy: np.ndarray) -> np.ndarray:
        self.dw = self._x.T @ dy
        self.db = dy.sum(axis=0)
        return dy @ self.w.T


class ReLU(Layer):
    def forward(self, x: np.ndarray) -> np.ndarray:
        self._mask = x > 0
        return np.maximum(x, 0)

    def backward(self, dy: np.ndarray) -> np.ndarray:
        return dy * self._mask


class Sigmoid(Layer):
    def forward(self, x: np.ndarray) -> np.ndarray:
        out = np.empty_like(x)
        pos = x >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
        ex = np.exp(x[~pos])
        out[~pos] = ex / (1.0 + ex)
        self._out = out
        return out

    def backward(self, dy: np.ndarray) -> np.ndarray:
        return dy * self._out * (1.0 - self._out)


class GlobalAvgPool(Layer):
    """(N, H, W, C) -> (N, C) spatial mean."""

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._shape = x.shape
        return x.mean(axis=(1, 2))

    def backward(self, dy: np.ndarray) -> np.ndarray:
        n, h, w, c = self._shape
        return np.broadcast_to(dy[:, None, None, :] / (h * w), self._shape).copy()


class Flatten(Layer):
    def forward(self, x: np.ndarray) -> np.ndarray:
        self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, dy: np.ndarray) -> np.ndarray:
        return dy.reshape(self._shape)
