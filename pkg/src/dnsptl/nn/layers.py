"""Layers with analytic backward passes.

Tensors are plain numpy arrays in NHWC layout. Every layer caches what its
backward needs during ``forward`` and writes parameter gradients into
``Parameter.grad`` (overwriting, not accumulating).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError, InputError
from . import kernels


@dataclass
class Parameter:
    value: np.ndarray
    grad: np.ndarray = field(default=None, repr=False)
    frozen: bool = False
    name: str = ""

    def __post_init__(self):
        if self.grad is None:
            self.grad = np.zeros_like(self.value)

    @property
    def size(self) -> int:
        return self.value.size


def he_uniform(rng: np.random.Generator, shape, fan_in: int, dtype=np.float64) -> np.ndarray:
    limit = np.sqrt(6.0 / fan_in)
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


# ---------------------------------------------------------------- functional


def conv2d(x: np.ndarray, kernels_: np.ndarray, bias: np.ndarray, cols=None) -> np.ndarray:
    """Stride-1 cross-correlation with zero "same" padding.

    ``x`` is (B, H, W, C_in), ``kernels_`` is (k, k, C_in, C_out).
    """
    k, k2, c_in, c_out = kernels_.shape
    if k != k2 or k % 2 == 0:
        raise ConfigError(f"kernel must be square with odd size, got {kernels_.shape[:2]}")
    if x.ndim != 4 or x.shape[3] != c_in:
        raise ConfigError(f"input {x.shape} does not match kernel channels {c_in}")
    if bias.shape != (c_out,):
        raise ConfigError(f"bias shape {bias.shape} != ({c_out},)")
    B, H, W, _ = x.shape
    if cols is None:
        cols = kernels.im2col(x, k)
    out = cols @ kernels_.reshape(k * k * c_in, c_out)
    out += bias
    return out.reshape(B, H, W, c_out)


def conv2d_backward(x: np.ndarray, kernels_: np.ndarray, upstream: np.ndarray, cols=None,
                    need_input=True, need_params=True):
    """Returns (grad_input, grad_kernels, grad_bias); skipped parts are None."""
    k, _, c_in, c_out = kernels_.shape
    g = upstream.reshape(-1, c_out)
    grad_k = grad_b = grad_x = None
    if need_params:
        if cols is None:
            cols = kernels.im2col(x, k)
        grad_k = (cols.T @ g).reshape(kernels_.shape)
        grad_b = g.sum(axis=0)
    if need_input:
        gcols = g @ kernels_.reshape(k * k * c_in, c_out).T
        grad_x = kernels.col2im(gcols, x.shape, k)
    return grad_x, grad_k, grad_b


# ---------------------------------------------------------------- layers


class Layer:
    def parameters(self) -> list[Parameter]:
        return []

    def forward(self, x, train=True):
        raise NotImplementedError

    def backward(self, g):
        raise NotImplementedError


class Conv2D(Layer):
    def __init__(self, c_in, c_out, k=5, rng=None, dtype=np.float64, name="conv"):
        rng = np.random.default_rng() if rng is None else rng
        self.k = k
        self.kernel = Parameter(he_uniform(rng, (k, k, c_in, c_out), k * k * c_in, dtype), name=f"{name}.kernel")
        self.bias = Parameter(np.zeros(c_out, dtype=dtype), name=f"{name}.bias")
        self.need_input_grad = True
        self._x = self._cols = None

    def parameters(self):
        return [self.kernel, self.bias]

    @property
    def frozen(self) -> bool:
        return self.kernel.frozen and self.bias.frozen

    def forward(self, x, train=True):
        cols = kernels.im2col(np.ascontiguousarray(x, dtype=self.kernel.value.dtype), self.k)
        if train:
            self._x, self._cols = x, cols
        return conv2d(x, self.kernel.value, self.bias.value, cols=cols)

    def backward(self, g):
        gx, gk, gb = conv2d_backward(self._x, self.kernel.value, g, cols=self._cols,
                                     need_input=self.need_input_grad, need_params=not self.frozen)
        if gk is not None:
            self.kernel.grad[...] = gk
            self.bias.grad[...] = gb
        return gx


class ReLU(Layer):
    def forward(self, x, train=True):
        mask = x > 0
        if train:
            self._mask = mask
        return x * mask

    def backward(self, g):
        return g * self._mask


def relu(x):
    return np.maximum(x, 0)


class BatchNorm(Layer):
    """Per-channel normalization over all axes but the last.

    ``locked`` forces inference behaviour (running statistics, no updates)
    even when called with ``train=True``.
    """

    def __init__(self, channels, eps=1e-5, momentum=0.9, dtype=np.float64, name="bn"):
        self.gamma = Parameter(np.ones(channels, dtype=dtype), name=f"{name}.gamma")
        self.beta = Parameter(np.zeros(channels, dtype=dtype), name=f"{name}.beta")
        self.running_mean = np.zeros(channels, dtype=dtype)
        self.running_var = np.ones(channels, dtype=dtype)
        self.eps = eps
        self.momentum = momentum
        self.locked = False

    def parameters(self):
        return [self.gamma, self.beta]

    def forward(self, x, train=True):
        axes = tuple(range(x.ndim - 1))
        batch_mode = train and not self.locked
        if batch_mode:
            if x.shape[0] < 2:
                raise InputError("batch norm in train mode needs a batch of at least 2")
            mean = x.mean(axis=axes)
            var = x.var(axis=axes)
            m = self.momentum
            self.running_mean = m * self.running_mean + (1 - m) * mean
            self.running_var = m * self.running_var + (1 - m) * var
        else:
            mean, var = self.running_mean, self.running_var
        inv_std = 1.0 / np.sqrt(var + self.eps)
        xhat = (x - mean) * inv_std
        if train:
            self._cache = (xhat, inv_std, batch_mode)
        return self.gamma.value * xhat + self.beta.value

    def backward(self, g):
        xhat, inv_std, batch_mode = self._cache
        axes = tuple(range(g.ndim - 1))
        sum_g = g.sum(axis=axes)
        sum_gx = (g * xhat).sum(axis=axes)
        if not (self.gamma.frozen and self.beta.frozen):
            self.gamma.grad[...] = sum_gx
            self.beta.grad[...] = sum_g
        if not batch_mode:
            return g * (self.gamma.value * inv_std)
        n = g.size // g.shape[-1]
        return (self.gamma.value * inv_std / n) * (n * g - sum_g - xhat * sum_gx)


def batch_norm(x, gamma, beta, mode="train", running_stats=None, eps=1e-5, momentum=0.9):
    """Functional form; ``running_stats`` is a (mean, var) pair updated in place in train mode."""
    layer = BatchNorm(x.shape[-1], eps=eps, momentum=momentum, dtype=x.dtype)
    layer.gamma.value[...] = gamma
    layer.beta.value[...] = beta
    if running_stats is not None:
        layer.running_mean, layer.running_var = running_stats[0].copy(), running_stats[1].copy()
    out = layer.forward(x, train=(mode == "train"))
    if running_stats is not None and mode == "train":
        running_stats[0][...] = layer.running_mean
        running_stats[1][...] = layer.running_var
    return out


class Dense(Layer):
    """y = x @ W.T + b with W of shape (out, in)."""

    def __init__(self, n_in, n_out, rng=None, dtype=np.float64, name="dense"):
        rng = np.random.default_rng() if rng is None else rng
        self.weight = Parameter(he_uniform(rng, (n_out, n_in), n_in, dtype), name=f"{name}.weight")
        self.bias = Parameter(np.zeros(n_out, dtype=dtype), name=f"{name}.bias")

    def parameters(self):
        return [self.weight, self.bias]

    def forward(self, x, train=True):
        if x.shape[-1] != self.weight.value.shape[1]:
            raise ConfigError(f"dense input width {x.shape[-1]} != {self.weight.value.shape[1]}")
        if train:
            self._x = x
        return x @ self.weight.value.T + self.bias.value

    def backward(self, g):
        if not self.weight.frozen:
            self.weight.grad[...] = g.T @ self._x
            self.bias.grad[...] = g.sum(axis=0)
        return g @ self.weight.value


def dense(x, weights, bias):
    if x.shape[-1] != weights.shape[1] or bias.shape != (weights.shape[0],):
        raise ConfigError(f"dense shapes incompatible: x{x.shape} W{weights.shape} b{bias.shape}")
    return x @ weights.T + bias


class Sequential(Layer):
    def __init__(self, *layers):
        self.layers = list(layers)

    def parameters(self):
        return [p for layer in self.layers for p in layer.parameters()]

    def forward(self, x, train=True):
        for layer in self.layers:
            x = layer.forward(x, train)
        return x

    def backward(self, g):
        for layer in reversed(self.layers):
            g = layer.backward(g)
        return g


def mse_loss(prediction, label):
    """Mean squared error over every element, and its gradient."""
    prediction = np.asarray(prediction)
    label = np.asarray(label)
    if prediction.shape != label.shape:
        raise InputError(f"shape mismatch {prediction.shape} vs {label.shape}")
    diff = prediction - label
    return float(np.mean(diff * diff)), (2.0 / diff.size) * diff
