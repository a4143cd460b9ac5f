"""
Hand-differentiated layers on channel-last arrays.

A layer caches what its backward pass needs during ``forward`` and accumulates
parameter gradients into ``grads`` during ``backward``. An instance is used at most
once per forward pass; composite layers own one child per use site.
"""

from __future__ import annotations

from collections.abc import Iterator

import numpy as np
from numpy.typing import NDArray

from .exceptions import DimensionError

Array = NDArray[np.float64]


class Layer:
    """
    Parameter container with recursive naming
    """

    def __init__(self) -> None:
        self.params: dict[str, Array] = {}
        self.grads: dict[str, Array] = {}
        self.children: dict[str, Layer] = {}
        self.trainable = True

    def add_param(self, name: str, value) -> Array:
        value = np.array(value, dtype=np.float64)
        self.params[name] = value
        self.grads[name] = np.zeros_like(value)
        return value

    def add_child(self, name: str, layer: Layer) -> Layer:
        self.children[name] = layer
        return layer

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Array, Array]]:
        """
        Yield (dotted name, value, gradient) for every trainable parameter
        """
        if not self.trainable:
            return
        for name, value in self.params.items():
            yield f"{prefix}{name}", value, self.grads[name]
        for child_name, child in self.children.items():
            yield from child.named_parameters(f"{prefix}{child_name}.")

    def zero_grad(self) -> None:
        for grad in self.grads.values():
            grad.fill(0.0)
        for child in self.children.values():
            child.zero_grad()

    def state_dict(self) -> dict[str, Array]:
        return {name: value.copy() for name, value, _ in self.named_parameters()}

    def load_state_dict(self, state: dict[str, Array], *, strict: bool = True) -> None:
        for name, value, _ in self.named_parameters():
            if name not in state:
                if strict:
                    raise DimensionError(f"Missing parameter {name} in state")
                continue
            incoming = np.asarray(state[name], dtype=np.float64)
            if incoming.shape != value.shape:
                raise DimensionError(
                    f"Parameter {name}: expected {value.shape}, got {incoming.shape}"
                )
            value[...] = incoming

    def parameter_count(self) -> int:
        return sum(value.size for _, value, _ in self.named_parameters())


class Dense(Layer):
    """
    Affine map over the last axis
    """

    def __init__(
        self,
        n_in: int,
        n_out: int,
        rng: np.random.Generator,
        *,
        bias: bool = True,
        zero_init: bool = False,
    ) -> None:
        super().__init__()
        self.n_in = n_in
        self.n_out = n_out
        self.use_bias = bias
        if zero_init:
            weight = np.zeros((n_in, n_out))
        else:
            weight = rng.normal(0.0, 1.0 / np.sqrt(n_in), size=(n_in, n_out))
        self.add_param("weight", weight)
        if bias:
            self.add_param("bias", np.zeros(n_out))
        self._x: Array | None = None

    def forward(self, x: Array) -> Array:
        if x.shape[-1] != self.n_in:
            raise DimensionError(f"Dense expects width {self.n_in}, got {x.shape[-1]}")
        self._x = x
        y = x @ self.params["weight"]
        if self.use_bias:
            y = y + self.params["bias"]
        return y

    def backward(self, dy: Array) -> Array:
        x2 = self._x.reshape(-1, self.n_in)
        dy2 = dy.reshape(-1, self.n_out)
        self.grads["weight"] += x2.T @ dy2
        if self.use_bias:
            self.grads["bias"] += dy2.sum(axis=0)
        return dy @ self.params["weight"].T


class Conv2d(Layer):
    """
    Square-kernel convolution with zero 'same' padding on an (H, W, C) array.

    Weights are stored flattened as (kernel * kernel * n_in, n_out), row order
    (kernel row, kernel col, input channel).
    """

    def __init__(
        self,
        n_in: int,
        n_out: int,
        rng: np.random.Generator,
        *,
        kernel: int = 3,
        stride: int = 1,
        zero_init: bool = False,
    ) -> None:
        super().__init__()
        self.n_in = n_in
        self.n_out = n_out
        self.kernel = kernel
        self.stride = stride
        self.pad = kernel // 2
        fan_in = kernel * kernel * n_in
        if zero_init:
            weight = np.zeros((fan_in, n_out))
        else:
            weight = rng.normal(0.0, 1.0 / np.sqrt(fan_in), size=(fan_in, n_out))
        self.add_param("weight", weight)
        self.add_param("bias", np.zeros(n_out))
        self._cache: tuple | None = None

    def output_size(self, size: int) -> int:
        return (size + 2 * self.pad - self.kernel) // self.stride + 1

    def _windows(self, out_h: int, out_w: int) -> Iterator[tuple[int, slice, slice]]:
        s = self.stride
        for i in range(self.kernel):
            for j in range(self.kernel):
                yield (
                    i * self.kernel + j,
                    slice(i, i + s * (out_h - 1) + 1, s),
                    slice(j, j + s * (out_w - 1) + 1, s),
                )

    def forward(self, x: Array) -> Array:
        if x.ndim != 3 or x.shape[2] != self.n_in:
            raise DimensionError(
                f"Conv2d expects (H, W, {self.n_in}), got {tuple(x.shape)}"
            )
        height, width = x.shape[:2]
        out_h, out_w = self.output_size(height), self.output_size(width)
        p = self.pad
        padded = np.pad(x, ((p, p), (p, p), (0, 0)))
        patches = [None] * (self.kernel * self.kernel)
        for idx, rows, cols in self._windows(out_h, out_w):
            patches[idx] = padded[rows, cols, :]
        columns = np.stack(patches, axis=2).reshape(out_h * out_w, -1)
        self._cache = (columns, padded.shape, height, width, out_h, out_w)
        y = columns @ self.params["weight"] + self.params["bias"]
        return y.reshape(out_h, out_w, self.n_out)

    def backward(self, dy: Array) -> Array:
        columns, padded_shape, height, width, out_h, out_w = self._cache
        dy2 = dy.reshape(-1, self.n_out)
        self.grads["weight"] += columns.T @ dy2
        self.grads["bias"] += dy2.sum(axis=0)
        dcols = (dy2 @ self.params["weight"].T).reshape(
            out_h, out_w, self.kernel * self.kernel, self.n_in
        )
        dpadded = np.zeros(padded_shape)
        for idx, rows, cols in self._windows(out_h, out_w):
            dpadded[rows, cols, :] += dcols[:, :, idx, :]
        p = self.pad
        return dpadded[p : p + height, p : p + width, :]


class ReLU(Layer):
    def forward(self, x: Array) -> Array:
        self._mask = x > 0
        return np.where(self._mask, x, 0.0)

    def backward(self, dy: Array) -> Array:
        return np.where(self._mask, dy, 0.0)


class SiLU(Layer):
    def forward(self, x: Array) -> Array:
        self._x = x
        self._sig = 1.0 / (1.0 + np.exp(-x))
        return x * self._sig

    def backward(self, dy: Array) -> Array:
        s = self._sig
        return dy * s * (1.0 + self._x * (1.0 - s))


class Upsample2x(Layer):
    """
    Nearest-neighbour doubling of both spatial axes
    """

    def forward(self, x: Array) -> Array:
        return np.repeat(np.repeat(x, 2, axis=0), 2, axis=1)

    def backward(self, dy: Array) -> Array:
        h, w, c = dy.shape
        return dy.reshape(h // 2, 2, w // 2, 2, c).sum(axis=(1, 3))


def mse_loss(pred: Array, target: Array) -> tuple[float, Array]:
    """
    Mean squared error and its gradient with respect to ``pred``
    """
    if pred.shape != target.shape:
        raise DimensionError(f"MSE shapes differ: {pred.shape} vs {target.shape}")
    diff = pred - target
    return float(np.mean(diff * diff)), 2.0 * diff / diff.size


def max_pool_mask(mask: NDArray, factor: int) -> NDArray[np.bool_]:
    """
    Downsample a binary mask: a cell is set if any covered pixel is set
    """
    h, w = mask.shape
    if h % factor or w % factor:
        raise DimensionError(f"Mask {mask.shape} not divisible by {factor}")
    blocks = np.asarray(mask, dtype=bool).reshape(h // factor, factor, w // factor, factor)
    return blocks.any(axis=(1, 3))
