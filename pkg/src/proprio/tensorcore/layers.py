"""Layers with explicit forward/backward passes.

Layers operate on batches (leading batch axis). Dense also accepts a bare
vector and Conv2d/ConvTranspose2d a bare ``(c, h, w)`` image; the batch axis
is added and removed transparently in that case. ``Sequential`` requires
batched input.

Backward passes accumulate into ``Param.grad``; call
:func:`proprio.tensorcore.optim.zero_grads` between steps.
"""

import math

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import DimensionError, StateError
from . import real_dtype

# Parameter kind codes used by the checkpoint format.
KIND_DENSE_W = 1
KIND_DENSE_B = 2
KIND_CONV_W = 3
KIND_CONV_B = 4
KIND_CONVT_W = 5
KIND_CONVT_B = 6


class Param:
    """A trainable tensor plus its gradient accumulator."""

    __slots__ = ("name", "kind", "value", "grad")

    def __init__(self, name, kind, value):
        self.name = name
        self.kind = kind
        self.value = value
        self.grad = np.zeros_like(value)


def _he_uniform(rng, shape, fan_in):
    lim = math.sqrt(6.0 / fan_in)
    return rng.uniform(-lim, lim, shape).astype(real_dtype())


def _as_real(x):
    return np.asarray(x, dtype=real_dtype())


def _corr(xp, w, stride):
    """Cross-correlate a padded batch ``(b, ci, H, W)`` with ``(co, ci, k, k)``.

    Returns the output ``(b, co, ho, wo)`` and the strided window view used,
    so callers can reuse it for the weight gradient.
    """
    k = w.shape[-1]
    win = sliding_window_view(xp, (k, k), axis=(2, 3))[:, :, ::stride, ::stride]
    y = np.tensordot(win, w, axes=([1, 4, 5], [1, 2, 3]))
    return np.ascontiguousarray(np.moveaxis(y, 3, 1)), win


class Layer:
    def forward(self, x):
        raise NotImplementedError

    def backward(self, grad):
        raise NotImplementedError

    def params(self):
        return []


class Dense(Layer):
    """Affine map ``y = W x + b`` with W of shape (out_dim, in_dim)."""

    def __init__(self, in_dim, out_dim, rng, name="dense"):
        self.name = name
        self.w = Param(name + ".weights", KIND_DENSE_W, _he_uniform(rng, (out_dim, in_dim), in_dim))
        self.b = Param(name + ".bias", KIND_DENSE_B, np.zeros(out_dim, dtype=real_dtype()))
        self._x = None
        self._single = False

    def forward(self, x):
        x = _as_real(x)
        self._single = x.ndim == 1
        if self._single:
            x = x[None, :]
        if x.ndim != 2 or x.shape[1] != self.w.value.shape[1]:
            raise DimensionError(
                f"{self.name}: input shape {x.shape} does not match weights "
                f"{self.w.value.shape}"
            )
        self._x = x
        y = x @ self.w.value.T + self.b.value
        return y[0] if self._single else y

    def backward(self, grad):
        if self._x is None:
            raise StateError(f"{self.name}: backward before forward")
        g = _as_real(grad)
        if self._single:
            g = g[None, :]
        if g.shape != (self._x.shape[0], self.w.value.shape[0]):
            raise DimensionError(
                f"{self.name}: upstream grad shape {g.shape} does not match "
                f"output shape ({self._x.shape[0]}, {self.w.value.shape[0]})"
            )
        self.w.grad += g.T @ self._x
        self.b.grad += g.sum(axis=0)
        gx = g @ self.w.value
        return gx[0] if self._single else gx

    def params(self):
        return [self.w, self.b]


class Conv2d(Layer):
    """2-D cross-correlation, weights (out_ch, in_ch, k, k)."""

    def __init__(self, in_ch, out_ch, kernel, rng, stride=1, padding=0, name="conv"):
        if stride < 1:
            raise DimensionError(f"{name}: stride must be >= 1, got {stride}")
        self.name = name
        self.stride = stride
        self.padding = padding
        fan_in = in_ch * kernel * kernel
        self.w = Param(
            name + ".weights", KIND_CONV_W, _he_uniform(rng, (out_ch, in_ch, kernel, kernel), fan_in)
        )
        self.b = Param(name + ".bias", KIND_CONV_B, np.zeros(out_ch, dtype=real_dtype()))
        self._win = None
        self._in_shape = None
        self._single = False

    def forward(self, x):
        x = _as_real(x)
        self._single = x.ndim == 3
        if self._single:
            x = x[None]
        co, ci, k, _ = self.w.value.shape
        if x.ndim != 4 or x.shape[1] != ci:
            raise DimensionError(
                f"{self.name}: input shape {x.shape} does not match weights {self.w.value.shape}"
            )
        b, _, h, w = x.shape
        p = self.padding
        if k > h + 2 * p or k > w + 2 * p:
            raise DimensionError(
                f"{self.name}: kernel {k} larger than padded input {(h + 2 * p, w + 2 * p)}"
            )
        xp = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p)))
        y, win = _corr(xp, self.w.value, self.stride)
        self._win = win
        self._in_shape = (b, ci, h, w)
        y += self.b.value[None, :, None, None]
        return y[0] if self._single else y

    def backward(self, grad):
        if self._win is None:
            raise StateError(f"{self.name}: backward before forward")
        g = _as_real(grad)
        if self._single:
            g = g[None]
        b, ci, h, w = self._in_shape
        co, _, k, _ = self.w.value.shape
        s, p = self.stride, self.padding
        ho, wo = g.shape[2], g.shape[3]

        self.w.grad += np.tensordot(g, self._win, axes=([0, 2, 3], [0, 2, 3]))
        self.b.grad += g.sum(axis=(0, 2, 3))

        # Input gradient: zero-stuff g by the stride inside a (k-1)-padded
        # buffer, then correlate with the flipped, channel-swapped kernel.
        extra_h = (h + 2 * p - k) % s
        extra_w = (w + 2 * p - k) % s
        gu = np.zeros(
            (b, co, 2 * (k - 1) + (ho - 1) * s + 1 + extra_h, 2 * (k - 1) + (wo - 1) * s + 1 + extra_w),
            dtype=g.dtype,
        )
        gu[:, :, k - 1 : k - 1 + (ho - 1) * s + 1 : s, k - 1 : k - 1 + (wo - 1) * s + 1 : s] = g
        wt = self.w.value[:, :, ::-1, ::-1].transpose(1, 0, 2, 3)
        dxp, _ = _corr(gu, wt, 1)
        dx = dxp[:, :, p : p + h, p : p + w]
        return dx[0] if self._single else dx

    def params(self):
        return [self.w, self.b]


class ConvTranspose2d(Layer):
    """Transposed convolution (adjoint of Conv2d), weights (in_ch, out_ch, k, k)."""

    def __init__(self, in_ch, out_ch, kernel, rng, stride=1, padding=0, output_padding=0, name="convt"):
        if padding > kernel - 1:
            raise DimensionError(f"{name}: padding must be <= kernel-1")
        if output_padding >= stride:
            raise DimensionError(f"{name}: output_padding must be < stride")
        self.name = name
        self.stride = stride
        self.padding = padding
        self.output_padding = output_padding
        fan_in = in_ch * kernel * kernel
        self.w = Param(
            name + ".weights", KIND_CONVT_W, _he_uniform(rng, (in_ch, out_ch, kernel, kernel), fan_in)
        )
        self.b = Param(name + ".bias", KIND_CONVT_B, np.zeros(out_ch, dtype=real_dtype()))
        self._win = None
        self._in_shape = None
        self._single = False

    def forward(self, x):
        x = _as_real(x)
        self._single = x.ndim == 3
        if self._single:
            x = x[None]
        ci, co, k, _ = self.w.value.shape
        if x.ndim != 4 or x.shape[1] != ci:
            raise DimensionError(
                f"{self.name}: input shape {x.shape} does not match weights {self.w.value.shape}"
            )
        b, _, h, w = x.shape
        s, p, op = self.stride, self.padding, self.output_padding
        pad = k - 1 - p
        xu = np.zeros(
            (b, ci, 2 * pad + (h - 1) * s + 1 + op, 2 * pad + (w - 1) * s + 1 + op), dtype=x.dtype
        )
        xu[:, :, pad : pad + (h - 1) * s + 1 : s, pad : pad + (w - 1) * s + 1 : s] = x
        wf = self.w.value.transpose(1, 0, 2, 3)[:, :, ::-1, ::-1]
        y, win = _corr(xu, wf, 1)
        self._win = win
        self._in_shape = (b, ci, h, w)
        y += self.b.value[None, :, None, None]
        return y[0] if self._single else y

    def backward(self, grad):
        if self._win is None:
            raise StateError(f"{self.name}: backward before forward")
        g = _as_real(grad)
        if self._single:
            g = g[None]
        b, ci, h, w = self._in_shape
        s, p = self.stride, self.padding

        # Weight grad for the flipped kernel used in forward, mapped back.
        dwf = np.tensordot(g, self._win, axes=([0, 2, 3], [0, 2, 3]))
        self.w.grad += dwf.transpose(1, 0, 2, 3)[:, :, ::-1, ::-1]
        self.b.grad += g.sum(axis=(0, 2, 3))

        # Input gradient is a plain strided correlation with the unflipped
        # kernel viewed as (in_ch -> out) over (out_ch -> in) channels.
        gp = np.pad(g, ((0, 0), (0, 0), (p, p), (p, p)))
        dx, _ = _corr(gp, self.w.value, s)
        dx = dx[:, :, :h, :w]
        return dx[0] if self._single else dx

    def params(self):
        return [self.w, self.b]


class LeakyReLU(Layer):
    def __init__(self, slope=0.01):
        self.slope = slope
        self._pos = None

    def forward(self, x):
        x = _as_real(x)
        self._pos = x > 0
        return np.where(self._pos, x, self.slope * x)

    def backward(self, grad):
        if self._pos is None:
            raise StateError("leaky_relu: backward before forward")
        g = _as_real(grad)
        if g.shape != self._pos.shape:
            raise DimensionError(f"leaky_relu: grad shape {g.shape} != input {self._pos.shape}")
        return np.where(self._pos, g, self.slope * g)


class Sigmoid(Layer):
    def __init__(self):
        self._y = None

    def forward(self, x):
        x = _as_real(x)
        self._y = 1.0 / (1.0 + np.exp(-x))
        return self._y

    def backward(self, grad):
        if self._y is None:
            raise StateError("sigmoid: backward before forward")
        return _as_real(grad) * self._y * (1.0 - self._y)


class Flatten(Layer):
    """(b, c, h, w) -> (b, c*h*w)."""

    def __init__(self):
        self._shape = None

    def forward(self, x):
        x = _as_real(x)
        self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, grad):
        if self._shape is None:
            raise StateError("flatten: backward before forward")
        return _as_real(grad).reshape(self._shape)


class Reshape(Layer):
    """(b, n) -> (b, *tail) with n = prod(tail)."""

    def __init__(self, tail):
        self.tail = tuple(tail)
        self._n = None

    def forward(self, x):
        x = _as_real(x)
        n = int(np.prod(self.tail))
        if x.ndim != 2 or x.shape[1] != n:
            raise DimensionError(f"reshape: expected (b, {n}), got {x.shape}")
        self._n = n
        return x.reshape(x.shape[0], *self.tail)

    def backward(self, grad):
        if self._n is None:
            raise StateError("reshape: backward before forward")
        g = _as_real(grad)
        return g.reshape(g.shape[0], self._n)


class Sequential(Layer):
    """Chain of layers over batched input."""

    def __init__(self, layers):
        self.layers = list(layers)

    def forward(self, x):
        for layer in self.layers:
            x = layer.forward(x)
        return x

    def backward(self, grad):
        for layer in reversed(self.layers):
            grad = layer.backward(grad)
        return grad

    def params(self):
        out = []
        for layer in self.layers:
            out.extend(layer.params())
        return out
