"""Minimal float64 neural substrate: layers with handwritten backward passes,
an ADAM optimizer with L2 weight penalty, and finite-difference gradient
verification. No autodiff, no GPU; training is single-threaded and
deterministic given a seeded generator."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class TrainingError(RuntimeError):
    """Non-finite loss or gradient encountered during training."""


def he_uniform(shape, fan_in: int, rng: np.random.Generator | None) -> np.ndarray:
    if rng is None:
        return np.zeros(shape)
    bound = np.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape)


class Layer:
    """forward(x) caches whatever backward needs; backward(grad_out) returns
    the gradient w.r.t. the input and accumulates parameter gradients."""

    def params(self) -> dict[str, np.ndarray]:
        return {}

    def grads(self) -> dict[str, np.ndarray]:
        return {}

    def zero_grads(self) -> None:
        for g in self.grads().values():
            g[...] = 0.0

    def forward(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class Dense(Layer):
    """Affine map W x + b on batched rows (N, in) -> (N, out)."""

    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator | None = None,
                 zero_init: bool = False):
        self.weight = np.zeros((out_dim, in_dim)) if zero_init else he_uniform((out_dim, in_dim), in_dim, rng)
        self.bias = np.zeros(out_dim)
        self.grad_weight = np.zeros_like(self.weight)
        self.grad_bias = np.zeros_like(self.bias)
        self._x: np.ndarray | None = None

    def params(self):
        return {"weight": self.weight, "bias": self.bias}

    def grads(self):
        return {"weight": self.grad_weight, "bias": self.grad_bias}

    def forward(self, x):
        if x.ndim != 2 or x.shape[1] != self.weight.shape[1]:
            raise ValueError(f"dense expects (N, {self.weight.shape[1]}), got {x.shape}")
        self._x = x
        return x @ self.weight.T + self.bias

    def backward(self, grad_out):
        if self._x is None:
            raise RuntimeError("backward called before forward")
        self.grad_weight += grad_out.T @ self._x
        self.grad_bias += grad_out.sum(axis=0)
        return grad_out @ self.weight


class ReLU(Layer):
    def __init__(self):
        self._mask: np.ndarray | None = None

    def forward(self, x):
        self._mask = x > 0.0
        return x * self._mask

    def backward(self, grad_out):
        if self._mask is None:
            raise RuntimeError("backward called before forward")
        return grad_out * self._mask


class Conv2d(Layer):
    """k x k cross-correlation, stride 1, zero padding preserving H x W.
    Input is channel-first (N, C, H, W); k must be odd."""

    def __init__(self, in_ch: int, out_ch: int, k: int, rng: np.random.Generator | None = None):
        if k % 2 != 1:
            raise ValueError(f"kernel size must be odd, got {k}")
        self.kernels = he_uniform((out_ch, in_ch, k, k), in_ch * k * k, rng)
        self.bias = np.zeros(out_ch)
        self.grad_kernels = np.zeros_like(self.kernels)
        self.grad_bias = np.zeros_like(self.bias)
        self.k = k
        self._cols: np.ndarray | None = None
        self._in_shape: tuple | None = None

    def params(self):
        return {"kernels": self.kernels, "bias": self.bias}

    def grads(self):
        return {"kernels": self.grad_kernels, "bias": self.grad_bias}

    def forward(self, x):
        out_ch, in_ch, k, _ = self.kernels.shape
        if x.ndim != 4 or x.shape[1] != in_ch:
            raise ValueError(f"conv expects (N, {in_ch}, H, W), got {x.shape}")
        n, _, h, w = x.shape
        pad = k // 2
        # channels-last padded copy; each kernel tap is then one contiguous
        # GEMM over the full padded grid plus a shifted accumulation, which
        # avoids materializing k*k-fold im2col buffers
        padded = np.pad(x.transpose(0, 2, 3, 1), ((0, 0), (pad, pad), (pad, pad), (0, 0)))
        self._padded = padded
        self._in_shape = x.shape
        hp, wp = h + 2 * pad, w + 2 * pad
        flat = padded.reshape(-1, in_ch)
        out = np.zeros((n, h, w, out_ch))
        for i in range(k):
            for j in range(k):
                tap = (flat @ self.kernels[:, :, i, j].T).reshape(n, hp, wp, out_ch)
                out += tap[:, i : i + h, j : j + w, :]
        out += self.bias
        return np.ascontiguousarray(out.transpose(0, 3, 1, 2))

    def backward(self, grad_out):
        if self._padded is None:
            raise RuntimeError("backward called before forward")
        n, in_ch, h, w = self._in_shape
        out_ch = self.kernels.shape[0]
        k = self.k
        pad = k // 2
        grad_nhwc = np.ascontiguousarray(grad_out.transpose(0, 2, 3, 1))
        grad_flat = grad_nhwc.reshape(-1, out_ch)
        self.grad_bias += grad_flat.sum(axis=0)
        grad_padded = np.zeros((n, h + 2 * pad, w + 2 * pad, in_ch))
        for i in range(k):
            for j in range(k):
                grad_padded[:, i : i + h, j : j + w, :] += (
                    grad_flat @ self.kernels[:, :, i, j]
                ).reshape(n, h, w, in_ch)
                shifted = self._padded[:, i : i + h, j : j + w, :]
                self.grad_kernels[:, :, i, j] += np.tensordot(
                    grad_nhwc, shifted, axes=([0, 1, 2], [0, 1, 2]))
        return np.ascontiguousarray(
            grad_padded[:, pad : pad + h, pad : pad + w, :].transpose(0, 3, 1, 2))


class MaxPool2x2(Layer):
    """Non-overlapping 2x2 max pooling with floor semantics: an odd trailing
    row/column is dropped and receives zero gradient."""

    def __init__(self):
        self._idx: np.ndarray | None = None
        self._in_shape: tuple | None = None

    def forward(self, x):
        n, c, h, w = x.shape
        h2, w2 = h // 2, w // 2
        if h2 == 0 or w2 == 0:
            raise ValueError(f"input {x.shape} too small for 2x2 pooling")
        windows = (
            x[:, :, : h2 * 2, : w2 * 2]
            .reshape(n, c, h2, 2, w2, 2)
            .transpose(0, 1, 2, 4, 3, 5)
            .reshape(n, c, h2, w2, 4)
        )
        self._idx = windows.argmax(axis=-1)
        self._in_shape = x.shape
        return np.take_along_axis(windows, self._idx[..., None], axis=-1)[..., 0]

    def backward(self, grad_out):
        if self._idx is None:
            raise RuntimeError("backward called before forward")
        n, c, h, w = self._in_shape
        h2, w2 = h // 2, w // 2
        grad_windows = np.zeros((n, c, h2, w2, 4))
        np.put_along_axis(grad_windows, self._idx[..., None], grad_out[..., None], axis=-1)
        grad_in = np.zeros(self._in_shape)
        grad_in[:, :, : h2 * 2, : w2 * 2] = (
            grad_windows.reshape(n, c, h2, w2, 2, 2)
            .transpose(0, 1, 2, 4, 3, 5)
            .reshape(n, c, h2 * 2, w2 * 2)
        )
        return grad_in


class NearestUpsample2x(Layer):
    def forward(self, x):
        return x.repeat(2, axis=2).repeat(2, axis=3)

    def backward(self, grad_out):
        n, c, h2, w2 = grad_out.shape
        return grad_out.reshape(n, c, h2 // 2, 2, w2 // 2, 2).sum(axis=(3, 5))


class PadToSize(Layer):
    """Edge-replicating pad on the bottom/right up to a target (H, W); the
    backward pass folds padded-region gradients back onto the edge."""

    def __init__(self, target_hw: tuple):
        self.target_hw = tuple(int(v) for v in target_hw)
        self._in_shape: tuple | None = None

    def forward(self, x):
        th, tw = self.target_hw
        n, c, h, w = x.shape
        if th < h or tw < w:
            raise ValueError(f"cannot pad {x.shape} down to {self.target_hw}")
        self._in_shape = x.shape
        return np.pad(x, ((0, 0), (0, 0), (0, th - h), (0, tw - w)), mode="edge")

    def backward(self, grad_out):
        if self._in_shape is None:
            raise RuntimeError("backward called before forward")
        _, _, h, w = self._in_shape
        grad_in = grad_out[:, :, :h, :w].copy()
        if grad_out.shape[2] > h:
            grad_in[:, :, -1, :] += grad_out[:, :, h:, :w].sum(axis=2)
        if grad_out.shape[3] > w:
            grad_in[:, :, :, -1] += grad_out[:, :, :h, w:].sum(axis=3)
        if grad_out.shape[2] > h and grad_out.shape[3] > w:
            grad_in[:, :, -1, -1] += grad_out[:, :, h:, w:].sum(axis=(2, 3))
        return grad_in


class Flatten(Layer):
    def __init__(self):
        self._in_shape: tuple | None = None

    def forward(self, x):
        self._in_shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, grad_out):
        if self._in_shape is None:
            raise RuntimeError("backward called before forward")
        return grad_out.reshape(self._in_shape)


class Reshape(Layer):
    """Reshape each batch element to a fixed target shape."""

    def __init__(self, target_shape: tuple):
        self.target_shape = tuple(int(v) for v in target_shape)
        self._in_shape: tuple | None = None

    def forward(self, x):
        self._in_shape = x.shape
        return x.reshape((x.shape[0], *self.target_shape))

    def backward(self, grad_out):
        if self._in_shape is None:
            raise RuntimeError("backward called before forward")
        return grad_out.reshape(self._in_shape)


class Sequential(Layer):
    def __init__(self, layers: list):
        self.layers = list(layers)

    def params(self):
        return {f"{i}.{name}": arr
                for i, layer in enumerate(self.layers)
                for name, arr in layer.params().items()}

    def grads(self):
        return {f"{i}.{name}": arr
                for i, layer in enumerate(self.layers)
                for name, arr in layer.grads().items()}

    def forward(self, x):
        for layer in self.layers:
            x = layer.forward(x)
        return x

    def backward(self, grad_out):
        for layer in reversed(self.layers):
            grad_out = layer.backward(grad_out)
        return grad_out


@dataclass
class AdamState:
    """ADAM moments plus hyperparameters. weight_decay is an L2 coefficient
    added to the gradients as weight_decay * param."""

    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.0
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(state: AdamState, params: dict, grads: dict) -> AdamState:
    """One bias-corrected ADAM update, in place on the parameter arrays."""
    state.step += 1
    correction1 = 1.0 - state.beta1**state.step
    correction2 = 1.0 - state.beta2**state.step
    for name, p in params.items():
        g = grads[name]
        if not np.isfinite(g).all():
            raise TrainingError(f"non-finite gradient for parameter {name!r}")
        if state.weight_decay:
            g = g + state.weight_decay * p
        m = state.m.setdefault(name, np.zeros_like(p))
        v = state.v.setdefault(name, np.zeros_like(p))
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        p -= state.lr * (m / correction1) / (np.sqrt(v / correction2) + state.eps)
    return state


def grad_check(loss_fn, params: dict, grads: dict, rng: np.random.Generator | None = None,
               num_checks: int = 120, h: float = 1e-5) -> float:
    """Compare analytic gradients against central finite differences on a
    random subset of parameter entries. Returns the max relative error, where
    the denominator is floored at 1e-3 so roundoff on near-zero gradients
    does not register as disagreement."""
    rng = np.random.default_rng(0) if rng is None else rng
    snapshot = {name: g.copy() for name, g in grads.items()}
    names = list(params)
    sizes = np.array([params[name].size for name in names])
    bounds = np.cumsum(sizes)
    total = int(bounds[-1])
    picks = rng.choice(total, size=min(num_checks, total), replace=False)
    worst = 0.0
    for pick in picks:
        which = int(np.searchsorted(bounds, pick, side="right"))
        name = names[which]
        flat = int(pick - (bounds[which] - sizes[which]))
        p = params[name]
        original = p.flat[flat]
        p.flat[flat] = original + h
        loss_plus = loss_fn()
        p.flat[flat] = original - h
        loss_minus = loss_fn()
        p.flat[flat] = original
        numeric = (loss_plus - loss_minus) / (2.0 * h)
        analytic = snapshot[name].flat[flat]
        err = abs(numeric - analytic) / max(abs(numeric), abs(analytic), 1e-3)
        worst = max(worst, err)
    return worst
