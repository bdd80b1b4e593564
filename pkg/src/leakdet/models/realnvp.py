"""RealNVP density estimator: a stack of affine coupling layers over feature
vectors, trained by maximum likelihood with handwritten gradients.

Each coupling passes half the dimensions through untouched and applies an
affine map exp(s), t to the rest, where s and t come from small MLPs fed
with the pass-through half. Masks alternate between the even and odd index
halves. The scale output goes through tanh times a learnable factor and the
output layers start at zero, so every coupling is the identity at
initialization and log p equals the standard-normal base density exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import nn

LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True)
class RealNvpConfig:
    dim: int = 25
    n_couplings: int = 3
    hidden: int = 150
    batch_size: int = 768
    epochs: int = 50
    lr: float = 1e-3
    weight_decay: float = 0.0


def _mask_for(layer_index: int, dim: int) -> np.ndarray:
    parity = layer_index % 2
    return (np.arange(dim) % 2) == parity  # True = pass-through dims


class Coupling:
    """One affine coupling layer with scale/shift MLPs (ReLU hidden,
    zero-initialized output) over the pass-through dimensions."""

    def __init__(self, mask: np.ndarray, hidden: int, rng: np.random.Generator | None):
        self.mask = np.asarray(mask, dtype=bool)
        n_pass = int(self.mask.sum())
        n_change = int(self.mask.size - n_pass)
        self.scale_net = nn.Sequential([
            nn.Dense(n_pass, hidden, rng), nn.ReLU(), nn.Dense(hidden, n_change, zero_init=True),
        ])
        self.shift_net = nn.Sequential([
            nn.Dense(n_pass, hidden, rng), nn.ReLU(), nn.Dense(hidden, n_change, zero_init=True),
        ])
        self.factor = np.array(1.0)
        self.grad_factor = np.array(0.0)
        self._cache = None

    def params(self) -> dict[str, np.ndarray]:
        out = {f"scale.{k}": v for k, v in self.scale_net.params().items()}
        out.update({f"shift.{k}": v for k, v in self.shift_net.params().items()})
        out["factor"] = self.factor
        return out

    def grads(self) -> dict[str, np.ndarray]:
        out = {f"scale.{k}": v for k, v in self.scale_net.grads().items()}
        out.update({f"shift.{k}": v for k, v in self.shift_net.grads().items()})
        out["factor"] = self.grad_factor
        return out

    def forward(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        x_pass = x[:, self.mask]
        x_change = x[:, ~self.mask]
        squashed = np.tanh(self.scale_net.forward(x_pass))
        log_scale = squashed * self.factor
        shift = self.shift_net.forward(x_pass)
        scale = np.exp(log_scale)
        y = np.empty_like(x)
        y[:, self.mask] = x_pass
        y[:, ~self.mask] = x_change * scale + shift
        self._cache = (x_change, squashed, scale)
        return y, log_scale.sum(axis=1)

    def backward(self, grad_y: np.ndarray, grad_logdet: np.ndarray) -> np.ndarray:
        if self._cache is None:
            raise RuntimeError("backward called before forward")
        x_change, squashed, scale = self._cache
        grad_out_change = grad_y[:, ~self.mask]
        # y_change = x_change*exp(s) + t and logdet contribution = sum(s)
        grad_s = grad_out_change * x_change * scale + grad_logdet[:, None]
        self.grad_factor += (grad_s * squashed).sum()
        grad_raw = grad_s * self.factor * (1.0 - squashed**2)
        grad_pass = (
            grad_y[:, self.mask]
            + self.scale_net.backward(grad_raw)
            + self.shift_net.backward(grad_out_change)
        )
        grad_x = np.empty_like(grad_y)
        grad_x[:, self.mask] = grad_pass
        grad_x[:, ~self.mask] = grad_out_change * scale
        return grad_x

    def inverse(self, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        y_pass = y[:, self.mask]
        log_scale = np.tanh(self.scale_net.forward(y_pass)) * self.factor
        shift = self.shift_net.forward(y_pass)
        x = np.empty_like(y)
        x[:, self.mask] = y_pass
        x[:, ~self.mask] = (y[:, ~self.mask] - shift) * np.exp(-log_scale)
        return x, -log_scale.sum(axis=1)


@dataclass
class RealNvpParams:
    dim: int
    hidden: int
    couplings: list

    def params(self) -> dict[str, np.ndarray]:
        return {f"c{i}.{k}": v
                for i, c in enumerate(self.couplings)
                for k, v in c.params().items()}

    def grads(self) -> dict[str, np.ndarray]:
        return {f"c{i}.{k}": v
                for i, c in enumerate(self.couplings)
                for k, v in c.grads().items()}

    def zero_grads(self) -> None:
        for c in self.couplings:
            c.scale_net.zero_grads()
            c.shift_net.zero_grads()
            c.grad_factor[...] = 0.0


def build(config: RealNvpConfig = RealNvpConfig(),
          rng: np.random.Generator | None = None) -> RealNvpParams:
    couplings = [Coupling(_mask_for(i, config.dim), config.hidden, rng)
                 for i in range(config.n_couplings)]
    return RealNvpParams(config.dim, config.hidden, couplings)


def _as_batch(params: RealNvpParams, x: np.ndarray) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    batch = np.atleast_2d(x)
    if batch.shape[1] != params.dim:
        raise ValueError(f"expected {params.dim}-dim inputs, got shape {x.shape}")
    return batch, single


def forward(params: RealNvpParams, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Map data to the latent base space; log p(x) = log N(z; 0, I) + log_det."""
    z, single = _as_batch(params, x)
    log_det = np.zeros(z.shape[0])
    for coupling in params.couplings:
        z, contribution = coupling.forward(z)
        log_det = log_det + contribution
    if not np.isfinite(z).all():
        raise FloatingPointError("non-finite values in coupling forward pass")
    if single:
        return z[0], float(log_det[0])
    return z, log_det


def inverse(params: RealNvpParams, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    x, single = _as_batch(params, z)
    log_det = np.zeros(x.shape[0])
    for coupling in reversed(params.couplings):
        x, contribution = coupling.inverse(x)
        log_det = log_det + contribution
    if not np.isfinite(x).all():
        raise FloatingPointError("non-finite values in coupling inverse pass")
    if single:
        return x[0], float(log_det[0])
    return x, log_det


def log_prob(params: RealNvpParams, x: np.ndarray) -> np.ndarray:
    batch, single = _as_batch(params, x)
    z, log_det = forward(params, batch)
    lp = -0.5 * (params.dim * LOG_2PI + (z**2).sum(axis=1)) + log_det
    return float(lp[0]) if single else lp


def neg_log_prob(params: RealNvpParams, x: np.ndarray) -> float:
    return -float(log_prob(params, np.asarray(x, dtype=np.float64)))


def loss_and_grads(params: RealNvpParams, batch: np.ndarray) -> float:
    """Mean negative log-likelihood of the batch; fills parameter gradients."""
    batch = np.atleast_2d(np.asarray(batch, dtype=np.float64))
    n = batch.shape[0]
    params.zero_grads()
    z = batch
    log_det = np.zeros(n)
    for coupling in params.couplings:
        z, contribution = coupling.forward(z)
        log_det = log_det + contribution
    loss = 0.5 * float((z**2).sum()) / n + 0.5 * params.dim * LOG_2PI - float(log_det.mean())
    grad_z = z / n
    grad_logdet = np.full(n, -1.0 / n)
    for coupling in reversed(params.couplings):
        grad_z = coupling.backward(grad_z, grad_logdet)
    return loss


def fit(X: np.ndarray, config: RealNvpConfig = RealNvpConfig(),
        rng: np.random.Generator | None = None) -> tuple[RealNvpParams, list[float]]:
    """ADAM maximum-likelihood training. Returns the parameters and the
    per-epoch mean loss (negative mean log-likelihood) trace."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    n = X.shape[0]
    if n < config.batch_size:
        raise ValueError(
            f"dataset ({n}) smaller than one batch ({config.batch_size})")
    rng = np.random.default_rng(0) if rng is None else rng
    params = build(config, rng)
    param_dict = params.params()
    grad_dict = params.grads()
    adam = nn.AdamState(lr=config.lr, weight_decay=config.weight_decay)
    history: list[float] = []
    for _ in range(config.epochs):
        order = rng.permutation(n)
        epoch_losses = []
        for start in range(0, n, config.batch_size):
            batch = X[order[start : start + config.batch_size]]
            loss = loss_and_grads(params, batch)
            if not np.isfinite(loss):
                raise nn.TrainingError(f"non-finite training loss {loss!r}")
            nn.adam_step(adam, param_dict, grad_dict)
            epoch_losses.append(loss)
        history.append(float(np.mean(epoch_losses)))
    return params, history
