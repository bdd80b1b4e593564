"""Convolutional autoencoder over mel spectrograms; the mean squared
reconstruction error is the anomaly score.

Encoder: conv -> ReLU -> 2x2 max-pool per stage with channel widths
(4, 16, 32), then a dense bottleneck. Decoder mirrors it with nearest
upsampling plus convolution; odd spatial sizes are floor-pooled on the way
down and edge-padded back to the recorded encoder sizes on the way up, so
the reconstruction shape always equals the input shape.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import nn


@dataclass(frozen=True)
class DcaeConfig:
    channels: tuple = (4, 16, 32)
    bottleneck: int = 32
    kernel: int = 3
    epochs: int = 100
    batch_size: int = 128
    lr: float = 1e-4
    weight_decay: float = 1e-6


@dataclass
class DcaeParams:
    input_shape: tuple        # (H, W) of the mel spectrograms seen in training
    channels: tuple
    bottleneck: int
    kernel: int
    encoder: nn.Sequential
    decoder: nn.Sequential

    def params(self) -> dict[str, np.ndarray]:
        out = {f"enc.{k}": v for k, v in self.encoder.params().items()}
        out.update({f"dec.{k}": v for k, v in self.decoder.params().items()})
        return out

    def grads(self) -> dict[str, np.ndarray]:
        out = {f"enc.{k}": v for k, v in self.encoder.grads().items()}
        out.update({f"dec.{k}": v for k, v in self.decoder.grads().items()})
        return out

    def zero_grads(self) -> None:
        self.encoder.zero_grads()
        self.decoder.zero_grads()


def build(input_shape: tuple, config: DcaeConfig = DcaeConfig(),
          rng: np.random.Generator | None = None) -> DcaeParams:
    height, width = (int(v) for v in input_shape)
    kernel = config.kernel
    sizes = [(height, width)]
    encoder_layers: list = []
    in_ch = 1
    h, w = height, width
    for ch in config.channels:
        encoder_layers += [nn.Conv2d(in_ch, ch, kernel, rng), nn.ReLU(), nn.MaxPool2x2()]
        h, w = h // 2, w // 2
        if h == 0 or w == 0:
            raise ValueError(f"input {input_shape} too small for {len(config.channels)} pooling stages")
        sizes.append((h, w))
        in_ch = ch
    flat = config.channels[-1] * h * w
    encoder_layers += [nn.Flatten(), nn.Dense(flat, config.bottleneck, rng), nn.ReLU()]

    decoder_layers: list = [
        nn.Dense(config.bottleneck, flat, rng), nn.ReLU(),
        nn.Reshape((config.channels[-1], h, w)),
    ]
    widths = (1, *config.channels)  # (1, 4, 16, 32)
    for level in reversed(range(len(config.channels))):
        decoder_layers += [
            nn.NearestUpsample2x(),
            nn.PadToSize(sizes[level]),
            nn.Conv2d(widths[level + 1], widths[level], kernel, rng),
        ]
        if level > 0:
            decoder_layers.append(nn.ReLU())
    return DcaeParams((height, width), tuple(config.channels), config.bottleneck, kernel,
                      nn.Sequential(encoder_layers), nn.Sequential(decoder_layers))


def _as_batch(params: DcaeParams, specs: np.ndarray) -> np.ndarray:
    x = np.asarray(specs, dtype=np.float64)
    if x.ndim == 2:
        x = x[None]
    if x.ndim != 3 or x.shape[1:] != params.input_shape:
        raise ValueError(f"expected mel spectrograms of shape {params.input_shape}, got {x.shape}")
    return x[:, None, :, :]  # add the channel axis


def reconstruct(params: DcaeParams, specs: np.ndarray) -> np.ndarray:
    x = _as_batch(params, specs)
    out = params.decoder.forward(params.encoder.forward(x))
    return out[:, 0]


def score(params: DcaeParams, spec: np.ndarray) -> float:
    """Mean squared reconstruction error of one spectrogram."""
    x = _as_batch(params, spec)
    out = params.decoder.forward(params.encoder.forward(x))
    return float(np.mean((out - x) ** 2))


def loss_and_grads(params: DcaeParams, batch: np.ndarray) -> float:
    """Mean squared reconstruction error over a batch; fills gradients."""
    x = _as_batch(params, batch)
    params.zero_grads()
    out = params.decoder.forward(params.encoder.forward(x))
    diff = out - x
    loss = float(np.mean(diff**2))
    grad = (2.0 / diff.size) * diff
    params.encoder.backward(params.decoder.backward(grad))
    return loss


def fit(specs: np.ndarray, config: DcaeConfig = DcaeConfig(),
        rng: np.random.Generator | None = None) -> tuple[DcaeParams, list[float]]:
    """ADAM training to minimize reconstruction MSE. Returns the parameters
    and the per-epoch mean loss trace."""
    X = np.asarray(specs, dtype=np.float64)
    if X.ndim != 3:
        raise ValueError(f"expected (N, H, W) mel spectrograms, got shape {X.shape}")
    n = X.shape[0]
    if n < config.batch_size:
        raise ValueError(f"dataset ({n}) smaller than one batch ({config.batch_size})")
    rng = np.random.default_rng(0) if rng is None else rng
    params = build(X.shape[1:], config, rng)
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
