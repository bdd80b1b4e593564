"""Flat dotted-key config files with typed defaults and strict key checking.

Format: one `key = value` pair per line, `#` starts a comment line, blank
lines ignored. Unknown keys are rejected. Defaults are the published
hyperparameters of each model kind; everything is overridable.
"""

from __future__ import annotations

from pathlib import Path

from .detector import AGGREGATIONS
from .models import (BgmmConfig, DcaeConfig, GmmConfig, IforestConfig, KINDS, RealNvpConfig)


class ConfigError(ValueError):
    """Bad config file: unknown key, bad value, or unreadable file."""


def _parse_int(text: str) -> int:
    return int(text)


def _parse_float(text: str) -> float:
    return float(text)


def _parse_str(text: str) -> str:
    return text


def _parse_ints(text: str) -> tuple:
    return tuple(int(part.strip()) for part in text.split(",") if part.strip())


def _parse_strs(text: str) -> tuple:
    return tuple(part.strip() for part in text.split(",") if part.strip())


def _choice(*options):
    def parse(text: str) -> str:
        if text not in options:
            raise ValueError(f"expected one of {options}, got {text!r}")
        return text
    return parse


# key -> (parser, default)
REGISTRY = {
    "seed": (_parse_int, 0),
    "audio.rate": (_parse_int, 16000),
    "audio.bandpass": (_parse_int, 0),  # band-pass ingested audio (contact-mic band)
    "audio.band_lo_hz": (_parse_float, 300.0),
    "audio.band_hi_hz": (_parse_float, 3000.0),
    "model.kind": (_choice(*KINDS), "gmm"),
    "model.gmm.n_components": (_parse_int, 16),
    "model.gmm.max_iter": (_parse_int, 200),
    "model.gmm.tol": (_parse_float, 1e-6),
    "model.bgmm.n_components": (_parse_int, 16),
    "model.bgmm.max_iter": (_parse_int, 200),
    "model.bgmm.tol": (_parse_float, 1e-6),
    "model.iforest.n_trees": (_parse_int, 120),
    "model.iforest.subsample": (_parse_int, 256),
    "model.realnvp.couplings": (_parse_int, 3),
    "model.realnvp.hidden": (_parse_int, 150),
    "model.realnvp.batch_size": (_parse_int, 768),
    "model.realnvp.epochs": (_parse_int, 50),
    "model.realnvp.lr": (_parse_float, 1e-3),
    "model.realnvp.weight_decay": (_parse_float, 0.0),
    "model.dcae.channels": (_parse_ints, (4, 16, 32)),
    "model.dcae.bottleneck": (_parse_int, 32),
    "model.dcae.kernel": (_parse_int, 3),
    "model.dcae.epochs": (_parse_int, 100),
    "model.dcae.batch_size": (_parse_int, 128),
    "model.dcae.lr": (_parse_float, 1e-4),
    "model.dcae.weight_decay": (_parse_float, 1e-6),
    "detector.h_minutes": (_parse_float, 30.0),
    "detector.t_seconds": (_parse_float, 2.0),
    "detector.m": (_parse_int, 0),  # 0 = scale with the horizon (20 at 30 min)
    "detector.phi": (_choice(*AGGREGATIONS), "median"),
    "data.set": (_choice("close", "distant"), "distant"),
    "data.n_per_class": (_parse_int, 8),
    "data.snr_db": (_parse_float, 24.0),
    "data.train_minutes": (_parse_float, 20.0),
    "eval.models": (_parse_strs, ("gmm", "bgmm", "iforest", "realnvp", "dcae")),
    "eval.seeds": (_parse_ints, (0, 1, 2, 3, 4)),
    "sweep.m_values": (_parse_ints, tuple(range(5, 106, 10))),
}


def default_config() -> dict:
    return {key: default for key, (_, default) in REGISTRY.items()}


def load_config(path=None) -> dict:
    """Defaults overlaid with the file at `path` (if given). Raises
    ConfigError naming the first unknown key or bad value."""
    config = default_config()
    if path is None:
        return config
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw_line!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in REGISTRY:
            raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
        parser, _ = REGISTRY[key]
        try:
            config[key] = parser(value)
        except ValueError as exc:
            raise ConfigError(f"{path}:{lineno}: bad value for {key!r}: {exc}") from exc
    return config


def effective_lines(config: dict) -> list:
    """The effective configuration (defaults applied) as sorted text lines,
    for echoing into artifact headers and manifests."""
    lines = []
    for key in sorted(config):
        value = config[key]
        if isinstance(value, tuple):
            text = ",".join(str(v) for v in value)
        else:
            text = str(value)
        lines.append(f"{key} = {text}")
    return lines


def model_config_from(config: dict, kind: str | None = None):
    kind = kind or config["model.kind"]
    if kind == "gmm":
        return GmmConfig(n_components=config["model.gmm.n_components"],
                         max_iter=config["model.gmm.max_iter"], tol=config["model.gmm.tol"])
    if kind == "bgmm":
        return BgmmConfig(n_components=config["model.bgmm.n_components"],
                          max_iter=config["model.bgmm.max_iter"], tol=config["model.bgmm.tol"])
    if kind == "iforest":
        return IforestConfig(n_trees=config["model.iforest.n_trees"],
                             subsample=config["model.iforest.subsample"])
    if kind == "realnvp":
        return RealNvpConfig(n_couplings=config["model.realnvp.couplings"],
                             hidden=config["model.realnvp.hidden"],
                             batch_size=config["model.realnvp.batch_size"],
                             epochs=config["model.realnvp.epochs"],
                             lr=config["model.realnvp.lr"],
                             weight_decay=config["model.realnvp.weight_decay"])
    if kind == "dcae":
        return DcaeConfig(channels=tuple(config["model.dcae.channels"]),
                          bottleneck=config["model.dcae.bottleneck"],
                          kernel=config["model.dcae.kernel"],
                          epochs=config["model.dcae.epochs"],
                          batch_size=config["model.dcae.batch_size"],
                          lr=config["model.dcae.lr"],
                          weight_decay=config["model.dcae.weight_decay"])
    raise ConfigError(f"unknown model kind {kind!r}")


def detector_m(config: dict) -> int:
    from .evaluation import scaled_m

    m = config["detector.m"]
    return m if m >= 1 else scaled_m(config["detector.h_minutes"])
