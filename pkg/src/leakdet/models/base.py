"""One training/scoring contract over the five anomaly-score model kinds.

Feature-vector kinds (gmm, bgmm, iforest, realnvp) consume standardized
25-dim spectral feature vectors; the dcae consumes normalized mel
spectrograms. Scores are natural real values with higher = more anomalous
(negative log density, isolation score, reconstruction error); downstream
aggregation and AUC only use their order, so no remapping to a fixed range
is applied.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..audio import Clip, DEFAULT_RATE
from ..dsp import (MelSpec, Standardizer, apply_standardizer, fit_standardizer,
                   mel_spectrogram, spectral_features)
from . import bgmm, dcae, gmm, iforest, realnvp

KINDS = ("gmm", "bgmm", "iforest", "realnvp", "dcae")
FEATURE_VECTOR = "feature_vector"
MEL_SPEC = "mel_spec"
PREPROCESSING_FOR_KIND = {
    "gmm": FEATURE_VECTOR,
    "bgmm": FEATURE_VECTOR,
    "iforest": FEATURE_VECTOR,
    "realnvp": FEATURE_VECTOR,
    "dcae": MEL_SPEC,
}
DEFAULT_CONFIGS = {
    "gmm": gmm.GmmConfig,
    "bgmm": bgmm.BgmmConfig,
    "iforest": iforest.IforestConfig,
    "realnvp": realnvp.RealNvpConfig,
    "dcae": dcae.DcaeConfig,
}


@dataclass
class ScoreModel:
    """A trained anomaly-score function plus its preprocessing recipe."""

    kind: str
    preprocessing: str
    seed: int
    rate: int
    standardizer: Standardizer | None
    params: object
    training_history: list | None = field(default=None, compare=False)


def train(kind: str, inputs, config=None, seed: int = 0,
          standardizer: Standardizer | None = None, rate: int = DEFAULT_RATE) -> ScoreModel:
    """Train one model kind on already-preprocessed inputs.

    Feature-vector kinds take an (N, 25) matrix of standardized vectors;
    the dcae takes (N, H, W) mel spectrograms. Training is deterministic
    for a fixed seed. The standardizer, if given, is carried along so the
    model can later preprocess raw clips itself.
    """
    if kind not in KINDS:
        raise ValueError(f"unknown model kind {kind!r}, expected one of {KINDS}")
    if config is None:
        config = DEFAULT_CONFIGS[kind]()
    rng = np.random.default_rng(seed)
    data = np.asarray(inputs, dtype=np.float64)
    if data.size == 0:
        raise ValueError("training dataset is empty")
    if kind == "gmm":
        params, history = gmm.fit(data, config, rng)
    elif kind == "bgmm":
        params, history = bgmm.fit(data, config, rng)
    elif kind == "iforest":
        params = iforest.fit(data, config, rng)
        history = None
    elif kind == "realnvp":
        params, history = realnvp.fit(data, config, rng)
    else:
        params, history = dcae.fit(data, config, rng)
    return ScoreModel(kind, PREPROCESSING_FOR_KIND[kind], int(seed), int(rate),
                      standardizer, params, history)


def score(model: ScoreModel, x) -> float:
    """Anomaly score of one preprocessed input; higher = more anomalous."""
    if isinstance(x, MelSpec):
        x = x.values
    if model.kind == "gmm":
        return gmm.neg_log_prob(model.params, _vector(model, x))
    if model.kind == "bgmm":
        return bgmm.neg_log_prob(model.params, _vector(model, x))
    if model.kind == "iforest":
        return iforest.score(model.params, _vector(model, x))
    if model.kind == "realnvp":
        return realnvp.neg_log_prob(model.params, _vector(model, x))
    return dcae.score(model.params, x)


def _vector(model: ScoreModel, x) -> np.ndarray:
    v = np.asarray(x, dtype=np.float64)
    if v.ndim != 1:
        raise ValueError(f"expected a single feature vector, got shape {v.shape}")
    expected = _dim(model)
    if expected is not None and v.size != expected:
        raise ValueError(f"expected a {expected}-dim vector, got shape {v.shape}")
    return v


def _dim(model: ScoreModel) -> int | None:
    if model.kind == "gmm":
        return model.params.means.shape[1]
    if model.kind == "bgmm":
        return model.params.m.shape[1]
    if model.kind == "realnvp":
        return model.params.dim
    if model.standardizer is not None:
        return model.standardizer.mean.size
    return None  # isolation trees do not record the dimension


def preprocess(model: ScoreModel, clip: Clip):
    """Apply the model's preprocessing recipe to a raw clip."""
    if model.preprocessing == FEATURE_VECTOR:
        if model.standardizer is None:
            raise RuntimeError(f"{model.kind} model has no standardizer; "
                               "was it trained outside the clip pipeline?")
        return apply_standardizer(model.standardizer, spectral_features(clip))
    return mel_spectrogram(clip).values


def score_clip(model: ScoreModel, clip: Clip) -> float:
    return score(model, preprocess(model, clip))


def fit_score_model(kind: str, clips, config=None, seed: int = 0) -> ScoreModel:
    """Full training recipe from raw clips: extract features or mel
    spectrograms, fit the standardizer (feature-vector kinds), train."""
    clips = list(clips)
    if not clips:
        raise ValueError("no training clips")
    rates = {c.rate for c in clips}
    if len(rates) != 1:
        raise ValueError(f"training clips mix sample rates: {sorted(rates)}")
    rate = rates.pop()
    if PREPROCESSING_FOR_KIND[kind] == FEATURE_VECTOR:
        raw = np.stack([spectral_features(c) for c in clips])
        standardizer = fit_standardizer(raw)
        return train(kind, apply_standardizer(standardizer, raw), config, seed,
                     standardizer, rate)
    specs = np.stack([mel_spectrogram(c).values for c in clips])
    return train(kind, specs, config, seed, None, rate)
