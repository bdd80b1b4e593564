"""Synthetic dataset builders, ROC-AUC, the model-comparison grid, and the
sample-count sweep.

Two evaluation datasets mirror the two leak scenarios: a close-proximity
set mixes the leak signature at 0 dB (leak as loud as the ambient), a
distant set at +24 dB (leak 24 dB below the ambient). Every sub-seed
derives from the root seed and the segment index, so builds are
reproducible and independent of evaluation order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .audio import (DEFAULT_RATE, MixSpec, Recording, mix_at_snr, segment,
                    synth_ambient, synth_leak)
from .detector import DetectorConfig, detect
from .dsp import (apply_standardizer, features_from_stft, fit_standardizer,
                  melspec_from_stft, stft_magnitude)
from .models import MEL_SPEC, PREPROCESSING_FOR_KIND, ScoreModel, train

LEAK = "leak"
NO_LEAK = "no_leak"
DEFAULT_SEEDS = (0, 1, 2, 3, 4)
DEFAULT_SWEEP_M = tuple(range(5, 106, 10))
CLOSE_SNR_DB = 0.0
DISTANT_SNR_DB = 24.0

_CLOSE_STREAM = 11
_DISTANT_STREAM = 12
_TRAIN_STREAM = 13


@dataclass(frozen=True)
class LabeledSegment:
    recording: Recording
    label: str  # "leak" or "no_leak"
    source_id: str


@dataclass(frozen=True)
class ReportRow:
    model: str
    h_minutes: float
    t_seconds: float
    m: int
    phi: str
    aucs: tuple  # one AUC per seed, in seed order

    @property
    def auc_mean(self) -> float:
        return float(np.mean(self.aucs))

    @property
    def auc_std(self) -> float:
        return float(np.std(self.aucs))


@dataclass(frozen=True)
class ExperimentReport:
    rows: tuple
    seeds: tuple


def auc(scores, labels) -> float:
    """Probability that a leak outranks a no-leak: the fraction of
    (leak, no-leak) pairs where the leak score is higher, ties counted 0.5.
    Computed from average ranks, which matches brute-force pair counting
    exactly."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    positive = labels.astype(bool)
    n_pos = int(positive.sum())
    n_neg = int(labels.size - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise ValueError(f"need both classes, got {n_pos} leak / {n_neg} no-leak labels")
    ranks = rankdata(scores, method="average")
    u = ranks[positive].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def scaled_m(h_minutes: float) -> int:
    """Sample count proportional to the horizon: 20 at 30 min, 40 at 60 min."""
    return max(1, round(h_minutes * 2.0 / 3.0))


@dataclass(frozen=True)
class BuildPlan:
    """The per-segment sub-seeds a dataset build will use; exposed so tests
    can regenerate a segment's ambient part and re-measure the mix."""

    ambient_seeds: tuple          # no-leak segments
    leak_ambient_seeds: tuple     # ambient halves of leak segments
    leak_source_seeds: tuple      # leak material per leak segment


def build_plan(seed: int, n_per_class: int, stream: int) -> BuildPlan:
    rng = np.random.default_rng(np.random.SeedSequence(entropy=int(seed), spawn_key=(stream,)))
    draws = rng.integers(0, 2**63, size=3 * n_per_class)
    return BuildPlan(
        tuple(int(v) for v in draws[:n_per_class]),
        tuple(int(v) for v in draws[n_per_class : 2 * n_per_class]),
        tuple(int(v) for v in draws[2 * n_per_class :]),
    )


def _build_set(seed: int, n_per_class: int, h_minutes: float, rate: int,
               snr_db: float, stream: int, tag: str) -> list[LabeledSegment]:
    duration = h_minutes * 60.0
    plan = build_plan(seed, n_per_class, stream)
    segments = [
        LabeledSegment(synth_ambient(duration, s, rate), NO_LEAK, f"{tag}-ambient-{i}")
        for i, s in enumerate(plan.ambient_seeds)
    ]
    for i, (ambient_seed, leak_seed) in enumerate(zip(plan.leak_ambient_seeds,
                                                      plan.leak_source_seeds)):
        spec = MixSpec(snr_db, leak_seed)
        mixed = mix_at_snr(synth_ambient(duration, ambient_seed, rate),
                           synth_leak(duration, spec.seed, rate), spec)
        segments.append(LabeledSegment(mixed, LEAK, f"{tag}-leak-{i}"))
    return segments


def build_close_set(seed: int, n_per_class: int = 8, h_minutes: float = 5.0,
                    rate: int = DEFAULT_RATE) -> list[LabeledSegment]:
    """Balanced segments with a loud nearby leak (0 dB mix) vs plain ambient."""
    return _build_set(seed, n_per_class, h_minutes, rate, CLOSE_SNR_DB, _CLOSE_STREAM, "close")


def build_distant_set(seed: int, n_per_class: int = 8, h_minutes: float = 5.0,
                      rate: int = DEFAULT_RATE, snr_db: float = DISTANT_SNR_DB) -> list[LabeledSegment]:
    """Balanced segments with the leak buried +24 dB below ambient vs plain
    ambient; the hard scenario."""
    return _build_set(seed, n_per_class, h_minutes, rate, snr_db, _DISTANT_STREAM, "distant")


def training_recording(seed: int, minutes: float, rate: int = DEFAULT_RATE) -> Recording:
    """Normal-operation (leak-free) synthetic audio for training, on a stream
    independent of the evaluation segments."""
    rng = np.random.default_rng(np.random.SeedSequence(entropy=int(seed), spawn_key=(_TRAIN_STREAM,)))
    return synth_ambient(minutes * 60.0, int(rng.integers(0, 2**63)), rate)


def train_models(kinds, t_seconds: float, seeds, train_minutes: float = 20.0,
                 configs: dict | None = None, rate: int = DEFAULT_RATE) -> dict:
    """Train every requested kind for every seed on normal-operation audio.

    Returns {(kind, t_seconds, seed): ScoreModel}. Feature extraction is
    shared across the feature-vector kinds of one seed.
    """
    configs = configs or {}
    trained: dict = {}
    kinds = list(kinds)
    feature_kinds = [k for k in kinds if PREPROCESSING_FOR_KIND[k] != MEL_SPEC]
    mel_kinds = [k for k in kinds if PREPROCESSING_FOR_KIND[k] == MEL_SPEC]
    for seed in seeds:
        clips = segment(training_recording(seed, train_minutes, rate), t_seconds)
        magnitudes = [stft_magnitude(c) for c in clips]  # shared by both recipes
        if feature_kinds:
            raw = np.stack([features_from_stft(mag, c.samples, rate)
                            for mag, c in zip(magnitudes, clips)])
            standardizer = fit_standardizer(raw)
            standardized = apply_standardizer(standardizer, raw)
            for kind in feature_kinds:
                trained[(kind, t_seconds, seed)] = train(
                    kind, standardized, configs.get(kind), seed, standardizer, rate)
        if mel_kinds:
            specs = np.stack([melspec_from_stft(mag, rate).values for mag in magnitudes])
            for kind in mel_kinds:
                trained[(kind, t_seconds, seed)] = train(
                    kind, specs, configs.get(kind), seed, None, rate)
    return trained


def evaluate_model(model: ScoreModel, segments, t_seconds: float, m: int, phi: str,
                   parallel: bool = False) -> float:
    """Detect on every segment and return the AUC of aggregate scores
    against the leak labels."""
    aggregates = []
    labels = []
    for seg in segments:
        config = DetectorConfig(model, phi, h_minutes=seg.recording.duration / 60.0,
                                t_seconds=t_seconds, m=m)
        aggregates.append(detect(seg.recording, config, parallel=parallel).aggregate)
        labels.append(1 if seg.label == LEAK else 0)
    return auc(aggregates, labels)


def run_grid(models: dict, build_segments, h_values, t_values, m_values, phi: str,
             seeds) -> ExperimentReport:
    """Evaluate pre-trained models over the (h, t) grid.

    models maps (kind, t_seconds, seed) to a trained ScoreModel;
    build_segments(seed, h_minutes) returns that seed's labeled segments.
    h_values and m_values run in parallel (one m per horizon). Cells share
    each (seed, h) segment build; failures are re-raised with the cell id.
    """
    seeds = list(seeds)
    kinds = sorted({key[0] for key in models}, key=_kind_order)
    cells: dict = {}
    for h_minutes, m in zip(h_values, m_values):
        for seed in seeds:
            segments = build_segments(seed, h_minutes)
            for t_seconds in t_values:
                for kind in kinds:
                    try:
                        value = evaluate_model(models[(kind, t_seconds, seed)], segments,
                                               t_seconds, m, phi)
                    except ValueError as exc:
                        raise ValueError(
                            f"grid cell (model={kind}, h={h_minutes}min, t={t_seconds}s, "
                            f"m={m}, seed={seed}): {exc}") from exc
                    cells.setdefault((kind, h_minutes, t_seconds, m), []).append(value)
    rows = tuple(
        ReportRow(kind, h_minutes, t_seconds, m, phi, tuple(cells[(kind, h_minutes, t_seconds, m)]))
        for h_minutes, m in zip(h_values, m_values)
        for t_seconds in t_values
        for kind in kinds
    )
    return ExperimentReport(rows, tuple(seeds))


def _kind_order(kind: str) -> int:
    order = ("gmm", "bgmm", "iforest", "realnvp", "dcae")
    return order.index(kind) if kind in order else len(order)


def sweep_m(kind: str, models_by_seed: dict, build_segments, h_minutes: float,
            t_seconds: float, phi: str, m_values=DEFAULT_SWEEP_M, seeds=DEFAULT_SEEDS) -> ExperimentReport:
    """AUC of one model kind as the sample count m varies; one row per m."""
    seeds = list(seeds)
    m_values = list(m_values)
    cells: dict = {m: [] for m in m_values}
    for seed in seeds:
        segments = build_segments(seed, h_minutes)
        for m in m_values:
            cells[m].append(evaluate_model(models_by_seed[seed], segments, t_seconds, m, phi))
    rows = tuple(ReportRow(kind, h_minutes, t_seconds, m, phi, tuple(cells[m])) for m in m_values)
    return ExperimentReport(rows, tuple(seeds))


def grid_csv(report: ExperimentReport, comments=()) -> str:
    """Grid report CSV: model,h_min,t_s,m,phi,seed_count,auc_mean,auc_std."""
    lines = [f"# {line}" for line in comments]
    lines.append("model,h_min,t_s,m,phi,seed_count,auc_mean,auc_std")
    for row in report.rows:
        lines.append(f"{row.model},{row.h_minutes!r},{row.t_seconds!r},{row.m},{row.phi},"
                     f"{len(row.aucs)},{row.auc_mean!r},{row.auc_std!r}")
    return "\n".join(lines) + "\n"


def sweep_csv(report: ExperimentReport, comments=()) -> str:
    """Sweep CSV: model,h_min,t_s,m,auc_mean,auc_std."""
    lines = [f"# {line}" for line in comments]
    lines.append("model,h_min,t_s,m,auc_mean,auc_std")
    for row in report.rows:
        lines.append(f"{row.model},{row.h_minutes!r},{row.t_seconds!r},{row.m},"
                     f"{row.auc_mean!r},{row.auc_std!r}")
    return "\n".join(lines) + "\n"
