"""The per-recording decision procedure: sample m clips spread across the
recording, preprocess and score each with the model, and aggregate the m
scores into one anomaly score.

Sampling offsets are floor(i*(h - t)/m) seconds for i = 1..m, where h is
the recording's own length in seconds; they depend only on (h, t, m), never
on the audio content. Duplicate offsets (tiny h - t, large m) are scored
independently.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .audio import Clip, Recording
from .models import ScoreModel, score_clip

AGGREGATIONS = ("median", "mean", "min")


@dataclass(frozen=True)
class DetectorConfig:
    """The decision tuple: score model, aggregation phi, horizon h (minutes),
    sample length t (seconds), sample count m."""

    model: ScoreModel
    phi: str = "median"
    h_minutes: float = 30.0
    t_seconds: float = 2.0
    m: int = 20

    def __post_init__(self) -> None:
        if self.phi not in AGGREGATIONS:
            raise ValueError(f"unknown aggregation {self.phi!r}, expected one of {AGGREGATIONS}")
        if self.m < 1:
            raise ValueError(f"m must be at least 1, got {self.m}")
        if self.t_seconds <= 0:
            raise ValueError(f"t must be positive, got {self.t_seconds}")
        if self.t_seconds > self.h_minutes * 60.0:
            raise ValueError(
                f"sample length t={self.t_seconds}s exceeds horizon h={self.h_minutes}min")


@dataclass(frozen=True)
class DetectionResult:
    aggregate: float
    scores: tuple          # m per-clip scores, in offset order
    offsets: tuple         # m sample offsets in seconds


def sample_positions(h_seconds: float, t_seconds: float, m: int) -> list[int]:
    """The m sampling offsets {floor(i*(h-t)/m) | i = 1..m}, sorted ascending,
    all within [0, h-t]."""
    if m < 1:
        raise ValueError(f"m must be at least 1, got {m}")
    if t_seconds < 0 or h_seconds < t_seconds:
        raise ValueError(f"horizon h={h_seconds}s shorter than sample length t={t_seconds}s")
    span = h_seconds - t_seconds
    return [math.floor(i * span / m) for i in range(1, m + 1)]


def aggregate(scores, phi: str) -> float:
    """Reduce per-clip scores with phi: median (lower median for even
    counts, so the aggregate is always an observed score), mean, or min."""
    values = [float(s) for s in scores]
    if not values:
        raise ValueError("cannot aggregate an empty score list")
    if phi == "median":
        return sorted(values)[(len(values) - 1) // 2]
    if phi == "mean":
        return float(np.mean(values))
    if phi == "min":
        return min(values)
    raise ValueError(f"unknown aggregation {phi!r}, expected one of {AGGREGATIONS}")


def detect(recording: Recording, config: DetectorConfig, parallel: bool = False) -> DetectionResult:
    """Run the decision procedure over one recording.

    The horizon is the recording's own length; config.h_minutes only caps t.
    With parallel=True the m clips are scored on a thread pool and collected
    by index, which is bit-identical to sequential scoring.
    """
    model = config.model
    t = config.t_seconds
    if recording.rate != model.rate:
        raise ValueError(
            f"recording rate {recording.rate} Hz does not match model rate {model.rate} Hz")
    exact = t * recording.rate
    per_clip = int(round(exact))
    if per_clip == 0 or abs(exact - per_clip) > 1e-9 * max(1.0, exact):
        raise ValueError(f"t*rate must be an integer sample count, got {exact}")
    if recording.samples.size < per_clip:
        raise ValueError(
            f"recording ({recording.duration:.3f} s) shorter than sample length t={t} s")
    offsets = sample_positions(recording.duration, t, config.m)
    clips = [
        Clip(recording.samples[o * recording.rate : o * recording.rate + per_clip],
             recording.rate, float(o))
        for o in offsets
    ]
    if parallel:
        with ThreadPoolExecutor() as pool:
            scores = list(pool.map(lambda clip: score_clip(model, clip), clips))
    else:
        scores = [score_clip(model, clip) for clip in clips]
    return DetectionResult(aggregate(scores, config.phi), tuple(scores), tuple(offsets))


def result_csv_row(recording_id: str, result: DetectionResult, config: DetectorConfig) -> str:
    """One CSV row: recording id, aggregate, m, t, phi, then the m scores."""
    fields = [str(recording_id), repr(result.aggregate), str(len(result.scores)),
              repr(float(config.t_seconds)), config.phi]
    fields += [repr(float(s)) for s in result.scores]
    return ",".join(fields)
