"""Acoustic leak detection for water pipes.

Trains anomaly-score functions on normal-operation audio from contact
microphones and decides leak/no-leak per recording by sampling short clips
across a decision horizon, scoring each, and aggregating the scores.
Ships synthetic ambient/leak generators and SNR mixing so the whole
experiment grid runs at desk scale without field recordings.
"""

__version__ = "0.1.0"

from . import audio, detector, dsp, evaluation, models, nn

__all__ = ["audio", "detector", "dsp", "evaluation", "models", "nn"]
