"""Spectral analysis: STFT, mel spectrograms, the 25-dim feature vector,
and feature standardization."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .audio import Clip

N_FFT = 2048
HOP = 512
N_MELS = 64

# Feature vector layout, 25 dims total.
CHROMA = slice(0, 12)
CENTROID = 12
BANDWIDTH = 13
CONTRAST = slice(14, 21)
ROLLOFF = 21
FLATNESS = 22
ZCR = 23
RMS = 24
N_FEATURES = 25

FEATURE_NAMES = tuple(
    [f"chroma_{i}" for i in range(12)]
    + ["centroid", "bandwidth"]
    + [f"contrast_{i}" for i in range(7)]
    + ["rolloff", "flatness", "zcr", "rms"]
)

ROLLOFF_FRACTION = 0.85
STD_FLOOR = 1e-9
_LOG_COMPRESSION = 1e4
_CONTRAST_EDGES_HZ = (0.0, 200.0, 400.0, 800.0, 1600.0, 3200.0, 6400.0, np.inf)
_VALLEY_FLOOR = 1e-12
_TINY = 1e-30


@dataclass(frozen=True)
class MelSpec:
    """Min-max normalized log-power mel spectrogram; values lie in [0, 1]."""

    values: np.ndarray  # (n_mels, frames)
    n_fft: int = N_FFT
    hop: int = HOP

    @property
    def mel_count(self) -> int:
        return self.values.shape[0]

    @property
    def frame_count(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class Standardizer:
    """Per-dimension mean and population standard deviation (floored)."""

    mean: np.ndarray
    std: np.ndarray


def frame_count(sample_count: int, n_fft: int = N_FFT, hop: int = HOP) -> int:
    if sample_count < n_fft:
        raise ValueError(f"need at least {n_fft} samples, got {sample_count}")
    return 1 + (sample_count - n_fft) // hop


def stft_magnitude(clip: Clip, n_fft: int = N_FFT, hop: int = HOP) -> np.ndarray:
    """Hann-windowed magnitude spectrogram, shape (n_fft//2 + 1, frames).

    Frames lie fully inside the clip (no centering or padding), so bin b
    maps to b*rate/n_fft Hz and frames = 1 + (len - n_fft)//hop.
    """
    x = np.asarray(clip.samples, dtype=np.float64)
    frames = frame_count(x.size, n_fft, hop)
    windows = np.lib.stride_tricks.sliding_window_view(x, n_fft)[::hop][:frames]
    hann = 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n_fft) / n_fft)
    return np.abs(np.fft.rfft(windows * hann, axis=1)).T


def hz_to_mel(f) -> np.ndarray:
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m) -> np.ndarray:
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(n_mels: int = N_MELS, rate: int = 16000, n_fft: int = N_FFT) -> np.ndarray:
    """Triangular filters with unit peaks, spaced evenly in mel from 0 to rate/2.

    Band edges snap to FFT bins, so every row has max exactly 1 at its
    center bin and a contiguous support interval.
    """
    if rate <= 0:
        raise ValueError(f"rate must be positive, got {rate}")
    return _filterbank_cached(int(n_mels), int(rate), int(n_fft)).copy()


@lru_cache(maxsize=8)
def _filterbank_cached(n_mels: int, rate: int, n_fft: int) -> np.ndarray:
    n_bins = n_fft // 2 + 1
    hz_points = mel_to_hz(np.linspace(0.0, float(hz_to_mel(rate / 2.0)), n_mels + 2))
    bins = np.floor((n_fft + 1) * hz_points / rate).astype(int)
    fb = np.zeros((n_mels, n_bins))
    for j in range(n_mels):
        lo = int(bins[j])
        mid = min(max(int(bins[j + 1]), lo + 1), n_bins - 1)
        hi = min(max(int(bins[j + 2]), mid + 1), n_bins)
        fb[j, lo:mid] = (np.arange(lo, mid) - lo) / (mid - lo)
        fb[j, mid:hi] = (hi - np.arange(mid, hi)) / (hi - mid)
    fb.setflags(write=False)
    return fb


def melspec_from_stft(magnitude: np.ndarray, rate: int, n_mels: int = N_MELS,
                      n_fft: int = N_FFT, hop: int = HOP) -> MelSpec:
    """Mel spectrogram from a precomputed magnitude spectrogram (lets callers
    share one STFT between mel and feature extraction)."""
    mel_power = _filterbank_cached(int(n_mels), int(rate), int(n_fft)) @ (magnitude**2)
    compressed = np.log1p(_LOG_COMPRESSION * mel_power)
    low = float(compressed.min())
    high = float(compressed.max())
    if high > low:
        values = (compressed - low) / (high - low)
    else:
        values = np.zeros_like(compressed)
    return MelSpec(values, n_fft, hop)


def mel_spectrogram(clip: Clip, n_mels: int = N_MELS, n_fft: int = N_FFT, hop: int = HOP) -> MelSpec:
    """Power spectrogram -> mel projection -> log(1 + 1e4*p) -> min-max to [0, 1].

    A constant (e.g. silent) spectrogram normalizes to all zeros.
    """
    return melspec_from_stft(stft_magnitude(clip, n_fft, hop), clip.rate, n_mels, n_fft, hop)


@lru_cache(maxsize=8)
def _chroma_map(n_bins: int, rate: int, n_fft: int) -> np.ndarray:
    # DC excluded; every other bin lands in round(12*log2(f/440)) mod 12
    freqs = np.arange(1, n_bins) * (rate / n_fft)
    pitch_class = np.round(12.0 * np.log2(freqs / 440.0)).astype(int) % 12
    mapping = np.zeros((12, n_bins))
    mapping[pitch_class, np.arange(1, n_bins)] = 1.0
    mapping.setflags(write=False)
    return mapping


def _contrast(power: np.ndarray, freqs: np.ndarray) -> np.ndarray:
    """Peak-to-valley ratio in dB per frame over the sub-band plus six octave
    bands from 200 Hz. The valley is floored relative to the peak so the
    contrast is invariant under amplitude scaling."""
    out = np.zeros((len(_CONTRAST_EDGES_HZ) - 1, power.shape[1]))
    for band in range(out.shape[0]):
        mask = (freqs >= _CONTRAST_EDGES_HZ[band]) & (freqs < _CONTRAST_EDGES_HZ[band + 1])
        if not mask.any():
            continue
        band_power = power[mask]
        peak = band_power.max(axis=0)
        valley = band_power.min(axis=0)
        ratio = np.ones_like(peak)
        live = peak > 0.0
        ratio[live] = peak[live] / np.maximum(valley[live], peak[live] * _VALLEY_FLOOR)
        out[band] = 10.0 * np.log10(ratio)
    return out


def spectral_features(clip: Clip, n_fft: int = N_FFT, hop: int = HOP) -> np.ndarray:
    """25-dim descriptor: chroma(12), centroid, bandwidth, contrast(7),
    rolloff, flatness, zcr, rms.

    Per-frame spectral features are averaged over frames; zcr and rms come
    from the raw samples. Silent frames fall back to neutral values
    (centroid/bandwidth/rolloff 0, flatness 1, uniform chroma, contrast 0)
    so standardization downstream never sees NaN.
    """
    return features_from_stft(stft_magnitude(clip, n_fft, hop), clip.samples,
                              clip.rate, n_fft)


def features_from_stft(magnitude: np.ndarray, samples: np.ndarray, rate: int,
                       n_fft: int = N_FFT) -> np.ndarray:
    """spectral_features from a precomputed magnitude spectrogram (lets
    callers share one STFT between mel and feature extraction)."""
    power = magnitude**2
    n_bins = magnitude.shape[0]
    freqs = np.arange(n_bins) * (rate / n_fft)

    total_mag = magnitude.sum(axis=0)
    total_power = power.sum(axis=0)
    live = total_power > 0.0
    safe_mag = np.where(live, total_mag, 1.0)
    safe_power = np.where(live, total_power, 1.0)

    centroid = (freqs[:, None] * magnitude).sum(axis=0) / safe_mag
    deviation = freqs[:, None] - centroid[None, :]
    bandwidth = np.sqrt((magnitude * deviation**2).sum(axis=0) / safe_mag)

    cumulative = np.cumsum(power, axis=0)
    rolloff = freqs[np.argmax(cumulative >= ROLLOFF_FRACTION * safe_power[None, :], axis=0)]

    flatness = np.exp(np.log(power + _TINY).mean(axis=0)) / (power.mean(axis=0) + _TINY)

    chroma_energy = _chroma_map(n_bins, int(rate), n_fft) @ power
    chroma_peak = chroma_energy.max(axis=0)
    chroma = chroma_energy / np.where(chroma_peak > 0.0, chroma_peak, 1.0)

    contrast = _contrast(power, freqs)

    centroid[~live] = 0.0
    bandwidth[~live] = 0.0
    rolloff[~live] = 0.0
    flatness[~live] = 1.0
    chroma[:, ~live] = 1.0 / 12.0
    chroma[:, live & (chroma_peak == 0.0)] = 1.0 / 12.0
    contrast[:, ~live] = 0.0

    x = np.asarray(samples, dtype=np.float64)
    nonneg = x >= 0.0
    zcr = float(np.count_nonzero(nonneg[1:] != nonneg[:-1])) / max(x.size - 1, 1)

    out = np.empty(N_FEATURES)
    out[CHROMA] = chroma.mean(axis=1)
    out[CENTROID] = centroid.mean()
    out[BANDWIDTH] = bandwidth.mean()
    out[CONTRAST] = contrast.mean(axis=1)
    out[ROLLOFF] = rolloff.mean()
    out[FLATNESS] = flatness.mean()
    out[ZCR] = zcr
    out[RMS] = np.sqrt(np.mean(x * x))
    return out


def fit_standardizer(vectors) -> Standardizer:
    """Per-dimension mean and population standard deviation over a stack of
    feature vectors; the std is floored at 1e-9 so applying never divides
    by zero."""
    X = np.asarray(vectors, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2:
        raise ValueError(f"need at least two vectors to standardize, got shape {X.shape}")
    return Standardizer(X.mean(axis=0), np.maximum(X.std(axis=0), STD_FLOOR))


def apply_standardizer(standardizer: Standardizer, v) -> np.ndarray:
    """(v - mean) / std, elementwise. Accepts one vector or a stack."""
    v = np.asarray(v, dtype=np.float64)
    if v.shape[-1:] != standardizer.mean.shape:
        raise ValueError(
            f"dimension mismatch: vector {v.shape} vs standardizer {standardizer.mean.shape}")
    return (v - standardizer.mean) / standardizer.std
