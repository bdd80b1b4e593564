"""Audio primitives: WAV I/O, segmentation, band-pass filtering, synthesis, mixing.

Everything operates on mono float64 amplitudes in [-1, 1]. The canonical
sample rate is 16 kHz; other rates are read as-is and never resampled.
"""

from __future__ import annotations

import math
import struct
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import signal as _signal

PCM_SCALE = 32768  # 16-bit full-scale divisor
DEFAULT_RATE = 16000

PINK_RMS = 0.05
TRANSIENTS_PER_MINUTE = 2.0
TRANSIENT_LEN_RANGE = (0.1, 0.3)
TRANSIENT_PEAK_RANGE = (0.25, 0.8)
FLOW_BAND_HZ = (300.0, 1200.0)
FLOW_EVENTS_PER_MINUTE = 1.2
FLOW_EVENT_SECONDS = (5.0, 20.0)
FLOW_EVENT_RMS = (0.15, 0.4)
SLOW_CONTROL_SECONDS = 5.0
HUM_BASE_HZ = 100.0
HUM_HARMONICS = 3
HUM_RMS = 0.012
LEAK_BAND_HZ = (1000.0, 3000.0)
LEAK_RMS = 0.05
LEAK_AM_HZ = 0.5
LEAK_AM_DEPTH = 0.1

_AMBIENT_STREAM = 1
_LEAK_STREAM = 2


class WavFormatError(ValueError):
    """WAV container or encoding this toolkit does not accept."""


@dataclass(frozen=True)
class Recording:
    """A mono recording: float64 samples in [-1, 1] at a fixed rate.

    The amplitude range is enforced at the I/O and mixing boundaries rather
    than on every construction, so that linear filters may transiently
    overshoot without copying.
    """

    samples: np.ndarray
    rate: int

    def __post_init__(self) -> None:
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise ValueError(f"recording must be mono (1-D), got shape {samples.shape}")
        if not float(self.rate).is_integer() or self.rate <= 0:
            raise ValueError(f"rate must be a positive integer, got {self.rate!r}")
        if samples.size and not np.isfinite(samples).all():
            raise ValueError("recording contains non-finite samples")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "rate", int(self.rate))

    @property
    def duration(self) -> float:
        """Length in seconds."""
        return self.samples.size / self.rate


@dataclass(frozen=True)
class Clip:
    """A short window cut from a Recording."""

    samples: np.ndarray
    rate: int
    origin_offset: float = 0.0  # seconds into the parent recording

    def __post_init__(self) -> None:
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise ValueError(f"clip must be mono (1-D), got shape {samples.shape}")
        object.__setattr__(self, "samples", samples)

    @property
    def duration(self) -> float:
        return self.samples.size / self.rate


@dataclass(frozen=True)
class MixSpec:
    """How to blend a leak signature into an ambient recording.

    snr_db is the signal-to-noise ratio in decibels where "noise" means the
    leak, so +24 dB buries the leak 24 dB below the ambient signal. seed
    identifies the leak source material when datasets are built; the mixing
    arithmetic itself is deterministic.
    """

    snr_db: float
    seed: int = 0

    def __post_init__(self) -> None:
        if not math.isfinite(self.snr_db):
            raise ValueError(f"snr_db must be finite, got {self.snr_db!r}")


def rms(samples: np.ndarray) -> float:
    samples = np.asarray(samples, dtype=np.float64)
    if samples.size == 0:
        return 0.0
    return float(np.sqrt(np.mean(samples * samples)))


def read_wav(path) -> Recording:
    """Read a RIFF/WAVE file holding 16-bit PCM mono audio.

    Integer samples are scaled to [-1, 1] by dividing by 32768; the rate is
    taken from the header. Anything that is not 16-bit PCM mono raises
    WavFormatError naming the offending header field.
    """
    raw = Path(path).read_bytes()
    if len(raw) < 12 or raw[:4] != b"RIFF" or raw[8:12] != b"WAVE":
        raise WavFormatError(f"{path}: not a RIFF/WAVE container")
    fmt = None
    data = None
    pos = 12
    while pos + 8 <= len(raw):
        chunk_id, size = struct.unpack_from("<4sI", raw, pos)
        body = raw[pos + 8 : pos + 8 + size]
        if len(body) < size:
            raise OSError(f"{path}: truncated {chunk_id.decode('ascii', 'replace')!r} chunk "
                          f"({len(body)} of {size} bytes)")
        if chunk_id == b"fmt ":
            fmt = body
        elif chunk_id == b"data":
            data = body
        pos += 8 + size + (size & 1)
    if fmt is None or len(fmt) < 16:
        raise WavFormatError(f"{path}: missing or short 'fmt ' chunk")
    if data is None:
        raise WavFormatError(f"{path}: missing 'data' chunk")
    audio_format, channels, rate, _, _, bits = struct.unpack_from("<HHIIHH", fmt, 0)
    if audio_format != 1:
        raise WavFormatError(f"{path}: AudioFormat={audio_format}, only PCM (1) is supported")
    if channels != 1:
        raise WavFormatError(f"{path}: NumChannels={channels}, only mono is supported")
    if bits != 16:
        raise WavFormatError(f"{path}: BitsPerSample={bits}, only 16-bit is supported")
    if rate <= 0:
        raise WavFormatError(f"{path}: SampleRate={rate} is not positive")
    usable = len(data) - (len(data) % 2)
    samples = np.frombuffer(data[:usable], dtype="<i2").astype(np.float64) / PCM_SCALE
    return Recording(samples, int(rate))


def write_wav(recording: Recording, path) -> None:
    """Write a Recording as 16-bit PCM mono. Reading it back reproduces the
    samples up to one quantization step (max abs error <= 1/32768)."""
    x = recording.samples
    if x.size and float(np.abs(x).max()) > 1.0:
        raise ValueError("samples outside [-1, 1]; rescale or clip before writing")
    quantized = np.clip(np.rint(x * PCM_SCALE), -32768, 32767).astype("<i2")
    payload = quantized.tobytes()
    rate = recording.rate
    header = (
        b"RIFF"
        + struct.pack("<I", 36 + len(payload))
        + b"WAVE"
        + b"fmt "
        + struct.pack("<IHHIIHH", 16, 1, 1, rate, rate * 2, 2, 16)
        + b"data"
        + struct.pack("<I", len(payload))
    )
    Path(path).write_bytes(header + payload)


def segment(recording: Recording, t: float) -> list[Clip]:
    """Cut a recording into consecutive non-overlapping t-second clips.

    The trailing remainder shorter than t is discarded. t*rate must come out
    to a whole number of samples.
    """
    if t <= 0:
        raise ValueError(f"clip length must be positive, got {t}")
    exact = t * recording.rate
    per_clip = int(round(exact))
    if per_clip == 0 or abs(exact - per_clip) > 1e-9 * max(1.0, exact):
        raise ValueError(f"t*rate must be an integer sample count, got {exact}")
    count = recording.samples.size // per_clip
    if count == 0:
        raise ValueError(f"recording ({recording.duration:.3f} s) shorter than one {t} s clip")
    return [
        Clip(recording.samples[i * per_clip : (i + 1) * per_clip], recording.rate,
             (i * per_clip) / recording.rate)
        for i in range(count)
    ]


def _bandpass_samples(x: np.ndarray, lo: float, hi: float, rate: int, order: int = 5) -> np.ndarray:
    if not (0.0 < lo < hi < rate / 2.0):
        raise ValueError(f"band [{lo}, {hi}] Hz must satisfy 0 < lo < hi < rate/2 ({rate / 2})")
    sos = _signal.butter(order, [lo, hi], btype="bandpass", fs=rate, output="sos")
    padlen = min(3 * (2 * sos.shape[0] + 1), max(x.size - 1, 0))
    return _signal.sosfiltfilt(sos, x, padlen=padlen)


def bandpass(recording: Recording, lo: float = 300.0, hi: float = 3000.0) -> Recording:
    """Zero-phase band-pass (5th-order Butterworth applied forward and backward).

    The tested contract is the frequency response, not the topology: gain
    within +-1 dB for tones in [1.2*lo, hi/1.2] and at least 40 dB of
    attenuation below lo/2 and above 2*hi. Output length equals input length.
    """
    return Recording(_bandpass_samples(recording.samples, lo, hi, recording.rate), recording.rate)


def _stream_rng(seed: int, stream: int) -> np.random.Generator:
    # separate streams keep ambient and leak material uncorrelated under a shared seed
    return np.random.default_rng(np.random.SeedSequence(entropy=int(seed), spawn_key=(stream,)))


def _slow_envelope(n: int, rate: int, rng: np.random.Generator,
                   control_seconds: float = SLOW_CONTROL_SECONDS,
                   skew: float = 2.0) -> np.ndarray:
    """Piecewise-linear envelope in [0, 1] drifting over seconds-long spans,
    skewed toward quiet so activity comes and goes."""
    points = max(2, int(np.ceil(n / (control_seconds * rate))) + 1)
    control = rng.uniform(0.0, 1.0, size=points) ** skew
    positions = np.linspace(0.0, n - 1, points)
    return np.interp(np.arange(n, dtype=np.float64), positions, control)


def _event_envelope(n: int, rate: int, duration: float,
                    rng: np.random.Generator) -> np.ndarray:
    """Withdrawal-event envelope: Poisson-arriving episodes, each a Hann
    swell 5-20 s long with a bounded level; overlaps take the max so the
    level never stacks past the cap."""
    envelope = np.zeros(n)
    count = int(rng.poisson(FLOW_EVENTS_PER_MINUTE * duration / 60.0))
    starts = rng.uniform(0.0, duration, size=count)
    lengths = rng.uniform(*FLOW_EVENT_SECONDS, size=count)
    levels = rng.uniform(*FLOW_EVENT_RMS, size=count)
    for start, length, level in zip(starts, lengths, levels):
        i0 = int(start * rate)
        width = min(int(length * rate), n - i0)
        if width <= 1:
            continue
        swell = level * np.hanning(width)
        np.maximum(envelope[i0 : i0 + width], swell, out=envelope[i0 : i0 + width])
    return envelope


def synth_ambient(duration: float, seed: int, rate: int = DEFAULT_RATE) -> Recording:
    """Synthetic street-side ambient. Deterministic for a fixed seed.

    Layers, mirroring what contact microphones pick up around hydrants:
    a 1/f background at RMS 0.05; sparse broadband transients (cars,
    footsteps) at roughly 2 per minute, 0.1-0.3 s long, peaks capped at
    0.8; episodic water-withdrawal flow (300-1200 Hz) that is quiet most of
    the time but dominates the recording's overall RMS when active; and a
    faint mains hum with slowly wandering harmonics. The intermittent loud
    layers make the recording-level RMS a few times the quiet floor, as in
    real street recordings, and give "normal" a learnable shape.
    """
    if duration <= 0:
        raise ValueError(f"duration must be positive, got {duration}")
    rng = _stream_rng(seed, _AMBIENT_STREAM)
    n = int(round(duration * rate))
    white = rng.standard_normal(n)
    spectrum = np.fft.rfft(white)
    k = np.arange(spectrum.size, dtype=np.float64)
    k[0] = 1.0
    spectrum /= np.sqrt(k)  # 1/f power shape
    spectrum[0] = 0.0
    x = np.fft.irfft(spectrum, n)
    level = rms(x)
    if level > 0.0:
        x *= PINK_RMS / level

    # water-withdrawal flow: band-limited noise under an episodic envelope
    flow = _bandpass_samples(rng.standard_normal(n), *FLOW_BAND_HZ, rate)
    flow_level = rms(flow)
    if flow_level > 0.0:
        flow /= flow_level
    x += flow * _event_envelope(n, rate, duration, rng)

    # transformer-house hum: low harmonics with independent slow levels
    t = np.arange(n, dtype=np.float64) / rate
    hum_amp = HUM_RMS * np.sqrt(2.0 / HUM_HARMONICS)
    for harmonic in range(1, HUM_HARMONICS + 1):
        envelope = _slow_envelope(n, rate, rng)
        phase = rng.uniform(0.0, 2.0 * np.pi)
        x += hum_amp * envelope * np.sin(2.0 * np.pi * HUM_BASE_HZ * harmonic * t + phase)

    count = int(rng.poisson(TRANSIENTS_PER_MINUTE * duration / 60.0))
    starts = rng.uniform(0.0, duration, size=count)
    lengths = rng.uniform(*TRANSIENT_LEN_RANGE, size=count)
    peaks = rng.uniform(*TRANSIENT_PEAK_RANGE, size=count)
    for start, length, peak in zip(starts, lengths, peaks):
        i0 = int(start * rate)
        width = min(int(length * rate), n - i0)
        if width <= 1:
            continue
        burst = rng.standard_normal(width) * np.hanning(width)
        top = float(np.abs(burst).max())
        if top > 0.0:
            burst *= peak / top
        x[i0 : i0 + width] += burst
    np.clip(x, -1.0, 1.0, out=x)
    return Recording(x, rate)


def synth_leak(duration: float, seed: int, rate: int = DEFAULT_RATE) -> Recording:
    """Synthetic leak signature: stationary Gaussian noise band-limited to
    1-3 kHz with a slow 0.5 Hz amplitude breath (10% depth). Deterministic
    for a fixed seed."""
    if duration <= 0:
        raise ValueError(f"duration must be positive, got {duration}")
    rng = _stream_rng(seed, _LEAK_STREAM)
    n = int(round(duration * rate))
    x = _bandpass_samples(rng.standard_normal(n), *LEAK_BAND_HZ, rate)
    t = np.arange(n, dtype=np.float64) / rate
    x *= 1.0 + LEAK_AM_DEPTH * np.sin(2.0 * np.pi * LEAK_AM_HZ * t)
    level = rms(x)
    if level > 0.0:
        x *= LEAK_RMS / level
    np.clip(x, -1.0, 1.0, out=x)
    return Recording(x, rate)


def mix_at_snr(signal: Recording, noise: Recording, spec: MixSpec) -> Recording:
    """Add `noise` (the leak) to `signal` (the ambient) at a given SNR.

    The gain is chosen from the RMS of the truncated noise so the achieved
    SNR, measured before clipping, matches the request exactly:
    g = (rms(signal)/rms(noise)) * 10**(-snr_db/20). The output is clamped
    to [-1, 1] with a warning if any sample clips.
    """
    if signal.rate != noise.rate:
        raise ValueError(f"rate mismatch: signal {signal.rate} Hz vs noise {noise.rate} Hz")
    n = signal.samples.size
    if n == 0:
        raise ValueError("cannot mix an empty signal")
    if noise.samples.size < n:
        raise ValueError(
            f"noise ({noise.samples.size} samples) must be at least as long as "
            f"the signal ({n} samples)")
    noise_part = noise.samples[:n]
    signal_rms = rms(signal.samples)
    noise_rms = rms(noise_part)
    if signal_rms == 0.0 or noise_rms == 0.0:
        raise ValueError("cannot mix silent audio (zero RMS input)")
    gain = (signal_rms / noise_rms) * 10.0 ** (-spec.snr_db / 20.0)
    mixed = signal.samples + gain * noise_part
    clipped = np.abs(mixed) > 1.0
    if clipped.any():
        warnings.warn(
            f"mix clipped {int(clipped.sum())} samples to [-1, 1]",
            RuntimeWarning, stacklevel=2)
        mixed = np.clip(mixed, -1.0, 1.0)
    return Recording(mixed, signal.rate)
