"""Waveform carrier, WAV I/O, and exact-SNR noise mixing."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.io import wavfile

from .errors import DegenerateSignalError, DimensionMismatchError, InvalidInputError


@dataclass(frozen=True)
class Utterance:
    """Mono waveform with its sample rate.  Amplitudes are nominally in
    [-1, 1]."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1 or samples.size == 0:
            raise InvalidInputError("utterance must be a non-empty 1-d signal")
        if not np.all(np.isfinite(samples)):
            raise InvalidInputError("utterance contains non-finite samples")
        if self.sample_rate <= 0:
            raise InvalidInputError(f"invalid sample rate {self.sample_rate}")
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return self.samples.size


def read_wav(path) -> Utterance:
    """Read a mono PCM WAV file (16-bit integer or 32-bit float)."""
    try:
        rate, data = wavfile.read(path)
    except Exception as exc:
        raise InvalidInputError(f"cannot read WAV file {path}: {exc}") from exc
    if data.ndim != 1:
        raise InvalidInputError(f"{path}: expected mono audio, got {data.ndim} channels")
    if data.dtype == np.int16:
        samples = data.astype(np.float64) / 32768.0
    elif data.dtype == np.float32:
        samples = data.astype(np.float64)
    else:
        raise InvalidInputError(
            f"{path}: unsupported sample format {data.dtype} "
            "(expected 16-bit PCM or 32-bit float)"
        )
    return Utterance(samples, int(rate))


def write_wav(path, utterance: Utterance) -> None:
    """Write a mono 32-bit float WAV file."""
    wavfile.write(path, utterance.sample_rate, utterance.samples.astype(np.float32))


def signal_power(samples) -> float:
    """Mean squared amplitude."""
    samples = np.asarray(samples, dtype=np.float64)
    return float(np.mean(samples * samples))


def noise_segment(noise: Utterance, length: int, rng) -> tuple[np.ndarray, int]:
    """Pick a noise segment of ``length`` samples at a seeded random offset.

    When the noise is shorter than ``length`` it is tiled.  Returns the
    segment and the chosen start offset into the (untiled) noise.
    """
    rng = np.random.default_rng(rng)
    n = len(noise)
    if n >= length:
        offset = int(rng.integers(0, n - length + 1))
        return noise.samples[offset : offset + length].copy(), offset
    offset = int(rng.integers(0, n))
    reps = int(np.ceil((offset + length) / n))
    tiled = np.tile(noise.samples, reps + 1)
    return tiled[offset : offset + length].copy(), offset


def snr_gain(speech_samples, noise_samples, snr_db: float) -> float:
    """Gain to apply to the noise so the speech/noise power ratio is
    exactly ``snr_db`` decibels."""
    p_speech = signal_power(speech_samples)
    p_noise = signal_power(noise_samples)
    if p_speech <= 0.0:
        raise DegenerateSignalError("speech has zero power")
    if p_noise <= 0.0:
        raise DegenerateSignalError("noise has zero power")
    return float(np.sqrt(p_speech / (p_noise * 10.0 ** (snr_db / 10.0))))


def mix_at_snr(speech: Utterance, noise: Utterance, snr_db: float, seed) -> Utterance:
    """Add noise to speech at an exact SNR, measured over the full overlap.

    The noise segment starts at a seeded random offset (tiled when the
    noise is shorter than the speech), so the result is deterministic
    given ``(speech, noise, snr_db, seed)``.
    """
    if speech.sample_rate != noise.sample_rate:
        raise DimensionMismatchError(
            f"sample rates differ: {speech.sample_rate} vs {noise.sample_rate}"
        )
    segment, _ = noise_segment(noise, len(speech), seed)
    gain = snr_gain(speech.samples, segment, snr_db)
    return Utterance(speech.samples + gain * segment, speech.sample_rate)
