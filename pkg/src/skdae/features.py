"""Log-Mel feature extraction, per-utterance normalization, and context
window stacking for the denoising front end."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .audio import Utterance
from .errors import ContractError, DimensionMismatchError, InvalidInputError, TooShortError

CONTEXT_FRAMES = 11


@dataclass(frozen=True)
class AnalysisConfig:
    """Front-end analysis settings: 25 ms Hamming window, 10 ms hop,
    512-point FFT, 40 mel filters at 16 kHz."""

    sample_rate: int = 16000
    frame_length: int = 400
    hop_length: int = 160
    fft_size: int = 512
    n_mels: int = 40
    log_floor: float = 1e-10


@dataclass
class FeatureMatrix:
    """T x D feature frames plus the per-dimension min/max used for
    [0, 1] scaling (populated once normalized)."""

    frames: np.ndarray
    norm_min: np.ndarray | None = None
    norm_max: np.ndarray | None = None
    normalized: bool = False

    def __post_init__(self):
        frames = np.asarray(self.frames, dtype=np.float64)
        if frames.ndim != 2 or frames.shape[0] < 1:
            raise InvalidInputError("feature matrix must be 2-d with at least one frame")
        self.frames = frames
        if self.norm_min is not None:
            self.norm_min = np.asarray(self.norm_min, dtype=np.float64)
        if self.norm_max is not None:
            self.norm_max = np.asarray(self.norm_max, dtype=np.float64)

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def n_dims(self) -> int:
        return self.frames.shape[1]


@dataclass
class ContextWindowBatch:
    """Stacked context windows (inputs), their center frames, and the
    clean targets; everything lives in the normalized [0, 1] domain."""

    inputs: np.ndarray
    center_frames: np.ndarray
    targets: np.ndarray

    @property
    def n(self) -> int:
        return self.inputs.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.targets.shape[1]


def merge_batches(batches) -> ContextWindowBatch:
    """Concatenate per-utterance batches into one training pool."""
    batches = list(batches)
    if not batches:
        raise InvalidInputError("no batches to merge")
    return ContextWindowBatch(
        inputs=np.concatenate([b.inputs for b in batches], axis=0),
        center_frames=np.concatenate([b.center_frames for b in batches], axis=0),
        targets=np.concatenate([b.targets for b in batches], axis=0),
    )


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(cfg: AnalysisConfig = AnalysisConfig()) -> np.ndarray:
    """Triangular unit-peak mel filters spanning 0 Hz to Nyquist.

    Returns an ``n_mels x (fft_size // 2 + 1)`` weight matrix.
    """
    n_bins = cfg.fft_size // 2 + 1
    bin_freqs = np.arange(n_bins) * cfg.sample_rate / cfg.fft_size
    edges = mel_to_hz(
        np.linspace(hz_to_mel(0.0), hz_to_mel(cfg.sample_rate / 2.0), cfg.n_mels + 2)
    )
    weights = np.zeros((cfg.n_mels, n_bins))
    for i in range(cfg.n_mels):
        lo, center, hi = edges[i], edges[i + 1], edges[i + 2]
        up = (bin_freqs - lo) / (center - lo)
        down = (hi - bin_freqs) / (hi - center)
        weights[i] = np.maximum(0.0, np.minimum(up, down))
    return weights


def frame_count(n_samples: int, cfg: AnalysisConfig) -> int:
    return (n_samples - cfg.frame_length) // cfg.hop_length + 1


def log_mel_features(u: Utterance, cfg: AnalysisConfig = AnalysisConfig()) -> FeatureMatrix:
    """Log mel-filterbank energies of each analysis frame (unnormalized).

    Frame t covers samples ``[t * hop, t * hop + frame_length)``; its
    value is ``log(filterbank @ power_spectrum + log_floor)``.
    """
    if u.sample_rate != cfg.sample_rate:
        raise InvalidInputError(
            f"expected {cfg.sample_rate} Hz audio, got {u.sample_rate} Hz "
            "(resampling is unsupported)"
        )
    n_frames = frame_count(len(u), cfg)
    if n_frames < 1:
        raise TooShortError(
            f"utterance of {len(u)} samples is shorter than one "
            f"{cfg.frame_length}-sample analysis window"
        )
    idx = np.arange(cfg.frame_length)[None, :] + cfg.hop_length * np.arange(n_frames)[:, None]
    frames = u.samples[idx] * np.hamming(cfg.frame_length)[None, :]
    spectrum = np.fft.rfft(frames, n=cfg.fft_size, axis=1)
    power = spectrum.real**2 + spectrum.imag**2
    energies = power @ mel_filterbank(cfg).T
    return FeatureMatrix(np.log(energies + cfg.log_floor))


def normalize_per_utterance(f: FeatureMatrix) -> FeatureMatrix:
    """Min-max scale each feature dimension to [0, 1] over the utterance.

    Constant dimensions map to 0.5.  The per-dimension extrema are kept
    so the scaling can be inverted.
    """
    if f.normalized:
        raise ContractError("features are already normalized")
    lo = f.frames.min(axis=0)
    hi = f.frames.max(axis=0)
    span = hi - lo
    out = np.empty_like(f.frames)
    flat = span == 0.0
    out[:, flat] = 0.5
    out[:, ~flat] = (f.frames[:, ~flat] - lo[~flat]) / span[~flat]
    np.clip(out, 0.0, 1.0, out=out)
    return FeatureMatrix(out, norm_min=lo, norm_max=hi, normalized=True)


def denormalize(f: FeatureMatrix) -> FeatureMatrix:
    """Invert :func:`normalize_per_utterance` using the stored extrema."""
    if not f.normalized:
        raise ContractError("features are not normalized")
    if f.norm_min is None or f.norm_max is None:
        raise ContractError("normalization metadata is missing")
    span = f.norm_max - f.norm_min
    return FeatureMatrix(f.frames * span + f.norm_min)


def stack_context(
    noisy: FeatureMatrix,
    clean: FeatureMatrix,
    context_frames: int = CONTEXT_FRAMES,
) -> ContextWindowBatch:
    """Build one context window per frame, paired with the clean target.

    Window t concatenates the ``context_frames`` noisy frames centered on
    t; out-of-range neighbors replicate the edge frame.
    """
    if noisy.n_frames != clean.n_frames:
        raise DimensionMismatchError(
            f"frame counts differ: {noisy.n_frames} vs {clean.n_frames}"
        )
    if not (noisy.normalized and clean.normalized):
        raise ContractError("context stacking expects normalized features")
    if context_frames % 2 != 1 or context_frames < 1:
        raise InvalidInputError("context size must be odd and positive")
    t = noisy.n_frames
    half = context_frames // 2
    columns = []
    for offset in range(-half, half + 1):
        rows = np.clip(np.arange(t) + offset, 0, t - 1)
        columns.append(noisy.frames[rows])
    return ContextWindowBatch(
        inputs=np.concatenate(columns, axis=1),
        center_frames=noisy.frames.copy(),
        targets=clean.frames.copy(),
    )


def context_windows(noisy: FeatureMatrix, context_frames: int = CONTEXT_FRAMES):
    """Context windows of a single feature matrix (no targets); used at
    inference time."""
    batch = stack_context(noisy, noisy, context_frames)
    return batch.inputs, batch.center_frames
