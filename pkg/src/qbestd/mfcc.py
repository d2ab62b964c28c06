"""MFCC front-end: framing, mel filterbank, DCT, and delta features.

Produces the 39-dimensional baseline (13 cepstra + first and second
derivatives) at 8 kHz by default; the chain is rate-agnostic via MfccConfig.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AudioTooShortError, ConfigError
from .featio import AudioBuffer, FeatureMatrix

LOG_ENERGY_FLOOR = 1e-10


@dataclass
class MfccConfig:
    sample_rate_hz: int = 8000
    frame_length_ms: float = 25.0
    frame_shift_ms: float = 10.0
    num_mel_filters: int = 23
    num_cepstra: int = 13
    low_freq_hz: float = 20.0
    high_freq_hz: float | None = None  # defaults to sample_rate/2 - 100
    pre_emphasis: float = 0.97
    delta_window: int = 2

    def __post_init__(self) -> None:
        if self.high_freq_hz is None:
            self.high_freq_hz = self.sample_rate_hz / 2 - 100.0
        if not 0 < self.low_freq_hz < self.high_freq_hz <= self.sample_rate_hz / 2:
            raise ValueError(
                f"need 0 < low ({self.low_freq_hz}) < high ({self.high_freq_hz}) "
                f"<= Nyquist ({self.sample_rate_hz / 2})"
            )
        if self.num_cepstra > self.num_mel_filters:
            raise ValueError(
                f"num_cepstra ({self.num_cepstra}) exceeds "
                f"num_mel_filters ({self.num_mel_filters})"
            )
        if not 0 <= self.pre_emphasis < 1:
            raise ValueError(f"pre_emphasis must be in [0, 1), got {self.pre_emphasis}")

    @property
    def frame_length_samples(self) -> int:
        return int(round(self.frame_length_ms * self.sample_rate_hz / 1000.0))

    @property
    def frame_shift_samples(self) -> int:
        return int(round(self.frame_shift_ms * self.sample_rate_hz / 1000.0))


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def next_pow2(n: int) -> int:
    size = 1
    while size < n:
        size *= 2
    return size


def frame_signal(audio: AudioBuffer, cfg: MfccConfig) -> np.ndarray:
    """Slice audio into pre-emphasized, Hamming-windowed frames.

    Frame count is 1 + floor((N - L) / S); trailing samples that do not fill
    a frame are dropped.
    """
    x = audio.samples.astype(np.float64)
    length = cfg.frame_length_samples
    shift = cfg.frame_shift_samples
    if len(x) < length:
        raise AudioTooShortError(
            f"audio has {len(x)} samples, shorter than one {length}-sample frame"
        )
    num_frames = 1 + (len(x) - length) // shift
    idx = np.arange(num_frames)[:, None] * shift + np.arange(length)[None, :]
    frames = x[idx]
    emphasized = np.empty_like(frames)
    emphasized[:, 1:] = frames[:, 1:] - cfg.pre_emphasis * frames[:, :-1]
    emphasized[:, 0] = frames[:, 0] * (1.0 - cfg.pre_emphasis)
    return emphasized * np.hamming(length)


def mel_filterbank(cfg: MfccConfig, nfft: int) -> np.ndarray:
    """Triangular filters with mel-equidistant centers, evaluated at FFT bin
    frequencies; shape (num_mel_filters, nfft // 2 + 1)."""
    low_mel = hz_to_mel(cfg.low_freq_hz)
    high_mel = hz_to_mel(cfg.high_freq_hz)
    edges_hz = mel_to_hz(np.linspace(low_mel, high_mel, cfg.num_mel_filters + 2))
    bin_freqs = np.arange(nfft // 2 + 1) * cfg.sample_rate_hz / nfft
    bank = np.zeros((cfg.num_mel_filters, len(bin_freqs)))
    for m in range(cfg.num_mel_filters):
        left, center, right = edges_hz[m], edges_hz[m + 1], edges_hz[m + 2]
        rise = (bin_freqs - left) / (center - left)
        fall = (right - bin_freqs) / (right - center)
        bank[m] = np.maximum(0.0, np.minimum(rise, fall))
    return bank


def dct_matrix(num_out: int, num_in: int) -> np.ndarray:
    """Orthonormal DCT-II basis, rows 0..num_out-1."""
    n = np.arange(num_in)
    k = np.arange(num_out)[:, None]
    basis = np.cos(np.pi * k * (2 * n + 1) / (2 * num_in)) * np.sqrt(2.0 / num_in)
    basis[0] = np.sqrt(1.0 / num_in)
    return basis


def extract_mfcc(audio: AudioBuffer, cfg: MfccConfig | None = None) -> FeatureMatrix:
    """Cepstral coefficients per frame: power spectrum -> mel energies ->
    floored natural log -> orthonormal DCT-II (coefficients 0..num_cepstra-1)."""
    if cfg is None:
        cfg = MfccConfig()
    if audio.sample_rate_hz != cfg.sample_rate_hz:
        raise ConfigError(
            f"audio sample rate {audio.sample_rate_hz} does not match "
            f"config rate {cfg.sample_rate_hz}"
        )
    frames = frame_signal(audio, cfg)
    nfft = next_pow2(cfg.frame_length_samples)
    spectrum = np.abs(np.fft.rfft(frames, nfft, axis=1)) ** 2
    bank = mel_filterbank(cfg, nfft)
    energies = spectrum @ bank.T
    log_energies = np.log(np.maximum(energies, LOG_ENERGY_FLOOR))
    dct = dct_matrix(cfg.num_cepstra, cfg.num_mel_filters)
    cepstra = log_energies @ dct.T
    return FeatureMatrix(
        data=cepstra,
        frame_shift_ms=cfg.frame_shift_ms,
        frame_length_ms=cfg.frame_length_ms,
        extractor_tag=f"mfcc{cfg.num_cepstra}",
    )


def append_deltas(matrix: FeatureMatrix, window: int = 2) -> FeatureMatrix:
    """Stack [static, delta, delta-delta]; deltas use the regression formula
    delta[t] = sum_k k*(x[t+k] - x[t-k]) / (2*sum_k k^2) with edge replication."""
    if window < 1:
        raise ValueError(f"delta window must be >= 1, got {window}")
    static = matrix.data.astype(np.float64)
    delta = _delta(static, window)
    delta2 = _delta(delta, window)
    stacked = np.hstack([static, delta, delta2])
    tag = matrix.extractor_tag
    if tag.startswith("mfcc") and tag[4:].isdigit():
        tag = f"mfcc{3 * int(tag[4:])}"
    elif tag:
        tag = f"{tag}+deltas"
    return FeatureMatrix(
        data=stacked,
        frame_shift_ms=matrix.frame_shift_ms,
        frame_length_ms=matrix.frame_length_ms,
        source_id=matrix.source_id,
        extractor_tag=tag,
    )


def _delta(x: np.ndarray, window: int) -> np.ndarray:
    denom = 2.0 * sum(k * k for k in range(1, window + 1))
    padded = np.pad(x, ((window, window), (0, 0)), mode="edge")
    out = np.zeros_like(x)
    for k in range(1, window + 1):
        out += k * (padded[window + k : window + k + len(x)] - padded[window - k : window - k + len(x)])
    return out / denom
