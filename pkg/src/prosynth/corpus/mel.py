"""Log-mel extraction from mono waveforms.

Pipeline: Hann-windowed magnitude STFT (no centering, so frame t covers
samples [t*hop, t*hop + window)), triangular mel filterbank on the HTK mel
scale, then natural log with a 1e-5 floor.  T = 1 + floor((n - window)/hop).
"""

from __future__ import annotations

import numpy as np

from .types import CorpusError, MelSpectrogram

LOG_FLOOR = 1e-5


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m) / 2595.0) - 1.0)


def mel_filterbank(num_bands: int, window: int, sample_rate: int) -> np.ndarray:
    """[num_bands, window//2 + 1] triangular weights, band centers equally
    spaced on the mel scale between 0 Hz and Nyquist."""
    points_mel = np.linspace(0.0, hz_to_mel(sample_rate / 2.0), num_bands + 2)
    points_hz = mel_to_hz(points_mel)
    bin_freqs = np.arange(window // 2 + 1) * (sample_rate / window)
    fbank = np.zeros((num_bands, bin_freqs.size))
    for b in range(num_bands):
        lo, mid, hi = points_hz[b], points_hz[b + 1], points_hz[b + 2]
        rising = (bin_freqs - lo) / max(mid - lo, 1e-12)
        falling = (hi - bin_freqs) / max(hi - mid, 1e-12)
        fbank[b] = np.maximum(0.0, np.minimum(rising, falling))
    return fbank


def band_center_hz(band: int, num_bands: int, sample_rate: int) -> float:
    points = mel_to_hz(np.linspace(0.0, hz_to_mel(sample_rate / 2.0), num_bands + 2))
    return float(points[band + 1])


def extract_mel(samples, sample_rate: int, num_bands: int = 16, hop: int = 200,
                window: int = 800) -> MelSpectrogram:
    samples = np.asarray(samples, dtype=np.float64).reshape(-1)
    if sample_rate <= 0:
        raise CorpusError(f"sample rate must be positive, got {sample_rate}")
    if samples.size < window:
        raise CorpusError(
            f"audio too short: {samples.size} samples for window {window}"
        )
    num_frames = 1 + (samples.size - window) // hop
    win = np.hanning(window)
    fbank = mel_filterbank(num_bands, window, sample_rate)
    frames = np.empty((num_frames, num_bands), dtype=np.float64)
    for t in range(num_frames):
        seg = samples[t * hop: t * hop + window] * win
        mag = np.abs(np.fft.rfft(seg))
        frames[t] = np.log(np.maximum(fbank @ mag, LOG_FLOOR))
    return MelSpectrogram(frames=frames.astype(np.float32), hop=hop, window=window,
                          sample_rate=sample_rate)
