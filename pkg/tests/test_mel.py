"""Mel extraction: frame-count formula, floor case, translation consistency,
and a sine-at-band-center check against a direct DFT oracle."""

import numpy as np
import pytest

from prosynth.corpus import CorpusError, extract_mel, mel_filterbank
from prosynth.corpus.mel import LOG_FLOOR, band_center_hz

SR = 16000
WINDOW = 800
HOP = 200
BANDS = 16


def test_frame_count_formula():
    mel = extract_mel(np.zeros(1024), 8000, num_bands=4, hop=256, window=512)
    assert mel.num_frames == 3
    # n = window exactly -> single frame
    mel = extract_mel(np.zeros(WINDOW), SR, num_bands=BANDS, hop=HOP, window=WINDOW)
    assert mel.num_frames == 1


def test_too_short_audio_rejected():
    with pytest.raises(CorpusError):
        extract_mel(np.zeros(WINDOW - 1), SR, num_bands=BANDS, hop=HOP, window=WINDOW)
    with pytest.raises(CorpusError):
        extract_mel(np.zeros(WINDOW), 0, num_bands=BANDS, hop=HOP, window=WINDOW)


def test_all_zero_waveform_hits_log_floor():
    mel = extract_mel(np.zeros(SR), SR, num_bands=BANDS, hop=HOP, window=WINDOW)
    assert np.allclose(mel.frames, np.log(LOG_FLOOR))


def _dft_oracle_frame(samples):
    """First analysis frame computed with an explicit DFT sum, no np.fft."""
    seg = samples[:WINDOW] * np.hanning(WINDOW)
    n = np.arange(WINDOW)
    mags = np.empty(WINDOW // 2 + 1)
    for k in range(WINDOW // 2 + 1):
        basis = np.exp(-2j * np.pi * k * n / WINDOW)
        mags[k] = np.abs(np.sum(seg * basis))
    fbank = mel_filterbank(BANDS, WINDOW, SR)
    return np.log(np.maximum(fbank @ mags, LOG_FLOOR))


@pytest.mark.parametrize("band", [0, 3, 8, 12, 15])
def test_sine_at_band_center_peaks_in_that_band(band):
    freq = band_center_hz(band, BANDS, SR)
    t = np.arange(SR)
    sig = np.sin(2 * np.pi * freq * t / SR)
    mel = extract_mel(sig, SR, num_bands=BANDS, hop=HOP, window=WINDOW)
    assert int(np.argmax(mel.frames.mean(axis=0))) == band

    oracle = _dft_oracle_frame(sig)
    assert int(np.argmax(oracle)) == band
    assert np.max(np.abs(mel.frames[0] - oracle)) < 1e-4


def test_translation_by_one_hop_shifts_frames(rng):
    sig = rng.standard_normal(SR).astype(np.float64)
    base = extract_mel(sig, SR, num_bands=BANDS, hop=HOP, window=WINDOW)
    shifted = extract_mel(np.concatenate([np.zeros(HOP), sig]), SR,
                          num_bands=BANDS, hop=HOP, window=WINDOW)
    assert shifted.num_frames == base.num_frames + 1
    # frame t of the original appears as frame t+1 after prepending one hop
    assert np.max(np.abs(shifted.frames[1:] - base.frames)) < 1e-5


def test_filterbank_shape_and_coverage():
    fbank = mel_filterbank(BANDS, WINDOW, SR)
    assert fbank.shape == (BANDS, WINDOW // 2 + 1)
    assert np.all(fbank >= 0.0)
    # every band has a nonzero response somewhere
    assert np.all(fbank.max(axis=1) > 0.0)
