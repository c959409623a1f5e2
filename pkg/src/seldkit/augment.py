"""Waveform augmentations (gain, pitch shift, band-pass) and spectrogram masking.

All waveform transforms apply the same coefficients to the four FOA
channels, so the spatial image (and hence the intensity DOA) of a source
is preserved.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.signal import butter, resample_poly, sosfilt

from .audio import AudioClip


@dataclass(frozen=True)
class AugmentConfig:
    gain_db_range: tuple = (-6.0, 6.0)
    pitch_semitone_range: tuple = (-2.0, 2.0)
    bandpass_lo_range: tuple = (50.0, 500.0)
    bandpass_hi_range: tuple = (2000.0, 11000.0)
    n_time_masks: int = 2
    max_time_frames: int = 20
    n_freq_masks: int = 2
    max_mel_bins: int = 8
    seed: int = 0

    def __post_init__(self):
        for name in ("gain_db_range", "pitch_semitone_range", "bandpass_lo_range", "bandpass_hi_range"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ValueError(f"{name} is not ordered: {(lo, hi)}")
        if min(self.n_time_masks, self.max_time_frames, self.n_freq_masks, self.max_mel_bins) < 0:
            raise ValueError("mask counts and sizes must be >= 0")


def apply_gain(clip: AudioClip, gain_db: float) -> AudioClip:
    """Scale all channels by 10^(gain_db/20)."""
    if not np.isfinite(gain_db):
        raise ValueError(f"gain must be finite, got {gain_db}")
    return AudioClip(clip.samples * 10.0 ** (gain_db / 20.0), clip.sample_rate)


def pitch_shift(clip: AudioClip, semitones: float) -> AudioClip:
    """Shift pitch by resampling; output is truncated/zero-padded to the input length.

    A shift of s semitones scales all frequencies by 2^(s/12). Duration is
    preserved so label frame alignment stays valid; the tail freed by an
    upward shift is zero-filled.
    """
    if abs(semitones) > 12:
        raise ValueError(f"|semitones| must be <= 12, got {semitones}")
    factor = 2.0 ** (semitones / 12.0)
    ratio = Fraction(1.0 / factor).limit_denominator(1000)
    shifted = resample_poly(clip.samples, ratio.numerator, ratio.denominator, axis=1)
    n = clip.n_samples
    out = np.zeros((4, n))
    keep = min(n, shifted.shape[1])
    out[:, :keep] = shifted[:, :keep]
    return AudioClip(out, clip.sample_rate)


def band_pass(clip: AudioClip, f_lo: float, f_hi: float) -> AudioClip:
    """2nd-order Butterworth high-pass at f_lo cascaded with low-pass at f_hi."""
    nyquist = clip.sample_rate / 2.0
    if not (0.0 < f_lo < f_hi < nyquist):
        raise ValueError(f"need 0 < f_lo < f_hi < {nyquist}, got ({f_lo}, {f_hi})")
    sos = np.vstack(
        [
            butter(2, f_lo, btype="highpass", fs=clip.sample_rate, output="sos"),
            butter(2, f_hi, btype="lowpass", fs=clip.sample_rate, output="sos"),
        ]
    )
    return AudioClip(sosfilt(sos, clip.samples, axis=1), clip.sample_rate)


def spec_augment(features, config: AugmentConfig, rng: np.random.Generator) -> np.ndarray:
    """Mask random time spans and mel bands of a feature tensor.

    Masks sit at identical positions in all channels and are filled with
    the per-channel mean of the unmasked tensor. Widths are drawn
    uniformly from [0, max] (0 leaves the tensor untouched).
    """
    feats = np.array(features, dtype=float)
    n_ch, n_frames, n_mels = feats.shape
    fill = feats.mean(axis=(1, 2))
    for _ in range(config.n_time_masks):
        width = min(int(rng.integers(0, config.max_time_frames + 1)), n_frames)
        if width == 0:
            continue
        start = int(rng.integers(0, n_frames - width + 1))
        feats[:, start : start + width, :] = fill[:, None, None]
    for _ in range(config.n_freq_masks):
        width = min(int(rng.integers(0, config.max_mel_bins + 1)), n_mels)
        if width == 0:
            continue
        start = int(rng.integers(0, n_mels - width + 1))
        feats[:, :, start : start + width] = fill[:, None, None]
    return feats


def augment_waveform(clip: AudioClip, config: AugmentConfig, rng: np.random.Generator) -> AudioClip:
    """Apply gain, pitch shift and band-pass with parameters drawn from the config ranges."""
    gain = rng.uniform(*config.gain_db_range)
    semitones = rng.uniform(*config.pitch_semitone_range)
    f_lo = rng.uniform(*config.bandpass_lo_range)
    f_hi = rng.uniform(*config.bandpass_hi_range)
    out = apply_gain(clip, gain)
    out = pitch_shift(out, semitones)
    return band_pass(out, f_lo, f_hi)
