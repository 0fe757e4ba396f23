"""Welch PSD helpers shared by the channel model and the demodulator.

A demodulator window of ``window_size`` samples is split into
``n_segments`` Hann-tapered sub-segments with 50% overlap, so the
sub-segment length is ``2 * window_size / (n_segments + 1)``.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.signal import get_window

DEFAULT_SEGMENTS = 4


def segment_length(window_size: int, n_segments: int = DEFAULT_SEGMENTS) -> int:
    seg = (2 * window_size) // (n_segments + 1)
    if seg < 8:
        raise ValueError(f"window of {window_size} samples is too short for {n_segments} Welch segments")
    return seg


def segment_starts(window_size: int, n_segments: int = DEFAULT_SEGMENTS) -> np.ndarray:
    seg = segment_length(window_size, n_segments)
    step = seg - seg // 2
    count = (window_size - seg) // step + 1
    return np.arange(count) * step


@lru_cache(maxsize=32)
def hann(n: int) -> np.ndarray:
    # periodic Hann, as scipy.signal.welch uses
    w = get_window("hann", n)
    w.setflags(write=False)
    return w


def coherent_gain_ratio(window_size: int, n_segments: int = DEFAULT_SEGMENTS) -> float:
    """(sum w)^2 / sum w^2: tone-bin power over noise-bin power per unit SNR."""
    w = hann(segment_length(window_size, n_segments))
    return float(w.sum() ** 2 / (w ** 2).sum())


def _segments(windows: np.ndarray, n_segments: int) -> np.ndarray:
    """(n_windows, window_size) -> (n_windows, n_seg, seg_len) view."""
    n = windows.shape[-1]
    seg = segment_length(n, n_segments)
    starts = segment_starts(n, n_segments)
    idx = starts[:, None] + np.arange(seg)[None, :]
    return windows[..., idx]


def welch_psd(window: np.ndarray, sample_rate: float, n_segments: int = DEFAULT_SEGMENTS) -> tuple[np.ndarray, np.ndarray]:
    """Two-sided density PSD of one window (or a stack of windows on the last axis).

    Returns ``(freqs, psd)`` in FFT order.
    """
    x = np.asarray(window)
    n = x.shape[-1]
    seg = segment_length(n, n_segments)
    w = hann(seg)
    segs = _segments(x, n_segments) * w
    spec = np.fft.fft(segs, axis=-1)
    psd = (np.abs(spec) ** 2).mean(axis=-2) / (sample_rate * (w ** 2).sum())
    return np.fft.fftfreq(seg, 1.0 / sample_rate), psd


def tone_bin(freq_offset: float, sample_rate: float, seg_len: int) -> int:
    return int(round(freq_offset * seg_len / sample_rate)) % seg_len


def bin_power(windows: np.ndarray, freq_offset: float, sample_rate: float,
              n_segments: int = DEFAULT_SEGMENTS, band_bins: int = 0) -> np.ndarray:
    """Welch PSD at the bin nearest ``freq_offset`` for a stack of windows.

    Only the needed DFT bins are computed. ``band_bins`` > 0 sums the PSD over
    ``bin +/- band_bins``.
    """
    x = np.asarray(windows)
    n = x.shape[-1]
    seg = segment_length(n, n_segments)
    w = hann(seg)
    k0 = tone_bin(freq_offset, sample_rate, seg)
    ks = (k0 + np.arange(-band_bins, band_bins + 1)) % seg
    m = np.arange(seg)
    kernel = w[:, None] * np.exp(-2j * np.pi * np.outer(m, ks) / seg)  # (seg, nbins)
    segs = _segments(x, n_segments)  # (..., nseg, seg)
    proj = segs @ kernel  # (..., nseg, nbins)
    psd = (np.abs(proj) ** 2).mean(axis=-2) / (sample_rate * (w ** 2).sum())
    return psd.sum(axis=-1)


def measure_snr(samples: np.ndarray, freq_offset: float, sample_rate: float, window_size: int,
                n_segments: int = DEFAULT_SEGMENTS, exclude: int = 2) -> float:
    """In-band SNR in dB: tone-bin power over median off-bin power.

    The Welch PSD is averaged over every whole window in ``samples``; bins
    within ``exclude`` of the tone are left out of the noise median.
    """
    x = np.asarray(samples)
    n_win = len(x) // window_size
    if n_win == 0:
        raise ValueError("need at least one full window")
    stack = x[:n_win * window_size].reshape(n_win, window_size)
    _, psd = welch_psd(stack, sample_rate, n_segments)
    mean = psd.mean(axis=0)
    seg = mean.size
    k = tone_bin(freq_offset, sample_rate, seg)
    dist = np.abs((np.arange(seg) - k + seg // 2) % seg - seg // 2)
    noise = np.median(mean[dist > exclude])
    if noise <= 0:
        return float("inf")
    return float(10 * np.log10(mean[k] / noise))
