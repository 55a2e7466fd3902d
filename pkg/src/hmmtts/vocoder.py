"""Source-filter synthesis from mel-cepstra and an F0 contour.

Excitation is a pulse train on voiced frames and white noise on unvoiced
ones, both at unit mean power.  Each analysis frame's mel-cepstrum is
turned into a minimum-phase impulse response that filters a windowed
slice of the excitation; slices overlap-add back together.
"""

from __future__ import annotations

import logging

import numpy as np

from .corpus import AudioBuffer
from .features import (FMAX, FMIN, AnalysisConfig, N_FFT, analyze,
                       mcep_to_log_spectrum)

log = logging.getLogger(__name__)

PEAK_LEVEL = 0.9
# below half a 16-bit step the output is silence; scaling it up would only amplify the floor
SILENCE_PEAK = 2.0**-16


def build_excitation(f0, frame_shift_samples: int, sample_rate: int, seed: int = 0,
                     fmin: float = FMIN, fmax: float = FMAX):
    """Excitation signal of ``len(f0) * frame_shift_samples`` samples.

    ``f0`` holds Hz per frame, NaN (or <= 0) for unvoiced frames.  Voiced
    frames get pulses of height ``sqrt(period)`` so every frame carries
    unit mean power; pulse phase runs on across frame boundaries.
    Unvoiced frames get unit-variance Gaussian noise from a generator
    seeded with ``seed``.  Out-of-range F0 is clamped.

    Returns ``(excitation, n_clamped)``.
    """
    f0 = np.asarray(f0, dtype=np.float64).reshape(-1)
    n_frames = len(f0)
    shift = int(frame_shift_samples)
    out = np.zeros(n_frames * shift)
    if n_frames == 0:
        return out, 0
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal(n_frames * shift)
    voiced = np.isfinite(f0) & (f0 > 0)
    clamped = voiced & ((f0 < fmin) | (f0 > fmax))
    n_clamped = int(clamped.sum())
    if n_clamped:
        log.warning("clamped %d F0 values to [%g, %g] Hz", n_clamped, fmin, fmax)
    f0 = np.where(voiced, np.clip(np.nan_to_num(f0, nan=fmin), fmin, fmax), 0.0)

    next_pulse = 0.0  # position of the next pulse, relative to the current frame start
    for t in range(n_frames):
        seg = slice(t * shift, (t + 1) * shift)
        if not voiced[t]:
            out[seg] = noise[seg]
            next_pulse = 0.0
            continue
        period = sample_rate / f0[t]
        while next_pulse < shift:
            out[t * shift + int(next_pulse)] = np.sqrt(period)
            next_pulse += period
        next_pulse -= shift
    return out, n_clamped


def minimum_phase_response(mcep, alpha, n_fft=N_FFT):
    """Impulse responses (``n_fft`` taps per row) of the envelopes in ``mcep``."""
    logmag = mcep_to_log_spectrum(mcep, alpha, n_fft)
    cep = np.fft.irfft(logmag, n=n_fft, axis=-1)
    fold = np.zeros(n_fft)
    fold[0] = 1.0
    fold[1 : n_fft // 2] = 2.0
    fold[n_fft // 2] = 1.0
    spectrum = np.exp(np.fft.rfft(cep * fold, axis=-1))
    return np.fft.irfft(spectrum, n=n_fft, axis=-1)


def _slice_weights(n_frames, length, shift, pad, n_samples):
    # Hamming windows at the analysis positions, normalised to sum to one per sample
    win = np.hamming(length)
    total = np.zeros(n_samples + 2 * length)
    for t in range(n_frames):
        start = t * shift - pad + length
        total[start : start + length] += win
    return win, total[length : length + n_samples]


def render(mcep, excitation, alpha, frame_shift_samples: int, frame_length_samples: int,
           n_fft=N_FFT):
    """Filter ``excitation`` frame by frame; no normalisation applied.

    Linear in ``excitation``.  With a flat envelope (all cepstra zero)
    the excitation comes back unchanged.
    """
    mcep = np.atleast_2d(np.asarray(mcep, dtype=np.float64))
    excitation = np.asarray(excitation, dtype=np.float64)
    n_frames = len(mcep)
    shift, length = int(frame_shift_samples), int(frame_length_samples)
    n_samples = n_frames * shift
    if len(excitation) != n_samples:
        raise ValueError(f"excitation has {len(excitation)} samples, expected "
                         f"{n_frames} frames x {shift} = {n_samples}")
    pad = (length - shift) // 2
    win, total = _slice_weights(n_frames, length, shift, pad, n_samples)
    responses = minimum_phase_response(mcep, alpha, n_fft)

    out = np.zeros(n_samples + length + n_fft)
    ext = np.concatenate([np.zeros(length), excitation, np.zeros(length)])
    norm = np.concatenate([np.ones(length), total, np.ones(length)])
    for t in range(n_frames):
        start = t * shift - pad
        piece = ext[start + length : start + 2 * length] * win / norm[start + length : start + 2 * length]
        if not piece.any():
            continue
        y = np.fft.irfft(np.fft.rfft(piece, 2 * n_fft) * np.fft.rfft(responses[t], 2 * n_fft), 2 * n_fft)
        y = y[: length + n_fft - 1]
        lo = start
        if lo < 0:
            y = y[-lo:]
            lo = 0
        out[lo : lo + len(y)] += y
    return out[:n_samples]


def normalize_peak(samples, level=PEAK_LEVEL):
    """Scale to peak ``level``; returns ``(scaled, gain)``.

    Signals whose peak is under :data:`SILENCE_PEAK` are returned unscaled
    with gain 1.
    """
    peak = float(np.max(np.abs(samples))) if len(samples) else 0.0
    if peak < SILENCE_PEAK:
        return np.array(samples, dtype=np.float64), 1.0
    gain = level / peak
    return samples * gain, gain


def synthesize(mcep, excitation, alpha, sample_rate=16000, frame_shift_samples=80,
               frame_length_samples=400, n_fft=N_FFT, return_gain=False):
    """Render and peak-normalise to :data:`PEAK_LEVEL`.

    With ``return_gain=True`` also returns the normalisation gain.
    """
    raw = render(mcep, excitation, alpha, frame_shift_samples, frame_length_samples, n_fft)
    scaled, gain = normalize_peak(raw)
    buffer = AudioBuffer(scaled, sample_rate)
    return (buffer, gain) if return_gain else buffer


def copy_synthesis(audio: AudioBuffer, cfg: AnalysisConfig | None = None, seed: int = 0,
                   return_gain=False):
    """Analyse ``audio`` and resynthesise it directly from its own parameters."""
    cfg = cfg or AnalysisConfig(sample_rate=audio.sample_rate)
    feats = analyze(audio, cfg)
    excitation, _ = build_excitation(feats.f0, cfg.shift_samples, cfg.sample_rate, seed,
                                     cfg.fmin, cfg.fmax)
    return synthesize(feats.mcep, excitation, cfg.alpha, cfg.sample_rate, cfg.shift_samples,
                      cfg.length_samples, cfg.n_fft, return_gain=return_gain)
