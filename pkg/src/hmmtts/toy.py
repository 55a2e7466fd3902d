"""Synthetic speech-like corpus for smoke tests and demos.

Each phoneme is rendered from a fixed recipe: voiced sounds are pulse
trains through two formant resonators, obstruents are shaped noise, and
pauses are near-silent noise.  Everything is drawn from one seeded
generator, so a given seed always yields the same files.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from scipy.signal import lfilter

from .corpus import AudioBuffer, write_wav
from .textproc import phonetize

SAMPLE_RATE = 16000

TOY_SENTENCES = (
    "pala", "tortuga", "pala tortuga", "clavo", "tenis",
    "nariz", "globo", "silla", "puerta", "gallina",
)

# kind, (F1, F2) or noise centre/bandwidth, relative level
_RECIPES = {
    "a": ("voiced", (800, 1300), 1.0), "e": ("voiced", (500, 1900), 1.0),
    "i": ("voiced", (300, 2300), 0.9), "o": ("voiced", (500, 900), 1.0),
    "u": ("voiced", (320, 800), 0.9), "j": ("voiced", (300, 2200), 0.6),
    "w": ("voiced", (320, 700), 0.6), "m": ("voiced", (250, 1100), 0.35),
    "n": ("voiced", (250, 1600), 0.35), "ɲ": ("voiced", (250, 2000), 0.35),
    "l": ("voiced", (360, 1300), 0.5), "r": ("voiced", (420, 1400), 0.5),
    "ɾ": ("voiced", (420, 1500), 0.5), "ʝ": ("voiced", (300, 2100), 0.4),
    "b": ("murmur", (250, 800), 0.2), "d": ("murmur", (250, 1600), 0.2),
    "g": ("murmur", (250, 2000), 0.2),
    "p": ("stop", (800, 1500), 0.3), "t": ("stop", (4000, 2500), 0.3),
    "k": ("stop", (2000, 1500), 0.3),
    "f": ("noise", (3000, 4000), 0.08), "s": ("noise", (6000, 2000), 0.25),
    "x": ("noise", (1800, 1500), 0.2), "tʃ": ("stop", (3500, 2000), 0.35),
    "sil": ("pause", None, 0.0), "sp": ("pause", None, 0.0),
}

_DURATIONS = {  # seconds, (low, high)
    "vowel": (0.09, 0.13), "consonant": (0.06, 0.09), "sil": (0.15, 0.2), "sp": (0.05, 0.07),
}


def resonator_coeffs(freq, bandwidth, sample_rate=SAMPLE_RATE):
    r = np.exp(-np.pi * bandwidth / sample_rate)
    theta = 2.0 * np.pi * freq / sample_rate
    return [1.0 - r], [1.0, -2.0 * r * np.cos(theta), r * r]


def formant_filter(x, formants, sample_rate=SAMPLE_RATE, bandwidths=None):
    bandwidths = bandwidths or [80.0 + 0.05 * f for f in formants]
    for f, bw in zip(formants, bandwidths):
        b, a = resonator_coeffs(f, bw, sample_rate)
        x = lfilter(b, a, x)
    return x


def pulse_train(n, f0, sample_rate=SAMPLE_RATE, phase=0.0):
    """Unit pulses at ``f0`` Hz (scalar or per-sample array); returns (signal, next phase)."""
    f0 = np.broadcast_to(np.asarray(f0, dtype=float), (n,))
    cycles = phase + np.cumsum(f0) / sample_rate
    x = np.zeros(n)
    x[1:][np.floor(cycles[1:]) > np.floor(cycles[:-1])] = 1.0
    return x, float(cycles[-1] % 1.0) if n else phase


def synthetic_vowel(f0=120.0, formants=(700.0, 1200.0), duration=1.0, sample_rate=SAMPLE_RATE,
                    level=0.5) -> AudioBuffer:
    """Steady two-formant vowel: a pulse train through two resonators."""
    n = int(round(duration * sample_rate))
    x, _ = pulse_train(n, f0, sample_rate)
    y = formant_filter(x, formants, sample_rate)
    return AudioBuffer(level * y / np.max(np.abs(y)), sample_rate)


def _phone_kind(ph):
    if ph in ("sil", "sp"):
        return ph
    return "vowel" if ph in "aeiou" else "consonant"


def render_phones(phones, rng, f0_base=240.0, sample_rate=SAMPLE_RATE):
    """Concatenate phone recipes into one signal scaled to peak 0.7."""
    pieces = []
    phase = 0.0
    for ph in phones:
        lo, hi = _DURATIONS[_phone_kind(ph)]
        n = int(round(rng.uniform(lo, hi) * sample_rate))
        kind, shape, level = _RECIPES[ph]
        if kind == "pause":
            pieces.append(1e-4 * rng.standard_normal(n))
            phase = 0.0
            continue
        if kind in ("voiced", "murmur"):
            f0 = f0_base * (1.0 + 0.03 * np.sin(np.linspace(0, np.pi, n))) * rng.uniform(0.97, 1.03)
            src, phase = pulse_train(n, f0, sample_rate, phase)
            y = formant_filter(src, shape, sample_rate)
            y = y / (np.max(np.abs(y)) + 1e-12)
            if ph == "ʝ":
                y = y + 0.15 * formant_filter(rng.standard_normal(n), (3000,), sample_rate)
        else:
            centre, bw = shape
            noise = formant_filter(rng.standard_normal(n), (centre,), sample_rate, [bw])
            y = noise / (np.max(np.abs(noise)) + 1e-12)
            if kind == "stop":
                closure = n // 2
                y[:closure] = 1e-3 * rng.standard_normal(closure)
                y[closure:] *= np.exp(-np.arange(n - closure) / (0.01 * sample_rate))
            phase = 0.0
        # short raised-cosine ramps avoid clicks at phone joins
        ramp = min(80, n // 4)
        env = np.ones(n)
        env[:ramp] = 0.5 - 0.5 * np.cos(np.linspace(0, np.pi, ramp))
        env[n - ramp:] = env[:ramp][::-1]
        pieces.append(level * y * env)
    signal = np.concatenate(pieces)
    return 0.7 * signal / np.max(np.abs(signal))


def write_toy_corpus(directory, sentences=TOY_SENTENCES, seed: int = 0, f0_base=240.0) -> Path:
    """Write ``wav/uNN.wav`` files plus ``manifest.tsv``; returns the manifest path."""
    directory = Path(directory)
    (directory / "wav").mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    lines = ["# id\taudio_path\ttext\tspeaker_id\tage_group\tgender"]
    for k, text in enumerate(sentences, start=1):
        uid = f"u{k:02d}"
        phones = phonetize(text).phones
        samples = render_phones(phones, rng, f0_base)
        write_wav(AudioBuffer(samples, SAMPLE_RATE), directory / "wav" / f"{uid}.wav")
        lines.append(f"{uid}\twav/{uid}.wav\t{text}\ttoy1\tchild\tfeminine")
    manifest = directory / "manifest.tsv"
    manifest.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return manifest
