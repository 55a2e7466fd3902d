import numpy as np
import pytest

from hmmtts.corpus import AudioBuffer
from hmmtts.features import analyze, mcep_to_log_spectrum, mel_cepstral_distortion
from hmmtts.toy import synthetic_vowel
from hmmtts.vocoder import (PEAK_LEVEL, build_excitation, copy_synthesis, minimum_phase_response,
                            normalize_peak, render, synthesize)

SR = 16000


def test_pulse_spacing_and_count():
    exc, clamped = build_excitation(np.full(200, 100.0), 80, SR)
    pulses = np.flatnonzero(exc)
    assert clamped == 0
    assert abs(len(pulses) - 100) <= 1
    assert np.all(np.diff(pulses) == 160)
    assert np.sqrt(np.mean(exc**2)) == pytest.approx(1.0)


def test_pulse_phase_continues_across_frames():
    # a period longer than one frame must still produce evenly spaced pulses
    exc, _ = build_excitation(np.full(50, 64.0), 80, SR)
    gaps = np.diff(np.flatnonzero(exc))
    assert np.all(np.abs(gaps - 250) <= 1)


def test_noise_matches_pulse_energy():
    exc, _ = build_excitation(np.full(200, np.nan), 80, SR, seed=3)
    assert abs(exc.mean()) < 0.05
    assert np.sqrt(np.mean(exc**2)) == pytest.approx(1.0, rel=0.1)


def test_excitation_seeded():
    f0 = np.where(np.arange(100) % 20 < 10, 150.0, np.nan)
    a, _ = build_excitation(f0, 80, SR, seed=5)
    b, _ = build_excitation(f0, 80, SR, seed=5)
    c, _ = build_excitation(f0, 80, SR, seed=6)
    assert np.array_equal(a, b) and not np.array_equal(a, c)


def test_empty_and_clamped_contours():
    exc, n = build_excitation(np.zeros(0), 80, SR)
    assert len(exc) == 0 and n == 0
    exc, n = build_excitation(np.array([30.0, 1000.0, 120.0]), 80, SR)
    assert n == 2 and len(exc) == 240


def test_minimum_phase_response_magnitude_and_causality():
    c = np.zeros(25)
    c[:4] = [0.2, 0.9, -0.4, 0.2]
    h = minimum_phase_response(c[None, :], 0.42, 1024)[0]
    envelope = np.exp(mcep_to_log_spectrum(c, 0.42, 1024)[0])
    assert np.allclose(np.abs(np.fft.rfft(h)), envelope, rtol=1e-3)
    # minimum phase concentrates energy at the start: more than the zero-phase version
    zero_phase = np.fft.irfft(envelope, 1024)
    k = 20
    assert np.sum(h[:k] ** 2) > np.sum(zero_phase[:k] ** 2)
    assert np.sum(h[:200] ** 2) / np.sum(h**2) > 0.99


def test_flat_envelope_passes_excitation():
    exc = np.random.default_rng(0).standard_normal(40 * 80)
    out = render(np.zeros((40, 25)), exc, 0.42, 80, 400)
    assert np.allclose(out, exc, atol=1e-9)


def test_zero_excitation_zero_output():
    mcep = np.random.default_rng(1).normal(0, 0.3, (30, 25))
    assert not np.any(render(mcep, np.zeros(30 * 80), 0.42, 80, 400))


def test_c0_is_log_gain():
    rng = np.random.default_rng(2)
    mcep = rng.normal(0, 0.3, (30, 25))
    exc, _ = build_excitation(np.full(30, 130.0), 80, SR)
    base = render(mcep, exc, 0.42, 80, 400)
    louder = mcep.copy()
    louder[:, 0] += np.log(2.0)
    assert np.allclose(render(louder, exc, 0.42, 80, 400), 2.0 * base, atol=1e-12)


def test_render_length_check():
    with pytest.raises(ValueError, match="expected"):
        render(np.zeros((10, 25)), np.zeros(799), 0.42, 80, 400)


def test_peak_normalization():
    buf, gain = synthesize(np.zeros((20, 25)), build_excitation(np.full(20, 200.0), 80, SR)[0],
                           0.42, return_gain=True)
    assert np.max(np.abs(buf.samples)) == pytest.approx(PEAK_LEVEL)
    assert gain > 0
    silent, g = normalize_peak(np.zeros(10))
    assert g == 1.0 and not silent.any()
    floor, g = normalize_peak(np.full(10, 1e-8))
    assert g == 1.0 and np.all(floor == 1e-8)


def test_copy_synthesis_of_sine_keeps_peak():
    t = np.arange(SR) / SR
    audio = AudioBuffer(0.5 * np.sin(2 * np.pi * 440 * t), SR)
    out = copy_synthesis(audio)
    assert len(out) == len(audio)
    spectrum = np.abs(np.fft.rfft(out.samples))
    peak_hz = np.argmax(spectrum) * SR / len(out)
    assert abs(peak_hz - 440) <= 10


def test_copy_synthesis_of_silence_is_quiet():
    out = copy_synthesis(AudioBuffer(np.zeros(SR // 2), SR))
    assert np.sqrt(np.mean(out.samples**2)) < 1e-3


@pytest.mark.parametrize("n_samples", [16000, 16040, 15990])
def test_copy_synthesis_duration_within_one_frame(n_samples):
    vowel = synthetic_vowel(120.0, duration=1.1).samples
    audio = AudioBuffer(vowel[:n_samples], SR)
    assert abs(len(copy_synthesis(audio)) - n_samples) <= 80


def test_copy_synthesis_vowel_fidelity():
    vowel = synthetic_vowel(120.0)
    original = analyze(vowel)
    again = analyze(copy_synthesis(vowel))
    assert np.mean(mel_cepstral_distortion(original.mcep, again.mcep)) <= 1.5
    assert abs(np.nanmedian(again.f0) - 120.0) <= 10


def test_copy_synthesis_deterministic():
    vowel = synthetic_vowel(150.0)
    assert np.array_equal(copy_synthesis(vowel, seed=4).samples, copy_synthesis(vowel, seed=4).samples)


def test_mcd_basics():
    a = np.zeros((3, 5))
    b = a.copy()
    b[:, 0] = 7.0
    assert np.all(mel_cepstral_distortion(a, b) == 0.0)
    b[:, 1] = 1.0
    assert np.allclose(mel_cepstral_distortion(a, b), 10 / np.log(10) * np.sqrt(2))
    with pytest.raises(ValueError):
        mel_cepstral_distortion(a, b[:2])
