"""End-to-end wiring: corpus -> trained models, text -> waveform."""

from __future__ import annotations

import logging
from dataclasses import dataclass

from .corpus import CANONICAL_RATE, AudioBuffer, Corpus
from .features import AnalysisConfig, analyze, compute_deltas
from .generate import StateTrajectoryPlan, generate_f0, mlpg, predict_durations
from .hmm import ModelSet
from .textproc import INVENTORY, phonetize
from .train import (N_ITERATIONS, N_STATES, TrainingItem, TrainingReport, embedded_train,
                    estimate_durations, flat_start)
from .vocoder import build_excitation, synthesize

log = logging.getLogger(__name__)


class DataError(ValueError):
    """Bad user data: unreadable audio, wrong sample rate, untranscribable text."""


def config_from_meta(meta: dict) -> AnalysisConfig:
    fields = AnalysisConfig.__dataclass_fields__
    return AnalysisConfig(**{k: v for k, v in meta.items() if k in fields})


def prepare_items(corpus: Corpus, cfg: AnalysisConfig | None = None) -> list:
    """Analyse and phonetize every utterance, in corpus order."""
    cfg = cfg or AnalysisConfig()
    items = []
    for utt in corpus:
        try:
            audio = corpus.load_audio(utt)
        except (OSError, ValueError) as exc:
            raise DataError(f"{utt.id}: {exc}") from exc
        if audio.sample_rate != CANONICAL_RATE:
            raise DataError(f"{utt.id}: sample rate {audio.sample_rate} Hz, expected {CANONICAL_RATE} Hz")
        try:
            spec = phonetize(utt.text)
        except ValueError as exc:
            raise DataError(f"{utt.id}: {exc}") from exc
        obs = compute_deltas(analyze(audio, cfg))
        items.append(TrainingItem(utt.id, obs, spec.phones))
    return items


@dataclass
class TrainingResult:
    models: ModelSet
    report: TrainingReport
    segments: list


def train_models(items, cfg: AnalysisConfig | None = None, n_states: int = N_STATES,
                 n_iterations: int = N_ITERATIONS) -> TrainingResult:
    cfg = cfg or AnalysisConfig()
    meta = {k: getattr(cfg, k) for k in AnalysisConfig.__dataclass_fields__}
    models = flat_start(items, INVENTORY, n_states, meta)
    models, report = embedded_train(models, items, n_iterations)
    segments = []
    if n_iterations > 0:
        models, segments = estimate_durations(models, items)
    return TrainingResult(models, report, segments)


@dataclass
class SynthesisResult:
    audio: AudioBuffer
    plan: StateTrajectoryPlan
    gain: float
    n_clamped: int


def synthesize_text(models: ModelSet, text: str, rate: float = 1.0, seed: int = 0) -> SynthesisResult:
    """Phonetize ``text`` and render it with ``models``.

    ``rate`` is a duration multiplier (see :func:`predict_durations`).
    """
    cfg = config_from_meta(models.meta)
    spec = phonetize(text)
    plan = predict_durations(spec, models, rate)
    mcep = mlpg(plan, models)
    _, f0 = generate_f0(plan, models)
    excitation, n_clamped = build_excitation(f0, cfg.shift_samples, cfg.sample_rate, seed,
                                             cfg.fmin, cfg.fmax)
    audio, gain = synthesize(mcep, excitation, cfg.alpha, cfg.sample_rate, cfg.shift_samples,
                             cfg.length_samples, cfg.n_fft, return_gain=True)
    return SynthesisResult(audio, plan, gain, n_clamped)
