"""Flat start, embedded Baum-Welch re-estimation and duration estimation."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .features import ObservationSequence
from .hmm import (Accumulator, AlignmentError, DurationModel, GaussianStream, LeftRightHMM,
                  ModelSet, MSDStream, StateEmission, compose_utterance_hmm, forward_backward,
                  viterbi)
from .textproc import INVENTORY

log = logging.getLogger(__name__)

N_STATES = 5
N_ITERATIONS = 20
INITIAL_SELF_LOOP = 0.6
SPECTRAL_FLOOR_RATIO = 1e-4
MIN_SPECTRAL_FLOOR = 1e-10
LF0_FLOOR = 1e-4
DURATION_VAR_FLOOR = 1.0


class TrainingError(ValueError):
    pass


@dataclass(frozen=True)
class TrainingItem:
    id: str
    obs: ObservationSequence
    phones: tuple

    def __post_init__(self):
        object.__setattr__(self, "phones", tuple(getattr(self.phones, "phones", self.phones)))


def _nan_moments(x):
    """Per-column mean and population variance ignoring NaN; (0, 1) for empty columns."""
    count = np.sum(~np.isnan(x), axis=0)
    safe = np.where(count > 0, count, 1)
    mean = np.where(count > 0, np.nansum(x, axis=0) / safe, 0.0)
    var = np.where(count > 0, np.nansum((x - mean) ** 2, axis=0) / safe, 1.0)
    return mean, var


def flat_start(items, inventory=INVENTORY, n_states: int = N_STATES, meta=None) -> ModelSet:
    """Every state of every phoneme gets the global statistics of the corpus."""
    items = list(items)
    if not items:
        raise TrainingError("empty corpus")
    spectral = np.vstack([it.obs.spectral for it in items])
    lf0 = np.vstack([it.obs.lf0 for it in items])

    spec_mean = spectral.mean(axis=0)
    spec_var_global = spectral.var(axis=0)
    spec_floor = np.maximum(SPECTRAL_FLOOR_RATIO * spec_var_global, MIN_SPECTRAL_FLOOR)
    spec_var = np.maximum(spec_var_global, spec_floor)

    lf0_mean, lf0_var = _nan_moments(lf0)
    lf0_var = np.maximum(lf0_var, LF0_FLOOR)
    voiced_fraction = float(np.mean(~np.isnan(lf0[:, 0])))

    avg_frames = np.mean([len(it.obs) for it in items])
    avg_states = np.mean([len(it.phones) * n_states for it in items])
    dur_mean = max(1.0, avg_frames / avg_states)

    hmms, durations = {}, {}
    for ph in inventory:
        emissions = [
            StateEmission(GaussianStream(spec_mean, spec_var),
                          MSDStream(voiced_fraction, GaussianStream(lf0_mean, lf0_var)))
            for _ in range(n_states)
        ]
        hmms[ph] = LeftRightHMM(np.full(n_states, INITIAL_SELF_LOOP), emissions)
        durations[ph] = DurationModel(np.full(n_states, dur_mean), np.full(n_states, dur_mean))
    meta = dict(meta or {})
    meta["n_states"] = n_states
    return ModelSet(hmms, durations, meta, spectral_floor=spec_floor, lf0_floor=LF0_FLOOR,
                    flags={"untrained": [], "unaligned": []})


@dataclass
class TrainingReport:
    loglik: list = field(default_factory=list)
    frames: int = 0
    skipped: list = field(default_factory=list)
    untrained: list = field(default_factory=list)


def embedded_train(models: ModelSet, items, n_iterations: int = N_ITERATIONS):
    """Baum-Welch over utterance chains; returns ``(models, TrainingReport)``.

    ``report.loglik[k]`` is the corpus log-likelihood of the models entering
    iteration ``k``.  Utterances too short for their chain are skipped.
    """
    items = list(items)
    report = TrainingReport()
    usable = []
    for it in items:
        n_needed = sum(models.hmms[ph].n_states for ph in it.phones)
        if len(it.obs) < n_needed:
            report.skipped.append(it.id)
            log.warning("skipping %s: %d frames < %d states", it.id, len(it.obs), n_needed)
        else:
            usable.append(it)
    if n_iterations <= 0:
        return models, report
    if not usable:
        raise TrainingError("every utterance was skipped (too short for its phone chain)")
    report.frames = sum(len(it.obs) for it in usable)

    for iteration in range(n_iterations):
        acc = Accumulator(models)
        total = 0.0
        for it in usable:
            chain = compose_utterance_hmm(it.phones, models)
            fb = forward_backward(chain, it.obs)
            acc.add(chain, it.obs, fb)
            total += fb.loglik
        report.loglik.append(total)
        log.info("iteration %d: loglik %.4f (%.4f per frame)", iteration + 1, total,
                 total / report.frames)
        models, unseen = acc.update()
    report.untrained = unseen
    models.flags["untrained"] = list(unseen)
    return models, report


@dataclass(frozen=True)
class Segment:
    utterance: str
    phone: str
    left: str
    right: str
    state: int
    start: int
    end: int  # exclusive


def align(models: ModelSet, item: TrainingItem) -> list:
    """Viterbi state segmentation of one utterance."""
    chain = compose_utterance_hmm(item.phones, models)
    path, _ = viterbi(chain, item.obs)
    n_local = chain.n_states // max(1, len(item.phones))
    segments = []
    start = 0
    for t in range(1, len(path) + 1):
        if t == len(path) or path[t] != path[start]:
            j = path[start]
            pos = j // n_local
            ph, k = chain.labels[j]
            left = item.phones[pos - 1] if pos > 0 else "-"
            right = item.phones[pos + 1] if pos + 1 < len(item.phones) else "-"
            segments.append(Segment(item.id, ph, left, right, k, start, t))
            start = t
    return segments


def estimate_durations(models: ModelSet, items):
    """Per-state duration mean and population variance from Viterbi runs.

    Returns ``(models, segments)``.  Phonemes that never align keep their
    previous duration models and are listed under ``flags['unaligned']``.
    """
    runs = {}
    segments = []
    for it in items:
        try:
            segs = align(models, it)
        except AlignmentError as exc:
            log.warning("cannot align %s: %s", it.id, exc)
            continue
        segments.extend(segs)
        for seg in segs:
            runs.setdefault((seg.phone, seg.state), []).append(seg.end - seg.start)

    durations = {}
    unaligned = []
    for ph, hmm in models.hmms.items():
        old = models.durations.get(ph)
        if not any((ph, k) in runs for k in range(hmm.n_states)):
            unaligned.append(ph)
            if old is not None:
                durations[ph] = old
            continue
        mean = np.array(old.mean if old is not None else np.ones(hmm.n_states), dtype=float)
        var = np.array(old.var if old is not None else np.ones(hmm.n_states), dtype=float)
        for k in range(hmm.n_states):
            if (ph, k) in runs:
                r = np.asarray(runs[(ph, k)], dtype=float)
                mean[k] = r.mean()
                var[k] = max(r.var(), DURATION_VAR_FLOOR)
        durations[ph] = DurationModel(mean, var)
    flags = dict(models.flags)
    flags["unaligned"] = unaligned
    return replace(models, durations=durations, flags=flags), segments


def write_trace(loglik, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["iteration", "loglik"])
        for k, value in enumerate(loglik, start=1):
            writer.writerow([k, repr(float(value))])


def write_alignment(segments, path) -> None:
    """Tab-separated: utterance, left-phone+right context label, state, start, end frame."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("utterance\tphone\tcontext\tstate\tstart\tend\n")
        for s in segments:
            fh.write(f"{s.utterance}\t{s.phone}\t{s.left}-{s.phone}+{s.right}\t{s.state + 1}"
                     f"\t{s.start}\t{s.end}\n")
