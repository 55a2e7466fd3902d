"""Left-to-right HMMs with diagonal Gaussian and multi-space (MSD) emissions.

Each state emits two streams: a Gaussian over the spectral vector
(mel-cepstrum plus deltas) and an MSD stream over log-F0, which puts
mass ``1 - w`` on the unvoiced space and ``w`` times a Gaussian on the
voiced space.  All probabilities are handled in the log domain, with
``LOG_ZERO`` standing in for log(0).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

LOG_ZERO = -np.inf
LOG_2PI = float(np.log(2.0 * np.pi))
SELF_LOOP_RANGE = (1e-6, 1.0 - 1e-6)
FORMAT_NAME = "hmmtts-modelset"
FORMAT_VERSION = 1


class AlignmentError(ValueError):
    """The observation sequence cannot traverse the chain."""


@dataclass
class GaussianStream:
    mean: np.ndarray
    var: np.ndarray

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=np.float64).reshape(-1)
        self.var = np.asarray(self.var, dtype=np.float64).reshape(-1)
        if self.mean.shape != self.var.shape:
            raise ValueError("mean and variance dimensions differ")
        if np.any(self.var <= 0):
            raise ValueError("variances must be positive")

    @property
    def dim(self) -> int:
        return len(self.mean)


@dataclass
class MSDStream:
    voiced_weight: float
    voiced_gauss: GaussianStream

    def __post_init__(self):
        self.voiced_weight = float(self.voiced_weight)
        if not 0.0 <= self.voiced_weight <= 1.0:
            raise ValueError("voiced_weight must lie in [0, 1]")


@dataclass
class StateEmission:
    spectral: GaussianStream
    pitch: MSDStream


def _safe_log(x):
    x = np.asarray(x, dtype=np.float64)
    with np.errstate(divide="ignore"):
        return np.log(x)


def gaussian_logpdf(o, g: GaussianStream) -> float:
    """Log density of ``o`` under a diagonal-covariance Gaussian."""
    o = np.asarray(o, dtype=np.float64).reshape(-1)
    if o.shape != g.mean.shape:
        raise ValueError(f"observation has dimension {len(o)}, stream has {g.dim}")
    return float(-0.5 * np.sum(np.log(2.0 * np.pi * g.var) + (o - g.mean) ** 2 / g.var))


def msd_logpdf(x, s: MSDStream) -> float:
    """Log density of a multi-space value.

    ``x`` is ``None`` (or NaN) for an unvoiced observation, otherwise the
    voiced vector.  NaN components of a voiced vector are marginalised out.
    """
    if x is None or np.all(np.isnan(np.atleast_1d(x))):
        return float(_safe_log(1.0 - s.voiced_weight))
    if s.voiced_weight == 0.0:
        return LOG_ZERO
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if x.shape != s.voiced_gauss.mean.shape:
        raise ValueError("voiced observation dimension mismatch")
    keep = ~np.isnan(x)
    g = s.voiced_gauss
    sub = GaussianStream(g.mean[keep], g.var[keep])
    return float(np.log(s.voiced_weight)) + gaussian_logpdf(x[keep], sub)


@dataclass
class LeftRightHMM:
    """States ``0..n-1``; state ``i`` moves to ``i`` or ``i+1`` only.

    Entry is always at state 0 and the last state's ``1 - a_nn`` is the
    exit probability.  For chains built by :func:`compose_utterance_hmm`,
    ``labels`` names the ``(phoneme, local state)`` behind each state.
    """

    self_loop: np.ndarray
    emissions: list
    labels: tuple = ()

    def __post_init__(self):
        self.self_loop = np.asarray(self.self_loop, dtype=np.float64).reshape(-1)
        if len(self.self_loop) != len(self.emissions):
            raise ValueError("one self-loop probability per state is required")
        if np.any(self.self_loop <= 0.0) or np.any(self.self_loop >= 1.0):
            raise ValueError("self-loop probabilities must lie in (0, 1)")
        self.labels = tuple(self.labels)

    @property
    def n_states(self) -> int:
        return len(self.emissions)

    def transition_matrix(self) -> np.ndarray:
        """Dense ``n x (n+1)`` matrix; the last column is the exit."""
        n = self.n_states
        a = np.zeros((n, n + 1))
        a[np.arange(n), np.arange(n)] = self.self_loop
        a[np.arange(n), np.arange(n) + 1] = 1.0 - self.self_loop
        return a


@dataclass
class DurationModel:
    mean: np.ndarray
    var: np.ndarray

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=np.float64).reshape(-1)
        self.var = np.asarray(self.var, dtype=np.float64).reshape(-1)


@dataclass
class ModelSet:
    """Phoneme HMMs, duration models and the analysis settings they assume."""

    hmms: dict
    durations: dict
    meta: dict = field(default_factory=dict)
    spectral_floor: np.ndarray | None = None
    lf0_floor: float = 1e-4
    flags: dict = field(default_factory=dict)

    @property
    def n_states(self) -> int:
        return next(iter(self.hmms.values())).n_states

    def copy(self) -> "ModelSet":
        return from_dict(to_dict(self))


# --- stacked parameter views ---------------------------------------------------

@dataclass(frozen=True)
class _Stacked:
    log_self: np.ndarray
    log_next: np.ndarray
    spec_mean: np.ndarray
    spec_var: np.ndarray
    weight: np.ndarray
    lf0_mean: np.ndarray
    lf0_var: np.ndarray


def _stack(chain: LeftRightHMM) -> _Stacked:
    em = chain.emissions
    return _Stacked(
        log_self=_safe_log(chain.self_loop),
        log_next=_safe_log(1.0 - chain.self_loop),
        spec_mean=np.array([e.spectral.mean for e in em]),
        spec_var=np.array([e.spectral.var for e in em]),
        weight=np.array([e.pitch.voiced_weight for e in em]),
        lf0_mean=np.array([e.pitch.voiced_gauss.mean for e in em]),
        lf0_var=np.array([e.pitch.voiced_gauss.var for e in em]),
    )


def emission_loglik(chain: LeftRightHMM, obs) -> np.ndarray:
    """``(T, n_states)`` matrix of log b_j(o_t) for an ObservationSequence."""
    st = _stack(chain)
    spec = np.asarray(obs.spectral)
    if spec.shape[1] != st.spec_mean.shape[1]:
        raise ValueError(f"spectral dimension {spec.shape[1]} != model {st.spec_mean.shape[1]}")
    const = -0.5 * np.sum(np.log(2.0 * np.pi * st.spec_var), axis=1)
    b = np.empty((len(spec), len(const)))
    for j in range(len(const)):
        b[:, j] = const[j] - 0.5 * np.sum((spec - st.spec_mean[j]) ** 2 / st.spec_var[j], axis=1)

    lf0 = np.asarray(obs.lf0)
    voiced = ~np.isnan(lf0[:, 0])
    mask = ~np.isnan(lf0)
    x = np.nan_to_num(lf0)
    diff2 = (x[:, None, :] - st.lf0_mean[None, :, :]) ** 2 / st.lf0_var[None, :, :]
    terms = np.log(2.0 * np.pi * st.lf0_var)[None, :, :] + diff2
    g = -0.5 * np.sum(np.where(mask[:, None, :], terms, 0.0), axis=2)
    log_w = _safe_log(st.weight)
    log_uw = _safe_log(1.0 - st.weight)
    pitch = np.where(voiced[:, None], log_w[None, :] + g, log_uw[None, :])
    return b + pitch


def _check_length(n_frames, n_states):
    if n_frames < n_states:
        raise AlignmentError(f"{n_frames} frames cannot traverse {n_states} states")


def viterbi_from_loglik(log_self, log_next, b):
    """Best monotone path given per-state transition and emission log-probs.

    Returns ``(path, loglik)`` with 0-based state indices.
    """
    n_frames, n = b.shape
    _check_length(n_frames, n)
    delta = np.full(n, LOG_ZERO)
    delta[0] = b[0, 0]
    moved = np.zeros((n_frames, n), dtype=bool)
    for t in range(1, n_frames):
        stay = delta + log_self
        move = np.full(n, LOG_ZERO)
        move[1:] = delta[:-1] + log_next[:-1]
        moved[t] = move > stay
        delta = np.where(moved[t], move, stay) + b[t]
    total = delta[-1] + log_next[-1]
    if not np.isfinite(total):
        raise AlignmentError("no path with non-zero probability")
    path = np.empty(n_frames, dtype=int)
    j = n - 1
    for t in range(n_frames - 1, -1, -1):
        path[t] = j
        if t > 0 and moved[t, j]:
            j -= 1
    return path, float(total)


def viterbi(chain: LeftRightHMM, obs):
    """Forced alignment of ``obs`` to ``chain``: ``(state path, log-likelihood)``.

    The path starts in state 0, ends in the last state and includes the
    final exit transition in its score.
    """
    st = _stack(chain)
    return viterbi_from_loglik(st.log_self, st.log_next, emission_loglik(chain, obs))


@dataclass
class ForwardBackward:
    gamma: np.ndarray        # (T, N) state occupancies
    self_counts: np.ndarray  # (N,) expected self transitions
    loglik: float


def forward_backward_from_loglik(log_self, log_next, b) -> ForwardBackward:
    n_frames, n = b.shape
    _check_length(n_frames, n)
    alpha = np.full((n_frames, n), LOG_ZERO)
    alpha[0, 0] = b[0, 0]
    for t in range(1, n_frames):
        move = np.full(n, LOG_ZERO)
        move[1:] = alpha[t - 1, :-1] + log_next[:-1]
        alpha[t] = np.logaddexp(alpha[t - 1] + log_self, move) + b[t]
    total = alpha[-1, -1] + log_next[-1]
    if not np.isfinite(total):
        raise AlignmentError("no path with non-zero probability")

    beta = np.full((n_frames, n), LOG_ZERO)
    beta[-1, -1] = log_next[-1]
    for t in range(n_frames - 2, -1, -1):
        nxt = b[t + 1] + beta[t + 1]
        move = np.full(n, LOG_ZERO)
        move[:-1] = log_next[:-1] + nxt[1:]
        beta[t] = np.logaddexp(log_self + nxt, move)

    gamma = np.exp(alpha + beta - total)
    gamma /= gamma.sum(axis=1, keepdims=True)
    with np.errstate(invalid="ignore"):
        xi_self = alpha[:-1] + log_self[None, :] + b[1:] + beta[1:] - total
    self_counts = np.exp(xi_self).sum(axis=0) if n_frames > 1 else np.zeros(n)
    return ForwardBackward(gamma, self_counts, float(total))


def forward_backward(chain: LeftRightHMM, obs) -> ForwardBackward:
    """State occupancies, expected self-transitions and total log-likelihood."""
    st = _stack(chain)
    return forward_backward_from_loglik(st.log_self, st.log_next, emission_loglik(chain, obs))


# --- composition ---------------------------------------------------------------

class MissingModelError(KeyError):
    pass


def compose_utterance_hmm(phones, models: ModelSet) -> LeftRightHMM:
    """Chain the phoneme HMMs of ``phones`` (a PhoneticSpec or sequence)."""
    phones = getattr(phones, "phones", phones)
    loops, emissions, labels = [], [], []
    for ph in phones:
        try:
            hmm = models.hmms[ph]
        except KeyError:
            raise MissingModelError(f"no model for phoneme {ph!r}") from None
        loops.extend(hmm.self_loop)
        emissions.extend(hmm.emissions)
        labels.extend((ph, k) for k in range(hmm.n_states))
    return LeftRightHMM(np.array(loops), emissions, labels)


# --- re-estimation -------------------------------------------------------------

class Accumulator:
    """Occupancy-weighted sufficient statistics for one EM iteration.

    Statistics are centred on the current parameters, which keeps the
    variance computation well conditioned.  Utterances are reduced in the
    order they are added.
    """

    def __init__(self, models: ModelSet):
        self.models = models
        n = models.n_states
        self.stats = {}
        for ph, hmm in models.hmms.items():
            d = hmm.emissions[0].spectral.dim
            self.stats[ph] = {
                "occ": np.zeros(n), "self": np.zeros(n),
                "s1": np.zeros((n, d)), "s2": np.zeros((n, d)),
                "voiced": np.zeros(n),
                "p_occ": np.zeros((n, 3)), "p1": np.zeros((n, 3)), "p2": np.zeros((n, 3)),
            }

    def add(self, chain: LeftRightHMM, obs, fb: ForwardBackward):
        gamma = fb.gamma
        spec = np.asarray(obs.spectral)
        lf0 = np.asarray(obs.lf0)
        mask = ~np.isnan(lf0)
        voiced = mask[:, 0]
        x = np.nan_to_num(lf0)
        for j, (ph, k) in enumerate(chain.labels):
            acc = self.stats[ph]
            em = chain.emissions[j]
            g = gamma[:, j]
            acc["occ"][k] += g.sum()
            acc["self"][k] += fb.self_counts[j]
            centred = spec - em.spectral.mean
            acc["s1"][k] += g @ centred
            acc["s2"][k] += g @ (centred * centred)
            acc["voiced"][k] += g[voiced].sum()
            gm = g[:, None] * mask
            pc = (x - em.pitch.voiced_gauss.mean) * mask
            acc["p_occ"][k] += gm.sum(axis=0)
            acc["p1"][k] += np.sum(gm * pc, axis=0)
            acc["p2"][k] += np.sum(gm * pc * pc, axis=0)

    def update(self) -> tuple[ModelSet, list]:
        """New ModelSet plus the phonemes that had no occupancy (left unchanged)."""
        models = self.models
        spec_floor = models.spectral_floor
        lf0_floor = models.lf0_floor
        new_hmms = {}
        unseen = []
        for ph, hmm in models.hmms.items():
            acc = self.stats[ph]
            if not np.any(acc["occ"] > 0):
                new_hmms[ph] = hmm
                unseen.append(ph)
                continue
            loops = hmm.self_loop.copy()
            emissions = []
            for k, em in enumerate(hmm.emissions):
                occ = acc["occ"][k]
                if occ <= 0:
                    emissions.append(em)
                    continue
                loops[k] = np.clip(acc["self"][k] / occ, *SELF_LOOP_RANGE)
                m1 = acc["s1"][k] / occ
                mean = em.spectral.mean + m1
                var = np.maximum(acc["s2"][k] / occ - m1 * m1, spec_floor)
                g = em.pitch.voiced_gauss
                p_occ = acc["p_occ"][k]
                seen = p_occ > 0
                safe = np.where(seen, p_occ, 1.0)
                pm1 = acc["p1"][k] / safe
                p_mean = np.where(seen, g.mean + pm1, g.mean)
                p_var = np.where(seen, np.maximum(acc["p2"][k] / safe - pm1 * pm1, lf0_floor), g.var)
                weight = min(1.0, max(0.0, acc["voiced"][k] / occ))
                emissions.append(StateEmission(
                    GaussianStream(mean, var),
                    MSDStream(weight, GaussianStream(p_mean, p_var)),
                ))
            new_hmms[ph] = LeftRightHMM(loops, emissions)
        updated = replace(models, hmms=new_hmms, flags=dict(models.flags))
        return updated, unseen


def accumulate_and_update(models: ModelSet, batch) -> tuple[ModelSet, list]:
    """One M-step from ``(chain, observations, ForwardBackward)`` triples."""
    acc = Accumulator(models)
    for chain, obs, fb in batch:
        acc.add(chain, obs, fb)
    return acc.update()


# --- persistence ---------------------------------------------------------------

def _floats(a):
    return [float(v) for v in np.asarray(a).reshape(-1)]


def to_dict(models: ModelSet) -> dict:
    phones = {}
    for ph, hmm in models.hmms.items():
        states = []
        for em in hmm.emissions:
            states.append({
                "spectral": {"mean": _floats(em.spectral.mean), "var": _floats(em.spectral.var)},
                "pitch": {
                    "voiced_weight": float(em.pitch.voiced_weight),
                    "mean": _floats(em.pitch.voiced_gauss.mean),
                    "var": _floats(em.pitch.voiced_gauss.var),
                },
            })
        entry = {"self_loop": _floats(hmm.self_loop), "states": states}
        dur = models.durations.get(ph)
        if dur is not None:
            entry["duration"] = {"mean": _floats(dur.mean), "var": _floats(dur.var)}
        phones[ph] = entry
    return {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "meta": dict(models.meta),
        "floors": {
            "spectral": None if models.spectral_floor is None else _floats(models.spectral_floor),
            "lf0": float(models.lf0_floor),
        },
        "flags": {k: sorted(v) for k, v in models.flags.items()},
        "phones": phones,
    }


def from_dict(data: dict) -> ModelSet:
    if data.get("format") != FORMAT_NAME:
        raise ValueError("not a model set file")
    if data.get("version") != FORMAT_VERSION:
        raise ValueError(f"unsupported model set version {data.get('version')}")
    hmms, durations = {}, {}
    for ph, entry in data["phones"].items():
        emissions = [
            StateEmission(
                GaussianStream(s["spectral"]["mean"], s["spectral"]["var"]),
                MSDStream(s["pitch"]["voiced_weight"],
                          GaussianStream(s["pitch"]["mean"], s["pitch"]["var"])),
            )
            for s in entry["states"]
        ]
        hmms[ph] = LeftRightHMM(entry["self_loop"], emissions)
        if "duration" in entry:
            durations[ph] = DurationModel(entry["duration"]["mean"], entry["duration"]["var"])
    floors = data.get("floors", {})
    spec_floor = floors.get("spectral")
    return ModelSet(
        hmms=hmms,
        durations=durations,
        meta=dict(data.get("meta", {})),
        spectral_floor=None if spec_floor is None else np.asarray(spec_floor),
        lf0_floor=floors.get("lf0", 1e-4),
        flags={k: list(v) for k, v in data.get("flags", {}).items()},
    )


def save_models(models: ModelSet, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(to_dict(models), fh, indent=1)
        fh.write("\n")


def load_models(path) -> ModelSet:
    with open(path, encoding="utf-8") as fh:
        return from_dict(json.load(fh))
