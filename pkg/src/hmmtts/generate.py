"""Duration planning and maximum-likelihood parameter generation.

Static trajectories are the solution of ``(W' P W) c = W' P mu`` where
``W`` stacks the identity, delta and delta-delta windows (edge frames
replicated, as in analysis) and ``P`` holds the per-frame precisions.
The system is symmetric positive definite with half-bandwidth 2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .features import FeatureSequence, MIN_VOICED_RUN, voiced_runs
from .hmm import MissingModelError, ModelSet

BANDWIDTH = 2
VOICING_THRESHOLD = 0.5


@dataclass(frozen=True)
class PlanEntry:
    phone: str
    state: int
    frames: int


@dataclass(frozen=True)
class StateTrajectoryPlan:
    entries: tuple

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        if any(e.frames < 1 for e in self.entries):
            raise ValueError("every planned state needs at least one frame")

    @property
    def total_frames(self) -> int:
        return sum(e.frames for e in self.entries)

    def frame_states(self):
        """``(phone, state)`` of each frame."""
        out = []
        for e in self.entries:
            out.extend([(e.phone, e.state)] * e.frames)
        return out


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def predict_durations(spec, models: ModelSet, rate: float = 1.0) -> StateTrajectoryPlan:
    """Frames per state = ``max(1, round(rate * mean))``, ties rounding up.

    ``rate`` multiplies durations: 0.5 halves them.
    """
    if rate <= 0:
        raise ValueError("rate must be positive")
    entries = []
    for ph in getattr(spec, "phones", spec):
        if ph not in models.hmms or ph not in models.durations:
            raise MissingModelError(f"no model for phoneme {ph!r}")
        for k, mean in enumerate(models.durations[ph].mean):
            entries.append(PlanEntry(ph, k, max(1, round_half_up(rate * float(mean)))))
    return StateTrajectoryPlan(entries)


# --- banded SPD solver -----------------------------------------------------------

def window_coefficients(n_frames: int):
    """Per-window ``(rows, cols, values)`` for identity, delta and delta-delta.

    Edge replication folds the out-of-range neighbour onto the edge frame.
    """
    t = np.arange(n_frames)
    prev = np.maximum(t - 1, 0)
    nxt = np.minimum(t + 1, n_frames - 1)
    static = [(t, t, np.ones(n_frames))]
    first = [(t, nxt, np.full(n_frames, 0.5)), (t, prev, np.full(n_frames, -0.5))]
    second = [(t, nxt, np.ones(n_frames)), (t, t, np.full(n_frames, -2.0)), (t, prev, np.ones(n_frames))]
    return [static, first, second]


def dense_windows(n_frames: int):
    """The three window matrices as dense ``(T, T)`` arrays."""
    mats = []
    for terms in window_coefficients(n_frames):
        w = np.zeros((n_frames, n_frames))
        for rows, cols, vals in terms:
            np.add.at(w, (rows, cols), vals)
        mats.append(w)
    return mats


def build_banded_system(means, precisions):
    """Lower band form of ``W' P W`` and right-hand side ``W' P mu``.

    ``means`` and ``precisions`` are ``(3, T, D)``: static, delta and
    delta-delta streams.  Returns ``band`` of shape ``(D, 3, T)`` with
    ``band[:, d, t] = A[t + d, t]`` and ``rhs`` of shape ``(D, T)``.
    """
    means = np.asarray(means, dtype=np.float64)
    prec = np.asarray(precisions, dtype=np.float64)
    _, n_frames, n_dim = means.shape
    band = np.zeros((n_dim, BANDWIDTH + 1, n_frames))
    rhs = np.zeros((n_dim, n_frames))
    for k, terms in enumerate(window_coefficients(n_frames)):
        # merge the (row, col, val) triples of this window into per-row coefficient lists
        row_terms = [dict() for _ in range(n_frames)]
        for rows, cols, vals in terms:
            for r, c, v in zip(rows, cols, vals):
                row_terms[r][c] = row_terms[r].get(c, 0.0) + v
        for r, coeffs in enumerate(row_terms):
            p = prec[k, r]  # (D,)
            for c, v in coeffs.items():
                rhs[:, c] += v * p * means[k, r]
                for c2, v2 in coeffs.items():
                    d = c - c2
                    if 0 <= d <= BANDWIDTH:
                        band[:, d, c2] += v * v2 * p
                    elif d > BANDWIDTH:
                        raise AssertionError("window reach exceeds the solver bandwidth")
    return band, rhs


def cholesky_banded(band):
    """Cholesky factor in the same lower band layout, batched over axis 0."""
    band = np.asarray(band, dtype=np.float64)
    n_dim, width, n = band.shape
    p = width - 1
    low = np.zeros_like(band)
    for j in range(n):
        acc = band[:, 0, j].copy()
        for k in range(max(0, j - p), j):
            acc -= low[:, j - k, k] ** 2
        if np.any(acc <= 0.0):
            raise np.linalg.LinAlgError("matrix is not positive definite")
        diag = np.sqrt(acc)
        low[:, 0, j] = diag
        for i in range(j + 1, min(n, j + p + 1)):
            s = band[:, i - j, j].copy()
            for k in range(max(0, i - p), j):
                s -= low[:, i - k, k] * low[:, j - k, k]
            low[:, i - j, j] = s / diag
    return low


def solve_banded_spd(band, rhs):
    """Solve ``A x = rhs`` for SPD banded ``A`` (lower band form), batched."""
    low = cholesky_banded(band)
    rhs = np.asarray(rhs, dtype=np.float64)
    n_dim, width, n = low.shape
    p = width - 1
    y = np.zeros_like(rhs)
    for i in range(n):
        s = rhs[:, i].copy()
        for k in range(max(0, i - p), i):
            s -= low[:, i - k, k] * y[:, k]
        y[:, i] = s / low[:, 0, i]
    x = np.zeros_like(rhs)
    for i in range(n - 1, -1, -1):
        s = y[:, i].copy()
        for k in range(i + 1, min(n, i + p + 1)):
            s -= low[:, k - i, i] * x[:, k]
        x[:, i] = s / low[:, 0, i]
    return x


def solve_trajectory(means, variances):
    """ML static trajectory ``(T, D)`` from ``(3, T, D)`` stream means and variances.

    Infinite variances contribute nothing.
    """
    variances = np.asarray(variances, dtype=np.float64)
    with np.errstate(divide="ignore"):
        prec = np.where(np.isinf(variances), 0.0, 1.0 / variances)
    band, rhs = build_banded_system(means, prec)
    return solve_banded_spd(band, rhs).T


# --- generation ------------------------------------------------------------------

def _state_params(plan: StateTrajectoryPlan, models: ModelSet):
    frames = plan.frame_states()
    spec_mean, spec_var, weight, lf0_mean, lf0_var = [], [], [], [], []
    for ph, k in frames:
        em = models.hmms[ph].emissions[k]
        spec_mean.append(em.spectral.mean)
        spec_var.append(em.spectral.var)
        weight.append(em.pitch.voiced_weight)
        lf0_mean.append(em.pitch.voiced_gauss.mean)
        lf0_var.append(em.pitch.voiced_gauss.var)
    return (np.array(spec_mean), np.array(spec_var), np.array(weight),
            np.array(lf0_mean), np.array(lf0_var))


def _split_streams(x, n_streams=3):
    # (T, 3*D) -> (3, T, D)
    n_frames, width = x.shape
    return x.reshape(n_frames, n_streams, width // n_streams).transpose(1, 0, 2)


def mlpg(plan: StateTrajectoryPlan, models: ModelSet) -> np.ndarray:
    """Smooth mel-cepstral trajectory ``(T, M+1)`` for ``plan``."""
    if plan.total_frames < 3:
        raise ValueError("parameter generation needs at least 3 frames")
    spec_mean, spec_var, *_ = _state_params(plan, models)
    return solve_trajectory(_split_streams(spec_mean), _split_streams(spec_var))


def generate_f0(plan: StateTrajectoryPlan, models: ModelSet):
    """Voicing and F0 per frame; returns ``(voiced, f0)`` with NaN where unvoiced.

    A frame is voiced when its state's voiced weight exceeds 0.5.  Voiced
    runs of at least three frames are smoothed with the same solver; shorter
    runs take the static means.
    """
    _, _, weight, lf0_mean, lf0_var = _state_params(plan, models)
    voiced = weight > VOICING_THRESHOLD
    lf0 = np.full(len(weight), np.nan)
    for start, stop in voiced_runs(voiced):
        if stop - start >= MIN_VOICED_RUN:
            mu = lf0_mean[start:stop].T[:, :, None]
            var = lf0_var[start:stop].T[:, :, None]
            lf0[start:stop] = solve_trajectory(mu, var)[:, 0]
        else:
            lf0[start:stop] = lf0_mean[start:stop, 0]
    return voiced, np.exp(lf0)


def generate_features(plan: StateTrajectoryPlan, models: ModelSet) -> FeatureSequence:
    """mcep and log-F0 trajectories packed like analysed features."""
    mcep = mlpg(plan, models)
    voiced, f0 = generate_f0(plan, models)
    meta = models.meta
    return FeatureSequence(mcep, np.log(f0), meta.get("frame_shift", 0.005),
                           meta.get("sample_rate", 16000))
