"""Acoustic analysis: framing, mel-cepstrum, F0 and dynamic features.

A frame's observation has two streams.  The spectral stream stacks
``c0..cM`` with their deltas and delta-deltas; the pitch stream is
multi-space: a voiced flag and, when voiced, log-F0 with its deltas.
Unvoiced log-F0 values are stored as NaN.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

FRAME_LENGTH = 0.025
FRAME_SHIFT = 0.005
ORDER = 24
ALPHA = 0.42
FMIN = 60.0
FMAX = 400.0
N_FFT = 1024
FLOOR_DB = -60.0
ABS_FLOOR = 1e-8
VOICING_THRESHOLD = 0.3
RMS_GATE = 1e-4
OCTAVE_GUARD = 0.85


@dataclass(frozen=True)
class AnalysisConfig:
    sample_rate: int = 16000
    frame_length: float = FRAME_LENGTH
    frame_shift: float = FRAME_SHIFT
    order: int = ORDER
    alpha: float = ALPHA
    fmin: float = FMIN
    fmax: float = FMAX
    n_fft: int = N_FFT

    @property
    def length_samples(self) -> int:
        return int(round(self.frame_length * self.sample_rate))

    @property
    def shift_samples(self) -> int:
        return int(round(self.frame_shift * self.sample_rate))

    @property
    def pad_samples(self) -> int:
        # centre of frame t lands in the middle of hop segment [t*S, (t+1)*S)
        return (self.length_samples - self.shift_samples) // 2


# --- framing -------------------------------------------------------------------

def frame_count(n_samples: int, length: int, shift: int) -> int:
    if n_samples < length:
        return 0
    return (n_samples - length) // shift + 1


def frame_signal(samples, sample_rate, frame_length_s=FRAME_LENGTH, frame_shift_s=FRAME_SHIFT,
                 window=True):
    """Cut ``samples`` into Hamming-windowed frames, shape ``(n_frames, L)``.

    Frame ``t`` covers ``samples[t*S : t*S + L]``; there is no padding, so
    ``n_frames = (N - L) // S + 1``.
    """
    x = np.asarray(samples, dtype=np.float64)
    length = int(round(frame_length_s * sample_rate))
    shift = int(round(frame_shift_s * sample_rate))
    if shift <= 0 or length < shift:
        raise ValueError("need frame_length >= frame_shift > 0")
    n = frame_count(len(x), length, shift)
    if n == 0:
        raise ValueError(f"audio of {len(x)} samples is shorter than one {length}-sample frame")
    idx = np.arange(length)[None, :] + shift * np.arange(n)[:, None]
    frames = x[idx]
    if window:
        frames = frames * np.hamming(length)[None, :]
    return frames


def _analysis_frames(samples, cfg: AnalysisConfig, window=True):
    pad = cfg.pad_samples
    padded = np.concatenate([np.zeros(pad), np.asarray(samples, dtype=np.float64), np.zeros(pad)])
    return frame_signal(padded, cfg.sample_rate, cfg.frame_length, cfg.frame_shift, window)


# --- mel-cepstrum --------------------------------------------------------------

def warp_frequency(omega, alpha):
    """First-order all-pass frequency map; ``alpha=0`` is the identity."""
    omega = np.asarray(omega, dtype=np.float64)
    return omega + 2.0 * np.arctan(alpha * np.sin(omega) / (1.0 - alpha * np.cos(omega)))


def log_spectrum(frames, n_fft=N_FFT):
    """Floored natural-log magnitude spectrum on ``n_fft // 2 + 1`` bins.

    The floor sits ``FLOOR_DB`` below each frame's peak (and never below
    ``ABS_FLOOR``).
    """
    frames = np.atleast_2d(np.asarray(frames, dtype=np.float64))
    mag = np.abs(np.fft.rfft(frames, n=n_fft, axis=-1))
    peak = mag.max(axis=-1, keepdims=True)
    floor = np.maximum(peak * 10.0 ** (FLOOR_DB / 20.0), ABS_FLOOR)
    return np.log(np.maximum(mag, floor))


class _Interp:
    """Linear interpolation from a uniform grid on [0, pi] to fixed points."""

    def __init__(self, n_grid, points):
        pos = np.clip(np.asarray(points) / np.pi * (n_grid - 1), 0.0, n_grid - 1)
        self.lo = np.minimum(np.floor(pos).astype(int), n_grid - 2)
        self.frac = pos - self.lo

    def __call__(self, values):
        lo, frac = self.lo, self.frac
        return values[..., lo] * (1.0 - frac) + values[..., lo + 1] * frac


def _warped_sampler(n_fft, alpha):
    # uniform grid in warped frequency, located on the linear axis via the inverse map
    n_bins = n_fft // 2 + 1
    warped_grid = np.linspace(0.0, np.pi, n_bins)
    return _Interp(n_bins, warp_frequency(warped_grid, -alpha))


def cepstrum_from_log_spectrum(logspec, order):
    """Truncated cepstrum ``c0..cM`` of a real, even log-magnitude spectrum.

    Uses the minimum-phase convention: ``log|H(w)| = c0 + sum_m c_m cos(m w)``.
    """
    n_fft = 2 * (logspec.shape[-1] - 1)
    c = np.fft.irfft(logspec, n=n_fft, axis=-1)[..., : order + 1].copy()
    c[..., 1:] *= 2.0
    return c


def log_spectrum_from_cepstrum(c, n_fft=N_FFT):
    """Inverse of :func:`cepstrum_from_log_spectrum` on ``n_fft // 2 + 1`` bins."""
    c = np.atleast_2d(np.asarray(c, dtype=np.float64))
    order = c.shape[-1] - 1
    full = np.zeros(c.shape[:-1] + (n_fft,))
    full[..., 0] = c[..., 0]
    full[..., 1 : order + 1] = 0.5 * c[..., 1:]
    full[..., n_fft - order :] = 0.5 * c[..., :0:-1]
    return np.fft.rfft(full, axis=-1).real


def mel_cepstrum(frames, order=ORDER, alpha=ALPHA, n_fft=N_FFT):
    """Mel-cepstral coefficients of windowed frame(s).

    The floored log spectrum is resampled on a grid uniform in warped
    frequency and cosine-transformed.  Accepts one frame or a 2-D stack.
    An all-zero frame returns ``c0 = log(ABS_FLOOR)`` and zeros elsewhere.
    """
    if order < 1:
        raise ValueError("order must be >= 1")
    if not 0.0 <= alpha < 1.0:
        raise ValueError("alpha must lie in [0, 1)")
    frames = np.asarray(frames, dtype=np.float64)
    single = frames.ndim == 1
    frames = np.atleast_2d(frames)
    logspec = log_spectrum(frames, n_fft)
    if alpha != 0.0:
        logspec = _warped_sampler(n_fft, alpha)(logspec)
    c = cepstrum_from_log_spectrum(logspec, order)
    silent = ~np.any(frames != 0.0, axis=-1)
    c[silent] = 0.0
    c[silent, 0] = np.log(ABS_FLOOR)
    return c[0] if single else c


def mcep_to_log_spectrum(c, alpha=ALPHA, n_fft=N_FFT):
    """Log-magnitude envelope on the linear frequency axis (``n_fft//2+1`` bins)."""
    warped = log_spectrum_from_cepstrum(c, n_fft)
    if alpha == 0.0:
        return warped
    n_bins = n_fft // 2 + 1
    linear_grid = np.linspace(0.0, np.pi, n_bins)
    return _Interp(n_bins, warp_frequency(linear_grid, alpha))(warped)


# --- F0 ------------------------------------------------------------------------

def _nccf(segments, min_lag, max_lag, window):
    x0 = segments[:, :window]
    e0 = np.sum(x0 * x0, axis=1)
    sq = np.concatenate([np.zeros((len(segments), 1)), np.cumsum(segments**2, axis=1)], axis=1)
    out = np.zeros((len(segments), max_lag - min_lag + 3))
    # one extra lag on each side for the parabolic fit
    for k, lag in enumerate(range(min_lag - 1, max_lag + 2)):
        xl = segments[:, lag : lag + window]
        el = sq[:, lag + window] - sq[:, lag]
        den = np.sqrt(e0 * el)
        num = np.sum(x0 * xl, axis=1)
        out[:, k] = np.where(den > 0, num / np.where(den > 0, den, 1.0), 0.0)
    return out


def extract_f0(samples, sample_rate=16000, fmin=FMIN, fmax=FMAX, frame_length_s=FRAME_LENGTH,
               frame_shift_s=FRAME_SHIFT):
    """Autocorrelation F0 tracker on the analysis frame grid.

    Returns ``(voiced, f0)`` arrays; ``f0`` is NaN where unvoiced.  A frame
    is voiced when its normalized cross-correlation peak over lags
    ``[rate/fmax, rate/fmin]`` reaches ``VOICING_THRESHOLD`` and its RMS
    reaches ``RMS_GATE``.  Among local maxima the shortest lag within
    ``OCTAVE_GUARD`` of the best one wins, which suppresses octave-down
    errors on strongly periodic input.
    """
    if not 0 < fmin < fmax < sample_rate / 2:
        raise ValueError("need 0 < fmin < fmax < sample_rate / 2")
    cfg = AnalysisConfig(sample_rate, frame_length_s, frame_shift_s, fmin=fmin, fmax=fmax)
    x = np.asarray(samples, dtype=np.float64)
    length, shift = cfg.length_samples, cfg.shift_samples
    n_frames = frame_count(len(x) + 2 * cfg.pad_samples, length, shift)
    if n_frames == 0:
        return np.zeros(0, dtype=bool), np.zeros(0)

    min_lag = max(2, int(np.floor(sample_rate / fmax)))
    max_lag = int(np.ceil(sample_rate / fmin))
    seg_len = length + max_lag + 1
    centres = shift * np.arange(n_frames) + shift // 2
    starts = centres - seg_len // 2
    before = max(0, -int(starts.min()))
    after = max(0, int(starts.max()) + seg_len - len(x))
    padded = np.concatenate([np.zeros(before), x, np.zeros(after)])
    idx = (starts + before)[:, None] + np.arange(seg_len)[None, :]
    segments = padded[idx]
    segments = segments - segments.mean(axis=1, keepdims=True)

    rms = np.sqrt(np.mean(_analysis_frames(x, cfg, window=False) ** 2, axis=1))
    r = _nccf(segments, min_lag, max_lag, length)
    inner = r[:, 1:-1]
    lags = np.arange(min_lag, max_lag + 1)

    voiced = np.zeros(n_frames, dtype=bool)
    f0 = np.full(n_frames, np.nan)
    for t in range(n_frames):
        row = inner[t]
        best = row.max()
        if best < VOICING_THRESHOLD or rms[t] < RMS_GATE:
            continue
        peaks = np.flatnonzero((row >= r[t, 2:]) & (row >= r[t, :-2])
                               & (row >= OCTAVE_GUARD * best))
        k = int(peaks[0]) if len(peaks) else int(np.argmax(row))
        a, b, c = r[t, k], r[t, k + 1], r[t, k + 2]
        den = a - 2.0 * b + c
        offset = 0.5 * (a - c) / den if den < 0 else 0.0
        freq = sample_rate / (lags[k] + np.clip(offset, -0.5, 0.5))
        if fmin <= freq <= fmax:
            voiced[t] = True
            f0[t] = freq
    return voiced, _median3(voiced, f0)


def _median3(voiced, f0):
    out = f0.copy()
    for t in np.flatnonzero(voiced):
        lo, hi = max(0, t - 1), min(len(f0), t + 2)
        neigh = f0[lo:hi][voiced[lo:hi]]
        out[t] = np.median(neigh)
    return out


# --- sequences -----------------------------------------------------------------

@dataclass(frozen=True)
class FeatureSequence:
    """Static per-frame parameters; ``lf0`` is NaN on unvoiced frames."""

    mcep: np.ndarray
    lf0: np.ndarray
    frame_shift: float = FRAME_SHIFT
    sample_rate: int = 16000

    def __post_init__(self):
        mcep = np.atleast_2d(np.asarray(self.mcep, dtype=np.float64))
        lf0 = np.asarray(self.lf0, dtype=np.float64).reshape(-1)
        if len(mcep) != len(lf0):
            raise ValueError("mcep and lf0 must have the same number of frames")
        if not np.all(np.isfinite(mcep)):
            raise ValueError("mcep values must be finite")
        if np.any(np.isinf(lf0)):
            raise ValueError("lf0 values must be finite or NaN")
        object.__setattr__(self, "mcep", mcep)
        object.__setattr__(self, "lf0", lf0)

    def __len__(self):
        return len(self.lf0)

    @property
    def order(self) -> int:
        return self.mcep.shape[1] - 1

    @property
    def voiced(self) -> np.ndarray:
        return ~np.isnan(self.lf0)

    @property
    def f0(self) -> np.ndarray:
        return np.exp(self.lf0)


def analyze(audio, cfg: AnalysisConfig | None = None) -> FeatureSequence:
    """Mel-cepstrum and log-F0 for an :class:`~hmmtts.corpus.AudioBuffer`.

    The signal is zero-padded by ``(L - S) / 2`` on both sides so that
    ``T * S`` equals the input length when it is a multiple of ``S``.
    """
    cfg = cfg or AnalysisConfig(sample_rate=audio.sample_rate)
    if audio.sample_rate != cfg.sample_rate:
        raise ValueError(f"audio at {audio.sample_rate} Hz, analysis configured for {cfg.sample_rate} Hz")
    frames = _analysis_frames(audio.samples, cfg)
    mcep = mel_cepstrum(frames, cfg.order, cfg.alpha, cfg.n_fft)
    voiced, f0 = extract_f0(audio.samples, cfg.sample_rate, cfg.fmin, cfg.fmax,
                            cfg.frame_length, cfg.frame_shift)
    lf0 = np.where(voiced, np.log(np.where(voiced, f0, 1.0)), np.nan)
    return FeatureSequence(mcep, lf0, cfg.frame_shift, cfg.sample_rate)


def delta(x):
    """Central first difference with edge replication, along axis 0."""
    x = np.asarray(x, dtype=np.float64)
    padded = np.concatenate([x[:1], x, x[-1:]])
    return 0.5 * (padded[2:] - padded[:-2])


def delta2(x):
    x = np.asarray(x, dtype=np.float64)
    padded = np.concatenate([x[:1], x, x[-1:]])
    return padded[2:] - 2.0 * x + padded[:-2]


def voiced_runs(voiced):
    """``(start, stop)`` index pairs of consecutive True runs."""
    v = np.asarray(voiced, dtype=bool).astype(np.int8)
    edges = np.diff(np.concatenate([[0], v, [0]]))
    return list(zip(np.flatnonzero(edges == 1), np.flatnonzero(edges == -1)))


MIN_VOICED_RUN = 3


@dataclass(frozen=True)
class ObservationSequence:
    """Static + dynamic observations ready for the HMMs.

    ``spectral`` is ``(T, 3*(M+1))``.  ``lf0`` is ``(T, 3)`` with NaN for
    components that are not defined on that frame.
    """

    spectral: np.ndarray
    lf0: np.ndarray

    def __len__(self):
        return len(self.spectral)

    @property
    def voiced(self) -> np.ndarray:
        return ~np.isnan(self.lf0[:, 0])


def compute_deltas(seq: FeatureSequence) -> ObservationSequence:
    """Append delta and delta-delta features to both streams.

    log-F0 deltas are computed inside voiced runs of at least
    ``MIN_VOICED_RUN`` frames (edges replicated at the run ends) and are
    NaN elsewhere.
    """
    if len(seq) == 0:
        raise ValueError("empty feature sequence")
    spectral = np.hstack([seq.mcep, delta(seq.mcep), delta2(seq.mcep)])
    lf0 = np.full((len(seq), 3), np.nan)
    lf0[:, 0] = seq.lf0
    for start, stop in voiced_runs(seq.voiced):
        if stop - start >= MIN_VOICED_RUN:
            run = seq.lf0[start:stop]
            lf0[start:stop, 1] = delta(run)
            lf0[start:stop, 2] = delta2(run)
    return ObservationSequence(spectral, lf0)


# --- persistence ---------------------------------------------------------------

MAGIC = b"HTSF"
VERSION = 1
_HEADER = struct.Struct("<4sHHdII")


def write_features(seq: FeatureSequence, path) -> None:
    """Binary dump: header (magic, version, M, shift, rate, T) then per frame
    ``M+1`` float64 cepstra, one voiced byte and one float64 log-F0."""
    record = np.dtype([("mcep", "<f8", (seq.order + 1,)), ("voiced", "u1"), ("lf0", "<f8")])
    data = np.zeros(len(seq), dtype=record)
    data["mcep"] = seq.mcep
    data["voiced"] = seq.voiced
    data["lf0"] = np.nan_to_num(seq.lf0, nan=0.0)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, seq.order, seq.frame_shift, seq.sample_rate, len(seq)))
        fh.write(data.tobytes())


def read_features(path) -> FeatureSequence:
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) < _HEADER.size:
            raise ValueError(f"{path}: truncated header")
        magic, version, order, shift, rate, n = _HEADER.unpack(head)
        if magic != MAGIC:
            raise ValueError(f"{path}: bad magic {magic!r}")
        if version != VERSION:
            raise ValueError(f"{path}: unsupported version {version}")
        record = np.dtype([("mcep", "<f8", (order + 1,)), ("voiced", "u1"), ("lf0", "<f8")])
        body = fh.read()
    if len(body) != n * record.itemsize:
        raise ValueError(f"{path}: expected {n} frames")
    data = np.frombuffer(body, dtype=record)
    lf0 = np.where(data["voiced"] == 1, data["lf0"], np.nan)
    return FeatureSequence(data["mcep"].copy(), lf0, shift, rate)


def dump_features_text(seq: FeatureSequence) -> str:
    lines = [f"# frames={len(seq)} order={seq.order} shift={seq.frame_shift} rate={seq.sample_rate}"]
    for t in range(len(seq)):
        f0 = "unvoiced" if np.isnan(seq.lf0[t]) else f"{np.exp(seq.lf0[t]):.2f}"
        lines.append(f"{t}\t{f0}\t" + " ".join(f"{v:.5f}" for v in seq.mcep[t]))
    return "\n".join(lines) + "\n"


# --- distortion measure --------------------------------------------------------

MCD_SCALE = 10.0 / np.log(10.0) * np.sqrt(2.0)


def mel_cepstral_distortion(a, b, include_c0=False):
    """Per-frame mel-cepstral distortion in dB between two ``(T, M+1)`` arrays.

    ``c0`` (overall gain) is left out unless ``include_c0`` is set.
    """
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(b, dtype=np.float64))
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    start = 0 if include_c0 else 1
    return MCD_SCALE * np.sqrt(np.sum((a[:, start:] - b[:, start:]) ** 2, axis=1))
