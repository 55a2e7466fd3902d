"""Audio + transcription corpus: WAV I/O, manifest parsing and validation."""

from __future__ import annotations

import csv
import io
import os
import wave
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

CANONICAL_RATE = 16000
CLIP_LEVEL = 0.999
CLIP_RATIO_MAX = 0.01
MIN_DURATION = 0.1

AGE_GROUPS = ("child", "adult")
GENDERS = ("masculine", "feminine")
MANIFEST_FIELDS = ("id", "audio_path", "text", "speaker_id", "age_group", "gender")


class WavError(ValueError):
    """Raised for unreadable or unsupported WAV files."""


class ManifestError(ValueError):
    """Raised for structurally invalid manifests."""


@dataclass(frozen=True)
class AudioBuffer:
    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise ValueError("AudioBuffer holds mono samples only")
        if not np.all(np.isfinite(samples)):
            raise ValueError("AudioBuffer samples must be finite")
        if int(self.sample_rate) <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    def __len__(self):
        return len(self.samples)

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate


def read_wav(path) -> AudioBuffer:
    """Read a 16-bit PCM RIFF file as a mono buffer scaled to [-1, 1].

    Multi-channel files are mixed down by averaging the channels.
    """
    try:
        with wave.open(os.fspath(path), "rb") as wf:
            n_channels = wf.getnchannels()
            width = wf.getsampwidth()
            rate = wf.getframerate()
            n_frames = wf.getnframes()
            raw = wf.readframes(n_frames)
    except (wave.Error, EOFError) as exc:
        raise WavError(f"{path}: malformed RIFF/WAVE file ({exc})") from exc
    if width != 2:
        raise WavError(f"{path}: unsupported encoding, {8 * width}-bit (only 16-bit PCM)")
    if n_frames == 0 or len(raw) == 0:
        raise WavError(f"{path}: zero-length data chunk")
    pcm = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    pcm = pcm[: (len(pcm) // n_channels) * n_channels].reshape(-1, n_channels)
    return AudioBuffer(pcm.mean(axis=1), rate)


def quantize_pcm16(samples) -> np.ndarray:
    """Clamp to [-1, 1] and round to signed 16-bit integers."""
    x = np.clip(np.asarray(samples, dtype=np.float64), -1.0, 1.0)
    return np.clip(np.round(x * 32768.0), -32768, 32767).astype("<i2")


def write_wav(buffer: AudioBuffer, path) -> None:
    """Write ``buffer`` as a mono 16-bit PCM RIFF file."""
    pcm = quantize_pcm16(buffer.samples)
    with wave.open(os.fspath(path), "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(2)
        wf.setframerate(buffer.sample_rate)
        wf.writeframes(pcm.tobytes())


@dataclass(frozen=True)
class Utterance:
    id: str
    audio: object  # path or AudioBuffer
    text: str
    speaker_id: str
    age_group: str
    gender: str

    def __post_init__(self):
        if not self.text.strip():
            raise ManifestError(f"utterance {self.id!r}: empty transcription")
        if self.age_group not in AGE_GROUPS:
            raise ManifestError(f"utterance {self.id!r}: age_group must be one of {AGE_GROUPS}")
        if self.gender not in GENDERS:
            raise ManifestError(f"utterance {self.id!r}: gender must be one of {GENDERS}")

    def load_audio(self, root=None) -> AudioBuffer:
        if isinstance(self.audio, AudioBuffer):
            return self.audio
        path = Path(self.audio)
        if root is not None and not path.is_absolute():
            path = Path(root) / path
        return read_wav(path)


@dataclass(frozen=True)
class Corpus:
    utterances: tuple = ()
    root: Path | None = None

    def __post_init__(self):
        object.__setattr__(self, "utterances", tuple(self.utterances))
        seen = set()
        for utt in self.utterances:
            if utt.id in seen:
                raise ManifestError(f"duplicate utterance id {utt.id!r}")
            seen.add(utt.id)

    def __len__(self):
        return len(self.utterances)

    def __iter__(self):
        return iter(self.utterances)

    def audio_path(self, utt: Utterance) -> Path | None:
        if isinstance(utt.audio, AudioBuffer):
            return None
        path = Path(utt.audio)
        if self.root is not None and not path.is_absolute():
            path = Path(self.root) / path
        return path

    def load_audio(self, utt: Utterance) -> AudioBuffer:
        return utt.load_audio(self.root)


def load_manifest(path) -> Corpus:
    """Parse a tab-separated manifest into a :class:`Corpus`.

    One record per line: ``id, audio_path, text, speaker_id, age_group,
    gender``.  Blank lines and lines starting with ``#`` are skipped.
    Relative audio paths are resolved against the manifest's directory.
    Audio is not read here; see :func:`validate_corpus`.
    """
    path = Path(path)
    utterances = []
    seen = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\r\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            fields = [f.strip() for f in line.split("\t")]
            if len(fields) != len(MANIFEST_FIELDS) or any(f == "" for f in fields):
                missing = [n for n, f in zip(MANIFEST_FIELDS, fields + [""] * 6) if not f]
                raise ManifestError(
                    f"{path}:{lineno}: expected {len(MANIFEST_FIELDS)} tab-separated fields, "
                    f"missing {', '.join(missing) or 'none'} (got {len(fields)})"
                )
            uid = fields[0]
            if uid in seen:
                raise ManifestError(
                    f"{path}:{lineno}: duplicate utterance id {uid!r} (first seen on line {seen[uid]})"
                )
            seen[uid] = lineno
            utterances.append(Utterance(*fields))
    return Corpus(utterances, root=path.parent)


@dataclass
class UtteranceCheck:
    id: str
    audio_path: str = ""
    unreadable: str = ""
    sample_rate: int | None = None
    duration: float | None = None
    clipping_ratio: float | None = None
    bad_chars: str = ""

    @property
    def rate_mismatch(self) -> bool:
        return self.sample_rate is not None and self.sample_rate != CANONICAL_RATE

    @property
    def clipped(self) -> bool:
        return self.clipping_ratio is not None and self.clipping_ratio > CLIP_RATIO_MAX

    @property
    def too_short(self) -> bool:
        return self.duration is not None and self.duration < MIN_DURATION

    @property
    def fatal(self) -> bool:
        return bool(self.unreadable or self.rate_mismatch or self.bad_chars)

    def flags(self) -> list[str]:
        out = []
        if self.unreadable:
            out.append(f"unreadable audio: {self.unreadable}")
        if self.rate_mismatch:
            out.append(f"sample rate {self.sample_rate} Hz != {CANONICAL_RATE} Hz")
        if self.clipped:
            out.append(f"clipping ratio {self.clipping_ratio:.3f} > {CLIP_RATIO_MAX}")
        if self.too_short:
            out.append(f"duration {self.duration:.3f} s < {MIN_DURATION} s")
        if self.bad_chars:
            out.append(f"characters outside alphabet: {' '.join(self.bad_chars)}")
        return out


@dataclass
class ValidationReport:
    checks: list = field(default_factory=list)
    empty: bool = False

    @property
    def fatal(self) -> bool:
        return self.empty or any(c.fatal for c in self.checks)

    def to_text(self) -> str:
        lines = [f"utterances: {len(self.checks)}"]
        if self.empty:
            lines.append("FATAL: empty corpus")
        n_flagged = 0
        for c in self.checks:
            flags = c.flags()
            if not flags:
                continue
            n_flagged += 1
            level = "FATAL" if c.fatal else "WARN"
            for flag in flags:
                lines.append(f"{level}\t{c.id}\t{flag}")
        lines.append(f"flagged: {n_flagged}")
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["id", "audio_path", "unreadable", "sample_rate", "duration_s",
                         "clipping_ratio", "bad_chars", "fatal"])
        for c in self.checks:
            writer.writerow([
                c.id, c.audio_path, c.unreadable,
                "" if c.sample_rate is None else c.sample_rate,
                "" if c.duration is None else f"{c.duration:.4f}",
                "" if c.clipping_ratio is None else f"{c.clipping_ratio:.6f}",
                c.bad_chars, int(c.fatal),
            ])
        return buf.getvalue()


def clipping_ratio(samples) -> float:
    samples = np.asarray(samples)
    if len(samples) == 0:
        return 0.0
    return float(np.mean(np.abs(samples) >= CLIP_LEVEL))


def validate_corpus(corpus: Corpus) -> ValidationReport:
    """Check every utterance; never raises, never mutates ``corpus``."""
    from .textproc import unsupported_characters

    report = ValidationReport(empty=len(corpus) == 0)
    for utt in corpus:
        path = corpus.audio_path(utt)
        check = UtteranceCheck(utt.id, audio_path="" if path is None else str(path))
        try:
            audio = corpus.load_audio(utt)
        except (OSError, WavError, ValueError) as exc:
            check.unreadable = f"{path}: {exc}" if path is not None and str(path) not in str(exc) else str(exc)
        else:
            check.sample_rate = audio.sample_rate
            check.duration = audio.duration
            check.clipping_ratio = clipping_ratio(audio.samples)
        check.bad_chars = "".join(unsupported_characters(utt.text))
        report.checks.append(check)
    return report
