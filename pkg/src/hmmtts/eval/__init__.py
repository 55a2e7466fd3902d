"""Listening-test scoring: per-audio tallies and per-voice-type percentages.

Three criteria are scored.  ``age`` and ``gender`` answers are a category
or ``undetermined``; ``transcription`` answers are free text compared
with the reference word after normalisation.
"""

from __future__ import annotations

import csv
import unicodedata
from dataclasses import dataclass
from pathlib import Path

CRITERIA = ("age", "gender", "transcription")
VOICE_TYPES = ("artificial", "natural")
UNDETERMINED = "undetermined"
_CHOICES = {"age": ("child", "adult"), "gender": ("masculine", "feminine")}
_TRUTH_FIELD = {"age": "truth_age", "gender": "truth_gender", "transcription": "truth_word"}


class EvalError(ValueError):
    pass


@dataclass(frozen=True)
class EvalItem:
    audio_id: str
    voice_type: str
    truth_age: str | None = None
    truth_gender: str | None = None
    truth_word: str | None = None

    def __post_init__(self):
        if self.voice_type not in VOICE_TYPES:
            raise EvalError(f"{self.audio_id}: voice_type must be one of {VOICE_TYPES}")
        if self.truth_age not in (None, *_CHOICES["age"]):
            raise EvalError(f"{self.audio_id}: bad truth_age {self.truth_age!r}")
        if self.truth_gender not in (None, *_CHOICES["gender"]):
            raise EvalError(f"{self.audio_id}: bad truth_gender {self.truth_gender!r}")

    def truth(self, criterion):
        return getattr(self, _TRUTH_FIELD[criterion])


@dataclass(frozen=True)
class ListeningResponse:
    rater_id: str
    audio_id: str
    criterion: str
    answer: str

    def __post_init__(self):
        if self.criterion not in CRITERIA:
            raise EvalError(f"unknown criterion {self.criterion!r}")
        if self.criterion in _CHOICES and self.answer not in (*_CHOICES[self.criterion], UNDETERMINED):
            raise EvalError(f"answer {self.answer!r} is not valid for criterion {self.criterion!r} "
                            f"(rater {self.rater_id}, audio {self.audio_id})")


@dataclass(frozen=True)
class TallyRow:
    audio_id: str
    hits: int
    misses: int
    undetermined: int | None
    voice_type: str

    @property
    def total(self) -> int:
        return self.hits + self.misses + (self.undetermined or 0)

    def as_tuple(self):
        return (self.audio_id, self.hits, self.misses, self.undetermined, self.voice_type)


@dataclass(frozen=True)
class Summary:
    voice_type: str
    responses: int
    hits: int
    misses: int
    undetermined: int | None

    def _pct(self, n):
        return 100.0 * n / self.responses if self.responses else 0.0

    @property
    def hit_pct(self) -> float:
        return self._pct(self.hits)

    @property
    def miss_pct(self) -> float:
        return self._pct(self.misses)

    @property
    def undetermined_pct(self) -> float | None:
        return None if self.undetermined is None else self._pct(self.undetermined)


def normalize_answer(text: str) -> str:
    """Lowercase, drop accents and punctuation, collapse whitespace."""
    decomposed = unicodedata.normalize("NFKD", text.lower())
    kept = "".join(ch for ch in decomposed
                   if not unicodedata.combining(ch) and (ch.isalnum() or ch.isspace()))
    return " ".join(kept.split())


def score_transcription(truth_word: str, answer_text: str | None) -> bool:
    """True when the answer matches the word after normalisation.  Blank answers miss."""
    answer = normalize_answer(answer_text or "")
    return bool(answer) and answer == normalize_answer(truth_word)


def tally(items, responses, criterion: str) -> list[TallyRow]:
    """One row per item that has a reference for ``criterion``, in item order."""
    if criterion not in CRITERIA:
        raise EvalError(f"unknown criterion {criterion!r}")
    by_id = {it.audio_id: it for it in items}
    counts = {it.audio_id: [0, 0, 0] for it in items if it.truth(criterion) is not None}
    for resp in responses:
        if resp.audio_id not in by_id:
            raise EvalError(f"response from {resp.rater_id} references unknown audio_id {resp.audio_id!r}")
        if resp.criterion != criterion:
            continue
        item = by_id[resp.audio_id]
        truth = item.truth(criterion)
        if truth is None:
            raise EvalError(f"audio {resp.audio_id!r} has no {criterion} reference")
        row = counts[resp.audio_id]
        if criterion == "transcription":
            row[0 if score_transcription(truth, resp.answer) else 1] += 1
        elif resp.answer == UNDETERMINED:
            row[2] += 1
        else:
            row[0 if resp.answer == truth else 1] += 1
    rows = []
    for audio_id, (h, m, u) in counts.items():
        undet = None if criterion == "transcription" else u
        rows.append(TallyRow(audio_id, h, m, undet, by_id[audio_id].voice_type))
    return rows


def summarize_by_type(rows) -> dict:
    """Pooled percentages per voice type (responses, not audios, are the unit)."""
    rows = list(rows)
    out = {}
    for vt in VOICE_TYPES:
        sel = [r for r in rows if r.voice_type == vt]
        if not sel:
            continue
        has_undet = sel[0].undetermined is not None
        out[vt] = Summary(
            voice_type=vt,
            responses=sum(r.total for r in sel),
            hits=sum(r.hits for r in sel),
            misses=sum(r.misses for r in sel),
            undetermined=sum(r.undetermined for r in sel) if has_undet else None,
        )
    return out


# --- CSV in / out ---------------------------------------------------------------

def read_items(path) -> list[EvalItem]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        return [EvalItem(audio_id=row["audio_id"], voice_type=row["voice_type"],
                         truth_age=row.get("truth_age") or None,
                         truth_gender=row.get("truth_gender") or None,
                         truth_word=row.get("truth_word") or None)
                for row in reader]


def read_responses(path) -> list[ListeningResponse]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        return [ListeningResponse(row["rater_id"], row["audio_id"], row["criterion"],
                                  row.get("answer") or "")
                for row in reader]


def _fmt(x):
    return "" if x is None else f"{x:.4f}"


def export_report(out_dir, tallies: dict, summaries: dict) -> list[Path]:
    """Write ``<criterion>_tally.csv``, ``<criterion>_summary.csv`` and ``<criterion>_plot.txt``.

    ``tallies`` and ``summaries`` map criterion names to tally rows and to
    :func:`summarize_by_type` output.  Transcription files carry no
    undetermined column.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for criterion in CRITERIA:
        if criterion not in tallies and criterion not in summaries:
            continue
        with_undet = criterion != "transcription"
        rows = tallies.get(criterion, [])
        path = out_dir / f"{criterion}_tally.csv"
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["audio_id", "hits", "misses"] + (["undetermined"] if with_undet else [])
                       + ["voice_type"])
            for r in rows:
                w.writerow([r.audio_id, r.hits, r.misses] + ([r.undetermined] if with_undet else [])
                           + [r.voice_type])
        written.append(path)

        summ = summaries.get(criterion, {})
        path = out_dir / f"{criterion}_summary.csv"
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["voice_type", "responses", "hits", "misses"]
                       + (["undetermined"] if with_undet else [])
                       + ["hit_pct", "miss_pct"] + (["undetermined_pct"] if with_undet else []))
            for s in summ.values():
                w.writerow([s.voice_type, s.responses, s.hits, s.misses]
                           + ([s.undetermined] if with_undet else [])
                           + [_fmt(s.hit_pct), _fmt(s.miss_pct)]
                           + ([_fmt(s.undetermined_pct)] if with_undet else []))
        written.append(path)

        path = out_dir / f"{criterion}_plot.txt"
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("category\tpercentage\n")
            for s in summ.values():
                fh.write(f"{s.voice_type}/hits\t{s.hit_pct:.2f}\n")
                fh.write(f"{s.voice_type}/misses\t{s.miss_pct:.2f}\n")
                if with_undet:
                    fh.write(f"{s.voice_type}/undetermined\t{s.undetermined_pct:.2f}\n")
        written.append(path)
    return written


def evaluate(items, responses) -> tuple[dict, dict]:
    """Tally and summarise every criterion that has at least one reference item."""
    if not responses:
        raise EvalError("no responses")
    tallies, summaries = {}, {}
    for criterion in CRITERIA:
        rows = tally(items, responses, criterion)
        if rows:
            tallies[criterion] = rows
            summaries[criterion] = summarize_by_type(rows)
    return tallies, summaries
