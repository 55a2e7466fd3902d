"""Reference listening-test tables and their expansion into per-rater responses.

Rows are ``(number, truth, hits, misses, undetermined, voice_type)`` for
the age and gender tables and ``(number, word, hits, misses, voice_type)``
for the transcription table.  Age and gender rows hold 29 answers each and
transcription rows 20; the counts are kept exactly as tabulated.

Run ``python -m hmmtts.eval.tables`` to regenerate the CSV fixtures.
"""

from __future__ import annotations

import csv
from pathlib import Path

FIXTURE_DIR = Path(__file__).with_name("fixtures")
ITEMS_CSV = FIXTURE_DIR / "items.csv"
RESPONSES_CSV = FIXTURE_DIR / "responses.csv"

A, N = "artificial", "natural"
CHILD, ADULT = "child", "adult"
MASC, FEM = "masculine", "feminine"

AGE_TABLE = (
    (1, CHILD, 5, 8, 16, A), (2, CHILD, 29, 0, 0, N), (3, CHILD, 29, 0, 0, N),
    (4, CHILD, 17, 3, 9, A), (5, CHILD, 10, 6, 13, A), (6, ADULT, 29, 0, 0, N),
    (7, CHILD, 24, 4, 1, N), (8, CHILD, 17, 6, 6, A), (9, ADULT, 18, 7, 4, N),
    (10, CHILD, 29, 0, 0, N), (11, CHILD, 10, 5, 14, A), (12, ADULT, 25, 4, 0, N),
    (13, CHILD, 14, 1, 14, A), (14, CHILD, 14, 12, 3, N), (15, CHILD, 16, 1, 12, A),
    (16, ADULT, 28, 0, 1, N), (17, CHILD, 29, 0, 0, N), (18, ADULT, 28, 0, 1, N),
    (19, ADULT, 29, 0, 0, N), (20, ADULT, 24, 4, 1, N),
)

GENDER_TABLE = (
    (1, MASC, 2, 17, 10, A), (2, FEM, 11, 11, 7, N), (3, MASC, 27, 0, 2, N),
    (4, FEM, 6, 6, 17, A), (5, MASC, 2, 6, 21, A), (6, MASC, 29, 0, 0, N),
    (7, FEM, 11, 15, 3, N), (8, FEM, 8, 6, 15, A), (9, FEM, 26, 2, 1, N),
    (10, FEM, 23, 1, 5, N), (11, MASC, 3, 12, 14, A), (12, FEM, 27, 2, 0, N),
    (13, FEM, 8, 0, 21, A), (14, FEM, 14, 11, 4, N), (15, FEM, 4, 3, 22, A),
    (16, MASC, 29, 0, 0, N), (17, MASC, 23, 4, 2, N), (18, MASC, 29, 0, 0, N),
    (19, MASC, 29, 0, 0, N), (20, FEM, 28, 0, 1, N),
)

TRANSCRIPTION_TABLE = (
    (1, "Clavo", 14, 6, A), (2, "Pala", 20, 0, N), (3, "Tenis", 10, 10, A),
    (4, "Cuello", 20, 0, N), (5, "Tenis", 9, 11, A), (6, "Escoba", 20, 0, A),
    (7, "Basura", 20, 0, A), (8, "Dedos", 20, 0, N), (9, "Nariz", 12, 8, A),
    (10, "Diente", 18, 2, N), (11, "Globo", 12, 8, A), (12, "Silla", 10, 10, A),
    (13, "Pala", 20, 0, N), (14, "Gallina", 20, 0, N), (15, "Tortuga", 20, 0, A),
    (16, "Cisne", 20, 0, N), (17, "Pantalón", 9, 11, A), (18, "Nariz", 18, 2, N),
    (19, "Puerta", 20, 0, A), (20, "Oveja", 19, 1, N),
)

# plausible mishearings used for the synthetic wrong transcriptions
CONFUSIONS = {
    "Clavo": "calvo", "Tenis": "tenes", "Nariz": "maíz", "Globo": "lobo", "Silla": "cilla",
    "Pantalón": "pantano", "Diente": "mente", "Oveja": "abeja", "Cuello": "suelo",
}
OPPOSITE = {CHILD: ADULT, ADULT: CHILD, MASC: FEM, FEM: MASC}


def audio_id(table: str, number: int) -> str:
    return f"{table}_{number:02d}"


def fixture_items() -> list[dict]:
    rows = []
    for num, truth, *_, vt in AGE_TABLE:
        rows.append({"audio_id": audio_id("age", num), "truth_age": truth, "truth_gender": "",
                     "truth_word": "", "voice_type": vt})
    for num, truth, *_, vt in GENDER_TABLE:
        rows.append({"audio_id": audio_id("gender", num), "truth_age": "", "truth_gender": truth,
                     "truth_word": "", "voice_type": vt})
    for num, word, _, _, vt in TRANSCRIPTION_TABLE:
        rows.append({"audio_id": audio_id("word", num), "truth_age": "", "truth_gender": "",
                     "truth_word": word, "voice_type": vt})
    return rows


def _hit_spelling(word, k):
    # exercise the normaliser: case, accents and stray punctuation all still count as hits
    plain = word.lower().translate(str.maketrans("áéíóú", "aeiou"))
    return (word, word.lower(), plain, word.upper() + ".")[k % 4]


def fixture_responses() -> list[dict]:
    """Per-rater answers that aggregate exactly to the published rows.

    Rater ``r01`` onward gives the correct answer, then the wrong one,
    then "undetermined"; transcription misses alternate between a
    confusable word and a blank answer.
    """
    out = []
    for table, criterion in ((AGE_TABLE, "age"), (GENDER_TABLE, "gender")):
        for num, truth, hits, misses, undet, _ in table:
            answers = [truth] * hits + [OPPOSITE[truth]] * misses + ["undetermined"] * undet
            for r, ans in enumerate(answers, start=1):
                out.append({"rater_id": f"r{r:02d}", "audio_id": audio_id(criterion, num),
                            "criterion": criterion, "answer": ans})
    for num, word, hits, misses, _ in TRANSCRIPTION_TABLE:
        wrong = CONFUSIONS.get(word, "")
        answers = [_hit_spelling(word, k) for k in range(hits)]
        answers += [wrong if k % 2 == 0 else "" for k in range(misses)]
        for r, ans in enumerate(answers, start=1):
            out.append({"rater_id": f"r{r:02d}", "audio_id": audio_id("word", num),
                        "criterion": "transcription", "answer": ans})
    return out


ITEM_FIELDS = ("audio_id", "truth_age", "truth_gender", "truth_word", "voice_type")
RESPONSE_FIELDS = ("rater_id", "audio_id", "criterion", "answer")


def write_fixtures(directory=FIXTURE_DIR) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for name, fields, rows in (("items.csv", ITEM_FIELDS, fixture_items()),
                               ("responses.csv", RESPONSE_FIELDS, fixture_responses())):
        with open(directory / name, "w", newline="", encoding="utf-8") as fh:
            writer = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
            writer.writeheader()
            writer.writerows(rows)


def published_rows(criterion: str) -> list[tuple]:
    """``(audio_id, hits, misses, undetermined, voice_type)`` as tabulated."""
    if criterion == "age":
        return [(audio_id("age", n), h, m, u, vt) for n, _, h, m, u, vt in AGE_TABLE]
    if criterion == "gender":
        return [(audio_id("gender", n), h, m, u, vt) for n, _, h, m, u, vt in GENDER_TABLE]
    if criterion == "transcription":
        return [(audio_id("word", n), h, m, None, vt) for n, _, h, m, vt in TRANSCRIPTION_TABLE]
    raise ValueError(f"unknown criterion {criterion!r}")


if __name__ == "__main__":
    write_fixtures()
