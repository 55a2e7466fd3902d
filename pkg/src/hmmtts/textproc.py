"""Spanish text normalization and rule-based grapheme-to-phoneme conversion.

Latin-American conventions: seseo, yeismo, silent ``h``.
The full rule table lives in ``docs/g2p_rules.md``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import NamedTuple

VOWELS = ("a", "e", "i", "o", "u")
GLIDES = ("w", "j")
CONSONANTS = ("p", "b", "t", "d", "k", "g", "f", "s", "x", "tʃ", "ʝ",
              "m", "n", "ɲ", "l", "r", "ɾ")
MARKERS = ("sil", "sp")
INVENTORY = VOWELS + GLIDES + CONSONANTS + MARKERS


class Phoneme(NamedTuple):
    symbol: str
    kind: str


def _kind(symbol):
    if symbol in VOWELS:
        return "vowel"
    if symbol in GLIDES:
        return "glide"
    if symbol in CONSONANTS:
        return "consonant"
    if symbol in MARKERS:
        return "silence"
    raise ValueError(f"{symbol!r} is not in the phoneme inventory")


PHONEMES = tuple(Phoneme(s, _kind(s)) for s in INVENTORY)


class TextError(ValueError):
    """Raised when text cannot be normalized or phonetized."""


LETTERS = set("abcdefghijklmnopqrstuvwxyzñáéíóúü")
PAUSE_PUNCT = set(",;:.!?…")
DROP_PUNCT = set("¿¡\"'«»()[]-–—/")
INPUT_ALPHABET = (LETTERS | {c.upper() for c in LETTERS} | set("0123456789")
                  | PAUSE_PUNCT | DROP_PUNCT)


def unsupported_characters(text: str) -> list[str]:
    """Distinct characters of ``text`` the normalizer cannot handle, in order of appearance."""
    out = []
    for ch in text:
        if ch.isspace() or ch in INPUT_ALPHABET:
            continue
        if ch not in out:
            out.append(ch)
    return out


# --- numbers -----------------------------------------------------------------

_UNITS = ["cero", "uno", "dos", "tres", "cuatro", "cinco", "seis", "siete", "ocho", "nueve",
          "diez", "once", "doce", "trece", "catorce", "quince", "dieciséis", "diecisiete",
          "dieciocho", "diecinueve", "veinte", "veintiuno", "veintidós", "veintitrés",
          "veinticuatro", "veinticinco", "veintiséis", "veintisiete", "veintiocho",
          "veintinueve"]
_TENS = {3: "treinta", 4: "cuarenta", 5: "cincuenta", 6: "sesenta", 7: "setenta",
         8: "ochenta", 9: "noventa"}
_HUNDREDS = {1: "ciento", 2: "doscientos", 3: "trescientos", 4: "cuatrocientos",
             5: "quinientos", 6: "seiscientos", 7: "setecientos", 8: "ochocientos",
             9: "novecientos"}


def _below_thousand(n, apocope=False):
    # apocope: "uno" -> "un" before "mil"
    if n < 30:
        word = _UNITS[n]
        if apocope and n in (1, 21):
            word = "un" if n == 1 else "veintiún"
        return word
    if n < 100:
        tens, unit = divmod(n, 10)
        if unit == 0:
            return _TENS[tens]
        return f"{_TENS[tens]} y {_below_thousand(unit, apocope)}"
    if n == 100:
        return "cien"
    hundreds, rest = divmod(n, 100)
    if rest == 0:
        return _HUNDREDS[hundreds]
    return f"{_HUNDREDS[hundreds]} {_below_thousand(rest, apocope)}"


def number_to_words(n: int) -> str:
    """Spanish cardinal for 0 <= n <= 999999."""
    if not 0 <= n <= 999_999:
        raise TextError(f"number {n} outside the supported range 0-999999")
    if n < 1000:
        return _below_thousand(n)
    thousands, rest = divmod(n, 1000)
    head = "mil" if thousands == 1 else f"{_below_thousand(thousands, apocope=True)} mil"
    return head if rest == 0 else f"{head} {_below_thousand(rest)}"


# --- normalization -----------------------------------------------------------

_TOKEN = re.compile(r"\S+")
# all-caps tokens of two or more numeral letters ("XIV", "III") are read as roman numerals
_ROMAN = re.compile(r"^M{0,3}(CM|CD|D?C{0,3})(XC|XL|L?X{0,3})(IX|IV|V?I{0,3})$")


def normalize_text(text: str) -> str:
    """Lowercase, expand integers, turn punctuation into word breaks.

    Accented vowels are kept.  Any token mixing digits with other
    characters (``3.5``, ``4x4``) or any character outside the input
    alphabet raises :class:`TextError`, as do integers above 999999 and
    all-caps roman numerals.
    """
    bad = unsupported_characters(text)
    if bad:
        raise TextError(f"unsupported characters {''.join(bad)!r} in {text!r}")
    words = []
    for token in _TOKEN.findall(text):
        if any(ch.isdigit() for ch in token):
            core = token.strip("".join(PAUSE_PUNCT | DROP_PUNCT))
            if not core.isdigit() or int(core) > 999_999:
                raise TextError(f"cannot expand token {token!r}")
            words.extend(number_to_words(int(core)).split())
            continue
        core = token.strip("".join(PAUSE_PUNCT | DROP_PUNCT))
        if len(core) >= 2 and _ROMAN.match(core):
            raise TextError(f"cannot expand token {token!r} (roman numeral)")
        cleaned = "".join(" " if ch in PAUSE_PUNCT or ch in DROP_PUNCT else ch for ch in token)
        words.extend(cleaned.lower().split())
    return " ".join(words)


# --- grapheme to phoneme -----------------------------------------------------

_STRIP_ACCENT = str.maketrans("áéíóúü", "aeiouu")
_FRONT = set("eiéí")
_VOWEL_LETTERS = set("aeiouáéíóúü")


def _word_to_phones(word: str) -> list[str]:
    out = []
    # stressed[i] is True when out[i] came from an accented vowel letter
    stressed = []
    n = len(word)
    i = 0

    def emit(*symbols, accent=False):
        for s in symbols:
            out.append(s)
            stressed.append(accent)

    while i < n:
        ch = word[i]
        nxt = word[i + 1] if i + 1 < n else ""
        nxt2 = word[i + 2] if i + 2 < n else ""
        prev = word[i - 1] if i > 0 else ""
        if ch in _VOWEL_LETTERS:
            emit(ch.translate(_STRIP_ACCENT), accent=ch in "áéíóú")
            i += 1
        elif ch == "b" or ch == "v":
            emit("b"); i += 1
        elif ch == "c":
            if nxt == "h":
                emit("tʃ"); i += 2
            elif nxt in _FRONT:
                emit("s"); i += 1
            else:
                emit("k"); i += 1
        elif ch == "d":
            emit("d"); i += 1
        elif ch == "f":
            emit("f"); i += 1
        elif ch == "g":
            if nxt == "u" and nxt2 in _FRONT:
                emit("g"); i += 2
            elif nxt == "ü" and nxt2 in _FRONT:
                emit("g", "w"); i += 2
            elif nxt in _FRONT:
                emit("x"); i += 1
            else:
                emit("g"); i += 1
        elif ch == "h":
            i += 1
        elif ch == "j":
            emit("x"); i += 1
        elif ch == "k":
            emit("k"); i += 1
        elif ch == "l":
            if nxt == "l":
                emit("ʝ"); i += 2
            else:
                emit("l"); i += 1
        elif ch == "m":
            emit("m"); i += 1
        elif ch == "n":
            emit("n"); i += 1
        elif ch == "ñ":
            emit("ɲ"); i += 1
        elif ch == "p":
            emit("p"); i += 1
        elif ch == "q":
            emit("k")
            i += 2 if nxt == "u" else 1
        elif ch == "r":
            if nxt == "r":
                emit("r"); i += 2
            elif i == 0 or prev in "lns":
                emit("r"); i += 1
            else:
                emit("ɾ"); i += 1
        elif ch == "s":
            emit("s"); i += 1
        elif ch == "t":
            emit("t"); i += 1
        elif ch == "w":
            emit("w"); i += 1
        elif ch == "x":
            if i == 0:
                emit("s")
            elif i == n - 1 or (prev == "e" and nxt in _VOWEL_LETTERS):
                emit("k", "s")
            else:
                emit("x")
            i += 1
        elif ch == "y":
            if nxt in _VOWEL_LETTERS:
                emit("ʝ")
            else:
                emit("i")
            i += 1
        elif ch == "z":
            emit("s"); i += 1
        else:
            raise TextError(f"unmappable character {ch!r} in {word!r}")

    # unstressed i/u next to another vowel become glides; in i+u / u+i the first one does
    for k, sym in enumerate(out):
        if sym not in ("i", "u") or stressed[k]:
            continue
        left = out[k - 1] if k > 0 else ""
        right = out[k + 1] if k + 1 < len(out) else ""
        if right in VOWELS or left in VOWELS:
            out[k] = "j" if sym == "i" else "w"
    return out


@dataclass(frozen=True)
class PhoneticSpec:
    phones: tuple
    word_boundaries: tuple

    def __post_init__(self):
        phones = tuple(self.phones)
        bounds = tuple(int(b) for b in self.word_boundaries)
        if len(phones) < 2 or phones[0] != "sil" or phones[-1] != "sil":
            raise ValueError("phonetic spec must begin and end with sil")
        for p in phones:
            if p not in INVENTORY:
                raise ValueError(f"{p!r} is not in the phoneme inventory")
        if any(b <= a for a, b in zip(bounds, bounds[1:])):
            raise ValueError("word boundaries must be strictly increasing")
        if bounds and (bounds[0] < 0 or bounds[-1] >= len(phones)):
            raise ValueError("word boundary out of range")
        object.__setattr__(self, "phones", phones)
        object.__setattr__(self, "word_boundaries", bounds)

    def __len__(self):
        return len(self.phones)

    def to_line(self) -> str:
        return " ".join(self.phones)

    @classmethod
    def from_line(cls, line: str) -> "PhoneticSpec":
        phones = line.split()
        bounds = [k for k, p in enumerate(phones)
                  if p not in MARKERS and (k == 0 or phones[k - 1] in MARKERS)]
        return cls(phones, bounds)


def g2p(text: str) -> PhoneticSpec:
    """Phonetize already-normalized text.

    ``sil`` frames the utterance and ``sp`` separates words;
    ``word_boundaries`` holds the index of each word's first phone.
    """
    words = text.split()
    if not words:
        raise TextError("nothing to phonetize")
    phones = ["sil"]
    bounds = []
    for k, word in enumerate(words):
        word_phones = _word_to_phones(word)
        if not word_phones:
            # a word made only of silent letters ("h")
            continue
        if bounds:
            phones.append("sp")
        bounds.append(len(phones))
        phones.extend(word_phones)
    if not bounds:
        raise TextError(f"no pronounceable words in {text!r}")
    phones.append("sil")
    return PhoneticSpec(phones, bounds)


def phonetize(text: str) -> PhoneticSpec:
    """normalize_text followed by g2p."""
    return g2p(normalize_text(text))


def write_spec_lines(specs, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for spec in specs:
            fh.write(spec.to_line() + "\n")


def read_spec_lines(path) -> list[PhoneticSpec]:
    with open(path, encoding="utf-8") as fh:
        return [PhoneticSpec.from_line(line) for line in fh if line.strip()]
