"""Readability grades computed with a fixed, documented tokenizer.

Tokenizer rules
---------------
* Sentences end at a run of ``.``, ``!`` or ``?`` followed by whitespace or
  the end of the text. Text without a terminator counts as one sentence.
* Words are runs of ASCII letters, optionally joined by an apostrophe
  (``don't``, ``student's``), or runs of digits (``2024``, ``3.5``).
  Hyphens and other punctuation separate words.
* Syllables are groups of consecutive vowels (``a e i o u y``) with three
  corrections, each applied only while the count stays at least one:
  a final silent ``e`` is dropped unless the word ends in consonant + ``le``;
  ``-ed`` is dropped unless preceded by ``t`` or ``d``; ``-es`` is dropped
  unless preceded by ``s``, ``x``, ``z``, ``ch``, ``sh``, ``ce``, ``ge`` or
  consonant + ``l``.
  Numbers count as one syllable.
* Polysyllables have three or more syllables. Complex words are polysyllables
  that stay polysyllabic once an ``-ing``, ``-ed`` or ``-es`` ending is removed.

Formulas
--------
``FK = 0.39 W/S + 11.8 Y/W - 15.59``,
``Fog = 0.4 (W/S + 100 C/W)``,
``SMOG = 1.0430 sqrt(30 P/S) + 3.1291``.
"""

import math
import re
from dataclasses import asdict, dataclass, field

import httpx

from ..exceptions import InvalidArgumentError

_SENTENCE_END = re.compile(r"[.!?]+(?=\s|$)")
_WORD = re.compile(r"[A-Za-z]+(?:['’][A-Za-z]+)*|\d+(?:[.,]\d+)*")
_VOWELS = re.compile(r"[aeiouy]+")
_INFLECTION = re.compile(r"(ing|ed|es)$")


def split_sentences(text):
    parts = [p.strip() for p in _SENTENCE_END.split(text.strip())]
    return [p for p in parts if _WORD.search(p)] or ([text.strip()] if text.strip() else [])


def words(text):
    return _WORD.findall(text)


def syllables(word):
    if word[0].isdigit():
        return 1
    w = re.sub(r"['’].*$", "", word.lower())
    n = len(_VOWELS.findall(w))
    if n > 1 and w.endswith("e") and not re.search(r"[^aeiouy]le$", w):
        n -= 1
    if n > 1 and w.endswith("ed") and not re.search(r"[td]ed$", w):
        n -= 1
    if n > 1 and w.endswith("es") and not re.search(r"((s|x|z|ch|sh|ce|ge)es|[^aeiouy]les)$", w):
        n -= 1
    return max(n, 1)


def is_complex(word):
    if syllables(word) < 3:
        return False
    stem = _INFLECTION.sub("", word.lower())
    return stem == word.lower() or (bool(stem) and syllables(stem) >= 3)


@dataclass(frozen=True)
class ReadabilityReport:
    flesch_kincaid_grade: float
    gunning_fog: float
    smog: float
    counts: dict = field(default_factory=dict)
    grammar_issues: int = None
    grammar_status: str = "unavailable"

    def to_dict(self):
        return asdict(self)


def counts(text):
    if not isinstance(text, str) or not text.strip():
        raise InvalidArgumentError("readability needs non-empty text")
    ws = words(text)
    if not ws:
        raise InvalidArgumentError("text contains no words")
    syl = [syllables(w) for w in ws]
    return {
        "sentences": len(split_sentences(text)),
        "words": len(ws),
        "syllables": sum(syl),
        "complex_words": sum(is_complex(w) for w in ws),
        "polysyllables": sum(s >= 3 for s in syl),
    }


def grades(c):
    S, W = c["sentences"], c["words"]
    fk = 0.39 * (W / S) + 11.8 * (c["syllables"] / W) - 15.59
    fog = 0.4 * ((W / S) + 100 * (c["complex_words"] / W))
    smog = 1.0430 * math.sqrt(c["polysyllables"] * 30 / S) + 3.1291
    return fk, fog, smog


def readability(text, grammar=None):
    """Score ``text``; ``grammar`` is an optional :class:`GrammarClient`."""
    c = counts(text)
    fk, fog, smog = grades(c)
    issues, status = None, "unavailable"
    if grammar is not None:
        issues, status = grammar.count_issues(text)
    return ReadabilityReport(fk, fog, smog, c, issues, status)


class GrammarClient:
    """Minimal client for a grammar-check service answering ``{"matches": [...]}``.

    The request is a form POST with ``text`` and ``language`` fields. Any
    failure is reported as status ``error`` rather than raised.
    """

    def __init__(self, url=None, language="en-US", timeout=30.0, client=None):
        self.url = url
        self.language = language
        self.timeout = timeout
        self._client = client

    @property
    def configured(self):
        return bool(self.url)

    def count_issues(self, text):
        if not self.configured:
            return None, "unavailable"
        try:
            if self._client is not None:
                resp = self._client.post(self.url, data={"text": text, "language": self.language})
            else:
                resp = httpx.post(self.url, data={"text": text, "language": self.language}, timeout=self.timeout)
            resp.raise_for_status()
            return len(resp.json()["matches"]), "ok"
        except (httpx.HTTPError, ValueError, KeyError, TypeError):
            return None, "error"
