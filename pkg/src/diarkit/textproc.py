"""Bengali-aware text normalization and repetition-removal cleanup.

Raw ASR output on long recordings tends to loop, repeating letters, words,
and whole phrases. :func:`clean_transcript` removes those loops while
preserving natural reduplication (doubled intensifiers are common in
Bengali), working on grapheme clusters rather than code points so combining
vowel signs never detach from their consonant.

:func:`normalize` is the shared scoring normalization used by the WER
scorer.
"""

from __future__ import annotations

import string
import unicodedata
from dataclasses import dataclass

import regex

# ASCII punctuation plus the common Bengali and typographic marks seen in
# transcripts (dari/double dari, quotes, dashes, ellipsis).
DEFAULT_PUNCTUATION: frozenset[str] = frozenset(string.punctuation) | frozenset(
    "।॥‘’“”–—…"
)

_GRAPHEME = regex.compile(r"\X")


@dataclass(frozen=True)
class NormalizationProfile:
    """How to canonicalize text before tokenization.

    ``unicode_form`` is "NFC" or "none". Punctuation characters are replaced
    by spaces (so they separate words), then whitespace runs collapse to
    single spaces with the ends trimmed.
    """

    unicode_form: str = "NFC"
    strip_punctuation: bool = True
    punctuation_set: frozenset[str] = DEFAULT_PUNCTUATION
    collapse_whitespace: bool = True

    def __post_init__(self):
        if self.unicode_form not in ("NFC", "none"):
            raise ValueError(f"unicode_form must be 'NFC' or 'none', got {self.unicode_form!r}")
        object.__setattr__(self, "punctuation_set", frozenset(self.punctuation_set))
        if self.strip_punctuation and not self.punctuation_set:
            raise ValueError("punctuation_set must be non-empty when strip_punctuation is set")


DEFAULT_PROFILE = NormalizationProfile()


def normalize(text: str, profile: NormalizationProfile = DEFAULT_PROFILE) -> str:
    """Apply Unicode normal form, punctuation stripping, and whitespace collapse.

    Idempotent: ``normalize(normalize(t)) == normalize(t)``.
    """
    if profile.unicode_form == "NFC":
        text = unicodedata.normalize("NFC", text)
    if profile.strip_punctuation:
        text = "".join(" " if ch in profile.punctuation_set else ch for ch in text)
    if profile.collapse_whitespace:
        text = " ".join(text.split())
    return text


@dataclass(frozen=True)
class DedupParams:
    """Repetition-removal thresholds.

    Runs *longer* than a threshold collapse to a single occurrence; runs at
    or under it are preserved, so with the defaults a natural doubled word
    survives while a 3x+ hallucination loop is removed.
    """

    max_word_repeat: int = 2
    max_phrase_len: int = 5
    max_phrase_repeat: int = 1
    max_char_repeat: int = 2

    def __post_init__(self):
        for name, minimum in (
            ("max_word_repeat", 1),
            ("max_phrase_len", 2),
            ("max_phrase_repeat", 1),
            ("max_char_repeat", 1),
        ):
            value = getattr(self, name)
            if not isinstance(value, int) or isinstance(value, bool) or value < minimum:
                raise ValueError(f"{name} must be an integer >= {minimum}, got {value!r}")


def graphemes(token: str) -> list[str]:
    """Split a token into extended grapheme clusters."""
    return _GRAPHEME.findall(token)


def dedup_chars(token: str, max_char_repeat: int) -> str:
    """Collapse grapheme-cluster runs longer than ``max_char_repeat`` to one."""
    out: list[str] = []
    run_cluster = None
    run_length = 0
    for cluster in graphemes(token):
        if cluster == run_cluster:
            run_length += 1
        else:
            if run_cluster is not None:
                out.append(run_cluster if run_length > max_char_repeat else run_cluster * run_length)
            run_cluster = cluster
            run_length = 1
    if run_cluster is not None:
        out.append(run_cluster if run_length > max_char_repeat else run_cluster * run_length)
    return "".join(out)


def dedup_words(tokens: list[str], max_word_repeat: int) -> list[str]:
    """Collapse runs of an identical token longer than ``max_word_repeat`` to one."""
    out: list[str] = []
    i = 0
    n = len(tokens)
    while i < n:
        j = i
        while j < n and tokens[j] == tokens[i]:
            j += 1
        run = j - i
        if run > max_word_repeat:
            out.append(tokens[i])
        else:
            out.extend(tokens[i:j])
        i = j
    return out


def _collapse_ngram_runs(tokens: list[str], n: int, max_repeat: int) -> list[str]:
    out: list[str] = []
    i = 0
    while i + n <= len(tokens):
        gram = tokens[i : i + n]
        # a run of one repeated word is word-level repetition; leave it to
        # the word pass and its own threshold
        if all(t == gram[0] for t in gram):
            out.append(tokens[i])
            i += 1
            continue
        k = 1
        while tokens[i + k * n : i + (k + 1) * n] == gram:
            k += 1
        if k > max_repeat:
            out.extend(gram)
            i += k * n
        else:
            out.append(tokens[i])
            i += 1
    out.extend(tokens[i:])
    return out


def dedup_phrases(tokens: list[str], params: DedupParams) -> list[str]:
    """Collapse consecutively repeated n-grams, longest n first.

    For each n from ``max_phrase_len`` down to 2, a greedy left-to-right
    scan collapses any n-gram repeated more than ``max_phrase_repeat`` times
    in a row to a single occurrence. N-grams made of one repeated word are
    exempt (those runs are governed by ``max_word_repeat``). The whole sweep
    repeats until nothing changes, so collapses that expose new periodicity
    are caught.
    """
    current = list(tokens)
    changed = True
    while changed:
        changed = False
        for n in range(params.max_phrase_len, 1, -1):
            collapsed = _collapse_ngram_runs(current, n, params.max_phrase_repeat)
            if collapsed != current:
                current = collapsed
                changed = True
    return current


def clean_transcript(text: str, params: DedupParams = DedupParams()) -> str:
    """Remove phrase, word, and letter repetition loops from ASR output.

    Tokenizes on whitespace, runs phrase -> word -> grapheme dedup, and
    repeats the three stages until the token list stops changing (letter
    dedup can create equal adjacent tokens that the word pass must then
    see). Idempotent; rejoins with single spaces.
    """
    tokens = text.split()
    while True:
        cleaned = dedup_phrases(tokens, params)
        cleaned = dedup_words(cleaned, params.max_word_repeat)
        cleaned = [dedup_chars(t, params.max_char_repeat) for t in cleaned]
        if cleaned == tokens:
            return " ".join(tokens)
        tokens = cleaned
