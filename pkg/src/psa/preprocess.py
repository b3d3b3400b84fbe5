"""Persian text preprocessing: normalization, tokenization and stemming.

The three steps are deliberately small and rule-table driven so their
behavior is auditable:

* ``normalize`` folds Arabic letterforms to their Persian equivalents,
  removes harakat, unifies Eastern-Arabic/Persian digits to ASCII, collapses
  whitespace, collapses letter elongations ("gooood") and applies an exact
  slang lexicon per whitespace unit.  The rule tables ship as versioned data
  files (``folding-v1.tsv``, ``slang-v1.tsv``).
* ``tokenize`` splits normalized text on Unicode whitespace, detaches and
  discards punctuation, and keeps ZWNJ (U+200C) inside tokens because it
  joins Persian compounds rather than separating words.
* ``stem`` strips at most one inflectional suffix from the ordered list in
  ``suffixes-v1.txt``, and only when at least two letters remain.

``preprocess_pipeline`` runs all three while tracking byte offsets into the
original raw text, so every emitted token can be traced back to the span it
came from.
"""

from __future__ import annotations

import string
import unicodedata
from dataclasses import dataclass, field
from importlib import resources

_ZWNJ = "‌"

# Persian punctuation plus ASCII punctuation; detached from tokens and dropped.
_PUNCT = frozenset(string.punctuation) | {"،", "؛", "؟", "\xab", "\xbb"}

_ARABIC_BLOCK = (0x0600, 0x06FF)


def _read_data(name: str) -> str:
    return (resources.files("psa") / "data" / name).read_text(encoding="utf-8")


def _load_folding() -> dict[str, str | None]:
    table: dict[str, str | None] = {}
    for line in _read_data("folding-v1.tsv").splitlines():
        if not line or line.startswith("#"):
            continue
        src, _, dst = line.partition("\t")
        table[chr(int(src[2:], 16))] = chr(int(dst[2:], 16)) if dst else None
    return table


def _load_suffixes() -> tuple[str, ...]:
    return tuple(
        line for line in _read_data("suffixes-v1.txt").splitlines() if line
    )


def _collapse_elongation(text: str) -> str:
    """Collapse runs of >= 3 identical letter characters to a single one."""
    out = []
    i = 0
    n = len(text)
    while i < n:
        j = i
        while j < n and text[j] == text[i]:
            j += 1
        if j - i >= 3 and unicodedata.category(text[i]).startswith("L"):
            out.append(text[i])
        else:
            out.append(text[i] * (j - i))
        i = j
    return "".join(out)


def _load_slang() -> dict[str, str]:
    # Keys are stored elongation-collapsed so any elongated variant of an
    # entry hits it after the collapse step. Values must be fixed points of
    # normalization, otherwise normalize would not be idempotent.
    table: dict[str, str] = {}
    for line in _read_data("slang-v1.tsv").splitlines():
        if not line or line.startswith("#"):
            continue
        surface, _, normal = line.partition("\t")
        key = _collapse_elongation(surface)
        if any(c.isspace() or c == _ZWNJ or c in _PUNCT for c in key + normal):
            raise ValueError(f"slang entry {surface!r} contains separators")
        table[key] = normal
    for normal in table.values():
        if table.get(_collapse_elongation(normal), normal) != normal:
            raise ValueError(f"slang value {normal!r} is not normalization-stable")
    return table


_FOLDING = _load_folding()
_SUFFIXES = _load_suffixes()
_SLANG = _load_slang()


@dataclass
class TokenSeq:
    """Ordered tokens plus (start, end) byte offsets into the source text."""

    tokens: list[str] = field(default_factory=list)
    offsets: list[tuple[int, int]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.tokens)

    def __iter__(self):
        return iter(self.tokens)


def _fold_char(c: str) -> str | None:
    return _FOLDING.get(c, c)


def normalize(text: str) -> str:
    """Normalize raw text; total and idempotent.

    Applies, in order: character folding (letterforms, digits, harakat
    removal), whitespace collapse, elongation collapse and exact slang
    replacement per whitespace-delimited unit.
    """
    folded = "".join(c2 for c in text if (c2 := _fold_char(c)) is not None)
    units = []
    for unit in folded.split():
        collapsed = _collapse_elongation(unit)
        units.append(_SLANG.get(collapsed, collapsed))
    return " ".join(units)


def _byte_starts(text: str) -> list[int]:
    starts = [0]
    for c in text:
        starts.append(starts[-1] + len(c.encode("utf-8")))
    return starts


def tokenize(text: str) -> TokenSeq:
    """Split normalized text into tokens with byte offsets into ``text``.

    Splits on Unicode whitespace; punctuation is detached and discarded;
    ZWNJ is kept inside tokens but trimmed at token boundaries.
    """
    seq = TokenSeq()
    bstarts = _byte_starts(text)
    i = 0
    n = len(text)
    while i < n:
        if text[i].isspace():
            i += 1
            continue
        j = i
        while j < n and not text[j].isspace():
            j += 1
        for a, b in _split_unit_spans(text, i, j):
            seq.tokens.append(text[a:b])
            seq.offsets.append((bstarts[a], bstarts[b]))
        i = j
    return seq


def _split_unit_spans(text: str, start: int, end: int):
    """Yield (char_start, char_end) spans of punctuation-free, ZWNJ-trimmed
    runs inside text[start:end]."""
    i = start
    while i < end:
        if text[i] in _PUNCT:
            i += 1
            continue
        j = i
        while j < end and text[j] not in _PUNCT:
            j += 1
        a, b = i, j
        while a < b and text[a] == _ZWNJ:
            a += 1
        while b > a and text[b - 1] == _ZWNJ:
            b -= 1
        if a < b:
            yield a, b
        i = j


def _is_persian(token: str) -> bool:
    return any(_ARABIC_BLOCK[0] <= ord(c) <= _ARABIC_BLOCK[1] for c in token)


def stem(token: str) -> str:
    """Strip at most one suffix; the remaining stem must keep >= 2 letters.

    Non-Persian tokens pass through unchanged. The suffix list is scanned
    in file order, which puts longer suffixes before the shorter suffixes
    they end with, so the first legal match is the longest one.
    """
    if not token:
        raise ValueError("stem() requires a non-empty token")
    if not _is_persian(token):
        return token
    for suffix in _SUFFIXES:
        if token.endswith(suffix) and len(token) > len(suffix):
            stem_part = token[: -len(suffix)].rstrip(_ZWNJ)
            letters = sum(1 for c in stem_part if unicodedata.category(c).startswith("L"))
            if letters >= 2:
                return stem_part
    return token


@dataclass
class _Span:
    char: str
    start: int  # char index into the raw text
    end: int


def preprocess_pipeline(text: str) -> TokenSeq:
    """Normalize, tokenize and stem raw text in one pass.

    Offsets refer to byte positions in the raw input, chosen so that
    re-normalizing and re-stemming each source slice reproduces its token
    exactly. Punctuation-split fragments are therefore normalized per
    fragment (not per whitespace unit).
    """
    seq = TokenSeq()
    bstarts = _byte_starts(text)
    i = 0
    n = len(text)
    while i < n:
        if text[i].isspace():
            i += 1
            continue
        j = i
        while j < n and not text[j].isspace():
            j += 1
        _emit_unit_tokens(text, i, j, bstarts, seq)
        i = j
    return seq


def _emit_unit_tokens(text: str, start: int, end: int, bstarts, seq: TokenSeq) -> None:
    # Fold characters, keeping raw spans; harakat disappear but stay covered
    # by the span of the surrounding token.
    spans: list[_Span] = []
    for ci in range(start, end):
        folded = _fold_char(text[ci])
        if folded is not None:
            spans.append(_Span(folded, ci, ci + 1))
    spans = _collapse_spans(spans)

    k = 0
    m = len(spans)
    while k < m:
        if spans[k].char in _PUNCT:
            k += 1
            continue
        r = k
        while r < m and spans[r].char not in _PUNCT:
            r += 1
        run = spans[k:r]
        while run and run[0].char == _ZWNJ:
            run.pop(0)
        while run and run[-1].char == _ZWNJ:
            run.pop()
        if run:
            raw = "".join(s.char for s in run)
            token = stem(_SLANG.get(raw, raw))
            seq.tokens.append(token)
            seq.offsets.append((bstarts[run[0].start], bstarts[run[-1].end]))
        k = r


def _collapse_spans(spans: list[_Span]) -> list[_Span]:
    out: list[_Span] = []
    i = 0
    n = len(spans)
    while i < n:
        j = i
        while j < n and spans[j].char == spans[i].char:
            j += 1
        if j - i >= 3 and unicodedata.category(spans[i].char).startswith("L"):
            out.append(_Span(spans[i].char, spans[i].start, spans[j - 1].end))
        else:
            out.extend(spans[i:j])
        i = j
    return out
