"""Word-vector loading and sentence encoding.

The loader reads the plain-text vector format: a ``<count> <dim>`` header
line followed by one ``<token> <v1> ... <vdim>`` line per word.  Sentences
become either a single mean vector (fixed-size classifier input) or a
zero-padded sequence matrix (convolutional input).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import BadHeader, DimensionMismatch, NonFiniteValue
from .preprocess import TokenSeq

log = logging.getLogger(__name__)

EXPECTED_DIM = 300


@dataclass
class EmbeddingTable:
    dim: int
    entries: dict[str, np.ndarray]
    declared_count: int
    duplicate_count: int = 0

    def __contains__(self, token: str) -> bool:
        return token in self.entries

    def __len__(self) -> int:
        return len(self.entries)


@dataclass
class SentenceVector:
    values: np.ndarray  # (dim,)
    coverage: float     # fraction of tokens found in the table


@dataclass
class SentenceMatrix:
    data: np.ndarray    # (max_len, dim); rows past true_len are zero
    true_len: int


def load_embeddings(path: str | Path) -> EmbeddingTable:
    """Load a text-format word-vector file into an EmbeddingTable.

    Duplicate tokens are allowed; the last occurrence wins and the
    collision count is recorded on the table.
    """
    path = Path(path)
    entries: dict[str, np.ndarray] = {}
    duplicates = 0
    with path.open(encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        parts = header.split(" ")
        if len(parts) != 2:
            raise BadHeader(f"{path}: expected '<count> <dim>' header, got {header!r}")
        try:
            declared_count, dim = int(parts[0]), int(parts[1])
        except ValueError:
            raise BadHeader(f"{path}: non-integer header {header!r}") from None
        if declared_count < 0 or dim < 1:
            raise BadHeader(f"{path}: bad header values {header!r}")

        for line_no, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            fields = line.split(" ")
            token = fields[0]
            if len(fields) - 1 != dim:
                raise DimensionMismatch(
                    line_no, f"token {token!r} has {len(fields) - 1} values, expected {dim}"
                )
            try:
                vec = np.array([float(v) for v in fields[1:]], dtype=np.float64)
            except ValueError:
                raise NonFiniteValue(line_no, f"unparseable value for {token!r}") from None
            if not np.all(np.isfinite(vec)):
                raise NonFiniteValue(line_no, f"non-finite value for {token!r}")
            if token in entries:
                duplicates += 1
            entries[token] = vec

    if dim != EXPECTED_DIM:
        log.warning("embedding dim is %d (expected %d)", dim, EXPECTED_DIM)
    if duplicates:
        log.warning("%d duplicate tokens in %s; last occurrence kept", duplicates, path)
    return EmbeddingTable(dim=dim, entries=entries, declared_count=declared_count,
                          duplicate_count=duplicates)


def encode_mean(tokens: TokenSeq | list[str], table: EmbeddingTable) -> SentenceVector:
    """Mean of in-vocabulary token vectors; OOV tokens are excluded entirely.

    Returns the zero vector with coverage 0 when nothing is in vocabulary.
    """
    toks = list(tokens)
    found = [table.entries[t] for t in toks if t in table.entries]
    if not found:
        return SentenceVector(np.zeros(table.dim), 0.0)
    mean = np.mean(np.stack(found), axis=0)
    return SentenceVector(mean, len(found) / len(toks))


def encode_sequence(tokens: TokenSeq | list[str], table: EmbeddingTable,
                    max_len: int) -> SentenceMatrix:
    """Stack token vectors row-wise into a (max_len, dim) matrix.

    OOV tokens become zero rows; longer sequences are truncated at the end
    and shorter ones zero-padded.
    """
    if max_len < 1:
        raise ValueError(f"max_len must be >= 1, got {max_len}")
    toks = list(tokens)
    data = np.zeros((max_len, table.dim))
    for i, t in enumerate(toks[:max_len]):
        vec = table.entries.get(t)
        if vec is not None:
            data[i] = vec
    return SentenceMatrix(data, true_len=min(len(toks), max_len))
