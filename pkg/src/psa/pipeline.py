"""Glue between corpus, preprocessing and encoding: turn reviews into the
tensors a model consumes."""

from __future__ import annotations

import numpy as np

from .corpus import Dataset, label_index
from .embed import EmbeddingTable, encode_mean, encode_sequence
from .errors import UnlabeledReview
from .preprocess import preprocess_pipeline


def encode_texts(texts: list[str], table: EmbeddingTable, input_kind: str,
                 max_len: int | None = None) -> tuple[np.ndarray, list[int]]:
    """Encode raw texts as a batch; returns the tensor plus the indices of
    texts that produced no tokens after preprocessing."""
    rows = []
    empty: list[int] = []
    for i, text in enumerate(texts):
        tokens = preprocess_pipeline(text).tokens
        if not tokens:
            empty.append(i)
        if input_kind == "mean":
            rows.append(encode_mean(tokens, table).values)
        elif input_kind == "sequence":
            rows.append(encode_sequence(tokens, table, max_len).data)
        else:
            raise ValueError(f"unknown input kind {input_kind!r}")
    shape = (0, table.dim) if input_kind == "mean" else (0, max_len, table.dim)
    x = np.stack(rows) if rows else np.zeros(shape)
    return x, empty


def encode_dataset(dataset: Dataset, table: EmbeddingTable, input_kind: str,
                   max_len: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Encode a labeled dataset into (inputs, class-index labels)."""
    for r in dataset.reviews:
        if r.label is None:
            raise UnlabeledReview(f"review {r.id!r} has no label")
    x, _ = encode_texts([r.text for r in dataset.reviews], table, input_kind, max_len)
    y = np.array([label_index(r.label) for r in dataset.reviews], dtype=np.int64)
    return x, y
