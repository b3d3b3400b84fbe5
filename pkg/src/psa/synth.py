"""Synthetic fixtures: a small linearly separable review corpus with matching
word vectors, plus writers for the TSV and text vector formats.

The bundled corpus is deliberately artificial (two disjoint vocabularies
whose vectors separate on the first component); it exists so the full
pipeline can run and be tested without any external data, and makes no
attempt to mimic a real review collection.
"""

from __future__ import annotations

from dataclasses import replace
from pathlib import Path

import numpy as np

from .corpus import Dataset, NEG, POS, Review
from .embed import EmbeddingTable
from .rng import Xoshiro256StarStar


def separable_fixture(n_reviews: int = 20, dim: int = 300, seed: int = 7,
                      vocab_per_class: int = 10,
                      words_per_review: tuple[int, int] = (4, 8),
                      ) -> tuple[Dataset, EmbeddingTable]:
    """Labeled reviews drawn from two disjoint vocabularies.

    Word vectors put class-"pos" words at +1 and class-"neg" words at -1 on
    component 0, with small uniform noise elsewhere, so mean vectors (and
    any token window) are linearly separable.
    """
    if n_reviews < 2 or dim < 1 or vocab_per_class < 1:
        raise ValueError("fixture needs n_reviews >= 2, dim >= 1, vocab >= 1")
    rng = Xoshiro256StarStar(seed)
    vocab = {POS: [f"posw{i:02d}" for i in range(vocab_per_class)],
             NEG: [f"negw{i:02d}" for i in range(vocab_per_class)]}
    entries: dict[str, np.ndarray] = {}
    for label, words in vocab.items():
        anchor = 1.0 if label == POS else -1.0
        for w in words:
            vec = np.array([rng.uniform_symmetric(0.1) for _ in range(dim)])
            vec[0] = anchor + rng.uniform_symmetric(0.05)
            entries[w] = vec
    table = EmbeddingTable(dim=dim, entries=entries, declared_count=len(entries))

    lo, hi = words_per_review
    reviews = []
    for i in range(n_reviews):
        label = POS if i % 2 == 0 else NEG
        count = lo + rng.bounded(hi - lo + 1)
        words = [vocab[label][rng.bounded(vocab_per_class)] for _ in range(count)]
        reviews.append(Review(id=f"s{i:04d}", text=" ".join(words), label=label))
    return Dataset(reviews, name="synthetic"), table


def with_annotators(dataset: Dataset, seed: int = 11, flip_rate: float = 0.3,
                    ) -> Dataset:
    """Replace each gold label with a 3-vote annotator tuple whose majority
    reproduces it (one dissenting vote with probability ``flip_rate``)."""
    rng = Xoshiro256StarStar(seed)
    out = []
    for r in dataset.reviews:
        if r.label is None:
            raise ValueError(f"review {r.id!r} is unlabeled")
        other = NEG if r.label == POS else POS
        votes = [r.label, r.label, r.label]
        if rng.uniform() < flip_rate:
            votes[rng.bounded(3)] = other
        out.append(replace(r, annotator_labels=tuple(votes), label=None))
    return Dataset(out, name=dataset.name)


def write_dataset_tsv(dataset: Dataset, path: str | Path) -> None:
    """Write the dataset TSV contract (labeled or annotated form)."""
    annotated = any(r.annotator_labels is not None for r in dataset.reviews)
    lines = ["id\ttext\ta1\ta2\ta3" if annotated else "id\ttext\tlabel"]
    for r in dataset.reviews:
        if annotated:
            lines.append(f"{r.id}\t{r.text}\t" + "\t".join(r.annotator_labels))
        else:
            lines.append(f"{r.id}\t{r.text}\t{r.label}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def write_embeddings_text(table: EmbeddingTable, path: str | Path) -> None:
    """Write the ``<count> <dim>`` text vector format."""
    lines = [f"{len(table.entries)} {table.dim}"]
    for token, vec in table.entries.items():
        lines.append(token + " " + " ".join(repr(float(v)) for v in vec))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
