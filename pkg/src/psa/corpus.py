"""Labeled review datasets: TSV ingestion, annotator-vote aggregation and
seeded train/test/validation splitting.

The TSV contract: UTF-8, LF line endings, header ``id<TAB>text<TAB>label``
for pre-labeled files or ``id<TAB>text<TAB>a1<TAB>a2<TAB>a3`` for
per-annotator files; label tokens are exactly ``pos`` / ``neg``; tabs and
newlines are forbidden inside the text field.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

from .errors import (
    DatasetTooSmall,
    EmptyDataset,
    MalformedRow,
    MissingAnnotations,
    UnlabeledReview,
)
from .rng import Xoshiro256StarStar

NEG = "neg"
POS = "pos"
LABELS = (NEG, POS)

_LABELED_HEADER = ["id", "text", "label"]
_ANNOTATED_HEADER = ["id", "text", "a1", "a2", "a3"]


def label_index(label: str) -> int:
    return LABELS.index(label)


@dataclass(frozen=True)
class Review:
    id: str
    text: str
    annotator_labels: tuple[str, ...] | None = None
    label: str | None = None


@dataclass
class Dataset:
    reviews: list[Review] = field(default_factory=list)
    name: str = ""

    def __len__(self) -> int:
        return len(self.reviews)

    def __iter__(self):
        return iter(self.reviews)

    def all_labeled(self) -> bool:
        return all(r.label is not None for r in self.reviews)


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.60
    test_fraction: float = 0.30
    valid_fraction: float = 0.10
    seed: int = 0

    def validate(self) -> None:
        for name, f in (
            ("train_fraction", self.train_fraction),
            ("test_fraction", self.test_fraction),
            ("valid_fraction", self.valid_fraction),
        ):
            if not 0.0 < f < 1.0:
                raise ValueError(f"{name} must be in (0, 1), got {f}")
        total = self.train_fraction + self.test_fraction + self.valid_fraction
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"fractions must sum to 1.0, got {total}")
        if not 0 <= self.seed <= 2**64 - 1:
            raise ValueError("seed must be an unsigned 64-bit integer")


def load_dataset(path: str | Path, format: str = "tsv") -> Dataset:
    """Parse a review TSV file into a Dataset, preserving file order."""
    if format != "tsv":
        raise ValueError(f"unsupported format {format!r}")
    path = Path(path)
    with path.open(encoding="utf-8", newline="") as fh:  # no newline translation
        raw = fh.read()
    lines = raw.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise EmptyDataset(f"{path}: file is empty")

    header = lines[0].split("\t")
    if header == _LABELED_HEADER:
        annotated = False
    elif header == _ANNOTATED_HEADER:
        annotated = True
    else:
        raise MalformedRow(1, f"unrecognized header {lines[0]!r}")

    reviews: list[Review] = []
    seen: set[str] = set()
    for line_no, line in enumerate(lines[1:], start=2):
        fields = line.split("\t")
        if len(fields) != len(header):
            raise MalformedRow(
                line_no, f"expected {len(header)} columns, got {len(fields)}"
            )
        rid, text = fields[0], fields[1]
        if not rid:
            raise MalformedRow(line_no, "empty id")
        if rid in seen:
            raise MalformedRow(line_no, f"duplicate id {rid!r}")
        if not text.strip():
            raise MalformedRow(line_no, "empty text")
        if "\r" in text or "\r" in rid:
            raise MalformedRow(line_no, "carriage return in field (LF endings required)")
        for tok in fields[2:]:
            if tok not in LABELS:
                raise MalformedRow(line_no, f"bad label token {tok!r}")
        seen.add(rid)
        if annotated:
            reviews.append(Review(rid, text, annotator_labels=tuple(fields[2:])))
        else:
            reviews.append(Review(rid, text, label=fields[2]))
    if not reviews:
        raise EmptyDataset(f"{path}: no data rows")
    return Dataset(reviews, name=path.stem)


def aggregate_labels(review: Review) -> Review:
    """Set the review label to the majority vote of its three annotators."""
    votes = review.annotator_labels
    if votes is None or len(votes) != 3:
        raise MissingAnnotations(
            f"review {review.id!r} has {0 if votes is None else len(votes)} "
            "annotator labels, need exactly 3"
        )
    majority = POS if sum(v == POS for v in votes) >= 2 else NEG
    return replace(review, label=majority)


def aggregate_dataset(dataset: Dataset) -> Dataset:
    reviews = [
        aggregate_labels(r) if r.label is None else r for r in dataset.reviews
    ]
    return Dataset(reviews, name=dataset.name)


def _floor_fraction(fraction: float, n: int) -> int:
    x = fraction * n
    nearest = round(x)
    # Snap to the mathematically exact product before flooring; fractions are
    # validated to 1e-9 so a closer float residue is representation noise.
    if abs(x - nearest) <= 1e-9 * max(1, n):
        return int(nearest)
    return math.floor(x)


def split(dataset: Dataset, spec: SplitSpec) -> tuple[Dataset, Dataset, Dataset]:
    """Deterministically partition a labeled dataset into train/test/valid.

    A Fisher-Yates shuffle driven by xoshiro256** seeded with ``spec.seed``
    fixes the order, then contiguous cuts of floor(train*N) and
    floor(test*N) reviews are taken; validation receives the remainder.
    """
    spec.validate()
    for r in dataset.reviews:
        if r.label is None:
            raise UnlabeledReview(f"review {r.id!r} has no label")
    n = len(dataset.reviews)
    if n < 10:
        raise DatasetTooSmall(f"need at least 10 reviews to split, got {n}")

    order = list(range(n))
    Xoshiro256StarStar(spec.seed).shuffle(order)
    shuffled = [dataset.reviews[i] for i in order]

    n_train = _floor_fraction(spec.train_fraction, n)
    n_test = _floor_fraction(spec.test_fraction, n)
    train = shuffled[:n_train]
    test = shuffled[n_train : n_train + n_test]
    valid = shuffled[n_train + n_test :]
    return (
        Dataset(train, name=f"{dataset.name}/train"),
        Dataset(test, name=f"{dataset.name}/test"),
        Dataset(valid, name=f"{dataset.name}/valid"),
    )
