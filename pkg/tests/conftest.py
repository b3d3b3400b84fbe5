import numpy as np
import pytest

from psa import synth


@pytest.fixture(scope="session")
def fixture_corpus():
    """The bundled 20-review linearly separable corpus and its vectors."""
    return synth.separable_fixture(n_reviews=20, dim=300, seed=7)


@pytest.fixture(scope="session")
def fixture_paths(tmp_path_factory, fixture_corpus):
    """Fixture corpus written out in the TSV / text-vector formats."""
    dataset, table = fixture_corpus
    root = tmp_path_factory.mktemp("fixture")
    synth.write_dataset_tsv(dataset, root / "reviews.tsv")
    synth.write_embeddings_text(table, root / "vectors.vec")
    return root / "reviews.tsv", root / "vectors.vec"


def tiny_table(vectors: dict[str, list[float]]):
    """Build an in-memory embedding table from plain lists."""
    from psa.embed import EmbeddingTable

    dim = len(next(iter(vectors.values())))
    entries = {k: np.array(v, dtype=np.float64) for k, v in vectors.items()}
    return EmbeddingTable(dim=dim, entries=entries, declared_count=len(entries))
