"""Persian sentiment analysis toolkit.

Pipeline: TSV review corpus -> Persian normalization/tokenization/stemming
-> 300-d word-vector encoding (mean vector or padded sequence) -> one of
three from-scratch classifiers (MLP, autoencoder-bottleneck classifier,
1D-CNN) -> per-class precision/recall/F-measure/accuracy reports.
"""

from .corpus import (
    Dataset,
    LABELS,
    NEG,
    POS,
    Review,
    SplitSpec,
    aggregate_dataset,
    aggregate_labels,
    load_dataset,
    split,
)
from .embed import (
    EmbeddingTable,
    SentenceMatrix,
    SentenceVector,
    encode_mean,
    encode_sequence,
    load_embeddings,
)
from .metrics import (
    ConfusionMatrix,
    MetricsReport,
    confusion,
    evaluate_per_class,
    metrics,
    render_report,
    report_json,
)
from .models import (
    Model,
    ModelSpec,
    build_autoencoder,
    build_cnn,
    build_mlp,
    encode_bottleneck,
    load_model,
    predict,
    save_model,
    train,
    train_autoencoder_classifier,
)
from .nn import OptimizerConfig
from .pipeline import encode_dataset, encode_texts
from .preprocess import TokenSeq, normalize, preprocess_pipeline, stem, tokenize

__version__ = "0.1.0"

__all__ = [
    "Dataset", "LABELS", "NEG", "POS", "Review", "SplitSpec",
    "aggregate_dataset", "aggregate_labels", "load_dataset", "split",
    "EmbeddingTable", "SentenceMatrix", "SentenceVector",
    "encode_mean", "encode_sequence", "load_embeddings",
    "ConfusionMatrix", "MetricsReport", "confusion", "evaluate_per_class",
    "metrics", "render_report", "report_json",
    "Model", "ModelSpec", "build_autoencoder", "build_cnn", "build_mlp",
    "encode_bottleneck", "load_model", "predict", "save_model", "train",
    "train_autoencoder_classifier",
    "OptimizerConfig",
    "encode_dataset", "encode_texts",
    "TokenSeq", "normalize", "preprocess_pipeline", "stem", "tokenize",
]
