"""Command-line entry point: ``psa {train|evaluate|predict|preprocess}``.

Configuration comes from a TOML file with flag overrides; ``PSA_LOG``
(error|info|debug) controls stderr verbosity. Standard output carries only
the documented payload for each command; all logging goes to stderr.

Exit codes: 0 success, 2 configuration error, 3 data/IO error, 4 numeric
abort during training. Failures print one tab-separated line to stderr:
``error<TAB><kind><TAB><detail>``.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

import numpy as np

from . import models as models_mod
from .corpus import LABELS, SplitSpec, aggregate_dataset, load_dataset, split
from .metrics import evaluate_per_class, render_report, report_json
from .embed import load_embeddings
from .errors import NonFiniteGradient, NonFiniteLoss, PsaError
from .nn import OptimizerConfig
from .pipeline import encode_dataset, encode_texts
from .preprocess import preprocess_pipeline

log = logging.getLogger("psa")

KIND_DISPLAY = {
    "mlp": "MLP",
    "autoencoder_classifier": "MLP-Autoencoder",
    "cnn1d": "1D-CNN",
}


class ConfigError(PsaError):
    pass


@dataclass
class RunConfig:
    dataset: Path | None = None
    embeddings: Path | None = None
    model_out: Path = Path("model.psam")
    report_out: Path | None = None
    kind: str = "mlp"
    hidden_sizes: list[int] = field(default_factory=lambda: [100])
    num_classes: int = 2
    max_len: int = 100
    ae_scale: float = 1.0
    split: SplitSpec = field(default_factory=SplitSpec)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    ae_optimizer: OptimizerConfig | None = None


_SCHEMA = {
    "paths": {"dataset", "embeddings", "model_out", "report_out"},
    "model": {"kind", "hidden_sizes", "num_classes", "max_len", "ae_scale"},
    "split": {"train_fraction", "test_fraction", "valid_fraction", "seed"},
    "optimizer": {"algorithm", "learning_rate", "momentum", "beta1", "beta2",
                  "batch_size", "epochs", "seed"},
    "autoencoder": {"algorithm", "learning_rate", "momentum", "beta1", "beta2",
                    "batch_size", "epochs", "seed"},
}


def _check_schema(doc: dict) -> None:
    for section, body in doc.items():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown config section [{section}]")
        if not isinstance(body, dict):
            raise ConfigError(f"config section [{section}] must be a table")
        unknown = set(body) - _SCHEMA[section]
        if unknown:
            raise ConfigError(
                f"unknown keys in [{section}]: {', '.join(sorted(unknown))}"
            )


def _optimizer_from(body: dict, base: OptimizerConfig) -> OptimizerConfig:
    return replace(base, **body)


def load_config(path: str | Path | None) -> RunConfig:
    cfg = RunConfig()
    if path is None:
        return cfg
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML in {path}: {exc}") from None
    _check_schema(doc)

    paths = doc.get("paths", {})
    for key in ("dataset", "embeddings", "model_out", "report_out"):
        if key in paths:
            setattr(cfg, key, Path(paths[key]))
    model = doc.get("model", {})
    for key in ("kind", "num_classes", "max_len", "ae_scale"):
        if key in model:
            setattr(cfg, key, model[key])
    if "hidden_sizes" in model:
        cfg.hidden_sizes = list(model["hidden_sizes"])
    try:
        if "split" in doc:
            cfg.split = SplitSpec(**doc["split"])
        if "optimizer" in doc:
            cfg.optimizer = _optimizer_from(doc["optimizer"], OptimizerConfig())
        if "autoencoder" in doc:
            cfg.ae_optimizer = _optimizer_from(doc["autoencoder"], cfg.optimizer)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    return cfg


def _apply_overrides(cfg: RunConfig, args: argparse.Namespace) -> RunConfig:
    if getattr(args, "dataset", None):
        cfg.dataset = Path(args.dataset)
    if getattr(args, "embeddings", None):
        cfg.embeddings = Path(args.embeddings)
    if getattr(args, "out", None):
        # --out names the primary output of the subcommand
        if args.command == "train":
            cfg.model_out = Path(args.out)
        else:
            cfg.report_out = Path(args.out)
    if getattr(args, "model", None) and args.command == "train":
        cfg.model_out = Path(args.model)
    if getattr(args, "seed", None) is not None:
        cfg.split = replace(cfg.split, seed=args.seed)
        cfg.optimizer = replace(cfg.optimizer, seed=args.seed)
        if cfg.ae_optimizer is not None:
            cfg.ae_optimizer = replace(cfg.ae_optimizer, seed=args.seed)
    return cfg


def _validate_train_config(cfg: RunConfig) -> None:
    if cfg.kind not in KIND_DISPLAY:
        raise ConfigError(f"unknown model kind {cfg.kind!r}")
    if cfg.num_classes != 2:
        raise ConfigError(
            "the command-line pipeline is binary: num_classes must be 2 "
            "(wider heads are available through the library API)"
        )
    for name, p in (("dataset", cfg.dataset), ("embeddings", cfg.embeddings)):
        if p is None:
            raise ConfigError(f"no {name} path configured")
        if not p.exists():
            raise ConfigError(f"{name} path does not exist: {p}")
    try:
        cfg.split.validate()
        cfg.optimizer.validate()
        if cfg.ae_optimizer is not None:
            cfg.ae_optimizer.validate()
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if cfg.max_len < 1:
        raise ConfigError(f"max_len must be >= 1, got {cfg.max_len}")


def _load_labeled_dataset(path: Path):
    dataset = load_dataset(path)
    if not dataset.all_labeled():
        dataset = aggregate_dataset(dataset)
    return dataset


def _input_kind(kind: str) -> str:
    return "sequence" if kind == "cnn1d" else "mean"


def _evaluation_report(model, dataset, table, max_len):
    kind = model.spec.input.kind
    x, _ = encode_texts([r.text for r in dataset.reviews], table, kind,
                        model.spec.input.max_len or max_len)
    labels, _ = models_mod.predict(model, x)
    preds = [LABELS[i] for i in labels]
    golds = [r.label for r in dataset.reviews]
    return evaluate_per_class(preds, golds)


def cmd_train(args: argparse.Namespace) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    _validate_train_config(cfg)

    table = load_embeddings(cfg.embeddings)
    dataset = _load_labeled_dataset(cfg.dataset)
    train_set, test_set, valid_set = split(dataset, cfg.split)
    log.info("split sizes: train=%d test=%d valid=%d",
             len(train_set), len(test_set), len(valid_set))

    kind = _input_kind(cfg.kind)
    x_train, y_train = encode_dataset(train_set, table, kind, cfg.max_len)
    x_valid, y_valid = encode_dataset(valid_set, table, kind, cfg.max_len)

    if cfg.kind == "mlp":
        model = models_mod.build_mlp(table.dim, cfg.hidden_sizes, cfg.num_classes,
                                     seed=cfg.optimizer.seed)
        models_mod.train(model, (x_train, y_train), (x_valid, y_valid),
                         cfg.optimizer, "classification")
    elif cfg.kind == "cnn1d":
        model = models_mod.build_cnn(cfg.max_len, table.dim, cfg.num_classes,
                                     seed=cfg.optimizer.seed)
        models_mod.train(model, (x_train, y_train), (x_valid, y_valid),
                         cfg.optimizer, "classification")
    else:
        ae_config = cfg.ae_optimizer or cfg.optimizer
        clf_config = replace(cfg.optimizer,
                             seed=(cfg.optimizer.seed + 1) % 2**64)
        model = models_mod.train_autoencoder_classifier(
            (x_train, y_train), (x_valid, y_valid), ae_config, clf_config,
            num_classes=cfg.num_classes, hidden_sizes=cfg.hidden_sizes,
            scale=cfg.ae_scale,
        )

    models_mod.save_model(model, cfg.model_out)
    log.info("model written to %s", cfg.model_out)

    report = _evaluation_report(model, test_set, table, cfg.max_len)
    named = [(KIND_DISPLAY[cfg.kind], report)]
    if cfg.report_out is not None:
        Path(cfg.report_out).write_text(report_json(named) + "\n",
                                        encoding="utf-8")
        log.info("report written to %s", cfg.report_out)
    sys.stdout.write(render_report(named))
    return 0


def _require(args, cfg, attr, flag):
    value = getattr(cfg, attr, None)
    if value is None:
        raise ConfigError(f"missing {flag} (flag or config [paths] entry)")
    return value


def _load_model_and_table(args, cfg):
    model_path = Path(args.model) if args.model else None
    if model_path is None:
        raise ConfigError("missing --model")
    emb_path = cfg.embeddings
    if emb_path is None:
        raise ConfigError("missing --embeddings (flag or config [paths] entry)")
    model = models_mod.load_model(model_path)
    if model.spec.num_classes != 2:
        raise PsaError(
            f"model has {model.spec.num_classes} classes; the command-line "
            "pipeline handles binary models only"
        )
    table = load_embeddings(emb_path)
    if table.dim != model.spec.input.dim:
        raise PsaError(
            f"embedding dim {table.dim} does not match model dim "
            f"{model.spec.input.dim}"
        )
    return model, table


def cmd_evaluate(args: argparse.Namespace) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    model, table = _load_model_and_table(args, cfg)
    dataset_path = _require(args, cfg, "dataset", "--dataset")
    dataset = _load_labeled_dataset(dataset_path)
    report = _evaluation_report(model, dataset, table, cfg.max_len)
    name = KIND_DISPLAY.get(model.spec.kind, model.spec.kind)
    named = [(name, report)]
    if cfg.report_out is not None:
        Path(cfg.report_out).write_text(report_json(named) + "\n",
                                        encoding="utf-8")
    sys.stdout.write(render_report(named))
    return 0


def cmd_predict(args: argparse.Namespace) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    model, table = _load_model_and_table(args, cfg)
    if args.text is not None:
        lines = [args.text]
    elif args.input is not None:
        lines = Path(args.input).read_text(encoding="utf-8").splitlines()
    else:
        lines = sys.stdin.read().splitlines()

    x, empty = encode_texts(lines, table, model.spec.input.kind,
                            model.spec.input.max_len)
    for i in empty:
        log.warning("input line %d is empty after preprocessing; "
                    "predicting from the empty encoding", i + 1)
    if len(lines) == 0:
        return 0
    labels, probs = models_mod.predict(model, x)
    for label, dist in zip(labels, probs):
        sys.stdout.write(f"{LABELS[label]}\t{float(dist[0])!r}\t{float(dist[1])!r}\n")
    return 0


def cmd_preprocess(args: argparse.Namespace) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    dataset_path = _require(args, cfg, "dataset", "--dataset")
    dataset = load_dataset(dataset_path)
    out_lines = []
    for r in dataset.reviews:
        tokens = preprocess_pipeline(r.text).tokens
        if not tokens:
            log.warning("review %s is empty after preprocessing", r.id)
        out_lines.append(f"{r.id}\t{' '.join(tokens)}")
    text = "\n".join(out_lines) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8", newline="\n")
    else:
        sys.stdout.write(text)
    return 0


def _setup_logging() -> None:
    levels = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
    level = levels.get(os.environ.get("PSA_LOG", ""), logging.WARNING)
    logging.basicConfig(stream=sys.stderr, level=level,
                        format="%(levelname)s %(name)s: %(message)s")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="psa",
        description="Persian sentiment analysis: train, evaluate, predict, preprocess.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, model_flag=True):
        p.add_argument("--config", help="TOML configuration file")
        p.add_argument("--seed", type=int, help="override split/training seeds")
        p.add_argument("--dataset", help="dataset TSV path")
        p.add_argument("--embeddings", help="word-vector text file")
        p.add_argument("--out", help="primary output path")
        if model_flag:
            p.add_argument("--model", help="model file path")

    p_train = sub.add_parser("train", help="train a model and report test metrics")
    common(p_train)
    p_eval = sub.add_parser("evaluate", help="evaluate a saved model on a dataset")
    common(p_eval)
    p_pred = sub.add_parser("predict", help="label input lines with a saved model")
    common(p_pred)
    p_pred.add_argument("--input", help="file of one text per line (default: stdin)")
    p_pred.add_argument("--text", help="classify a single string")
    p_prep = sub.add_parser("preprocess", help="dump stemmed tokens per review")
    common(p_prep, model_flag=False)
    return parser


_HANDLERS = {
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "predict": cmd_predict,
    "preprocess": cmd_preprocess,
}


def _error_exit(kind: str, exc: Exception, code: int) -> int:
    message = str(exc).replace("\t", " ").replace("\n", " ")
    sys.stderr.write(f"error\t{kind}\t{message}\n")
    return code


def main(argv: list[str] | None = None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        return _HANDLERS[args.command](args)
    except ConfigError as exc:
        return _error_exit("config", exc, 2)
    except (NonFiniteLoss, NonFiniteGradient) as exc:
        return _error_exit("numeric", exc, 4)
    except PsaError as exc:
        return _error_exit(type(exc).__name__, exc, 3)
    except OSError as exc:
        return _error_exit("io", exc, 3)


if __name__ == "__main__":
    sys.exit(main())
