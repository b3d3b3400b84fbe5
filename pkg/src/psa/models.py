"""Model assembly, training loops and bit-exact model serialization.

Three architectures are provided: an MLP over mean sentence vectors, an
autoencoder whose 512-wide bottleneck feeds a small classifier head, and a
1-D CNN over padded token-vector sequences (four conv/pool stages with
width-2 filters and 15 feature maps, then dense 5000/500/num_classes).

Trained models serialize to the ``PSAM/1`` container: magic, JSON structural
header, raw little-endian float64 parameter tensors and a trailing CRC-32C.
Round-tripping reproduces parameters bit-exactly.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import nn
from .errors import (
    BadDimension,
    BadMagic,
    ChecksumMismatch,
    EncodingMismatch,
    NonFiniteLoss,
    SequenceTooShort,
    ShapeHeaderMismatch,
    VersionUnsupported,
    WrongModelKind,
)
from .nn import OptimizerConfig
from .rng import Xoshiro256StarStar

MODEL_KINDS = ("mlp", "autoencoder", "autoencoder_classifier", "cnn1d")

CNN_FILTERS = 15
CNN_WIDTH = 2
CNN_POOL = 2
CNN_STAGES = 4
CNN_FC = (5000, 500)
AE_WIDTHS = (1500, 512, 1500)


@dataclass(frozen=True)
class InputDescriptor:
    kind: str            # "mean" | "sequence"
    dim: int             # embedding dimensionality
    max_len: int | None  # sequence rows, None for mean input

    def batch_shape(self, n: int) -> tuple[int, ...]:
        if self.kind == "mean":
            return (n, self.dim)
        return (n, self.max_len, self.dim)


@dataclass
class ModelSpec:
    kind: str
    input: InputDescriptor
    num_classes: int
    layers: list[dict]
    seed: int
    encoder_layers: int = 0   # leading dense layers forming the encoder half
    bottleneck_dim: int = 0


@dataclass
class EpochStats:
    train_loss: float
    valid_loss: float
    valid_accuracy: float | None


@dataclass
class Model:
    spec: ModelSpec
    layers: list
    history: list[EpochStats] = field(default_factory=list)
    epochs_trained: int = 0

    def forward(self, x: np.ndarray) -> np.ndarray:
        return nn.forward_network(self.layers, x)

    def params(self) -> list[np.ndarray]:
        return nn.collect_params(self.layers)


def _check_dims(input_dim: int, num_classes: int) -> None:
    if input_dim < 1:
        raise BadDimension(f"input_dim must be >= 1, got {input_dim}")
    if num_classes < 2:
        raise BadDimension(f"num_classes must be >= 2, got {num_classes}")


def build_mlp(input_dim: int, hidden_sizes=(100,), num_classes: int = 2,
              seed: int = 0) -> Model:
    """Dense relu stack over mean vectors, then a softmax head."""
    _check_dims(input_dim, num_classes)
    rng = Xoshiro256StarStar(seed)
    layers = []
    width = input_dim
    for h in hidden_sizes:
        if h < 1:
            raise BadDimension(f"hidden size must be >= 1, got {h}")
        layers.append(nn.DenseLayer.initialized(rng, width, h, "relu"))
        width = h
    layers.append(nn.DenseLayer.initialized(rng, width, num_classes, "linear"))
    layers.append(nn.SoftmaxLayer())
    spec = ModelSpec(
        kind="mlp",
        input=InputDescriptor("mean", input_dim, None),
        num_classes=num_classes,
        layers=[l.descriptor() for l in layers],
        seed=seed,
    )
    return Model(spec, layers)


def _scaled(width: int, scale: float) -> int:
    return max(1, round(width * scale))


def build_autoencoder(input_dim: int = 300, seed: int = 0, scale: float = 1.0) -> Model:
    """Symmetric dense autoencoder with a 512-wide bottleneck (under scale 1).

    ``scale`` shrinks the hidden widths proportionally for cheap test
    configurations, e.g. scale 0.01 gives the 15/5/15 chain.
    """
    _check_dims(input_dim, 2)
    widths = tuple(_scaled(w, scale) for w in AE_WIDTHS)
    rng = Xoshiro256StarStar(seed)
    layers = [
        nn.DenseLayer.initialized(rng, input_dim, widths[0], "relu"),
        nn.DenseLayer.initialized(rng, widths[0], widths[1], "relu"),
        nn.DenseLayer.initialized(rng, widths[1], widths[2], "relu"),
        nn.DenseLayer.initialized(rng, widths[2], input_dim, "linear"),
    ]
    spec = ModelSpec(
        kind="autoencoder",
        input=InputDescriptor("mean", input_dim, None),
        num_classes=2,
        layers=[l.descriptor() for l in layers],
        seed=seed,
        encoder_layers=2,
        bottleneck_dim=widths[1],
    )
    return Model(spec, layers)


def conv_pool_length_chain(max_len: int, stages: int = CNN_STAGES,
                           width: int = CNN_WIDTH, window: int = CNN_POOL) -> list[int]:
    """Sequence lengths after each conv and pool stage; raises when a stage
    would receive an input shorter than its filter or window."""
    chain = []
    length = max_len
    for stage in range(1, stages + 1):
        if length < width:
            raise SequenceTooShort(
                f"conv stage {stage} needs length >= {width}, got {length}; "
                f"minimum viable max_len is {_min_viable_len(stages, width, window)}"
            )
        length = length - width + 1
        chain.append(length)
        if length < window:
            raise SequenceTooShort(
                f"pool stage {stage} needs length >= {window}, got {length}; "
                f"minimum viable max_len is {_min_viable_len(stages, width, window)}"
            )
        length = length // window
        chain.append(length)
    return chain


def _min_viable_len(stages: int, width: int, window: int) -> int:
    for candidate in range(width, 10_000):
        length = candidate
        ok = True
        for _ in range(stages):
            if length < width:
                ok = False
                break
            length = length - width + 1
            if length < window:
                ok = False
                break
            length = length // window
        if ok:
            return candidate
    raise SequenceTooShort("no viable max_len below 10000")


def build_cnn(max_len: int, dim: int, num_classes: int = 2, seed: int = 0) -> Model:
    """Four conv(width 2, 15 maps)/pool(2) stages, flatten, dense 5000/500,
    softmax head: 11 weighted/pooling layers in total."""
    _check_dims(dim, num_classes)
    chain = conv_pool_length_chain(max_len)
    rng = Xoshiro256StarStar(seed)
    layers = []
    channels = dim
    for _ in range(CNN_STAGES):
        layers.append(nn.Conv1DLayer.initialized(rng, CNN_FILTERS, CNN_WIDTH, channels))
        layers.append(nn.MaxPool1DLayer(CNN_POOL))
        channels = CNN_FILTERS
    layers.append(nn.FlattenLayer())
    flat = chain[-1] * CNN_FILTERS
    width = flat
    for fc in CNN_FC:
        layers.append(nn.DenseLayer.initialized(rng, width, fc, "relu"))
        width = fc
    layers.append(nn.DenseLayer.initialized(rng, width, num_classes, "linear"))
    layers.append(nn.SoftmaxLayer())
    spec = ModelSpec(
        kind="cnn1d",
        input=InputDescriptor("sequence", dim, max_len),
        num_classes=num_classes,
        layers=[l.descriptor() for l in layers],
        seed=seed,
    )
    return Model(spec, layers)


# --- training ----------------------------------------------------------------

def _check_encoding(model: Model, x: np.ndarray, what: str) -> None:
    expected = model.spec.input.batch_shape(x.shape[0] if x.ndim else 0)
    if x.shape != expected:
        raise EncodingMismatch(
            f"{what} inputs shaped {x.shape}, model expects {expected}"
        )


def _epoch_eval(model: Model, x: np.ndarray, targets, objective: str):
    out = model.forward(x)
    if objective == "classification":
        loss = nn.cross_entropy(out, targets)
        accuracy = float(np.mean(out.argmax(axis=1) == targets))
        return loss, accuracy
    return nn.mse(x, out), None


def train(model: Model, train_data, valid_data, optimizer: OptimizerConfig,
          objective: str = "classification") -> Model:
    """Minibatch training with per-epoch validation tracking.

    ``train_data``/``valid_data`` are ``(inputs, labels)`` pairs; labels are
    class indices for classification and ignored for reconstruction.  The
    returned model carries the parameters of the epoch with the lowest
    validation loss (earliest epoch on ties) and a per-epoch history.
    """
    optimizer.validate()
    if objective not in ("classification", "reconstruction"):
        raise ValueError(f"unknown objective {objective!r}")
    x_train, y_train = train_data
    x_valid, y_valid = valid_data
    x_train = np.asarray(x_train, dtype=np.float64)
    x_valid = np.asarray(x_valid, dtype=np.float64)
    _check_encoding(model, x_train, "training")
    _check_encoding(model, x_valid, "validation")
    if len(x_train) == 0 or len(x_valid) == 0:
        raise EncodingMismatch("training and validation sets must be non-empty")
    loss_kind = "cross_entropy" if objective == "classification" else "mse"
    if objective == "classification":
        y_train = np.asarray(y_train, dtype=np.int64)
        y_valid = np.asarray(y_valid, dtype=np.int64)

    params = model.params()
    state = nn.init_optimizer_state(params, optimizer)
    rng = Xoshiro256StarStar(optimizer.seed)
    best_loss = np.inf
    best_params = None
    history: list[EpochStats] = []

    for epoch in range(1, optimizer.epochs + 1):
        order = list(range(len(x_train)))
        rng.shuffle(order)
        total, seen = 0.0, 0
        for lo in range(0, len(order), optimizer.batch_size):
            batch = order[lo : lo + optimizer.batch_size]
            xb = x_train[batch]
            tb = y_train[batch] if loss_kind == "cross_entropy" else xb
            loss, grads = nn.loss_and_gradients(model.layers, xb, tb, loss_kind)
            if not np.isfinite(loss):
                raise NonFiniteLoss(f"epoch {epoch}, batch at {lo}: loss={loss}")
            nn.optimizer_step(params, grads, optimizer, state)
            total += loss * len(batch)
            seen += len(batch)
        valid_loss, valid_acc = _epoch_eval(
            model, x_valid, y_valid if objective == "classification" else None,
            objective,
        )
        history.append(EpochStats(total / seen, valid_loss, valid_acc))
        if valid_loss < best_loss:
            best_loss = valid_loss
            best_params = [p.copy() for p in params]

    for p, best in zip(params, best_params):
        p[...] = best
    model.history = history
    model.epochs_trained = len(history)
    return model


def encode_bottleneck(model: Model, inputs: np.ndarray) -> np.ndarray:
    """Forward through the encoder half only, returning bottleneck codes."""
    if model.spec.encoder_layers == 0:
        raise WrongModelKind(
            f"model kind {model.spec.kind!r} has no encoder/bottleneck"
        )
    x = np.asarray(inputs, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None]
    out = nn.forward_network(model.layers[: model.spec.encoder_layers], x)
    return out[0] if single else out


def train_autoencoder_classifier(train_data, valid_data,
                                 ae_config: OptimizerConfig,
                                 clf_config: OptimizerConfig,
                                 num_classes: int = 2,
                                 hidden_sizes=(100,),
                                 scale: float = 1.0) -> Model:
    """Two-stage recipe: reconstruction pre-training, then a classifier head
    trained on frozen bottleneck codes.

    The returned composite model stacks the (frozen) encoder and the trained
    head, and serializes as a single unit.
    """
    x_train, y_train = train_data
    x_valid, y_valid = valid_data
    x_train = np.asarray(x_train, dtype=np.float64)
    x_valid = np.asarray(x_valid, dtype=np.float64)

    ae = build_autoencoder(x_train.shape[1], seed=ae_config.seed, scale=scale)
    train(ae, (x_train, None), (x_valid, None), ae_config, "reconstruction")

    codes_train = encode_bottleneck(ae, x_train)
    codes_valid = encode_bottleneck(ae, x_valid)
    head = build_mlp(ae.spec.bottleneck_dim, hidden_sizes, num_classes,
                     seed=clf_config.seed)
    train(head, (codes_train, y_train), (codes_valid, y_valid), clf_config,
          "classification")

    encoder = ae.layers[: ae.spec.encoder_layers]
    layers = encoder + head.layers
    spec = ModelSpec(
        kind="autoencoder_classifier",
        input=InputDescriptor("mean", x_train.shape[1], None),
        num_classes=num_classes,
        layers=[l.descriptor() for l in layers],
        seed=ae_config.seed,
        encoder_layers=ae.spec.encoder_layers,
        bottleneck_dim=ae.spec.bottleneck_dim,
    )
    composite = Model(spec, layers, history=list(head.history),
                      epochs_trained=head.epochs_trained)
    return composite


def predict(model: Model, inputs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Class indices (argmax; ties take the lower index) plus distributions."""
    x = np.asarray(inputs, dtype=np.float64)
    single = x.ndim == len(model.spec.input.batch_shape(1)) - 1
    if single:
        x = x[None]
    _check_encoding(model, x, "prediction")
    probs = model.forward(x)
    labels = probs.argmax(axis=1)
    if single:
        return labels[0], probs[0]
    return labels, probs


# --- PSAM/1 serialization ----------------------------------------------------

_MAGIC = b"PSAM"
_VERSION = b"0001"

_CRC_POLY = 0x82F63B78
_crc_base = []
for _i in range(256):
    _c = _i
    for _ in range(8):
        _c = (_c >> 1) ^ _CRC_POLY if _c & 1 else _c >> 1
    _crc_base.append(_c)
_crc_tables = [_crc_base]
for _ in range(7):
    _prev = _crc_tables[-1]
    _crc_tables.append([(_prev[_i] >> 8) ^ _crc_base[_prev[_i] & 0xFF]
                        for _i in range(256)])


def crc32c(data: bytes, crc: int = 0) -> int:
    """CRC-32C (Castagnoli), slicing-by-8."""
    crc ^= 0xFFFFFFFF
    n = len(data) - len(data) % 8
    t0, t1, t2, t3, t4, t5, t6, t7 = _crc_tables
    for (w,) in struct.iter_unpack("<Q", memoryview(data)[:n]):
        w ^= crc
        crc = (t7[w & 0xFF] ^ t6[(w >> 8) & 0xFF] ^ t5[(w >> 16) & 0xFF]
               ^ t4[(w >> 24) & 0xFF] ^ t3[(w >> 32) & 0xFF]
               ^ t2[(w >> 40) & 0xFF] ^ t1[(w >> 48) & 0xFF]
               ^ t0[(w >> 56) & 0xFF])
    for b in memoryview(data)[n:]:
        crc = (crc >> 8) ^ t0[(crc ^ b) & 0xFF]
    return crc ^ 0xFFFFFFFF


def _header_dict(model: Model) -> dict:
    spec = model.spec
    return {
        "kind": spec.kind,
        "num_classes": spec.num_classes,
        "seed": spec.seed,
        "epochs_trained": model.epochs_trained,
        "input": {"kind": spec.input.kind, "dim": spec.input.dim,
                  "max_len": spec.input.max_len},
        "layers": spec.layers,
        "encoder_layers": spec.encoder_layers,
        "bottleneck_dim": spec.bottleneck_dim,
    }


def save_model(model: Model, path: str | Path) -> None:
    """Write the PSAM/1 container; identical models produce identical bytes."""
    out = bytearray()
    out += _MAGIC + _VERSION
    header = json.dumps(_header_dict(model), ensure_ascii=False,
                        separators=(",", ":")).encode("utf-8")
    out += struct.pack("<Q", len(header))
    out += header
    for p in model.params():
        out += struct.pack("<Q", p.ndim)
        for d in p.shape:
            out += struct.pack("<Q", d)
        out += np.ascontiguousarray(p, dtype="<f8").tobytes()
    out += struct.pack("<I", crc32c(bytes(out)))
    Path(path).write_bytes(bytes(out))


def load_model(path: str | Path) -> Model:
    """Read a PSAM/1 container back into a Model, verifying the checksum."""
    blob = Path(path).read_bytes()
    if len(blob) < 8 or blob[:4] != _MAGIC:
        raise BadMagic(f"{path}: not a PSAM file")
    if blob[4:8] != _VERSION:
        raise VersionUnsupported(f"{path}: unsupported version {blob[4:8]!r}")
    if len(blob) < 12:
        raise ChecksumMismatch(f"{path}: truncated file")
    expected = struct.unpack("<I", blob[-4:])[0]
    actual = crc32c(blob[:-4])
    if actual != expected:
        raise ChecksumMismatch(
            f"{path}: checksum {actual:#010x} != stored {expected:#010x}"
        )

    view = memoryview(blob)[8:-4]
    pos = 0

    def take(nbytes: int) -> memoryview:
        nonlocal pos
        if pos + nbytes > len(view):
            raise ShapeHeaderMismatch(f"{path}: parameter data overruns file")
        chunk = view[pos : pos + nbytes]
        pos += nbytes
        return chunk

    (header_len,) = struct.unpack("<Q", take(8))
    try:
        header = json.loads(bytes(take(header_len)).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ShapeHeaderMismatch(f"{path}: bad structural header: {exc}") from None

    layers = [nn.layer_from_descriptor(d) for d in header["layers"]]
    model = Model(
        spec=ModelSpec(
            kind=header["kind"],
            input=InputDescriptor(**header["input"]),
            num_classes=header["num_classes"],
            layers=header["layers"],
            seed=header["seed"],
            encoder_layers=header.get("encoder_layers", 0),
            bottleneck_dim=header.get("bottleneck_dim", 0),
        ),
        layers=layers,
        epochs_trained=header["epochs_trained"],
    )
    for p in model.params():
        (rank,) = struct.unpack("<Q", take(8))
        dims = tuple(struct.unpack("<Q", take(8))[0] for _ in range(rank))
        if dims != p.shape:
            raise ShapeHeaderMismatch(
                f"{path}: tensor dims {dims} do not match descriptor shape {p.shape}"
            )
        count = int(np.prod(dims)) if dims else 1
        data = np.frombuffer(take(count * 8), dtype="<f8").reshape(dims)
        p[...] = data
    if pos != len(view):
        raise ShapeHeaderMismatch(f"{path}: {len(view) - pos} trailing bytes")
    return model
