"""Two-layer MLP detector head, trained with Adam on binary cross-entropy.

The model is p = sigmoid(w2 . relu(w1 x + b1) + b2); attack is the positive
class. Training shuffles every epoch, optionally interleaves horizontally
flipped feature rows next to their originals, and keeps the epoch with the
best holdout accuracy (ties resolved toward the earlier epoch).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import (
    DimensionMismatch,
    MissingFeatures,
    MissingFile,
    ParseError,
    ShapeMismatch,
    SingleClassTrainingSet,
)
from .manifest import Label, SampleRecord
from .rng import SplitMix64, derive_seed, fnv1a64

MODEL_MAGIC = b"MKMD"
MODEL_VERSION = 1
FLIP_SUFFIX = "#flip"
P_CLAMP = 1e-7


@dataclass
class TrainConfig:
    learning_rate: float = 1e-4
    epochs: int = 30
    batch_size: int = 16
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    hidden_dim: int = 64
    holdout_fraction: float = 0.1
    augment_flip: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must each be >= 1")
        if not 0.0 < self.holdout_fraction < 1.0:
            raise ValueError("holdout_fraction must lie in (0, 1)")

    def as_text(self) -> str:
        return (f"lr={self.learning_rate!r} epochs={self.epochs}"
                f" batch_size={self.batch_size} adam_beta1={self.adam_beta1!r}"
                f" adam_beta2={self.adam_beta2!r} adam_eps={self.adam_eps!r}"
                f" hidden_dim={self.hidden_dim}"
                f" holdout_fraction={self.holdout_fraction!r}"
                f" augment_flip={self.augment_flip} seed={self.seed}")

    def digest(self) -> str:
        return f"{fnv1a64(self.as_text().encode('utf-8')):016x}"


@dataclass
class DetectorModel:
    w1: np.ndarray  # (hidden, input)
    b1: np.ndarray  # (hidden,)
    w2: np.ndarray  # (hidden,)
    b2: float
    descriptor_id: str

    @property
    def input_dim(self) -> int:
        return self.w1.shape[1]

    @property
    def hidden_dim(self) -> int:
        return self.w1.shape[0]

    def forward(self, x: np.ndarray) -> np.ndarray:
        """Attack probabilities for a (n, input_dim) batch."""
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 1:
            x = x[None, :]
        if x.shape[1] != self.input_dim:
            raise DimensionMismatch(
                f"model expects {self.input_dim} inputs, got {x.shape[1]}")
        hidden = np.maximum(x @ self.w1.T + self.b1, 0.0)
        logits = hidden @ self.w2 + self.b2
        return _sigmoid(logits)

    def score(self, x: np.ndarray) -> float:
        return float(self.forward(np.asarray(x, dtype=np.float64)[None, :])[0])


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    expz = np.exp(z[~pos])
    out[~pos] = expz / (1.0 + expz)
    return out


def init_model(input_dim: int, hidden_dim: int, descriptor_id: str,
               rng: SplitMix64) -> DetectorModel:
    """Glorot-uniform weights (row-major draw order), zero biases."""
    def draw(fan_in: int, fan_out: int, shape: tuple[int, ...]) -> np.ndarray:
        a = np.sqrt(6.0 / (fan_in + fan_out))
        flat = np.array([rng.uniform(-a, a) for _ in range(int(np.prod(shape)))])
        return flat.reshape(shape)

    return DetectorModel(
        w1=draw(input_dim, hidden_dim, (hidden_dim, input_dim)),
        b1=np.zeros(hidden_dim),
        w2=draw(hidden_dim, 1, (hidden_dim,)),
        b2=0.0,
        descriptor_id=descriptor_id,
    )


def bce_loss(p, y):
    """Elementwise binary cross-entropy and its gradient in p.

    Probabilities are clamped to [1e-7, 1-1e-7] first, so the loss and the
    gradient (p - y) / (p (1 - p)) stay finite. Scalars in, scalars out.
    """
    scalar = np.isscalar(p) or getattr(p, "ndim", 0) == 0
    p = np.clip(np.asarray(p, dtype=np.float64), P_CLAMP, 1.0 - P_CLAMP)
    y = np.asarray(y, dtype=np.float64)
    loss = -(y * np.log(p) + (1.0 - y) * np.log(1.0 - p))
    dloss_dp = (p - y) / (p * (1.0 - p))
    if scalar:
        return float(loss), float(dloss_dp)
    return loss, dloss_dp


def loss_and_gradients(model: DetectorModel, x: np.ndarray, y: np.ndarray):
    """Mean BCE over the batch and its gradients w.r.t. all parameters."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = x.shape[0]
    z1 = x @ model.w1.T + model.b1
    a1 = np.maximum(z1, 0.0)
    z2 = a1 @ model.w2 + model.b2
    p = _sigmoid(z2)
    losses, _ = bce_loss(p, y)
    loss = float(np.mean(losses))
    # d(mean BCE)/dz2 = (p - y) / n; the p(1-p) factors cancel with sigmoid'
    dz2 = (p - y) / n
    dw2 = a1.T @ dz2
    db2 = float(np.sum(dz2))
    da1 = dz2[:, None] * model.w2[None, :]
    dz1 = da1 * (z1 > 0)
    dw1 = dz1.T @ x
    db1 = dz1.sum(axis=0)
    return loss, {"w1": dw1, "b1": db1, "w2": dw2, "b2": db2}


@dataclass
class AdamState:
    m: dict[str, np.ndarray | float] = field(default_factory=dict)
    v: dict[str, np.ndarray | float] = field(default_factory=dict)
    t: int = 0


def adam_step(model: DetectorModel, grads: dict, state: AdamState,
              lr: float, beta1: float = 0.9, beta2: float = 0.999,
              eps: float = 1e-8) -> None:
    """One bias-corrected Adam update, in place; eps sits outside the sqrt."""
    state.t += 1
    t = state.t
    for name in ("w1", "b1", "w2", "b2"):
        g = grads[name]
        param = getattr(model, name)
        if np.shape(g) != np.shape(param):
            raise ShapeMismatch(
                f"gradient for {name} has shape {np.shape(g)},"
                f" parameter has {np.shape(param)}")
        m = state.m.get(name, 0.0)
        v = state.v.get(name, 0.0)
        m = beta1 * m + (1.0 - beta1) * g
        v = beta2 * v + (1.0 - beta2) * (g * g if isinstance(g, float) else g ** 2)
        state.m[name] = m
        state.v[name] = v
        m_hat = m / (1.0 - beta1 ** t)
        v_hat = v / (1.0 - beta2 ** t)
        update = lr * m_hat / (np.sqrt(v_hat) + eps)
        if name == "b2":
            model.b2 -= float(update)
        else:
            current = getattr(model, name)
            setattr(model, name, current - update)


def build_dataset(records: list[SampleRecord], features: dict[str, np.ndarray],
                  augment_flip: bool = False):
    """Assemble (ids, x, y) in manifest order; flip rows follow their originals."""
    ids: list[str] = []
    rows: list[np.ndarray] = []
    labels: list[float] = []
    for record in records:
        if record.sample_id not in features:
            raise MissingFeatures(record.sample_id)
        y = 1.0 if record.label is Label.ATTACK else 0.0
        ids.append(record.sample_id)
        rows.append(features[record.sample_id])
        labels.append(y)
        flip_id = record.sample_id + FLIP_SUFFIX
        if augment_flip and flip_id in features:
            ids.append(flip_id)
            rows.append(features[flip_id])
            labels.append(y)
    if not rows:
        raise MissingFeatures("<empty training set>")
    return ids, np.stack(rows).astype(np.float64), np.array(labels)


def holdout_accuracy(model: DetectorModel, x: np.ndarray, y: np.ndarray) -> float:
    """Fraction correct at threshold 0.5; p >= 0.5 classifies as attack."""
    p = model.forward(x)
    predicted = (p >= 0.5).astype(np.float64)
    return float(np.mean(predicted == np.asarray(y, dtype=np.float64)))


@dataclass
class EpochRow:
    epoch: int
    train_loss: float
    holdout_acc: float


@dataclass
class TrainResult:
    model: DetectorModel
    log: list[EpochRow]
    best_epoch: int
    best_accuracy: float
    config: TrainConfig


def _snapshot(model: DetectorModel) -> DetectorModel:
    return replace(model, w1=model.w1.copy(), b1=model.b1.copy(), w2=model.w2.copy())


def train(train_x: np.ndarray, train_y: np.ndarray,
          holdout_x: np.ndarray, holdout_y: np.ndarray,
          config: TrainConfig, descriptor_id: str) -> TrainResult:
    train_x = np.asarray(train_x, dtype=np.float64)
    train_y = np.asarray(train_y, dtype=np.float64)
    if len(np.unique(train_y)) < 2:
        raise SingleClassTrainingSet(
            "training set needs both bona fide and attack samples")
    rng_init = SplitMix64(derive_seed(config.seed, "init"))
    model = init_model(train_x.shape[1], config.hidden_dim, descriptor_id, rng_init)
    state = AdamState()
    rng_shuffle = SplitMix64(derive_seed(config.seed, "shuffle"))

    log: list[EpochRow] = []
    best_epoch = -1
    best_acc = -1.0
    best_model = _snapshot(model)
    n = train_x.shape[0]
    for epoch in range(1, config.epochs + 1):
        order = list(range(n))
        rng_shuffle.shuffle(order)
        loss_sum = 0.0
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            loss, grads = loss_and_gradients(model, train_x[idx], train_y[idx])
            loss_sum += loss * len(idx)
            adam_step(model, grads, state, config.learning_rate,
                      config.adam_beta1, config.adam_beta2, config.adam_eps)
        acc = (holdout_accuracy(model, holdout_x, holdout_y)
               if len(holdout_x) else float("nan"))
        log.append(EpochRow(epoch, loss_sum / n, acc))
        if len(holdout_x):
            if acc > best_acc:
                best_acc = acc
                best_epoch = epoch
                best_model = _snapshot(model)
        else:
            best_epoch = epoch
            best_model = _snapshot(model)
    if not len(holdout_x):
        best_acc = float("nan")
    return TrainResult(best_model, log, best_epoch, best_acc, config)


def save_train_log(result: TrainResult, path: str | Path) -> None:
    lines = [f"# config {result.config.as_text()}",
             f"# config_digest={result.config.digest()}",
             f"# best_epoch={result.best_epoch} best_accuracy={result.best_accuracy!r}",
             "epoch,train_loss,holdout_accuracy"]
    for row in result.log:
        lines.append(f"{row.epoch},{row.train_loss!r},{row.holdout_acc!r}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _pack_str(value: str) -> bytes:
    encoded = value.encode("utf-8")
    return struct.pack("<I", len(encoded)) + encoded


def save_model(result: TrainResult, path: str | Path) -> None:
    """Binary model file: dims, float64 parameter blocks, selection metadata."""
    model = result.model
    with Path(path).open("wb") as fh:
        fh.write(MODEL_MAGIC)
        fh.write(struct.pack("<I", MODEL_VERSION))
        fh.write(_pack_str(model.descriptor_id))
        fh.write(struct.pack("<II", model.input_dim, model.hidden_dim))
        fh.write(np.ascontiguousarray(model.w1, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(model.b1, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(model.w2, dtype="<f8").tobytes())
        fh.write(struct.pack("<d", model.b2))
        fh.write(struct.pack("<id", result.best_epoch, result.best_accuracy))
        fh.write(struct.pack("<Q", result.config.seed & 0xFFFFFFFFFFFFFFFF))
        fh.write(_pack_str(result.config.digest()))


def load_model(path: str | Path) -> tuple[DetectorModel, dict]:
    path = Path(path)
    if not path.is_file():
        raise MissingFile(f"model file not found: {path}")
    blob = path.read_bytes()
    if blob[:4] != MODEL_MAGIC:
        raise ParseError(f"bad magic in model file {path}")
    (version,) = struct.unpack_from("<I", blob, 4)
    if version != MODEL_VERSION:
        raise ParseError(f"unsupported model file version {version}")
    offset = 8
    (id_len,) = struct.unpack_from("<I", blob, offset)
    offset += 4
    descriptor_id = blob[offset:offset + id_len].decode("utf-8")
    offset += id_len
    input_dim, hidden_dim = struct.unpack_from("<II", blob, offset)
    offset += 8

    def block(count: int) -> np.ndarray:
        nonlocal offset
        arr = np.frombuffer(blob, dtype="<f8", count=count, offset=offset).copy()
        offset += 8 * count
        return arr

    w1 = block(hidden_dim * input_dim).reshape(hidden_dim, input_dim)
    b1 = block(hidden_dim)
    w2 = block(hidden_dim)
    (b2,) = struct.unpack_from("<d", blob, offset)
    offset += 8
    best_epoch, best_accuracy = struct.unpack_from("<id", blob, offset)
    offset += 12
    (seed,) = struct.unpack_from("<Q", blob, offset)
    offset += 8
    (digest_len,) = struct.unpack_from("<I", blob, offset)
    offset += 4
    digest = blob[offset:offset + digest_len].decode("utf-8")
    meta = {"best_epoch": best_epoch, "best_accuracy": best_accuracy,
            "seed": seed, "config_digest": digest}
    return DetectorModel(w1, b1, w2, b2, descriptor_id), meta
