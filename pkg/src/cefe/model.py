"""Hashed character n-gram features and a linear softmax classifier trained
with symmetric cross entropy.

For a predicted distribution p and a one-hot target y (class t):

    CE  = -log p_t                        (p_t floored at PROB_FLOOR)
    RCE = -sum_k p_k log y_k              with log 0 clamped to A < 0
        = -A * (1 - p_t)
    SCE = mu * CE + beta * RCE

With respect to the logits z the gradient of SCE is
``(mu - beta * A * p_t) * (p - y)`` (the CE part vanishes while the floor
is active).
"""

from __future__ import annotations

import json
import math
import zlib
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, IoError, MissingClass, SchemaError, ShapeError

PROB_FLOOR = 1e-12
DEFAULT_DIM = 2**18
NGRAM_ORDERS = (1, 2, 3)
CHECKPOINT_VERSION = 1


# ---------------------------------------------------------------------------
# features


@dataclass(frozen=True)
class FeatureVector:
    """Sparse vector: sorted unique ``indices`` into ``[0, dim)`` with ``values``."""

    indices: np.ndarray
    values: np.ndarray
    dim: int

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.values))

    def to_dense(self) -> np.ndarray:
        x = np.zeros(self.dim)
        x[self.indices] = self.values
        return x

    @classmethod
    def from_dense(cls, x) -> "FeatureVector":
        x = np.asarray(x, dtype=float)
        idx = np.flatnonzero(x)
        return cls(idx, x[idx], x.size)


def _bucket(gram: str, dim: int) -> int:
    # crc32 is stable across processes, unlike hash()
    return zlib.crc32(gram.encode("utf-8")) & (dim - 1)


def featurize(text: str, dim: int = DEFAULT_DIM) -> FeatureVector:
    """Counts of character 1-3 grams hashed into ``dim`` buckets, L2-normalised."""
    if dim <= 0 or dim & (dim - 1):
        raise ConfigError(f"feature dimension must be a power of two, got {dim}")
    counts: dict[int, float] = {}
    for n in NGRAM_ORDERS:
        for i in range(len(text) - n + 1):
            b = _bucket(f"{n}\x1f{text[i:i + n]}", dim)
            counts[b] = counts.get(b, 0.0) + 1.0
    if not counts:
        return FeatureVector(np.zeros(0, dtype=np.int64), np.zeros(0), dim)
    idx = np.fromiter(sorted(counts), dtype=np.int64, count=len(counts))
    val = np.array([counts[i] for i in idx.tolist()])
    return FeatureVector(idx, val / np.linalg.norm(val), dim)


@dataclass(frozen=True)
class LabeledFeature:
    features: FeatureVector
    target: int


# ---------------------------------------------------------------------------
# losses


@dataclass(frozen=True)
class SCEConfig:
    mu: float = 0.1
    beta: float = 1.0
    clamp: float = -4.0

    def __post_init__(self):
        if self.mu < 0 or self.beta < 0:
            raise ConfigError("mu and beta must be non-negative")
        if self.mu == 0 and self.beta == 0:
            raise ConfigError("mu and beta cannot both be zero")
        if not self.clamp < 0:
            raise ConfigError("the log-zero clamp must be negative")


def _check_target(p: np.ndarray, target: int) -> None:
    if not 0 <= target < p.shape[-1]:
        raise ShapeError(f"target {target} out of range for {p.shape[-1]} classes")


def ce_loss(p, target: int) -> float:
    p = np.asarray(p, dtype=float)
    _check_target(p, target)
    return -math.log(max(p[target], PROB_FLOOR))


def rce_loss(p, target: int, clamp: float = -4.0) -> float:
    p = np.asarray(p, dtype=float)
    _check_target(p, target)
    # log q is 0 on the target and the clamp elsewhere
    log_q = np.full(p.shape, clamp)
    log_q[target] = 0.0
    return float(-np.dot(p, log_q))


def sce_loss(p, target: int, cfg: SCEConfig = SCEConfig()) -> float:
    return cfg.mu * ce_loss(p, target) + cfg.beta * rce_loss(p, target, cfg.clamp)


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


# ---------------------------------------------------------------------------
# model


@dataclass
class SoftmaxModel:
    weights: np.ndarray  # (K, D)
    bias: np.ndarray  # (K,)

    @classmethod
    def zeros(cls, num_classes: int, dim: int) -> "SoftmaxModel":
        return cls(np.zeros((num_classes, dim)), np.zeros(num_classes))

    @property
    def num_classes(self) -> int:
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return self.weights.shape[1]

    def copy(self) -> "SoftmaxModel":
        return SoftmaxModel(self.weights.copy(), self.bias.copy())

    def logits(self, x: FeatureVector) -> np.ndarray:
        if x.dim != self.dim:
            raise ShapeError(f"feature dimension {x.dim} does not match model dimension {self.dim}")
        return self.weights[:, x.indices] @ x.values + self.bias


def predict(model: SoftmaxModel, features: FeatureVector) -> np.ndarray:
    """Class distribution softmax(Wx + b)."""
    return softmax(model.logits(features))


def predict_many(model: SoftmaxModel, items) -> np.ndarray:
    return np.array([predict(model, x) for x in items]).reshape(-1, model.num_classes)


def batch_loss(model: SoftmaxModel, batch, cfg: SCEConfig) -> float:
    """Mean SCE over ``batch`` (the finite-difference oracle evaluates this)."""
    return math.fsum(sce_loss(predict(model, it.features), it.target, cfg) for it in batch) / len(batch)


def _stack(batch, dim):
    """Dense design matrix over the columns the batch touches."""
    cols = np.unique(np.concatenate([it.features.indices for it in batch]))
    X = np.zeros((len(batch), cols.size))
    for r, it in enumerate(batch):
        if it.features.dim != dim:
            raise ShapeError(f"feature dimension {it.features.dim} does not match model dimension {dim}")
        X[r, np.searchsorted(cols, it.features.indices)] = it.features.values
    y = np.array([it.target for it in batch])
    return cols, X, y


def _sparse_grad(model, batch, cfg):
    cols, X, y = _stack(batch, model.dim)
    if np.any(y < 0) or np.any(y >= model.num_classes):
        raise ShapeError("target out of range")
    P = softmax(X @ model.weights[:, cols].T + model.bias)
    rows = np.arange(len(batch))
    p_t = P[rows, y]
    Y = np.zeros_like(P)
    Y[rows, y] = 1.0
    coef = np.where(p_t >= PROB_FLOOR, cfg.mu, 0.0) - cfg.beta * cfg.clamp * p_t
    G = coef[:, None] * (P - Y) / len(batch)
    return cols, G.T @ X, G.sum(axis=0)


@dataclass
class Gradient:
    weights: np.ndarray
    bias: np.ndarray


def grad_sce(model: SoftmaxModel, batch, cfg: SCEConfig = SCEConfig()) -> Gradient:
    """Analytic gradient of the mean SCE loss over ``batch``."""
    batch = list(batch)
    if not batch:
        raise ValueError("empty batch")
    cols, gW, gb = _sparse_grad(model, batch, cfg)
    W = np.zeros_like(model.weights)
    W[:, cols] = gW
    return Gradient(W, gb)


def numeric_grad(model: SoftmaxModel, batch, cfg: SCEConfig, eps: float = 1e-6) -> Gradient:
    """Central finite differences of ``batch_loss`` over every parameter."""
    out = Gradient(np.zeros_like(model.weights), np.zeros_like(model.bias))
    for param, grad in ((model.weights, out.weights), (model.bias, out.bias)):
        flat, gflat = param.reshape(-1), grad.reshape(-1)
        for i in range(flat.size):
            old = flat[i]
            flat[i] = old + eps
            up = batch_loss(model, batch, cfg)
            flat[i] = old - eps
            down = batch_loss(model, batch, cfg)
            flat[i] = old
            gflat[i] = (up - down) / (2 * eps)
    return out


def relative_error(a: Gradient, b: Gradient) -> float:
    va = np.concatenate([a.weights.ravel(), a.bias])
    vb = np.concatenate([b.weights.ravel(), b.bias])
    denom = np.linalg.norm(va) + np.linalg.norm(vb)
    return float(np.linalg.norm(va - vb) / denom) if denom > 0 else 0.0


def gradcheck(trials: int = 100, seed: int = 0, max_dim: int = 64, max_classes: int = 4) -> dict:
    """Compare ``grad_sce`` with finite differences on random small problems."""
    rng = np.random.default_rng(seed)
    errors = []
    for _ in range(trials):
        K = int(rng.integers(2, max_classes + 1))
        D = int(2 ** rng.integers(2, int(math.log2(max_dim)) + 1))
        model = SoftmaxModel(rng.normal(0, 0.5, (K, D)), rng.normal(0, 0.5, K))
        batch = []
        for _ in range(int(rng.integers(1, 9))):
            x = rng.normal(size=D) * (rng.random(D) < 0.5)
            if not x.any():
                x[0] = 1.0
            batch.append(LabeledFeature(FeatureVector.from_dense(x / np.linalg.norm(x)), int(rng.integers(K))))
        cfg = SCEConfig(mu=float(rng.uniform(0, 2)), beta=float(rng.choice([0.0, rng.uniform(0, 2)])), clamp=float(-rng.uniform(0.5, 8)))
        if cfg.mu == 0 and cfg.beta == 0:
            cfg = SCEConfig()
        errors.append(relative_error(grad_sce(model, batch, cfg), numeric_grad(model, batch, cfg)))
    return {"trials": trials, "seed": seed, "max_relative_error": max(errors), "mean_relative_error": float(np.mean(errors))}


# ---------------------------------------------------------------------------
# training


@dataclass
class TrainConfig:
    epochs: int = 30
    batch_size: int = 32
    learning_rate: float = 2.0
    seed: int = 0
    oversample: bool = False
    lr_decay: float = 0.05  # epoch e uses learning_rate / (1 + lr_decay * e)

    def __post_init__(self):
        if self.lr_decay < 0:
            raise ConfigError("lr_decay must be non-negative")
        if self.epochs < 1:
            raise ConfigError("epochs must be at least 1")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be at least 1")
        if not self.learning_rate > 0:
            raise ConfigError("learning_rate must be positive")


def oversample(items, rng: np.random.Generator, num_classes: int | None = None, key=None) -> list:
    """Duplicate minority-class items (with replacement) up to the majority count.

    Originals come first in their input order, followed by the drawn
    duplicates class by class.
    """
    items = list(items)
    key = key or (lambda it: it.target)
    labels = [int(key(it)) for it in items]
    k = num_classes if num_classes is not None else (max(labels) + 1 if labels else 0)
    by_class = [[i for i, lab in enumerate(labels) if lab == c] for c in range(k)]
    missing = [c for c, members in enumerate(by_class) if not members]
    if not items or missing:
        raise MissingClass(f"classes without examples: {missing or 'all'}")
    top = max(len(m) for m in by_class)
    out = list(items)
    for members in by_class:
        if len(members) < top:
            draw = rng.choice(members, size=top - len(members), replace=True)
            out.extend(items[int(i)] for i in draw)
    return out


@dataclass
class TrainResult:
    model: SoftmaxModel
    loss_trace: list = field(default_factory=list)


def train(data, tc: TrainConfig, sce: SCEConfig = SCEConfig(), num_classes: int | None = None,
          init: SoftmaxModel | None = None) -> TrainResult:
    """Mini-batch gradient descent on mean SCE loss.

    ``init`` warm-starts from an existing model (pre-train, then fine-tune).
    The returned trace holds the full-data mean loss after each epoch.
    """
    data = list(data)
    if not data:
        raise ValueError("no training data")
    rng = np.random.default_rng(tc.seed)
    k = num_classes or (init.num_classes if init is not None else max(it.target for it in data) + 1)
    present = {it.target for it in data}
    if len(present) < 2:
        raise MissingClass("training needs at least two classes")
    if tc.oversample:
        data = oversample(data, rng, k)
    dim = data[0].features.dim
    model = init.copy() if init is not None else SoftmaxModel.zeros(k, dim)
    if model.dim != dim or model.num_classes != k:
        raise ShapeError("initial model does not match data dimensions")

    trace = []
    for epoch in range(tc.epochs):
        lr = tc.learning_rate / (1.0 + tc.lr_decay * epoch)
        order = rng.permutation(len(data))
        for start in range(0, len(data), tc.batch_size):
            batch = [data[i] for i in order[start : start + tc.batch_size]]
            cols, gW, gb = _sparse_grad(model, batch, sce)
            model.weights[:, cols] -= lr * gW
            model.bias -= lr * gb
        trace.append(batch_loss(model, data, sce))
    return TrainResult(model, trace)


def accuracy(model: SoftmaxModel, data) -> float:
    data = list(data)
    hits = sum(int(np.argmax(predict(model, it.features))) == it.target for it in data)
    return hits / len(data)


# ---------------------------------------------------------------------------
# checkpoints: one .npz with a JSON header plus the weight arrays


def save_checkpoint(model: SoftmaxModel, path, seed: int = 0, sce: SCEConfig = SCEConfig(), extra=None) -> None:
    header = {
        "version": CHECKPOINT_VERSION,
        "K": model.num_classes,
        "D": model.dim,
        "seed": seed,
        "sce": asdict(sce),
        **(extra or {}),
    }
    try:
        with open(path, "wb") as fh:
            np.savez_compressed(fh, header=np.array(json.dumps(header, sort_keys=True)), weights=model.weights, bias=model.bias)
    except OSError as exc:
        raise IoError(f"cannot write checkpoint {path}: {exc}") from exc


def load_checkpoint(path) -> tuple[SoftmaxModel, dict]:
    path = Path(path)
    try:
        with np.load(path, allow_pickle=False) as z:
            header = json.loads(str(z["header"]))
            model = SoftmaxModel(z["weights"].copy(), z["bias"].copy())
    except (OSError, ValueError, KeyError) as exc:
        raise IoError(f"cannot read checkpoint {path}: {exc}") from exc
    if header.get("version") != CHECKPOINT_VERSION:
        raise SchemaError(f"unsupported checkpoint version {header.get('version')!r}")
    if (header["K"], header["D"]) != model.weights.shape:
        raise SchemaError("checkpoint header does not match weight shape")
    return model, header
