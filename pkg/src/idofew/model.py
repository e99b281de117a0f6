"""A small encoder + softmax-head classifier trained with Adam, in numpy.

The encoder (affine map followed by ReLU) is the part carried across stages;
the head is swapped whenever the label space changes.
"""

from __future__ import annotations

import struct
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from .errors import DimensionMismatch, LabelOutOfRange, ValidationError

PARAM_ORDER = ("W1", "b1", "W2", "b2")
CHECKPOINT_MAGIC = b"IDFWCKPT"
CHECKPOINT_VERSION = 1
_HEADER = struct.Struct("<8sIIII")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 10
    batch_size: int = 64
    learning_rate: float = 1e-3
    optimizer: str = "adam"
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ValidationError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValidationError("batch_size must be >= 1")
        if not self.learning_rate > 0:
            raise ValidationError("learning_rate must be > 0")
        if self.optimizer != "adam":
            raise ValidationError(f"unsupported optimizer {self.optimizer!r}")

    def with_seed(self, seed: int) -> "TrainConfig":
        return replace(self, seed=seed)

    def to_dict(self) -> dict:
        return asdict(self)


class Classifier:
    """ReLU encoder (input_dim -> hidden_dim) followed by a linear head."""

    def __init__(self, params: dict[str, np.ndarray]):
        self.params = params
        self.input_dim, self.hidden_dim = params["W1"].shape
        self.n_classes = params["W2"].shape[1]
        if self.n_classes < 2:
            raise ValidationError("a classifier needs at least 2 classes")

    def copy(self) -> "Classifier":
        return Classifier({k: v.copy() for k, v in self.params.items()})

    def _check_input(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.input_dim:
            raise DimensionMismatch(f"model expects dim {self.input_dim}, got {X.shape[1]}")
        return X

    def encode(self, X) -> np.ndarray:
        X = self._check_input(X)
        return np.maximum(X @ self.params["W1"] + self.params["b1"], 0.0)

    def logits(self, X) -> np.ndarray:
        return self.encode(X) @ self.params["W2"] + self.params["b2"]

    def predict_proba(self, X) -> np.ndarray:
        return softmax(self.logits(X))

    def predict(self, X) -> np.ndarray:
        return np.argmax(self.logits(X), axis=1)

    def loss_and_grads(self, X, y) -> tuple[float, dict[str, np.ndarray]]:
        """Mean cross-entropy and its gradient with respect to every parameter."""
        X = self._check_input(X)
        W1, b1, W2, b2 = (self.params[k] for k in PARAM_ORDER)
        pre = X @ W1 + b1
        h = np.maximum(pre, 0.0)
        z = h @ W2 + b2
        logp = log_softmax(z)
        n = X.shape[0]
        loss = -float(logp[np.arange(n), y].mean())

        dz = np.exp(logp)
        dz[np.arange(n), y] -= 1.0
        dz /= n
        dh = dz @ W2.T
        dpre = dh * (pre > 0)
        grads = {
            "W1": X.T @ dpre,
            "b1": dpre.sum(0),
            "W2": h.T @ dz,
            "b2": dz.sum(0),
        }
        return loss, grads


def log_softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


def softmax(z: np.ndarray) -> np.ndarray:
    return np.exp(log_softmax(z))


def _head(hidden_dim: int, n_classes: int, rng: np.random.Generator) -> dict[str, np.ndarray]:
    return {
        "W2": rng.standard_normal((hidden_dim, n_classes)) / np.sqrt(hidden_dim),
        "b2": np.zeros(n_classes),
    }


def new_classifier(input_dim: int, hidden_dim: int = 128, n_classes: int = 2, seed: int = 0) -> Classifier:
    if min(input_dim, hidden_dim, n_classes) < 1:
        raise ValidationError("dimensions must be positive")
    rng = np.random.default_rng(seed)
    params = {
        "W1": rng.standard_normal((input_dim, hidden_dim)) / np.sqrt(input_dim),
        "b1": np.zeros(hidden_dim),
    }
    params.update(_head(hidden_dim, n_classes, rng))
    return Classifier(params)


def reset_head(model: Classifier, new_n_classes: int, seed: int = 0) -> Classifier:
    if new_n_classes < 2:
        raise ValidationError("new_n_classes must be >= 2")
    params = {"W1": model.params["W1"].copy(), "b1": model.params["b1"].copy()}
    params.update(_head(model.hidden_dim, new_n_classes, np.random.default_rng(seed)))
    return Classifier(params)


class Adam:
    def __init__(self, lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}
        self.t = 0

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for k in PARAM_ORDER:
            g = grads[k]
            if k not in self.m:
                self.m[k] = np.zeros_like(g)
                self.v[k] = np.zeros_like(g)
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * g * g
            params[k] -= self.lr * (self.m[k] / bc1) / (np.sqrt(self.v[k] / bc2) + self.eps)


def train(model: Classifier, X, labels, cfg: TrainConfig) -> tuple[Classifier, list[float]]:
    """Fit a copy of `model`; returns it with the mean loss of each epoch."""
    X = model._check_input(X)
    y = np.asarray(labels, dtype=np.int64)
    if y.shape != (X.shape[0],):
        raise DimensionMismatch("labels and rows differ in count")
    if y.size and (y.min() < 0 or y.max() >= model.n_classes):
        raise LabelOutOfRange(f"labels must lie in [0, {model.n_classes})")
    if y.size == 0:
        raise ValidationError("no training rows")

    fitted = model.copy()
    opt = Adam(cfg.learning_rate)
    rng = np.random.default_rng(cfg.seed)
    trace = []
    for _ in range(cfg.epochs):
        order = rng.permutation(len(y))
        total = 0.0
        for lo in range(0, len(y), cfg.batch_size):
            idx = order[lo:lo + cfg.batch_size]
            loss, grads = fitted.loss_and_grads(X[idx], y[idx])
            opt.step(fitted.params, grads)
            total += loss * len(idx)
        trace.append(total / len(y))
    return fitted, trace


def predict(model: Classifier, X) -> np.ndarray:
    return model.predict(X)


def save_checkpoint(model: Classifier, path: str | Path) -> None:
    """Header (magic, version, input/hidden/class dims) then float64 LE params."""
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
                              model.input_dim, model.hidden_dim, model.n_classes))
        for k in PARAM_ORDER:
            fh.write(np.ascontiguousarray(model.params[k], dtype="<f8").tobytes())


def load_checkpoint(path: str | Path) -> Classifier:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ValidationError("checkpoint truncated")
    magic, version, d_in, d_h, n_c = _HEADER.unpack_from(raw)
    if magic != CHECKPOINT_MAGIC:
        raise ValidationError("not a classifier checkpoint")
    if version != CHECKPOINT_VERSION:
        raise ValidationError(f"unsupported checkpoint version {version}")
    shapes = {"W1": (d_in, d_h), "b1": (d_h,), "W2": (d_h, n_c), "b2": (n_c,)}
    offset = _HEADER.size
    params = {}
    for k in PARAM_ORDER:
        count = int(np.prod(shapes[k]))
        arr = np.frombuffer(raw, dtype="<f8", count=count, offset=offset)
        params[k] = arr.reshape(shapes[k]).astype(np.float64)
        offset += 8 * count
    if offset != len(raw):
        raise ValidationError("checkpoint size does not match its header")
    return Classifier(params)
