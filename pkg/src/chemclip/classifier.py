"""Activity classifiers trained on frozen embeddings (one per domain)."""
from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .exceptions import ConfigError, FormatError, Undefined
from .metrics import ClassificationReport, auc_roc, best_f1_threshold, classification_metrics
from .model import _mlp_from, read_container, write_container
from .nn import AdamW, Mlp, init_mlp, mlp_backward, mlp_forward
from .rng import SplitMix64

log = logging.getLogger(__name__)

HIDDEN = (128, 64)


def pos_weight(labels) -> float:
    """Inactive-to-active ratio of the training labels."""
    labels = np.asarray(labels, dtype=bool)
    n_pos = int(labels.sum())
    if n_pos == 0:
        raise Undefined("pos_weight needs at least one active example")
    return (len(labels) - n_pos) / n_pos


def _softplus(z):
    return np.logaddexp(0.0, z)


def sigmoid(z):
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def weighted_bce(logits, labels, weight: float):
    """Mean of ``-[w y log s(z) + (1-y) log(1-s(z))]`` and its gradient w.r.t. ``logits``."""
    z = np.asarray(logits, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    n = z.size
    loss = np.sum(weight * y * _softplus(-z) + (1.0 - y) * _softplus(z)) / n
    s = sigmoid(z)
    grad = (weight * y * (s - 1.0) + (1.0 - y) * s) / n
    return float(loss), grad


@dataclass
class ClassifierConfig:
    epochs: int = 50
    batch_size: int = 128
    lr: float = 1e-3
    weight_decay: float = 0.01
    patience: int = 10
    seed: int = 0

    def __post_init__(self):
        for name in ("epochs", "batch_size", "lr", "patience"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"classifier {name} must be positive")

    @classmethod
    def from_dict(cls, doc: dict) -> "ClassifierConfig":
        unknown = set(doc) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown classifier option(s): {', '.join(sorted(unknown))}")
        return cls(**doc)

    def to_dict(self) -> dict:
        return asdict(self)


class ActivityClassifier(ClassifierMixin, BaseEstimator):
    """Three weight layers (d -> 128 -> 64 -> 1) on frozen embeddings.

    Trained with AdamW on a positive-class-weighted BCE; the decision
    threshold is tuned for F1 on the validation split after training.
    Training stops early after ``patience`` epochs without a validation AUC
    improvement and keeps the best-AUC weights.
    """

    def __init__(self, epochs=50, batch_size=128, lr=1e-3, weight_decay=0.01, patience=10, seed=0):
        self.epochs = epochs
        self.batch_size = batch_size
        self.lr = lr
        self.weight_decay = weight_decay
        self.patience = patience
        self.seed = seed

    def fit(self, X, y, X_val=None, y_val=None):
        cfg = ClassifierConfig(**self.get_params())
        X, y = check_X_y(X, y, dtype=np.float64)
        y = np.asarray(y).astype(bool)
        if X_val is None:
            X_val, y_val = X, y
        X_val = check_array(X_val, dtype=np.float64)
        y_val = np.asarray(y_val).astype(bool)
        self.classes_ = np.array([False, True])
        self.n_features_in_ = X.shape[1]
        self.pos_weight_ = pos_weight(y)
        rng = SplitMix64(cfg.seed)
        mlp = init_mlp((X.shape[1], *HIDDEN, 1), rng.next_u64())
        opt = AdamW(mlp.parameters(), lr=cfg.lr, weight_decay=cfg.weight_decay)
        shuffle = rng.spawn()
        best_auc, best_params, stale = -math.inf, [p.copy() for p in mlp.parameters()], 0
        self.history_ = []
        for epoch in range(cfg.epochs):
            order = shuffle.permutation(len(y))
            total = 0.0
            for start in range(0, len(y), cfg.batch_size):
                idx = order[start:start + cfg.batch_size]
                out, cache = mlp_forward(mlp, X[idx], training=False)
                loss, g = weighted_bce(out[:, 0], y[idx], self.pos_weight_)
                grads, _ = mlp_backward(mlp, cache, g[:, None])
                opt.step(grads)
                total += loss * len(idx)
            try:
                val_auc = auc_roc(self._logits(mlp, X_val), y_val)
            except Undefined:
                val_auc = -total / len(y)
            self.history_.append({"epoch": epoch, "train_loss": total / len(y), "val_auc": val_auc})
            if val_auc > best_auc:
                best_auc, stale = val_auc, 0
                best_params = [p.copy() for p in mlp.parameters()]
            else:
                stale += 1
                if stale >= cfg.patience:
                    log.info("early stop at epoch %d (best val AUC %.4f)", epoch + 1, best_auc)
                    break
        for p, best in zip(mlp.parameters(), best_params):
            p[...] = best
        self.mlp_ = mlp
        t = best_f1_threshold(self.predict_proba(X_val)[:, 1], y_val)
        # probabilities live in [0, 1]; map the infinite sentinels to equivalent finite cut-offs
        self.threshold_ = 0.0 if t == -math.inf else float(np.nextafter(1.0, 2.0)) if t == math.inf else t
        return self

    @staticmethod
    def _logits(mlp: Mlp, X) -> np.ndarray:
        return mlp_forward(mlp, X, training=False)[0][:, 0]

    def decision_function(self, X) -> np.ndarray:
        check_is_fitted(self, "mlp_")
        return self._logits(self.mlp_, check_array(X, dtype=np.float64))

    def predict_proba(self, X) -> np.ndarray:
        p = sigmoid(self.decision_function(X))
        return np.column_stack([1.0 - p, p])

    def predict(self, X) -> np.ndarray:
        return self.predict_proba(X)[:, 1] >= self.threshold_

    def evaluate(self, X, y) -> ClassificationReport:
        return classification_metrics(self.predict_proba(X)[:, 1], np.asarray(y, dtype=bool),
                                      self.threshold_)

    def save(self, path) -> None:
        check_is_fitted(self, "mlp_")
        trailer = {"kind": "classifier", "config": self.get_params(),
                   "threshold": self.threshold_, "pos_weight": self.pos_weight_,
                   "hidden": list(HIDDEN)}
        write_container(path, self.mlp_.named_parameters("mlp."), trailer)

    @classmethod
    def load(cls, path) -> "ActivityClassifier":
        tensors, trailer = read_container(path)
        if trailer.get("kind") != "classifier":
            raise FormatError(f"{path}: not a classifier checkpoint")
        clf = cls(**trailer["config"])
        clf.mlp_ = _mlp_from(tensors, "mlp.", 0.0)
        clf.threshold_ = float(trailer["threshold"])
        clf.pos_weight_ = float(trailer["pos_weight"])
        clf.classes_ = np.array([False, True])
        clf.n_features_in_ = clf.mlp_.dims[0]
        return clf
