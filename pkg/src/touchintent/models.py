"""Touch-intention classifiers, cross-validation and feature ablation.

Two models are provided: a brute-force k-nearest-neighbours store and a
5-10-1 sigmoid network trained by full-batch gradient descent on binary
cross-entropy. Both operate on the masked columns of the five-feature
vector; label 1 means intentional.
"""

from dataclasses import dataclass, field
import json
import math

import numpy as np

from .features import FEATURE_NAMES, ScalingParams

MODEL_FORMAT_VERSION = 1

ABLATION_MASKS = (
    "TS,HP,HS,GA,GS",
    "TS,HP,HS,GA",
    "TS,HP,GA,GS",
    "TS,HP,GA",
    "TS,HP",
    "TS",
    "HP",
)


class ModelError(ValueError):
    pass


class ParameterError(ModelError):
    pass


class TrainingError(ModelError):
    pass


class ModelFormatError(ModelError):
    pass


@dataclass(frozen=True)
class FeatureMask:
    flags: tuple  # five booleans in TS, HP, HS, GA, GS order

    def __post_init__(self):
        if len(self.flags) != len(FEATURE_NAMES):
            raise ParameterError("mask needs one flag per feature")
        if not any(self.flags):
            raise ParameterError("mask must select at least one feature")

    @classmethod
    def parse(cls, text):
        names = [n.strip().upper() for n in text.split(",") if n.strip()]
        unknown = set(names) - set(FEATURE_NAMES)
        if unknown:
            raise ParameterError(f"unknown feature names: {sorted(unknown)}")
        return cls(tuple(n in names for n in FEATURE_NAMES))

    @classmethod
    def full(cls):
        return cls((True,) * len(FEATURE_NAMES))

    @property
    def columns(self):
        return [i for i, f in enumerate(self.flags) if f]

    @property
    def gated(self):
        """Distances are touch-gated only when the touch signal itself is a feature."""
        return self.flags[0]

    def __str__(self):
        return ",".join(n for n, f in zip(FEATURE_NAMES, self.flags) if f)


@dataclass
class LabeledDataset:
    """Feature rows and labels. ``X_ungated`` holds the same frames with
    distance features computed without touch gating (for masks without TS)."""

    X: np.ndarray
    y: np.ndarray
    X_ungated: np.ndarray = None
    groups: np.ndarray = None

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float).reshape(-1, len(FEATURE_NAMES))
        self.y = np.asarray(self.y, dtype=np.int64)
        if self.X.shape[0] != self.y.shape[0]:
            raise ModelError("rows and labels differ in length")
        if self.X_ungated is not None:
            self.X_ungated = np.asarray(self.X_ungated, dtype=float).reshape(self.X.shape)

    @property
    def n_samples(self):
        return len(self.y)

    def matrix(self, mask):
        X = self.X if mask.gated or self.X_ungated is None else self.X_ungated
        return X[:, mask.columns]

    def subset(self, idx):
        return LabeledDataset(self.X[idx], self.y[idx],
                              None if self.X_ungated is None else self.X_ungated[idx],
                              None if self.groups is None else self.groups[idx])

    def class_counts(self):
        pos = int(self.y.sum())
        return {"intentional": pos, "unintentional": self.n_samples - pos}


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int = 0
    tn: int = 0
    fp: int = 0
    fn: int = 0

    @classmethod
    def from_labels(cls, y_true, y_pred):
        y_true = np.asarray(y_true).astype(bool)
        y_pred = np.asarray(y_pred).astype(bool)
        return cls(tp=int(np.sum(y_true & y_pred)), tn=int(np.sum(~y_true & ~y_pred)),
                   fp=int(np.sum(~y_true & y_pred)), fn=int(np.sum(y_true & ~y_pred)))

    def __add__(self, other):
        return ConfusionMatrix(self.tp + other.tp, self.tn + other.tn,
                               self.fp + other.fp, self.fn + other.fn)

    @property
    def total(self):
        return self.tp + self.tn + self.fp + self.fn

    @property
    def accuracy(self):
        return (self.tp + self.tn) / self.total if self.total else float("nan")

    def as_row(self):
        """Counts in TP, TN, FP, FN order."""
        return (self.tp, self.tn, self.fp, self.fn)


# ---------------------------------------------------------------- kNN

@dataclass
class KnnModel:
    rows: np.ndarray
    labels: np.ndarray
    k: int
    mask: FeatureMask
    scaling: ScalingParams = None
    metadata: dict = field(default_factory=dict)

    kind = "knn"

    def predict(self, x):
        """(label, intentional vote fraction) for one masked feature row."""
        labels, votes = _knn_vote(self.rows, self.labels, self.k, np.asarray(x, dtype=float)[None, :])
        return int(labels[0]), float(votes[0])

    def predict_batch(self, X):
        return _knn_vote(self.rows, self.labels, self.k, np.asarray(X, dtype=float))


def _sq_distances(rows, queries):
    # column-by-column accumulation keeps the arithmetic identical for
    # single and batched queries
    D = np.zeros((queries.shape[0], rows.shape[0]))
    for c in range(rows.shape[1]):
        diff = queries[:, c, None] - rows[None, :, c]
        D += diff * diff
    return D


def _knn_vote(rows, labels, k, queries):
    D = _sq_distances(rows, queries)
    radius = np.partition(D, k - 1, axis=1)[:, k - 1]
    # every row tied with the k-th nearest votes
    voters = D <= radius[:, None]
    n_voters = voters.sum(axis=1)
    pos = (voters & (labels[None, :] == 1)).sum(axis=1)
    votes = pos / n_voters
    # strict majority; a split vote falls back to unintentional
    pred = (2 * pos > n_voters).astype(np.int64)
    return pred, votes


def knn_fit(data, mask, k=11, scaling=None):
    if not isinstance(k, (int, np.integer)) or k < 1 or k % 2 == 0:
        raise ParameterError(f"k must be a positive odd integer, got {k}")
    if k > data.n_samples:
        raise ParameterError(f"k={k} exceeds the {data.n_samples} training rows")
    return KnnModel(rows=data.matrix(mask).copy(), labels=data.y.copy(), k=int(k),
                    mask=mask, scaling=scaling)


def knn_predict(model, x):
    return model.predict(x)


# ---------------------------------------------------------------- MLP

def sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def softplus(z):
    return np.logaddexp(0.0, z)


@dataclass
class MlpModel:
    W1: np.ndarray   # (hidden, n_in)
    b1: np.ndarray   # (hidden,)
    W2: np.ndarray   # (1, hidden)
    b2: np.ndarray   # (1,)
    mask: FeatureMask
    scaling: ScalingParams = None
    metadata: dict = field(default_factory=dict)

    kind = "mlp"

    @property
    def n_inputs(self):
        return self.W1.shape[1]

    def params(self):
        return [self.W1, self.b1, self.W2, self.b2]

    def logits(self, X):
        H = sigmoid(X @ self.W1.T + self.b1)
        return (H @ self.W2.T + self.b2)[:, 0], H

    def scores(self, X):
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.n_inputs:
            raise ModelError(f"expected rows of {self.n_inputs} masked features, got shape {X.shape}")
        return sigmoid(self.logits(X)[0])

    def predict(self, x):
        s = float(self.scores(np.asarray(x, dtype=float)[None, :])[0])
        return int(s >= 0.5), s

    def predict_batch(self, X):
        s = self.scores(X)
        return (s >= 0.5).astype(np.int64), s


def mlp_init(n_inputs, hidden=10, seed=0):
    rng = np.random.default_rng(seed)
    return (rng.uniform(-0.5, 0.5, (hidden, n_inputs)), rng.uniform(-0.5, 0.5, hidden),
            rng.uniform(-0.5, 0.5, (1, hidden)), rng.uniform(-0.5, 0.5, 1))


def mlp_loss_and_grads(model, X, y):
    """Mean binary cross-entropy and its gradients w.r.t. (W1, b1, W2, b2)."""
    n = X.shape[0]
    z, H = model.logits(X)
    loss = float(np.mean(softplus(z) - y * z))
    dz = (sigmoid(z) - y) / n
    gW2 = dz[None, :] @ H
    gb2 = np.array([dz.sum()])
    dH = dz[:, None] * model.W2[0][None, :]
    dA = dH * H * (1.0 - H)
    gW1 = dA.T @ X
    gb1 = dA.sum(axis=0)
    return loss, [gW1, gb1, gW2, gb2]


def mlp_train(data, mask, epochs=2000, learning_rate=0.5, seed=0, hidden=10, scaling=None):
    y = data.y.astype(float)
    if y.min() == y.max():
        raise TrainingError("both classes must be present to train")
    X = data.matrix(mask)
    model = MlpModel(*mlp_init(X.shape[1], hidden, seed), mask=mask, scaling=scaling)
    history = []
    for epoch in range(epochs):
        # overflow on the way to a NaN loss is reported below, not warned about
        with np.errstate(over="ignore", invalid="ignore"):
            loss, grads = mlp_loss_and_grads(model, X, y)
            if not math.isfinite(loss):
                raise TrainingError(f"loss diverged at epoch {epoch} (lr={learning_rate}, "
                                    f"last finite loss={history[-1] if history else None})")
            history.append(loss)
            for p, g in zip(model.params(), grads):
                p -= learning_rate * g
    final_loss, _ = mlp_loss_and_grads(model, X, y)
    pred, _ = model.predict_batch(X)
    model.metadata.update(epochs=epochs, learning_rate=learning_rate, seed=seed,
                          final_loss=final_loss,
                          train_accuracy=float(np.mean(pred == data.y)))
    model.metadata["loss_history"] = history
    return model


def mlp_predict(model, x):
    return model.predict(x)


# ---------------------------------------------------------------- evaluation

@dataclass(frozen=True)
class KnnSpec:
    k: int = 11

    name = property(lambda self: f"kNN (k={self.k})")

    def fit(self, data, mask, seed=0):
        return knn_fit(data, mask, self.k)


@dataclass(frozen=True)
class MlpSpec:
    epochs: int = 2000
    learning_rate: float = 0.5
    hidden: int = 10

    name = property(lambda self: f"NN [n,{self.hidden},1]")

    def fit(self, data, mask, seed=0):
        return mlp_train(data, mask, self.epochs, self.learning_rate, seed, self.hidden)


@dataclass(frozen=True)
class CvResult:
    mask: FeatureMask
    model: str
    accuracy: float
    fold_accuracies: tuple
    confusion: ConfusionMatrix
    folds: int
    seed: int


def _fold_split(n, folds, seed, y):
    rng = np.random.default_rng(seed)
    for attempt in range(2):
        perm = rng.permutation(n)
        parts = np.array_split(perm, folds)
        ok = all(len(p) > 0 for p in parts)
        for p in parts:
            train = np.setdiff1d(perm, p)
            if len(np.unique(y[train])) < 2:
                ok = False
        if ok:
            return parts
    raise ModelError("a training split lacks one class even after resampling")


def cross_validate(data, mask, spec, folds=5, seed=0):
    """Shuffled k-fold evaluation; accuracies averaged, confusion counts pooled."""
    if folds < 2:
        raise ParameterError("need at least two folds")
    if data.n_samples < folds:
        raise ParameterError("fewer samples than folds")
    parts = _fold_split(data.n_samples, folds, seed, data.y)
    pooled = ConfusionMatrix()
    accs = []
    for i, test in enumerate(parts):
        train = np.sort(np.concatenate([p for j, p in enumerate(parts) if j != i]))
        model = spec.fit(data.subset(train), mask, seed=seed + i)
        pred, _ = model.predict_batch(data.matrix(mask)[test])
        cm = ConfusionMatrix.from_labels(data.y[test], pred)
        pooled = pooled + cm
        accs.append(cm.accuracy)
    return CvResult(mask=mask, model=spec.name, accuracy=float(np.mean(accs)),
                    fold_accuracies=tuple(accs), confusion=pooled, folds=folds, seed=seed)


def ablation_study(data, masks, specs, folds=5, seed=0):
    if len(masks) < 2:
        raise ParameterError("an ablation needs at least two masks")
    rows = [cross_validate(data, m, s, folds, seed) for m in masks for s in specs]
    return sorted(rows, key=lambda r: -r.accuracy)


# ---------------------------------------------------------------- model files

def save_model(model, path):
    doc = {
        "format_version": MODEL_FORMAT_VERSION,
        "kind": model.kind,
        "mask": str(model.mask),
        "scaling": None if model.scaling is None else model.scaling.to_dict(),
        "metadata": {k: v for k, v in model.metadata.items() if k != "loss_history"},
    }
    if model.kind == "knn":
        doc.update(k=model.k, rows=model.rows.tolist(), labels=model.labels.tolist())
    else:
        doc.update(W1=model.W1.tolist(), b1=model.b1.tolist(),
                   W2=model.W2.tolist(), b2=model.b2.tolist())
    with open(path, "w") as f:
        json.dump(doc, f)
        f.write("\n")


def load_model(path):
    try:
        with open(path) as f:
            doc = json.load(f)
    except json.JSONDecodeError as e:
        raise ModelFormatError(f"{path}: not a model file ({e})") from None
    if not isinstance(doc, dict) or doc.get("format_version") != MODEL_FORMAT_VERSION:
        raise ModelFormatError(f"{path}: unsupported model format_version "
                               f"{doc.get('format_version') if isinstance(doc, dict) else None!r}")
    mask = FeatureMask.parse(doc["mask"])
    scaling = None if doc.get("scaling") is None else ScalingParams.from_dict(doc["scaling"])
    meta = doc.get("metadata", {})
    if doc["kind"] == "knn":
        rows = np.asarray(doc["rows"], dtype=float).reshape(-1, len(mask.columns))
        return KnnModel(rows=rows, labels=np.asarray(doc["labels"], dtype=np.int64),
                        k=int(doc["k"]), mask=mask, scaling=scaling, metadata=meta)
    if doc["kind"] == "mlp":
        return MlpModel(W1=np.asarray(doc["W1"], dtype=float), b1=np.asarray(doc["b1"], dtype=float),
                        W2=np.asarray(doc["W2"], dtype=float), b2=np.asarray(doc["b2"], dtype=float),
                        mask=mask, scaling=scaling, metadata=meta)
    raise ModelFormatError(f"{path}: unknown model kind {doc['kind']!r}")
