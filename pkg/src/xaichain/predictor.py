"""Pass/fail predictor: a masked logistic classifier over weekly features.

The model scores the flattened (weeks x features) matrix; cells equal to
the mask value contribute nothing. Outputs are the probability of *failing*.
Anything exposing ``predict_fail_proba`` on flattened rows can stand in for
it (a recurrent model, for instance).
"""

import json
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import expit
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.model_selection import train_test_split
from sklearn.utils.validation import check_is_fitted

from .exceptions import DataFormatError, InvalidArgumentError, TrainingDegenerateError
from .validation import MASK_VALUE, check_binary_labels, check_tensor


def _unmask(X, mask_value):
    return np.where(X == mask_value, 0.0, X)


def loss_and_grad(params, X, y, l2):
    """Mean logistic loss plus ``l2/2 * ||w||^2`` (bias unpenalized).

    ``params`` is ``[w..., b]``; ``X`` is already unmasked, shape (n, d).
    """
    w, b = params[:-1], params[-1]
    z = X @ w + b
    # log(1 + e^z) - y z, computed stably
    loss = np.mean(np.logaddexp(0.0, z) - y * z) + 0.5 * l2 * (w @ w)
    r = expit(z) - y
    grad = np.empty_like(params)
    grad[:-1] = X.T @ r / len(y) + l2 * w
    grad[-1] = r.mean()
    return loss, grad


class LogisticSequenceClassifier(ClassifierMixin, BaseEstimator):
    """Full-batch gradient-descent logistic regression on masked sequences.

    Parameters
    ----------
    learning_rate : float, default=1.0
    epochs : int, default=500
    l2 : float, default=1e-3
    threshold : float, default=0.5
        A student is predicted to fail when the fail probability reaches it.
    mask_value : float, default=-1.0
    """

    def __init__(self, learning_rate=1.0, epochs=500, l2=1e-3, threshold=0.5, mask_value=MASK_VALUE):
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.l2 = l2
        self.threshold = threshold
        self.mask_value = mask_value

    def _flat(self, X):
        X = check_tensor(X)
        return _unmask(X.reshape(len(X), -1), self.mask_value)

    def fit(self, X, y):
        if self.learning_rate <= 0 or self.epochs <= 0 or self.l2 < 0:
            raise InvalidArgumentError("learning_rate and epochs must be positive, l2 non-negative")
        X = check_tensor(X)
        y = check_binary_labels(y, len(X))
        if len(np.unique(y)) < 2:
            raise TrainingDegenerateError("training labels contain a single class")
        Z = self._flat(X)
        params = np.zeros(Z.shape[1] + 1)
        curve = []
        for _ in range(self.epochs):
            loss, grad = loss_and_grad(params, Z, y, self.l2)
            curve.append(loss)
            params -= self.learning_rate * grad
        curve.append(loss_and_grad(params, Z, y, self.l2)[0])
        self.coef_ = params[:-1].reshape(X.shape[1:])
        self.intercept_ = float(params[-1])
        self.loss_curve_ = curve
        self.classes_ = np.array([0, 1])
        self.n_weeks_, self.n_features_in_ = X.shape[1], X.shape[2]
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "coef_")
        p = expit(self._flat(X) @ self.coef_.ravel() + self.intercept_)
        return np.column_stack([1.0 - p, p])

    def predict(self, X):
        return (self.predict_proba(X)[:, 1] >= self.threshold).astype(np.int64)

    def to_model_spec(self, feature_names=None, train_config=None, metrics=None):
        check_is_fitted(self, "coef_")
        return ModelSpec(
            input_weeks=self.n_weeks_,
            num_features=self.n_features_in_,
            weights=self.coef_.copy(),
            bias=self.intercept_,
            threshold=self.threshold,
            mask_value=self.mask_value,
            feature_names=list(feature_names) if feature_names is not None else [],
            train_config=train_config or {},
            metrics=metrics or {},
        )


@dataclass
class ModelSpec:
    """A fitted predictor: per (week, feature) weights plus bias."""

    input_weeks: int
    num_features: int
    weights: np.ndarray
    bias: float = 0.0
    threshold: float = 0.5
    mask_value: float = MASK_VALUE
    feature_names: list = field(default_factory=list)
    train_config: dict = field(default_factory=dict)
    metrics: dict = field(default_factory=dict)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64).reshape(self.input_weeks, self.num_features)
        if not np.all(np.isfinite(self.weights)) or not np.isfinite(self.bias):
            raise InvalidArgumentError("weights must be finite")
        if not 0.0 < self.threshold < 1.0:
            raise InvalidArgumentError("threshold must lie in (0, 1)")
        if self.feature_names and len(self.feature_names) != self.num_features:
            raise InvalidArgumentError("feature_names length does not match num_features")

    @property
    def dim(self):
        return self.input_weeks * self.num_features

    def predict_fail_proba(self, X):
        """Fail probabilities for flattened rows of shape (n, weeks*features)."""
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[-1] != self.dim:
            raise InvalidArgumentError(f"expected {self.dim} columns, got {X.shape[-1]}")
        return expit(_unmask(X, self.mask_value) @ self.weights.ravel() + self.bias)

    def to_dict(self):
        d = asdict(self)
        d["weights"] = self.weights.tolist()
        return d

    @classmethod
    def from_dict(cls, d):
        try:
            return cls(**d)
        except TypeError as exc:
            raise DataFormatError(f"malformed model checkpoint: {exc}") from exc

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_json())

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1.0
    epochs: int = 500
    l2: float = 1e-3
    seed: int = 0
    split: tuple = (0.8, 0.1, 0.1)

    def __post_init__(self):
        if self.learning_rate <= 0 or self.epochs <= 0 or self.l2 < 0:
            raise InvalidArgumentError("invalid optimizer settings")
        if len(self.split) != 3 or min(self.split) < 0 or not np.isclose(sum(self.split), 1.0):
            raise InvalidArgumentError("split fractions must be three non-negatives summing to 1")


def split_indices(labels, split, seed):
    """Stratified train/val/test index arrays."""
    idx = np.arange(len(labels))
    train_frac, val_frac, test_frac = split
    strat = labels if min(np.bincount(labels, minlength=2)) >= 2 else None
    if val_frac + test_frac == 0:
        return idx, idx[:0], idx[:0]
    train, rest = train_test_split(idx, train_size=train_frac, random_state=seed, stratify=strat)
    if test_frac == 0:
        return np.sort(train), np.sort(rest), idx[:0]
    if val_frac == 0:
        return np.sort(train), idx[:0], np.sort(rest)
    rest_strat = labels[rest] if strat is not None and min(np.bincount(labels[rest], minlength=2)) >= 2 else None
    val, test = train_test_split(
        rest, train_size=val_frac / (val_frac + test_frac), random_state=seed, stratify=rest_strat
    )
    return np.sort(train), np.sort(val), np.sort(test)


def train(tensor, labels, cfg=TrainConfig()):
    """Fit on the training split of ``tensor`` and return a :class:`ModelSpec`.

    Balanced accuracy on the validation and test splits is stored in
    ``metrics`` (``None`` when a split lacks one of the classes).
    """
    values = tensor.values if hasattr(tensor, "values") else np.asarray(tensor)
    mask_value = getattr(tensor, "mask_value", MASK_VALUE)
    y = check_binary_labels(labels, len(values), name="labels")
    if len(np.unique(y)) < 2:
        raise TrainingDegenerateError("labels contain a single class")
    tr, va, te = split_indices(y, cfg.split, cfg.seed)
    if len(np.unique(y[tr])) < 2:
        raise TrainingDegenerateError("training split contains a single class")
    clf = LogisticSequenceClassifier(cfg.learning_rate, cfg.epochs, cfg.l2, mask_value=mask_value)
    clf.fit(values[tr], y[tr])

    metrics = {"train_loss": float(clf.loss_curve_[-1])}
    for name, part in (("train", tr), ("val", va), ("test", te)):
        yp = clf.predict(values[part]) if len(part) else np.array([], dtype=int)
        metrics[f"{name}_balanced_accuracy"] = (
            balanced_accuracy(yp, y[part]) if len(np.unique(y[part])) == 2 else None
        )
    cfg_dict = asdict(cfg)
    cfg_dict["split"] = list(cfg.split)
    return clf.to_model_spec(getattr(tensor, "feature_names", None), cfg_dict, metrics)


def predict(model, student):
    """Fail probability of one student's (weeks x features) matrix."""
    student = np.asarray(student, dtype=np.float64)
    if student.shape != (model.input_weeks, model.num_features):
        raise InvalidArgumentError(
            f"expected shape {(model.input_weeks, model.num_features)}, got {student.shape}"
        )
    return float(model.predict_fail_proba(student.ravel())[0])


def predict_label(model, student):
    """``(label, confidence)`` with label ``"fail"``/``"pass"`` and confidence ``max(p, 1-p)``."""
    p = predict(model, student)
    return ("fail" if p >= model.threshold else "pass"), max(p, 1.0 - p)


def balanced_accuracy(predictions, labels):
    """Mean of the per-class recalls."""
    yp = np.asarray(predictions)
    yt = np.asarray(labels)
    if yp.shape != yt.shape or yt.ndim != 1:
        raise InvalidArgumentError("predictions and labels must be equal-length 1-D sequences")
    if len(np.unique(yt)) < 2:
        raise InvalidArgumentError("labels must contain both classes")
    return float(np.mean([np.mean(yp[yt == c] == c) for c in (0, 1)]))
