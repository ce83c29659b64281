import json
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ..exceptions import DataFormatError, InvalidArgumentError
from ..validation import MASK_VALUE


class MinMaxTensorScaler(TransformerMixin, BaseEstimator):
    """Min-max scale each feature of a (students, weeks, features) tensor.

    Bounds are taken over all students and weeks, ignoring entries equal to
    ``mask_value``; those entries pass through unchanged. A constant feature
    maps to 0.

    Parameters
    ----------
    mask_value : float, default=-1.0
    clip : bool, default=True
        Clip transformed values of unseen data into [0, 1].
    """

    def __init__(self, mask_value=MASK_VALUE, clip=True):
        self.mask_value = mask_value
        self.clip = clip

    def fit(self, X, y=None):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 3:
            raise InvalidArgumentError(f"expected a 3-axis tensor, got shape {X.shape}")
        live = X != self.mask_value
        if not np.all(np.isfinite(X[live])):
            raise InvalidArgumentError("tensor has non-finite values outside mask positions")
        f = X.shape[2]
        self.data_min_ = np.zeros(f)
        self.data_max_ = np.zeros(f)
        for j in range(f):
            col = X[:, :, j][live[:, :, j]]
            if col.size:
                self.data_min_[j], self.data_max_[j] = col.min(), col.max()
        self.n_features_in_ = f
        return self

    def transform(self, X):
        check_is_fitted(self, "data_min_")
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 3 or X.shape[2] != self.n_features_in_:
            raise InvalidArgumentError(f"expected (*, *, {self.n_features_in_}) tensor, got {X.shape}")
        span = self.data_max_ - self.data_min_
        safe = np.where(span > 0, span, 1.0)
        with np.errstate(over="ignore"):  # subnormal spans
            out = np.where(span > 0, (X - self.data_min_) / safe, 0.0)
        if self.clip:
            out = np.clip(out, 0.0, 1.0)
        return np.where(X == self.mask_value, self.mask_value, out)


@dataclass
class FeatureTensor:
    """Normalized (students, weeks, features) behavior tensor."""

    values: np.ndarray
    feature_names: list
    mask_value: float = MASK_VALUE
    per_feature_bounds: list = field(default_factory=list)
    student_ids: list = field(default_factory=list)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 3:
            raise InvalidArgumentError(f"values must be 3-axis, got {self.values.shape}")
        if self.values.shape[2] != len(self.feature_names):
            raise InvalidArgumentError("feature_names length does not match the feature axis")
        if not self.student_ids:
            self.student_ids = [f"s{i}" for i in range(self.values.shape[0])]
        if len(self.student_ids) != self.values.shape[0]:
            raise InvalidArgumentError("student_ids length does not match the student axis")

    @property
    def shape(self):
        return self.values.shape

    @property
    def num_weeks(self):
        return self.values.shape[1]

    def row(self, student_id):
        return self.values[self.index_of(student_id)]

    def index_of(self, student_id):
        try:
            return self.student_ids.index(student_id)
        except ValueError:
            raise InvalidArgumentError(f"unknown student {student_id!r}") from None

    def flat_names(self):
        """Names of the flattened week-major columns, e.g. ``number_sessions_InWeek5``."""
        return [f"{n}_InWeek{w + 1}" for w in range(self.num_weeks) for n in self.feature_names]

    def to_dict(self):
        return {
            "shape": list(self.values.shape),
            "mask_value": self.mask_value,
            "feature_names": list(self.feature_names),
            "student_ids": list(self.student_ids),
            "per_feature_bounds": [list(map(float, b)) for b in self.per_feature_bounds],
            "values": self.values.ravel().tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        try:
            values = np.asarray(d["values"], dtype=np.float64).reshape(d["shape"])
            return cls(
                values,
                list(d["feature_names"]),
                float(d["mask_value"]),
                [tuple(b) for b in d.get("per_feature_bounds", [])],
                list(d.get("student_ids", [])),
            )
        except (KeyError, ValueError) as exc:
            raise DataFormatError(f"malformed tensor document: {exc}") from exc

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def normalize_tensor(raw, mask_value=MASK_VALUE, feature_names=None, student_ids=None):
    """Min-max normalize ``raw`` into a :class:`FeatureTensor`."""
    raw = np.asarray(raw, dtype=np.float64)
    scaler = MinMaxTensorScaler(mask_value=mask_value).fit(raw)
    names = list(feature_names) if feature_names is not None else [f"f{j}" for j in range(raw.shape[2])]
    return FeatureTensor(
        scaler.transform(raw),
        names,
        mask_value,
        list(zip(scaler.data_min_.tolist(), scaler.data_max_.tolist())),
        list(student_ids) if student_ids is not None else [],
    )
