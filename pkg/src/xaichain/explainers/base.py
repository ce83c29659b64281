import json
import re
from dataclasses import dataclass, field

import numpy as np

from ..exceptions import DataFormatError, InvalidArgumentError
from ..validation import MASK_VALUE

EXPLAINER_KINDS = ("lime", "mclime", "cem")
DISPLAY_NAMES = {"lime": "LIME", "mclime": "MC-LIME", "cem": "CEM"}

_FLAT = re.compile(r"^(?P<feature>.+)_InWeek(?P<week>\d+)$")


def flat_name(feature, week):
    return f"{feature}_InWeek{week}"


def split_flat_name(name):
    m = _FLAT.match(name)
    if m is None:
        raise InvalidArgumentError(f"not a weekly feature name: {name!r}")
    return m.group("feature"), int(m.group("week"))


@dataclass(frozen=True)
class Attribution:
    feature: str
    week: int
    score: float

    @property
    def name(self):
        return flat_name(self.feature, self.week)


@dataclass
class Explanation:
    """Output of one explainer for one student.

    ``attributions`` are sorted by absolute score, largest first.
    ``counterfactual_sets`` map flattened feature names to new values.
    ``feature_values`` holds the student's values for the attributed cells.
    """

    explainer_kind: str
    attributions: list = field(default_factory=list)
    counterfactual_sets: list = field(default_factory=list)
    predicted_label: str = "fail"
    confidence: float = 0.5
    feature_values: dict = field(default_factory=dict)
    status: str = "ok"
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.explainer_kind not in EXPLAINER_KINDS:
            raise InvalidArgumentError(f"unknown explainer kind {self.explainer_kind!r}")
        self.attributions = sorted(self.attributions, key=lambda a: -abs(a.score))

    @property
    def display_name(self):
        return DISPLAY_NAMES[self.explainer_kind]

    def feature_names(self):
        """Base feature names referenced anywhere in the explanation."""
        names = [a.feature for a in self.attributions]
        for cf in self.counterfactual_sets:
            names.extend(split_flat_name(k)[0] for k in cf)
        names.extend(split_flat_name(k)[0] for k in self.feature_values)
        return list(dict.fromkeys(names))

    def to_dict(self):
        return {
            "explainer_kind": self.explainer_kind,
            "prediction": {"label": self.predicted_label, "confidence": self.confidence},
            "attributions": [
                {"feature": a.feature, "week": a.week, "score": a.score} for a in self.attributions
            ],
            "counterfactual_sets": [dict(cf) for cf in self.counterfactual_sets],
            "feature_values": dict(self.feature_values),
            "status": self.status,
            "diagnostics": self.diagnostics,
        }

    @classmethod
    def from_dict(cls, d):
        try:
            return cls(
                explainer_kind=d["explainer_kind"],
                attributions=[
                    Attribution(a["feature"], int(a["week"]), float(a["score"])) for a in d["attributions"]
                ],
                counterfactual_sets=[
                    {k: float(v) for k, v in cf.items()} for cf in d.get("counterfactual_sets", [])
                ],
                predicted_label=d["prediction"]["label"],
                confidence=float(d["prediction"]["confidence"]),
                feature_values={k: float(v) for k, v in d.get("feature_values", {}).items()},
                status=d.get("status", "ok"),
                diagnostics=d.get("diagnostics", {}),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise DataFormatError(f"malformed explanation document: {exc}") from exc

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


class BlackBox:
    """Uniform view of a model as a fail-probability function on flat rows."""

    def __init__(self, model, feature_names=None, n_weeks=None, threshold=None, mask_value=None):
        if hasattr(model, "predict_fail_proba"):
            self._fn = model.predict_fail_proba
        elif callable(model):
            self._fn = model
        else:
            raise InvalidArgumentError("model must expose predict_fail_proba or be callable")
        self.feature_names = list(feature_names or getattr(model, "feature_names", None) or [])
        self.n_weeks = n_weeks or getattr(model, "input_weeks", None) or 1
        self.threshold = threshold if threshold is not None else getattr(model, "threshold", 0.5)
        self.mask_value = mask_value if mask_value is not None else getattr(model, "mask_value", MASK_VALUE)

    def __call__(self, Z):
        Z = np.atleast_2d(np.asarray(Z, dtype=np.float64))
        return np.asarray(self._fn(Z), dtype=np.float64).reshape(len(Z))

    def names(self, dim):
        if not self.feature_names:
            self.feature_names = [f"f{j}" for j in range(dim // self.n_weeks)]
        f = len(self.feature_names)
        if f * self.n_weeks != dim:
            raise InvalidArgumentError(f"instance has {dim} cells, model describes {self.n_weeks}x{f}")
        return [(self.feature_names[i % f], i // f + 1) for i in range(dim)]

    def label(self, p):
        return "fail" if p >= self.threshold else "pass"


def flatten_instance(instance):
    x = np.asarray(instance, dtype=np.float64)
    return x.ravel().copy()


def as_rows(X):
    """Flatten a cohort (students, weeks, features) tensor or pass 2-D rows through."""
    X = getattr(X, "values", X)
    X = np.asarray(X, dtype=np.float64)
    return X.reshape(len(X), -1) if X.ndim == 3 else np.atleast_2d(X)


def masked_std(rows, mask_value):
    """Per-column standard deviation over non-mask entries (0 where none)."""
    live = rows != mask_value
    out = np.zeros(rows.shape[1])
    for j in range(rows.shape[1]):
        col = rows[live[:, j], j]
        if col.size:
            out[j] = col.std()
    return out
