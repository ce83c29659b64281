"""Local surrogate explanations from Gaussian perturbations.

Samples are drawn around the instance, weighted by an exponential kernel on
their (scaled) euclidean distance, and a ridge-regularized weighted linear
model is fitted to the black box's output for the predicted class. The
surrogate's coefficients are the attributions.
"""

from dataclasses import asdict, dataclass

import numpy as np
from sklearn.base import BaseEstimator

from ..exceptions import InvalidArgumentError, NumericalFailureError
from ..validation import MASK_VALUE, active_mask, check_unit_interval
from .base import Attribution, BlackBox, Explanation, as_rows, flat_name, flatten_instance, masked_std

# spread of a uniformly distributed [0, 1] feature, used without a reference cohort
_UNIFORM_STD = 1.0 / np.sqrt(12.0)


@dataclass(frozen=True)
class LimeConfig:
    num_samples: int = 5000
    kernel_width: float = None  # None: 0.75 * sqrt(active dimensionality)
    num_top_features: int = 20
    distance: str = "euclidean"
    perturbation: str = "gaussian"
    ridge_penalty: float = 1.0
    discretize: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.num_samples < 1:
            raise InvalidArgumentError("num_samples must be >= 1")
        if self.num_top_features < 1:
            raise InvalidArgumentError("num_top_features must be >= 1")
        if self.ridge_penalty < 0:
            raise InvalidArgumentError("ridge_penalty must be >= 0")
        if self.distance != "euclidean" or self.perturbation != "gaussian":
            raise InvalidArgumentError("only euclidean distance with gaussian perturbation is supported")


def weighted_ridge(Z, y, sample_weight, alpha):
    """Weighted ridge regression with an unpenalized intercept.

    Returns ``(coef, intercept, weighted_r2)``.
    """
    w = sample_weight / sample_weight.sum()
    z_mean = w @ Z
    y_mean = w @ y
    Zc = Z - z_mean
    yc = y - y_mean
    A = Zc.T @ (Zc * sample_weight[:, None]) + alpha * np.eye(Z.shape[1])
    b = Zc.T @ (yc * sample_weight)
    try:
        coef = np.linalg.solve(A, b)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailureError(f"surrogate system is singular: {exc}") from exc
    if not np.all(np.isfinite(coef)):
        raise NumericalFailureError("surrogate fit produced non-finite coefficients")
    intercept = y_mean - z_mean @ coef
    resid = y - (Z @ coef + intercept)
    ss_tot = sample_weight @ (yc * yc)
    r2 = 1.0 if ss_tot == 0 else 1.0 - (sample_weight @ (resid * resid)) / ss_tot
    return coef, float(intercept), float(r2)


class LimeExplainer(BaseEstimator):
    """LIME-style tabular explainer.

    ``fit`` on a reference cohort sets the perturbation scale of each cell to
    that cell's cohort standard deviation (and, with ``discretize=True``, the
    quartile bins). Without ``fit`` every cell uses the spread of a uniform
    [0, 1] variable.
    """

    def __init__(self, num_samples=5000, kernel_width=None, num_top_features=20, ridge_penalty=1.0,
                 discretize=False, seed=0, mask_value=MASK_VALUE):
        self.num_samples = num_samples
        self.kernel_width = kernel_width
        self.num_top_features = num_top_features
        self.ridge_penalty = ridge_penalty
        self.discretize = discretize
        self.seed = seed
        self.mask_value = mask_value

    @classmethod
    def from_config(cls, cfg, mask_value=MASK_VALUE):
        d = asdict(cfg)
        d.pop("distance")
        d.pop("perturbation")
        return cls(**d, mask_value=mask_value)

    def fit(self, X, y=None):
        rows = as_rows(X)
        std = masked_std(rows, self.mask_value)
        self.scale_ = np.where(std > 0, std, _UNIFORM_STD)
        live = rows != self.mask_value
        self.quartiles_ = np.zeros((rows.shape[1], 3))
        for j in range(rows.shape[1]):
            col = rows[live[:, j], j]
            self.quartiles_[j] = np.percentile(col, [25, 50, 75]) if col.size else (0.25, 0.5, 0.75)
        return self

    def _scale(self, dim):
        scale = getattr(self, "scale_", None)
        if scale is None:
            return np.full(dim, _UNIFORM_STD)
        if len(scale) != dim:
            raise InvalidArgumentError(f"explainer fitted on {len(scale)} cells, instance has {dim}")
        return scale

    def _bins(self, values, cols):
        q = self.quartiles_[cols]
        return (values[..., None] > q).sum(axis=-1)

    def explain(self, model, instance):
        box = BlackBox(model, mask_value=self.mask_value)
        x = check_unit_interval(flatten_instance(instance), self.mask_value)
        dim = len(x)
        names = box.names(dim)
        cols = np.flatnonzero(active_mask(x, self.mask_value))
        p0 = float(box(x)[0])
        label = box.label(p0)
        sign = 1.0 if label == "fail" else -1.0

        if cols.size == 0:
            return Explanation("lime", [], [], label, max(p0, 1 - p0), {}, status="no-active-features")

        rng = np.random.default_rng(self.seed)
        scale = self._scale(dim)[cols]
        noise = rng.standard_normal((self.num_samples, cols.size))
        noise[0] = 0.0  # the instance itself is always part of the sample
        delta = noise * scale
        samples = np.repeat(x[None, :], self.num_samples, axis=0)
        samples[:, cols] += delta
        # score the predicted class so positive weights push toward the prediction
        target = box(samples) if sign > 0 else 1.0 - box(samples)

        width = self.kernel_width or 0.75 * np.sqrt(cols.size)
        dist = np.sqrt(((delta / scale) ** 2).sum(axis=1))
        kernel = np.sqrt(np.exp(-(dist**2) / width**2))

        if self.discretize:
            if not hasattr(self, "quartiles_"):
                raise InvalidArgumentError("discretized mode requires fit() on a reference cohort")
            design = (self._bins(samples[:, cols], cols) == self._bins(x[cols], cols)).astype(float)
        else:
            design = delta
        coef, intercept, r2 = weighted_ridge(design, target, kernel, self.ridge_penalty)

        k = min(self.num_top_features, cols.size)
        order = np.argsort(-np.abs(coef), kind="stable")[:k]
        attributions = [Attribution(names[cols[i]][0], names[cols[i]][1], float(coef[i])) for i in order]
        values = {flat_name(*names[cols[i]]): float(x[cols[i]]) for i in order}
        return Explanation(
            "lime",
            attributions,
            [],
            label,
            max(p0, 1 - p0),
            values,
            diagnostics={"intercept": intercept, "weighted_r2": r2, "kernel_width": float(width),
                         "target": label},
        )


def lime_explain(model, instance, cfg=LimeConfig(), training_data=None, mask_value=MASK_VALUE):
    """Explain ``instance`` (a weeks x features matrix or its flattening)."""
    explainer = LimeExplainer.from_config(cfg, mask_value=mask_value)
    if training_data is not None:
        explainer.fit(training_data)
    return explainer.explain(model, instance)
