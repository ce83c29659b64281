"""Pertinent negatives: the smallest perturbation that changes the predicted class.

For a perturbation ``delta`` the objective is::

    c * max(0, s_orig(x + delta) - s_other(x + delta) + kappa)
        + beta * ||delta||_1 + ||delta||_2^2

where ``s`` are the black box's class probabilities. It is minimized by
iterative shrinkage-thresholding: a gradient step on the smooth part (the
hinge gradient by central finite differences, clipped), soft-thresholding
for the L1 term, then projection of ``x + delta`` into the feature range.
The weight ``c`` is tuned by the usual bisection over ``c_steps`` rounds.
"""

from dataclasses import asdict, dataclass

import numpy as np
from sklearn.base import BaseEstimator

from ..exceptions import InvalidArgumentError
from ..validation import MASK_VALUE, active_mask
from .base import Attribution, BlackBox, Explanation, as_rows, flat_name, flatten_instance

FD_STEP = 1e-4


@dataclass(frozen=True)
class CemConfig:
    kappa: float = 0.0
    beta: float = 0.1
    gamma: float = 100.0  # auto-encoder weight; no auto-encoder is used
    c_init: float = 1.0
    c_steps: int = 10
    max_iterations: int = 1000
    lr: float = 0.01
    clip: tuple = (-1000.0, 1000.0)
    no_info_val: float = -1.0

    def __post_init__(self):
        if self.c_steps < 1 or self.max_iterations < 1:
            raise InvalidArgumentError("c_steps and max_iterations must be >= 1")
        if self.lr <= 0 or self.beta < 0 or self.kappa < 0:
            raise InvalidArgumentError("lr must be positive, beta and kappa non-negative")


class CEMExplainer(BaseEstimator):
    def __init__(self, kappa=0.0, beta=0.1, gamma=100.0, c_init=1.0, c_steps=10, max_iterations=1000,
                 lr=0.01, clip=(-1000.0, 1000.0), no_info_val=-1.0, feature_range=(0.0, 1.0),
                 fd_step=FD_STEP, mask_value=MASK_VALUE):
        self.kappa = kappa
        self.beta = beta
        self.gamma = gamma
        self.c_init = c_init
        self.c_steps = c_steps
        self.max_iterations = max_iterations
        self.lr = lr
        self.clip = clip
        self.no_info_val = no_info_val
        self.feature_range = feature_range
        self.fd_step = fd_step
        self.mask_value = mask_value

    @classmethod
    def from_config(cls, cfg, mask_value=MASK_VALUE, **kwargs):
        return cls(**asdict(cfg), mask_value=mask_value, **kwargs)

    def fit(self, X, y=None):
        """Set the feature range to the per-cell min/max of a reference cohort."""
        rows = as_rows(X)
        live = rows != self.mask_value
        lo = np.where(live, rows, np.inf).min(axis=0)
        hi = np.where(live, rows, -np.inf).max(axis=0)
        self.range_ = (np.where(np.isfinite(lo), lo, 0.0), np.where(np.isfinite(hi), hi, 1.0))
        return self

    def _range(self, dim):
        if hasattr(self, "range_"):
            lo, hi = self.range_
        else:
            lo, hi = self.feature_range
        return np.broadcast_to(np.asarray(lo, float), (dim,)), np.broadcast_to(np.asarray(hi, float), (dim,))

    def explain(self, model, instance):
        box = BlackBox(model, mask_value=self.mask_value)
        x = flatten_instance(instance)
        names = box.names(len(x))
        cols = np.flatnonzero(active_mask(x, self.mask_value))
        lo, hi = self._range(len(x))
        lo, hi = lo[cols], hi[cols]
        xa = x[cols]
        if np.any(xa < lo - 1e-12) or np.any(xa > hi + 1e-12):
            raise InvalidArgumentError("instance lies outside the feature range")

        p0 = float(box(x)[0])
        orig_fail = p0 >= box.threshold
        label = box.label(p0)

        def full(deltas):
            rows = np.repeat(x[None, :], len(deltas), axis=0)
            rows[:, cols] += deltas
            return rows

        def margin(deltas):
            # s_orig - s_other for each perturbation
            p = box(full(deltas))
            return (2 * p - 1) if orig_fail else (1 - 2 * p)

        def changed(delta):
            p = box(full(delta[None, :]))[0]
            flipped = (p >= box.threshold) != orig_fail
            return flipped and -margin(delta[None, :])[0] >= self.kappa

        eye = np.eye(cols.size) * self.fd_step
        best, best_l1 = None, np.inf
        c, c_lb, c_ub = self.c_init, 0.0, np.inf
        for _ in range(self.c_steps):
            delta = np.zeros(cols.size)
            found = False
            for _ in range(self.max_iterations):
                probes = np.concatenate([delta + eye, delta - eye])
                hinge = np.maximum(0.0, margin(probes) + self.kappa)
                g_hinge = (hinge[: cols.size] - hinge[cols.size:]) / (2 * self.fd_step)
                grad = np.clip(c * g_hinge + 2 * delta, *self.clip)
                step = delta - self.lr * grad
                step = np.sign(step) * np.maximum(np.abs(step) - self.lr * self.beta, 0.0)
                new = np.clip(xa + step, lo, hi) - xa
                if changed(new):
                    found = True
                    l1 = np.abs(new).sum()
                    if l1 < best_l1:
                        best, best_l1 = new.copy(), l1
                if np.array_equal(new, delta):
                    break
                delta = new
            if found:
                c_ub = min(c_ub, c)
                c = (c_lb + c_ub) / 2
            else:
                c_lb = max(c_lb, c)
                c = c * 10 if not np.isfinite(c_ub) else (c_lb + c_ub) / 2

        if best is None:
            return Explanation("cem", [], [], label, max(p0, 1 - p0), {}, status="not-found")
        nz = np.flatnonzero(best)
        attributions = [Attribution(*names[cols[i]], float(best[i])) for i in nz]
        values = {flat_name(*names[cols[i]]): float(xa[i]) for i in nz}
        counterfactual = {flat_name(*names[cols[i]]): float(xa[i] + best[i]) for i in nz}
        p_new = float(box(full(best[None, :]))[0])
        return Explanation(
            "cem",
            attributions,
            [counterfactual],
            label,
            max(p0, 1 - p0),
            values,
            diagnostics={"l1": float(best_l1), "p_after": p_new},
        )


def cem_pertinent_negative(model, instance, cfg=CemConfig(), training_data=None, mask_value=MASK_VALUE):
    explainer = CEMExplainer.from_config(cfg, mask_value=mask_value)
    if training_data is not None:
        explainer.fit(training_data)
    return explainer.explain(model, instance)
