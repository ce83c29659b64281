"""Minimal counterfactual search over LIME-selected features.

Each candidate feature is walked in steps of ``std_fraction`` times its
cohort standard deviation, in the direction that lowers the fail
probability (opposite to the sign of its LIME weight), clipped to the
bounds. Singletons are tried first, then pairs walked in lockstep, then
triples, stopping at the first group size where some group flips the
prediction. Every flipping group of that size is returned.
"""

from dataclasses import asdict, dataclass
from itertools import combinations

import numpy as np
from sklearn.base import BaseEstimator

from ..exceptions import InvalidArgumentError
from ..validation import MASK_VALUE
from .base import BlackBox, Explanation, as_rows, flat_name, flatten_instance, masked_std

_UNIFORM_STD = 1.0 / np.sqrt(12.0)


@dataclass(frozen=True)
class MclimeConfig:
    std_fraction: float = 0.1
    threshold: float = 0.5
    max_group_size: int = 3
    bounds: tuple = (0.0, 1.0)

    def __post_init__(self):
        if not 0.0 < self.std_fraction <= 1.0:
            raise InvalidArgumentError("std_fraction must lie in (0, 1]")
        if self.max_group_size < 1:
            raise InvalidArgumentError("max_group_size must be >= 1")
        if self.bounds[0] >= self.bounds[1]:
            raise InvalidArgumentError("bounds must be increasing")


def walk_values(x0, direction, step, bounds):
    """Values visited walking from ``x0``: one per step, ending at the bound."""
    lo, hi = bounds
    target = hi if direction > 0 else lo
    n = int(np.ceil(abs(target - x0) / step - 1e-12)) if step > 0 else 0
    return np.clip(x0 + direction * step * np.arange(1, n + 1), lo, hi)


class MCLimeExplainer(BaseEstimator):
    def __init__(self, std_fraction=0.1, threshold=0.5, max_group_size=3, bounds=(0.0, 1.0),
                 mask_value=MASK_VALUE):
        self.std_fraction = std_fraction
        self.threshold = threshold
        self.max_group_size = max_group_size
        self.bounds = bounds
        self.mask_value = mask_value

    @classmethod
    def from_config(cls, cfg, mask_value=MASK_VALUE):
        return cls(**asdict(cfg), mask_value=mask_value)

    def fit(self, X, y=None):
        """Record each cell's cohort standard deviation (the step-size basis)."""
        self.std_ = masked_std(as_rows(X), self.mask_value)
        return self

    def step_sizes(self, dim):
        std = getattr(self, "std_", None)
        if std is None:
            std = np.full(dim, _UNIFORM_STD)
        elif len(std) != dim:
            raise InvalidArgumentError(f"explainer fitted on {len(std)} cells, instance has {dim}")
        return self.std_fraction * np.where(std > 0, std, _UNIFORM_STD)

    def explain(self, model, instance, lime_result):
        if not lime_result.attributions:
            raise InvalidArgumentError("lime_result has no attributions")
        box = BlackBox(model, threshold=self.threshold, mask_value=self.mask_value)
        x = flatten_instance(instance)
        names = box.names(len(x))
        index = {flat_name(*n): i for i, n in enumerate(names)}
        p0 = float(box(x)[0])
        base = dict(
            attributions=list(lime_result.attributions),
            feature_values=dict(lime_result.feature_values),
            predicted_label=box.label(p0),
            confidence=max(p0, 1 - p0),
        )
        if p0 < self.threshold:
            return Explanation("mclime", status="already-pass",
                               diagnostics={"info": "prediction is already pass"}, **base)

        steps = self.step_sizes(len(x))
        # lime scores the predicted (fail) class: positive weight -> lower the value
        candidates = []
        for a in lime_result.attributions:
            i = index.get(a.name)
            if i is None:
                raise InvalidArgumentError(f"attribution {a.name!r} does not match the model's cells")
            if a.score == 0 or x[i] == self.mask_value:
                continue
            candidates.append((i, -np.sign(a.score)))
        paths = {i: walk_values(x[i], d, steps[i], self.bounds) for i, d in candidates}

        for size in range(1, self.max_group_size + 1):
            found = []
            for group in combinations(candidates, size):
                cf = self._first_flip(box, x, [paths[i] for i, _ in group], [i for i, _ in group])
                if cf is not None:
                    found.append({flat_name(*names[i]): v for i, v in cf.items()})
            if found:
                found.sort(key=lambda cf: (sum(abs(v - x[index[k]]) for k, v in cf.items()), sorted(cf)))
                return Explanation("mclime", counterfactual_sets=found,
                                   diagnostics={"cardinality": size, "candidates": len(candidates)}, **base)
        return Explanation("mclime", status="not-found",
                           diagnostics={"cardinality": None, "candidates": len(candidates)}, **base)

    def _first_flip(self, box, x, group_paths, cols):
        """Walk the group in lockstep; return the first flipping assignment or None."""
        n = max(len(p) for p in group_paths)
        if n == 0:
            return None
        rows = np.repeat(x[None, :], n, axis=0)
        for c, path in zip(cols, group_paths):
            if len(path):
                rows[:, c] = np.concatenate([path, np.full(n - len(path), path[-1])])
        p = box(rows)
        hit = np.flatnonzero(p < self.threshold)
        if hit.size == 0:
            return None
        t = hit[0]
        return {c: float(rows[t, c]) for c in cols}


def mclime_search(model, instance, lime_result, cfg=MclimeConfig(), training_data=None, mask_value=MASK_VALUE):
    explainer = MCLimeExplainer.from_config(cfg, mask_value=mask_value)
    if training_data is not None:
        explainer.fit(training_data)
    return explainer.explain(model, instance, lime_result)
