"""Exhaustive reference searches used to check the explainers."""

from itertools import combinations, product
from math import prod

import numpy as np

from ..exceptions import InvalidArgumentError, SearchSpaceTooLargeError
from .base import BlackBox, flatten_instance

MAX_CANDIDATES = 12
MAX_CARDINALITY = 3
DEFAULT_CAP = 50_000_000


def stepped_grid(x0, step, bounds=(0.0, 1.0)):
    """Every value ``x0 + k*step`` (k != 0) inside ``bounds``, plus both bounds."""
    lo, hi = bounds
    k_lo = int(np.floor((lo - x0) / step))
    k_hi = int(np.ceil((hi - x0) / step))
    vals = np.clip(x0 + step * np.arange(k_lo, k_hi + 1), lo, hi)
    vals = np.unique(np.concatenate([vals, [lo, hi]]))
    return vals[vals != x0]


def search_size(step_grid, candidates, max_cardinality):
    sizes = [len(step_grid[c]) for c in candidates]
    return sum(prod(g) for k in range(1, max_cardinality + 1) for g in combinations(sizes, k))


def brute_force_flip_sets(model, instance, candidate_features, step_grid, max_cardinality,
                          threshold=None, cap=DEFAULT_CAP):
    """All minimal-cardinality feature sets whose grid assignment flips a fail prediction.

    ``candidate_features`` are flat column indices, ``step_grid`` maps each to
    the values it may take. Returns ``{"cardinality": k, "sets": [...]}``
    where each set is a tuple of column indices, and ``"witness"`` maps each
    set to one flipping assignment (the one closest to the instance in L1).
    """
    candidates = list(candidate_features)
    if len(candidates) > MAX_CANDIDATES or max_cardinality > MAX_CARDINALITY:
        raise InvalidArgumentError(
            f"exhaustive search limited to {MAX_CANDIDATES} candidates and cardinality {MAX_CARDINALITY}"
        )
    estimate = search_size(step_grid, candidates, max_cardinality)
    if estimate > cap:
        raise SearchSpaceTooLargeError(estimate, cap)
    box = BlackBox(model, threshold=threshold)
    x = flatten_instance(instance)
    thr = box.threshold
    if box(x)[0] < thr:
        return {"cardinality": None, "sets": [], "witness": {}}
    for k in range(1, max_cardinality + 1):
        sets, witness = [], {}
        for group in combinations(candidates, k):
            grids = [np.asarray(step_grid[c], dtype=float) for c in group]
            if any(g.size == 0 for g in grids):
                continue
            mesh = np.stack([m.ravel() for m in np.meshgrid(*grids, indexing="ij")], axis=1)
            rows = np.repeat(x[None, :], len(mesh), axis=0)
            rows[:, list(group)] = mesh
            flips = box(rows) < thr
            if flips.any():
                cost = np.abs(mesh[flips] - x[list(group)]).sum(axis=1)
                best = mesh[flips][np.argmin(cost)]
                sets.append(tuple(group))
                witness[tuple(group)] = dict(zip(group, best.tolist()))
        if sets:
            return {"cardinality": k, "sets": sets, "witness": witness}
    return {"cardinality": None, "sets": [], "witness": {}}


def brute_force_class_change(model, instance, feature_range=(0.0, 1.0), levels=3, threshold=None,
                             cap=DEFAULT_CAP):
    """Whether any point of a ``levels``-per-axis grid over ``feature_range`` changes the class.

    The grid always contains the instance's own value on each axis, so the
    box corners and every axis-aligned move are covered.
    """
    box = BlackBox(model, threshold=threshold)
    x = flatten_instance(instance)
    lo, hi = (np.broadcast_to(np.asarray(b, float), x.shape) for b in feature_range)
    axes = [np.unique(np.concatenate([np.linspace(lo[i], hi[i], levels), [x[i]]])) for i in range(len(x))]
    total = prod(len(a) for a in axes)
    if total > cap:
        raise SearchSpaceTooLargeError(total, cap)
    orig = box(x)[0] >= box.threshold
    chunk = 200_000
    it = product(*axes)
    while True:
        block = np.array([p for _, p in zip(range(chunk), it)], dtype=float)
        if block.size == 0:
            return False
        if ((box(block) >= box.threshold) != orig).any():
            return True
