"""Post-hoc explainers (local surrogate, minimal counterfactual, pertinent negative)."""

from .base import (
    DISPLAY_NAMES,
    EXPLAINER_KINDS,
    Attribution,
    BlackBox,
    Explanation,
    flat_name,
    split_flat_name,
)
from .cem import CemConfig, CEMExplainer, cem_pertinent_negative
from .lime import LimeConfig, LimeExplainer, lime_explain, weighted_ridge
from .mclime import MclimeConfig, MCLimeExplainer, mclime_search, walk_values
from .oracle import brute_force_class_change, brute_force_flip_sets, stepped_grid

__all__ = [
    "Attribution",
    "BlackBox",
    "CEMExplainer",
    "CemConfig",
    "DISPLAY_NAMES",
    "EXPLAINER_KINDS",
    "Explanation",
    "LimeConfig",
    "LimeExplainer",
    "MCLimeExplainer",
    "MclimeConfig",
    "brute_force_class_change",
    "brute_force_flip_sets",
    "cem_pertinent_negative",
    "flat_name",
    "lime_explain",
    "mclime_search",
    "split_flat_name",
    "stepped_grid",
    "walk_values",
]
