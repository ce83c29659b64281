"""Explanation chains for learner-facing feedback: data, models, explainers, prompting and evaluation."""

__version__ = "0.1.0"
