"""Prompt templates, theory registry and renderers."""

from .registry import (
    GENERAL_QUESTION_COUNT,
    STAGES,
    THEORY_KEYS,
    THEORY_NAMES,
    TheorySpec,
    get_theory,
    load_registry,
    load_theory,
)
from .render import (
    PromptBundle,
    build_bundle,
    course_description,
    render_conversation,
    render_judge_prompt,
    render_presentation_prompt,
    render_selection_prompt,
    render_visualization_prompt,
)

__all__ = [
    "GENERAL_QUESTION_COUNT",
    "PromptBundle",
    "STAGES",
    "THEORY_KEYS",
    "THEORY_NAMES",
    "TheorySpec",
    "build_bundle",
    "course_description",
    "get_theory",
    "load_registry",
    "load_theory",
    "render_conversation",
    "render_judge_prompt",
    "render_presentation_prompt",
    "render_selection_prompt",
    "render_visualization_prompt",
]
