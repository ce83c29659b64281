"""Byte-stable rendering of every prompt in the chain."""

import re
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources

from ..exceptions import InvalidArgumentError, RenderError
from ..explainers.base import EXPLAINER_KINDS, split_flat_name
from .registry import THEORY_KEYS

_SLOT = re.compile(r"\{([a-z_]+)\}")


@lru_cache(maxsize=None)
def asset(name):
    return resources.files("xaichain.prompts.assets").joinpath(name).read_text(encoding="utf-8")


def fill(template, slots):
    """Substitute ``{slot}`` markers in one pass; unknown markers are an error."""

    def sub(m):
        try:
            return slots[m.group(1)]
        except KeyError:
            raise RenderError(m.group(1), f"template slot {{{m.group(1)}}} has no value") from None

    return _SLOT.sub(sub, template)


def course_description(course):
    head = (
        f"The course the student is taking is {course.name}, which is a {course.level} level course "
        f"over {course.total_weeks} weeks under the topic of {course.topic}. This is the course content:"
    )
    weeks = [f"WEEK {w}\nSKILLS: {skills}\nTOPICS: {topics}" for w, skills, topics in course.weekly_syllabus]
    return "\n\n".join([head, *weeks])


def features_description(catalog):
    return "\n\n".join(f"{name}: {desc}" for name, desc in catalog.entries)


def prediction_line(explanation):
    return f"MODEL PREDICTION: {explanation.predicted_label}, with {explanation.confidence * 100:.6f}% of confidence."


def _importance_lines(explanation):
    return "\n".join(f"{a.name} - {a.score:.6f}" for a in explanation.attributions)


def _counterfactual_block(explanation):
    name = explanation.display_name
    if explanation.status == "already-pass":
        return f"The prediction is already pass, so {name} reports no changes."
    if not explanation.counterfactual_sets:
        return f"{name} found no set of feature changes that would change the prediction."
    chosen = explanation.counterfactual_sets[0]
    lines = []
    for key, new in chosen.items():
        old = explanation.feature_values.get(key)
        lines.append(f"{key}: {old:.6f} -> {new:.6f}" if old is not None else f"{key} -> {new:.6f}")
    return "\n".join(
        [f"The smallest set of feature changes found by {name} that would change the prediction:", "", *lines]
    )


def importance_block(explanation):
    name = explanation.display_name
    parts = [prediction_line(explanation), "", "FEATURE IMPORTANCES", ""]
    if explanation.attributions:
        parts += [f"These are the features found important by {name}:", "", _importance_lines(explanation)]
    else:
        parts.append(f"{name} found no feature changes that would alter the prediction.")
    if explanation.explainer_kind == "mclime":
        parts += ["", _counterfactual_block(explanation)]
    return "\n".join(parts)


def student_values_block(explanation):
    lines = [f"{key!r}: {value!r}" for key, value in explanation.feature_values.items()]
    head = f"The relevant feature values found by {explanation.display_name} for the student are included below:"
    return head + "\n" + ",\n".join(lines)


def _check_resolves(explanation, catalog):
    for key in list(explanation.feature_values) + [k for cf in explanation.counterfactual_sets for k in cf]:
        try:
            split_flat_name(key)
        except InvalidArgumentError:
            raise RenderError(key, f"feature {key!r} is not a weekly feature name") from None
    for name in explanation.feature_names():
        if name not in catalog:
            raise RenderError(name, f"feature {name!r} is not described in the feature catalog")


def _check_theory(theory):
    if theory.key not in THEORY_KEYS:
        raise RenderError(theory.key, f"theory {theory.key!r} is not in the registry")


def render_selection_prompt(course, catalog, explanation, theory):
    _check_theory(theory)
    if explanation.explainer_kind not in EXPLAINER_KINDS:
        raise RenderError(explanation.explainer_kind)
    _check_resolves(explanation, catalog)
    return fill(
        asset("selection_template.txt"),
        {
            "explainer": explanation.display_name,
            "course_name": course.name,
            "model_description": asset("model_description.txt").rstrip("\n"),
            "features_description": features_description(catalog),
            "explainer_description": asset(f"explainers/{explanation.explainer_kind}.txt").rstrip("\n"),
            "course_description": course_description(course),
            "explainer_importance_scores": importance_block(explanation),
            "student_feature_values": student_values_block(explanation),
            "theory_instructions": theory.selection_instructions.rstrip("\n"),
        },
    )


def render_presentation_prompt(theory, course, weeks_elapsed):
    _check_theory(theory)
    return fill(
        asset("presentation_template.txt"),
        {
            "presentation_instruction": theory.presentation_instructions,
            "course_description": course_description(course),
            "weeks_elapsed": str(weeks_elapsed),
            "format_instructions": asset("format_instructions.txt").rstrip("\n"),
        },
    )


def render_judge_prompt(generated_text, questions):
    questions = list(questions)
    if not questions:
        raise InvalidArgumentError("at least one question is required")
    numbered = "\n".join(f"{i}. {q}" for i, q in enumerate(questions, 1))
    return fill(asset("judge_template.txt"), {"generated_text": generated_text.strip(), "question": numbered})


def render_visualization_prompt(selection_response, presentation_response):
    if not selection_response.strip() or not presentation_response.strip():
        raise InvalidArgumentError("both responses must be non-empty")
    return fill(
        asset("visualization_template.txt"),
        {
            "explanation_selection_response": selection_response.strip(),
            "explanation_presentation_response": presentation_response.strip(),
        },
    )


def render_conversation(history, user_input):
    """Completion-style rendering of a chat history, for backends without chat turns."""
    lines = []
    for turn in history:
        who = "Human" if turn.role == "user" else "AI" if turn.role == "assistant" else "System"
        lines.append(f"{who}: {turn.content}")
    return fill(asset("conversation_template.txt"), {"chat_history": "\n".join(lines), "input": user_input})


@dataclass(frozen=True)
class PromptBundle:
    selection_prompt: str
    presentation_prompt: str
    visualization_prompt: str = None
    judge_prompt: str = None
    provenance: dict = field(default_factory=dict)


def build_bundle(course, catalog, explanation, theory, weeks_elapsed, student_id):
    return PromptBundle(
        render_selection_prompt(course, catalog, explanation, theory),
        render_presentation_prompt(theory, course, weeks_elapsed),
        provenance={
            "course": course.name,
            "student_id": student_id,
            "explainer_kind": explanation.explainer_kind,
            "theory_key": theory.key,
            "model_confidence": explanation.confidence,
        },
    )
