"""Decomposed yes/no questions answered by an LLM judge."""

import re
from dataclasses import dataclass, field

from ..exceptions import InvalidArgumentError, StageError, VerdictParseError
from ..gateway import ChatTurn, Gateway, GatewayConfig, gateway_for
from ..prompts.registry import GENERAL_QUESTION_COUNT, STAGES
from ..prompts.render import render_judge_prompt

_BRACKETED = re.compile(r"\[([^\[\]]*)\]")
_BARE = re.compile(r"\b(?:yes|no)\b(?:\s*,\s*\b(?:yes|no)\b)+|^\s*(?:yes|no)\s*$", re.I | re.M)


def _tokens(body):
    return [t.strip().strip("'\"`*.").strip() for t in body.split(",") if t.strip()]


def _as_bools(tokens, raw):
    out = []
    for t in tokens:
        u = t.upper()
        if u not in ("YES", "NO"):
            raise VerdictParseError(f"unknown verdict token {t!r}", raw)
        out.append(u == "YES")
    return out


def parse_verdicts(response, expected_count):
    """Read YES/NO answers from the first bracketed list, else the first bare comma list.

    Bracketed lists made only of template placeholders (``[answer1, ...]``)
    are skipped when a later list holds real verdicts.
    """
    if expected_count < 1:
        raise InvalidArgumentError("expected_count must be >= 1")
    lists = [_tokens(m.group(1)) for m in _BRACKETED.finditer(response)]
    lists = [t for t in lists if t]
    chosen = next((t for t in lists if all(x.upper() in ("YES", "NO") for x in t)), None)
    if chosen is None and lists:
        chosen = lists[0]
    if chosen is None:
        m = _BARE.search(response)
        if m is None:
            raise VerdictParseError("no YES/NO list found", response)
        chosen = _tokens(m.group(0))
    verdicts = _as_bools(chosen, response)
    if len(verdicts) != expected_count:
        raise VerdictParseError(f"expected {expected_count} verdicts, got {len(verdicts)}", response)
    return verdicts


@dataclass
class JudgeResult:
    theory_key: str
    stage: str
    questions: list
    verdicts: list
    item_id: str = None
    raw_response: str = field(default=None, repr=False)

    def __post_init__(self):
        if len(self.verdicts) != len(self.questions):
            raise InvalidArgumentError("one verdict per question is required")

    @property
    def overall(self):
        return sum(self.verdicts) / len(self.verdicts)

    @property
    def general_count(self):
        return min(GENERAL_QUESTION_COUNT[self.stage], len(self.questions))

    @property
    def specific_mean(self):
        """Share of YES among the theory-specific questions (None if there are none)."""
        rest = self.verdicts[self.general_count :]
        return sum(rest) / len(rest) if rest else None

    @property
    def per_question(self):
        return [{"index": i, "question": q, "verdict": v} for i, (q, v) in enumerate(zip(self.questions, self.verdicts), 1)]

    def to_dict(self):
        return {
            "item_id": self.item_id,
            "theory": self.theory_key,
            "stage": self.stage,
            "questions": list(self.questions),
            "verdicts": list(self.verdicts),
            "overall": self.overall,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(d["theory"], d["stage"], list(d["questions"]), [bool(v) for v in d["verdicts"]], d.get("item_id"))


def _as_gateway(gateway):
    if isinstance(gateway, Gateway):
        return gateway
    if gateway is None or isinstance(gateway, GatewayConfig):
        return gateway_for(gateway or GatewayConfig())
    raise InvalidArgumentError("gateway must be a Gateway or GatewayConfig")


def judge_explanation(generated_text, theory, stage, gateway=None, item_id=None):
    if stage not in STAGES:
        raise InvalidArgumentError(f"unknown stage {stage!r}")
    questions = theory.questions(stage)
    if not questions:
        raise InvalidArgumentError(f"theory {theory.key!r} has no {stage} questions")
    prompt = render_judge_prompt(generated_text, questions)
    try:
        reply = _as_gateway(gateway).complete([ChatTurn("user", prompt)])
        verdicts = parse_verdicts(reply.text, len(questions))
    except Exception as exc:
        raise StageError(f"judge-{stage}", exc) from exc
    return JudgeResult(theory.key, stage, questions, verdicts, item_id, reply.text)
