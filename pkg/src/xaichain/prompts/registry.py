from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path
from types import MappingProxyType

from ..exceptions import ConfigurationError

THEORY_KEYS = ("rs", "ac", "pearl", "nr", "base_contrastive", "rar_contrastive", "sr", "cot")
THEORY_NAMES = {
    "rs": "Relevance Selection",
    "ac": "Abnormal Conditions",
    "pearl": "Pearl Explanation",
    "nr": "Necessity Robustness",
    "base_contrastive": "(Base) Contrastive",
    "rar_contrastive": "RaR + Contrastive",
    "sr": "Statistical Relevance",
    "cot": "Chain of Thought",
}
STAGES = ("selection", "presentation")
# leading questions shared by every theory at each stage
GENERAL_QUESTION_COUNT = {"selection": 4, "presentation": 6}


@dataclass(frozen=True)
class TheorySpec:
    key: str
    selection_instructions: str
    presentation_instructions: str
    selection_questions: tuple
    presentation_questions: tuple

    @property
    def name(self):
        return THEORY_NAMES.get(self.key, self.key)

    def questions(self, stage):
        if stage == "selection":
            return list(self.selection_questions)
        if stage == "presentation":
            return list(self.presentation_questions)
        raise ConfigurationError(f"unknown stage {stage!r}")


def _read(path):
    return path.read_text(encoding="utf-8")


def _lines(text):
    return tuple(line for line in text.splitlines() if line.strip())


def load_theory(directory, key=None):
    d = Path(directory) if not hasattr(directory, "joinpath") else directory
    try:
        return TheorySpec(
            key or d.name,
            _read(d.joinpath("selection.txt")),
            _read(d.joinpath("presentation.txt")),
            _lines(_read(d.joinpath("questions_selection.txt"))),
            _lines(_read(d.joinpath("questions_presentation.txt"))),
        )
    except FileNotFoundError as exc:
        raise ConfigurationError(f"incomplete theory directory {d}: {exc}") from exc


def load_registry(path=None):
    """Read every theory subdirectory; the shipped registry when ``path`` is None."""
    if path is None:
        return _shipped_registry()
    return _load(Path(path))


@lru_cache(maxsize=1)
def _shipped_registry():
    return _load(resources.files("xaichain.prompts.assets").joinpath("theories"))


def _load(root):
    theories = {}
    for key in THEORY_KEYS:
        entry = root.joinpath(key)
        if not entry.is_dir():
            raise ConfigurationError(f"theory registry at {root} is missing {key!r}")
        theories[key] = load_theory(entry, key)
    return MappingProxyType(theories)


def get_theory(key, registry=None):
    registry = registry if registry is not None else load_registry()
    try:
        return registry[key]
    except KeyError:
        raise ConfigurationError(f"unknown theory {key!r}; expected one of {', '.join(THEORY_KEYS)}") from None
