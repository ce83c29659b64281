import json
from dataclasses import dataclass, field
from importlib import resources

from ..exceptions import InvalidArgumentError

# features whose one-line descriptions fully determine a weekly formula
IMPLEMENTED_FEATURES = (
    "total_clicks",
    "total_clicks_video",
    "total_clicks_problem",
    "total_clicks_weekday",
    "total_clicks_weekend",
    "ratio_clicks_weekend_day",
    "number_sessions",
    "time_sessions_mean",
    "time_sessions_std",
    "time_in_video_sum",
    "time_in_problem_sum",
    "delay_lecture",
    "total_clicks_Video.Load",
    "regularity_peak_dayhour",
    "student_speed",
)

_ASSETS = "xaichain.prompts.assets"


@dataclass(frozen=True)
class FeatureCatalog:
    """Ordered (name, description) pairs."""

    entries: tuple

    def __post_init__(self):
        names = [n for n, _ in self.entries]
        if len(set(names)) != len(names):
            raise InvalidArgumentError("feature names must be unique")

    @classmethod
    def default(cls):
        """All described features, in the order they are presented to the LLM."""
        text = resources.files(_ASSETS).joinpath("features.tsv").read_text(encoding="utf-8")
        rows = [line.split("\t", 1) for line in text.splitlines() if line]
        return cls(tuple((n, d) for n, d in rows))

    @classmethod
    def implemented(cls):
        full = cls.default()
        return cls(tuple((n, full.describe(n)) for n in IMPLEMENTED_FEATURES))

    @property
    def names(self):
        return [n for n, _ in self.entries]

    def __len__(self):
        return len(self.entries)

    def __contains__(self, name):
        return any(n == name for n, _ in self.entries)

    def describe(self, name):
        for n, d in self.entries:
            if n == name:
                return d
        raise KeyError(name)

    def subset(self, names):
        return FeatureCatalog(tuple((n, self.describe(n)) for n in names))


@dataclass(frozen=True)
class CourseDescriptor:
    name: str
    level: str
    total_weeks: int
    weekly_syllabus: tuple = field(default_factory=tuple)  # (week, skills, topics)
    topic: str = ""

    def __post_init__(self):
        weeks = sorted(w for w, _, _ in self.weekly_syllabus)
        if weeks and weeks != list(range(1, self.total_weeks + 1)):
            raise InvalidArgumentError("syllabus must cover weeks 1..total_weeks")

    @classmethod
    def from_dict(cls, d):
        syl = tuple((int(e["week"]), e["skills"], e["topics"]) for e in d["weekly_syllabus"])
        return cls(d["name"], d["level"], int(d["total_weeks"]), syl, d.get("topic", ""))

    def to_dict(self):
        return {
            "name": self.name,
            "level": self.level,
            "topic": self.topic,
            "total_weeks": self.total_weeks,
            "weekly_syllabus": [
                {"week": w, "skills": s, "topics": t} for w, s, t in self.weekly_syllabus
            ],
        }


def load_course(path=None):
    """Load a course descriptor from JSON; the shipped DSP course when ``path`` is None."""
    if path is None:
        text = resources.files(_ASSETS).joinpath("courses/dsp1.json").read_text(encoding="utf-8")
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    return CourseDescriptor.from_dict(json.loads(text))
