from dataclasses import dataclass, field

from ..exceptions import InvalidArgumentError

SECONDS_PER_DAY = 86_400
SECONDS_PER_WEEK = 7 * SECONDS_PER_DAY

ACTIONS = (
    "video.play",
    "video.pause",
    "video.load",
    "video.seek",
    "problem.submit",
    "problem.check",
    "session.start",
    "session.end",
)


def week_of(timestamp):
    """Course week (1-based) of a timestamp, using fixed 7-day windows from course start."""
    return int(timestamp // SECONDS_PER_WEEK) + 1


def is_weekend(timestamp):
    # course start (t=0) is a Monday at 00:00
    return (int(timestamp // SECONDS_PER_DAY) % 7) >= 5


@dataclass(frozen=True, order=True)
class InteractionEvent:
    timestamp: float
    action: str
    object_id: str = ""

    @property
    def week(self):
        return week_of(self.timestamp)

    @property
    def kind(self):
        return self.action.split(".", 1)[0]


@dataclass
class StudentRecord:
    student_id: str
    events: list = field(default_factory=list)
    label: int = 0

    def __post_init__(self):
        if self.label not in (0, 1):
            raise InvalidArgumentError(f"label must be 0 (pass) or 1 (fail), got {self.label!r}")

    def sorted(self):
        return StudentRecord(self.student_id, sorted(self.events), self.label)
