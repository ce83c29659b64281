"""What-if simulation of study actions on a six-week model.

An action nudges some week's features up (or down) by 25 cohort percentile
points; the predictor is then re-run to see how the pass probability moves.
"""

import csv
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .data.catalog import IMPLEMENTED_FEATURES, FeatureCatalog
from .exceptions import DataFormatError, InvalidArgumentError
from .predictor import predict

SHIFT_POINTS = 25.0
SIMULATION_WEEK = 6
INPUT_HEADER = ("student_id", "explainer", "theory", "action_key", "weeks_focus")


@dataclass(frozen=True)
class ActionSpec:
    key: str
    label: str
    target_features: tuple
    direction: str = "increase"

    def __post_init__(self):
        if self.direction not in ("increase", "decrease"):
            raise InvalidArgumentError(f"direction must be increase or decrease, got {self.direction!r}")
        object.__setattr__(self, "target_features", tuple(self.target_features))


ACTION_CATALOG = (
    ActionSpec("improve_regularity", "Improve the regularity of your learning", ("regularity_peak_dayhour",)),
    ActionSpec("attempt_more_problems", "Attempt more problems", ("total_clicks_problem",)),
    ActionSpec("speed_up_quizzes", "Speed up your quiz solving", ("student_speed",), "decrease"),
    ActionSpec("watch_more_videos", "Watch more lecture videos", ("total_clicks_video", "total_clicks_Video.Load")),
    ActionSpec("lengthen_sessions", "Study in longer sessions", ("time_sessions_mean",)),
    ActionSpec("add_sessions", "Log in for more study sessions", ("number_sessions",)),
    ActionSpec("reduce_lecture_delay", "Watch lectures soon after release", ("delay_lecture",), "decrease"),
    ActionSpec("balance_weekend_study", "Spread study across the weekend", ("ratio_clicks_weekend_day",)),
    ActionSpec("increase_engagement", "Engage more with course material overall", ("total_clicks",)),
    ActionSpec("more_problem_time", "Spend more time working on problems", ("time_in_problem_sum",)),
)
ACTIONS_BY_KEY = {a.key: a for a in ACTION_CATALOG}


def check_catalog(actions=ACTION_CATALOG, catalog=None):
    names = set((catalog or FeatureCatalog.default()).names) | set(IMPLEMENTED_FEATURES)
    for a in actions:
        missing = [f for f in a.target_features if f not in names]
        if missing:
            raise InvalidArgumentError(f"action {a.key!r} targets unknown features {missing}")
    return True


def get_action(key):
    try:
        return ACTIONS_BY_KEY[key]
    except KeyError:
        raise InvalidArgumentError(f"unknown action {key!r}") from None


def percentile_rank(value, population):
    """Inverse of linear-interpolation percentiles: rank of ``value`` in [0, 100].

    Ties resolve to the highest rank the value occupies.
    """
    x = np.sort(np.asarray(population, dtype=np.float64))
    if x.size == 0:
        raise InvalidArgumentError("empty population")
    if x.size == 1 or value >= x[-1]:
        return 100.0
    if value < x[0]:
        return 0.0
    i = int(np.searchsorted(x, value, side="right")) - 1
    span = x[i + 1] - x[i]
    frac = (value - x[i]) / span if span > 0 else 0.0
    return 100.0 * (i + frac) / (x.size - 1)


def shifted_value(value, population, points):
    """Value at the rank ``points`` away from ``value``'s own; never moves against the shift."""
    p = min(100.0, max(0.0, percentile_rank(value, population) + points))
    target = float(np.percentile(np.asarray(population, dtype=np.float64), p))
    return max(value, target) if points >= 0 else min(value, target)


def apply_action(row, action, week, cohort):
    """Return a copy of ``row`` (weeks x features) with the action applied to ``week`` (1-based).

    A masked cell counts as zero activity before the shift. Feature-weeks with
    no unmasked cohort values are left alone.
    """
    row = np.array(row, dtype=np.float64, copy=True)
    if row.ndim != 2 or row.shape[1] != len(cohort.feature_names):
        raise InvalidArgumentError(f"row shape {row.shape} does not match the cohort features")
    if not 1 <= week <= min(row.shape[0], cohort.num_weeks):
        raise InvalidArgumentError(f"week {week} is outside the tensor")
    points = SHIFT_POINTS if action.direction == "increase" else -SHIFT_POINTS
    mask = cohort.mask_value
    for name in action.target_features:
        if name not in cohort.feature_names:
            raise InvalidArgumentError(f"feature {name!r} is not in the tensor")
        j = cohort.feature_names.index(name)
        column = cohort.values[:, week - 1, j]
        population = column[column != mask]
        if population.size == 0:
            continue
        current = row[week - 1, j]
        current = 0.0 if current == mask else current
        row[week - 1, j] = shifted_value(current, population, points)
    return row


def helpful_features(model, week):
    """Features whose increase at ``week`` lowers the fail probability."""
    names = model.feature_names or [str(j) for j in range(model.num_features)]
    return [n for n, w in zip(names, model.weights[week - 1]) if w < 0]


@dataclass(frozen=True)
class SimulationChoice:
    student_id: str
    explainer: str
    theory: str
    action_key: str
    weeks_focus: tuple = ()


@dataclass
class ActionOutcome:
    student_id: str
    action_key: str
    p_before: float
    p_after: float
    weeks_focus: list = field(default_factory=list)
    explainer: str = None
    theory: str = None

    @property
    def delta_pass_prob(self):
        return (1.0 - self.p_after) - (1.0 - self.p_before)

    def to_dict(self):
        d = asdict(self)
        d["delta_pass_prob"] = self.delta_pass_prob
        return d


def _summary(values):
    v = np.asarray(values, dtype=np.float64)
    return {"mean": float(v.mean()), "std": float(v.std()), "n": int(v.size)}


def _group(outcomes, key):
    groups = {}
    for o in outcomes:
        groups.setdefault(key(o), []).append(o.delta_pass_prob)
    return {k: _summary(v) for k, v in sorted(groups.items())}


@dataclass
class SimulationReport:
    outcomes: list

    @property
    def mean_improvement(self):
        return _summary([o.delta_pass_prob for o in self.outcomes])

    def to_dict(self):
        return {
            "week": SIMULATION_WEEK,
            "shift_points": SHIFT_POINTS,
            "overall": self.mean_improvement,
            "by_explainer": _group(self.outcomes, lambda o: o.explainer),
            "by_theory": _group(self.outcomes, lambda o: o.theory),
            "by_explainer_theory": {
                f"{e}/{t}": s for (e, t), s in _group(self.outcomes, lambda o: (o.explainer, o.theory)).items()
            },
            "outcomes": [o.to_dict() for o in self.outcomes],
        }

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)


def simulate_cohort(choices, model6, cohort, week=SIMULATION_WEEK, actions=None):
    """Apply each chosen action to its student's ``week`` and re-predict.

    ``cohort`` is never modified.
    """
    if cohort.num_weeks != model6.input_weeks or len(cohort.feature_names) != model6.num_features:
        raise InvalidArgumentError(
            f"cohort shape {cohort.shape[1:]} does not match model ({model6.input_weeks}, {model6.num_features})"
        )
    if model6.feature_names and list(model6.feature_names) != list(cohort.feature_names):
        raise InvalidArgumentError("cohort and model disagree on feature order")
    lookup = actions or ACTIONS_BY_KEY
    choices = list(choices)
    if not choices:
        raise InvalidArgumentError("no simulation choices given")
    outcomes = []
    for c in choices:
        if c.action_key not in lookup:
            raise InvalidArgumentError(f"unknown action {c.action_key!r}")
        row = cohort.row(c.student_id)
        after = apply_action(row, lookup[c.action_key], week, cohort)
        outcomes.append(
            ActionOutcome(
                c.student_id,
                c.action_key,
                predict(model6, row),
                predict(model6, after),
                list(c.weeks_focus),
                c.explainer,
                c.theory,
            )
        )
    return SimulationReport(outcomes)


def read_choices(path):
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != INPUT_HEADER:
            raise DataFormatError(f"simulation input header must be {','.join(INPUT_HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            try:
                weeks = tuple(int(w) for w in row["weeks_focus"].split(";") if w.strip())
            except ValueError:
                raise DataFormatError(f"line {lineno}: weeks_focus must be integers separated by ';'") from None
            out.append(SimulationChoice(row["student_id"], row["explainer"], row["theory"], row["action_key"], weeks))
    return out


def write_choices(path, choices):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(INPUT_HEADER)
        for c in choices:
            w.writerow([c.student_id, c.explainer, c.theory, c.action_key, ";".join(map(str, c.weeks_focus))])
