"""Synthetic clickstream generator standing in for confidential MOOC logs.

Three behavioral archetypes are produced:

* ``passing``: several sessions every week at a habitual hour, steady video
  watching soon after release and many problem submissions.
* ``failing``: activity front-loaded into the first week or two, then sparse
  with empty weeks, late video viewing and few problem attempts.
* ``irregular``: bursty, unpredictable weekly volume.
"""

import numpy as np

from ..exceptions import InvalidArgumentError
from .events import SECONDS_PER_DAY, SECONDS_PER_WEEK, InteractionEvent, StudentRecord

ARCHETYPES = ("passing", "failing", "irregular")

VIDEOS_PER_WEEK = 4
PROBLEMS_PER_WEEK = 3


def _sessions_per_week(archetype, week, rng):
    if archetype == "passing":
        return int(rng.integers(3, 7))
    if archetype == "failing":
        if week == 1:
            return int(rng.integers(2, 5))
        if week == 2:
            return int(rng.integers(0, 3))
        return 1 if rng.random() < 0.25 else 0
    return int(rng.choice([0, 0, 1, 2, 4, 7]))


def _session_events(archetype, week, start, rng):
    """Events of one session beginning at ``start`` seconds."""
    events = [InteractionEvent(float(start), "session.start", "")]
    t = float(start)
    if archetype == "failing":
        # lagging behind: mostly earlier weeks' material
        material_week = max(1, week - int(rng.integers(0, 3)))
        n_videos, n_problem_actions = int(rng.integers(1, 3)), int(rng.integers(0, 2))
    elif archetype == "passing":
        material_week = week
        n_videos, n_problem_actions = int(rng.integers(2, 5)), int(rng.integers(3, 8))
    else:
        material_week = max(1, week - int(rng.integers(0, 2)))
        n_videos, n_problem_actions = int(rng.integers(0, 5)), int(rng.integers(0, 5))

    for _ in range(n_videos):
        obj = f"video-w{material_week}-{int(rng.integers(1, VIDEOS_PER_WEEK + 1))}"
        t += float(rng.uniform(5, 60))
        events.append(InteractionEvent(t, "video.load", obj))
        t += float(rng.uniform(2, 20))
        events.append(InteractionEvent(t, "video.play", obj))
        for _ in range(int(rng.integers(0, 3))):
            t += float(rng.uniform(30, 400))
            events.append(InteractionEvent(t, str(rng.choice(["video.pause", "video.seek"])), obj))
            t += float(rng.uniform(2, 30))
            events.append(InteractionEvent(t, "video.play", obj))
        t += float(rng.uniform(60, 600))
        events.append(InteractionEvent(t, "video.pause", obj))
    for _ in range(n_problem_actions):
        obj = f"problem-w{material_week}-{int(rng.integers(1, PROBLEMS_PER_WEEK + 1))}"
        t += float(rng.uniform(60, 500))
        events.append(InteractionEvent(t, "problem.check", obj))
        t += float(rng.uniform(10, 120))
        events.append(InteractionEvent(t, "problem.submit", obj))
    t += float(rng.uniform(5, 60))
    events.append(InteractionEvent(t, "session.end", ""))
    return events, t


def _session_starts(archetype, week, n, rng):
    base = (week - 1) * SECONDS_PER_WEEK
    if archetype == "passing":
        habit_hour = 18 + rng.integers(0, 3)
        days = np.sort(rng.choice(7, size=min(n, 7), replace=False))
        hours = habit_hour + rng.normal(0, 0.5, size=len(days))
    elif archetype == "failing":
        # weekend-heavy cramming at odd hours
        days = np.sort(rng.choice([4, 5, 6, 6, 5], size=n))
        hours = rng.uniform(0, 23, size=n)
    else:
        days = np.sort(rng.integers(0, 7, size=n))
        hours = rng.uniform(6, 23, size=n)
    return [base + int(d) * SECONDS_PER_DAY + float(h) * 3600 for d, h in zip(days, hours)]


def generate_clickstream(archetype, weeks, seed, student_id=None):
    """Generate one synthetic student's event stream.

    Deterministic for a fixed ``(archetype, weeks, seed)``. The label is 0
    (pass) for ``passing``, 1 (fail) for ``failing`` and a fair coin for
    ``irregular``.
    """
    if archetype not in ARCHETYPES:
        raise InvalidArgumentError(f"unknown archetype {archetype!r}")
    if weeks < 1:
        raise InvalidArgumentError(f"weeks must be >= 1, got {weeks}")
    rng = np.random.default_rng([ARCHETYPES.index(archetype), int(seed) & 0xFFFFFFFF, weeks])

    events = []
    for week in range(1, weeks + 1):
        n = _sessions_per_week(archetype, week, rng)
        week_end = week * SECONDS_PER_WEEK
        for start in _session_starts(archetype, week, n, rng):
            if events and start <= events[-1].timestamp:
                start = events[-1].timestamp + 1800.0
            session, end = _session_events(archetype, week, start, rng)
            if end >= week_end:
                break
            events.extend(session)

    if archetype == "passing":
        label = 0
    elif archetype == "failing":
        label = 1
    else:
        label = int(rng.random() < 0.5)
    sid = student_id if student_id is not None else f"{archetype}-{seed}"
    return StudentRecord(sid, sorted(events), label)


def generate_cohort(n_students, weeks, seed, mix=(0.45, 0.45, 0.10)):
    """Generate ``n_students`` records with archetype proportions ``mix``."""
    if n_students < 1:
        raise InvalidArgumentError("n_students must be >= 1")
    rng = np.random.default_rng(seed)
    kinds = rng.choice(len(ARCHETYPES), size=n_students, p=np.asarray(mix) / np.sum(mix))
    seeds = rng.integers(0, 2**31 - 1, size=n_students)
    width = len(str(n_students - 1))
    return [
        generate_clickstream(ARCHETYPES[k], weeks, int(s), student_id=f"s{i:0{width}d}")
        for i, (k, s) in enumerate(zip(kinds, seeds))
    ]
