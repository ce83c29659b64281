"""Weekly behavioral features computed from an event stream."""

import re

import numpy as np

from ..exceptions import DataFormatError, InvalidArgumentError
from ..validation import MASK_VALUE
from .events import ACTIONS, SECONDS_PER_DAY, SECONDS_PER_WEEK, is_weekend, week_of

SESSION_GAP = 30 * 60  # seconds of inactivity that close an implicit session
_RELEASE_WEEK = re.compile(r"w(\d+)")


def _sessions(events):
    """Return (start, end) pairs.

    Explicit ``session.start``/``session.end`` markers are used when the
    stream has any; otherwise consecutive events further apart than
    ``SESSION_GAP`` start a new session.
    """
    explicit = any(e.action.startswith("session.") for e in events)
    sessions = []
    start = last = None
    for e in events:
        if explicit:
            if e.action == "session.start":
                if start is not None:
                    sessions.append((start, last))
                start = last = e.timestamp
            elif e.action == "session.end":
                if start is not None:
                    sessions.append((start, e.timestamp))
                start = last = None
            else:
                if start is None:
                    start = e.timestamp
                last = e.timestamp
        else:
            if start is None or e.timestamp - last > SESSION_GAP:
                if start is not None:
                    sessions.append((start, last))
                start = e.timestamp
            last = e.timestamp
    if start is not None:
        sessions.append((start, last))
    return sessions


def _dwell_times(events):
    """Seconds until the next event, zero when the gap exceeds ``SESSION_GAP``."""
    dwell = np.zeros(len(events))
    for i in range(len(events) - 1):
        gap = events[i + 1].timestamp - events[i].timestamp
        if gap <= SESSION_GAP:
            dwell[i] = gap
    return dwell


def _release_time(object_id):
    m = _RELEASE_WEEK.search(object_id)
    if m is None:
        return None
    return (int(m.group(1)) - 1) * SECONDS_PER_WEEK


def _week_features(week_events, week_dwell, week_sessions):
    clicks = [e for e in week_events if not e.action.startswith("session.")]
    video = [e for e in clicks if e.action.startswith("video.")]
    problem = [e for e in clicks if e.action.startswith("problem.")]
    weekend = sum(is_weekend(e.timestamp) for e in clicks)
    weekday = len(clicks) - weekend
    durations = np.array([end - start for start, end in week_sessions], dtype=float)

    video_time = sum(d for e, d in zip(week_events, week_dwell) if e.action.startswith("video."))
    problem_time = sum(d for e, d in zip(week_events, week_dwell) if e.action.startswith("problem."))

    first_seen = {}
    for e in video:
        first_seen.setdefault(e.object_id, e.timestamp)
    delays = []
    for obj, t in first_seen.items():
        release = _release_time(obj)
        if release is not None:
            delays.append(max(0.0, t - release))

    hours = np.bincount([int(e.timestamp % SECONDS_PER_DAY // 3600) for e in clicks], minlength=24)
    if clicks:
        share = hours[hours > 0] / len(clicks)
        peak = 1.0 - float(-(share * np.log(share)).sum()) / np.log(24)
    else:
        peak = 0.0

    # seconds between consecutive submissions on the same problem
    last_submit, gaps = {}, []
    for e in problem:
        if e.action == "problem.submit":
            if e.object_id in last_submit:
                gaps.append(e.timestamp - last_submit[e.object_id])
            last_submit[e.object_id] = e.timestamp

    return {
        "total_clicks": len(clicks),
        "total_clicks_video": len(video),
        "total_clicks_problem": len(problem),
        "total_clicks_weekday": weekday,
        "total_clicks_weekend": weekend,
        "ratio_clicks_weekend_day": weekend / max(weekday, 1),
        "number_sessions": len(week_sessions),
        "time_sessions_mean": float(durations.mean()) if durations.size else 0.0,
        "time_sessions_std": float(durations.std()) if durations.size else 0.0,
        "time_in_video_sum": float(video_time),
        "time_in_problem_sum": float(problem_time),
        "delay_lecture": float(np.mean(delays)) if delays else 0.0,
        "total_clicks_Video.Load": sum(e.action == "video.load" for e in clicks),
        "regularity_peak_dayhour": max(peak, 0.0),
        "student_speed": float(np.mean(gaps)) if gaps else 0.0,
    }


def extract_features(record, weeks, catalog):
    """Raw weekly features of one student, shape ``(weeks, len(catalog))``.

    Weeks without events produce all-zero rows. Events after ``weeks`` are
    ignored.
    """
    if weeks < 1:
        raise InvalidArgumentError(f"weeks must be >= 1, got {weeks}")
    names = catalog.names if hasattr(catalog, "names") else list(catalog)
    events = list(record.events)
    for e in events:
        if e.action not in ACTIONS:
            raise DataFormatError(f"unknown action kind {e.action!r} for student {record.student_id}")
    if any(b.timestamp < a.timestamp for a, b in zip(events, events[1:])):
        raise InvalidArgumentError("events must be sorted by timestamp")

    dwell = _dwell_times(events)
    sessions = _sessions(events)
    out = np.zeros((weeks, len(names)))
    for w in range(1, weeks + 1):
        idx = [i for i, e in enumerate(events) if week_of(e.timestamp) == w]
        if not idx:
            continue
        feats = _week_features(
            [events[i] for i in idx],
            dwell[idx],
            [s for s in sessions if week_of(s[0]) == w],
        )
        for j, name in enumerate(names):
            try:
                out[w - 1, j] = feats[name]
            except KeyError:
                raise InvalidArgumentError(f"no extractor for feature {name!r}") from None
    return out


def build_raw_tensor(records, weeks, catalog, mask_value=MASK_VALUE):
    """Stack per-student features; weeks without any events become the mask value."""
    raw = np.zeros((len(records), weeks, len(catalog)))
    for s, record in enumerate(records):
        raw[s] = extract_features(record, weeks, catalog)
        active = {week_of(e.timestamp) for e in record.events}
        for w in range(1, weeks + 1):
            if w not in active:
                raw[s, w - 1, :] = mask_value
    return raw
