"""Cohort CSV files: one of events, one of labels, header rows required."""

import csv

from ..exceptions import DataFormatError
from .events import InteractionEvent, StudentRecord

EVENT_COLUMNS = ("student_id", "timestamp", "action", "object_id")
LABEL_COLUMNS = ("student_id", "label")


def write_cohort_csv(records, events_path, labels_path):
    with open(events_path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(EVENT_COLUMNS)
        for r in records:
            for e in r.events:
                w.writerow((r.student_id, repr(float(e.timestamp)), e.action, e.object_id))
    with open(labels_path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(LABEL_COLUMNS)
        for r in records:
            w.writerow((r.student_id, r.label))


def _read(path, columns):
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or tuple(reader.fieldnames[: len(columns)]) != columns:
            raise DataFormatError(f"{path}: expected header {','.join(columns)}")
        return list(reader)


def read_cohort_csv(events_path, labels_path):
    """Read records in label-file order; events are sorted per student."""
    labels = _read(labels_path, LABEL_COLUMNS)
    events = {}
    for row in _read(events_path, EVENT_COLUMNS):
        try:
            e = InteractionEvent(float(row["timestamp"]), row["action"], row["object_id"] or "")
        except ValueError as exc:
            raise DataFormatError(f"bad event row {row}: {exc}") from exc
        events.setdefault(row["student_id"], []).append(e)
    records = []
    for row in labels:
        try:
            label = int(row["label"])
        except ValueError as exc:
            raise DataFormatError(f"bad label row {row}") from exc
        sid = row["student_id"]
        records.append(StudentRecord(sid, sorted(events.get(sid, [])), label))
    return records
