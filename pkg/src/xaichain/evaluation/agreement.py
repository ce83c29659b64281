"""Inter-rater agreement on binary verdicts, plus annotation-file ingestion."""

import csv
from dataclasses import asdict, dataclass
from fractions import Fraction
from itertools import combinations

from ..exceptions import DataFormatError, InvalidArgumentError

ANNOTATION_HEADER = ("annotator_id", "item_id", "question_idx", "verdict")
_TRUE = {"yes", "y", "true", "1"}
_FALSE = {"no", "n", "false", "0"}


def _pair(a, b):
    a, b = [bool(x) for x in a], [bool(x) for x in b]
    if len(a) != len(b):
        raise InvalidArgumentError(f"length mismatch: {len(a)} vs {len(b)}")
    if not a:
        raise InvalidArgumentError("verdict lists must be non-empty")
    return a, b


def _observed_expected(a, b):
    n = len(a)
    p_o = Fraction(sum(x == y for x, y in zip(a, b)), n)
    pa, pb = Fraction(sum(a), n), Fraction(sum(b), n)
    p_e = pa * pb + (1 - pa) * (1 - pb)
    return p_o, p_e


def cohen_kappa(a, b):
    """Two-category kappa, computed in exact rationals.

    When both annotators give one constant answer ``p_e`` is 1 and the ratio
    is undefined; identical lists then score 1.0.
    """
    a, b = _pair(a, b)
    p_o, p_e = _observed_expected(a, b)
    if p_e == 1:
        return 1.0 if p_o == 1 else 0.0
    return float((p_o - p_e) / (1 - p_e))


def percent_agreement(a, b):
    a, b = _pair(a, b)
    return float(100 * _observed_expected(a, b)[0])


@dataclass(frozen=True)
class AgreementStat:
    cohen_kappa: float
    percent_agreement: float
    n_items: int

    def to_dict(self):
        return asdict(self)


def agreement(a, b):
    a, b = _pair(a, b)
    return AgreementStat(cohen_kappa(a, b), percent_agreement(a, b), len(a))


def parse_verdict_token(token):
    t = str(token).strip().lower()
    if t in _TRUE:
        return True
    if t in _FALSE:
        return False
    raise DataFormatError(f"unrecognised verdict {token!r}")


def read_annotations(path):
    """Load ``{annotator_id: {(item_id, question_idx): bool}}`` from a CSV file."""
    out = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != ANNOTATION_HEADER:
            raise DataFormatError(f"annotation header must be {','.join(ANNOTATION_HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            try:
                key = (row["item_id"], int(row["question_idx"]))
            except ValueError:
                raise DataFormatError(f"line {lineno}: question_idx must be an integer") from None
            table = out.setdefault(row["annotator_id"], {})
            if key in table:
                raise DataFormatError(f"line {lineno}: duplicate verdict for {key}")
            table[key] = parse_verdict_token(row["verdict"])
    return out


def write_annotations(path, annotations):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(ANNOTATION_HEADER)
        for annotator in sorted(annotations):
            for (item, q), v in sorted(annotations[annotator].items()):
                w.writerow([annotator, item, q, "YES" if v else "NO"])


def pairwise_agreement(annotations, first, second):
    """Agreement between two annotators over the items both of them rated."""
    missing = [x for x in (first, second) if x not in annotations]
    if missing:
        raise InvalidArgumentError(f"no annotations from {missing}")
    a, b = annotations[first], annotations[second]
    shared = sorted(set(a) & set(b))
    if not shared:
        raise InvalidArgumentError(f"{first} and {second} share no rated items")
    return agreement([a[k] for k in shared], [b[k] for k in shared])


def all_pairs(annotations):
    return {(x, y): pairwise_agreement(annotations, x, y) for x, y in combinations(sorted(annotations), 2)}
