from .agreement import (
    ANNOTATION_HEADER,
    AgreementStat,
    agreement,
    all_pairs,
    cohen_kappa,
    pairwise_agreement,
    percent_agreement,
    read_annotations,
    write_annotations,
)
from .judge import JudgeResult, judge_explanation, parse_verdicts
from .readability import GrammarClient, ReadabilityReport, readability, syllables

__all__ = [
    "ANNOTATION_HEADER",
    "AgreementStat",
    "GrammarClient",
    "JudgeResult",
    "ReadabilityReport",
    "agreement",
    "all_pairs",
    "cohen_kappa",
    "judge_explanation",
    "pairwise_agreement",
    "parse_verdicts",
    "percent_agreement",
    "read_annotations",
    "readability",
    "syllables",
    "write_annotations",
]
