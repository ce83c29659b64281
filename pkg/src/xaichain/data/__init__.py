"""Synthetic clickstreams, feature extraction and tensor normalization."""

from .catalog import FeatureCatalog, CourseDescriptor, load_course, IMPLEMENTED_FEATURES
from .events import ACTIONS, InteractionEvent, StudentRecord, week_of
from .synth import generate_clickstream, generate_cohort
from .features import extract_features, build_raw_tensor
from .tensor import FeatureTensor, MinMaxTensorScaler, normalize_tensor
from .cohort_io import write_cohort_csv, read_cohort_csv

__all__ = [
    "ACTIONS",
    "CourseDescriptor",
    "FeatureCatalog",
    "FeatureTensor",
    "IMPLEMENTED_FEATURES",
    "InteractionEvent",
    "MinMaxTensorScaler",
    "StudentRecord",
    "build_raw_tensor",
    "extract_features",
    "generate_clickstream",
    "generate_cohort",
    "load_course",
    "normalize_tensor",
    "read_cohort_csv",
    "week_of",
    "write_cohort_csv",
]
