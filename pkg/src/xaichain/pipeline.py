"""Batch orchestration: explain, prompt, judge, score, and persist every chain."""

import csv
import hashlib
import io
import json
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from threading import Lock

import numpy as np
import yaml

from .data.catalog import FeatureCatalog, load_course
from .data.tensor import FeatureTensor
from .evaluation.judge import JudgeResult, judge_explanation
from .evaluation.readability import GrammarClient, readability
from .exceptions import ConfigurationError, InvalidArgumentError, StageError, XAIChainError
from .explainers.base import EXPLAINER_KINDS, Explanation
from .explainers.cem import CemConfig, cem_pertinent_negative
from .explainers.lime import LimeConfig, lime_explain
from .explainers.mclime import MclimeConfig, mclime_search
from .gateway import Gateway, GatewayConfig, run_two_stage
from .predictor import ModelSpec
from .prompts.registry import GENERAL_QUESTION_COUNT, STAGES, THEORY_KEYS, load_registry
from .prompts.render import render_presentation_prompt, render_selection_prompt, render_visualization_prompt


def derive_seed(global_seed, *parts):
    """Stable 32-bit seed from the global seed and any identifying strings."""
    blob = "|".join([str(global_seed), *map(str, parts)]).encode("utf-8")
    return int(hashlib.sha256(blob).hexdigest()[:8], 16)


def slug(text):
    return re.sub(r"[^A-Za-z0-9._-]+", "-", str(text)).strip("-").lower() or "unnamed"


def _sub_config(cls, data):
    if data is None:
        return cls()
    if isinstance(data, cls):
        return data
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigurationError(f"unknown {cls.__name__} settings: {sorted(unknown)}")
    data = {k: tuple(v) if isinstance(v, list) else v for k, v in data.items()}
    try:
        return cls(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(f"invalid {cls.__name__}: {exc}") from exc


@dataclass(frozen=True)
class PipelineConfig:
    tensor_path: str
    model_path: str
    output_dir: str = "out"
    theory_registry: str = None
    course_path: str = None
    cohort_path: str = None
    students: tuple = ()
    explainers: tuple = EXPLAINER_KINDS
    theories: tuple = THEORY_KEYS
    weeks_elapsed: int = None
    seed: int = 0
    judge: bool = True
    grammar_url: str = None
    max_workers: int = None
    gateway: GatewayConfig = field(default_factory=GatewayConfig)
    lime: LimeConfig = field(default_factory=LimeConfig)
    mclime: MclimeConfig = field(default_factory=MclimeConfig)
    cem: CemConfig = field(default_factory=CemConfig)

    def __post_init__(self):
        for name in ("students", "explainers", "theories"):
            object.__setattr__(self, name, tuple(getattr(self, name) or ()))
        if not self.explainers:
            raise ConfigurationError("select at least one explainer")
        if not self.theories:
            raise ConfigurationError("select at least one theory")
        bad = [e for e in self.explainers if e not in EXPLAINER_KINDS]
        if bad:
            raise ConfigurationError(f"unknown explainers {bad}; expected {', '.join(EXPLAINER_KINDS)}")
        bad = [t for t in self.theories if t not in THEORY_KEYS]
        if bad:
            raise ConfigurationError(f"unknown theories {bad}; expected {', '.join(THEORY_KEYS)}")
        if self.max_workers is not None and self.max_workers < 1:
            raise ConfigurationError("max_workers must be >= 1")

    @classmethod
    def from_dict(cls, data, base_dir=None):
        data = dict(data)
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigurationError(f"unknown pipeline settings: {sorted(unknown)}")
        for key, sub in (("gateway", GatewayConfig), ("lime", LimeConfig), ("mclime", MclimeConfig), ("cem", CemConfig)):
            if key in data and not isinstance(data[key], sub):
                if key == "gateway":
                    try:
                        data[key] = GatewayConfig.from_dict(data[key] or {})
                    except TypeError as exc:
                        raise ConfigurationError(f"invalid gateway settings: {exc}") from exc
                else:
                    data[key] = _sub_config(sub, data[key])
        if base_dir is not None:
            for key in ("tensor_path", "model_path", "output_dir", "theory_registry", "course_path", "cohort_path"):
                if data.get(key) and not Path(data[key]).is_absolute():
                    data[key] = str(Path(base_dir) / data[key])
        for key in ("tensor_path", "model_path"):
            if not data.get(key):
                raise ConfigurationError(f"{key} is required")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigurationError(str(exc)) from exc

    @classmethod
    def from_yaml(cls, path):
        try:
            with open(path, encoding="utf-8") as fh:
                data = yaml.safe_load(fh) or {}
        except (OSError, yaml.YAMLError) as exc:
            raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigurationError("config root must be a mapping")
        return cls.from_dict(data, base_dir=Path(path).parent)

    def to_dict(self):
        d = asdict(self)
        for k in ("students", "explainers", "theories"):
            d[k] = list(d[k])
        return d

    def check_paths(self):
        for key in ("tensor_path", "model_path", "theory_registry", "course_path"):
            value = getattr(self, key)
            if value and not Path(value).exists():
                raise ConfigurationError(f"{key} {value} does not exist")

    @property
    def workers(self):
        return self.max_workers or min(8, self.gateway.max_in_flight)


@dataclass
class ChainRecord:
    provenance: dict
    selection_response: str = None
    presentation_response: str = None
    parsed_feedback: str = None
    parse_status: str = None
    judge: dict = field(default_factory=dict)
    readability: dict = None
    timing: dict = field(default_factory=dict)
    failure_stage: str = None
    error: str = None

    @property
    def complete(self):
        return self.failure_stage is None and self.selection_response is not None and self.presentation_response is not None

    @property
    def key(self):
        p = self.provenance
        return (p.get("course", ""), p.get("student_id", ""), p.get("explainer", ""), p.get("theory", ""))

    def judge_result(self, stage):
        d = self.judge.get(stage)
        return JudgeResult.from_dict(d) if d else None

    def to_dict(self):
        d = asdict(self)
        d["status"] = "complete" if self.complete else "partial"
        return d

    @classmethod
    def from_dict(cls, d):
        d = {k: v for k, v in d.items() if k != "status"}
        return cls(**d)

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def _write(path, text):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


class Pipeline:
    """Loaded, read-only state shared by all chains of one run."""

    def __init__(self, cfg, gateway=None, tensor=None, model=None):
        self.cfg = cfg
        if tensor is None or model is None:
            cfg.check_paths()
        self.tensor = tensor if tensor is not None else FeatureTensor.load(cfg.tensor_path)
        self.model = model if model is not None else ModelSpec.load(cfg.model_path)
        if self.tensor.num_weeks > self.model.input_weeks:
            # predictions use only the weeks the model was trained on
            self.tensor = replace(self.tensor, values=self.tensor.values[:, : self.model.input_weeks])
        if self.tensor.shape[1:] != (self.model.input_weeks, self.model.num_features):
            raise ConfigurationError(
                f"tensor weeks/features {self.tensor.shape[1:]} do not match the model "
                f"({self.model.input_weeks}, {self.model.num_features})"
            )
        self.registry = load_registry(cfg.theory_registry)
        self.course = load_course(cfg.course_path)
        self.catalog = FeatureCatalog.default().subset(self.tensor.feature_names)
        self.gateway = gateway or Gateway(cfg.gateway)
        self.grammar = GrammarClient(cfg.grammar_url) if cfg.grammar_url else None
        self.model_name = Path(cfg.model_path).stem if cfg.model_path else "model"
        self.flat_rows = self.tensor.values.reshape(len(self.tensor.values), -1)
        self._explanations = {}
        self._locks = {}
        self._guard = Lock()
        self.root = Path(cfg.output_dir) / slug(self.course.name)

    @property
    def weeks_elapsed(self):
        return self.cfg.weeks_elapsed or self.model.input_weeks

    def students(self):
        return list(self.cfg.students) or list(self.tensor.student_ids)

    def chain_dir(self, student_id, explainer, theory):
        return self.root / slug(student_id) / explainer / theory

    def _lime(self, student_id):
        cfg = replace(self.cfg.lime, seed=derive_seed(self.cfg.seed, student_id, "lime"))
        return lime_explain(self.model, self.tensor.row(student_id), cfg, self.flat_rows, self.tensor.mask_value)

    def _compute(self, student_id, kind):
        row = self.tensor.row(student_id)
        if kind == "lime":
            return self._lime(student_id)
        if kind == "mclime":
            base = self.explanation(student_id, "lime")
            return mclime_search(self.model, row, base, self.cfg.mclime, self.flat_rows, self.tensor.mask_value)
        return cem_pertinent_negative(self.model, row, self.cfg.cem, self.flat_rows, self.tensor.mask_value)

    def explanation(self, student_id, kind):
        """Explanation for one (student, explainer), computed once per run and shared across theories."""
        key = (student_id, kind)
        with self._guard:
            lock = self._locks.setdefault(key, Lock())
        with lock:
            if key not in self._explanations:
                exp = self._compute(student_id, kind)
                path = self.root / slug(student_id) / kind / "explanation.json"
                path.parent.mkdir(parents=True, exist_ok=True)
                exp.save(path)
                self._explanations[key] = exp
            return self._explanations[key]

    def run_chain(self, student_id, explainer, theory_key):
        if theory_key not in self.registry:
            raise ConfigurationError(f"unknown theory {theory_key!r}")
        if explainer not in EXPLAINER_KINDS:
            raise ConfigurationError(f"unknown explainer {explainer!r}")
        theory = self.registry[theory_key]
        record = ChainRecord(
            {
                "course": self.course.name,
                "student_id": student_id,
                "explainer": explainer,
                "theory": theory_key,
                "model": self.cfg.gateway.model_name,
                "predictor": self.model_name,
                "seed": derive_seed(self.cfg.seed, student_id, explainer, theory_key),
            }
        )
        out = self.chain_dir(student_id, explainer, theory_key)
        stage = "explain"
        clock = time.perf_counter()

        def tick(name):
            nonlocal clock
            now = time.perf_counter()
            record.timing[name] = round(now - clock, 6)
            clock = now

        try:
            exp = self.explanation(student_id, explainer)
            tick("explain")
            stage = "render-selection"
            selection_prompt = render_selection_prompt(self.course, self.catalog, exp, theory)
            stage = "render-presentation"
            presentation_prompt = render_presentation_prompt(theory, self.course, self.weeks_elapsed)
            _write(out / "selection_prompt.txt", selection_prompt)
            _write(out / "presentation_prompt.txt", presentation_prompt)
            stage = "selection"
            try:
                two = run_two_stage(selection_prompt, presentation_prompt, gateway=self.gateway)
            except StageError as exc:
                stage = exc.stage
                raise
            tick("chat")
            record.selection_response = two.selection_response
            record.presentation_response = two.presentation_response
            record.parsed_feedback = two.parsed_feedback
            record.parse_status = two.parse_status
            _write(out / "selection_response.txt", two.selection_response)
            _write(out / "presentation_response.txt", two.presentation_response)
            _write(out / "feedback.txt", two.parsed_feedback)
            _write(
                out / "visualization_prompt.txt",
                render_visualization_prompt(two.selection_response, two.parsed_feedback),
            )
            if self.cfg.judge:
                item = "/".join(record.key[1:])
                for judged_stage, text in (("selection", two.selection_response), ("presentation", two.parsed_feedback)):
                    stage = f"judge-{judged_stage}"
                    result = judge_explanation(text, theory, judged_stage, self.gateway, item_id=item)
                    record.judge[judged_stage] = result.to_dict()
                tick("judge")
            stage = "readability"
            record.readability = readability(two.parsed_feedback, self.grammar).to_dict()
            tick("readability")
        except (XAIChainError, ValueError, ArithmeticError) as exc:
            record.failure_stage = stage
            record.error = f"{type(exc).__name__}: {exc}"
        out.mkdir(parents=True, exist_ok=True)
        record.save(out / "record.json")
        return record

    def tasks(self):
        return [(s, e, t) for s in self.students() for e in self.cfg.explainers for t in self.cfg.theories]

    def run_batch(self):
        tasks = self.tasks()
        with ThreadPoolExecutor(max_workers=self.cfg.workers) as pool:
            records = list(pool.map(lambda task: self.run_chain(*task), tasks))
        return sorted(records, key=lambda r: r.key)


def run_chain(student_id, explainer_kind, theory_key, cfg, gateway=None):
    if theory_key not in THEORY_KEYS:
        raise ConfigurationError(f"unknown theory {theory_key!r}")
    return Pipeline(cfg, gateway).run_chain(student_id, explainer_kind, theory_key)


def run_batch(cfg, gateway=None):
    return Pipeline(cfg, gateway).run_batch()


def load_records(directory):
    paths = sorted(Path(directory).rglob("record.json"))
    return [ChainRecord.load(p) for p in paths]


# ---------------------------------------------------------------- reporting


def _stat(values):
    v = np.asarray([x for x in values if x is not None], dtype=np.float64)
    if v.size == 0:
        return {"mean": None, "std": None, "n": 0}
    return {"mean": float(v.mean()), "std": float(v.std()), "n": int(v.size)}


def report(records):
    """Per (explainer, theory, stage) yes-rate table plus readability aggregates.

    Standard deviations are population deviations over chains.
    """
    records = list(records)
    if not records:
        raise InvalidArgumentError("no records to report")
    groups = {}
    for r in records:
        groups.setdefault((r.provenance["explainer"], r.provenance["theory"]), []).append(r)

    table = []
    for (explainer, theory), rs in sorted(groups.items()):
        for stage in STAGES:
            results = [jr for jr in (r.judge_result(stage) for r in rs) if jr is not None]
            if not results:
                continue
            g = GENERAL_QUESTION_COUNT[stage]
            row = {"explainer": explainer, "theory": theory, "stage": stage, "n": len(results)}
            for q in range(g):
                row[f"Q{q + 1}"] = _stat([jr.verdicts[q] if q < len(jr.verdicts) else None for jr in results])
            row["theory_specific"] = _stat([jr.specific_mean for jr in results])
            row["overall"] = _stat([jr.overall for jr in results])
            table.append(row)

    read = {}
    for dim in ("model", "course", "explainer"):
        buckets = {}
        for r in records:
            if r.readability:
                buckets.setdefault(r.provenance.get(dim), []).append(r.readability)
        read[dim] = {
            str(k): {m: _stat([x[m] for x in v]) for m in ("flesch_kincaid_grade", "gunning_fog", "smog")}
            for k, v in sorted(buckets.items(), key=lambda kv: str(kv[0]))
        }
    return {
        "chains": len(records),
        "complete": sum(r.complete for r in records),
        "partial": [
            {"key": list(r.key), "failure_stage": r.failure_stage, "error": r.error}
            for r in sorted(records, key=lambda r: r.key)
            if not r.complete
        ],
        "judge_table": table,
        "readability": read,
    }


def _fmt(stat):
    if stat["mean"] is None:
        return ""
    return f"{stat['mean']:.4f} ± {stat['std']:.4f}"


def judge_table_csv(rep):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    qcols = max((len([k for k in row if re.fullmatch(r"Q\d+", k)]) for row in rep["judge_table"]), default=0)
    w.writerow(["explainer", "theory", "stage", "n", *[f"Q{i + 1}" for i in range(qcols)], "theory_specific", "overall"])
    for row in rep["judge_table"]:
        qs = [_fmt(row[f"Q{i + 1}"]) if f"Q{i + 1}" in row else "" for i in range(qcols)]
        w.writerow([row["explainer"], row["theory"], row["stage"], row["n"], *qs,
                    _fmt(row["theory_specific"]), _fmt(row["overall"])])
    return buf.getvalue()


def readability_csv(rep):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["dimension", "value", "flesch_kincaid_grade", "gunning_fog", "smog"])
    for dim, table in rep["readability"].items():
        for value, metrics in table.items():
            w.writerow([dim, value, *[_fmt(metrics[m]) for m in ("flesch_kincaid_grade", "gunning_fog", "smog")]])
    return buf.getvalue()


def write_report(rep, directory):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    (directory / "report.json").write_text(json.dumps(rep, indent=2, sort_keys=True, ensure_ascii=False), encoding="utf-8")
    (directory / "judge_table.csv").write_text(judge_table_csv(rep), encoding="utf-8")
    (directory / "readability.csv").write_text(readability_csv(rep), encoding="utf-8")
    return directory
