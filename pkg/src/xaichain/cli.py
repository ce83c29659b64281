"""Command-line entry point.

Exit status: 0 on success, 1 when some chains ended partially, 2 on
configuration or input errors.
"""

import argparse
import csv
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import actions as actions_mod
from .data import FeatureCatalog, build_raw_tensor, generate_cohort, normalize_tensor, write_cohort_csv
from .data.tensor import FeatureTensor
from .evaluation import judge_explanation, readability
from .evaluation.readability import GrammarClient
from .exceptions import ConfigurationError, DataFormatError, InvalidArgumentError, XAIChainError
from .explainers.base import EXPLAINER_KINDS
from .explainers.cem import cem_pertinent_negative
from .explainers.lime import LimeConfig, lime_explain
from .explainers.mclime import mclime_search
from .gateway import Gateway, GatewayConfig
from .pipeline import Pipeline, PipelineConfig, load_records, report, write_report
from .predictor import ModelSpec, TrainConfig, train
from .prompts.registry import STAGES, THEORY_KEYS, get_theory

EXIT_OK, EXIT_PARTIAL, EXIT_CONFIG = 0, 1, 2


def _dump(obj, path=None):
    text = json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False)
    if path:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)


def read_labels(path, student_ids):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "student_id" not in reader.fieldnames or "label" not in reader.fieldnames:
            raise DataFormatError(f"{path}: expected columns student_id,label")
        table = {row["student_id"]: int(row["label"]) for row in reader}
    missing = [s for s in student_ids if s not in table]
    if missing:
        raise DataFormatError(f"{len(missing)} students have no label, e.g. {missing[0]}")
    return np.array([table[s] for s in student_ids])


def cmd_gen_data(args):
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    records = generate_cohort(args.students, args.weeks, args.seed)
    write_cohort_csv(records, out / "events.csv", out / "labels.csv")
    catalog = FeatureCatalog.implemented()
    raw = build_raw_tensor(records, args.weeks, catalog)
    tensor = normalize_tensor(raw, feature_names=catalog.names, student_ids=[r.student_id for r in records])
    tensor.save(out / "tensor.json")
    print(f"wrote {len(records)} students x {args.weeks} weeks to {out}")
    return EXIT_OK


def cmd_train(args):
    tensor = FeatureTensor.load(args.tensor)
    if args.weeks:
        if args.weeks > tensor.num_weeks:
            raise InvalidArgumentError(f"tensor has only {tensor.num_weeks} weeks")
        tensor = replace(tensor, values=tensor.values[:, : args.weeks])
    labels = read_labels(args.labels, tensor.student_ids)
    cfg = TrainConfig(args.learning_rate, args.epochs, args.l2, args.seed)
    model = train(tensor, labels, cfg)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    model.save(args.out)
    _dump(model.metrics)
    return EXIT_OK


def cmd_explain(args):
    tensor = FeatureTensor.load(args.tensor)
    model = ModelSpec.load(args.model)
    if tensor.num_weeks > model.input_weeks:
        tensor = replace(tensor, values=tensor.values[:, : model.input_weeks])
    rows = tensor.values.reshape(len(tensor.values), -1)
    row = tensor.row(args.student)
    lime_cfg = LimeConfig(num_samples=args.samples, seed=args.seed)
    if args.explainer == "lime":
        exp = lime_explain(model, row, lime_cfg, rows, tensor.mask_value)
    elif args.explainer == "mclime":
        base = lime_explain(model, row, lime_cfg, rows, tensor.mask_value)
        exp = mclime_search(model, row, base, training_data=rows, mask_value=tensor.mask_value)
    else:
        exp = cem_pertinent_negative(model, row, training_data=rows, mask_value=tensor.mask_value)
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        exp.save(args.out)
    else:
        _dump(exp.to_dict())
    return EXIT_OK


def _load_config(args):
    cfg = PipelineConfig.from_yaml(args.config)
    overrides = {}
    if getattr(args, "out_dir", None):
        overrides["output_dir"] = args.out_dir
    if getattr(args, "backend", None):
        overrides["gateway"] = replace(cfg.gateway, backend=args.backend)
    if getattr(args, "students", None):
        overrides["students"] = tuple(args.students)
    if getattr(args, "explainers", None):
        overrides["explainers"] = tuple(args.explainers)
    if getattr(args, "theories", None):
        overrides["theories"] = tuple(args.theories)
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    return replace(cfg, **overrides) if overrides else cfg


def cmd_chain(args):
    cfg = _load_config(args)
    pipe = Pipeline(cfg)
    try:
        records = pipe.run_batch()
    finally:
        pipe.gateway.close()
    rep = report(records)
    write_report(rep, Path(cfg.output_dir) / "report")
    partial = [r for r in records if not r.complete]
    print(f"{len(records) - len(partial)} complete, {len(partial)} partial; outputs in {cfg.output_dir}")
    for r in partial:
        print(f"partial {'/'.join(r.key[1:])}: {r.failure_stage}: {r.error}", file=sys.stderr)
    return EXIT_PARTIAL if partial else EXIT_OK


def _gateway_from(args):
    if args.config:
        return Gateway(PipelineConfig.from_yaml(args.config).gateway)
    return Gateway(GatewayConfig())


def cmd_judge(args):
    text = Path(args.text).read_text(encoding="utf-8")
    with _gateway_from(args) as gw:
        result = judge_explanation(text, get_theory(args.theory), args.stage, gw, item_id=args.item_id)
    _dump(result.to_dict(), args.out)
    return EXIT_OK


def cmd_readability(args):
    text = Path(args.text).read_text(encoding="utf-8")
    grammar = GrammarClient(args.grammar_url) if args.grammar_url else None
    _dump(readability(text, grammar).to_dict(), args.out)
    return EXIT_OK


def cmd_simulate(args):
    tensor = FeatureTensor.load(args.tensor)
    model = ModelSpec.load(args.model)
    if tensor.num_weeks > model.input_weeks:
        tensor = replace(tensor, values=tensor.values[:, : model.input_weeks])
    choices = actions_mod.read_choices(args.choices)
    sim = actions_mod.simulate_cohort(choices, model, tensor, week=args.week)
    _dump(sim.to_dict(), args.out)
    return EXIT_OK


def cmd_report(args):
    records = load_records(args.records)
    if not records:
        raise InvalidArgumentError(f"no record.json files under {args.records}")
    out = write_report(report(records), args.out or Path(args.records) / "report")
    print(f"report written to {out}")
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="xaichain", description="Explanation-chain pipeline for learner feedback.")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-data", help="generate a synthetic cohort and its feature tensor")
    g.add_argument("--students", type=int, default=200)
    g.add_argument("--weeks", type=int, default=10)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out-dir", required=True)
    g.set_defaults(func=cmd_gen_data)

    t = sub.add_parser("train", help="fit the logistic predictor")
    t.add_argument("--tensor", required=True)
    t.add_argument("--labels", required=True)
    t.add_argument("--out", required=True)
    t.add_argument("--weeks", type=int, help="use only the first N weeks")
    t.add_argument("--learning-rate", type=float, default=1.0)
    t.add_argument("--epochs", type=int, default=500)
    t.add_argument("--l2", type=float, default=1e-3)
    t.add_argument("--seed", type=int, default=0)
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("explain", help="explain one student's prediction")
    e.add_argument("--tensor", required=True)
    e.add_argument("--model", required=True)
    e.add_argument("--student", required=True)
    e.add_argument("--explainer", choices=EXPLAINER_KINDS, required=True)
    e.add_argument("--samples", type=int, default=5000)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--out")
    e.set_defaults(func=cmd_explain)

    c = sub.add_parser("chain", help="run every configured chain")
    c.add_argument("--config", required=True)
    c.add_argument("--out-dir")
    c.add_argument("--backend", choices=("live", "mock"))
    c.add_argument("--students", nargs="+")
    c.add_argument("--explainers", nargs="+", choices=EXPLAINER_KINDS)
    c.add_argument("--theories", nargs="+", choices=THEORY_KEYS)
    c.add_argument("--seed", type=int)
    c.set_defaults(func=cmd_chain)

    j = sub.add_parser("judge", help="score a text against a theory's questions")
    j.add_argument("--text", required=True)
    j.add_argument("--theory", choices=THEORY_KEYS, required=True)
    j.add_argument("--stage", choices=STAGES, required=True)
    j.add_argument("--config", help="pipeline config supplying gateway settings")
    j.add_argument("--item-id")
    j.add_argument("--out")
    j.set_defaults(func=cmd_judge)

    r = sub.add_parser("readability", help="readability grades of a text file")
    r.add_argument("--text", required=True)
    r.add_argument("--grammar-url")
    r.add_argument("--out")
    r.set_defaults(func=cmd_readability)

    s = sub.add_parser("simulate", help="apply chosen actions and re-predict")
    s.add_argument("--tensor", required=True)
    s.add_argument("--model", required=True, help="model trained on the first six weeks")
    s.add_argument("--choices", required=True)
    s.add_argument("--week", type=int, default=actions_mod.SIMULATION_WEEK)
    s.add_argument("--out")
    s.set_defaults(func=cmd_simulate)

    rp = sub.add_parser("report", help="aggregate persisted chain records")
    rp.add_argument("--records", required=True)
    rp.add_argument("--out")
    rp.set_defaults(func=cmd_report)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigurationError, InvalidArgumentError, DataFormatError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except XAIChainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARTIAL


if __name__ == "__main__":
    sys.exit(main())
