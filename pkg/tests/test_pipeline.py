import json
from dataclasses import replace

import pytest
import yaml

from xaichain.cli import main
from xaichain.evaluation import JudgeResult
from xaichain.exceptions import ConfigurationError, InvalidArgumentError
from xaichain.gateway import Gateway, GatewayConfig
from xaichain.pipeline import (
    ChainRecord,
    Pipeline,
    PipelineConfig,
    derive_seed,
    load_records,
    report,
    run_chain,
    write_report,
)
from xaichain.predictor import ModelSpec


@pytest.fixture
def cfg(pipeline_inputs, tmp_path):
    return PipelineConfig.from_dict(
        {
            "tensor_path": str(pipeline_inputs / "tensor.json"),
            "model_path": str(pipeline_inputs / "model.json"),
            "output_dir": str(tmp_path / "out"),
            "students": ["s00"],
            "lime": {"num_samples": 1000},
            "cem": {"max_iterations": 200, "c_steps": 4},
        }
    )


def test_single_chain_record(cfg):
    rec = run_chain("s00", "lime", "rs", cfg)
    assert rec.complete
    assert len(rec.judge["selection"]["verdicts"]) == 8
    assert len(rec.judge["presentation"]["verdicts"]) == 9
    assert rec.parse_status == "ok"
    assert rec.readability["flesch_kincaid_grade"] is not None
    d = rec.provenance
    assert (d["student_id"], d["explainer"], d["theory"]) == ("s00", "lime", "rs")


def test_layout_and_persistence(cfg, tmp_path):
    pipe = Pipeline(cfg)
    rec = pipe.run_chain("s00", "cem", "sr")
    base = tmp_path / "out" / "digital-signal-processing-1" / "s00"
    chain = base / "cem" / "sr"
    for name in ("selection_prompt.txt", "selection_response.txt", "presentation_prompt.txt",
                 "presentation_response.txt", "feedback.txt", "visualization_prompt.txt", "record.json"):
        assert (chain / name).is_file(), name
    assert (base / "cem" / "explanation.json").is_file()
    assert ChainRecord.load(chain / "record.json").to_dict() == rec.to_dict()


def test_invalid_theory_fails_before_any_call(cfg):
    calls = []
    gw = Gateway(GatewayConfig(), responder=lambda m: calls.append(m) or "x")
    with pytest.raises(ConfigurationError):
        run_chain("s00", "lime", "horoscope", cfg, gateway=gw)
    assert calls == []
    with pytest.raises(ConfigurationError):
        PipelineConfig.from_dict({"tensor_path": "a", "model_path": "b", "theories": ["horoscope"]})
    with pytest.raises(ConfigurationError):
        PipelineConfig.from_dict({"tensor_path": "a", "model_path": "b", "explainers": []})


def test_missing_paths(tmp_path):
    cfg = PipelineConfig.from_dict({"tensor_path": str(tmp_path / "none.json"), "model_path": str(tmp_path / "m")})
    with pytest.raises(ConfigurationError):
        Pipeline(cfg)


def test_partial_record_on_stage_failure(cfg):
    def responder(messages):
        if len(messages) > 1:
            raise RuntimeError("presentation backend down")
        return "a report"

    rec = Pipeline(cfg, gateway=Gateway(GatewayConfig(), responder=responder)).run_chain("s00", "lime", "ac")
    assert not rec.complete
    assert rec.failure_stage == "presentation"
    assert rec.to_dict()["status"] == "partial"


def test_judge_parse_failure_is_partial(cfg):
    def responder(messages):
        if "QUESTIONS:" in messages[-1]["content"]:
            return "I cannot answer."
        return '{"feedback": "fine"}'

    rec = Pipeline(cfg, gateway=Gateway(GatewayConfig(), responder=responder)).run_chain("s00", "lime", "ac")
    assert rec.failure_stage == "judge-selection"


def test_batch_and_byte_identical_reports(cfg, tmp_path):
    small = replace(cfg, explainers=("lime", "mclime"), theories=("rs", "cot"))
    first = Pipeline(small).run_batch()
    assert len(first) == 4 and all(r.complete for r in first)
    assert [r.key for r in first] == sorted(r.key for r in first)
    write_report(report(first), tmp_path / "r1")
    second = Pipeline(replace(small, output_dir=str(tmp_path / "out2"))).run_batch()
    write_report(report(second), tmp_path / "r2")
    for name in ("report.json", "judge_table.csv", "readability.csv"):
        assert (tmp_path / "r1" / name).read_bytes() == (tmp_path / "r2" / name).read_bytes()
    assert len(load_records(tmp_path / "out")) == 4


def test_seeds_are_stable_and_distinct():
    assert derive_seed(0, "s1", "lime", "rs") == derive_seed(0, "s1", "lime", "rs")
    assert derive_seed(0, "s1", "lime", "rs") != derive_seed(0, "s1", "lime", "ac")
    assert derive_seed(0, "s1") != derive_seed(1, "s1")


def fake_record(explainer, theory, sel, pres=None):
    questions = [f"q{i}" for i in range(len(sel))]
    judge = {"selection": JudgeResult(theory, "selection", questions, sel).to_dict()}
    if pres is not None:
        judge["presentation"] = JudgeResult(theory, "presentation", [f"p{i}" for i in range(len(pres))], pres).to_dict()
    return ChainRecord(
        {"course": "c", "student_id": f"s{len(sel)}{sum(sel)}", "explainer": explainer, "theory": theory, "model": "m"},
        "sel", "pres", "fb", "ok", judge,
        {"flesch_kincaid_grade": 5.0, "gunning_fog": 6.0, "smog": 7.0, "counts": {}},
    )


def test_report_all_yes():
    rep = report([fake_record("lime", "rs", [True] * 8, [True] * 9), fake_record("lime", "rs", [True] * 8, [True] * 9)])
    for row in rep["judge_table"]:
        for key, stat in row.items():
            if isinstance(stat, dict):
                assert stat["mean"] == 1.0 and stat["std"] == 0.0


def test_report_half_yes():
    # two chains: all-yes and all-no -> mean 0.5, population std 0.5
    recs = [fake_record("cem", "sr", [True] * 5), fake_record("cem", "sr", [False] * 5)]
    (row,) = report(recs)["judge_table"]
    assert row["stage"] == "selection" and row["n"] == 2
    assert row["Q1"] == {"mean": 0.5, "std": 0.5, "n": 2}
    assert row["theory_specific"] == {"mean": 0.5, "std": 0.5, "n": 2}
    assert row["overall"]["mean"] == 0.5


def test_report_empty():
    with pytest.raises(InvalidArgumentError):
        report([])


# --------------------------------------------------------------- CLI


def test_cli_end_to_end(tmp_path, capsys):
    data = tmp_path / "data"
    assert main(["gen-data", "--students", "40", "--weeks", "6", "--seed", "2", "--out-dir", str(data)]) == 0
    assert main(["train", "--tensor", str(data / "tensor.json"), "--labels", str(data / "labels.csv"),
                 "--out", str(data / "m6.json"), "--epochs", "100"]) == 0
    assert main(["train", "--tensor", str(data / "tensor.json"), "--labels", str(data / "labels.csv"),
                 "--weeks", "5", "--out", str(data / "m5.json"), "--epochs", "100"]) == 0
    assert ModelSpec.load(data / "m5.json").input_weeks == 5

    assert main(["explain", "--tensor", str(data / "tensor.json"), "--model", str(data / "m5.json"),
                 "--student", "s00", "--explainer", "lime", "--samples", "300", "--out", str(tmp_path / "e.json")]) == 0

    # the six-week tensor is cut to the model's five weeks
    conf = {
        "tensor_path": "data/tensor.json",
        "model_path": "data/m5.json",
        "output_dir": "run",
        "students": ["s00"],
        "explainers": ["lime"],
        "theories": ["rs", "nr"],
        "gateway": {"backend": "mock"},
        "lime": {"num_samples": 500},
    }
    (tmp_path / "cfg.yaml").write_text(yaml.safe_dump(conf))
    assert main(["chain", "--config", str(tmp_path / "cfg.yaml")]) == 0
    assert (tmp_path / "run" / "report" / "judge_table.csv").is_file()
    assert main(["report", "--records", str(tmp_path / "run"), "--out", str(tmp_path / "rep")]) == 0

    fb = next((tmp_path / "run").rglob("feedback.txt"))
    assert main(["readability", "--text", str(fb), "--out", str(tmp_path / "read.json")]) == 0
    assert json.loads((tmp_path / "read.json").read_text())["counts"]["words"] > 0
    assert main(["judge", "--text", str(fb), "--theory", "nr", "--stage", "presentation",
                 "--out", str(tmp_path / "j.json")]) == 0
    assert len(json.loads((tmp_path / "j.json").read_text())["verdicts"]) == 8

    (tmp_path / "choices.csv").write_text(
        "student_id,explainer,theory,action_key,weeks_focus\ns00,lime,rs,add_sessions,6;7\n"
    )
    assert main(["simulate", "--tensor", str(data / "tensor.json"), "--model", str(data / "m6.json"),
                 "--choices", str(tmp_path / "choices.csv"), "--out", str(tmp_path / "sim.json")]) == 0
    assert json.loads((tmp_path / "sim.json").read_text())["overall"]["n"] == 1


def test_cli_exit_codes(tmp_path, pipeline_inputs):
    bad = tmp_path / "bad.yaml"
    bad.write_text(yaml.safe_dump({"tensor_path": str(pipeline_inputs / "tensor.json"),
                                   "model_path": str(pipeline_inputs / "model.json"), "theories": ["nope"]}))
    assert main(["chain", "--config", str(bad)]) == 2
    assert main(["chain", "--config", str(tmp_path / "missing.yaml")]) == 2
    assert main(["report", "--records", str(tmp_path)]) == 2

    # a judge that never answers properly leaves every chain partial
    conf = {
        "tensor_path": str(pipeline_inputs / "tensor.json"),
        "model_path": str(pipeline_inputs / "model.json"),
        "output_dir": str(tmp_path / "o"),
        "students": ["s00"],
        "explainers": ["lime"],
        "theories": ["rs"],
        "gateway": {"backend": "live", "endpoint_url": "http://127.0.0.1:9/none", "max_retries": 0, "timeout": 0.5},
        "lime": {"num_samples": 300},
    }
    (tmp_path / "live.yaml").write_text(yaml.safe_dump(conf))
    assert main(["chain", "--config", str(tmp_path / "live.yaml")]) == 1
