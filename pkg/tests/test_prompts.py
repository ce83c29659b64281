import itertools

import pytest

from xaichain.data import FeatureCatalog, load_course
from xaichain.exceptions import ConfigurationError, InvalidArgumentError, RenderError
from xaichain.explainers import Attribution, Explanation
from xaichain.gateway import ChatTurn
from xaichain.prompts import (
    THEORY_KEYS,
    get_theory,
    load_registry,
    render_conversation,
    render_judge_prompt,
    render_presentation_prompt,
    render_selection_prompt,
    render_visualization_prompt,
)
from xaichain.prompts.render import fill

QUESTION_COUNTS = {
    "rs": (8, 9),
    "ac": (8, 9),
    "pearl": (8, 9),
    "nr": (7, 8),
    "base_contrastive": (8, 10),
    "rar_contrastive": (9, 10),
    "sr": (5, 9),
    "cot": (5, 7),
}


@pytest.fixture(scope="module")
def cem_explanation(fixtures_dir):
    return Explanation.load(fixtures_dir / "dsp_cem_explanation.json")


def sample_explanation(kind):
    attrs = [Attribution("number_sessions", 5, 0.4), Attribution("total_clicks", 2, -0.2)]
    values = {"number_sessions_InWeek5": 0.1, "total_clicks_InWeek2": 0.3}
    cfs = [{"number_sessions_InWeek5": 0.5}] if kind == "mclime" else []
    return Explanation(kind, attrs, cfs, "fail", 0.8, values)


def test_selection_golden(cem_explanation, fixtures_dir):
    text = render_selection_prompt(load_course(), FeatureCatalog.default(), cem_explanation, get_theory("rs"))
    assert "number_sessions_InWeek5 - 0.466320" in text
    assert "MODEL PREDICTION: pass, with 74.538538% of confidence." in text
    assert text == (fixtures_dir / "golden_selection_dsp_cem_rs.txt").read_text(encoding="utf-8")


def test_presentation_golden(fixtures_dir):
    text = render_presentation_prompt(get_theory("ac"), load_course(), 5)
    assert text == (fixtures_dir / "golden_presentation_dsp_ac_w5.txt").read_text(encoding="utf-8")
    assert "5 weeks of the course have concluded." in text


def test_visualization_golden(fixtures_dir):
    text = render_visualization_prompt("REPORT TEXT", "SUMMARY TEXT")
    assert text == (fixtures_dir / "golden_visualization.txt").read_text(encoding="utf-8")


@pytest.mark.parametrize("theory,kind", list(itertools.product(THEORY_KEYS, ("lime", "mclime", "cem"))))
def test_every_render_succeeds(theory, kind):
    t = get_theory(theory)
    text = render_selection_prompt(load_course(), FeatureCatalog.default(), sample_explanation(kind), t)
    assert "{" not in text.replace("{'", "")
    assert t.selection_instructions.strip().splitlines()[0] in text
    assert render_presentation_prompt(t, load_course(), 3)


def test_question_counts():
    reg = load_registry()
    assert tuple(reg) == THEORY_KEYS
    for key, (sel, pres) in QUESTION_COUNTS.items():
        assert len(reg[key].questions("selection")) == sel
        assert len(reg[key].questions("presentation")) == pres


def test_base_contrastive_keeps_its_wording():
    q2 = get_theory("base_contrastive").questions("selection")[1]
    assert "based only on" in q2
    assert "based largely on" in get_theory("rs").questions("selection")[1]


def test_unknown_theory():
    with pytest.raises(ConfigurationError):
        get_theory("astrology")


def test_unknown_slot_raises():
    with pytest.raises(RenderError) as info:
        fill("hello {who}", {})
    assert info.value.symbol == "who"


def test_inserted_text_is_not_rescanned():
    assert fill("{a}", {"a": "{b}"}) == "{b}"


def test_unresolvable_feature_is_rejected():
    bad = Explanation("lime", [Attribution("teleport_count", 1, 0.5)], [], "fail", 0.9, {})
    with pytest.raises(RenderError):
        render_selection_prompt(load_course(), FeatureCatalog.default(), bad, get_theory("rs"))


def test_judge_prompt_numbering():
    text = render_judge_prompt("Some text.", ["First?", "Second?"])
    assert "1. First?\n2. Second?" in text
    assert "GENERATED TEXT:\nSome text." in text
    with pytest.raises(InvalidArgumentError):
        render_judge_prompt("x", [])


def test_conversation_rendering():
    text = render_conversation([ChatTurn("user", "hi"), ChatTurn("assistant", "hello")], "next")
    assert text.startswith("Current conversation:\nHuman: hi\nAI: hello\nnext")
    assert text.rstrip().endswith("AI Assistant:")


def test_registry_from_directory(tmp_path):
    import shutil
    from importlib import resources

    src = resources.files("xaichain.prompts.assets").joinpath("theories")
    shutil.copytree(str(src), tmp_path / "theories")
    reg = load_registry(tmp_path / "theories")
    assert reg["sr"].questions("selection") == get_theory("sr").questions("selection")
    (tmp_path / "theories" / "cot" / "selection.txt").unlink()
    with pytest.raises(ConfigurationError):
        load_registry(tmp_path / "theories")
