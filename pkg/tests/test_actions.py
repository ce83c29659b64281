import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from xaichain.actions import (
    ACTION_CATALOG,
    ActionSpec,
    SimulationChoice,
    apply_action,
    check_catalog,
    get_action,
    helpful_features,
    percentile_rank,
    read_choices,
    shifted_value,
    simulate_cohort,
    write_choices,
)
from xaichain.data import FeatureTensor
from xaichain.exceptions import DataFormatError, InvalidArgumentError
from xaichain.predictor import ModelSpec, predict

FIXTURE_SET = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0]


def one_feature_cohort(values, weeks=1):
    v = np.asarray(values, dtype=float).reshape(-1, 1, 1)
    v = np.repeat(v, weeks, axis=1)
    return FeatureTensor(v, ["total_clicks"])


def test_catalog_shape():
    assert len(ACTION_CATALOG) == 10
    assert len({a.key for a in ACTION_CATALOG}) == 10
    assert check_catalog()
    assert get_action("add_sessions").target_features == ("number_sessions",)
    with pytest.raises(InvalidArgumentError):
        get_action("meditate")
    with pytest.raises(InvalidArgumentError):
        ActionSpec("x", "x", (), "sideways")


def test_percentile_fixture():
    # median of the set sits at rank 50; rank 75 is position 3.75 -> 0.6 + 0.75 * 0.2
    assert percentile_rank(0.5, FIXTURE_SET) == 50.0
    assert shifted_value(0.5, FIXTURE_SET, 25) == pytest.approx(0.75)
    # 0.4 has rank 40; rank 15 is position 0.75 -> 0.15
    assert shifted_value(0.4, FIXTURE_SET, -25) == pytest.approx(0.15)


def test_clamp_at_extremes():
    assert shifted_value(1.0, FIXTURE_SET, 25) == 1.0
    assert shifted_value(0.0, FIXTURE_SET, -25) == 0.0
    assert percentile_rank(-3.0, FIXTURE_SET) == 0.0
    # values beyond the cohort range never move backwards
    assert shifted_value(1.7, FIXTURE_SET, 25) == 1.7
    assert shifted_value(-0.5, FIXTURE_SET, -25) == -0.5


def test_apply_action_median_to_75th():
    cohort = one_feature_cohort(FIXTURE_SET)
    out = apply_action(np.array([[0.5]]), ActionSpec("a", "a", ("total_clicks",)), 1, cohort)
    assert out[0, 0] == pytest.approx(0.75)


def test_apply_action_fixed_point_and_noop():
    cohort = one_feature_cohort(FIXTURE_SET)
    up = ActionSpec("a", "a", ("total_clicks",))
    row = np.array([[1.0]])
    once = apply_action(row, up, 1, cohort)
    np.testing.assert_array_equal(once, row)
    np.testing.assert_array_equal(apply_action(once, up, 1, cohort), row)
    np.testing.assert_array_equal(apply_action(np.array([[0.3]]), ActionSpec("n", "n", ()), 1, cohort), [[0.3]])


def test_apply_action_only_touches_target_week():
    cohort = FeatureTensor(np.random.default_rng(0).uniform(0, 1, (30, 3, 2)), ["total_clicks", "number_sessions"])
    row = cohort.values[0].copy()
    out = apply_action(row, get_action("add_sessions"), 2, cohort)
    changed = np.argwhere(out != row)
    assert all(tuple(c) == (1, 1) for c in changed)


def test_apply_action_masked_cell_counts_as_zero():
    cohort = one_feature_cohort([-1.0, 0.0, 0.5, 1.0])
    out = apply_action(np.array([[-1.0]]), ActionSpec("a", "a", ("total_clicks",)), 1, cohort)
    assert out[0, 0] > 0.0


def test_apply_action_errors():
    cohort = one_feature_cohort(FIXTURE_SET)
    with pytest.raises(InvalidArgumentError):
        apply_action(np.array([[0.5]]), get_action("add_sessions"), 1, cohort)
    with pytest.raises(InvalidArgumentError):
        apply_action(np.array([[0.5]]), ActionSpec("a", "a", ("total_clicks",)), 2, cohort)


@settings(max_examples=50, deadline=None)
@given(st.floats(0, 1), st.floats(0.1, 5))
def test_increasing_positive_weight_never_raises_fail_prob(value, weight):
    rng = np.random.default_rng(1)
    cohort = one_feature_cohort(rng.uniform(0, 1, 40))
    model = ModelSpec(1, 1, [-weight], bias=0.3, feature_names=["total_clicks"])
    row = np.array([[value]])
    after = apply_action(row, ActionSpec("a", "a", ("total_clicks",)), 1, cohort)
    assert predict(model, after) <= predict(model, row)


def test_simulate_cohort(small_cohort, model6):
    _, tensor, _ = small_cohort
    before = tensor.values.copy()
    ids = tensor.student_ids[:6]
    choices = [SimulationChoice(s, "lime" if i % 2 else "cem", "rs", "add_sessions", (6,)) for i, s in enumerate(ids)]
    choices.append(SimulationChoice(ids[0], "mclime", "ac", "noop", ()))
    noop = {"noop": ActionSpec("noop", "nothing", ())}
    sim = simulate_cohort(choices[:-1], model6, tensor)
    np.testing.assert_array_equal(tensor.values, before)
    for o in sim.outcomes:
        assert o.delta_pass_prob == pytest.approx((1 - o.p_after) - (1 - o.p_before))
    rep = sim.to_dict()
    assert set(rep["by_explainer"]) == {"cem", "lime"}
    assert rep["overall"]["n"] == 6
    zero = simulate_cohort(choices[-1:], model6, tensor, actions=noop)
    assert zero.outcomes[0].delta_pass_prob == 0.0


def test_simulate_shape_mismatch(small_cohort, model6):
    _, tensor, _ = small_cohort
    short = FeatureTensor(tensor.values[:, :5], tensor.feature_names, student_ids=tensor.student_ids)
    with pytest.raises(InvalidArgumentError):
        simulate_cohort([SimulationChoice(tensor.student_ids[0], "lime", "rs", "add_sessions")], model6, short)


def test_helpful_features_sign(model6):
    helpful = helpful_features(model6, 6)
    j = [model6.feature_names.index(n) for n in helpful]
    assert np.all(model6.weights[5, j] < 0)


def test_choices_csv(tmp_path):
    rows = [SimulationChoice("s1", "lime", "rs", "add_sessions", (6, 7)), SimulationChoice("s2", "cem", "ac", "x", ())]
    write_choices(tmp_path / "c.csv", rows)
    assert read_choices(tmp_path / "c.csv") == rows
    (tmp_path / "bad.csv").write_text("student_id,explainer,theory,action_key,weeks_focus\ns,l,r,a,six\n")
    with pytest.raises(DataFormatError):
        read_choices(tmp_path / "bad.csv")
