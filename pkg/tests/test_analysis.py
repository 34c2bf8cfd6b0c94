import json
import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from horizon_pu.analysis import (
    TABLE_COLUMNS,
    SplitError,
    WelchResult,
    assessment_table,
    average_ranks,
    betainc_reg,
    mean_assessment,
    quantile_split,
    rank_agreement,
    read_table_csv,
    roc_auc,
    student_t_cdf,
    table_csv,
    timeseries_csv,
    welch_ttest,
)
from horizon_pu.corpus import period_slice
from tests.helpers import brute_auc, make_corpus

FIXTURES = json.loads((Path(__file__).parent / "fixtures" / "welch_fixtures.json").read_text())


def test_split_example():
    scores = {f"d{i}": s for i, s in enumerate([0.9, 0.1, 0.5, 0.7, 0.3, 0.8, 0.2, 0.6, 0.4, 0.0])}
    s = quantile_split(scores, 0.2)
    assert s.near == ("d0", "d5") and s.distant == ("d1", "d9")
    assert len(s.middle) == 6


def test_split_tie_break_and_rounding():
    s = quantile_split({"b": 1.0, "a": 1.0, "c": 1.0, "d": 1.0, "e": 1.0}, 0.2)
    assert s.near == ("a",) and s.distant == ("e",)
    # 0.2 * 15 is 3 despite floating point
    assert len(quantile_split({f"x{i:02d}": i for i in range(15)}, 0.2).near) == 3


def test_split_errors():
    with pytest.raises(SplitError):
        quantile_split({"a": 1.0, "b": 2.0}, 0.2, period=3)
    with pytest.raises(ValueError):
        quantile_split({"a": 1.0}, 0.6)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(-10**6, 10**6), min_size=5, max_size=60), st.sampled_from([0.1, 0.2, 0.3, 0.5]))
def test_split_properties(values, fraction):
    # integer-valued scores keep 3v + 7 exact, so ties are neither created nor broken
    values = [float(v) for v in values]
    scores = {f"d{i:03d}": v for i, v in enumerate(values)}
    s = quantile_split(scores, fraction) if math.floor(fraction * len(values) + 1e-9) >= 1 else None
    if s is None:
        return
    k = len(s.near)
    assert k == len(s.distant) == math.floor(fraction * len(values) + 1e-9)
    assert set(s.near).isdisjoint(s.distant)
    assert min(scores[i] for i in s.near) >= max(scores[i] for i in s.distant)
    # monotone rescaling leaves the split unchanged
    t = quantile_split({i: 3.0 * v + 7.0 for i, v in scores.items()}, fraction)
    assert (t.near, t.distant) == (s.near, s.distant)


def test_mean_assessment():
    assert mean_assessment(["a", "b"], {"a": 1, "b": 4, "c": 0}) == 2.5
    with pytest.raises(ValueError):
        mean_assessment([], {"a": 1})


def test_betainc_known_values():
    assert betainc_reg(1, 1, 0.3) == pytest.approx(0.3, abs=1e-15)
    assert betainc_reg(2, 3, 0.4) == pytest.approx(0.5248, abs=1e-12)
    assert betainc_reg(0.5, 0.5, 0.5) == pytest.approx(0.5, abs=1e-14)
    assert student_t_cdf(0.0, 7.3) == pytest.approx(0.5, abs=1e-15)


def test_welch_hand_example():
    r = welch_ttest([1, 2, 3, 4, 5], [2, 3, 4, 5, 6])
    assert r.t_stat == pytest.approx(-1.0, abs=1e-12)
    assert r.dof == pytest.approx(8.0, abs=1e-12)
    assert r.p_value == pytest.approx(0.346594, abs=1e-6)
    assert r.stars == ""


@pytest.mark.parametrize("case", FIXTURES, ids=[f"case{i:02d}" for i in range(len(FIXTURES))])
def test_welch_matches_high_precision_reference(case):
    r = welch_ttest(case["a"], case["b"])
    assert r.t_stat == pytest.approx(float(case["t"]), rel=1e-9, abs=1e-12)
    assert r.dof == pytest.approx(float(case["dof"]), rel=1e-9)
    assert abs(r.p_value - float(case["p"])) < 1e-6


def test_welch_matches_scipy():
    scipy_stats = pytest.importorskip("scipy.stats")
    rng = np.random.default_rng(1)
    for _ in range(50):
        a = rng.normal(0, rng.uniform(0.5, 2), size=rng.integers(2, 40))
        b = rng.normal(rng.normal(), rng.uniform(0.5, 2), size=rng.integers(2, 40))
        ref = scipy_stats.ttest_ind(a, b, equal_var=False)
        r = welch_ttest(a, b)
        assert r.t_stat == pytest.approx(ref.statistic, rel=1e-10)
        assert abs(r.p_value - ref.pvalue) < 1e-9


@settings(max_examples=200, deadline=None)
@given(
    st.lists(st.integers(0, 4), min_size=2, max_size=30),
    st.lists(st.integers(0, 4), min_size=2, max_size=30),
)
def test_welch_properties(a, b):
    if np.var(a) == 0 and np.var(b) == 0:
        with pytest.raises(ValueError):
            welch_ttest(a, b)
        return
    r, s = welch_ttest(a, b), welch_ttest(b, a)
    assert r.t_stat == pytest.approx(-s.t_stat, abs=1e-12)
    assert r.p_value == pytest.approx(s.p_value, abs=1e-12)
    assert 0.0 <= r.p_value <= 1.0
    assert not r.sig1 or r.sig5


def test_welch_needs_two_values():
    with pytest.raises(ValueError):
        welch_ttest([1.0], [1.0, 2.0])


def test_rank_agreement_example():
    a = {"a": 1, "b": 2, "c": 3, "d": 4, "e": 5}
    b = {"a": 2, "b": 1, "c": 4, "d": 3, "e": 5}
    assert rank_agreement(a, b) == pytest.approx(0.8, abs=1e-12)
    assert rank_agreement(a, {k: 10 * v for k, v in a.items()}) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        rank_agreement(a, {"a": 1})


def test_average_ranks_and_auc():
    np.testing.assert_array_equal(average_ranks([3.0, 1.0, 3.0, 2.0]), [3.5, 1.0, 3.5, 2.0])
    rng = np.random.default_rng(0)
    for _ in range(20):
        s = rng.integers(0, 5, size=30).astype(float)
        y = np.where(rng.random(30) < 0.4, 1, -1)
        y[0], y[1] = 1, -1
        assert roc_auc(s, y) == pytest.approx(brute_auc(s, y), abs=1e-12)


def toy_corpus():
    records = []
    for t in (1, 2):
        records += [(t, "current", 3, "a b")] * 3
        records += [(t, "future", r, "c d") for r in (4, 4, 3, 2, 1, 1, 0, 2, 3, 0)]
    return make_corpus(records)


def toy_scores(corpus, reverse=False):
    out = {}
    for t in (1, 2):
        _, unl = period_slice(corpus, t)
        n = len(unl)
        out[t] = {i: float(n - j if not reverse else j) for j, i in enumerate(unl)}
    return out


def test_assessment_table_and_csv_round_trip():
    corpus = toy_corpus()
    rows = assessment_table(corpus, toy_scores(corpus), 0.2, pu1_scores=toy_scores(corpus, reverse=True))
    assert [r.period for r in rows] == ["2016-01", "2016-02"]
    r = rows[0]
    assert (r.mean_near, r.mean_distant, r.mean_current, r.mean_future) == (4.0, 1.5, 3.0, 2.0)
    assert (r.pu1_near, r.pu1_distant) == (1.5, 4.0)
    assert r.pu2_near is None and r.error is None
    text = table_csv(rows)
    assert text.splitlines()[0] == ",".join(TABLE_COLUMNS)
    assert text.splitlines()[1].startswith("2016-01,4.000,1.500,3.000,2.000,1.500,4.000,NA,NA,")
    back = read_table_csv(text)
    assert back[0]["mtpu_nf"] == 4.0 and back[0]["pu2_nf"] is None
    assert back[0]["p_value"] == pytest.approx(rows[0].welch.p_value, abs=5e-7)
    assert table_csv(assessment_table(corpus, toy_scores(corpus), 0.2, toy_scores(corpus, True))) == text


def test_error_rows_keep_their_place():
    corpus = toy_corpus()
    scores = toy_scores(corpus)
    del scores[2]
    rows = assessment_table(corpus, scores)
    assert rows[0].error is None
    assert rows[1].error and "2016-02" in rows[1].error and rows[1].welch is None
    assert table_csv(rows).splitlines()[2].endswith(",NA,NA,NA,NA")
    ts = timeseries_csv(rows).splitlines()
    assert ts[0] == "period,series,value,sig_level"
    assert len(ts) == 1 + 4 * 2
    assert ts[-1].endswith(",NA")


def test_small_worked_examples():
    assert mean_assessment(["a", "b", "c"], {"a": 1, "b": 2, "c": 2}) == pytest.approx(5 / 3, abs=1e-9)
    assert mean_assessment(["a", "b"], {"a": 0, "b": 4}) == 2.0
    r = welch_ttest([1, 2, 3], [1, 2, 3])
    assert (r.t_stat, r.p_value, r.stars) == (0.0, 1.0, "")
    four = lambda v: {f"d{i}": x for i, x in enumerate(v)}  # noqa: E731
    assert rank_agreement(four([1, 2, 3, 4]), four([1, 2, 4, 3])) == pytest.approx(0.8, abs=1e-12)
    assert rank_agreement(four([1, 2, 3, 4]), four([-1, -2, -3, -4])) == pytest.approx(-1.0)
    s = quantile_split({f"d{i}": 0.5 for i in range(10)}, 0.2)
    assert s.near == ("d0", "d1") and s.distant == ("d8", "d9")
    with pytest.raises(SplitError):
        quantile_split({f"d{i}": i for i in range(4)}, 0.2)


def test_star_thresholds():
    assert WelchResult(1.0, 5.0, 0.03).stars == "*"
    assert WelchResult(1.0, 5.0, 0.005).stars == "**"
    assert WelchResult(1.0, 5.0, 0.05).stars == ""
