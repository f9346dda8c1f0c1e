import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from conftest import make_series
from newlinks.errors import InvalidArgumentError
from newlinks.evaluation import (METHODS, RankingResult, average_ranks, baseline_scores,
                                 classification_scores, evaluate_rankings, make_split,
                                 precision_at_k_curve, regression_scores, spearman_rho)


def test_make_split():
    plan = make_split(1000, 0)
    assert (len(plan.test), len(plan.dev), len(plan.train)) == (250, 250, 500)
    allp = np.concatenate([plan.test, plan.dev, plan.train])
    assert sorted(allp.tolist()) == list(range(1000))
    np.testing.assert_array_equal(plan.train_full, np.sort(np.r_[plan.train, plan.dev]))
    again = make_split(1000, 0)
    np.testing.assert_array_equal(again.test, plan.test)
    with pytest.raises(InvalidArgumentError):
        make_split(7, 0)
    for n in range(8, 40):
        p = make_split(n, 1)
        assert abs(len(p.test) - n / 4) <= 1 and abs(len(p.dev) - n / 4) <= 1


def test_split_overlap_is_binomial():
    # expected overlap of two independent 25% test sets is 25% of 25%
    tests = [set(make_split(4000, s).test.tolist()) for s in (1, 2, 3)]
    for a in range(3):
        for b in range(a + 1, 3):
            ov = len(tests[a] & tests[b])
            mean, sd = 1000 * 0.25, math.sqrt(1000 * 0.25 * 0.75)
            assert abs(ov - mean) < 5 * sd


def test_regression_scores_examples():
    y = np.array([1.0, 2.0, 4.0])
    assert regression_scores(y, np.full(3, y.mean())).r2 == pytest.approx(0.0, abs=1e-15)
    assert tuple(regression_scores(y, y)) == (1.0, 0.0, 0.0)
    z = np.r_[np.ones(8), np.zeros(92)]
    s = regression_scores(z, np.zeros(100))
    assert s.mae == pytest.approx(0.08) and s.medae == 0 and s.r2 < 0
    c = regression_scores(np.ones(4), np.zeros(4))
    assert math.isnan(c.r2) and c.mae == 1


def test_classification_scores_examples():
    y = np.r_[np.ones(60), np.zeros(140)]
    yhat = np.r_[np.ones(40), np.zeros(20), np.ones(10), np.zeros(130)]
    s = classification_scores(y, yhat)
    assert s.precision == pytest.approx(0.8) and s.recall == pytest.approx(2 / 3)
    assert s.f1 == pytest.approx(0.7273, abs=1e-4)
    assert s.balanced_accuracy == pytest.approx(0.7976, abs=1e-4)
    assert tuple(classification_scores(y, y)) == (1, 1, 1, 1)
    z = classification_scores(y, np.zeros(200))
    assert z.recall == 0 and z.balanced_accuracy == 0.5 and z.f1 == 0 and math.isnan(z.precision)


def test_metric_oracles_200_instances(rng):
    for _ in range(200):
        n = int(rng.integers(2, 60))
        a = rng.integers(0, 5, n).astype(float)   # heavy ties
        b = rng.integers(0, 5, n).astype(float)
        got, want = spearman_rho(a, b), oracles.spearman(a.tolist(), b.tolist())
        assert (math.isnan(got) and math.isnan(want)) or abs(got - want) <= 1e-12
        np.testing.assert_allclose(average_ranks(a), oracles.average_ranks(a.tolist()), atol=1e-12)
        y, yhat = rng.normal(size=n), rng.normal(size=n)
        r = regression_scores(y, yhat)
        assert abs(r.r2 - oracles.r2(y.tolist(), yhat.tolist())) <= 1e-12
        assert abs(r.mae - oracles.mae(y.tolist(), yhat.tolist())) <= 1e-12
        assert abs(r.medae - oracles.medae(y.tolist(), yhat.tolist())) <= 1e-12
        yc, pc = rng.integers(0, 2, n), rng.integers(0, 2, n)
        for g, w in zip(classification_scores(yc, pc), oracles.confusion_scores(yc.tolist(), pc.tolist())):
            assert (math.isnan(g) and math.isnan(w)) or abs(g - w) <= 1e-12
        t, p = rng.permutation(n + 5).astype(float), rng.permutation(n + 5).astype(float)
        curve = precision_at_k_curve(t, p, n_realizations=1, seed=0)
        ocurve, oarea = oracles.precision_at_k(t.tolist(), p.tolist())
        np.testing.assert_allclose(curve.precision, ocurve, atol=1e-12)
        assert abs(curve.area - oarea) <= 1e-12


def test_spearman_examples():
    assert spearman_rho([1, 2, 3], [10, 20, 30]) == pytest.approx(1)
    assert spearman_rho([1, 2, 3], [3, 2, 1]) == pytest.approx(-1)
    assert spearman_rho([1, 2, 2, 4], [1, 3, 2, 4]) == pytest.approx(
        oracles.spearman([1, 2, 2, 4], [1, 3, 2, 4]), abs=1e-12)
    assert math.isnan(spearman_rho([1, 1, 1], [1, 2, 3]))


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(-20, 20), min_size=3, max_size=40), st.data())
def test_spearman_rank_invariance(a, data):
    b = data.draw(st.lists(st.integers(-20, 20), min_size=len(a), max_size=len(a)))
    a, b = np.asarray(a, float), np.asarray(b, float)
    r = spearman_rho(a, b)
    r2 = spearman_rho(np.exp(a / 7.0) * 3 + 1, b ** 3)
    assert (math.isnan(r) and math.isnan(r2)) or abs(r - r2) < 1e-12


def test_precision_curve_properties(rng):
    t = rng.random(200)
    c = precision_at_k_curve(t, t)
    np.testing.assert_allclose(c.precision, 1.0)
    assert c.area == pytest.approx(1.0)
    for _ in range(10):
        a, b = rng.integers(0, 3, 57).astype(float), rng.random(57)
        assert precision_at_k_curve(a, b, 3, int(rng.integers(100))).at(100) == 1.0
    flat = precision_at_k_curve(rng.random(500), np.zeros(500), n_realizations=200, seed=1)
    assert flat.area == pytest.approx(0.5, abs=0.02)
    np.testing.assert_allclose(flat.precision, np.arange(1, 101) / 100, atol=0.06)


def test_precision_anti_correlated_exhaustive():
    t = np.arange(10, dtype=float)
    p = -t
    c = precision_at_k_curve(t, p, 1)
    want, area = oracles.precision_at_k(t.tolist(), p.tolist())
    np.testing.assert_allclose(c.precision, want)
    assert c.precision[:50].max() == 0 and c.at(100) == 1
    assert c.area == pytest.approx(area)


def test_ranking_result():
    r = RankingResult.from_scores("x", [5, 3, 9, 1], [0.1, 0.5, 0.5, 0.0])
    assert r.page_ids.tolist() == [3, 9, 5, 1] and r.n_tied == 2
    assert (np.diff(r.scores) <= 0).all()
    np.testing.assert_array_equal(r.scores_for([1, 5]), [0.0, 0.1])
    assert r.to_text().splitlines()[1] == "1\t3\t0.5"


def _count_series(counts, digests=None):
    src = "https://h0.example.org/page"
    cur, links = set(), [[set()]]
    for i, k in enumerate(counts):
        cur = cur | {f"https://h0.example.org/c{i}/{j}" for j in range(k)}
        links.append([set(cur)])
    dg = None if digests is None else [[d] for d in digests]
    return make_series(links, dg, urls=[src])


def test_baselines():
    s = _count_series([0, 3, 0, 3, 1])
    assert baseline_scores(s, "int", "NNL-Av").scores[0] == 1.5
    assert baseline_scores(s, "int", "NNL-Pr").scores[0] == 3
    assert baseline_scores(s, "int", "CCR").scores[0] == 0
    d = ["d0", "d1", "d1", "d2", "d2", "d2", "d3", "d3", "d4", "d5"]
    s = _count_series([0] * 9, d)
    past = [d[i] != d[i + 1] for i in range(8)]
    assert baseline_scores(s, "int", "CCR").scores[0] == sum(past) / 8 == 0.5
    assert baseline_scores(s, "int", "CCR", include_target_interval=True).scores[0] == 5 / 9
    s1 = _count_series([4, 2])
    assert baseline_scores(s1, "int", "NNL-Av").scores[0] == baseline_scores(s1, "int", "NNL-Pr").scores[0]
    with pytest.raises(InvalidArgumentError):
        baseline_scores(_count_series([1]), "int", "NNL-Pr")
    with pytest.raises(InvalidArgumentError):
        baseline_scores(s, "int", "NOPE")


def test_evaluate_rankings(small_synthetic):
    from newlinks.features import target_vector
    s, _ = small_synthetic
    pages = np.arange(s.n_pages)
    targets = {k: target_vector(s, k, "int").values for k in ("LCR", "NL", "NNL")}
    results = [RankingResult.from_scores("NNL", pages, targets["NNL"]),
               baseline_scores(s, "int", "NNL-Pr"), baseline_scores(s, "int", "CCR")]
    rep = evaluate_rankings(results, targets, pages)
    assert rep.rho[("NNL", "NNL")] == pytest.approx(1.0)
    assert rep.rho[("NNL-Pr", "NNL")] > 0
    assert [line.split("\t")[0] for line in rep.rho_table().splitlines()[1::3]] == ["NNL", "NNL-Pr", "CCR"]
    assert len(rep.curve_table().splitlines()) == 1 + 3 * 3 * 100
    with pytest.raises(InvalidArgumentError):
        evaluate_rankings(results, targets, pages[:-1])
    assert "NNL-NGB" in METHODS
