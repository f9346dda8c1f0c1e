import numpy as np
import pytest

import oracles
from conftest import make_series
from newlinks.errors import InvalidArgumentError
from newlinks.features import (FeatureMatrix, FeatureSpec, apply_semantic_reduction, assemble,
                               compute_lcr, compute_nl, compute_nnl, lbla_subset, reduce_semantic,
                               target_vector, without_own_link_history)
from newlinks.graph import series_graph_scores
from newlinks.ingestion import fill_graph_fields
from newlinks.related import build_index
from newlinks.snapshot import LinkScope

U = [f"https://h{p}.example.org/page" for p in range(3)]


def fixture_series():
    """3 pages, 4 crawls: page 0 adds internal links at intervals 0 and 2,
    page 1 an external one at interval 1, page 2 is static."""
    i0 = [f"https://h0.example.org/n{k}" for k in range(4)]
    links = [
        [set(), {"https://x.net/"}, {U[0]}],
        [{i0[0], i0[1]}, {"https://x.net/"}, {U[0]}],
        [{i0[0], i0[1]}, {"https://x.net/", "https://y.net/"}, {U[0]}],
        [{i0[0], i0[1], i0[2]}, {"https://x.net/", "https://y.net/"}, {U[0]}],
    ]
    vec = np.array([[1.0, 0.0], [0.8, 0.6], [0.0, 1.0]])
    s = make_series(links, vectors=vec, urls=U)
    return fill_graph_fields(s), links, vec


def test_target_ops():
    s, links, _ = fixture_series()
    assert compute_lcr(s, 2, "int", range(3)) == 0
    assert compute_lcr(s, 0, "int", range(3)) == pytest.approx(2 / 3)
    assert compute_nl(s, 0, "ext", 0) == 0 and compute_nl(s, 0, "int", 0) == 1
    assert compute_nnl(s, 0, "int", 0) == 2
    with pytest.raises(InvalidArgumentError):
        compute_lcr(s, 0, "int", [])


def test_lcr_three_of_nine():
    base = {"https://h0.example.org/a"}
    links, cur = [[set(base)]], set(base)
    for i in range(9):
        if i in (1, 4, 7):
            cur = cur | {f"https://h0.example.org/new{i}"}
        links.append([set(cur)])
    s = make_series(links, urls=[U[0]])
    assert compute_lcr(s, 0, "int", range(9)) == pytest.approx(1 / 3)


def test_figure4_shaped_bursty_counts():
    weekly = [0, 0, 50, 0, 1, 0, 3]
    src = "https://h0.example.org/page"
    cur, links = set(), [[set()]]
    for w, k in enumerate(weekly):
        cur = cur | {f"https://h0.example.org/w{w}/{j}" for j in range(k)}
        links.append([set(cur)])
    s = make_series(links, urls=[src])
    for i in range(len(weekly)):
        assert compute_nnl(s, 0, "int", i) == oracles.new_link_counts(links[i][0], links[i + 1][0], src)[0]


def test_targets_identities(small_synthetic):
    s, _ = small_synthetic
    for scope in ("int", "ext"):
        lcr = target_vector(s, "LCR", scope).values
        nl_mean = np.mean([target_vector(s, "NL", scope, i).values for i in range(s.n_intervals)], axis=0)
        np.testing.assert_allclose(lcr, nl_mean, atol=1e-15)
        nnl = target_vector(s, "NNL", scope).values
        assert (nnl >= target_vector(s, "NL", scope).values).all()
        assert ((lcr >= 0) & (lcr <= 1)).all()


def test_assemble_columns_match_direct_recomputation():
    s, links, vec = fixture_series()
    idx = build_index(vec, 2)
    spec = FeatureSpec(history=2, include_semantic=True, include_pagerank=True)
    m = assemble(s, spec, index=idx)
    T = 2
    assert m.target_interval == T
    counts = np.array([[oracles.new_link_counts(links[i][p], links[i + 1][p], U[p])
                        for i in range(3)] for p in range(3)])

    def nbavg(v):
        return np.array([sum(w * v[q] for q, w in zip(idx.neighbors[p], idx.weights[p]))
                         for p in range(3)])

    for p in range(3):
        n_int = sum(oracles.is_internal(U[p], u) for u in links[T][p])
        assert m.column("n_internal_outlinks")[p] == n_int
        assert m.column("n_external_outlinks")[p] == len(links[T][p]) - n_int
        assert m.column("content_size")[p] == 100 + T
        assert m.column("content_size_lag2")[p] == 100 + T - 2
    assert m.column("url_path_depth").tolist() == [1, 1, 1]
    assert m.column("url_domain_depth").tolist() == [3, 3, 3]
    for lag in (1, 2):
        np.testing.assert_array_equal(m.column(f"new_int_lag{lag}"), counts[:, T - lag, 0])
        np.testing.assert_array_equal(m.column(f"new_ext_lag{lag}"), counts[:, T - lag, 1])
        np.testing.assert_allclose(m.column(f"nb_new_int_lag{lag}"), nbavg(counts[:, T - lag, 0]))
    np.testing.assert_allclose(m.column("new_int_mean"), counts[:, :T, 0].mean(axis=1))
    np.testing.assert_allclose(m.column("nb_new_ext_mean"), nbavg(counts[:, :T, 1].mean(axis=1)))
    past_lcr = (counts[:, :T, 0] > 0).mean(axis=1)
    np.testing.assert_allclose(m.column("nb_lcr_int"), nbavg(past_lcr))
    gs = series_graph_scores(s)
    np.testing.assert_allclose(m.column("trustrank"), [s.snapshot(T, p).trustrank for p in range(3)])
    np.testing.assert_allclose(m.column("pagerank_lag1"), gs["pagerank"][T - 1])
    np.testing.assert_allclose(m.column("sem_001"), vec[:, 1])
    np.testing.assert_allclose(m.column("nb_text_quality"), 0.5)
    # causality: nothing after crawl T
    assert max(c.max_crawl for c in m.columns) <= T


def test_history_zero_and_static_page():
    s, _, vec = fixture_series()
    m = assemble(s, FeatureSpec(history=0), index=build_index(vec, 2))
    assert not any("_lag" in n or n.endswith("_mean") for n in m.names)
    assert "nb_lcr_int" in m.names
    m2 = assemble(s, FeatureSpec(history=2), index=build_index(vec, 2))
    assert m2.column("new_int_lag1")[2] == 0 and m2.column("new_int_mean")[2] == 0


def test_spec_errors():
    s, _, vec = fixture_series()
    with pytest.raises(InvalidArgumentError, match="history"):
        assemble(s, FeatureSpec(history=3), index=build_index(vec, 2))
    with pytest.raises(InvalidArgumentError, match="related"):
        assemble(s, FeatureSpec(categories={"SN"}))
    with pytest.raises(InvalidArgumentError):
        FeatureSpec(categories={"XX"})
    assert FeatureSpec(lbla_only=True, categories={"SP"}).categories == {"DP", "DN"}


def test_lbla_subset():
    s, _, vec = fixture_series()
    m = assemble(s, FeatureSpec(history=2), index=build_index(vec, 2))
    nnl = lbla_subset(m, "NNL")
    assert set(nnl.names) == {"new_int_lag1", "new_int_lag2", "new_int_mean", "nb_lcr_int",
                              "nb_new_int_lag1", "nb_new_int_lag2", "nb_new_int_mean"}
    lcr = lbla_subset(m, "LCR")
    assert all(c.category == "DN" for c in lcr.columns) and "nb_lcr_int" in lcr.names
    with pytest.raises(InvalidArgumentError):
        lbla_subset(assemble(s, FeatureSpec(categories={"SP"})), "NNL")
    ext = assemble(s, FeatureSpec(history=1, scope=LinkScope.EXTERNAL), index=build_index(vec, 2))
    assert "nb_lcr_ext" in lbla_subset(ext, "NL").names
    assert not any(n.startswith("new_") for n in without_own_link_history(m).names)


def test_text_round_trip():
    s, _, vec = fixture_series()
    m = assemble(s, FeatureSpec(history=1, include_semantic=True), index=build_index(vec, 2))
    back = FeatureMatrix.from_text(m.to_text())
    assert back.columns == m.columns and back.target_interval == m.target_interval
    np.testing.assert_array_equal(back.values, m.values)
    assert back.to_text() == m.to_text()


def test_reduce_semantic(rng):
    base = rng.standard_normal((50, 3))
    X = np.column_stack([base[:, 0], base[:, 1], base[:, 0], base[:, 2], base[:, 1], base[:, 2]])
    red, Z = reduce_semantic(X, 3)
    assert sorted(red.members()) == [[0, 2], [1, 4], [3, 5]]
    np.testing.assert_allclose(Z, base[:, [0, 1, 2]])
    ident, Z2 = reduce_semantic(base, 3)
    assert ident.members() == [[0], [1], [2]]
    np.testing.assert_allclose(Z2, base)
    with pytest.warns(UserWarning):
        red2, _ = reduce_semantic(np.column_stack([base, np.ones(50)]), 4)
    assert red2.n_clusters == 3


def test_apply_semantic_reduction(small_synthetic):
    s, _ = small_synthetic
    idx = build_index(s.semantic_matrix(0), 10)
    m = assemble(s, FeatureSpec(history=1, include_semantic=True), index=idx)
    sem = [c.semantic for c in m.columns]
    red, _ = reduce_semantic(m.values[:100][:, sem], 5)
    out = apply_semantic_reduction(m, red)
    assert sum(c.semantic for c in out.columns) == 5
    assert out.n_features == m.n_features - sum(sem) + 5
