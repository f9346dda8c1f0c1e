import numpy as np
import pytest

import oracles
from conftest import make_series
from newlinks.errors import ConvergenceError, InvalidArgumentError
from newlinks.graph import SnapshotGraph, build_graph, inlink_counts, pagerank, trustrank


def graph(n, edges, internal=None):
    src = np.array([e[0] for e in edges], dtype=np.int64)
    dst = np.array([e[1] for e in edges], dtype=np.int64)
    internal = np.ones(len(edges), bool) if internal is None else np.asarray(internal, bool)
    return SnapshotGraph(n, src, dst, internal, np.zeros(n, np.int64))


def random_graph(rng, n):
    pairs = {(int(a), int(b)) for a, b in rng.integers(0, n, size=(rng.integers(0, 4 * n + 1), 2))}
    return sorted(pairs)


def test_pagerank_examples():
    np.testing.assert_allclose(pagerank(graph(2, [(0, 1), (1, 0)])).scores, [0.5, 0.5], atol=1e-9)
    np.testing.assert_allclose(pagerank(graph(4, [])).scores, 0.25, atol=1e-12)
    edges = [(0, 1), (1, 2), (2, 0), (0, 2)]
    np.testing.assert_allclose(pagerank(graph(3, edges)).scores, oracles.dense_walk(3, edges, 0.85),
                               atol=1e-8)


def test_trustrank_examples():
    edges = [(0, 1), (1, 2), (2, 0), (0, 2)]
    g = graph(3, edges)
    np.testing.assert_allclose(trustrank(g, [0]).scores,
                               oracles.dense_walk(3, edges, 0.85, [1, 0, 0]), atol=1e-8)
    np.testing.assert_allclose(trustrank(g, [0, 1, 2]).scores, pagerank(g).scores, atol=1e-10)
    np.testing.assert_allclose(trustrank(graph(3, []), [1]).scores, [0, 1, 0], atol=1e-12)
    with pytest.raises(InvalidArgumentError):
        trustrank(g, [])


def test_random_graphs_sum_to_one_and_match_oracle(rng):
    for _ in range(100):
        n = int(rng.integers(1, 501))
        edges = random_graph(rng, n)
        g = graph(n, edges)
        pr = pagerank(g)
        assert abs(pr.scores.sum() - 1) < 1e-9 and (pr.scores >= 0).all()
        trusted = rng.choice(n, size=max(1, n // 10), replace=False)
        assert abs(trustrank(g, trusted).scores.sum() - 1) < 1e-9
        if n <= 60:
            np.testing.assert_allclose(pr.scores, oracles.dense_walk(n, edges, 0.85), atol=1e-8)


def test_damping_zero_is_restart(rng):
    g = graph(5, random_graph(rng, 5))
    np.testing.assert_allclose(pagerank(g, damping=0.0).scores, 0.2, atol=1e-15)
    np.testing.assert_allclose(trustrank(g, [1, 3], damping=0.0).scores, [0, .5, 0, .5, 0], atol=1e-15)


def test_nonconvergence():
    with pytest.raises(ConvergenceError) as err:
        pagerank(graph(3, [(0, 1), (1, 2), (2, 0), (0, 2)]), damping=0.99, max_iter=2, tol=1e-15)
    assert err.value.residual > 0


def test_build_graph_and_inlinks():
    u = [f"https://h{p}.example.org/page" for p in range(3)]
    links = [{u[1], "https://elsewhere.net/", u[0]}, {u[0]}, {"https://h2.example.org/other"}]
    s = make_series([links, links])
    g = build_graph(s, 0)
    got = sorted(zip(g.src.tolist(), g.dst.tolist()))
    assert got == [(0, 0), (0, 1), (1, 0)]
    assert g.out_of_series.tolist() == [1, 0, 1]
    assert g.out_degree()[2] == 0
    inl = inlink_counts(g)
    assert inl.tolist() == [[1, 1], [0, 1], [0, 0]]


def test_inlink_conservation(rng):
    for _ in range(20):
        n = 30
        edges = random_graph(rng, n)
        internal = rng.random(len(edges)) < 0.5
        inl = inlink_counts(graph(n, edges, internal))
        assert inl[:, 0].sum() == internal.sum() and inl[:, 1].sum() == (~internal).sum()
        # transpose oracle
        for q in range(n):
            assert inl[q, 0] == sum(1 for (a, b), i in zip(edges, internal) if b == q and i)
