import json
import math

import numpy as np
import pytest

from newlinks.errors import (DegenerateCorpusError, DegenerateVectorError, EmptySeriesError,
                             InvalidArgumentError)
from newlinks.ingestion import (discover_snapshot_files, embed_corpus, fallback_text_quality,
                                load_crawl_series, normalize_semantic, tfidf_matrix,
                                write_crawl_series)
from newlinks.synthetic import GeneratorConfig, generate


def _write(tmp_path, crawls):
    paths = []
    for c, recs in enumerate(crawls):
        p = tmp_path / f"crawl_{c + 1:02d}.jsonl"
        p.write_text("".join(json.dumps(r) + "\n" for r in recs))
        paths.append(p)
    return paths


def _rec(url, c, vec=(0.6, 0.8), **kw):
    r = {"url": url, "fetch_time": f"2021-01-{c + 1:02d}T00:00:00Z", "out_links": [],
         "content_digest": "ab", "content_size": 10, "text_size": 5, "text_quality": 0.5}
    if vec is not None:
        r["semantic_vector"] = list(vec)
    r.update(kw)
    return r


def test_missing_semantic_vector_is_incomplete(tmp_path):
    urls = ["https://a.org/", "https://b.org/"]
    crawls = [[_rec(u, c, vec=None if (u == urls[1] and c == 4) else (0.6, 0.8)) for u in urls]
              for c in range(10)]
    series, rep = load_crawl_series(_write(tmp_path, crawls))
    assert rep.pages_kept == 1 and rep.pages_discarded_incomplete == 1
    assert rep.balanced()
    series, rep = load_crawl_series(_write(tmp_path, crawls), require_semantic=False)
    assert rep.pages_kept == 2


def test_report_reconciles_and_graph_fields_recomputed(tmp_path):
    urls = [f"https://p{i}.org/" for i in range(5)]
    crawls = []
    for c in range(3):
        recs = [_rec(u, c, out_links=[urls[(i + 1) % 5]]) for i, u in enumerate(urls)]
        if c == 1:
            recs = recs[:-1]              # p4 missing
        if c == 2:
            recs[0]["text_quality"] = 7  # p0 invalid
        crawls.append(recs)
    series, rep = load_crawl_series(_write(tmp_path, crawls))
    assert rep.pages_read == 5
    assert (rep.pages_kept, rep.pages_discarded_incomplete, rep.pages_discarded_invalid) == (3, 1, 1)
    assert rep.balanced()
    assert all(s.pagerank is not None and s.inlinks_int is not None for s in series.snapshots[0])
    assert "pages kept" in rep.to_text()
    assert rep.to_dict()["tld_histogram"] == {"org": 3}


def test_errors(tmp_path):
    with pytest.raises(InvalidArgumentError):
        load_crawl_series(_write(tmp_path, [[_rec("https://a.org/", 0)]]))
    crawls = [[_rec("https://a.org/", 0)], [_rec("https://b.org/", 1)]]
    with pytest.raises(EmptySeriesError):
        load_crawl_series(_write(tmp_path, crawls))


def test_round_trip_byte_exact(tmp_path):
    series, _ = generate(GeneratorConfig(n_pages=60, n_crawls=4, seed=1))
    write_crawl_series(series, tmp_path / "a")
    again, rep = load_crawl_series(discover_snapshot_files(tmp_path / "a"))
    assert rep.pages_kept == 60 and not rep.recomputed
    write_crawl_series(again, tmp_path / "b")
    for c in range(4):
        name = f"crawl_{c + 1:02d}.jsonl"
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    np.testing.assert_array_equal(again.new_link_counts, series.new_link_counts)


def test_normalize_semantic(rng):
    np.testing.assert_allclose(normalize_semantic([3, 4]), [0.6, 0.8])
    u = np.array([0.0, 1.0, 0.0])
    np.testing.assert_array_equal(normalize_semantic(u), u)
    for _ in range(20):
        v = normalize_semantic(rng.standard_normal(192))
        assert abs(math.sqrt(sum(x * x for x in v)) - 1.0) < 1e-12
    with pytest.raises(DegenerateVectorError):
        normalize_semantic(np.zeros(4))


def test_embed_corpus_basic():
    docs = [["a", "b", "c"], ["a", "b", "c"], ["d", "e"]]
    E = embed_corpus(docs, dim=192)
    np.testing.assert_allclose(E[0], E[1], atol=1e-12)
    assert E.shape[1] <= 3
    assert embed_corpus([["x", "y"], ["y", "z"]]).shape[1] <= 2
    np.testing.assert_allclose(np.linalg.norm(E, axis=1), 1.0, atol=1e-9)
    with pytest.raises(InvalidArgumentError):
        embed_corpus([])
    with pytest.raises(DegenerateCorpusError):
        embed_corpus([[], []])


def test_embed_corpus_full_rank_preserves_cosines():
    docs = [["web", "link", "crawl", "crawl"], ["link", "page", "rank"], ["crawl", "page", "web"],
            ["tree", "boost", "rank"], ["poisson", "rate", "link", "tree"]]
    X, _ = tfidf_matrix(docs)
    dense = X.toarray()
    rank = np.linalg.matrix_rank(dense)
    E = embed_corpus(docs, dim=rank)
    # oracle: cosines of the unreduced rows
    U = dense / np.linalg.norm(dense, axis=1, keepdims=True)
    np.testing.assert_allclose(E @ E.T, U @ U.T, atol=0.05)


def test_tfidf_definition():
    docs = [["a", "a", "b"], ["b", "c"]]
    X, vocab = tfidf_matrix(docs)
    assert vocab == ["a", "b", "c"]
    np.testing.assert_allclose(X.toarray(), [[2 * math.log(2), 0, 0], [0, 0, math.log(2)]])


def test_fallback_text_quality():
    assert fallback_text_quality([]) == 0.0
    assert fallback_text_quality(list("abcdefgh")) == pytest.approx(1 - math.exp(-4), abs=1e-12)
    assert fallback_text_quality(["w"] * 100) == pytest.approx(1 - math.exp(-0.04), abs=1e-12)
    assert fallback_text_quality(["a", "b"] * 2) == pytest.approx(0.8647, abs=1e-4)
