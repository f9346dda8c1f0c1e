import numpy as np
import pytest

from newlinks.errors import InvalidArgumentError
from newlinks.evaluation import spearman_rho
from newlinks.features import FeatureSpec, assemble
from newlinks.ingestion import discover_snapshot_files, load_crawl_series, write_crawl_series
from newlinks.related import build_index
from newlinks.synthetic import (GeneratorConfig, calibration_report, config_hash, generate,
                                group_of)


def test_zero_rates_give_empty_series():
    cfg = GeneratorConfig(n_pages=200, n_crawls=5, fixed_rate_int=0.0, fixed_rate_ext=0.0,
                          content_change_prob=0.0, seed=1)
    s, truth = generate(cfg)
    assert s.new_link_counts.sum() == 0 and not s.content_changes.any()
    rep = calibration_report(s)
    for sc in ("int", "ext"):
        assert (rep.mean[sc] == 0).all() and (rep.std[sc] == 0).all()
        assert (rep.zero_fraction[sc] == 1).all()
        for M in rep.transitions[sc]:
            assert M[0, 0] == 200 and M.sum() == 200
    assert (truth.lambda_int == 0).all()


def test_fixed_rate_law_of_large_numbers():
    s, _ = generate(GeneratorConfig(n_pages=10000, n_crawls=10, fixed_rate_int=3.0, seed=2))
    assert s.new_link_counts[:, :, 0].mean() == pytest.approx(3.0, abs=0.1)


def test_zero_inflation_fraction():
    s, truth = generate(GeneratorConfig(n_pages=4000, seed=4))
    zero = (s.new_link_counts[:, :, 0] == 0).mean()
    # point mass plus Poisson zeros of the body: pi + (1 - pi) E[exp(-lambda)]
    expected = np.mean(np.exp(-truth.rate_int))
    assert zero == pytest.approx(expected, abs=0.01)
    assert 0.68 <= zero <= 0.75
    ext_zero = (s.new_link_counts[:, :, 1] == 0).mean()
    assert 0.91 <= ext_zero <= 0.95


def test_calibration_band():
    s, _ = generate(GeneratorConfig(n_pages=3000, seed=0))
    rep = calibration_report(s)
    assert 2 <= rep.mean["int"].mean() <= 4
    assert rep.std["int"].mean() > 2 * rep.mean["int"].mean()
    for M in rep.transitions["int"]:
        assert M.sum() == 3000
    assert rep.lcr_hist["int"].sum() == 3000
    v, f = rep.ccdf["int"]
    assert f[0] == 1.0 and (np.diff(f) <= 0).all()
    assert "scope\tinterval" in rep.to_text()


def test_group_edges():
    assert group_of([0, 1, 2, 3, 10, 11], "int").tolist() == [0, 1, 1, 2, 2, 3]
    assert group_of([0, 1, 2, 50], "ext").tolist() == [0, 1, 2, 2]


def test_reproducible_and_round_trip(tmp_path):
    cfg = GeneratorConfig(n_pages=120, n_crawls=4, rate_mode="bursty", topic_coupled=True, seed=9)
    a, ta = generate(cfg)
    b, tb = generate(cfg)
    write_crawl_series(a, tmp_path / "a")
    write_crawl_series(b, tmp_path / "b")
    for f in sorted((tmp_path / "a").iterdir()):
        assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes()
    assert ta.to_text() == tb.to_text()
    back, rep = load_crawl_series(discover_snapshot_files(tmp_path / "a"))
    assert rep.pages_kept == 120 and rep.balanced()
    np.testing.assert_array_equal(back.new_link_counts, a.new_link_counts)
    assert a.metadata["config_hash"] == config_hash(cfg.to_dict())
    c, _ = generate(GeneratorConfig(**{**cfg.to_dict(), "seed": 10}))
    assert not np.array_equal(c.new_link_counts, a.new_link_counts)


def test_truth_sidecar_and_shapes():
    s, truth = generate(GeneratorConfig(n_pages=50, n_crawls=5, rate_mode="bursty", seed=3))
    assert truth.rate_int.shape == (50, 4)
    lines = truth.to_text().splitlines()
    assert lines[0].split("\t") == ["url", "topic", "lambda_int", "lambda_ext"]
    assert len(lines) == 51
    np.testing.assert_allclose(truth.lambda_int, truth.rate_int.mean(axis=1))
    assert (truth.rate_ext >= 0).all()
    for row in s.snapshots:
        for snap in row:
            assert abs(np.linalg.norm(snap.semantic_vector) - 1) < 1e-9


def test_config_validation():
    for bad in ({"n_crawls": 1}, {"zero_inflation_int": 1.5}, {"rate_mode": "wild"},
                {"fixed_rate_int": -1.0}, {"centroids": [[1.0, 1.0]], "n_topics": 1, "semantic_dim": 2}):
        with pytest.raises(InvalidArgumentError):
            GeneratorConfig(**bad)
    with pytest.raises(InvalidArgumentError):
        GeneratorConfig.from_dict({"n_pagez": 3})
    cfg = GeneratorConfig(n_pages=10)
    assert GeneratorConfig.from_dict(cfg.to_dict()) == cfg


def _nb_lcr_rho(coupled, seed):
    s, truth = generate(GeneratorConfig(n_pages=1500, topic_coupled=coupled, seed=seed))
    idx = build_index(s.semantic_matrix(0), 30)
    m = assemble(s, FeatureSpec(categories={"DN"}), index=idx)
    return spearman_rho(m.column("nb_lcr_int"), truth.lambda_int)


@pytest.mark.slow
def test_topic_coupling_makes_neighbours_informative():
    on = np.median([_nb_lcr_rho(True, s) for s in range(5)])
    off = np.median([_nb_lcr_rho(False, s) for s in range(5)])
    assert on > off
