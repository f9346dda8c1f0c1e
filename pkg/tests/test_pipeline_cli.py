import json
from pathlib import Path

import numpy as np
import pytest

from newlinks.cli import main
from newlinks.errors import InvalidArgumentError
from newlinks.pipeline import ExperimentConfig, history_sweep, run_experiment, stage, write_outputs

SMALL_GEN = {"n_pages": 160, "n_crawls": 5, "seed": 2, "topic_coupled": True}


def small_cfg(tmp_path, **kw):
    d = dict(generator=SMALL_GEN, features={"history": 1}, repetitions=1, k_related=10,
             grid={"n_estimators": [200], "min_samples_leaf": [10]}, ngboost={"n_estimators": 40},
             output_dir=str(tmp_path / "run"))
    d.update(kw)
    return ExperimentConfig(**d)


def test_simulate_twice_is_identical(tmp_path, capsys):
    for name in ("a", "b"):
        assert main(["simulate", "--n-pages", "80", "--n-crawls", "4", "--seed", "1",
                     "--out", str(tmp_path / name)]) == 0
    files = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert {"ground_truth.tsv", "calibration.tsv", "generator.json", "crawl_01.jsonl"} <= set(files)
    for f in files:
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
    assert (tmp_path / "a" / "calibration.tsv").read_text().startswith("# newlinks ")


def test_malformed_config_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["simulate", "--config", str(bad), "--out", str(tmp_path / "o")]) == 2
    bad.write_text(json.dumps({"n_crawls": 1}))
    assert main(["simulate", "--config", str(bad), "--out", str(tmp_path / "o")]) == 2
    assert "invalid configuration" in capsys.readouterr().err
    bad.write_text(json.dumps({"generator": SMALL_GEN, "methods": ["NOPE"]}))
    assert main(["run", "--config", str(bad)]) == 2


def test_data_error_exit_code(tmp_path, capsys):
    (tmp_path / "empty").mkdir()
    assert main(["ingest", "--input", str(tmp_path / "empty"), "--out", str(tmp_path / "o")]) == 3
    (tmp_path / "d").mkdir()
    for c in (1, 2):
        (tmp_path / "d" / f"crawl_{c:02d}.jsonl").write_text("{broken\n")
    assert main(["ingest", "--input", str(tmp_path / "d"), "--out", str(tmp_path / "o")]) == 3


def test_convergence_exit_code(monkeypatch, tmp_path, capsys):
    from newlinks import cli
    from newlinks.errors import ConvergenceError

    def boom(args):
        raise ConvergenceError("stuck", residual=1.0, iterations=1)
    monkeypatch.setattr(cli, "cmd_ingest", boom)
    parser = cli.build_parser
    monkeypatch.setattr(cli, "build_parser", lambda: _patched(parser(), boom))
    assert main(["ingest", "--input", "x", "--out", "y"]) == 4


def _patched(ap, func):
    ap.set_defaults(func=func)
    for action in ap._subparsers._group_actions:
        for p in action.choices.values():
            p.set_defaults(func=func)
    return ap


def test_stage_names_errors():
    with pytest.raises(InvalidArgumentError, match=r"\[stage features\]"):
        with stage("features"):
            raise InvalidArgumentError("boom")


def test_config_round_trip_and_hash(tmp_path):
    cfg = small_cfg(tmp_path)
    again = ExperimentConfig.from_dict(json.loads(json.dumps(cfg.to_dict())))
    assert again.hash() == cfg.hash()
    moved = ExperimentConfig.from_dict({**cfg.to_dict(), "output_dir": "elsewhere"})
    assert moved.hash() == cfg.hash()
    with pytest.raises(InvalidArgumentError):
        ExperimentConfig(generator=SMALL_GEN, features={"history": 1, "categories": ["SP"]})
    with pytest.raises(InvalidArgumentError):
        ExperimentConfig(generator=SMALL_GEN, input_dir="x")


@pytest.fixture(scope="module")
def lbla_run(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("lbla")
    cfg = small_cfg(tmp, methods=["NNL-ET_LBLA", "NNL-NGB", "NNL-Av", "NNL-Pr", "CCR"])
    res = run_experiment(cfg)
    return cfg, res, write_outputs(res)


def test_run_contract(lbla_run):
    cfg, res, out = lbla_run
    rho = (out / "rho.tsv").read_text().splitlines()
    assert rho[0] == f"# newlinks 0.1.0 config={cfg.hash()} seed=0"
    methods = {ln.split("\t")[1] for ln in rho[2:]}
    assert methods == {"NNL-ET_LBLA", "NNL-NGB", "NNL-Av", "NNL-Pr", "CCR"}
    for f in ("metrics.tsv", "areas.tsv", "curves.tsv", "rankings/NNL-ET_LBLA.rep0.tsv"):
        assert (out / f).read_text().startswith("# newlinks 0.1.0 config=" + cfg.hash())
    assert (out / "models" / "NNL-NGB.rep0.model").exists()
    assert json.loads((out / "config.json").read_text())["config_hash"] == cfg.hash()
    assert any("provenance" in n for n in res.models[(0, "NNL-NGB")].notes)


def test_rerun_is_byte_identical(lbla_run, tmp_path):
    cfg, _, out = lbla_run
    out2 = write_outputs(run_experiment(cfg), tmp_path / "again")
    for f in sorted(p.relative_to(out) for p in out.rglob("*") if p.is_file()):
        assert (out / f).read_bytes() == (out2 / f).read_bytes(), f


def test_report_command(lbla_run, capsys):
    _, _, out = lbla_run
    assert main(["report", str(out)]) == 0
    text = capsys.readouterr().out
    assert "NNL-ET_LBLA" in text and "rho" in text


def test_history_sweep_naming(tmp_path):
    cfg = small_cfg(tmp_path, methods=["NL-ET", "NNL-Pr"])
    paths = history_sweep(cfg, range(0, 3))
    assert [p.name for p in paths] == ["h00", "h01", "h02"]
    for p in paths:
        assert (p / "rho.tsv").exists()


def test_cli_end_to_end(tmp_path, capsys):
    data, ft = tmp_path / "data", tmp_path / "feat.tsv"
    assert main(["simulate", "--n-pages", "150", "--n-crawls", "5", "--topic-coupled", "--seed", "3",
                 "--out", str(data)]) == 0
    assert main(["ingest", "--input", str(data), "--out", str(tmp_path / "canon")]) == 0
    assert main(["features", "--input", str(data), "--history", "2", "--k", "10", "--out", str(ft)]) == 0
    model = tmp_path / "m.model"
    common = ["--input", str(data), "--features", str(ft)]
    assert main(["train", *common, "--target", "NL", "--kind", "ExtraTreesClassifier",
                 "--n-estimators", "50", "--out", str(model)]) == 0
    assert main(["evaluate", *common, "--target", "NL", "--model", str(model)]) == 0
    assert "balanced_accuracy" in capsys.readouterr().out
    assert main(["rank", "--model", str(model), "--features", str(ft), "--output", "proba",
                 "--out", str(tmp_path / "r.tsv")]) == 0
    assert main(["rank", "--input", str(data), "--baseline", "NNL-Av", "--out", str(tmp_path / "b.tsv")]) == 0
    assert "http://www.site" in (tmp_path / "b.tsv").read_text()
    assert main(["importance", *common, "--target", "NL", "--model", str(model), "--repeats", "2",
                 "--out", str(tmp_path / "imp.tsv")]) == 0
    lines = (tmp_path / "imp.tsv").read_text().splitlines()
    header = [ln for ln in ft.read_text().splitlines() if not ln.startswith("#")][0]
    n_feat = len(header.split("\t")) - 1
    assert "np.float64" not in "".join(lines)
    assert len(lines) == 2 + n_feat
    assert main(["rank", "--out", str(tmp_path / "x.tsv")]) == 2


def test_config_file_run(tmp_path, capsys):
    cfg = small_cfg(tmp_path, methods=["NNL-Av", "CCR"])
    path = tmp_path / "exp.json"
    path.write_text(json.dumps(cfg.to_dict()))
    assert main(["run", "--config", str(path), "--out", str(tmp_path / "o")]) == 0
    assert (tmp_path / "o" / "areas.tsv").exists()
    assert main(["run", "--config", str(path), "--history-sweep", "0:1", "--out", str(tmp_path / "s")]) == 0
    assert sorted(p.name for p in (tmp_path / "s").iterdir()) == ["h00", "h01"]
