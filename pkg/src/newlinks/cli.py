"""Command-line front end.

Exit codes: 0 success, 2 invalid configuration or arguments, 3 data error,
4 non-convergence.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .errors import ConvergenceError, InvalidArgumentError, NewLinksError
from .evaluation import BASELINES, RankingResult, baseline_scores
from .features import TARGET_KINDS, FeatureMatrix, FeatureSpec, assemble, target_vector
from .ingestion import discover_snapshot_files, load_crawl_series, write_crawl_series
from .learners import KINDS, EnsembleModel, HyperParams, fit, permutation_importance, predict
from .learners.tuning import default_scorer
from .pipeline import ExperimentConfig, history_sweep, provenance_line, run_experiment, write_outputs
from .related import build_index
from .synthetic import GeneratorConfig, calibration_report, config_hash, generate

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_CONVERGENCE = 0, 2, 3, 4


def _load_series(path, require_semantic=True):
    files = discover_snapshot_files(path)
    if len(files) < 2:
        raise NewLinksError(f"{path}: need at least two crawl_*.jsonl files")
    return load_crawl_series(files, require_semantic=require_semantic)


def _read_json(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidArgumentError(f"cannot read config {path}: {exc}") from None


def _args_hash(args) -> str:
    d = {k: v for k, v in vars(args).items() if k not in ("func", "out")}
    return config_hash(d)


def _write(path, text, args):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(provenance_line(_args_hash(args), getattr(args, "seed", 0)) + text)


# --- subcommands ----------------------------------------------------------------

def cmd_simulate(args):
    d = _read_json(args.config) if args.config else {}
    for key in ("n_pages", "n_crawls", "seed", "rate_mode"):
        v = getattr(args, key)
        if v is not None:
            d[key] = v
    if args.topic_coupled:
        d["topic_coupled"] = True
    cfg = GeneratorConfig.from_dict(d)
    series, truth = generate(cfg)
    out = Path(args.out)
    write_crawl_series(series, out, {"tool_version": __version__})
    head = provenance_line(config_hash(cfg.to_dict()), cfg.seed)
    (out / "ground_truth.tsv").write_text(head + truth.to_text(), encoding="utf-8")
    (out / "calibration.tsv").write_text(head + calibration_report(series).to_text(),
                                         encoding="utf-8")
    (out / "generator.json").write_text(json.dumps(cfg.to_dict(), sort_keys=True, indent=1) + "\n",
                                        encoding="utf-8")
    print(f"wrote {series.n_crawls} crawls of {series.n_pages} pages to {out}")


def cmd_ingest(args):
    series, report = _load_series(args.input, not args.no_semantic)
    out = Path(args.out)
    write_crawl_series(series, out, {"tool_version": __version__})
    _write(out / "ingest_report.txt", report.to_text(), args)
    print(report.to_text(), end="")


def _spec_from_args(args) -> FeatureSpec:
    cats = frozenset(c.strip().upper() for c in args.categories.split(",") if c.strip())
    return FeatureSpec(categories=cats, include_semantic=args.semantic, history=args.history,
                       lbla_only=args.lbla, scope=args.scope, include_pagerank=args.pagerank,
                       target_interval=args.target_interval)


def cmd_features(args):
    series, _ = _load_series(args.input, not args.no_semantic)
    spec = _spec_from_args(args)
    spec.resolve_target(series)
    index = None
    if {"SN", "DN"} & spec.categories:
        index = build_index(series.semantic_matrix(args.reference_crawl), k=args.k,
                            reference_crawl=args.reference_crawl)
    matrix = assemble(series, spec, index=index)
    _write(args.out, matrix.to_text(), args)
    print(f"{matrix.values.shape[0]} pages x {matrix.n_features} features -> {args.out}")


def _target(args, matrix: FeatureMatrix):
    series, _ = _load_series(args.input, not getattr(args, "no_semantic", False))
    T = matrix.target_interval if matrix.target_interval >= 0 else None
    y = target_vector(series, args.target, args.scope, T).values
    return y[matrix.page_ids], series


def _read_matrix(path) -> FeatureMatrix:
    try:
        return FeatureMatrix.from_text(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise NewLinksError(f"cannot read features {path}: {exc}") from None


def cmd_train(args):
    matrix = _read_matrix(args.features)
    y, _ = _target(args, matrix)
    params = HyperParams(n_estimators=args.n_estimators, min_samples_leaf=args.min_samples_leaf,
                         learning_rate=args.learning_rate, seed=args.seed,
                         max_depth=args.max_depth)
    model = fit(args.kind, matrix, y, params)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    model.save(args.out)
    print(f"{args.kind}: {model.n_trees} trees -> {args.out}")


def cmd_evaluate(args):
    model = EnsembleModel.load(args.model)
    matrix = _read_matrix(args.features)
    y, _ = _target(args, matrix)
    from .pipeline import _point_metrics
    role = "clf" if model.is_classifier else ("ngb" if model.kind == "NGBoostPoisson" else "reg")
    rows = _point_metrics(role, y, predict(model, matrix))
    text = "metric\tvalue\n" + "".join(f"{k}\t{float(v)!r}\n" for k, v in rows)
    if args.out:
        _write(args.out, text, args)
    print(text, end="")


def cmd_rank(args):
    if args.baseline:
        series, _ = _load_series(args.input, not args.no_semantic)
        result = baseline_scores(series, args.scope, args.baseline, args.target_interval,
                                 include_target_interval=args.include_target_interval)
        urls = series.urls
    else:
        if not (args.model and args.features):
            raise InvalidArgumentError("rank needs --baseline or both --model and --features")
        model = EnsembleModel.load(args.model)
        matrix = _read_matrix(args.features)
        scores = predict(model, matrix, args.output)
        result = RankingResult.from_scores(args.method or model.kind, matrix.page_ids, scores)
        urls = None
    _write(args.out, result.to_text(urls), args)
    print(f"ranked {len(result.page_ids)} pages -> {args.out}")


def cmd_importance(args):
    model = EnsembleModel.load(args.model)
    matrix = _read_matrix(args.features)
    y, _ = _target(args, matrix)
    metric = default_scorer(model.kind)
    imp = permutation_importance(model, matrix, y, metric, n_repeats=args.repeats, seed=args.seed)
    _write(args.out, imp.to_text(), args)
    print(imp.to_text(top=args.top), end="")


def cmd_report(args):
    run = Path(args.run_dir)
    for name in ("rho.tsv", "areas.tsv"):
        path = run / name
        if not path.exists():
            raise NewLinksError(f"{path} not found; is this an experiment directory?")
        lines = [ln for ln in path.read_text(encoding="utf-8").splitlines()
                 if ln.startswith("mean\t") or ln.startswith("rep\t")]
        header, rows = lines[0].split("\t")[1:], [ln.split("\t")[1:] for ln in lines[1:]]
        targets = sorted({r[1] for r in rows})
        methods = list(dict.fromkeys(r[0] for r in rows))
        table = {(r[0], r[1]): float(r[2]) for r in rows}
        print(f"== {header[-1]} (mean over repetitions) ==")
        print("method\t" + "\t".join(targets))
        for m in methods:
            print(m + "\t" + "\t".join(f"{table[(m, t)]:.4f}" for t in targets))


def cmd_run(args):
    cfg = ExperimentConfig.load(args.config)
    if args.out:
        cfg.output_dir = args.out
    if args.history_sweep:
        lo, _, hi = args.history_sweep.partition(":")
        try:
            hs = range(int(lo), int(hi or lo) + 1)
        except ValueError:
            raise InvalidArgumentError(f"bad --history-sweep {args.history_sweep!r}") from None
        for p in history_sweep(cfg, hs):
            print(f"wrote {p}")
        return
    out = write_outputs(run_experiment(cfg))
    print(f"wrote {out}")


# --- parser ---------------------------------------------------------------------

def _common_data(p, target=False):
    p.add_argument("--input", required=True, help="directory of crawl_*.jsonl files")
    p.add_argument("--scope", default="int", choices=["int", "ext", "internal", "external"])
    p.add_argument("--no-semantic", action="store_true",
                   help="keep pages without semantic vectors")
    if target:
        p.add_argument("--target", required=True, choices=list(TARGET_KINDS))


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="newlinks", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"newlinks {__version__}")
    ap.add_argument("--threads", type=int, default=None,
                    help="numba worker threads (default: machine parallelism)")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic crawl series")
    p.add_argument("--config", help="generator config JSON")
    p.add_argument("--n-pages", dest="n_pages", type=int)
    p.add_argument("--n-crawls", dest="n_crawls", type=int)
    p.add_argument("--rate-mode", dest="rate_mode", choices=["fixed", "bursty"])
    p.add_argument("--topic-coupled", action="store_true")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("ingest", help="validate snapshot files and write the canonical series")
    p.add_argument("--input", required=True)
    p.add_argument("--no-semantic", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("features", help="assemble a feature matrix")
    _common_data(p)
    p.add_argument("--categories", default="SP,SN,DP,DN")
    p.add_argument("--history", type=int, default=1)
    p.add_argument("--semantic", action="store_true")
    p.add_argument("--lbla", action="store_true")
    p.add_argument("--pagerank", action="store_true")
    p.add_argument("--target-interval", type=int, default=None)
    p.add_argument("--k", type=int, default=30, help="related pages per page")
    p.add_argument("--reference-crawl", type=int, default=0,
                   help="crawl whose semantic vectors define related pages")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("train", help="fit a model on a feature file")
    _common_data(p, target=True)
    p.add_argument("--features", required=True)
    p.add_argument("--kind", required=True, choices=list(KINDS))
    p.add_argument("--n-estimators", type=int, default=200)
    p.add_argument("--min-samples-leaf", type=int, default=2)
    p.add_argument("--learning-rate", type=float, default=0.1)
    p.add_argument("--max-depth", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="point metrics of a model on a feature file")
    _common_data(p, target=True)
    p.add_argument("--model", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("rank", help="rank pages by a model or a baseline")
    p.add_argument("--input", help="series directory (baselines)")
    p.add_argument("--scope", default="int")
    p.add_argument("--no-semantic", action="store_true")
    p.add_argument("--baseline", choices=list(BASELINES))
    p.add_argument("--target-interval", type=int, default=None)
    p.add_argument("--include-target-interval", action="store_true")
    p.add_argument("--model")
    p.add_argument("--features")
    p.add_argument("--output", choices=["value", "label", "proba", "mu", "change_probability"])
    p.add_argument("--method", help="method tag written with the ranking")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("importance", help="permutation feature importance")
    _common_data(p, target=True)
    p.add_argument("--model", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--top", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_importance)

    p = sub.add_parser("report", help="summarize an experiment directory")
    p.add_argument("run_dir")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("run", help="run a full experiment from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="override output_dir")
    p.add_argument("--history-sweep", help="LO:HI history sizes, one sub-experiment each")
    p.set_defaults(func=cmd_run)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads:
        import numba
        numba.set_num_threads(min(args.threads, numba.config.NUMBA_NUM_THREADS))
    try:
        args.func(args)
    except InvalidArgumentError as exc:
        print(f"newlinks: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConvergenceError as exc:
        print(f"newlinks: did not converge: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except (NewLinksError, OSError) as exc:
        print(f"newlinks: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
