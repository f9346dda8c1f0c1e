"""End-to-end experiments: ingest, graph, related pages, features, split,
tune, fit, evaluate and rank, repeated over independent splits."""
from __future__ import annotations

import contextlib
import hashlib
import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .errors import InvalidArgumentError, NewLinksError
from .evaluation import (BASELINES, METHODS, RankingResult, baseline_scores,
                         classification_scores, evaluate_rankings, make_split,
                         regression_scores, spearman_rho)
from .features import (FeatureMatrix, FeatureSpec, apply_semantic_reduction, assemble,
                       lbla_subset, reduce_semantic, target_vector, without_own_link_history)
from .ingestion import discover_snapshot_files, fill_graph_fields, load_crawl_series
from .learners import (NGBOOST_DEFAULTS, HyperParams, fit, poisson_nll, predict,
                       tree_seed, tune)
from .related import build_index
from .snapshot import LinkScope
from .synthetic import GeneratorConfig, generate

FAMILIES = {"extra_trees": ("ExtraTreesRegressor", "ExtraTreesClassifier", "ET"),
            "hist_gb": ("HistGBRegressor", "HistGBClassifier", "HGB")}
DEFAULT_GRIDS = {"extra_trees": {"n_estimators": [200], "min_samples_leaf": [2, 10]},
                 "hist_gb": {"n_estimators": [200], "min_samples_leaf": [20],
                             "learning_rate": [0.1]}}

# method tag -> (target kind, learner role, feature view)
METHOD_TABLE = {
    "LCR-ET": ("LCR", "reg", "no_own_history"),
    "LCR-ET_LBLA": ("LCR", "reg", "lbla"),
    "NL-ET": ("NL", "clf", "all"),
    "PNL-ET": ("NL", "clf", "all"),
    "NL-ET_LBLA": ("NL", "clf", "lbla"),
    "NNL-ET": ("NNL", "reg", "all"),
    "NNL-ET_LBLA": ("NNL", "reg", "lbla"),
    "NNL-NGB": ("NNL", "ngb", "lbla"),
}
TARGETS = ("LCR", "NL", "NNL")


@dataclass
class ExperimentConfig:
    """Everything needed to reproduce one experiment.

    Exactly one of ``input_dir`` (canonical snapshot files) and
    ``generator`` (a :class:`GeneratorConfig` dict) must be set.
    ``features`` holds :class:`FeatureSpec` keywords (categories as a list).
    """

    input_dir: Optional[str] = None
    generator: Optional[dict] = None
    scope: str = "int"
    features: dict = field(default_factory=lambda: {"history": 1})
    family: str = "extra_trees"
    grid: Optional[dict] = None
    ngboost: dict = field(default_factory=dict)
    methods: list = field(default_factory=lambda: list(METHODS))
    repetitions: int = 3
    seed: int = 0
    k_related: int = 30
    reference_crawl: int = 0
    semantic_clusters: int = 20
    n_realizations: int = 5
    include_target_interval: bool = False
    require_semantic: bool = True
    output_dir: str = "out"

    def __post_init__(self):
        self.validate()

    def validate(self):
        def bad(msg):
            raise InvalidArgumentError(f"experiment config: {msg}")

        if (self.input_dir is None) == (self.generator is None):
            bad("set exactly one of input_dir and generator")
        if self.generator is not None:
            GeneratorConfig.from_dict(self.generator)
        LinkScope.parse(self.scope)
        if self.family not in FAMILIES:
            bad(f"family must be one of {sorted(FAMILIES)}")
        unknown = [m for m in self.methods if m not in METHODS]
        if unknown or not self.methods:
            bad(f"unknown or empty method list {unknown}")
        if len(set(self.methods)) != len(self.methods):
            bad("duplicate methods")
        if self.repetitions < 1 or self.n_realizations < 1 or self.k_related < 1:
            bad("repetitions, n_realizations and k_related must be >= 1")
        if self.semantic_clusters < 0:
            bad("semantic_clusters must be >= 0")
        self.feature_spec()
        needs_lbla = any(m.endswith("LBLA") or m == "NNL-NGB" for m in self.methods)
        if needs_lbla and not {"DP", "DN"} <= self.feature_spec().categories:
            bad("LBLA methods need the DP and DN categories")
        unknown_ngb = set(self.ngboost) - set(HyperParams.__dataclass_fields__)
        if unknown_ngb:
            bad(f"unknown ngboost keys {sorted(unknown_ngb)}")

    def feature_spec(self) -> FeatureSpec:
        kw = dict(self.features)
        unknown = set(kw) - set(FeatureSpec.__dataclass_fields__) - {"lbla_only"}
        if unknown:
            raise InvalidArgumentError(f"experiment config: unknown feature keys {sorted(unknown)}")
        if kw.get("lbla_only"):
            raise InvalidArgumentError("experiment config: pick LBLA views through the method list")
        if "categories" in kw:
            kw["categories"] = frozenset(kw["categories"])
        kw["scope"] = self.scope
        try:
            return FeatureSpec(**kw)
        except TypeError as exc:
            raise InvalidArgumentError(f"experiment config: {exc}") from None

    def tuning_grid(self) -> dict:
        return self.grid if self.grid is not None else DEFAULT_GRIDS[self.family]

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        if not isinstance(d, dict):
            raise InvalidArgumentError("experiment config must be a JSON object")
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise InvalidArgumentError(f"unknown experiment config keys {sorted(unknown)}")
        try:
            return cls(**d)
        except TypeError as exc:
            raise InvalidArgumentError(f"experiment config: {exc}") from None

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                d = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise InvalidArgumentError(f"cannot read config {path}: {exc}") from None
        return cls.from_dict(d)

    def hash(self) -> str:
        """Digest of every field except ``output_dir``."""
        d = self.to_dict()
        d.pop("output_dir")
        blob = json.dumps(d, sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def provenance_line(config_hash: str, seed: int) -> str:
    return f"# newlinks {__version__} config={config_hash} seed={seed}\n"


@contextlib.contextmanager
def stage(name: str):
    """Prefix any package error raised inside with the stage name."""
    try:
        yield
    except NewLinksError as exc:
        if exc.args and isinstance(exc.args[0], str) and not exc.args[0].startswith("[stage "):
            exc.args = (f"[stage {name}] {exc.args[0]}",) + exc.args[1:]
        raise


# --- stages -------------------------------------------------------------------

def load_series(cfg: ExperimentConfig):
    """Return ``(series, extra)``: an IngestReport or a GroundTruth."""
    if cfg.generator is not None:
        return generate(GeneratorConfig.from_dict(cfg.generator))
    files = discover_snapshot_files(cfg.input_dir)
    if len(files) < 2:
        raise InvalidArgumentError(f"{cfg.input_dir}: need at least two crawl_*.jsonl files")
    return load_crawl_series(files, require_semantic=cfg.require_semantic)


def design_for(matrix: FeatureMatrix, method: str) -> FeatureMatrix:
    kind, _, view = METHOD_TABLE[method]
    if view == "lbla":
        return lbla_subset(matrix, kind)
    if view == "no_own_history":
        return without_own_link_history(matrix)
    return matrix


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    config_hash: str
    urls: list
    target_interval: int
    reports: list          # one EvaluationReport per repetition
    metrics: list          # (rep, method, metric, value)
    rankings: dict         # (rep, method) -> RankingResult
    models: dict           # (rep, method) -> EnsembleModel
    matrix: FeatureMatrix
    extra: object = None

    def mean_table(self, what: str) -> dict:
        """Mean over repetitions of ``rho`` or ``area`` per (method, target)."""
        out = {}
        for key in self.reports[0].rho:
            vals = [r.rho[key] if what == "rho" else r.area(*key) for r in self.reports]
            out[key] = float(np.nanmean(vals)) if not np.all(np.isnan(vals)) else float("nan")
        return out


def _learner_kind(cfg, role):
    reg, clf, _ = FAMILIES[cfg.family]
    return {"reg": reg, "clf": clf, "ngb": "NGBoostPoisson"}[role]


def _point_metrics(role, y, pred):
    if role == "clf":
        s = classification_scores(y, pred)
        return list(s._asdict().items())
    if role == "ngb":
        return [("poisson_nll", poisson_nll(y, pred)), ("spearman", spearman_rho(y, pred))]
    return list(regression_scores(y, pred)._asdict().items())


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    """Run every repetition of ``cfg``; nothing is written to disk."""
    chash = cfg.hash()
    spec = cfg.feature_spec()
    scope = LinkScope.parse(cfg.scope)
    with stage("ingest"):
        series, extra = load_series(cfg)
    with stage("graph"):
        series = fill_graph_fields(series)
    with stage("features"):
        T = spec.resolve_target(series)
    index = None
    if {"SN", "DN"} & spec.categories:
        with stage("related"):
            ref = cfg.reference_crawl
            if not 0 <= ref < series.n_crawls:
                raise InvalidArgumentError(f"reference_crawl {ref} outside 0..{series.n_crawls - 1}")
            index = build_index(series.semantic_matrix(ref), k=cfg.k_related, reference_crawl=ref)
    with stage("features"):
        matrix = assemble(series, spec, index=index)
        targets = {kind: target_vector(series, kind, scope, T).values for kind in TARGETS}

    reports, metrics, rankings, models = [], [], {}, {}
    for rep in range(cfg.repetitions):
        split = make_split(series.n_pages, tree_seed(cfg.seed, 1000 + rep))
        rep_matrix = matrix
        if spec.include_semantic and cfg.semantic_clusters > 0:
            with stage("features"):
                sem = np.array([c.semantic for c in matrix.columns], dtype=bool)
                reducer, _ = reduce_semantic(matrix.values[split.train_full][:, sem],
                                             cfg.semantic_clusters)
                rep_matrix = apply_semantic_reduction(matrix, reducer)
        fitted = {}
        results = []
        for m_idx, method in enumerate(cfg.methods):
            test = split.test
            if method in BASELINES:
                with stage(f"rank:{method}"):
                    r = baseline_scores(series, scope, method, T, pages=test,
                                        include_target_interval=cfg.include_target_interval)
                if method == "NNL-Pr":
                    metrics += [(rep, method, k, v) for k, v in
                                _point_metrics("reg", targets["NNL"][test], r.scores_for(test))]
                    metrics += [(rep, method, k, v) for k, v in _point_metrics(
                        "clf", targets["NL"][test], (r.scores_for(test) > 0).astype(float))]
            else:
                kind, role, view = METHOD_TABLE[method]
                key = (kind, role, view)
                X = design_for(rep_matrix, method)
                y = targets[kind]
                if key not in fitted:
                    lk = _learner_kind(cfg, role)
                    seed = tree_seed(cfg.seed, 2000 + 100 * rep + m_idx)
                    with stage(f"tune:{method}"):
                        if role == "ngb":
                            params = replace(NGBOOST_DEFAULTS, seed=seed, **cfg.ngboost)
                        else:
                            params = tune(lk, cfg.tuning_grid(), X.take(split.train).values,
                                          y[split.train], X.take(split.dev).values, y[split.dev],
                                          base=HyperParams(seed=seed)).best
                    with stage(f"fit:{method}"):
                        model = fit(lk, X.take(split.train_full), y[split.train_full], params)
                    model = replace(model, notes=model.notes + (
                        f"provenance: newlinks {__version__} config={chash} seed={cfg.seed}",))
                    fitted[key] = model
                model = fitted[key]
                models[(rep, method)] = model
                Xt = X.take(test)
                with stage(f"predict:{method}"):
                    if method == "PNL-ET":
                        score = predict(model, Xt, "proba")
                    else:
                        score = predict(model, Xt)
                if method != "PNL-ET":
                    metrics += [(rep, method, k, v) for k, v in
                                _point_metrics(role, y[test], score)]
                r = RankingResult.from_scores(method, test, score)
            rankings[(rep, method)] = r
            results.append(r)
        with stage("evaluate"):
            reports.append(evaluate_rankings(
                results, {k: targets[k][split.test] for k in TARGETS}, split.test,
                cfg.n_realizations, tree_seed(cfg.seed, 3000 + rep)))
    return ExperimentResult(cfg, chash, series.urls, T, reports, metrics, rankings, models,
                            matrix, extra)


# --- output -------------------------------------------------------------------

def _fmt(v) -> str:
    return repr(float(v))


def write_outputs(result: ExperimentResult, out_dir=None) -> Path:
    """Write tables, rankings and models; every file starts with provenance."""
    cfg = result.config
    out = Path(out_dir or cfg.output_dir)
    (out / "rankings").mkdir(parents=True, exist_ok=True)
    (out / "models").mkdir(parents=True, exist_ok=True)
    head = provenance_line(result.config_hash, cfg.seed)

    def write(path, text):
        with open(out / path, "w", encoding="utf-8") as fh:
            fh.write(head + text)

    doc = {"config": cfg.to_dict(), "config_hash": result.config_hash, "version": __version__,
           "target_interval": result.target_interval}
    with open(out / "config.json", "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, indent=1)
        fh.write("\n")

    lines = ["rep\tmethod\tmetric\tvalue"]
    lines += [f"{rep}\t{m}\t{k}\t{_fmt(v)}" for rep, m, k, v in result.metrics]
    write("metrics.tsv", "\n".join(lines) + "\n")

    for what, fname in (("rho", "rho.tsv"), ("area", "areas.tsv")):
        lines = [f"rep\tmethod\ttarget\t{what}"]
        for rep, report in enumerate(result.reports):
            for (m, t) in report.rho:
                v = report.rho[(m, t)] if what == "rho" else report.area(m, t)
                lines.append(f"{rep}\t{m}\t{t}\t{_fmt(v)}")
        for (m, t), v in result.mean_table(what).items():
            lines.append(f"mean\t{m}\t{t}\t{_fmt(v)}")
        write(fname, "\n".join(lines) + "\n")

    lines = ["rep\tmethod\ttarget\tk\tprecision"]
    for rep, report in enumerate(result.reports):
        for (m, t), c in report.curves.items():
            lines += [f"{rep}\t{m}\t{t}\t{k}\t{_fmt(p)}" for k, p in zip(c.ks, c.precision)]
    write("curves.tsv", "\n".join(lines) + "\n")

    for (rep, method), r in result.rankings.items():
        write(f"rankings/{method}.rep{rep}.tsv", r.to_text(result.urls))
    for (rep, method), model in result.models.items():
        if method == "PNL-ET":
            continue  # same model as NL-ET
        model.save(out / "models" / f"{method}.rep{rep}.model")
    return out


def history_sweep(cfg: ExperimentConfig, histories, out_dir=None) -> list:
    """One experiment per history size, written to ``h00``, ``h01``, ..."""
    paths = []
    base = Path(out_dir or cfg.output_dir)
    for h in histories:
        feats = dict(cfg.features, history=int(h))
        sub = replace(cfg, features=feats, output_dir=str(base / f"h{int(h):02d}"))
        sub.validate()
        paths.append(write_outputs(run_experiment(sub)))
    return paths
