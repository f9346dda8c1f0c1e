"""Stored worked examples and their end-to-end verification.

Each ``data/*.json`` file is one fixture::

    {"name": ..., "kind": ..., "provenance": ..., "inputs": {...},
     "expected": {field: {"value": ..., "tag": "PAPER|DERIVED|TRIVIAL", "tol": ...}}}

``scripts/make_fixtures.py`` regenerates the files; derived values there
come from standalone brute-force code, not from this package.
"""
from __future__ import annotations

import json
import math
import tempfile
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from pathlib import Path

import numpy as np

DATA_DIR = Path(__file__).parent / "data"
TAGS = ("PAPER", "DERIVED", "TRIVIAL")


@dataclass(frozen=True)
class FixtureResult:
    fixture: str
    field: str
    passed: bool
    detail: str = ""


@dataclass
class FixtureReport:
    results: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def failures(self) -> list:
        return [r for r in self.results if not r.passed]

    def to_text(self) -> str:
        lines = [f"{'PASS' if r.passed else 'FAIL'}\t{r.fixture}\t{r.field}\t{r.detail}"
                 for r in self.results]
        lines.append(f"{len(self.results) - len(self.failures())}/{len(self.results)} checks passed")
        return "\n".join(lines) + "\n"


def load_fixtures(data_dir=None) -> list:
    data_dir = Path(data_dir) if data_dir is not None else DATA_DIR
    return [json.loads(p.read_text(encoding="utf-8")) for p in sorted(data_dir.glob("*.json"))]


# --- runners: fixture inputs -> {field: actual value} ---------------------------

def _run_link_classification(inputs):
    from ..snapshot import classify_link
    return {f"case{i}": classify_link(src, dst).short
            for i, (src, dst) in enumerate(inputs["pairs"])}


def _run_ingestion(inputs):
    from ..features import target_vector
    from ..ingestion import load_crawl_series

    with tempfile.TemporaryDirectory() as tmp:
        paths = []
        for c, lines in enumerate(inputs["crawls"]):
            p = Path(tmp) / f"crawl_{c + 1:02d}.jsonl"
            p.write_text("".join(line + "\n" for line in lines), encoding="utf-8")
            paths.append(p)
        series, report = load_crawl_series(paths, require_semantic=inputs.get("require_semantic", True))
    out = {k: v for k, v in report.to_dict().items() if k.startswith("pages_")}
    out["kept_urls"] = series.urls
    out["new_internal"] = series.new_link_counts[:, :, 0].tolist()
    out["new_external"] = series.new_link_counts[:, :, 1].tolist()
    out["content_changes"] = series.content_changes.astype(int).tolist()
    out["lcr_int"] = target_vector(series, "LCR", "int").values.tolist()
    return out


def _run_metrics(inputs):
    from ..evaluation import classification_scores, regression_scores, spearman_rho

    out = {}
    tp, fp, fn, tn = inputs["confusion"]
    y = [1] * tp + [0] * fp + [1] * fn + [0] * tn
    yhat = [1] * tp + [1] * fp + [0] * fn + [0] * tn
    out.update({f"clf_{k}": v for k, v in classification_scores(y, yhat)._asdict().items()})
    out["spearman"] = spearman_rho(inputs["spearman_a"], inputs["spearman_b"])
    y = np.asarray(inputs["regression_y"], dtype=float)
    out.update({f"reg_{k}": v for k, v in regression_scores(y, np.zeros_like(y))._asdict().items()})
    out["reg_r2_negative"] = bool(out["reg_r2"] < 0)
    return out


def _series_from_counts(link_counts, digests):
    from ..snapshot import CrawlSeries, PageId, PageSnapshot

    src = "https://fixture.example.org/page"
    pages = (PageId(src, 0), PageId("https://fixture.example.org/other", 1))
    t0 = datetime(2021, 3, 1, tzinfo=timezone.utc)
    links, grid, times = set(), [], []
    for c, digest in enumerate(digests):
        if c > 0:
            links |= {f"{src}/c{c}/{j}" for j in range(link_counts[c - 1])}
        t = t0 + timedelta(weeks=c)
        times.append(t)
        grid.append([PageSnapshot(pages[0], t, frozenset(links), digest.encode(), 100, 50, 0.5),
                     PageSnapshot(pages[1], t, frozenset(), b"x", 100, 50, 0.5)])
    return CrawlSeries(pages, times, grid)


def _run_baselines(inputs):
    from ..evaluation import baseline_scores

    out = {}
    for case, spec in inputs["cases"].items():
        series = _series_from_counts(spec["new_internal"], spec["digests"])
        for kind in ("NNL-Av", "NNL-Pr", "CCR"):
            r = baseline_scores(series, "int", kind, spec.get("target_interval"), pages=[0])
            out[f"{case}.{kind}"] = float(r.scores[0])
    return out


def _run_pagerank(inputs):
    from ..graph import SnapshotGraph, pagerank

    out = {}
    for name, g in inputs["graphs"].items():
        src = np.asarray([e[0] for e in g["edges"]], dtype=np.int64)
        dst = np.asarray([e[1] for e in g["edges"]], dtype=np.int64)
        graph = SnapshotGraph(g["n"], src, dst, np.ones(src.size, dtype=bool),
                              np.zeros(g["n"], dtype=np.int64))
        out[name] = pagerank(graph, g.get("damping", 0.85)).scores.tolist()
    return out


RUNNERS = {
    "link_classification": _run_link_classification,
    "ingestion": _run_ingestion,
    "metrics": _run_metrics,
    "baselines": _run_baselines,
    "pagerank": _run_pagerank,
}


def _matches(actual, expected, tol) -> bool:
    if isinstance(expected, list):
        return (isinstance(actual, list) and len(actual) == len(expected)
                and all(_matches(a, e, tol) for a, e in zip(actual, expected)))
    if isinstance(expected, bool) or isinstance(expected, str) or expected is None:
        return actual == expected
    if isinstance(expected, (int, float)):
        try:
            return math.isclose(float(actual), float(expected), rel_tol=0.0, abs_tol=tol)
        except (TypeError, ValueError):
            return False
    return actual == expected


def verify_fixtures(data_dir=None) -> FixtureReport:
    """Run every stored fixture and compare each expected field.

    An empty fixture directory passes vacuously. A fixture whose runner
    raises fails with the exception as detail; none is skipped.
    """
    report = FixtureReport()
    for fx in load_fixtures(data_dir):
        name = fx.get("name", "?")
        runner = RUNNERS.get(fx.get("kind"))
        if runner is None:
            report.results.append(FixtureResult(name, "kind", False, f"unknown kind {fx.get('kind')!r}"))
            continue
        try:
            actual = runner(fx["inputs"])
        except Exception as exc:  # a fixture must fail loudly, never vanish
            report.results.append(FixtureResult(name, "run", False, f"{type(exc).__name__}: {exc}"))
            continue
        for fname, spec in fx["expected"].items():
            if spec.get("tag") not in TAGS:
                report.results.append(FixtureResult(name, fname, False, "missing provenance tag"))
                continue
            got = actual.get(fname, "<absent>")
            ok = _matches(got, spec["value"], float(spec.get("tol", 0.0)))
            detail = f"[{spec['tag']}]" + ("" if ok else f" expected {spec['value']!r}, got {got!r}")
            report.results.append(FixtureResult(name, fname, ok, detail))
    return report
