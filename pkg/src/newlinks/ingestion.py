"""Loading and writing the line-delimited snapshot format.

One file holds one crawl; each line is a JSON object describing one page
snapshot. An optional first line ``{"_meta": {...}}`` carries series
metadata (digest algorithm, generator provenance, tool version...).
"""
from __future__ import annotations

import json
import logging
import math
from collections import Counter
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import (DegenerateCorpusError, DegenerateVectorError, EmptySeriesError,
                     InvalidArgumentError, MalformedInputError, NewLinksError)
from .graph import build_graph, default_trusted, inlink_counts, pagerank, trustrank
from .snapshot import CrawlSeries, PageId, PageSnapshot, normalize_url, split_url

log = logging.getLogger(__name__)

FIELDS = ("url", "fetch_time", "out_links", "content_digest", "content_size", "text_size",
          "text_quality", "semantic_vector", "pagerank", "trustrank", "inlinks_int",
          "inlinks_ext")
GRAPH_FIELDS = ("inlinks_int", "inlinks_ext", "pagerank", "trustrank")


@dataclass(frozen=True)
class SnapshotFile:
    path: Path
    crawl_index: int
    record_count: Optional[int] = None


@dataclass
class IngestReport:
    pages_read: int = 0
    pages_kept: int = 0
    pages_discarded_incomplete: int = 0
    pages_discarded_invalid: int = 0
    tld_histogram: Counter = field(default_factory=Counter)
    recomputed: list = field(default_factory=list)

    def balanced(self) -> bool:
        return self.pages_read == (self.pages_kept + self.pages_discarded_incomplete
                                   + self.pages_discarded_invalid)

    def to_dict(self) -> dict:
        return {
            "pages_read": self.pages_read,
            "pages_kept": self.pages_kept,
            "pages_discarded_incomplete": self.pages_discarded_incomplete,
            "pages_discarded_invalid": self.pages_discarded_invalid,
            "tld_histogram": dict(sorted(self.tld_histogram.items(),
                                         key=lambda kv: (-kv[1], kv[0]))),
            "recomputed": list(self.recomputed),
        }

    def to_text(self, top: int = 20) -> str:
        lines = [
            f"pages read:                 {self.pages_read}",
            f"pages kept:                 {self.pages_kept}",
            f"discarded (incomplete):     {self.pages_discarded_incomplete}",
            f"discarded (invalid):        {self.pages_discarded_invalid}",
        ]
        if self.recomputed:
            lines.append("recomputed fields:          " + ", ".join(self.recomputed))
        lines.append(f"top {top} TLDs:")
        for tld, n in sorted(self.tld_histogram.items(), key=lambda kv: (-kv[1], kv[0]))[:top]:
            lines.append(f"  .{tld:<10} {n}")
        return "\n".join(lines) + "\n"


# --- record (de)serialization -------------------------------------------------

def _format_time(t: datetime) -> str:
    return t.astimezone(timezone.utc).isoformat()


def _parse_time(s: str) -> datetime:
    t = datetime.fromisoformat(s.replace("Z", "+00:00"))
    if t.tzinfo is None:
        t = t.replace(tzinfo=timezone.utc)
    return t.astimezone(timezone.utc)


def snapshot_to_record(snap: PageSnapshot) -> dict:
    rec = {
        "url": snap.url,
        "fetch_time": _format_time(snap.fetch_time),
        "out_links": sorted(snap.outlinks),
        "content_digest": bytes(snap.content_digest).hex(),
        "content_size": int(snap.content_size),
        "text_size": int(snap.text_size),
        "text_quality": float(snap.text_quality),
    }
    if snap.semantic_vector is not None:
        rec["semantic_vector"] = [float(v) for v in snap.semantic_vector]
    for name in ("pagerank", "trustrank"):
        v = getattr(snap, name)
        if v is not None:
            rec[name] = float(v)
    for name in ("inlinks_int", "inlinks_ext"):
        v = getattr(snap, name)
        if v is not None:
            rec[name] = int(v)
    return rec


def _record_to_snapshot(rec: dict, page: PageId, require_semantic: bool) -> PageSnapshot:
    """Build a snapshot; raises MalformedInputError on invalid content and
    ``_Incomplete`` when only the semantic vector is unusable."""
    try:
        vec = rec.get("semantic_vector")
        if vec is not None:
            try:
                vec = np.asarray(vec, dtype=np.float64)
                # already-unit vectors are kept bit-for-bit so re-ingestion is exact
                if vec.ndim != 1 or abs(np.linalg.norm(vec) - 1.0) > 1e-12:
                    vec = normalize_semantic(vec)
            except DegenerateVectorError:
                vec = None
        if vec is None and require_semantic:
            raise _Incomplete(page.url)
        return PageSnapshot(
            page=page,
            fetch_time=_parse_time(rec["fetch_time"]),
            outlinks=frozenset(normalize_url(u) for u in rec["out_links"]),
            content_digest=bytes.fromhex(rec["content_digest"]),
            content_size=int(rec["content_size"]),
            text_size=int(rec["text_size"]),
            text_quality=float(rec["text_quality"]),
            inlinks_int=None if rec.get("inlinks_int") is None else int(rec["inlinks_int"]),
            inlinks_ext=None if rec.get("inlinks_ext") is None else int(rec["inlinks_ext"]),
            semantic_vector=vec,
            pagerank=None if rec.get("pagerank") is None else float(rec["pagerank"]),
            trustrank=None if rec.get("trustrank") is None else float(rec["trustrank"]),
        )
    except _Incomplete:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedInputError(f"{page.url}: {exc!r}") from None


class _Incomplete(Exception):
    pass


def read_snapshot_file(path) -> tuple[dict, list]:
    """Return ``(meta, records)`` of one snapshot file."""
    meta, records = {}, []
    try:
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                try:
                    rec = json.loads(line)
                except json.JSONDecodeError as exc:
                    records.append({"_bad_line": lineno, "_error": str(exc)})
                    continue
                if lineno == 1 and isinstance(rec, dict) and "_meta" in rec:
                    meta = rec["_meta"]
                    continue
                records.append(rec)
    except OSError as exc:
        raise NewLinksError(f"cannot read snapshot file {path}: {exc}") from exc
    return meta, records


def write_crawl_series(series: CrawlSeries, directory, meta: Optional[dict] = None) -> list:
    """Write one canonical file per crawl; returns the :class:`SnapshotFile` list."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    header = dict(series.metadata)
    if meta:
        header.update(meta)
    files = []
    for c, row in enumerate(series.snapshots):
        path = directory / f"crawl_{c + 1:02d}.jsonl"
        with open(path, "w", encoding="utf-8") as fh:
            if header:
                fh.write(json.dumps({"_meta": header}, sort_keys=True, separators=(",", ":")) + "\n")
            for snap in row:
                fh.write(json.dumps(snapshot_to_record(snap), separators=(",", ":")) + "\n")
        files.append(SnapshotFile(path, c + 1, len(row)))
    return files


def discover_snapshot_files(directory) -> list:
    paths = sorted(Path(directory).glob("crawl_*.jsonl"))
    return [SnapshotFile(p, i + 1) for i, p in enumerate(paths)]


# --- loading ---------------------------------------------------------------

def _tld(url: str) -> str:
    return split_url(url)[1].rsplit(".", 1)[-1]


def _median_time(times: Sequence[datetime]) -> datetime:
    stamps = sorted(t.timestamp() for t in times)
    m = len(stamps) // 2
    med = stamps[m] if len(stamps) % 2 else (stamps[m - 1] + stamps[m]) / 2
    return datetime.fromtimestamp(med, tz=timezone.utc)


def load_crawl_series(files: Iterable, require_semantic: bool = True,
                      trusted_fraction: float = 0.01) -> tuple[CrawlSeries, IngestReport]:
    """Align snapshot files into a series keeping only complete, valid pages.

    ``files`` are :class:`SnapshotFile` objects (or paths, numbered in the
    given order). A page is *invalid* if any of its records fails to parse,
    *incomplete* if it is missing from some crawl or (with
    ``require_semantic``) lacks a usable semantic vector somewhere. Graph
    fields absent from the input are recomputed over the kept pages.
    """
    files = [f if isinstance(f, SnapshotFile) else SnapshotFile(Path(f), i + 1)
             for i, f in enumerate(files)]
    if len(files) < 2:
        raise InvalidArgumentError("at least two crawl files are required")
    files.sort(key=lambda f: f.crawl_index)
    if [f.crawl_index for f in files] != list(range(1, len(files) + 1)):
        raise InvalidArgumentError("crawl indices must be contiguous from 1")

    per_crawl, metas, order, seen = [], [], [], set()
    invalid, incomplete = set(), set()
    crawl_times = []
    for f in files:
        meta, records = read_snapshot_file(f.path)
        metas.append(meta)
        by_url, times = {}, []
        for rec in records:
            url = rec.get("url") if isinstance(rec, dict) else None
            if not isinstance(url, str):
                # unparseable line: cannot be attributed to a page
                log.warning("%s: skipping unreadable record %s", f.path, rec.get("_bad_line"))
                continue
            try:
                url = normalize_url(url)
                split_url(url)
            except MalformedInputError:
                invalid.add(url)
                if url not in seen:
                    seen.add(url)
                    order.append(url)
                continue
            if url not in seen:
                seen.add(url)
                order.append(url)
            if url in by_url:
                invalid.add(url)
                continue
            by_url[url] = rec
            try:
                times.append(_parse_time(rec["fetch_time"]))
            except (KeyError, TypeError, ValueError):
                pass
        if not times:
            raise EmptySeriesError(f"{f.path}: no readable records")
        crawl_times.append(_median_time(times))
        per_crawl.append(by_url)

    report = IngestReport(pages_read=len(order))
    candidates = [u for u in order if u not in invalid]
    for u in candidates:
        if any(u not in by_url for by_url in per_crawl):
            incomplete.add(u)
    kept_urls = [u for u in candidates if u not in incomplete]

    pages, grid = [], [[] for _ in files]
    for url in kept_urls:
        page = PageId(url, len(pages))
        row = []
        try:
            for c, by_url in enumerate(per_crawl):
                row.append(_record_to_snapshot(by_url[url], page, require_semantic))
        except MalformedInputError as exc:
            log.debug("discarding invalid page: %s", exc)
            invalid.add(url)
            continue
        except _Incomplete:
            incomplete.add(url)
            continue
        if len(row) != len(files):
            continue
        # re-number densely
        page = PageId(url, len(pages))
        pages.append(page)
        for c, snap in enumerate(row):
            grid[c].append(replace(snap, page=page))

    report.pages_kept = len(pages)
    report.pages_discarded_invalid = len(invalid)
    report.pages_discarded_incomplete = len(incomplete)
    if not pages:
        raise EmptySeriesError("no page has a complete and valid timeline")
    for p in pages:
        report.tld_histogram[_tld(p.url)] += 1

    if any(b <= a for a, b in zip(crawl_times, crawl_times[1:])):
        raise MalformedInputError("per-file fetch-time medians are not strictly increasing")
    series = CrawlSeries(tuple(pages), tuple(crawl_times), grid, metas[0])
    series = fill_graph_fields(series, trusted_fraction, report)
    return series, report


def fill_graph_fields(series: CrawlSeries, trusted_fraction: float = 0.01,
                      report: Optional[IngestReport] = None, trusted=None) -> CrawlSeries:
    """Recompute, per crawl, any graph field that some page lacks."""
    rows = [list(r) for r in series.snapshots]
    changed = False
    for c, row in enumerate(rows):
        missing = [name for name in GRAPH_FIELDS if any(getattr(s, name) is None for s in row)]
        if not missing:
            continue
        changed = True
        g = build_graph(series, c)
        counts = inlink_counts(g)
        values = {"inlinks_int": counts[:, 0].tolist(), "inlinks_ext": counts[:, 1].tolist()}
        if "pagerank" in missing:
            values["pagerank"] = pagerank(g).scores.tolist()
        if "trustrank" in missing:
            seeds = trusted if trusted is not None else default_trusted(g, trusted_fraction)
            values["trustrank"] = trustrank(g, seeds).scores.tolist()
        for p, snap in enumerate(row):
            row[p] = replace(snap, **{k: values[k][p] for k in missing})
        if report is not None:
            report.recomputed.extend(f"{k}@crawl{c + 1}" for k in missing)
    if not changed:
        return series
    return CrawlSeries(series.pages, series.crawl_times, rows, series.metadata)


# --- semantic vectors ---------------------------------------------------------

def normalize_semantic(v) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or v.size == 0:
        raise InvalidArgumentError("semantic vector must be a non-empty 1-d array")
    norm = np.linalg.norm(v)
    if not np.isfinite(norm) or norm == 0.0:
        raise DegenerateVectorError("cannot normalize a zero (or non-finite) vector")
    return v / norm


def tfidf_matrix(texts: Sequence[Sequence[str]]) -> tuple[sp.csr_matrix, list]:
    """Raw-count TF times ``ln(N / df)`` IDF; returns ``(matrix, vocabulary)``."""
    vocab = sorted({tok for doc in texts for tok in doc})
    col = {tok: j for j, tok in enumerate(vocab)}
    rows, cols, vals = [], [], []
    for i, doc in enumerate(texts):
        for tok, n in Counter(doc).items():
            rows.append(i)
            cols.append(col[tok])
            vals.append(float(n))
    tf = sp.csr_matrix((vals, (rows, cols)), shape=(len(texts), len(vocab)))
    df = np.bincount(cols, minlength=len(vocab))
    idf = np.log(len(texts) / np.maximum(df, 1))
    return sp.csr_matrix(tf.multiply(idf[None, :])), vocab


def randomized_svd(A, k: int, n_oversamples: int = 10, n_iter: int = 7, seed: int = 0):
    """Truncated SVD by randomized subspace iteration; returns ``(U, s, Vt)``."""
    m, n = A.shape
    ell = min(k + n_oversamples, m, n)
    rng = np.random.default_rng(seed)
    Q, _ = np.linalg.qr(A @ rng.standard_normal((n, ell)))
    for _ in range(n_iter):
        Z, _ = np.linalg.qr(A.T @ Q)
        Q, _ = np.linalg.qr(A @ Z)
    B = np.asarray((A.T @ Q).T)
    Ub, s, Vt = np.linalg.svd(B, full_matrices=False)
    return (Q @ Ub)[:, :k], s[:k], Vt[:k]


def embed_corpus(texts: Sequence[Sequence[str]], dim: int = 192, seed: int = 0) -> np.ndarray:
    """LSA-style embedding: TF-IDF reduced to ``dim`` columns, rows unit-norm.

    ``dim`` is clamped to ``min(n_docs, vocabulary size)``. Documents whose
    TF-IDF row is entirely zero come back as zero rows; callers treat them
    as having no semantic vector.
    """
    if len(texts) == 0:
        raise InvalidArgumentError("empty corpus")
    if all(len(doc) == 0 for doc in texts):
        raise DegenerateCorpusError("every document is empty")
    X, vocab = tfidf_matrix(texts)
    if X.nnz == 0 or not np.any(X.data):
        raise DegenerateCorpusError("TF-IDF matrix is identically zero")
    k = min(dim, X.shape[0], X.shape[1])
    U, s, _ = randomized_svd(X, k, seed=seed)
    emb = U * s
    norms = np.linalg.norm(emb, axis=1)
    ok = norms > 1e-12 * max(1.0, norms.max())
    emb[ok] /= norms[ok, None]
    emb[~ok] = 0.0
    return emb


def fallback_text_quality(tokens: Sequence[str]) -> float:
    """``1 - exp(-4 V / D)`` with V distinct and D total tokens; 0 if empty."""
    if len(tokens) == 0:
        return 0.0
    return 1.0 - math.exp(-4.0 * len(set(tokens)) / len(tokens))
