"""Prediction targets and the SP/SN/DP/DN feature matrix.

Column families (``T`` is the target interval, features use crawls ``<= T``):

* SP - page state at crawl ``T``: sizes, text quality, outlink counts by
  scope, URL depths, optionally the raw semantic vector (``sem_###``).
* SN - graph state at crawl ``T`` (inlinks, TrustRank, optionally PageRank)
  and neighbour-weighted averages of every scalar SP column (``nb_*``).
* DP - for lags ``1..h``: new-outlink counts per scope in interval ``T-l``
  and their means, plus lagged dynamic SP scalars at crawl ``T-l``.
* DN - lagged inlinks/TrustRank, the neighbour-weighted link change rate
  over all past intervals (present for any ``h``), and neighbour-weighted
  new-outlink counts per lag with their means.
"""
from __future__ import annotations

import hashlib
import io
import warnings
from dataclasses import dataclass, replace
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import InvalidArgumentError, MalformedInputError, MissingDataError
from .related import RelatedPagesIndex
from .snapshot import SCOPES, CrawlSeries, LinkScope, url_depths

CATEGORIES = ("SP", "SN", "DP", "DN")
TARGET_KINDS = ("LCR", "NL", "NNL")
SP_DYNAMIC = ("content_size", "text_size", "text_quality", "n_internal_outlinks",
              "n_external_outlinks")
SP_SCALARS = SP_DYNAMIC + ("url_path_depth", "url_domain_depth")


# --- targets ------------------------------------------------------------------

def _counts(series: CrawlSeries, scope) -> np.ndarray:
    return series.new_link_counts[:, :, LinkScope.parse(scope).index]


def compute_lcr(series: CrawlSeries, page: int, scope, intervals: Iterable[int]) -> float:
    """Fraction of the given intervals in which ``page`` gained a new outlink."""
    intervals = list(intervals)
    if not intervals:
        raise InvalidArgumentError("empty interval range")
    for i in intervals:
        series._check_interval(i)
    counts = _counts(series, scope)[page, intervals]
    return float(np.count_nonzero(counts)) / len(intervals)


def compute_nl(series: CrawlSeries, page: int, scope, interval: int) -> int:
    return int(compute_nnl(series, page, scope, interval) > 0)


def compute_nnl(series: CrawlSeries, page: int, scope, interval: int) -> int:
    series._check_interval(interval)
    return int(_counts(series, scope)[page, interval])


@dataclass(frozen=True, eq=False)
class TargetVector:
    values: np.ndarray
    kind: str
    scope: LinkScope
    intervals: tuple


def target_vector(series: CrawlSeries, kind: str, scope, interval: Optional[int] = None) -> TargetVector:
    """Per-page target. LCR spans all intervals; NL/NNL use ``interval`` (default last)."""
    scope = LinkScope.parse(scope)
    kind = kind.upper()
    counts = _counts(series, scope)
    if kind == "LCR":
        vals = np.count_nonzero(counts, axis=1) / series.n_intervals
        return TargetVector(vals, kind, scope, tuple(range(series.n_intervals)))
    if interval is None:
        interval = series.n_intervals - 1
    series._check_interval(interval)
    if kind == "NNL":
        return TargetVector(counts[:, interval].astype(np.float64), kind, scope, (interval,))
    if kind == "NL":
        return TargetVector((counts[:, interval] > 0).astype(np.float64), kind, scope, (interval,))
    raise InvalidArgumentError(f"unknown target kind {kind!r}")


# --- feature matrix -----------------------------------------------------------

@dataclass(frozen=True)
class Column:
    name: str
    category: str
    lbla: bool = False
    max_crawl: int = 0
    semantic: bool = False


@dataclass(frozen=True)
class FeatureSpec:
    categories: frozenset = frozenset(CATEGORIES)
    include_semantic: bool = False
    history: int = 0
    lbla_only: bool = False
    scope: LinkScope = LinkScope.INTERNAL
    include_pagerank: bool = False
    target_interval: Optional[int] = None

    def __post_init__(self):
        cats = frozenset(c.upper() for c in self.categories)
        if not cats <= set(CATEGORIES):
            raise InvalidArgumentError(f"unknown feature categories {sorted(cats - set(CATEGORIES))}")
        if self.lbla_only:
            cats = frozenset({"DP", "DN"})
        object.__setattr__(self, "categories", cats)
        object.__setattr__(self, "scope", LinkScope.parse(self.scope))
        if self.history < 0:
            raise InvalidArgumentError("history size must be >= 0")

    def resolve_target(self, series: CrawlSeries) -> int:
        T = series.n_intervals - 1 if self.target_interval is None else self.target_interval
        series._check_interval(T)
        if self.history > T:
            raise InvalidArgumentError(
                f"DP/DN history {self.history} exceeds the {T} intervals before the target")
        return T


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    page_ids: np.ndarray
    columns: tuple
    values: np.ndarray
    target_interval: int = -1

    def __post_init__(self):
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise InvalidArgumentError("duplicate feature names")
        if self.values.shape != (len(self.page_ids), len(self.columns)):
            raise InvalidArgumentError("value matrix shape does not match registry")

    @property
    def names(self) -> list:
        return [c.name for c in self.columns]

    @property
    def n_features(self) -> int:
        return len(self.columns)

    def registry_hash(self) -> str:
        return registry_hash(self.columns)

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.names.index(name)]

    def select(self, keep: Sequence[bool]) -> "FeatureMatrix":
        keep = np.asarray(keep, dtype=bool)
        cols = tuple(c for c, k in zip(self.columns, keep) if k)
        return replace(self, columns=cols, values=self.values[:, keep])

    def drop(self, names: Iterable[str]) -> "FeatureMatrix":
        names = set(names)
        return self.select([c.name not in names for c in self.columns])

    def take(self, rows) -> "FeatureMatrix":
        rows = np.asarray(rows)
        return replace(self, page_ids=self.page_ids[rows], values=self.values[rows])

    def with_column(self, column: Column, values) -> "FeatureMatrix":
        values = np.asarray(values, dtype=np.float64).reshape(-1, 1)
        return replace(self, columns=self.columns + (column,),
                       values=np.hstack([self.values, values]))

    def to_text(self) -> str:
        buf = io.StringIO()
        head = [f"{c.name}|{c.category}|{int(c.lbla)}|{c.max_crawl}|{int(c.semantic)}"
                for c in self.columns]
        buf.write(f"# target_interval={self.target_interval}\n")
        buf.write("page\t" + "\t".join(head) + "\n")
        for pid, row in zip(self.page_ids.tolist(), self.values.tolist()):
            buf.write(str(pid) + "\t" + "\t".join(repr(v) for v in row) + "\n")
        return buf.getvalue()

    @classmethod
    def from_text(cls, text: str) -> "FeatureMatrix":
        lines = text.splitlines()
        target = -1
        while lines and lines[0].startswith("#"):
            line = lines.pop(0)
            if line.startswith("# target_interval="):
                target = int(line.split("=", 1)[1])
        if not lines:
            raise MalformedInputError("feature file has no header")
        cols = []
        for cell in lines[0].split("\t")[1:]:
            try:
                name, cat, lbla, max_crawl, sem = cell.split("|")
            except ValueError:
                raise MalformedInputError(f"bad column header {cell!r}") from None
            cols.append(Column(name, cat, lbla == "1", int(max_crawl), sem == "1"))
        ids, rows = [], []
        for line in lines[1:]:
            if not line:
                continue
            cells = line.split("\t")
            ids.append(int(cells[0]))
            rows.append([float(v) for v in cells[1:]])
        values = np.asarray(rows, dtype=np.float64).reshape(len(ids), len(cols))
        return cls(np.asarray(ids, dtype=np.int64), tuple(cols), values, target)


def registry_hash(columns) -> str:
    """Hash of the ordered column names (names are unique and fix the category)."""
    h = hashlib.sha256()
    for c in columns:
        h.update(f"{c.name}\n".encode())
    return h.hexdigest()[:16]


def _graph_arrays(series: CrawlSeries, graph_scores: Optional[dict]) -> dict:
    if graph_scores is not None:
        inl = np.asarray(graph_scores["inlinks"], dtype=np.float64)
        return {"inlinks_int": inl[..., 0], "inlinks_ext": inl[..., 1],
                "pagerank": np.asarray(graph_scores["pagerank"]),
                "trustrank": np.asarray(graph_scores["trustrank"])}
    out = {name: series.field_array(name)
           for name in ("inlinks_int", "inlinks_ext", "pagerank", "trustrank")}
    return out


def assemble(series: CrawlSeries, spec: FeatureSpec, graph_scores: Optional[dict] = None,
             index: Optional[RelatedPagesIndex] = None) -> FeatureMatrix:
    """Build the feature matrix for ``spec`` (one row per page, page-id order)."""
    T = spec.resolve_target(series)
    h = spec.history
    cats = spec.categories
    own = spec.scope.short
    needs_index = "SN" in cats or "DN" in cats
    if needs_index and index is None:
        raise InvalidArgumentError("SN/DN features require a related-pages index")
    if index is not None and index.n_pages != series.n_pages:
        raise InvalidArgumentError("related-pages index does not match the series")

    cols, data = [], []

    def add(name, category, values, max_crawl, lbla=False, semantic=False):
        values = np.asarray(values, dtype=np.float64)
        if np.isnan(values).all():
            raise MissingDataError(f"{category} column {name} is entirely missing")
        cols.append(Column(name, category, lbla, int(max_crawl), semantic))
        data.append(values)

    sp_now = {name: series.field_array(name) for name in ("content_size", "text_size", "text_quality")}
    outl = series.outlink_counts.astype(np.float64)
    sp_now["n_internal_outlinks"] = outl[..., 0]
    sp_now["n_external_outlinks"] = outl[..., 1]
    depths = np.asarray([url_depths(u) for u in series.urls], dtype=np.float64).reshape(-1, 2)
    static = {"url_path_depth": depths[:, 0], "url_domain_depth": depths[:, 1]}

    def sp_value(name, crawl):
        return static[name] if name in static else sp_now[name][crawl]

    counts = series.new_link_counts.astype(np.float64)

    if "SP" in cats:
        for name in SP_SCALARS:
            add(name, "SP", sp_value(name, T), T)
        if spec.include_semantic:
            sem = series.semantic_matrix(T)
            if np.isnan(sem).any():
                raise MissingDataError("SP semantic columns requested but some pages lack vectors")
            for j in range(sem.shape[1]):
                add(f"sem_{j:03d}", "SP", sem[:, j], T, semantic=True)

    graph = None
    if "SN" in cats or "DN" in cats:
        graph = _graph_arrays(series, graph_scores)
        net_names = ["inlinks_int", "inlinks_ext", "trustrank"]
        if spec.include_pagerank:
            net_names.append("pagerank")
        for name in net_names:
            if np.isnan(graph[name][: T + 1]).any():
                raise MissingDataError(f"network field {name} missing; recompute graph scores")

    if "SN" in cats:
        for name in net_names:
            add(name, "SN", graph[name][T], T)
        for name in SP_SCALARS:
            add(f"nb_{name}", "SN", index.weighted(sp_value(name, T)), T)

    if "DP" in cats:
        for lag in range(1, h + 1):
            for scope in SCOPES:
                s = scope.short
                add(f"new_{s}_lag{lag}", "DP", counts[:, T - lag, scope.index], T - lag + 1,
                    lbla=(s == own))
        if h:
            for scope in SCOPES:
                s = scope.short
                add(f"new_{s}_mean", "DP", counts[:, T - h:T, scope.index].mean(axis=1), T,
                    lbla=(s == own))
        for lag in range(1, h + 1):
            for name in SP_DYNAMIC:
                add(f"{name}_lag{lag}", "DP", sp_now[name][T - lag], T - lag)

    if "DN" in cats:
        for lag in range(1, h + 1):
            for name in net_names:
                add(f"{name}_lag{lag}", "DN", graph[name][T - lag], T - lag)
        if T >= 1:
            for scope in SCOPES:
                s = scope.short
                past_lcr = np.count_nonzero(counts[:, :T, scope.index], axis=1) / T
                add(f"nb_lcr_{s}", "DN", index.weighted(past_lcr), T, lbla=(s == own))
        for lag in range(1, h + 1):
            for scope in SCOPES:
                s = scope.short
                add(f"nb_new_{s}_lag{lag}", "DN", index.weighted(counts[:, T - lag, scope.index]),
                    T - lag + 1, lbla=(s == own))
        if h:
            for scope in SCOPES:
                s = scope.short
                mean = counts[:, T - h:T, scope.index].mean(axis=1)
                add(f"nb_new_{s}_mean", "DN", index.weighted(mean), T, lbla=(s == own))

    values = np.column_stack(data) if data else np.empty((series.n_pages, 0))
    matrix = FeatureMatrix(np.arange(series.n_pages), tuple(cols), values, T)
    if spec.lbla_only:
        matrix = matrix.select([c.lbla for c in matrix.columns])
    return matrix


def lbla_subset(matrix: FeatureMatrix, target_kind: str) -> FeatureMatrix:
    """Keep look-back/look-around columns; for LCR only the neighbour ones."""
    keep = np.array([c.lbla for c in matrix.columns], dtype=bool)
    if not keep.any():
        raise InvalidArgumentError("matrix has no LBLA columns (build it with DP and DN)")
    if target_kind.upper() == "LCR":
        keep &= np.array([c.category != "DP" for c in matrix.columns], dtype=bool)
        if not keep.any():
            raise InvalidArgumentError("no neighbour LBLA columns available for an LCR target")
    return matrix.select(keep)


def without_own_link_history(matrix: FeatureMatrix) -> FeatureMatrix:
    """Drop the page's own new-outlink lags/means (they define LCR directly)."""
    return matrix.select([not (c.category == "DP" and c.name.startswith("new_"))
                          for c in matrix.columns])


# --- semantic dimensionality reduction ---------------------------------------

@dataclass(frozen=True, eq=False)
class SemanticReducer:
    """Column clustering: reduced feature ``j`` is the mean of member columns."""

    labels: np.ndarray
    n_clusters: int

    def transform(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.shape[1] != self.labels.size:
            raise InvalidArgumentError("column count differs from the fitted reducer")
        out = np.empty((X.shape[0], self.n_clusters))
        for j in range(self.n_clusters):
            out[:, j] = X[:, self.labels == j].mean(axis=1)
        return out

    def members(self) -> list:
        return [np.flatnonzero(self.labels == j).tolist() for j in range(self.n_clusters)]


def reduce_semantic(train_vectors, n_clusters: int = 20) -> tuple[SemanticReducer, np.ndarray]:
    """Ward agglomerative clustering of standardized columns.

    Clusters are numbered by their lowest member column, so the result is
    independent of the linkage's internal merge order.
    """
    from scipy.cluster.hierarchy import cut_tree, linkage

    X = np.asarray(train_vectors, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] < 1:
        raise InvalidArgumentError("need a 2-d matrix of semantic vectors")
    std = X.std(axis=0)
    informative = int(np.count_nonzero(std > 0))
    n_cols = X.shape[1]
    k = n_clusters
    if informative < k:
        warnings.warn(f"only {informative} informative columns; using that many clusters",
                      stacklevel=2)
        k = max(1, informative)
    k = min(k, n_cols)
    Z = (X - X.mean(axis=0)) / np.where(std > 0, std, 1.0)
    if n_cols == 1:
        raw = np.zeros(1, dtype=np.int64)
    else:
        tree = linkage(Z.T, method="ward", metric="euclidean")
        raw = cut_tree(tree, n_clusters=k).ravel()
    relabel, labels = {}, np.empty(n_cols, dtype=np.int64)
    for j, lab in enumerate(raw):
        labels[j] = relabel.setdefault(lab, len(relabel))
    reducer = SemanticReducer(labels, len(relabel))
    return reducer, reducer.transform(X)


def apply_semantic_reduction(matrix: FeatureMatrix, reducer: SemanticReducer) -> FeatureMatrix:
    """Replace raw ``sem_###`` columns with the reducer's cluster means."""
    sem = np.array([c.semantic for c in matrix.columns], dtype=bool)
    if not sem.any():
        return matrix
    reduced = reducer.transform(matrix.values[:, sem])
    template = matrix.columns[int(np.flatnonzero(sem)[0])]
    base = matrix.select(~sem)
    new_cols = tuple(Column(f"semc_{j:02d}", "SP", False, template.max_crawl, True)
                     for j in range(reducer.n_clusters))
    return replace(base, columns=base.columns + new_cols,
                   values=np.hstack([base.values, reduced]))
