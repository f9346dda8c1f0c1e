"""Per-snapshot link graph: inlink counts, PageRank and TrustRank."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import ConvergenceError, InvalidArgumentError
from .snapshot import CrawlSeries, LinkScope, classify_link


@dataclass(frozen=True, eq=False)
class SnapshotGraph:
    """Directed graph of in-series links at one crawl.

    ``internal[e]`` tells whether edge ``src[e] -> dst[e]`` is an internal
    link. Links leaving the series are only counted in ``out_of_series``.
    """

    n_nodes: int
    src: np.ndarray
    dst: np.ndarray
    internal: np.ndarray
    out_of_series: np.ndarray

    @property
    def n_edges(self) -> int:
        return len(self.src)

    def out_degree(self) -> np.ndarray:
        return np.bincount(self.src, minlength=self.n_nodes)


@dataclass(frozen=True, eq=False)
class ScoreVector:
    scores: np.ndarray
    damping: float
    iterations: int
    residual: float

    def to_text(self, urls) -> str:
        return "".join(f"{u}\t{s!r}\n" for u, s in zip(urls, self.scores.tolist()))


def build_graph(series: CrawlSeries, crawl: int) -> SnapshotGraph:
    if not 0 <= crawl < series.n_crawls:
        raise InvalidArgumentError(f"crawl index {crawl} outside 0..{series.n_crawls - 1}")
    index = series.url_index
    src, dst, internal = [], [], []
    outside = np.zeros(series.n_pages, dtype=np.int64)
    for p, snap in enumerate(series.snapshots[crawl]):
        # sorted so edge order (and thus float summation order) is reproducible
        for url in sorted(snap.outlinks):
            q = index.get(url)
            if q is None:
                outside[p] += 1
                continue
            src.append(p)
            dst.append(q)
            internal.append(classify_link(snap.url, url) is LinkScope.INTERNAL)
    return SnapshotGraph(
        n_nodes=series.n_pages,
        src=np.asarray(src, dtype=np.int64),
        dst=np.asarray(dst, dtype=np.int64),
        internal=np.asarray(internal, dtype=bool),
        out_of_series=outside,
    )


def _random_walk(graph, restart, damping, tol, max_iter):
    n = graph.n_nodes
    deg = graph.out_degree()
    weights = 1.0 / deg[graph.src] if graph.n_edges else np.empty(0)
    # column-stochastic transpose: (M @ x)[q] = sum over edges p->q of x[p] / deg[p]
    M = sp.csr_matrix((weights, (graph.dst, graph.src)), shape=(n, n))
    dangling = deg == 0
    x = restart.copy()
    residual = np.inf
    for it in range(1, max_iter + 1):
        x_new = damping * (M @ x + x[dangling].sum() * restart) + (1.0 - damping) * restart
        residual = float(np.abs(x_new - x).sum())
        x = x_new
        if residual < tol:
            return ScoreVector(x / x.sum(), damping, it, residual)
    raise ConvergenceError(
        f"random walk did not converge in {max_iter} iterations (residual {residual:.3e})",
        residual=residual, iterations=max_iter)


def pagerank(graph: SnapshotGraph, damping: float = 0.85, tol: float = 1e-10,
             max_iter: int = 200) -> ScoreVector:
    """Power iteration with uniform restart; dangling mass goes to the restart vector."""
    if graph.n_nodes == 0:
        raise InvalidArgumentError("pagerank of an empty graph")
    if not 0.0 <= damping < 1.0:
        raise InvalidArgumentError("damping must lie in [0, 1)")
    restart = np.full(graph.n_nodes, 1.0 / graph.n_nodes)
    return _random_walk(graph, restart, damping, tol, max_iter)


def trustrank(graph: SnapshotGraph, trusted, damping: float = 0.85, tol: float = 1e-10,
              max_iter: int = 200) -> ScoreVector:
    """PageRank whose walk restarts uniformly over the ``trusted`` node ids only."""
    trusted = np.unique(np.asarray(list(trusted), dtype=np.int64))
    if trusted.size == 0:
        raise InvalidArgumentError("trusted set is empty")
    if trusted.min() < 0 or trusted.max() >= graph.n_nodes:
        raise InvalidArgumentError("trusted node id out of range")
    if not 0.0 <= damping < 1.0:
        raise InvalidArgumentError("damping must lie in [0, 1)")
    restart = np.zeros(graph.n_nodes)
    restart[trusted] = 1.0 / trusted.size
    return _random_walk(graph, restart, damping, tol, max_iter)


def inlink_counts(graph: SnapshotGraph) -> np.ndarray:
    """``(n_nodes, 2)`` counts of internal and external in-edges."""
    out = np.zeros((graph.n_nodes, 2), dtype=np.int64)
    out[:, 0] = np.bincount(graph.dst[graph.internal], minlength=graph.n_nodes)
    out[:, 1] = np.bincount(graph.dst[~graph.internal], minlength=graph.n_nodes)
    return out


def default_trusted(graph: SnapshotGraph, fraction: float = 0.01) -> np.ndarray:
    """Top ``fraction`` of pages by internal inlinks (at least one page)."""
    counts = inlink_counts(graph)[:, 0]
    k = max(1, int(round(fraction * graph.n_nodes)))
    order = np.lexsort((np.arange(graph.n_nodes), -counts))
    return np.sort(order[:k])


def series_graph_scores(series: CrawlSeries, trusted=None, damping: float = 0.85) -> dict:
    """Inlink counts, PageRank and TrustRank for every crawl of ``series``.

    Returns arrays ``inlinks`` ``(n_crawls, n_pages, 2)``, ``pagerank`` and
    ``trustrank`` ``(n_crawls, n_pages)``. Without an explicit ``trusted``
    set, each crawl uses :func:`default_trusted`.
    """
    n_c, n_p = series.n_crawls, series.n_pages
    inl = np.zeros((n_c, n_p, 2), dtype=np.int64)
    pr = np.zeros((n_c, n_p))
    tr = np.zeros((n_c, n_p))
    for c in range(n_c):
        g = build_graph(series, c)
        inl[c] = inlink_counts(g)
        pr[c] = pagerank(g, damping).scores
        seeds = default_trusted(g) if trusted is None else trusted
        tr[c] = trustrank(g, seeds, damping).scores
    return {"inlinks": inl, "pagerank": pr, "trustrank": tr}
