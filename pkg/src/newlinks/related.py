"""Content-related pages: exact cosine top-k neighbours and weighted averages."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError, MissingDataError


@dataclass(frozen=True, eq=False)
class RelatedPagesIndex:
    """Top-k neighbours per page.

    ``neighbors[p]`` lists neighbour page ids sorted by decreasing cosine
    similarity (``similarities[p]``); ``weights[p]`` are the clamped,
    normalized similarities and sum to one.
    """

    neighbors: np.ndarray
    similarities: np.ndarray
    weights: np.ndarray
    reference_crawl: int = 0

    @property
    def k(self) -> int:
        return self.neighbors.shape[1]

    @property
    def n_pages(self) -> int:
        return self.neighbors.shape[0]

    def to_text(self, urls) -> str:
        lines = []
        for p in range(self.n_pages):
            for q, w in zip(self.neighbors[p], self.weights[p]):
                lines.append(f"{urls[p]}\t{urls[q]}\t{w!r}\n")
        return "".join(lines)

    def weighted(self, values) -> np.ndarray:
        """Neighbour-weighted average of a per-page array (last axis = pages)."""
        values = np.asarray(values, dtype=np.float64)
        gathered = values[..., self.neighbors]
        return np.einsum("...pk,pk->...p", gathered, self.weights)


def _weights_from_similarities(sims: np.ndarray) -> np.ndarray:
    w = np.clip(sims, 0.0, None)
    totals = w.sum(axis=1, keepdims=True)
    flat = totals[:, 0] <= 0.0
    w[~flat] /= totals[~flat]
    w[flat] = 1.0 / sims.shape[1]
    return w


def build_index(vectors, k: int = 30, block_size: int = 1024,
                reference_crawl: int = 0) -> RelatedPagesIndex:
    """Exact brute-force cosine top-``k`` over unit-norm row vectors.

    Rows are processed in blocks against the full matrix; within equal
    similarities the lower page id wins, so results do not depend on
    ``block_size``.
    """
    X = np.asarray(vectors, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2:
        raise InvalidArgumentError("need a 2-d array with at least two rows")
    if not np.all(np.isfinite(X)):
        raise MissingDataError("semantic vectors contain missing values")
    n = X.shape[0]
    if k > n - 1:
        warnings.warn(f"k={k} clamped to {n - 1} (only {n} pages)", stacklevel=2)
        k = n - 1
    if k < 1:
        raise InvalidArgumentError("k must be at least 1")
    nbrs = np.empty((n, k), dtype=np.int64)
    sims = np.empty((n, k))
    ids = np.arange(n)
    for start in range(0, n, block_size):
        stop = min(start + block_size, n)
        S = X[start:stop] @ X.T
        S[np.arange(stop - start), ids[start:stop]] = -np.inf
        if k < n - 1:
            part = np.argpartition(-S, k, axis=1)[:, :k + 1]
        else:
            part = np.tile(ids, (stop - start, 1))
        for r in range(stop - start):
            cand = part[r]
            s = S[r, cand]
            # boundary ties: widen to every column equal to the k-th value
            kth = np.sort(s)[::-1][k - 1]
            extra = np.flatnonzero(S[r] == kth)
            cand = np.union1d(cand, extra)
            s = S[r, cand]
            order = np.lexsort((cand, -s))[:k]
            nbrs[start + r] = cand[order]
            sims[start + r] = s[order]
    return RelatedPagesIndex(nbrs, sims, _weights_from_similarities(sims), reference_crawl)


def weighted_average(values, weights) -> float:
    values = np.asarray(values, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    if values.shape != weights.shape or values.ndim != 1 or values.size == 0:
        raise InvalidArgumentError("values and weights must be equal-length, non-empty 1-d")
    if abs(weights.sum() - 1.0) > 1e-9:
        raise InvalidArgumentError("weights must sum to 1")
    return float(np.dot(weights, values))


def neighbor_lcr(index: RelatedPagesIndex, lcr) -> np.ndarray:
    """Similarity-weighted average of the neighbours' link change rates."""
    lcr = np.asarray(lcr, dtype=np.float64)
    if lcr.shape != (index.n_pages,):
        raise InvalidArgumentError("one LCR value per page is required")
    gathered = lcr[index.neighbors]
    if np.isnan(gathered).any():
        raise MissingDataError("link change rate missing for some neighbour")
    return np.einsum("pk,pk->p", gathered, index.weights)
