"""Quantile pre-binning for the histogram boosters."""
import numpy as np

from ..errors import InvalidArgumentError

MAX_BINS = 255


def fit_bin_edges(X, max_bins: int = MAX_BINS) -> list:
    """Per-feature sorted cut points; a value ``x`` falls in bin ``#edges < x``.

    Features with at most ``max_bins`` distinct values get one bin per value
    (cuts at midpoints); others get quantile cuts.
    """
    X = np.asarray(X, dtype=np.float64)
    if not 2 <= max_bins <= MAX_BINS:
        raise InvalidArgumentError(f"max_bins must lie in [2, {MAX_BINS}]")
    if not np.all(np.isfinite(X)):
        raise InvalidArgumentError("features must be finite")
    edges = []
    for col in X.T:
        distinct = np.unique(col)
        if distinct.size <= max_bins:
            cuts = (distinct[:-1] + distinct[1:]) / 2.0
        else:
            qs = np.quantile(col, np.linspace(0.0, 1.0, max_bins + 1)[1:-1])
            cuts = np.unique(qs)
            # cut at the max would leave an empty right bin
            cuts = cuts[cuts < distinct[-1]]
        edges.append(cuts)
    return edges


def apply_bins(X, edges) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    out = np.empty(X.shape, dtype=np.uint8)
    for j, cuts in enumerate(edges):
        out[:, j] = np.searchsorted(cuts, X[:, j], side="left")
    return out
