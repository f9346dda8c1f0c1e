"""Split protocol, point metrics, ranking metrics and one-feature baselines."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .errors import InvalidArgumentError
from .snapshot import CrawlSeries, LinkScope

METHODS = ("LCR-ET_LBLA", "LCR-ET", "NL-ET_LBLA", "NL-ET", "PNL-ET", "NNL-NGB", "NNL-ET_LBLA",
           "NNL-ET", "NNL-Av", "NNL-Pr", "CCR")
BASELINES = ("NNL-Av", "NNL-Pr", "CCR")


# --- split --------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SplitPlan:
    """Disjoint test (25%), dev (25%) and core-train (50%) page ids.

    Tuning fits on ``train`` and scores on ``dev``; the final model is
    refit on :attr:`train_full` (train and dev together).
    """

    test: np.ndarray
    dev: np.ndarray
    train: np.ndarray
    seed: int

    @property
    def train_full(self) -> np.ndarray:
        return np.sort(np.concatenate([self.train, self.dev]))


def make_split(pages, seed: int) -> SplitPlan:
    ids = np.arange(pages) if np.isscalar(pages) else np.asarray(pages)
    n = ids.size
    if n < 8:
        raise InvalidArgumentError("need at least 8 pages to split")
    perm = np.random.default_rng(seed).permutation(n)
    n_test = int(round(n / 4))
    n_dev = int(round(n / 4))
    return SplitPlan(np.sort(ids[perm[:n_test]]), np.sort(ids[perm[n_test:n_test + n_dev]]),
                     np.sort(ids[perm[n_test + n_dev:]]), seed)


# --- point metrics ------------------------------------------------------------

class RegressionScores(NamedTuple):
    r2: float
    mae: float
    medae: float


class ClassificationScores(NamedTuple):
    precision: float
    recall: float
    f1: float
    balanced_accuracy: float


def _pair(y, yhat):
    y = np.asarray(y, dtype=np.float64).ravel()
    yhat = np.asarray(yhat, dtype=np.float64).ravel()
    if y.size != yhat.size or y.size == 0:
        raise InvalidArgumentError("inputs must be non-empty and of equal length")
    return y, yhat


def regression_scores(y, yhat) -> RegressionScores:
    """R^2 (NaN when ``y`` is constant), MAE and median absolute error."""
    y, yhat = _pair(y, yhat)
    err = np.abs(y - yhat)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = float("nan") if ss_tot == 0.0 else 1.0 - float(np.sum((y - yhat) ** 2)) / ss_tot
    return RegressionScores(r2, float(err.mean()), float(np.median(err)))


def classification_scores(y, yhat) -> ClassificationScores:
    """Precision/recall/F1 of class 1 and balanced accuracy.

    Precision is NaN when nothing is predicted positive (F1 is then 0).
    Balanced accuracy averages the recall of the classes present in ``y``.
    """
    y, yhat = _pair(y, yhat)
    if not (np.isin(y, (0, 1)).all() and np.isin(yhat, (0, 1)).all()):
        raise InvalidArgumentError("labels must be binary 0/1")
    tp = int(np.sum((y == 1) & (yhat == 1)))
    fp = int(np.sum((y == 0) & (yhat == 1)))
    fn = int(np.sum((y == 1) & (yhat == 0)))
    tn = int(np.sum((y == 0) & (yhat == 0)))
    precision = tp / (tp + fp) if tp + fp else float("nan")
    recall = tp / (tp + fn) if tp + fn else float("nan")
    if tp == 0:
        f1 = 0.0
    else:
        f1 = 2 * precision * recall / (precision + recall)
    recalls = []
    if tp + fn:
        recalls.append(tp / (tp + fn))
    if tn + fp:
        recalls.append(tn / (tn + fp))
    return ClassificationScores(precision, recall, f1, float(np.mean(recalls)))


# --- ranking metrics ----------------------------------------------------------

def average_ranks(a) -> np.ndarray:
    """1-based ranks; tied values share the mean of their positions."""
    a = np.asarray(a, dtype=np.float64).ravel()
    order = np.argsort(a, kind="mergesort")
    sorted_a = a[order]
    ranks = np.empty(a.size)
    bounds = np.flatnonzero(np.diff(sorted_a) != 0) + 1
    starts = np.concatenate([[0], bounds])
    ends = np.concatenate([bounds, [a.size]])
    for s, e in zip(starts, ends):
        ranks[order[s:e]] = (s + 1 + e) / 2.0
    return ranks


def spearman_rho(a, b) -> float:
    """Pearson correlation of average ranks; NaN if either input is constant."""
    a, b = _pair(a, b)
    if a.size < 2:
        raise InvalidArgumentError("need at least two observations")
    ra, rb = average_ranks(a), average_ranks(b)
    ra -= ra.mean()
    rb -= rb.mean()
    den = math.sqrt(float(np.dot(ra, ra)) * float(np.dot(rb, rb)))
    if den == 0.0:
        return float("nan")
    return float(np.dot(ra, rb)) / den


@dataclass(frozen=True, eq=False)
class PrecisionCurve:
    """Precision@k% for ``k = 1..100``; ``precision[k-1]`` is a fraction."""

    ks: np.ndarray
    precision: np.ndarray
    area: float

    def at(self, k: int) -> float:
        return float(self.precision[k - 1])


def top_k_sizes(n: int) -> np.ndarray:
    return np.array([max(1, math.ceil(k * n / 100)) for k in range(1, 101)], dtype=np.int64)


def _tie_broken_ranks(scores, rng) -> np.ndarray:
    order = np.lexsort((rng.random(scores.size), -scores))
    ranks = np.empty(scores.size, dtype=np.int64)
    ranks[order] = np.arange(scores.size)
    return ranks


def precision_at_k_curve(truth, predicted, n_realizations: int = 5, seed: int = 0) -> PrecisionCurve:
    """Fraction of the true top-k% found in the predicted top-k%, k = 1..100.

    Ties in both rankings are broken by independent random permutations;
    the curve is averaged over ``n_realizations``. The area is the
    trapezoidal integral over ``k`` divided by its span, so a perfect
    ranking scores 1.
    """
    truth, predicted = _pair(truth, predicted)
    if n_realizations < 1:
        raise InvalidArgumentError("n_realizations must be >= 1")
    n = truth.size
    sizes = top_k_sizes(n)
    rng = np.random.default_rng(seed)
    acc = np.zeros(100)
    for _ in range(n_realizations):
        rt = _tie_broken_ranks(truth, rng)
        rp = _tie_broken_ranks(predicted, rng)
        # item i is in both top-m sets iff max(rt, rp) < m
        hits = np.cumsum(np.bincount(np.maximum(rt, rp), minlength=n))
        acc += hits[sizes - 1] / sizes
    curve = acc / n_realizations
    ks = np.arange(1, 101)
    area = float(np.sum((curve[1:] + curve[:-1]) / 2.0) / (ks[-1] - ks[0]))
    return PrecisionCurve(ks, curve, area)


# --- rankings and baselines ---------------------------------------------------

@dataclass(frozen=True, eq=False)
class RankingResult:
    """Pages ordered by non-increasing score (ties keep page-id order)."""

    method: str
    page_ids: np.ndarray
    scores: np.ndarray
    n_tied: int = 0

    @classmethod
    def from_scores(cls, method: str, page_ids, scores) -> "RankingResult":
        page_ids = np.asarray(page_ids)
        scores = np.asarray(scores, dtype=np.float64)
        if page_ids.shape != scores.shape:
            raise InvalidArgumentError("one score per page is required")
        order = np.lexsort((page_ids, -scores))
        _, counts = np.unique(scores, return_counts=True)
        return cls(method, page_ids[order], scores[order], int(counts[counts > 1].sum()))

    def scores_for(self, page_ids) -> np.ndarray:
        """Scores re-aligned to ``page_ids``."""
        pos = {int(p): i for i, p in enumerate(self.page_ids)}
        try:
            return self.scores[[pos[int(p)] for p in page_ids]]
        except KeyError as exc:
            raise InvalidArgumentError(f"page {exc} missing from ranking {self.method}") from None

    def to_text(self, urls=None) -> str:
        lines = ["rank\tpage\tscore"]
        for r, (p, s) in enumerate(zip(self.page_ids.tolist(), self.scores.tolist()), 1):
            lines.append(f"{r}\t{urls[p] if urls is not None else p}\t{s!r}")
        return "\n".join(lines) + "\n"


def baseline_scores(series: CrawlSeries, scope, kind: str, target_interval: Optional[int] = None,
                    pages=None, include_target_interval: bool = False) -> RankingResult:
    """One-feature baselines over past intervals ``0..T-1``.

    NNL-Av is the mean new-outlink count, NNL-Pr the count in interval
    ``T-1`` and CCR the fraction of intervals whose content digest changed
    (``include_target_interval`` extends CCR through ``T``).
    """
    scope = LinkScope.parse(scope)
    T = series.n_intervals - 1 if target_interval is None else target_interval
    series._check_interval(T)
    pages = np.arange(series.n_pages) if pages is None else np.asarray(pages)
    if T < 1:
        raise InvalidArgumentError(f"{kind} needs at least one past interval")
    counts = series.new_link_counts[pages, :, scope.index].astype(np.float64)
    if kind == "NNL-Av":
        scores = counts[:, :T].mean(axis=1)
    elif kind == "NNL-Pr":
        scores = counts[:, T - 1]
    elif kind == "CCR":
        stop = T + 1 if include_target_interval else T
        scores = series.content_changes[pages, :stop].mean(axis=1)
    else:
        raise InvalidArgumentError(f"unknown baseline {kind!r}")
    return RankingResult.from_scores(kind, pages, scores)


# --- report -------------------------------------------------------------------

@dataclass
class EvaluationReport:
    methods: list
    targets: list
    rho: dict = field(default_factory=dict)
    curves: dict = field(default_factory=dict)

    def area(self, method: str, target: str) -> float:
        return self.curves[(method, target)].area

    def rho_table(self) -> str:
        lines = ["method\ttarget\trho"]
        for m in self.methods:
            for t in self.targets:
                lines.append(f"{m}\t{t}\t{float(self.rho[(m, t)])!r}")
        return "\n".join(lines) + "\n"

    def curve_table(self) -> str:
        lines = ["method\ttarget\tk\tprecision"]
        for m in self.methods:
            for t in self.targets:
                c = self.curves[(m, t)]
                lines += [f"{m}\t{t}\t{k}\t{p!r}" for k, p in zip(c.ks.tolist(), c.precision.tolist())]
        return "\n".join(lines) + "\n"

    def area_table(self) -> str:
        lines = ["method\ttarget\tarea"]
        for m in self.methods:
            for t in self.targets:
                lines.append(f"{m}\t{t}\t{float(self.curves[(m, t)].area)!r}")
        return "\n".join(lines) + "\n"


def evaluate_rankings(results: Sequence[RankingResult], targets: dict, page_ids,
                      n_realizations: int = 5, seed: int = 0) -> EvaluationReport:
    """Spearman rho and Precision@k% of every ranking against every target.

    ``targets`` maps a target name to its true values aligned with
    ``page_ids``; every ranking must cover exactly those pages.
    """
    page_ids = np.asarray(page_ids)
    want = set(page_ids.tolist())
    report = EvaluationReport([r.method for r in results], list(targets))
    for r in results:
        if set(r.page_ids.tolist()) != want or len(r.page_ids) != len(page_ids):
            raise InvalidArgumentError(f"ranking {r.method} covers a different page set")
        pred = r.scores_for(page_ids)
        for name, truth in targets.items():
            truth = np.asarray(truth, dtype=np.float64)
            if truth.size != page_ids.size:
                raise InvalidArgumentError(f"target {name} is not aligned with the pages")
            report.rho[(r.method, name)] = spearman_rho(pred, truth)
            report.curves[(r.method, name)] = precision_at_k_curve(truth, pred, n_realizations, seed)
    return report
