"""Grid search on a development split and permutation importance."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from ..errors import InvalidArgumentError
from ..features import FeatureMatrix
from .ensemble import HyperParams, fit, poisson_nll, predict

FAMILY_OF = {
    "ExtraTreesRegressor": "extra_trees",
    "ExtraTreesClassifier": "extra_trees",
    "HistGBRegressor": "hist_gb",
    "HistGBClassifier": "hist_gb",
    "NGBoostPoisson": "ngboost",
}


def default_scorer(kind: str) -> Callable:
    """Balanced accuracy for classifiers, R^2 for regressors, -NLL for Poisson."""
    from ..evaluation import classification_scores, regression_scores

    if kind.endswith("Classifier"):
        return lambda y, yhat: classification_scores(y, yhat).balanced_accuracy
    if kind == "NGBoostPoisson":
        return lambda y, mu: -poisson_nll(y, mu)
    return lambda y, yhat: regression_scores(y, yhat).r2


@dataclass(frozen=True)
class TuningResult:
    best: HyperParams
    table: tuple  # (params, score) in grid order


def _grid_points(grid: dict, base: HyperParams):
    if not grid:
        raise InvalidArgumentError("empty tuning grid")
    names = sorted(grid)
    for name in names:
        if not list(grid[name]):
            raise InvalidArgumentError(f"grid axis {name!r} is empty")
    for combo in itertools.product(*(list(grid[n]) for n in names)):
        yield replace(base, **dict(zip(names, combo)))


def tune(kind: str, grid: dict, X_train, y_train, X_dev, y_dev,
         base: HyperParams = HyperParams(), scorer: Optional[Callable] = None,
         enforce_ranges: bool = True) -> TuningResult:
    """Fit every grid point on the training rows, score on the dev rows.

    Ties go to fewer estimators, then to a larger ``min_samples_leaf``.
    """
    scorer = scorer or default_scorer(kind)
    family = FAMILY_OF[kind]
    rows = []
    for params in _grid_points(grid, base):
        if enforce_ranges and params.out_of_range(family):
            raise InvalidArgumentError(
                f"grid point outside tuning ranges: {params.out_of_range(family)}")
        model = fit(kind, X_train, y_train, params)
        score = float(scorer(np.asarray(y_dev, dtype=float), predict(model, X_dev)))
        if np.isnan(score):
            score = -np.inf
        rows.append((params, score))
    best = min(rows, key=lambda r: (-r[1], r[0].n_estimators, -r[0].min_samples_leaf))
    return TuningResult(best[0], tuple(rows))


@dataclass(frozen=True, eq=False)
class Importance:
    names: tuple
    mean: np.ndarray
    std: np.ndarray
    baseline: float

    def ranking(self) -> list:
        """Feature names, most important first (stable on ties)."""
        order = np.argsort(-self.mean, kind="stable")
        return [self.names[i] for i in order]

    def to_text(self, top: Optional[int] = None) -> str:
        order = np.argsort(-self.mean, kind="stable")
        if top is not None:
            order = order[:top]
        lines = ["feature\timportance\tstd"]
        lines += [f"{self.names[i]}\t{float(self.mean[i])!r}\t{float(self.std[i])!r}" for i in order]
        return "\n".join(lines) + "\n"


def permutation_importance(model, X, y, metric: Callable, n_repeats: int = 5, seed: int = 0,
                           predict_fn: Optional[Callable] = None) -> Importance:
    """Score drop when one column is shuffled and all others stay intact.

    ``metric(y, prediction)`` must be higher-is-better; ``predict_fn``
    defaults to :func:`predict` with the model's default output.
    """
    if predict_fn is None:
        predict_fn = lambda M: predict(model, M)  # noqa: E731
    if isinstance(X, FeatureMatrix):
        names, values = tuple(X.names), X.values
    else:
        values = np.asarray(X, dtype=np.float64)
        names = tuple(getattr(model, "feature_names", None) or
                      (f"x{j}" for j in range(values.shape[1])))
    y = np.asarray(y, dtype=np.float64)
    baseline = float(metric(y, predict_fn(values)))
    rng = np.random.default_rng(seed)
    means = np.zeros(values.shape[1])
    stds = np.zeros(values.shape[1])
    work = values.copy()
    for j in range(values.shape[1]):
        scores = []
        for _ in range(n_repeats):
            work[:, j] = values[rng.permutation(values.shape[0]), j]
            scores.append(float(metric(y, predict_fn(work))))
        work[:, j] = values[:, j]
        drops = baseline - np.asarray(scores)
        means[j] = drops.mean()
        stds[j] = drops.std()
    return Importance(names, means, stds, baseline)
