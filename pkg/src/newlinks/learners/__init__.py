from .ensemble import (CLASSIFIERS, KINDS, NGBOOST_DEFAULTS, RANGES, EnsembleModel, HyperParams,
                       balanced_class_weights, change_probability, fit, fit_extra_trees,
                       fit_hist_gb, fit_ngboost_poisson, poisson_fisher, poisson_gradient,
                       poisson_natural_gradient, poisson_nll, predict, predict_proba, raw_score,
                       tree_seed)
from .tuning import Importance, TuningResult, default_scorer, permutation_importance, tune

__all__ = [
    "CLASSIFIERS", "KINDS", "NGBOOST_DEFAULTS", "RANGES", "EnsembleModel", "HyperParams",
    "balanced_class_weights", "change_probability", "fit", "fit_extra_trees", "fit_hist_gb",
    "fit_ngboost_poisson", "poisson_fisher", "poisson_gradient", "poisson_natural_gradient",
    "poisson_nll", "predict", "predict_proba", "raw_score", "tree_seed", "Importance",
    "TuningResult", "default_scorer", "permutation_importance", "tune",
]
