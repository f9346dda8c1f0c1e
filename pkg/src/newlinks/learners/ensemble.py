"""Tree-ensemble learners: extremely randomized trees, histogram gradient
boosting, and natural-gradient boosting of a Poisson mean."""
from __future__ import annotations

import base64
import json
import math
import warnings
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np
from scipy.special import expit, gammaln

from ..errors import InvalidArgumentError, SchemaError
from ..features import FeatureMatrix, registry_hash
from . import _kernels
from .binning import apply_bins, fit_bin_edges

FORMAT = "newlinks-model"
FORMAT_VERSION = 1

KINDS = ("ExtraTreesRegressor", "ExtraTreesClassifier", "HistGBRegressor", "HistGBClassifier",
         "NGBoostPoisson")
CLASSIFIERS = ("ExtraTreesClassifier", "HistGBClassifier")

# tuning ranges per family: (low, high)
RANGES = {
    "extra_trees": {"n_estimators": (200, 500), "min_samples_leaf": (2, 25)},
    "hist_gb": {"n_estimators": (200, 500), "min_samples_leaf": (10, 25),
                "learning_rate": (0.02, 0.1)},
}

POISSON_EPS = 1e-9


@dataclass(frozen=True)
class HyperParams:
    n_estimators: int = 200
    min_samples_leaf: int = 2
    learning_rate: float = 0.1
    max_features: Optional[object] = None
    max_depth: Optional[int] = None
    max_bins: int = 255
    seed: int = 0

    def out_of_range(self, family: str) -> list:
        """Names of fields outside the family's tuning ranges."""
        bad = []
        for name, (lo, hi) in RANGES.get(family, {}).items():
            if not lo <= getattr(self, name) <= hi:
                bad.append(name)
        return bad


NGBOOST_DEFAULTS = HyperParams(n_estimators=500, learning_rate=0.02, max_depth=3,
                               min_samples_leaf=1)


@dataclass(frozen=True, eq=False)
class EnsembleModel:
    """A fitted ensemble.

    The raw score of a row is ``init + scale * sum(tree outputs)``. For
    bagged trees ``scale = 1 / n_trees``; for boosters it is the learning
    rate (negated for the Poisson booster, whose trees estimate natural
    gradients of ``log mu``).
    """

    kind: str
    params: HyperParams
    feature_names: tuple
    registry_hash: str
    init: float
    scale: float
    arrays: dict
    class_weights: Optional[tuple] = None
    notes: tuple = ()
    train_loss: tuple = ()

    @property
    def n_trees(self) -> int:
        return len(self.arrays["offsets"]) - 1

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    @property
    def is_classifier(self) -> bool:
        return self.kind in CLASSIFIERS

    def used_features(self) -> np.ndarray:
        f = self.arrays["feature"]
        return np.unique(f[f >= 0])

    # -- serialization ----------------------------------------------------
    def to_bytes(self) -> bytes:
        arrays = {}
        for name in sorted(self.arrays):
            a = np.ascontiguousarray(self.arrays[name])
            arrays[name] = {"dtype": a.dtype.str, "shape": list(a.shape),
                            "data": base64.b64encode(a.tobytes()).decode("ascii")}
        doc = {
            "format": FORMAT,
            "version": FORMAT_VERSION,
            "kind": self.kind,
            "params": asdict(self.params),
            "feature_names": list(self.feature_names),
            "registry_hash": self.registry_hash,
            "init": self.init.hex(),
            "scale": self.scale.hex(),
            "class_weights": None if self.class_weights is None else [w.hex() for w in self.class_weights],
            "notes": list(self.notes),
            "train_loss": [v.hex() for v in self.train_loss],
            "arrays": arrays,
        }
        return (json.dumps(doc, sort_keys=True, indent=1) + "\n").encode("utf-8")

    @classmethod
    def from_bytes(cls, blob: bytes) -> "EnsembleModel":
        doc = json.loads(blob.decode("utf-8"))
        if doc.get("format") != FORMAT:
            raise SchemaError("not a newlinks model file")
        if doc.get("version") != FORMAT_VERSION:
            raise SchemaError(f"unsupported model version {doc.get('version')}")
        arrays = {}
        for name, spec in doc["arrays"].items():
            raw = base64.b64decode(spec["data"])
            arrays[name] = np.frombuffer(raw, dtype=np.dtype(spec["dtype"])).reshape(spec["shape"]).copy()
        cw = doc["class_weights"]
        return cls(
            kind=doc["kind"],
            params=HyperParams(**doc["params"]),
            feature_names=tuple(doc["feature_names"]),
            registry_hash=doc["registry_hash"],
            init=float.fromhex(doc["init"]),
            scale=float.fromhex(doc["scale"]),
            arrays=arrays,
            class_weights=None if cw is None else tuple(float.fromhex(w) for w in cw),
            notes=tuple(doc["notes"]),
            train_loss=tuple(float.fromhex(v) for v in doc["train_loss"]),
        )

    def save(self, path):
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def load(cls, path) -> "EnsembleModel":
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())


# --- helpers ------------------------------------------------------------------

def _as_design(X, feature_names=None):
    if isinstance(X, FeatureMatrix):
        return np.ascontiguousarray(X.values, dtype=np.float64), tuple(X.names), X.registry_hash()
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise InvalidArgumentError("X must be 2-d")
    names = tuple(feature_names) if feature_names is not None else tuple(
        f"x{j}" for j in range(X.shape[1]))
    from ..features import Column
    return X, names, registry_hash([Column(n, "") for n in names])


def tree_seed(master: int, counter: int) -> int:
    """Seed for the ``counter``-th tree derived from the master seed."""
    return int(np.random.SeedSequence([int(master) & 0xFFFFFFFFFFFFFFFF, counter])
               .generate_state(1, np.uint32)[0])


def balanced_class_weights(y) -> tuple:
    """``n / (2 n_c)`` for classes 0 and 1."""
    y = np.asarray(y)
    n = y.size
    n1 = int(np.count_nonzero(y == 1))
    n0 = n - n1
    return (n / (2.0 * n0) if n0 else 0.0, n / (2.0 * n1) if n1 else 0.0)


def _max_features(spec, n_features: int, task: str) -> int:
    if spec is None:
        spec = "sqrt" if task == "classification" else "third"
    if isinstance(spec, str):
        if spec == "sqrt":
            k = int(math.floor(math.sqrt(n_features)))
        elif spec == "third":
            k = n_features // 3
        elif spec == "all":
            k = n_features
        else:
            raise InvalidArgumentError(f"unknown max_features {spec!r}")
    elif isinstance(spec, float):
        k = int(math.floor(spec * n_features))
    else:
        k = int(spec)
    return max(1, min(k, n_features))


def _pack(trees) -> dict:
    offsets = np.zeros(len(trees) + 1, dtype=np.int64)
    for t, tr in enumerate(trees):
        offsets[t + 1] = offsets[t] + len(tr[0])

    def cat(j, dtype):
        if not trees:
            return np.empty(0, dtype=dtype)
        return np.concatenate([tr[j] for tr in trees]).astype(dtype)

    return {"feature": cat(0, np.int64), "threshold": cat(1, np.float64),
            "left": cat(2, np.int64), "right": cat(3, np.int64),
            "value": cat(4, np.float64), "offsets": offsets}


def _check_xy(X, y, min_leaf):
    y = np.asarray(y, dtype=np.float64).ravel()
    if X.shape[0] != y.size:
        raise InvalidArgumentError("X and y have different lengths")
    if X.shape[0] < 2 * min_leaf:
        raise InvalidArgumentError(f"need at least {2 * min_leaf} rows for min_samples_leaf={min_leaf}")
    if not np.all(np.isfinite(X)) or not np.all(np.isfinite(y)):
        raise InvalidArgumentError("X and y must be finite")
    return y


def _constant(kind, params, names, rhash, init, note, class_weights=None):
    warnings.warn(note, stacklevel=3)
    return EnsembleModel(kind, params, names, rhash, float(init), 1.0, _pack([]),
                         class_weights, (note,))


# --- extremely randomized trees ----------------------------------------------

def fit_extra_trees(X, y, params: HyperParams = HyperParams(), task: str = "regression",
                    feature_names=None) -> EnsembleModel:
    """Bagging-free ensemble of extremely randomized trees.

    Every tree sees all rows. Regression splits on variance reduction with
    ``F // 3`` candidate features per node; classification on weighted Gini
    with ``floor(sqrt(F))`` candidates and balanced class weights.
    """
    X, names, rhash = _as_design(X, feature_names)
    y = _check_xy(X, y, params.min_samples_leaf)
    if task not in ("regression", "classification"):
        raise InvalidArgumentError(f"unknown task {task!r}")
    kind = "ExtraTreesRegressor" if task == "regression" else "ExtraTreesClassifier"
    cw = None
    if task == "classification":
        if not np.isin(y, (0.0, 1.0)).all():
            raise InvalidArgumentError("classification labels must be 0 or 1")
        cw = balanced_class_weights(y)
        if y.min() == y.max():
            return _constant(kind, params, names, rhash, y[0], "single class in training labels", cw)
        w = np.where(y == 1.0, cw[1], cw[0])
    else:
        if y.min() == y.max():
            return _constant(kind, params, names, rhash, y[0], "constant regression target")
        w = np.ones_like(y)
    mtry = _max_features(params.max_features, X.shape[1], task)
    max_depth = -1 if params.max_depth is None else int(params.max_depth)
    min_split = max(2, 2 * params.min_samples_leaf)
    trees = []
    for t in range(params.n_estimators):
        trees.append(_kernels.build_extra_tree(
            X, y, w, 0 if task == "regression" else 1, mtry, params.min_samples_leaf,
            min_split, max_depth, tree_seed(params.seed, t)))
    return EnsembleModel(kind, params, names, rhash, 0.0, 1.0 / params.n_estimators,
                         _pack(trees), cw)


# --- histogram gradient boosting ---------------------------------------------

def _real_thresholds(tree, edges):
    feature, bins, left, right, value = tree[:5]
    thr = np.zeros(len(feature))
    for i in np.flatnonzero(feature >= 0):
        thr[i] = edges[feature[i]][bins[i]]
    return feature, thr, left, right, value


def fit_hist_gb(X, y, params: HyperParams = HyperParams(n_estimators=300, min_samples_leaf=20),
                task: str = "regression", feature_names=None) -> EnsembleModel:
    """Gradient boosting of second-order trees on quantile-binned features.

    Regression boosts least squares from the target mean; classification
    boosts the class-weighted logistic loss from the weighted log-odds.
    Trees are grown without depth or leaf-count limits, stopped only by
    ``min_samples_leaf``.
    """
    X, names, rhash = _as_design(X, feature_names)
    y = _check_xy(X, y, params.min_samples_leaf)
    if task not in ("regression", "classification"):
        raise InvalidArgumentError(f"unknown task {task!r}")
    kind = "HistGBRegressor" if task == "regression" else "HistGBClassifier"
    lr = float(params.learning_rate)
    cw = None
    if task == "classification":
        if not np.isin(y, (0.0, 1.0)).all():
            raise InvalidArgumentError("classification labels must be 0 or 1")
        cw = balanced_class_weights(y)
        if y.min() == y.max():
            init = 30.0 if y[0] == 1.0 else -30.0
            return _constant(kind, params, names, rhash, init, "single class in training labels", cw)
        w = np.where(y == 1.0, cw[1], cw[0])
        init = math.log(np.sum(w * y) / np.sum(w * (1.0 - y)))
    else:
        w = np.ones_like(y)
        init = float(np.mean(y))
        if y.min() == y.max():
            return _constant(kind, params, names, rhash, init, "constant regression target")

    edges = fit_bin_edges(X, params.max_bins)
    Xb = apply_bins(X, edges)
    n_bins = np.array([len(e) + 1 for e in edges], dtype=np.int64)
    max_depth = -1 if params.max_depth is None else int(params.max_depth)
    raw = np.full(y.size, init)
    losses = []
    trees = []

    def loss(raw):
        if task == "regression":
            return float(np.mean((y - raw) ** 2))
        p = np.clip(expit(raw), 1e-15, 1 - 1e-15)
        return float(np.sum(-w * (y * np.log(p) + (1 - y) * np.log(1 - p))) / np.sum(w))

    losses.append(loss(raw))
    n_stages = params.n_estimators if lr > 0 else 0
    for _ in range(n_stages):
        if task == "regression":
            g = raw - y
            h = np.ones_like(y)
        else:
            p = expit(raw)
            g = w * (p - y)
            h = np.maximum(w * p * (1.0 - p), 1e-16)
        tree = _kernels.build_hist_tree(Xb, n_bins, g, h, params.min_samples_leaf, max_depth,
                                        1e-3 * (w.mean() if task == "classification" else 1.0), 0.0)
        raw = raw + lr * tree[5]
        losses.append(loss(raw))
        trees.append(_real_thresholds(tree, edges))
    return EnsembleModel(kind, params, names, rhash, float(init), lr, _pack(trees), cw,
                         train_loss=tuple(losses))


# --- natural gradient boosting, Poisson ---------------------------------------

def poisson_gradient(y, mu):
    """Gradient of the Poisson negative log-likelihood w.r.t. ``log mu``."""
    return np.asarray(mu, dtype=np.float64) - np.asarray(y, dtype=np.float64)


def poisson_fisher(mu):
    """Fisher information of ``log mu``."""
    return np.asarray(mu, dtype=np.float64)


def poisson_natural_gradient(y, mu):
    """``(mu - y) / mu``: the ordinary gradient over the Fisher information."""
    return poisson_gradient(y, mu) / poisson_fisher(mu)


def poisson_nll(y, mu) -> float:
    y = np.asarray(y, dtype=np.float64)
    mu = np.asarray(mu, dtype=np.float64)
    return float(np.mean(mu - y * np.log(mu) + gammaln(y + 1.0)))


def fit_ngboost_poisson(X, y, params: HyperParams = NGBOOST_DEFAULTS,
                        feature_names=None) -> EnsembleModel:
    """Boost ``theta = log mu`` of a Poisson outcome with natural gradients.

    Each stage fits a depth-limited tree to the natural gradients
    ``(mu - y) / mu`` by least squares weighted with the Fisher information
    ``mu``, then moves ``theta <- theta - lr * tree(x)``. The weighting
    makes each leaf output the Fisher-scaled step of its rows, so with
    ``lr <= 1`` the training loss never increases and no line search is
    needed.
    """
    X, names, rhash = _as_design(X, feature_names)
    y = _check_xy(X, y, params.min_samples_leaf)
    if (y < 0).any():
        raise InvalidArgumentError("Poisson targets must be non-negative")
    if not np.array_equal(y, np.round(y)):
        raise InvalidArgumentError("Poisson targets must be integers")
    lr = float(params.learning_rate)
    if not 0 < lr <= 1:
        raise InvalidArgumentError("learning rate must lie in (0, 1]")
    init = math.log(float(np.mean(y)) + POISSON_EPS)
    if not y.any():
        return _constant("NGBoostPoisson", params, names, rhash, init,
                         "all-zero counts: epsilon-floored constant rate")
    edges = fit_bin_edges(X, params.max_bins)
    Xb = apply_bins(X, edges)
    n_bins = np.array([len(e) + 1 for e in edges], dtype=np.int64)
    max_depth = -1 if params.max_depth is None else int(params.max_depth)
    theta = np.full(y.size, init)
    losses = [poisson_nll(y, np.exp(theta))]
    trees = []
    for _ in range(params.n_estimators):
        mu = np.exp(theta)
        fisher = poisson_fisher(mu)
        nat = poisson_natural_gradient(y, mu)
        # leaf = -sum(g)/sum(h) = fisher-weighted mean of the natural gradient
        tree = _kernels.build_hist_tree(Xb, n_bins, -fisher * nat, fisher,
                                        params.min_samples_leaf, max_depth, 0.0, 0.0)
        theta = theta - lr * tree[5]
        losses.append(poisson_nll(y, np.exp(theta)))
        trees.append(_real_thresholds(tree, edges))
    return EnsembleModel("NGBoostPoisson", params, names, rhash, init, -lr, _pack(trees),
                         train_loss=tuple(losses))


# --- prediction ---------------------------------------------------------------

def _check_schema(model: EnsembleModel, X):
    if isinstance(X, FeatureMatrix):
        if X.registry_hash() != model.registry_hash:
            raise SchemaError("feature registry differs from the one the model was fit on")
        return np.ascontiguousarray(X.values, dtype=np.float64)
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2:
        X = X.reshape(-1, model.n_features)
    if X.shape[1] != model.n_features:
        raise SchemaError(f"expected {model.n_features} features, got {X.shape[1]}")
    return X


def raw_score(model: EnsembleModel, X) -> np.ndarray:
    X = _check_schema(model, X)
    if X.shape[0] == 0:
        return np.empty(0)
    if model.n_trees == 0:
        return np.full(X.shape[0], model.init)
    a = model.arrays
    per_tree = _kernels.predict_trees(X, a["feature"], a["threshold"], a["left"], a["right"],
                                      a["value"], a["offsets"])
    return model.init + model.scale * per_tree.sum(axis=0)


def predict_proba(model: EnsembleModel, X) -> np.ndarray:
    """``(n, 2)`` class probabilities of a classifier."""
    if not model.is_classifier:
        raise InvalidArgumentError(f"{model.kind} is not a classifier")
    raw = raw_score(model, X)
    p1 = expit(raw) if model.kind == "HistGBClassifier" else np.clip(raw, 0.0, 1.0)
    return np.column_stack([1.0 - p1, p1])


def predict(model: EnsembleModel, X, output: Optional[str] = None) -> np.ndarray:
    """Model output for rows of ``X``.

    ``output`` defaults to ``"value"`` (regressors), ``"label"``
    (classifiers) or ``"mu"`` (Poisson). Classifiers also accept
    ``"proba"`` (probability of class 1); the Poisson model accepts
    ``"change_probability"`` (``1 - exp(-mu)``).
    """
    if output is None:
        output = "label" if model.is_classifier else ("mu" if model.kind == "NGBoostPoisson" else "value")
    if model.is_classifier:
        proba = predict_proba(model, X)
        if output == "proba":
            return proba[:, 1]
        if output == "label":
            return np.argmax(proba, axis=1).astype(np.float64) if len(proba) else np.empty(0)
        raise InvalidArgumentError(f"output {output!r} not available for {model.kind}")
    raw = raw_score(model, X)
    if model.kind == "NGBoostPoisson":
        mu = np.exp(raw)
        if output == "mu":
            return mu
        if output == "change_probability":
            return change_probability(mu)
        raise InvalidArgumentError(f"output {output!r} not available for {model.kind}")
    if output != "value":
        raise InvalidArgumentError(f"output {output!r} not available for {model.kind}")
    return raw


def change_probability(mu) -> np.ndarray:
    return -np.expm1(-np.asarray(mu, dtype=np.float64))


def fit(kind: str, X, y, params: HyperParams, feature_names=None) -> EnsembleModel:
    """Dispatch by model kind."""
    if kind == "ExtraTreesRegressor":
        return fit_extra_trees(X, y, params, "regression", feature_names)
    if kind == "ExtraTreesClassifier":
        return fit_extra_trees(X, y, params, "classification", feature_names)
    if kind == "HistGBRegressor":
        return fit_hist_gb(X, y, params, "regression", feature_names)
    if kind == "HistGBClassifier":
        return fit_hist_gb(X, y, params, "classification", feature_names)
    if kind == "NGBoostPoisson":
        return fit_ngboost_poisson(X, y, params, feature_names)
    raise InvalidArgumentError(f"unknown model kind {kind!r}")
