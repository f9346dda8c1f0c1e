"""Walk through one synthetic crawl series by hand.

Generates ten weekly crawls, looks at how skewed new-outlink counts are,
builds the related-pages index and the feature matrix, fits a classifier
for the presence of new internal outlinks and prints what it relied on.

    python3 demos/01_synthetic_walkthrough.py
"""
import numpy as np

from newlinks.evaluation import classification_scores, make_split
from newlinks.features import FeatureSpec, assemble, target_vector
from newlinks.ingestion import fill_graph_fields
from newlinks.learners import HyperParams, fit, permutation_importance, predict
from newlinks.related import build_index
from newlinks.snapshot import LinkScope
from newlinks.synthetic import GeneratorConfig, calibration_report, generate

# Ten crawls of 1500 pages; rates are zero-inflated and heavy-tailed.
series, truth = generate(GeneratorConfig(n_pages=1500, seed=7, topic_coupled=True))
print(f"{series.n_pages} pages, {series.n_crawls} crawls, {series.n_intervals} intervals")

# Most pages gain nothing in a given week, a few gain a lot.
print(calibration_report(series).to_text())

# Inlink counts, PageRank and TrustRank are filled in per crawl.
series = fill_graph_fields(series)

# Content-related pages: 30 nearest neighbours by cosine, on the first crawl.
index = build_index(series.semantic_matrix(0), k=30, reference_crawl=0)
print("neighbours of page 0:", index.neighbors[0][:5], "...")

# Static and dynamic features of the page and of its neighbourhood,
# with one past interval of history. The target is the last interval.
matrix = assemble(series, FeatureSpec(history=1), index=index)
y = target_vector(series, "NL", LinkScope.INTERNAL).values
print(f"{matrix.n_features} features; {y.mean():.1%} of pages gain an internal link")

split = make_split(series.n_pages, seed=0)
model = fit("ExtraTreesClassifier", matrix.take(split.train_full), y[split.train_full],
            HyperParams(seed=0))
pred = predict(model, matrix.take(split.test))
print(classification_scores(y[split.test], pred))

# Which columns does the classifier lean on?
bacc = lambda t, p: classification_scores(t, p).balanced_accuracy  # noqa: E731
imp = permutation_importance(model, matrix.take(split.test), y[split.test], bacc, seed=0)
print(imp.to_text(top=10))

# The generator's rates are known, so the ranking can be checked against them.
lam = truth.lambda_int[split.test]
print("mean true rate, predicted yes vs no:",
      np.round([lam[pred == 1].mean(), lam[pred == 0].mean()], 3))
