"""Regenerate src/newlinks/fixtures/data/*.json.

Expected values tagged DERIVED are computed here with standalone
brute-force code (standard library and numpy only); nothing is imported
from the package under test.

    python3 scripts/make_fixtures.py
"""
import json
from fractions import Fraction
from pathlib import Path
from urllib.parse import urlsplit

import numpy as np

OUT = Path(__file__).resolve().parents[1] / "src" / "newlinks" / "fixtures" / "data"


def tagged(value, tag, tol=0.0):
    return {"value": value, "tag": tag, "tol": tol}


def dump(name, kind, provenance, inputs, expected):
    doc = {"name": name, "kind": kind, "provenance": provenance, "inputs": inputs,
           "expected": expected}
    (OUT / f"{name}.json").write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")


# --- link classification --------------------------------------------------------

def links():
    src = "https://www.gender-nrw.de/haeusliche-gewalt/"
    pairs = [[src, "https://www.gender-nrw.de/contact/"],
             [src, "https://www.mkffi.nrw/"],
             [src, "http://gender-nrw.de/newsletter"]]
    expected = {"case0": tagged("int", "PAPER"), "case1": tagged("ext", "PAPER"),
                "case2": tagged("ext", "PAPER")}
    dump("gender_nrw_links", "link_classification",
         "worked example of internal/external outlinks on a gender-nrw.de page",
         {"pairs": pairs}, expected)


# --- three-crawl ingestion ------------------------------------------------------

def _norm(u):
    u = u.split("#", 1)[0]
    while u.endswith("/") and not u.endswith("://"):
        u = u[:-1]
    return u


def _internal(a, b):
    sa, sb = urlsplit(a), urlsplit(b)
    return sa.scheme.lower() == sb.scheme.lower() and sa.hostname == sb.hostname


def ingestion():
    vec = [0.6, 0.8]
    A, B, C, D = ("https://a.example.org/x", "https://b.example.net/",
                  "https://c.example.com/p", "https://d.example.org/q")
    links = {
        A: [["https://a.example.org/1", "http://b.example.net/"],
            ["https://a.example.org/1", "https://a.example.org/2", "http://b.example.net/",
             "https://c.example.com/z"],
            ["https://a.example.org/1", "https://a.example.org/2", "http://b.example.net/",
             "https://c.example.com/z", "https://a.example.org/3#frag"]],
        B: [["https://b.example.net/home"], ["https://b.example.net/home/"],
            ["https://b.example.net/home", "https://b.example.net/new"]],
        C: [[], None, []],
        D: [[], [], []],
    }
    digests = {A: ["aa", "aa", "bb"], B: ["01", "02", "03"], C: ["cc", "cc", "cc"],
               D: ["dd", "dd", "dd"]}
    crawls = []
    for c in range(3):
        lines = []
        for url in (A, B, C, D):
            if links[url][c] is None:
                continue
            rec = {"url": url, "fetch_time": f"2021-0{c + 1}-04T12:00:00Z",
                   "out_links": links[url][c], "content_digest": digests[url][c],
                   "content_size": 1000 + c, "text_size": 400, "text_quality": 0.5,
                   "semantic_vector": vec}
            if url == D and c == 2:
                rec["content_size"] = "not-a-number"
            lines.append(json.dumps(rec, sort_keys=True))
        crawls.append(lines)

    kept = [_norm(A), _norm(B)]
    new_int, new_ext, changes, lcr = [], [], [], []
    for url in (A, B):
        sets = [{_norm(u) for u in ls} for ls in links[url]]
        ni, ne = [], []
        for i in range(2):
            fresh = sets[i + 1] - sets[i]
            ni.append(sum(_internal(_norm(url), u) for u in fresh))
            ne.append(sum(not _internal(_norm(url), u) for u in fresh))
        new_int.append(ni)
        new_ext.append(ne)
        changes.append([int(digests[url][i] != digests[url][i + 1]) for i in range(2)])
        lcr.append(sum(n > 0 for n in ni) / 2)
    expected = {
        "pages_read": tagged(4, "DERIVED"),
        "pages_kept": tagged(2, "DERIVED"),
        "pages_discarded_incomplete": tagged(1, "DERIVED"),
        "pages_discarded_invalid": tagged(1, "DERIVED"),
        "kept_urls": tagged(kept, "DERIVED"),
        "new_internal": tagged(new_int, "DERIVED"),
        "new_external": tagged(new_ext, "DERIVED"),
        "content_changes": tagged(changes, "DERIVED"),
        "lcr_int": tagged(lcr, "DERIVED", 1e-12),
    }
    dump("ingestion_3crawl", "ingestion",
         "hand-built: page C misses crawl 2, page D has a malformed record in crawl 3",
         {"crawls": crawls, "require_semantic": True}, expected)


# --- metrics ----------------------------------------------------------------------

def _avg_ranks(v):
    # rank = 1 + #smaller + (#equal - 1) / 2, O(n^2)
    return [1 + sum(w < x for w in v) + (sum(w == x for w in v) - 1) / 2 for x in v]


def _pearson(a, b):
    n = len(a)
    ma, mb = sum(a) / n, sum(b) / n
    cov = sum((x - ma) * (y - mb) for x, y in zip(a, b))
    va = sum((x - ma) ** 2 for x in a)
    vb = sum((y - mb) ** 2 for y in b)
    return cov / (va * vb) ** 0.5


def metrics():
    tp, fp, fn, tn = 40, 10, 20, 130
    p = Fraction(tp, tp + fp)
    r = Fraction(tp, tp + fn)
    f1 = 2 * p * r / (p + r)
    bal = (r + Fraction(tn, tn + fp)) / 2
    a, b = [1, 2, 2, 4], [1, 3, 2, 4]
    rho = _pearson(_avg_ranks(a), _avg_ranks(b))
    y = [1] * 8 + [0] * 92
    mean = Fraction(8, 100)
    ss_tot = sum((Fraction(v) - mean) ** 2 for v in y)
    r2 = 1 - Fraction(sum(y), 1) / ss_tot
    expected = {
        "clf_precision": tagged(float(p), "DERIVED", 1e-12),
        "clf_recall": tagged(float(r), "DERIVED", 1e-12),
        "clf_f1": tagged(float(f1), "DERIVED", 1e-12),
        "clf_balanced_accuracy": tagged(float(bal), "DERIVED", 1e-12),
        "spearman": tagged(rho, "DERIVED", 1e-12),
        "reg_mae": tagged(0.08, "PAPER", 1e-12),
        "reg_medae": tagged(0.0, "PAPER"),
        "reg_r2": tagged(float(r2), "DERIVED", 1e-12),
        "reg_r2_negative": tagged(True, "PAPER"),
    }
    dump("metrics_hand", "metrics",
         "confusion (40,10,20,130); tied Spearman pair; all-zero predictor at 8% positives",
         {"confusion": [tp, fp, fn, tn], "spearman_a": a, "spearman_b": b, "regression_y": y},
         expected)


# --- baselines --------------------------------------------------------------------

def baselines():
    counts4 = {"new_internal": [0, 3, 0, 3, 1], "digests": ["a"] * 6}
    digests = ["d0", "d1", "d1", "d2", "d2", "d2", "d3", "d3", "d4", "d5"]
    digest10 = {"new_internal": [0] * 9, "digests": digests}
    past = range(len(digests) - 2)  # intervals before the last one
    ccr = sum(digests[i] != digests[i + 1] for i in past) / len(past)
    expected = {
        "counts4.NNL-Av": tagged(1.5, "TRIVIAL", 1e-12),
        "counts4.NNL-Pr": tagged(3.0, "TRIVIAL"),
        "counts4.CCR": tagged(0.0, "TRIVIAL"),
        "digests10.CCR": tagged(ccr, "DERIVED", 1e-12),
        "digests10.NNL-Av": tagged(0.0, "TRIVIAL"),
    }
    dump("baselines_hand", "baselines",
         "counts (0,3,0,3) before the target interval; 10 digests with 4 changes in 8 past intervals",
         {"cases": {"counts4": counts4, "digests10": digest10}}, expected)


# --- pagerank ---------------------------------------------------------------------

def _dense_pagerank(n, edges, d):
    P = np.zeros((n, n))
    for s, t in edges:
        P[s, t] += 1.0
    out = P.sum(axis=1)
    P[out > 0] /= out[out > 0, None]
    P[out == 0] = 1.0 / n
    A = np.eye(n) - d * P.T
    return np.linalg.solve(A, np.full(n, (1 - d) / n))


def pagerank():
    three = {"n": 3, "edges": [[0, 1], [1, 2], [2, 0], [0, 2]], "damping": 0.85}
    dangling = {"n": 3, "edges": [[0, 1], [0, 2], [1, 2]], "damping": 0.85}
    cycle = {"n": 2, "edges": [[0, 1], [1, 0]], "damping": 0.85}
    expected = {
        "three": tagged(_dense_pagerank(3, three["edges"], 0.85).tolist(), "DERIVED", 1e-8),
        "dangling": tagged(_dense_pagerank(3, dangling["edges"], 0.85).tolist(), "DERIVED", 1e-8),
        "cycle": tagged([0.5, 0.5], "TRIVIAL", 1e-9),
    }
    dump("pagerank_small", "pagerank", "dense linear solve of the damped random walk",
         {"graphs": {"three": three, "dangling": dangling, "cycle": cycle}}, expected)


if __name__ == "__main__":
    OUT.mkdir(parents=True, exist_ok=True)
    for make in (links, ingestion, metrics, baselines, pagerank):
        make()
    print(f"fixtures written to {OUT}")
