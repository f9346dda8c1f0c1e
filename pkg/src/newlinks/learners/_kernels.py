"""Numba kernels for tree growing and ensemble prediction.

Trees are flat arrays: ``feature[i] == -1`` marks a leaf whose output is
``value[i]``; otherwise rows with ``x[feature[i]] <= threshold[i]`` go to
``left[i]`` and the rest to ``right[i]``.
"""
import numpy as np
from numba import njit

LEAF = -1


@njit(cache=True)
def _impurity(w, s, q, task):
    # total (weight-scaled) impurity from sums of w, w*y, w*y^2
    if w <= 0.0:
        return 0.0
    if task == 0:
        v = q - s * s / w
        return v if v > 0.0 else 0.0
    return 2.0 * s * (w - s) / w


@njit(cache=True)
def build_extra_tree(X, y, w, task, max_features, min_samples_leaf, min_samples_split,
                     max_depth, seed):
    """Grow one extremely randomized tree on all rows.

    task 0 = regression (variance), 1 = classification with y in {0, 1}
    (weighted Gini). At each node up to ``max_features`` non-constant
    features are visited in random order, each with one threshold drawn
    uniformly between its node minimum and maximum; the best valid
    candidate wins.
    """
    np.random.seed(seed)
    n, n_feat = X.shape
    cap = 2 * n + 1
    feature = np.full(cap, LEAF, dtype=np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    value = np.zeros(cap)
    idx = np.arange(n)
    perm = np.arange(n_feat)

    st_start = np.empty(cap, dtype=np.int64)
    st_end = np.empty(cap, dtype=np.int64)
    st_node = np.empty(cap, dtype=np.int64)
    st_depth = np.empty(cap, dtype=np.int64)
    top = 0
    st_start[0] = 0
    st_end[0] = n
    st_node[0] = 0
    st_depth[0] = 0
    top = 1
    n_nodes = 1

    while top > 0:
        top -= 1
        start = st_start[top]
        end = st_end[top]
        node = st_node[top]
        depth = st_depth[top]

        W = 0.0
        S = 0.0
        Q = 0.0
        for k in range(start, end):
            i = idx[k]
            W += w[i]
            S += w[i] * y[i]
            Q += w[i] * y[i] * y[i]
        value[node] = S / W if W > 0.0 else 0.0
        parent_imp = _impurity(W, S, Q, task)
        m = end - start
        if (m < min_samples_split or m < 2 * min_samples_leaf or parent_imp <= 1e-12 * (W + 1.0)
                or (max_depth >= 0 and depth >= max_depth)):
            continue

        # Fisher-Yates shuffle of candidate features
        for a in range(n_feat - 1, 0, -1):
            b = np.random.randint(0, a + 1)
            tmp = perm[a]
            perm[a] = perm[b]
            perm[b] = tmp

        best_gain = 0.0
        best_f = -1
        best_thr = 0.0
        visited = 0
        for a in range(n_feat):
            if visited >= max_features:
                break
            f = perm[a]
            lo = X[idx[start], f]
            hi = lo
            for k in range(start + 1, end):
                v = X[idx[k], f]
                if v < lo:
                    lo = v
                elif v > hi:
                    hi = v
            if hi <= lo:
                continue
            visited += 1
            thr = lo + np.random.random() * (hi - lo)
            if thr >= hi:
                thr = lo
            wl = 0.0
            sl = 0.0
            ql = 0.0
            nl = 0
            for k in range(start, end):
                i = idx[k]
                if X[i, f] <= thr:
                    wl += w[i]
                    sl += w[i] * y[i]
                    ql += w[i] * y[i] * y[i]
                    nl += 1
            nr = m - nl
            if nl < min_samples_leaf or nr < min_samples_leaf:
                continue
            gain = parent_imp - _impurity(wl, sl, ql, task) - _impurity(W - wl, S - sl, Q - ql, task)
            if gain > best_gain:
                best_gain = gain
                best_f = f
                best_thr = thr
        if best_f < 0:
            continue

        # partition idx[start:end] in place
        lo_k = start
        hi_k = end - 1
        while lo_k <= hi_k:
            if X[idx[lo_k], best_f] <= best_thr:
                lo_k += 1
            else:
                tmp = idx[lo_k]
                idx[lo_k] = idx[hi_k]
                idx[hi_k] = tmp
                hi_k -= 1
        mid = lo_k
        feature[node] = best_f
        threshold[node] = best_thr
        left[node] = n_nodes
        right[node] = n_nodes + 1
        st_start[top] = mid
        st_end[top] = end
        st_node[top] = n_nodes + 1
        st_depth[top] = depth + 1
        top += 1
        st_start[top] = start
        st_end[top] = mid
        st_node[top] = n_nodes
        st_depth[top] = depth + 1
        top += 1
        n_nodes += 2

    return (feature[:n_nodes].copy(), threshold[:n_nodes].copy(), left[:n_nodes].copy(),
            right[:n_nodes].copy(), value[:n_nodes].copy())


@njit(cache=True)
def build_hist_tree(Xb, n_bins, g, h, min_samples_leaf, max_depth, min_hessian, l2):
    """Grow one second-order regression tree on binned features.

    Split gain is ``GL^2/HL + GR^2/HR - G^2/H``; leaves output ``-G/H``.
    Returns the tree (with bin-index thresholds) and the leaf value of
    every training row.
    """
    n, n_feat = Xb.shape
    max_b = 0
    for f in range(n_feat):
        if n_bins[f] > max_b:
            max_b = n_bins[f]
    cap = 2 * n + 1
    feature = np.full(cap, LEAF, dtype=np.int64)
    bin_thr = np.zeros(cap, dtype=np.int64)
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    value = np.zeros(cap)
    row_value = np.zeros(n)
    idx = np.arange(n)
    hg = np.zeros((n_feat, max_b))
    hh = np.zeros((n_feat, max_b))
    hc = np.zeros((n_feat, max_b), dtype=np.int64)

    st_start = np.empty(cap, dtype=np.int64)
    st_end = np.empty(cap, dtype=np.int64)
    st_node = np.empty(cap, dtype=np.int64)
    st_depth = np.empty(cap, dtype=np.int64)
    st_start[0] = 0
    st_end[0] = n
    st_node[0] = 0
    st_depth[0] = 0
    top = 1
    n_nodes = 1

    while top > 0:
        top -= 1
        start = st_start[top]
        end = st_end[top]
        node = st_node[top]
        depth = st_depth[top]
        G = 0.0
        H = 0.0
        for k in range(start, end):
            G += g[idx[k]]
            H += h[idx[k]]
        leaf = -G / (H + l2) if H + l2 > 0.0 else 0.0
        value[node] = leaf
        m = end - start
        can_split = m >= 2 * min_samples_leaf and H >= 2.0 * min_hessian
        if max_depth >= 0 and depth >= max_depth:
            can_split = False
        best_gain = 1e-12 * (abs(G) + 1.0)
        best_f = -1
        best_b = 0
        if can_split:
            hg[:, :] = 0.0
            hh[:, :] = 0.0
            hc[:, :] = 0
            for k in range(start, end):
                i = idx[k]
                gi = g[i]
                hi = h[i]
                for f in range(n_feat):
                    b = Xb[i, f]
                    hg[f, b] += gi
                    hh[f, b] += hi
                    hc[f, b] += 1
            parent = G * G / (H + l2)
            for f in range(n_feat):
                gl = 0.0
                hl = 0.0
                cl = 0
                for b in range(n_bins[f] - 1):
                    gl += hg[f, b]
                    hl += hh[f, b]
                    cl += hc[f, b]
                    cr = m - cl
                    if cl < min_samples_leaf:
                        continue
                    if cr < min_samples_leaf:
                        break
                    hr = H - hl
                    if hl < min_hessian or hr < min_hessian:
                        continue
                    gr = G - gl
                    gain = gl * gl / (hl + l2) + gr * gr / (hr + l2) - parent
                    if gain > best_gain:
                        best_gain = gain
                        best_f = f
                        best_b = b
        if best_f < 0:
            for k in range(start, end):
                row_value[idx[k]] = leaf
            continue
        lo_k = start
        hi_k = end - 1
        while lo_k <= hi_k:
            if Xb[idx[lo_k], best_f] <= best_b:
                lo_k += 1
            else:
                tmp = idx[lo_k]
                idx[lo_k] = idx[hi_k]
                idx[hi_k] = tmp
                hi_k -= 1
        mid = lo_k
        feature[node] = best_f
        bin_thr[node] = best_b
        left[node] = n_nodes
        right[node] = n_nodes + 1
        st_start[top] = mid
        st_end[top] = end
        st_node[top] = n_nodes + 1
        st_depth[top] = depth + 1
        top += 1
        st_start[top] = start
        st_end[top] = mid
        st_node[top] = n_nodes
        st_depth[top] = depth + 1
        top += 1
        n_nodes += 2

    return (feature[:n_nodes].copy(), bin_thr[:n_nodes].copy(), left[:n_nodes].copy(),
            right[:n_nodes].copy(), value[:n_nodes].copy(), row_value)


@njit(cache=True)
def predict_trees(X, feature, threshold, left, right, value, offsets):
    """Per-tree outputs, shape ``(n_trees, n_rows)``; node ids are tree-local."""
    n = X.shape[0]
    n_trees = offsets.shape[0] - 1
    out = np.empty((n_trees, n))
    for t in range(n_trees):
        base = offsets[t]
        for i in range(n):
            node = 0
            while feature[base + node] != LEAF:
                if X[i, feature[base + node]] <= threshold[base + node]:
                    node = left[base + node]
                else:
                    node = right[base + node]
            out[t, i] = value[base + node]
    return out
