"""Compiled CART kernels (weighted Gini, greedy, depth-first)."""

import numpy as np
from numba import njit

LEAF = -1
# relative slack when comparing split scores so that numerically tied
# candidates keep the earliest (lowest feature, lowest threshold) one
_TIE_RTOL = 1e-12


@njit(cache=True, nogil=True)
def build_tree(X, y, w, n_classes, max_depth, min_split_weight, min_leaf_weight):
    m, K = X.shape
    cap = 2 * m + 1
    feature = np.full(cap, LEAF, np.int64)
    threshold = np.zeros(cap, np.float64)
    left = np.full(cap, LEAF, np.int64)
    right = np.full(cap, LEAF, np.int64)
    value = np.zeros((cap, n_classes), np.float64)

    idx = np.arange(m)
    buf = np.empty(m, np.int64)
    vals = np.empty(m, np.float64)
    lcount = np.empty(n_classes, np.float64)
    tcount = np.empty(n_classes, np.float64)

    # stack rows: node id, start, end, depth
    stack = np.empty((cap, 4), np.int64)
    top = 0
    stack[0, 0] = 0
    stack[0, 1] = 0
    stack[0, 2] = m
    stack[0, 3] = 0
    top = 1
    n_nodes = 1

    while top > 0:
        top -= 1
        node = stack[top, 0]
        start = stack[top, 1]
        end = stack[top, 2]
        depth = stack[top, 3]

        for c in range(n_classes):
            tcount[c] = 0.0
        for s in range(start, end):
            r = idx[s]
            tcount[y[r]] += w[r]
        total = 0.0
        n_present = 0
        for c in range(n_classes):
            value[node, c] = tcount[c]
            total += tcount[c]
            if tcount[c] > 0:
                n_present += 1

        if n_present <= 1 or total < min_split_weight or (max_depth >= 0 and depth >= max_depth):
            continue

        best_score = -1.0
        best_k = -1
        best_thr = 0.0
        for k in range(K):
            cnt = end - start
            for s in range(cnt):
                vals[s] = X[idx[start + s], k]
            order = np.argsort(vals[:cnt], kind="mergesort")
            for c in range(n_classes):
                lcount[c] = 0.0
            wl = 0.0
            for s in range(cnt - 1):
                r = idx[start + order[s]]
                lcount[y[r]] += w[r]
                wl += w[r]
                a = vals[order[s]]
                b = vals[order[s + 1]]
                if not a < b:
                    continue
                wr = total - wl
                if wl < min_leaf_weight or wr < min_leaf_weight:
                    continue
                sl = 0.0
                sr = 0.0
                for c in range(n_classes):
                    sl += lcount[c] * lcount[c]
                    rc = tcount[c] - lcount[c]
                    sr += rc * rc
                score = sl / wl + sr / wr
                if best_k < 0 or score > best_score + _TIE_RTOL * abs(best_score):
                    best_score = score
                    best_k = k
                    thr = (a + b) / 2.0
                    if thr >= b:
                        thr = a
                    best_thr = thr

        if best_k < 0:
            continue

        nl = 0
        nr = 0
        for s in range(start, end):
            r = idx[s]
            if X[r, best_k] <= best_thr:
                idx[start + nl] = r
                nl += 1
            else:
                buf[nr] = r
                nr += 1
        for s in range(nr):
            idx[start + nl + s] = buf[s]

        lid = n_nodes
        rid = n_nodes + 1
        n_nodes += 2
        feature[node] = best_k
        threshold[node] = best_thr
        left[node] = lid
        right[node] = rid
        # right pushed first so the left subtree is expanded first
        stack[top, 0] = rid
        stack[top, 1] = start + nl
        stack[top, 2] = end
        stack[top, 3] = depth + 1
        top += 1
        stack[top, 0] = lid
        stack[top, 1] = start
        stack[top, 2] = start + nl
        stack[top, 3] = depth + 1
        top += 1

    return (feature[:n_nodes].copy(), threshold[:n_nodes].copy(), left[:n_nodes].copy(),
            right[:n_nodes].copy(), value[:n_nodes].copy())


@njit(cache=True, nogil=True)
def predict_tree(feature, threshold, left, right, leaf_class, X):
    m = X.shape[0]
    out = np.empty(m, np.int64)
    for i in range(m):
        node = 0
        while feature[node] != LEAF:
            if X[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = leaf_class[node]
    return out
