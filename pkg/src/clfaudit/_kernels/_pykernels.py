"""Pure numpy implementations of the tree kernels.

These are the reference versions; the compiled module mirrors their
signatures and, for ``best_split`` and ``forest_predict``, their exact
floating-point operation order so both backends grow identical forests.
"""
import numpy as np


def best_split(X, y, idx, features, min_leaf):
    """Best Gini split of rows ``idx`` over ``features`` (scanned in the given order).

    Returns ``(feature, threshold, score)`` where ``score`` is the summed
    child impurity ``n_l*G_l + n_r*G_r``; ``feature == -1`` when no split
    honours ``min_leaf``.
    """
    n = idx.shape[0]
    best_f, best_t, best_s = -1, 0.0, np.inf
    if n < 2 * min_leaf:
        return best_f, best_t, best_s
    yy_all = y[idx].astype(np.float64)
    total = float(yy_all.sum())
    nl = np.arange(1, n, dtype=np.float64)
    nr = n - nl
    ok_size = (nl >= min_leaf) & (nr >= min_leaf)
    for f in features:
        vals = X[idx, f]
        order = np.argsort(vals, kind="stable")
        v = vals[order]
        cl = np.cumsum(yy_all[order])[:-1]
        cr = total - cl
        valid = ok_size & (v[1:] > v[:-1])
        if not valid.any():
            continue
        score = 2.0 * cl * (nl - cl) / nl + 2.0 * cr * (nr - cr) / nr
        score = np.where(valid, score, np.inf)
        i = int(np.argmin(score))
        if score[i] < best_s:
            best_s = float(score[i])
            best_f = int(f)
            thr = (v[i] + v[i + 1]) / 2.0
            if thr >= v[i + 1]:
                thr = v[i]
            best_t = float(thr)
    return best_f, best_t, best_s


def forest_predict(feature, threshold, left, right, value, roots, X):
    """Mean leaf value over the trees rooted at ``roots``."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    n = X.shape[0]
    total = np.zeros(n)
    rows = np.arange(n)
    for root in roots:
        node = np.full(n, root, dtype=np.int64)
        active = feature[node] >= 0
        while active.any():
            a = np.flatnonzero(active)
            na = node[a]
            go_left = X[rows[a], feature[na]] <= threshold[na]
            node[a] = np.where(go_left, left[na], right[na])
            active[a] = feature[node[a]] >= 0
        total += value[node]
    return total / len(roots)


def tree_expectations(feature, threshold, left, right, value, cover, roots, ends, X, masks):
    """Path-dependent expected output for each row and coalition mask, averaged over trees.

    A node splitting on a feature inside the coalition follows the row; any
    other split averages both branches weighted by training cover.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    n = X.shape[0]
    out = np.zeros((n, len(masks)))
    for lo, hi in zip(roots, ends):
        span = hi - lo
        for m, mask in enumerate(masks):
            w = np.zeros((span, n))
            w[0] = 1.0
            acc = np.zeros(n)
            for node in range(lo, hi):
                wn = w[node - lo]
                f = feature[node]
                if f < 0:
                    acc += wn * value[node]
                    continue
                l, r = left[node], right[node]
                if (mask >> f) & 1:
                    go = X[:, f] <= threshold[node]
                    w[l - lo] = np.where(go, wn, 0.0)
                    w[r - lo] = np.where(go, 0.0, wn)
                else:
                    w[l - lo] = wn * (cover[l] / cover[node])
                    w[r - lo] = wn * (cover[r] / cover[node])
            out[:, m] += acc
    return out / len(roots)
