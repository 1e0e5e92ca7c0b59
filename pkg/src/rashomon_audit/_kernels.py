"""Compiled tree induction and traversal.

Trees are stored as flat arrays: ``feature[i] < 0`` marks a leaf; ``left`` and
``right`` hold absolute node indices; ``value`` is the class-1 fraction.
"""

import numpy as np
from numba import njit

_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)


@njit(cache=True)
def _splitmix64(state):
    state = state + _GOLDEN
    z = state
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    z = z ^ (z >> np.uint64(31))
    return state, z


@njit(cache=True)
def _choose_features(p, n_sub, state, perm, chosen):
    for j in range(p):
        perm[j] = j
    for j in range(n_sub):
        state, z = _splitmix64(state)
        r = j + np.int64(z % np.uint64(p - j))
        perm[j], perm[r] = perm[r], perm[j]
    for j in range(n_sub):
        chosen[j] = perm[j]
    chosen[:n_sub].sort()
    return state


@njit(cache=True)
def build_tree(X, y, w, order, max_depth, min_leaf, n_sub, seed):
    """Greedy CART (Gini) on the rows listed in ``order``.

    ``order[f]`` lists the participating rows sorted by ``X[:, f]``; it is
    partitioned in place.  ``w`` are integer-valued row weights (bootstrap
    counts).  Split candidates are midpoints between consecutive distinct
    values; the first best candidate in (feature, threshold) order wins.
    """
    p = X.shape[1]
    m = order.shape[1]
    cap = 2 * m + 1
    feature = np.full(cap, -1, dtype=np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    value = np.zeros(cap)

    perm = np.empty(p, dtype=np.int64)
    chosen = np.empty(p, dtype=np.int64)
    goes_left = np.zeros(X.shape[0], dtype=np.bool_)
    buf = np.empty(m, dtype=np.int64)
    state = np.uint64(seed)

    stack = np.empty((cap, 4), dtype=np.int64)  # node, start, end, depth
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

        W = 0.0
        P = 0.0
        for i in range(start, end):
            r = order[0, i]
            W += w[r]
            P += w[r] * y[r]
        value[node] = P / W
        if depth >= max_depth or P == 0.0 or P == W or W < 2 * min_leaf:
            continue

        if n_sub < p:
            state = _choose_features(p, n_sub, state, perm, chosen)
            n_feat = n_sub
        else:
            for j in range(p):
                chosen[j] = j
            n_feat = p

        best = np.inf
        best_f = -1
        best_t = 0.0
        for jj in range(n_feat):
            f = chosen[jj]
            wl = 0.0
            pl = 0.0
            for i in range(start, end - 1):
                r = order[f, i]
                wl += w[r]
                pl += w[r] * y[r]
                v = X[r, f]
                v_next = X[order[f, i + 1], f]
                if v < v_next and wl >= min_leaf and W - wl >= min_leaf:
                    wr = W - wl
                    pr = P - pl
                    score = pl * (wl - pl) / wl + pr * (wr - pr) / wr
                    if score < best:
                        best = score
                        best_f = f
                        t = 0.5 * (v + v_next)
                        if t >= v_next:
                            t = v
                        best_t = t
        if best_f < 0:
            continue

        n_left = 0
        for i in range(start, end):
            r = order[best_f, i]
            goes = X[r, best_f] <= best_t
            goes_left[r] = goes
            if goes:
                n_left += 1
        for f in range(p):
            a = start
            b = 0
            for i in range(start, end):
                r = order[f, i]
                if goes_left[r]:
                    order[f, a] = r
                    a += 1
                else:
                    buf[b] = r
                    b += 1
            for i in range(b):
                order[f, a + i] = buf[i]

        lc = n_nodes
        rc = n_nodes + 1
        n_nodes += 2
        feature[node] = best_f
        threshold[node] = best_t
        left[node] = lc
        right[node] = rc
        mid = start + n_left
        stack[top, 0] = rc
        stack[top, 1] = mid
        stack[top, 2] = end
        stack[top, 3] = depth + 1
        top += 1
        stack[top, 0] = lc
        stack[top, 1] = start
        stack[top, 2] = mid
        stack[top, 3] = depth + 1
        top += 1

    return feature[:n_nodes], threshold[:n_nodes], left[:n_nodes], right[:n_nodes], value[:n_nodes]


@njit(cache=True)
def predict_forest(X, feature, threshold, left, right, value, roots):
    """Mean leaf value over the trees whose roots are listed in ``roots``."""
    n = X.shape[0]
    out = np.zeros(n)
    for t in range(roots.shape[0]):
        root = roots[t]
        for i in range(n):
            node = root
            while feature[node] >= 0:
                if X[i, feature[node]] <= threshold[node]:
                    node = left[node]
                else:
                    node = right[node]
            out[i] += value[node]
    return out / roots.shape[0]
