"""CART decision trees (Gini) and bagged random forests.

Splits test ``x[f] <= t`` where ``t`` is the largest training value on the left
side, so predictions are unchanged by any strictly increasing transform of a
feature applied at both train and test time. Leaves store the fraction of
attack rows that reached them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

LEAF = -1


@numba.njit(cache=True)
def _build(X, y, max_depth, min_leaf, max_features, seed):
    np.random.seed(seed)
    n, d = X.shape
    cap = 2 * n + 1
    feat = np.full(cap, -1, np.int64)
    thr = np.zeros(cap)
    left = np.full(cap, LEAF, np.int64)
    right = np.full(cap, LEAF, np.int64)
    value = np.zeros(cap)
    count = np.zeros(cap, np.int64)

    order = np.arange(n)
    feats = np.arange(d)
    # stack entries: node id, start, end, depth
    st_node = np.empty(cap, np.int64)
    st_start = np.empty(cap, np.int64)
    st_end = np.empty(cap, np.int64)
    st_depth = np.empty(cap, np.int64)
    sp = 0
    st_node[0], st_start[0], st_end[0], st_depth[0] = 0, 0, n, 0
    sp = 1
    n_nodes = 1
    while sp > 0:
        sp -= 1
        node, start, end, depth = st_node[sp], st_start[sp], st_end[sp], st_depth[sp]
        m = end - start
        pos = 0.0
        for i in range(start, end):
            pos += y[order[i]]
        value[node] = pos / m
        count[node] = m
        if depth >= max_depth or m < 2 * min_leaf or pos == 0.0 or pos == m:
            continue
        neg = m - pos
        parent = (pos * pos + neg * neg) / m
        k = d
        if max_features < d:
            k = max_features
            for j in range(k):
                r = j + int(np.random.random() * (d - j))
                if r >= d:
                    r = d - 1
                tmp = feats[j]
                feats[j] = feats[r]
                feats[r] = tmp
        else:
            for j in range(d):
                feats[j] = j
        best_gain = -1.0
        tol = 1e-12 * m
        best_f = -1
        best_t = 0.0
        vals = np.empty(m)
        ys = np.empty(m)
        for jj in range(k):
            f = feats[jj]
            for i in range(m):
                vals[i] = X[order[start + i], f]
            srt = np.argsort(vals, kind="mergesort")
            for i in range(m):
                ys[i] = y[order[start + srt[i]]]
            lpos = 0.0
            for i in range(m - 1):
                lpos += ys[i]
                ln = i + 1
                rn = m - ln
                if ln < min_leaf:
                    continue
                if rn < min_leaf:
                    break
                v0 = vals[srt[i]]
                if v0 == vals[srt[i + 1]]:
                    continue
                lneg = ln - lpos
                rpos = pos - lpos
                rneg = rn - rpos
                score = (lpos * lpos + lneg * lneg) / ln + (rpos * rpos + rneg * rneg) / rn
                gain = score - parent
                if gain > best_gain + tol:
                    best_gain = gain
                    best_f = f
                    best_t = v0
        if best_f < 0:
            continue
        # partition order[start:end] so rows with x <= t come first
        i, j = start, end - 1
        while i <= j:
            if X[order[i], best_f] <= best_t:
                i += 1
            else:
                tmp = order[i]
                order[i] = order[j]
                order[j] = tmp
                j -= 1
        mid = i
        feat[node] = best_f
        thr[node] = best_t
        lc, rc = n_nodes, n_nodes + 1
        n_nodes += 2
        left[node], right[node] = lc, rc
        st_node[sp], st_start[sp], st_end[sp], st_depth[sp] = rc, mid, end, depth + 1
        sp += 1
        st_node[sp], st_start[sp], st_end[sp], st_depth[sp] = lc, start, mid, depth + 1
        sp += 1
    return (feat[:n_nodes].copy(), thr[:n_nodes].copy(), left[:n_nodes].copy(),
            right[:n_nodes].copy(), value[:n_nodes].copy(), count[:n_nodes].copy())


@numba.njit(cache=True, nogil=True)
def _predict(X, feat, thr, left, right, value, roots):
    n = X.shape[0]
    out = np.zeros(n)
    n_trees = roots.shape[0]
    for r in range(n):
        acc = 0.0
        for t in range(n_trees):
            node = roots[t]
            while left[node] != LEAF:
                if X[r, feat[node]] <= thr[node]:
                    node = left[node]
                else:
                    node = right[node]
            acc += value[node]
        out[r] = acc / n_trees
    return out


@dataclass(frozen=True, eq=False)
class TreeArrays:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    n_samples: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def depth(self) -> int:
        depth = np.zeros(self.n_nodes, dtype=int)
        for i in range(self.n_nodes):
            if self.left[i] != LEAF:
                depth[self.left[i]] = depth[self.right[i]] = depth[i] + 1
        return int(depth.max())

    def to_dict(self) -> dict:
        return {k: getattr(self, k).tolist() for k in
                ("feature", "threshold", "left", "right", "value", "n_samples")}

    @classmethod
    def from_dict(cls, d) -> "TreeArrays":
        ints = ("feature", "left", "right", "n_samples")
        return cls(**{k: np.array(d[k], dtype=np.int64 if k in ints else np.float64)
                      for k in ("feature", "threshold", "left", "right", "value", "n_samples")})


def grow_tree(X: np.ndarray, y: np.ndarray, max_depth: int = 12, min_samples_leaf: int = 5,
              max_features: int | None = None, seed: int = 0) -> TreeArrays:
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    d = X.shape[1]
    k = d if max_features is None else int(max_features)
    arrays = _build(X, y, int(max_depth), int(min_samples_leaf), k, int(seed) % (2**32))
    return TreeArrays(*arrays)


def resolve_max_features(spec, d: int) -> int | None:
    if spec is None:
        return None
    if spec == "sqrt":
        return max(1, int(math.sqrt(d)))
    return max(1, min(d, int(spec)))


class PackedForest:
    """Trees concatenated into flat arrays for repeated scoring."""

    def __init__(self, trees: list[TreeArrays]):
        offsets = np.cumsum([0] + [t.n_nodes for t in trees[:-1]]).astype(np.int64)

        def shifted(name):
            return np.concatenate([np.where(getattr(t, name) == LEAF, LEAF, getattr(t, name) + o)
                                   for t, o in zip(trees, offsets)]).astype(np.int64)

        self.feat = np.concatenate([t.feature for t in trees]).astype(np.int64)
        self.thr = np.concatenate([t.threshold for t in trees])
        self.left = shifted("left")
        self.right = shifted("right")
        self.value = np.concatenate([t.value for t in trees])
        self.roots = offsets

    def __call__(self, X: np.ndarray) -> np.ndarray:
        return _predict(np.ascontiguousarray(X, dtype=np.float64), self.feat, self.thr,
                        self.left, self.right, self.value, self.roots)
