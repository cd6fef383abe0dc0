from fractions import Fraction

import numpy as np

from nidsguard.dataset import LabeledDataset


def make_dataset(X, y, names=None, schema_id="toy"):
    X = np.asarray(X, dtype=float)
    names = names or tuple(f"f{i}" for i in range(X.shape[1]))
    return LabeledDataset(X, np.asarray(y), schema_id, names)


# exhaustive CART reference on exact rationals


def gini_score(ys):
    n = len(ys)
    p = sum(ys)
    return Fraction(p * p + (n - p) * (n - p), n)


def reference_tree(X, y, rows, depth, max_depth, min_leaf):
    ys = [y[i] for i in rows]
    value = Fraction(sum(ys), len(ys))
    if depth >= max_depth or len(rows) < 2 * min_leaf or value in (0, 1):
        return ("leaf", value)
    parent = gini_score(ys)
    best = None
    for f in range(len(X[0])):
        for t in sorted({X[i][f] for i in rows}):
            L = [i for i in rows if X[i][f] <= t]
            R = [i for i in rows if X[i][f] > t]
            if len(L) < min_leaf or len(R) < min_leaf:
                continue
            gain = gini_score([y[i] for i in L]) + gini_score([y[i] for i in R]) - parent
            if best is None or gain > best[0]:
                best = (gain, f, t, L, R)
    if best is None:
        return ("leaf", value)
    _, f, t, L, R = best
    return ("split", f, t, reference_tree(X, y, L, depth + 1, max_depth, min_leaf),
            reference_tree(X, y, R, depth + 1, max_depth, min_leaf))


def reference_predict(node, x):
    while node[0] == "split":
        node = node[3] if x[node[1]] <= node[2] else node[4]
    return node[1]


# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE_LINES: list[str] = []
