"""Logistic regression and linear SVM trained by mini-batch gradient descent."""

from __future__ import annotations

import numpy as np


class DivergenceError(RuntimeError):
    pass


def sigmoid(z):
    return np.exp(-np.logaddexp(0.0, -z))


def logistic_loss_grad(w, b, X, y, l2):
    """Mean log-loss plus ``l2/2 * |w|^2``, with its gradient."""
    z = X @ w + b
    loss = np.mean(np.logaddexp(0.0, z) - y * z) + 0.5 * l2 * (w @ w)
    r = (sigmoid(z) - y) / len(y)
    return loss, X.T @ r + l2 * w, float(r.sum())


def hinge_loss_grad(w, b, X, y, l2):
    """Mean hinge loss on labels mapped to +/-1, plus ``l2/2 * |w|^2``."""
    s = 2.0 * y - 1.0
    m = s * (X @ w + b)
    active = m < 1.0
    loss = np.mean(np.maximum(0.0, 1.0 - m)) + 0.5 * l2 * (w @ w)
    r = np.where(active, -s, 0.0) / len(y)
    return loss, X.T @ r + l2 * w, float(r.sum())


def hinge_active(w, b, X, y):
    return (2.0 * y - 1.0) * (X @ w + b) < 1.0


def train_linear(X, y, loss_grad, lr, l2, epochs, batch_size, seed):
    """Plain mini-batch gradient descent from zero weights; returns (w, b, final loss)."""
    n, d = X.shape
    w = np.zeros(d)
    b = 0.0
    rng = np.random.default_rng(seed)
    loss = float("nan")
    for _ in range(epochs):
        order = rng.permutation(n)
        for s in range(0, n, batch_size):
            idx = order[s:s + batch_size]
            _, gw, gb = loss_grad(w, b, X[idx], y[idx], l2)
            w -= lr * gw
            b -= lr * gb
        loss = float(loss_grad(w, b, X, y, l2)[0])
        if not np.isfinite(loss) or not np.all(np.isfinite(w)):
            raise DivergenceError(f"training diverged (non-finite loss) at learning rate {lr}")
    return w, b, loss


def fit_platt(margins, y, max_iter=100):
    """Fit ``P(attack | m) = sigmoid(a*m + c)`` by Newton's method on smoothed targets.

    Margins are standardised first so the solve is well conditioned whatever
    scale the SVM weights ended up at.
    """
    margins = np.asarray(margins, dtype=np.float64)
    n_pos = float(y.sum())
    n_neg = len(y) - n_pos
    t = np.where(y == 1, (n_pos + 1.0) / (n_pos + 2.0), 1.0 / (n_neg + 2.0))
    mu = float(margins.mean())
    sd = float(margins.std()) or 1.0
    u = (margins - mu) / sd
    a, c = 0.0, float(np.log((n_pos + 1.0) / (n_neg + 1.0)))
    reg = 1e-9

    def nll(a, c):
        z = a * u + c
        return float(np.sum(np.logaddexp(0.0, z) - t * z))

    cur = nll(a, c)
    for _ in range(max_iter):
        p = sigmoid(a * u + c)
        g = np.array([np.sum((p - t) * u), np.sum(p - t)])
        wt = p * (1.0 - p)
        H = np.array([[np.sum(wt * u * u) + reg, np.sum(wt * u)],
                      [np.sum(wt * u), np.sum(wt) + reg]])
        step = np.linalg.solve(H, g)
        scale = 1.0
        while scale > 1e-8:
            trial = nll(a - scale * step[0], c - scale * step[1])
            if trial <= cur:
                break
            scale *= 0.5
        else:
            break
        a, c, cur = a - scale * step[0], c - scale * step[1], trial
        if np.max(np.abs(scale * step)) < 1e-10:
            break
    # fold the standardisation back into the link
    return a / sd, c - a * mu / sd
