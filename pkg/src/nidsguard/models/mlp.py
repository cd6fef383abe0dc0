"""Fully connected ReLU network with a sigmoid output, trained with Adam on cross-entropy."""

from __future__ import annotations

import numpy as np

from .linear import DivergenceError, sigmoid


def init_layers(sizes, seed, bias=True):
    """He-normal weights, zero biases. ``sizes`` = [d_in, h1, ..., 1]."""
    rng = np.random.default_rng(seed)
    Ws, bs = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        Ws.append(rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_in, fan_out)))
        bs.append(np.zeros(fan_out) if bias else None)
    return Ws, bs


def forward(Ws, bs, X):
    """Return (output logits, list of layer inputs, list of ReLU masks)."""
    h = X
    inputs, masks = [], []
    for k, (W, b) in enumerate(zip(Ws, bs)):
        inputs.append(h)
        z = h @ W
        if b is not None:
            z = z + b
        if k < len(Ws) - 1:
            m = z > 0
            masks.append(m)
            h = np.where(m, z, 0.0)
        else:
            h = z
    return h[:, 0], inputs, masks


def logits(Ws, bs, X):
    return forward(Ws, bs, X)[0]


def loss_grad(Ws, bs, X, y, l2=0.0):
    """Mean binary cross-entropy (+ ``l2/2`` times squared weights) and its gradients."""
    z, inputs, masks = forward(Ws, bs, X)
    # kept as a numpy scalar so extended-precision inputs stay extended
    loss = np.mean(np.logaddexp(0.0, z) - y * z)
    if l2:
        loss = loss + 0.5 * l2 * sum(np.sum(W * W) for W in Ws)
    delta = ((sigmoid(z) - y) / len(y))[:, None]
    gW = [None] * len(Ws)
    gb = [None] * len(Ws)
    for k in range(len(Ws) - 1, -1, -1):
        gW[k] = inputs[k].T @ delta + l2 * Ws[k]
        if bs[k] is not None:
            gb[k] = delta.sum(axis=0)
        if k > 0:
            delta = (delta @ Ws[k].T) * masks[k - 1]
    return loss, gW, gb


def train_mlp(X, y, hidden, lr, epochs, batch_size, seed, l2=0.0, bias=True):
    sizes = [X.shape[1], *hidden, 1]
    Ws, bs = init_layers(sizes, seed, bias)
    params = [p for pair in zip(Ws, bs) for p in pair if p is not None]
    m1 = [np.zeros_like(p) for p in params]
    m2 = [np.zeros_like(p) for p in params]
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    rng = np.random.default_rng([seed, 1])
    n = len(y)
    t = 0
    loss = float("nan")
    for _ in range(epochs):
        order = rng.permutation(n)
        for s in range(0, n, batch_size):
            idx = order[s:s + batch_size]
            _, gW, gb = loss_grad(Ws, bs, X[idx], y[idx], l2)
            grads = [g for pair in zip(gW, gb) for g in pair if g is not None]
            t += 1
            c1 = 1.0 - beta1 ** t
            c2 = 1.0 - beta2 ** t
            for p, g, a, v in zip(params, grads, m1, m2):
                a *= beta1
                a += (1.0 - beta1) * g
                v *= beta2
                v += (1.0 - beta2) * g * g
                p -= lr * (a / c1) / (np.sqrt(v / c2) + eps)
        loss = float(loss_grad(Ws, bs, X, y, l2)[0])
        if not np.isfinite(loss):
            raise DivergenceError(f"training diverged (non-finite loss) at learning rate {lr}")
    return Ws, bs, loss
