"""Hyperparameter ranges explored during fine-tuning."""

from __future__ import annotations

import numpy as np

from .core import ClassifierSpec

# ("loguniform", lo, hi) | ("int", lo, hi) | ("choice", options)
SEARCH_SPACE = {
    "logistic_regression": {"lr": ("loguniform", 0.01, 0.5), "l2": ("loguniform", 1e-5, 1e-2)},
    "linear_svm": {"lr": ("loguniform", 0.01, 0.5), "l2": ("loguniform", 1e-5, 1e-2)},
    "decision_tree": {"max_depth": ("int", 4, 20)},
    "random_forest": {"n_estimators": ("int", 20, 200)},
    "mlp": {"width": ("choice", (32, 64, 128)), "lr": ("loguniform", 0.001, 0.05)},
}


def _draw(rng: np.random.Generator, dist):
    kind = dist[0]
    if kind == "loguniform":
        return float(np.exp(rng.uniform(np.log(dist[1]), np.log(dist[2]))))
    if kind == "int":
        return int(rng.integers(dist[1], dist[2] + 1))
    return dist[1][int(rng.integers(len(dist[1])))]


def sample_spec(base: ClassifierSpec, rng: np.random.Generator) -> ClassifierSpec:
    """Draw one candidate around ``base``; unsearched hyperparameters are kept.

    For MLPs the first hidden width is drawn and each later layer halves it,
    so the member keeps its depth.
    """
    hp = dict(base.hyperparameters)
    for name, dist in SEARCH_SPACE[base.family].items():
        v = _draw(rng, dist)
        if name == "width":
            hp["hidden"] = tuple(max(1, v >> k) for k in range(len(hp["hidden"])))
        else:
            hp[name] = v
    return ClassifierSpec(base.family, hp, base.seed)


def within_space(spec: ClassifierSpec) -> bool:
    hp = spec.hyperparameters
    for name, dist in SEARCH_SPACE[spec.family].items():
        v = hp["hidden"][0] if name == "width" else hp[name]
        if dist[0] == "choice":
            if v not in dist[1]:
                return False
        elif not dist[1] <= v <= dist[2]:
            return False
    return True
