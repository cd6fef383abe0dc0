"""Soft-voting ensembles and the black-box detector the attack queries."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np

from .features import PreprocessorState
from .models import ClassifierSpec, TrainedModel, fit

TC_FAMILIES = ("logistic_regression", "linear_svm", "decision_tree", "random_forest")
DL_HIDDEN = ((64, 32), (128, 64, 32))


class EnsembleError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Ensemble:
    members: tuple[TrainedModel, ...]
    threshold: float = 0.5
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "members", tuple(self.members))
        if not self.members:
            raise EnsembleError("an ensemble needs at least one member")
        dims = {m.n_features for m in self.members}
        if len(dims) != 1:
            raise EnsembleError(f"members disagree on input dimension: {sorted(dims)}")
        if not 0 < self.threshold < 1:
            raise EnsembleError("threshold must lie in (0, 1)")

    @property
    def n_features(self) -> int:
        return self.members[0].n_features

    def save(self, directory: str | Path) -> None:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        files = []
        for i, m in enumerate(self.members):
            fn = f"member_{i}_{m.family}.json"
            m.save(d / fn)
            files.append(fn)
        (d / "ensemble.json").write_text(json.dumps(
            {"name": self.name, "threshold": self.threshold, "combiner": "soft_vote",
             "members": files}, indent=1))

    @classmethod
    def load(cls, directory: str | Path) -> "Ensemble":
        d = Path(directory)
        man = json.loads((d / "ensemble.json").read_text())
        return cls(tuple(TrainedModel.load(d / f) for f in man["members"]),
                   man["threshold"], man.get("name", ""))


def ensemble_proba(e: Ensemble, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != e.n_features:
        raise EnsembleError(f"ensemble expects {e.n_features} features, got {X.shape[1]}")
    return np.mean([m.predict_proba(X) for m in e.members], axis=0)


def classify(e: Ensemble, X: np.ndarray) -> np.ndarray:
    """1 (attack) where the mean attack probability reaches the threshold."""
    return (ensemble_proba(e, X) >= e.threshold).astype(np.int8)


def member_specs(kind: str, overrides: dict | None = None, seed: int = 0) -> list[ClassifierSpec]:
    """Default member specs for the ``"tc"`` or ``"dl"`` ensemble.

    ``overrides`` maps a member key (family name, or ``mlp_0``/``mlp_1``) to
    hyperparameters.
    """
    overrides = overrides or {}
    if kind == "tc":
        return [ClassifierSpec(f, overrides.get(f, {}), seed + i) for i, f in enumerate(TC_FAMILIES)]
    if kind == "dl":
        out = []
        for i, hidden in enumerate(DL_HIDDEN):
            hp = {"hidden": hidden}
            hp.update(overrides.get(f"mlp_{i}", {}))
            out.append(ClassifierSpec("mlp", hp, seed + i))
        return out
    raise EnsembleError(f"unknown ensemble kind {kind!r}")


def member_keys(kind: str) -> list[str]:
    return list(TC_FAMILIES) if kind == "tc" else [f"mlp_{i}" for i in range(len(DL_HIDDEN))]


def build_ensemble(specs: Sequence[ClassifierSpec], X: np.ndarray, y: np.ndarray,
                   name: str = "", threshold: float = 0.5) -> Ensemble:
    return Ensemble(tuple(fit(s, (X, y)) for s in specs), threshold, name)


class Oracle(Protocol):
    """What the attack is allowed to see: scores on raw-unit feature vectors."""

    def ensemble_proba(self, X: np.ndarray) -> np.ndarray: ...

    def classify(self, X: np.ndarray) -> np.ndarray: ...


@dataclass(frozen=True, eq=False)
class Detector:
    """An ensemble behind its input encoding; accepts raw-unit feature vectors.

    ``encoder`` is ``None`` for the unscaled baseline encoding (category codes
    as numbers), otherwise a fitted preprocessor.
    """

    ensemble: Ensemble
    encoder: PreprocessorState | None = None

    def encode(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        return X if self.encoder is None else self.encoder.transform_matrix(X)

    def ensemble_proba(self, X: np.ndarray) -> np.ndarray:
        return ensemble_proba(self.ensemble, self.encode(X))

    def classify(self, X: np.ndarray) -> np.ndarray:
        return (self.ensemble_proba(X) >= self.ensemble.threshold).astype(np.int8)
