"""The shared classifier contract: spec -> fit -> P(attack), plus JSON artifacts."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from ..dataset import LabeledDataset
from . import linear, mlp, tree

FAMILIES = ("logistic_regression", "linear_svm", "decision_tree", "random_forest", "mlp")
FORMAT_VERSION = 1

DEFAULTS: dict[str, dict[str, Any]] = {
    "logistic_regression": {"lr": 0.1, "l2": 1e-4, "epochs": 300, "batch_size": 128},
    "linear_svm": {"lr": 0.05, "l2": 1e-3, "epochs": 300, "batch_size": 128},
    "decision_tree": {"max_depth": 12, "min_samples_leaf": 5},
    "random_forest": {"n_estimators": 50, "max_features": "sqrt", "bootstrap": True,
                      "max_depth": 12, "min_samples_leaf": 5},
    "mlp": {"hidden": (64, 32), "lr": 0.01, "epochs": 100, "batch_size": 128, "l2": 0.0,
            "bias": True},
}


class ModelError(ValueError):
    pass


def _check_range(family: str, hp: Mapping[str, Any]) -> None:
    def need(cond, msg):
        if not cond:
            raise ModelError(f"{family}: {msg}")

    unknown = set(hp) - set(DEFAULTS[family])
    need(not unknown, f"unknown hyperparameters {sorted(unknown)}")
    if "lr" in hp:
        need(hp["lr"] > 0 and math.isfinite(hp["lr"]), "lr must be positive")
    if "l2" in hp:
        need(hp["l2"] >= 0, "l2 must be non-negative")
    for k in ("epochs", "batch_size", "max_depth", "min_samples_leaf", "n_estimators"):
        if k in hp:
            need(int(hp[k]) == hp[k] and hp[k] >= 1, f"{k} must be a positive integer")
    if "max_features" in hp:
        mf = hp["max_features"]
        need(mf is None or mf == "sqrt" or (isinstance(mf, int) and mf >= 1),
             "max_features must be None, 'sqrt' or a positive integer")
    if "hidden" in hp:
        need(len(hp["hidden"]) >= 1 and all(int(h) == h and h >= 1 for h in hp["hidden"]),
             "hidden must list positive layer widths")


@dataclass(frozen=True)
class ClassifierSpec:
    family: str
    hyperparameters: Mapping[str, Any] = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ModelError(f"unknown family {self.family!r}")
        hp = dict(DEFAULTS[self.family])
        hp.update(self.hyperparameters)
        if "hidden" in hp:
            hp["hidden"] = tuple(int(h) for h in hp["hidden"])
        _check_range(self.family, hp)
        object.__setattr__(self, "hyperparameters", hp)

    def to_dict(self) -> dict:
        hp = dict(self.hyperparameters)
        if "hidden" in hp:
            hp["hidden"] = list(hp["hidden"])
        return {"family": self.family, "hyperparameters": hp, "seed": self.seed}

    @classmethod
    def from_dict(cls, d: Mapping) -> "ClassifierSpec":
        return cls(d["family"], dict(d.get("hyperparameters", {})), int(d.get("seed", 0)))


@dataclass(eq=False)
class TrainedModel:
    spec: ClassifierSpec
    n_features: int
    params: dict
    meta: dict = field(default_factory=dict)
    _packed: Any = field(default=None, repr=False)

    @property
    def family(self) -> str:
        return self.spec.family

    def decision_function(self, X: np.ndarray) -> np.ndarray:
        p = self.params
        return X @ p["w"] + p["b"]

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.n_features:
            raise ModelError(f"model expects {self.n_features} features, got {X.shape[1]}")
        fam = self.family
        if fam == "logistic_regression":
            out = linear.sigmoid(self.decision_function(X))
        elif fam == "linear_svm":
            out = linear.sigmoid(self.params["platt_a"] * self.decision_function(X)
                                 + self.params["platt_c"])
        elif fam == "mlp":
            out = linear.sigmoid(mlp.logits(self.params["W"], self.params["b"], X))
        else:
            if self._packed is None:
                self._packed = tree.PackedForest(self.params["trees"])
            out = self._packed(X)
        return np.clip(out, 0.0, 1.0)

    # -- serialization ---------------------------------------------------
    def to_dict(self) -> dict:
        p = self.params
        fam = self.family
        if fam in ("logistic_regression", "linear_svm"):
            params = {"w": p["w"].tolist(), "b": p["b"]}
            if fam == "linear_svm":
                params.update(platt_a=p["platt_a"], platt_c=p["platt_c"])
        elif fam == "mlp":
            params = {"W": [W.tolist() for W in p["W"]],
                      "b": [None if b is None else b.tolist() for b in p["b"]]}
        else:
            params = {"trees": [t.to_dict() for t in p["trees"]]}
        return {"format_version": FORMAT_VERSION, "spec": self.spec.to_dict(),
                "n_features": self.n_features, "params": params, "meta": self.meta}

    @classmethod
    def from_dict(cls, d: Mapping) -> "TrainedModel":
        if d.get("format_version") != FORMAT_VERSION:
            raise ModelError(f"unsupported model artifact version {d.get('format_version')}")
        spec = ClassifierSpec.from_dict(d["spec"])
        raw = d["params"]
        fam = spec.family
        if fam in ("logistic_regression", "linear_svm"):
            params = {"w": np.array(raw["w"], dtype=np.float64), "b": float(raw["b"])}
            if fam == "linear_svm":
                params.update(platt_a=float(raw["platt_a"]), platt_c=float(raw["platt_c"]))
        elif fam == "mlp":
            params = {"W": [np.array(W, dtype=np.float64).reshape(len(W), -1) for W in raw["W"]],
                      "b": [None if b is None else np.array(b, dtype=np.float64) for b in raw["b"]]}
        else:
            params = {"trees": [tree.TreeArrays.from_dict(t) for t in raw["trees"]]}
        return cls(spec, int(d["n_features"]), params, dict(d.get("meta", {})))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path: str | Path) -> "TrainedModel":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _xy(train):
    if isinstance(train, LabeledDataset):
        return train.features, train.labels.astype(np.float64)
    X, y = train
    return np.asarray(X, dtype=np.float64), np.asarray(y, dtype=np.float64)


def fit(spec: ClassifierSpec, train: LabeledDataset | tuple[np.ndarray, np.ndarray]) -> TrainedModel:
    """Train one classifier. ``train`` is a dataset or an ``(X, y)`` pair."""
    X, y = _xy(train)
    if len(y) == 0:
        raise ModelError("empty training set")
    if np.unique(y).size < 2:
        raise ModelError("training set contains a single class")
    if not np.all(np.isfinite(X)):
        raise ModelError("training features must be finite")
    hp = spec.hyperparameters
    fam = spec.family
    meta: dict[str, Any] = {"seed": spec.seed, "n_rows": len(y)}
    if fam in ("logistic_regression", "linear_svm"):
        lg = linear.logistic_loss_grad if fam == "logistic_regression" else linear.hinge_loss_grad
        with np.errstate(over="ignore", invalid="ignore"):
            # overflow surfaces as DivergenceError instead
            w, b, loss = linear.train_linear(X, y, lg, hp["lr"], hp["l2"], hp["epochs"],
                                             hp["batch_size"], spec.seed)
        params = {"w": w, "b": float(b)}
        if fam == "linear_svm":
            a, c = linear.fit_platt(X @ w + b, y)
            params.update(platt_a=float(a), platt_c=float(c))
        meta.update(epochs=hp["epochs"], final_loss=loss)
    elif fam == "mlp":
        with np.errstate(over="ignore", invalid="ignore"):
            Ws, bs, loss = mlp.train_mlp(X, y, hp["hidden"], hp["lr"], hp["epochs"],
                                         hp["batch_size"], spec.seed, hp["l2"], hp["bias"])
        params = {"W": Ws, "b": bs}
        meta.update(epochs=hp["epochs"], final_loss=loss)
    elif fam == "decision_tree":
        params = {"trees": [tree.grow_tree(X, y, hp["max_depth"], hp["min_samples_leaf"], None,
                                           spec.seed)]}
    else:
        rng = np.random.default_rng(spec.seed)
        k = tree.resolve_max_features(hp["max_features"], X.shape[1])
        trees = []
        for _ in range(hp["n_estimators"]):
            tseed = int(rng.integers(2**31))
            if hp["bootstrap"]:
                rows = rng.integers(0, len(y), size=len(y))
                Xb, yb = X[rows], y[rows]
            else:
                Xb, yb = X, y
            trees.append(tree.grow_tree(Xb, yb, hp["max_depth"], hp["min_samples_leaf"], k, tseed))
        params = {"trees": trees}
    return TrainedModel(spec, X.shape[1], params, meta)


def predict_proba(model: TrainedModel, X: np.ndarray) -> np.ndarray:
    return model.predict_proba(X)


# ---------------------------------------------------------------------------
# gradient verification


def _numeric_check(loss_at, arrays, analytic, pattern_at, h):
    """Central differences over every entry of ``arrays``; entries whose
    perturbation flips a non-smooth indicator (ReLU or hinge) are skipped."""
    worst = 0.0
    for arr, grad in zip(arrays, analytic):
        if arr is None:
            continue
        flat = arr.reshape(-1)
        gflat = grad.reshape(-1)
        for i in range(flat.size):
            old = flat[i]
            flat[i] = old + h
            lp, pp = loss_at(), pattern_at()
            flat[i] = old - h
            lm, pm = loss_at(), pattern_at()
            flat[i] = old
            if not np.array_equal(pp, pm):
                continue
            num = float((lp - lm) / (flat.dtype.type(old + h) - flat.dtype.type(old - h)))
            a = float(gflat[i])
            rel = abs(a - num) / max(abs(a), abs(num), 1e-8)
            worst = max(worst, rel)
    return worst


def gradient_check(spec: ClassifierSpec, X: np.ndarray, y: np.ndarray, h: float = 1e-5,
                   params: Mapping | None = None) -> float:
    """Max relative error between analytic and central-difference loss gradients.

    Parameters are drawn at random from ``spec.seed`` unless given. The
    analytic gradient is the float64 one used in training; the finite
    differences are taken in extended precision so cancellation in the loss
    difference does not swamp small gradient entries. Coordinates whose
    perturbation crosses a ReLU or hinge kink are skipped.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    hp = spec.hyperparameters
    rng = np.random.default_rng(spec.seed)
    fam = spec.family
    ext = np.longdouble
    Xe, ye = X.astype(ext), y.astype(ext)
    if fam in ("logistic_regression", "linear_svm"):
        w = np.array(params["w"], dtype=np.float64) if params else rng.normal(0, 0.5, X.shape[1])
        b = np.array([params["b"] if params else rng.normal(0, 0.5)])
        lg = linear.logistic_loss_grad if fam == "logistic_regression" else linear.hinge_loss_grad
        _, gw, gb = lg(w, b[0], X, y, hp["l2"])
        we, be = w.astype(ext), b.astype(ext)
        loss_at = lambda: lg(we, be[0], Xe, ye, hp["l2"])[0]  # noqa: E731
        if fam == "linear_svm":
            pattern = lambda: linear.hinge_active(we, be[0], Xe, ye)  # noqa: E731
        else:
            pattern = lambda: None  # noqa: E731
        return _numeric_check(loss_at, [we, be], [gw, np.array([gb])], pattern, h)
    if fam == "mlp":
        if params:
            Ws = [np.array(W, dtype=np.float64) for W in params["W"]]
            bs = [None if b is None else np.array(b, dtype=np.float64) for b in params["b"]]
        else:
            Ws, bs = mlp.init_layers([X.shape[1], *hp["hidden"], 1], spec.seed, hp["bias"])
            bs = [None if b is None else rng.normal(0, 0.1, b.shape) for b in bs]
        _, gW, gb = mlp.loss_grad(Ws, bs, X, y, hp["l2"])
        We = [W.astype(ext) for W in Ws]
        bse = [None if b is None else b.astype(ext) for b in bs]
        loss_at = lambda: mlp.loss_grad(We, bse, Xe, ye, hp["l2"])[0]  # noqa: E731

        def pattern():
            return np.concatenate([m.reshape(-1) for m in mlp.forward(We, bse, Xe)[2]])

        arrays = [a for pair in zip(We, bse) for a in pair]
        grads = [g for pair in zip(gW, gb) for g in pair]
        return _numeric_check(loss_at, arrays, grads, pattern, h)
    raise ModelError(f"gradient check is not defined for {fam}")


def analytic_gradients(spec: ClassifierSpec, X: np.ndarray, y: np.ndarray, params: Mapping):
    """Analytic loss gradients at ``params`` (used by tests for exact-zero checks)."""
    hp = spec.hyperparameters
    if spec.family == "mlp":
        _, gW, gb = mlp.loss_grad(list(params["W"]), list(params["b"]), X, y, hp["l2"])
        return gW, gb
    lg = linear.logistic_loss_grad if spec.family == "logistic_regression" else linear.hinge_loss_grad
    _, gw, gb = lg(np.asarray(params["w"], dtype=np.float64), float(params["b"]), X, y, hp["l2"])
    return gw, gb
