"""Feature metadata, preprocessing and the valid-input projection.

The attack and the defence share one :class:`FeatureSchema`. It says which raw
features an attacker may move, by how much, within which physical bounds, and
which mutable pairs are tied together by a fitted linear relation.
Perturbations are expressed in raw units; the budget is a fraction of each
feature's training range, so a box of half-width ``epsilon`` in min-max scaled
space is the same box here.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .dataset import DatasetError, LabeledDataset

log = logging.getLogger(__name__)

FEATURE_KINDS = ("continuous", "count", "categorical", "flag")


class SchemaError(ValueError):
    pass


@dataclass(frozen=True)
class FeatureSpec:
    name: str
    kind: str
    mutable: bool = False
    lower: float | None = None
    upper: float | None = None
    integral: bool = False
    # observed training range (max - min); the perturbation budget scales with it
    span: float | None = None

    def __post_init__(self):
        if self.kind not in FEATURE_KINDS:
            raise SchemaError(f"{self.name}: unknown kind {self.kind!r}")
        if self.mutable and self.kind in ("categorical", "flag"):
            raise SchemaError(f"{self.name}: {self.kind} features are immutable")


@dataclass(frozen=True)
class CorrelationFit:
    """Least-squares fit ``dependent ~ slope * anchor + intercept``."""

    anchor: int
    dependent: int
    slope: float
    intercept: float
    sigma: float
    r: float


@dataclass(frozen=True)
class EngineeringSpec:
    log1p: tuple[str, ...] = ()
    ratios: tuple[tuple[str, str], ...] = ()
    group_by: str | None = None
    group_zscore: tuple[str, ...] = ()


@dataclass(frozen=True)
class FeatureSchema:
    features: tuple[FeatureSpec, ...]
    epsilon: float = 0.2
    norm_order: float = 2.0
    correlation_groups: tuple[CorrelationFit, ...] = ()
    clamp_width: float = 2.0
    engineering: EngineeringSpec = field(default_factory=EngineeringSpec)
    name: str = ""

    def __post_init__(self):
        if self.epsilon < 0:
            raise SchemaError("epsilon must be non-negative")
        if self.norm_order <= 0:
            raise SchemaError("norm order must be positive")
        D = len(self.features)
        for f in self.features:
            if f.mutable:
                for v in (f.lower, f.upper, f.span):
                    if v is None or not np.isfinite(v):
                        raise SchemaError(f"mutable feature {f.name} needs finite bounds and span")
        for g in self.correlation_groups:
            if not (0 <= g.anchor < D and 0 <= g.dependent < D) or g.anchor == g.dependent:
                raise SchemaError(f"correlation pair ({g.anchor}, {g.dependent}) out of range")
        names = self.names
        eng = self.engineering
        for n in list(eng.log1p) + [c for pair in eng.ratios for c in pair] + list(eng.group_zscore):
            if n not in names:
                raise SchemaError(f"engineered feature references unknown column {n!r}")
        if eng.group_by is not None and eng.group_by not in names:
            raise SchemaError(f"unknown group_by column {eng.group_by!r}")

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(f.name for f in self.features)

    @property
    def n_features(self) -> int:
        return len(self.features)

    def index(self, name: str) -> int:
        return self.names.index(name)

    @property
    def mutable_indices(self) -> np.ndarray:
        return np.array([i for i, f in enumerate(self.features) if f.mutable], dtype=np.intp)

    @property
    def integral_mask(self) -> np.ndarray:
        return np.array([f.integral for f in self.features])

    @property
    def spans(self) -> np.ndarray:
        """Per-feature training range; 1.0 where unknown or zero."""
        s = np.array([f.span if f.span else 1.0 for f in self.features], dtype=np.float64)
        s[~np.isfinite(s) | (s <= 0)] = 1.0
        return s

    def budgets(self) -> np.ndarray:
        """Absolute per-feature perturbation budget, zero on immutable features."""
        b = np.zeros(self.n_features)
        for i, f in enumerate(self.features):
            if f.mutable:
                b[i] = self.epsilon * f.span
        return b

    def box(self, x: np.ndarray, idx: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
        """Permissible interval per feature around ``x``: epsilon box intersected with bounds.

        Bounds are widened to contain ``x`` itself so the original record is
        always valid.
        """
        idx = self.mutable_indices if idx is None else np.asarray(idx)
        x = np.asarray(x, dtype=np.float64)[..., idx]
        b = self.budgets()[idx]
        lower = np.array([self.features[i].lower for i in idx], dtype=np.float64)
        upper = np.array([self.features[i].upper for i in idx], dtype=np.float64)
        lo = np.maximum(x - b, np.minimum(lower, x))
        hi = np.minimum(x + b, np.maximum(upper, x))
        return lo, hi

    def correlation_band(self, fit: CorrelationFit, a_value, x_anchor, x_dependent):
        """Interval allowed for the dependent feature given the anchor's value.

        ``fit(a) +/- clamp_width * sigma``, stretched on one side if the
        original record's own residual lies outside it.
        """
        centre = fit.slope * np.asarray(a_value, dtype=np.float64) + fit.intercept
        resid = np.asarray(x_dependent, dtype=np.float64) - (fit.slope * np.asarray(x_anchor) + fit.intercept)
        w = self.clamp_width * fit.sigma
        lo, hi = centre + np.minimum(-w, resid), centre + np.maximum(w, resid)
        # guard against rounding: an unmoved anchor always admits the original value
        same = np.asarray(a_value) == np.asarray(x_anchor)
        xd = np.asarray(x_dependent, dtype=np.float64)
        return np.where(same, np.minimum(lo, xd), lo), np.where(same, np.maximum(hi, xd), hi)

    def with_correlations(self, groups: Sequence[CorrelationFit]) -> "FeatureSchema":
        return replace(self, correlation_groups=tuple(groups))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["engineering"]["ratios"] = [list(p) for p in self.engineering.ratios]
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "FeatureSchema":
        eng = d.get("engineering") or {}
        return cls(
            features=tuple(FeatureSpec(**f) for f in d["features"]),
            epsilon=float(d.get("epsilon", 0.2)),
            norm_order=float(d.get("norm_order", 2.0)),
            correlation_groups=tuple(CorrelationFit(**g) for g in d.get("correlation_groups", ())),
            clamp_width=float(d.get("clamp_width", 2.0)),
            engineering=EngineeringSpec(
                log1p=tuple(eng.get("log1p", ())),
                ratios=tuple(tuple(p) for p in eng.get("ratios", ())),
                group_by=eng.get("group_by"),
                group_zscore=tuple(eng.get("group_zscore", ())),
            ),
            name=d.get("name", ""),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1))


def load_schema(source: str | Path | Mapping, train: LabeledDataset | None = None) -> FeatureSchema:
    """Read a schema file; ``null`` bounds and spans are filled from ``train``.

    Feature order follows ``train.feature_names`` when given.
    """
    if isinstance(source, Mapping):
        d = dict(source)
    else:
        d = json.loads(Path(source).read_text())
    entries = {f["name"]: dict(f) for f in d["features"]}
    order = list(train.feature_names) if train is not None else [f["name"] for f in d["features"]]
    missing = [n for n in order if n not in entries]
    if missing:
        raise SchemaError(f"schema lacks entries for features {missing}")
    feats = []
    for j, name in enumerate(order):
        e = entries[name]
        if train is not None:
            col = train.features[:, j]
            lo, hi = float(col.min()), float(col.max())
            if e.get("lower") is None and e.get("mutable"):
                e["lower"] = lo
            if e.get("upper") is None and e.get("mutable"):
                e["upper"] = hi
            if e.get("span") is None:
                e["span"] = hi - lo
        feats.append(e)
    d["features"] = feats
    return FeatureSchema.from_dict(d)


def builtin_schema(name: str, train: LabeledDataset | None = None) -> FeatureSchema:
    ref = resources.files("nidsguard.data") / f"{name}.schema.json"
    if not ref.is_file():
        raise SchemaError(f"no shipped schema named {name!r}")
    return load_schema(json.loads(ref.read_text()), train)


# ---------------------------------------------------------------------------
# projection onto the valid-input set


def _round_steps(delta, lo, hi):
    """Round perturbations to whole steps, staying inside [lo, hi] when it holds an integer."""
    c_lo, f_hi = np.ceil(lo), np.floor(hi)
    has_int = c_lo <= f_hi
    r = np.round(np.clip(delta, lo, hi))
    return np.where(has_int, np.clip(r, c_lo, f_hi), r)


def dependent_interval(schema: FeatureSchema, fit: CorrelationFit, a_value, x, box_lo, box_hi):
    """Range of a correlation dependent: its band given the anchor, cut to its box.

    When the band misses the box entirely the dependent is held at the box
    edge nearest the band.
    """
    jlo, jhi = schema.correlation_band(fit, a_value, x[..., fit.anchor], x[..., fit.dependent])
    nlo, nhi = np.maximum(box_lo, jlo), np.minimum(box_hi, jhi)
    below = jhi < box_lo
    above = jlo > box_hi
    nlo = np.where(below, box_lo, np.where(above, box_hi, nlo))
    nhi = np.where(below, box_lo, np.where(above, box_hi, nhi))
    return nlo, nhi


def project_to_valid(x_hat, x, schema: FeatureSchema) -> np.ndarray:
    """Map a perturbed vector (or batch) back into the valid set around ``x``.

    Immutable coordinates are restored from ``x``; mutable ones are clipped to
    the epsilon box and bounds, integral ones move by whole units, and each
    correlation dependent is clamped to the band implied by its anchor.
    """
    x_hat = np.asarray(x_hat, dtype=np.float64)
    x = np.broadcast_to(np.asarray(x, dtype=np.float64), x_hat.shape)
    out = np.array(x, dtype=np.float64)
    mut = schema.mutable_indices
    if len(mut) == 0:
        return out
    lo, hi = schema.box(x, mut)
    v = np.clip(x_hat[..., mut], lo, hi)
    integral = schema.integral_mask[mut]
    if integral.any():
        xm = x[..., mut]
        d = _round_steps(v - xm, lo - xm, hi - xm)
        v = np.where(integral, xm + d, v)
    out[..., mut] = v
    pos = {int(i): k for k, i in enumerate(mut)}
    for g in schema.correlation_groups:
        a, b = g.anchor, g.dependent
        if a not in pos or b not in pos:
            continue
        nlo, nhi = dependent_interval(schema, g, out[..., a], x, lo[..., pos[b]], hi[..., pos[b]])
        vb = np.clip(out[..., b], nlo, nhi)
        if schema.features[b].integral:
            xb = x[..., b]
            vb = xb + _round_steps(vb - xb, nlo - xb, nhi - xb)
        out[..., b] = vb
    return out


def compute_correlation_groups(train: LabeledDataset, schema: FeatureSchema,
                               threshold: float = 0.7) -> FeatureSchema:
    """Fit linear relations between strongly correlated mutable features.

    Pairs are accepted greedily by |r|; a feature is the dependent of at most
    one pair and dependents never serve as anchors, so projection can resolve
    anchors before dependents in one pass.
    """
    if len(train) == 0:
        raise DatasetError("empty training set")
    if not 0 < threshold < 1:
        raise SchemaError("threshold must lie in (0, 1)")
    X = train.features
    mut = [int(i) for i in schema.mutable_indices if np.ptp(X[:, i]) > 0]
    cands = []
    for ii, a in enumerate(mut):
        for b in mut[ii + 1:]:
            r = float(np.corrcoef(X[:, a], X[:, b])[0, 1])
            if np.isfinite(r) and abs(r) >= threshold:
                cands.append((-abs(r), a, b, r))
    cands.sort()
    anchors, dependents, fits = set(), set(), []
    for _, a, b, r in cands:
        if b in dependents or b in anchors or a in dependents:
            continue
        xa, xb = X[:, a], X[:, b]
        slope = float(np.cov(xa, xb, bias=True)[0, 1] / np.var(xa))
        intercept = float(xb.mean() - slope * xa.mean())
        sigma = float(np.std(xb - (slope * xa + intercept)))
        fits.append(CorrelationFit(a, b, slope, intercept, sigma, r))
        anchors.add(a)
        dependents.add(b)
    return schema.with_correlations(fits)


# ---------------------------------------------------------------------------
# engineered features


@dataclass(frozen=True)
class GroupStats:
    group_col: int
    columns: tuple[int, ...]
    # {group code: (means per column, stds per column)}
    per_group: Mapping[float, tuple[tuple[float, ...], tuple[float, ...]]]
    overall: tuple[tuple[float, ...], tuple[float, ...]]


def fit_group_stats(X: np.ndarray, schema: FeatureSchema) -> GroupStats | None:
    eng = schema.engineering
    if eng.group_by is None or not eng.group_zscore:
        return None
    g = schema.index(eng.group_by)
    cols = tuple(schema.index(c) for c in eng.group_zscore)
    L = np.log1p(np.maximum(X[:, cols], 0.0))
    per = {}
    for code in np.unique(X[:, g]):
        m = X[:, g] == code
        per[float(code)] = (tuple(L[m].mean(axis=0).tolist()), tuple(L[m].std(axis=0).tolist()))
    overall = (tuple(L.mean(axis=0).tolist()), tuple(L.std(axis=0).tolist()))
    return GroupStats(g, cols, per, overall)


def engineered_names(schema: FeatureSchema) -> list[str]:
    eng = schema.engineering
    names = [f"log1p_{c}" for c in eng.log1p]
    names += [f"ratio_{a}_{b}" for a, b in eng.ratios]
    if eng.group_by is not None:
        names += [f"groupz_{c}_by_{eng.group_by}" for c in eng.group_zscore]
    return names


def engineered_columns(X: np.ndarray, schema: FeatureSchema, stats: GroupStats | None) -> np.ndarray:
    eng = schema.engineering
    cols = []
    for c in eng.log1p:
        cols.append(np.log1p(np.maximum(X[:, schema.index(c)], 0.0)))
    for a, b in eng.ratios:
        cols.append(X[:, schema.index(a)] / (np.maximum(X[:, schema.index(b)], 0.0) + 1.0))
    if stats is not None:
        L = np.log1p(np.maximum(X[:, list(stats.columns)], 0.0))
        mean = np.tile(np.array(stats.overall[0]), (len(X), 1))
        std = np.tile(np.array(stats.overall[1]), (len(X), 1))
        codes = X[:, stats.group_col]
        for code, (m, s) in stats.per_group.items():
            rows = codes == code
            mean[rows] = m
            std[rows] = s
        safe = np.where(std > 0, std, 1.0)
        z = np.where(std > 0, (L - mean) / safe, 0.0)
        cols.extend(z.T)
    if not cols:
        return np.zeros((len(X), 0))
    return np.column_stack(cols)


def engineer_features(ds: LabeledDataset, schema: FeatureSchema,
                      stats: GroupStats | None = None) -> LabeledDataset:
    """Append log1p, ratio and per-protocol z-score columns.

    Group statistics come from ``stats`` (fitted on training data) or, when
    omitted, from ``ds`` itself.
    """
    if ds.feature_names != schema.names:
        raise SchemaError("dataset columns do not match the schema")
    if stats is None:
        stats = fit_group_stats(ds.features, schema)
    E = engineered_columns(ds.features, schema, stats)
    if not np.all(np.isfinite(E)):
        raise DatasetError("feature engineering produced non-finite values")
    prov = ["engineered" if p == "raw" else p for p in ds.provenance]
    return ds.with_features(np.hstack([ds.features, E]),
                            list(ds.feature_names) + engineered_names(schema), prov)


# ---------------------------------------------------------------------------
# preprocessing


@dataclass(frozen=True)
class PreprocessorState:
    """Everything learned from the training split; ``transform`` is pure given this."""

    schema: FeatureSchema
    scale_cols: tuple[int, ...]
    mins: tuple[float, ...]
    maxs: tuple[float, ...]
    flag_cols: tuple[int, ...]
    onehot: tuple[tuple[int, tuple[float, ...]], ...]
    engineer: bool
    group_stats: GroupStats | None
    eng_mins: tuple[float, ...]
    eng_maxs: tuple[float, ...]
    residual_fits: tuple[CorrelationFit, ...]
    output_names: tuple[str, ...]
    warnings: tuple[str, ...] = ()

    @property
    def n_inputs(self) -> int:
        return self.schema.n_features

    @property
    def n_outputs(self) -> int:
        return len(self.output_names)

    def transform_matrix(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_inputs:
            raise SchemaError(f"expected {self.n_inputs} input columns, got shape {X.shape}")
        blocks = []
        mins, maxs = np.array(self.mins), np.array(self.maxs)
        width = maxs - mins
        S = X[:, list(self.scale_cols)]
        scaled = np.where(width > 0, (S - mins) / np.where(width > 0, width, 1.0), 0.0)
        blocks.append(np.clip(scaled, 0.0, 1.0))
        blocks.append(X[:, list(self.flag_cols)])
        for col, seen in self.onehot:
            codes = X[:, col]
            seen_arr = np.array(seen)
            oh = (codes[:, None] == seen_arr[None, :]).astype(np.float64)
            unseen = (oh.sum(axis=1) == 0).astype(np.float64)
            blocks.append(np.column_stack([oh, unseen]))
        if self.engineer:
            E = engineered_columns(X, self.schema, self.group_stats)
            R = _residual_columns(X, self.residual_fits)
            E = np.hstack([E, R])
            lo, hi = np.array(self.eng_mins), np.array(self.eng_maxs)
            w = hi - lo
            blocks.append(np.clip(np.where(w > 0, (E - lo) / np.where(w > 0, w, 1.0), 0.0), 0.0, 1.0))
        return np.hstack(blocks)

    def to_dict(self) -> dict:
        gs = None
        if self.group_stats is not None:
            gs = {"group_col": self.group_stats.group_col, "columns": list(self.group_stats.columns),
                  "per_group": [[k, list(v[0]), list(v[1])] for k, v in self.group_stats.per_group.items()],
                  "overall": [list(self.group_stats.overall[0]), list(self.group_stats.overall[1])]}
        return {
            "schema": self.schema.to_dict(),
            "scale_cols": list(self.scale_cols), "mins": list(self.mins), "maxs": list(self.maxs),
            "flag_cols": list(self.flag_cols),
            "onehot": [[c, list(s)] for c, s in self.onehot],
            "engineer": self.engineer, "group_stats": gs,
            "eng_mins": list(self.eng_mins), "eng_maxs": list(self.eng_maxs),
            "residual_fits": [asdict(f) for f in self.residual_fits],
            "output_names": list(self.output_names), "warnings": list(self.warnings),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "PreprocessorState":
        gs = d.get("group_stats")
        if gs is not None:
            gs = GroupStats(gs["group_col"], tuple(gs["columns"]),
                            {float(k): (tuple(m), tuple(s)) for k, m, s in gs["per_group"]},
                            (tuple(gs["overall"][0]), tuple(gs["overall"][1])))
        return cls(
            schema=FeatureSchema.from_dict(d["schema"]),
            scale_cols=tuple(d["scale_cols"]), mins=tuple(d["mins"]), maxs=tuple(d["maxs"]),
            flag_cols=tuple(d["flag_cols"]),
            onehot=tuple((c, tuple(s)) for c, s in d["onehot"]),
            engineer=d["engineer"], group_stats=gs,
            eng_mins=tuple(d["eng_mins"]), eng_maxs=tuple(d["eng_maxs"]),
            residual_fits=tuple(CorrelationFit(**f) for f in d["residual_fits"]),
            output_names=tuple(d["output_names"]), warnings=tuple(d.get("warnings", ())),
        )


def _residual_columns(X: np.ndarray, fits: Sequence[CorrelationFit]) -> np.ndarray:
    if not fits:
        return np.zeros((len(X), 0))
    cols = []
    for g in fits:
        resid = X[:, g.dependent] - (g.slope * X[:, g.anchor] + g.intercept)
        cols.append(np.abs(resid) / g.sigma if g.sigma > 0 else (np.abs(resid) > 0).astype(float))
    return np.column_stack(cols)


def fit_preprocessor(train: LabeledDataset, schema: FeatureSchema, engineer: bool = False,
                     correlation_residuals: bool = False) -> PreprocessorState:
    """Learn scaling, one-hot maps and (optionally) engineered-feature statistics.

    With ``engineer`` the engineered columns from the schema are appended and,
    with ``correlation_residuals``, one |residual|/sigma column per
    correlation fit.
    """
    if len(train) == 0:
        raise DatasetError("cannot fit a preprocessor on an empty dataset")
    if train.feature_names != schema.names:
        raise SchemaError("dataset columns do not match the schema")
    X = train.features
    scale_cols, flag_cols, onehot, names, warns = [], [], [], [], []
    mins, maxs = [], []
    for j, f in enumerate(schema.features):
        if f.kind in ("continuous", "count"):
            lo, hi = float(X[:, j].min()), float(X[:, j].max())
            if lo == hi:
                msg = f"feature {f.name} is constant in training data; scaled to 0"
                log.warning(msg)
                warns.append(msg)
            scale_cols.append(j)
            mins.append(lo)
            maxs.append(hi)
    for j, f in enumerate(schema.features):
        if f.kind == "flag":
            flag_cols.append(j)
    for j, f in enumerate(schema.features):
        if f.kind == "categorical":
            onehot.append((j, tuple(float(v) for v in np.unique(X[:, j]))))
    names += [schema.features[j].name for j in scale_cols]
    names += [schema.features[j].name for j in flag_cols]
    for j, seen in onehot:
        f = schema.features[j]
        vocab = train.categories.get(f.name, ())
        for code in seen:
            label = vocab[int(code)] if int(code) < len(vocab) else str(int(code))
            names.append(f"{f.name}={label}")
        names.append(f"{f.name}=<unseen>")

    group_stats, eng_mins, eng_maxs, fits = None, (), (), ()
    if engineer:
        group_stats = fit_group_stats(X, schema)
        fits = tuple(schema.correlation_groups) if correlation_residuals else ()
        E = np.hstack([engineered_columns(X, schema, group_stats), _residual_columns(X, fits)])
        eng_mins = tuple(E.min(axis=0).tolist()) if E.shape[1] else ()
        eng_maxs = tuple(E.max(axis=0).tolist()) if E.shape[1] else ()
        names += engineered_names(schema)
        names += [f"resid_{schema.features[g.dependent].name}_on_{schema.features[g.anchor].name}"
                  for g in fits]
    return PreprocessorState(
        schema=schema, scale_cols=tuple(scale_cols), mins=tuple(mins), maxs=tuple(maxs),
        flag_cols=tuple(flag_cols), onehot=tuple(onehot), engineer=engineer,
        group_stats=group_stats, eng_mins=eng_mins, eng_maxs=eng_maxs, residual_fits=fits,
        output_names=tuple(names), warnings=tuple(warns),
    )


def transform(ds: LabeledDataset, state: PreprocessorState) -> LabeledDataset:
    if ds.n_features != state.n_inputs:
        raise SchemaError(f"dataset has {ds.n_features} columns, preprocessor expects {state.n_inputs}")
    prov = ["engineered" if (p == "raw" and state.engineer) else p for p in ds.provenance]
    return LabeledDataset(state.transform_matrix(ds.features), ds.labels, ds.schema_id,
                          state.output_names, np.array(prov, dtype=object), {})
