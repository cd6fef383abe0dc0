"""Record-file ingestion for NSL-KDD and UNSW-NB15.

Raw CSV rows are parsed under a JSON manifest into a :class:`LabeledDataset`
with binary labels (0 = benign, 1 = attack). Categorical cells are stored as
integer category indices into a per-column vocabulary so that train and test
files loaded with the same vocabulary share one encoding.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

COLUMN_KINDS = ("numeric", "categorical", "binary", "label", "drop")
PROVENANCE_TAGS = ("raw", "engineered", "synthetic", "adversarial")


class DatasetError(ValueError):
    """Raised for malformed record files or inconsistent datasets."""


@dataclass(frozen=True)
class RawRecord:
    values: tuple[str, ...]
    line_no: int


@dataclass(frozen=True)
class ColumnSpec:
    name: str
    kind: str

    def __post_init__(self):
        if self.kind not in COLUMN_KINDS:
            raise DatasetError(f"column {self.name!r}: unknown kind {self.kind!r}")


@dataclass(frozen=True)
class DatasetManifest:
    name: str
    columns: tuple[ColumnSpec, ...]
    label_map: Mapping[str, int]
    header: bool = False
    description: str = ""

    def __post_init__(self):
        n_labels = sum(c.kind == "label" for c in self.columns)
        if n_labels != 1:
            raise DatasetError(f"manifest {self.name!r} needs exactly one label column, found {n_labels}")
        bad = {k: v for k, v in self.label_map.items() if v not in (0, 1)}
        if bad:
            raise DatasetError(f"label_map values must be 0 or 1: {bad}")

    @property
    def n_columns(self) -> int:
        return len(self.columns)

    @property
    def label_index(self) -> int:
        return next(i for i, c in enumerate(self.columns) if c.kind == "label")

    @property
    def feature_columns(self) -> list[ColumnSpec]:
        return [c for c in self.columns if c.kind not in ("label", "drop")]

    @classmethod
    def from_dict(cls, d: Mapping) -> "DatasetManifest":
        return cls(
            name=d["name"],
            columns=tuple(ColumnSpec(c["name"], c["kind"]) for c in d["columns"]),
            label_map=dict(d["label_map"]),
            header=bool(d.get("header", False)),
            description=d.get("description", ""),
        )

    @classmethod
    def load(cls, path: str | Path) -> "DatasetManifest":
        with open(path) as f:
            return cls.from_dict(json.load(f))


def builtin_manifest(name: str) -> DatasetManifest:
    """Load one of the shipped manifests: ``nsl_kdd``, ``unsw_nb15`` or ``unsw_nb15_full``."""
    ref = resources.files("nidsguard.data") / f"{name}.manifest.json"
    if not ref.is_file():
        raise DatasetError(f"no shipped manifest named {name!r}")
    return DatasetManifest.from_dict(json.loads(ref.read_text()))


@dataclass(frozen=True, eq=False)
class LabeledDataset:
    """Feature matrix + binary labels + per-row provenance tags.

    ``categories`` maps a feature name to its vocabulary; the feature column
    holds indices into that tuple.
    """

    features: np.ndarray
    labels: np.ndarray
    schema_id: str
    feature_names: tuple[str, ...]
    provenance: np.ndarray = None
    categories: Mapping[str, tuple[str, ...]] = field(default_factory=dict)

    def __post_init__(self):
        X = np.array(self.features, dtype=np.float64)
        if X.ndim == 1 and X.size == 0:
            X = X.reshape(0, len(self.feature_names))
        if X.ndim != 2:
            raise DatasetError("features must be a 2-D matrix")
        y = np.asarray(self.labels, dtype=np.int8).reshape(-1)
        if len(y) != len(X):
            raise DatasetError(f"{len(X)} feature rows but {len(y)} labels")
        if X.shape[1] != len(self.feature_names):
            raise DatasetError(f"{X.shape[1]} feature columns but {len(self.feature_names)} names")
        if not np.all(np.isfinite(X)):
            raise DatasetError("features contain NaN or inf")
        if not np.all((y == 0) | (y == 1)):
            raise DatasetError("labels must be 0 or 1")
        prov = self.provenance
        if prov is None:
            prov = np.full(len(y), "raw", dtype=object)
        prov = np.asarray(prov, dtype=object).reshape(-1)
        if len(prov) != len(y):
            raise DatasetError("provenance length differs from row count")
        unknown = set(prov.tolist()) - set(PROVENANCE_TAGS)
        if unknown:
            raise DatasetError(f"unknown provenance tags {sorted(unknown)}")
        X.setflags(write=False)
        y.setflags(write=False)
        prov.setflags(write=False)
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)
        object.__setattr__(self, "provenance", prov)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        object.__setattr__(self, "categories", dict(self.categories))

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def class_counts(self) -> tuple[int, int]:
        n_attack = int(self.labels.sum())
        return len(self.labels) - n_attack, n_attack

    def take(self, rows: Sequence[int] | np.ndarray) -> "LabeledDataset":
        rows = np.asarray(rows)
        return LabeledDataset(self.features[rows], self.labels[rows], self.schema_id,
                              self.feature_names, self.provenance[rows], self.categories)

    def with_features(self, X: np.ndarray, feature_names: Sequence[str] | None = None,
                      provenance: Iterable[str] | None = None) -> "LabeledDataset":
        names = self.feature_names if feature_names is None else tuple(feature_names)
        prov = self.provenance if provenance is None else np.asarray(list(provenance), dtype=object)
        cats = {k: v for k, v in self.categories.items() if k in names}
        return LabeledDataset(X, self.labels, self.schema_id, names, prov, cats)

    def concat(self, *others: "LabeledDataset") -> "LabeledDataset":
        for o in others:
            if o.feature_names != self.feature_names:
                raise DatasetError("cannot concatenate datasets with different feature columns")
        parts = (self,) + others
        return LabeledDataset(
            np.vstack([p.features for p in parts]),
            np.concatenate([p.labels for p in parts]),
            self.schema_id,
            self.feature_names,
            np.concatenate([p.provenance for p in parts]),
            self.categories,
        )


def binarize_labels(raw_labels: Sequence[str], manifest: DatasetManifest) -> list[int]:
    missing = sorted({s for s in raw_labels if s not in manifest.label_map})
    if missing:
        raise DatasetError(f"unmapped label strings: {missing}")
    return [int(manifest.label_map[s]) for s in raw_labels]


def iter_records(path: str | Path, manifest: DatasetManifest) -> Iterable[RawRecord]:
    with open(path, newline="") as f:
        reader = csv.reader(f)
        for line_no, row in enumerate(reader, start=1):
            if line_no == 1 and manifest.header:
                continue
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != manifest.n_columns:
                raise DatasetError(
                    f"{path}: line {line_no}: expected {manifest.n_columns} cells, got {len(row)}")
            yield RawRecord(tuple(cell.strip() for cell in row), line_no)


def _parse_number(cell: str, path, line_no: int, column: str) -> float:
    try:
        v = float(cell)
    except ValueError:
        raise DatasetError(f"{path}: line {line_no}: column {column!r}: not a number: {cell!r}") from None
    if not math.isfinite(v):
        raise DatasetError(f"{path}: line {line_no}: column {column!r}: non-finite value {cell!r}")
    return v


def load_dataset(path: str | Path, manifest: DatasetManifest,
                 vocabulary: Mapping[str, Sequence[str]] | None = None) -> LabeledDataset:
    """Parse a record file into a binary-labelled dataset.

    ``vocabulary`` seeds category indices (pass the training set's
    ``categories`` when loading its test file); strings not in it are
    appended in first-seen order.
    """
    path = Path(path)
    if not path.is_file():
        raise DatasetError(f"no such file: {path}")
    feats = manifest.feature_columns
    col_index = {c.name: i for i, c in enumerate(manifest.columns)}
    vocab: dict[str, dict[str, int]] = {}
    for c in feats:
        if c.kind == "categorical":
            seed = list(vocabulary.get(c.name, ())) if vocabulary else []
            vocab[c.name] = {s: i for i, s in enumerate(seed)}

    rows: list[list[float]] = []
    raw_labels: list[str] = []
    line_nos: list[int] = []
    label_idx = manifest.label_index
    for rec in iter_records(path, manifest):
        out = []
        for c in feats:
            cell = rec.values[col_index[c.name]]
            if c.kind == "categorical":
                table = vocab[c.name]
                out.append(float(table.setdefault(cell, len(table))))
            else:
                v = _parse_number(cell, path, rec.line_no, c.name)
                if c.kind == "binary" and v not in (0.0, 1.0):
                    raise DatasetError(
                        f"{path}: line {rec.line_no}: column {c.name!r}: binary value expected, got {cell!r}")
                out.append(v)
        rows.append(out)
        raw_labels.append(rec.values[label_idx])
        line_nos.append(rec.line_no)
    if not rows:
        raise DatasetError(f"{path}: no rows")

    unknown = [(s, n) for s, n in zip(raw_labels, line_nos) if s not in manifest.label_map]
    if unknown:
        names = sorted({s for s, _ in unknown})
        raise DatasetError(f"{path}: unknown label strings {names} (first at line {unknown[0][1]})")
    labels = binarize_labels(raw_labels, manifest)
    categories = {name: tuple(table) for name, table in vocab.items()}
    return LabeledDataset(np.array(rows, dtype=np.float64), np.array(labels), manifest.name,
                          tuple(c.name for c in feats), None, categories)


def stratified_subsample(ds: LabeledDataset, n: int, seed: int) -> LabeledDataset:
    """Draw ``n`` rows keeping class proportions; rows keep their original order."""
    N = len(ds)
    if not 0 < n <= N:
        raise DatasetError(f"subsample size {n} outside (0, {N}]")
    classes = [np.flatnonzero(ds.labels == c) for c in (0, 1)]
    present = [i for i, idx in enumerate(classes) if len(idx)]
    exact = np.array([n * len(idx) / N for idx in classes])
    quota = np.floor(exact).astype(int)
    # largest remainder, ties to the lower class id
    for c in np.argsort(-(exact - quota), kind="stable")[: n - quota.sum()]:
        quota[c] += 1
    if n >= len(present):
        for c in present:
            if quota[c] == 0:
                donor = max(present, key=lambda k: quota[k])
                quota[donor] -= 1
                quota[c] += 1
    rng = np.random.default_rng(seed)
    picked = [rng.choice(idx, size=q, replace=False) for idx, q in zip(classes, quota) if q]
    rows = np.sort(np.concatenate(picked))
    return ds.take(rows)


def save_dataset_csv(ds: LabeledDataset, path: str | Path) -> None:
    """Write the cache format: one header line, repr-exact floats, label and provenance last.

    Category vocabularies go to a ``.categories.json`` sidecar.
    """
    path = Path(path)
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(list(ds.feature_names) + ["label", "provenance"])
        for row, y, tag in zip(ds.features.tolist(), ds.labels.tolist(), ds.provenance.tolist()):
            w.writerow([repr(v) for v in row] + [y, tag])
    meta = {"schema_id": ds.schema_id, "categories": {k: list(v) for k, v in ds.categories.items()}}
    path.with_suffix(".categories.json").write_text(json.dumps(meta, indent=1))


def load_dataset_csv(path: str | Path) -> LabeledDataset:
    path = Path(path)
    if not path.is_file():
        raise DatasetError(f"no such file: {path}")
    sidecar = path.with_suffix(".categories.json")
    meta = json.loads(sidecar.read_text()) if sidecar.is_file() else {}
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or header[-2:] != ["label", "provenance"]:
            raise DatasetError(f"{path}: not a dataset cache file")
        rows, labels, prov = [], [], []
        for line_no, r in enumerate(reader, start=2):
            if len(r) != len(header):
                raise DatasetError(f"{path}: line {line_no}: expected {len(header)} cells, got {len(r)}")
            rows.append([float(v) for v in r[:-2]])
            labels.append(int(r[-2]))
            prov.append(r[-1])
    n_feat = len(header) - 2
    X = np.array(rows, dtype=np.float64).reshape(len(rows), n_feat)
    cats = {k: tuple(v) for k, v in meta.get("categories", {}).items()}
    return LabeledDataset(X, np.array(labels, dtype=np.int8), meta.get("schema_id", path.stem),
                          tuple(header[:-2]), np.array(prov, dtype=object), cats)
