"""Four cumulative hardening stages and the adversarial-training augmentation.

Stages, each keeping everything the previous one added:

* ``baseline``: category codes as numbers, no scaling, default hyperparameters.
* ``adv_balance``: Monte Carlo copies and GA variants of a held-out slice of
  training attacks, then SMOTE.
* ``feat_eng``: min-max scaling, one-hot categories, engineered columns and
  correlation-residual columns.
* ``fine_tuned``: random hyperparameter search per member on a validation split.

The TC and DL ensembles are hardened on separate tracks: GA training rows for
a track are evolved against that track's previous-stage detector and
accumulate from stage to stage. The attacker's constraint set (schema,
budgets, correlation fits) is fixed from the clean training split and shared
by every stage.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np

from .attack import AttackConfig, AttackStats, generate_adversarial_dataset
from .balance import SmoteConfig, smote
from .dataset import DatasetError, LabeledDataset, stratified_subsample
from .ensemble import Detector, Ensemble, build_ensemble, member_keys, member_specs
from .evaluation import ENSEMBLES, STAGES, StageReport, confusion
from .features import FeatureSchema, PreprocessorState, fit_preprocessor, project_to_valid
from .models import ClassifierSpec, fit, sample_spec

log = logging.getLogger(__name__)

TECHNIQUES = {
    "baseline": frozenset(),
    "adv_balance": frozenset({"monte_carlo", "ga_adversarial_training", "smote"}),
    "feat_eng": frozenset({"monte_carlo", "ga_adversarial_training", "smote", "preprocessing",
                           "engineered_features", "correlation_features"}),
    "fine_tuned": frozenset({"monte_carlo", "ga_adversarial_training", "smote", "preprocessing",
                             "engineered_features", "correlation_features", "fine_tuning"}),
}


class StageError(RuntimeError):
    def __init__(self, stage: str, message: str):
        super().__init__(f"stage {stage}: {message}")
        self.stage = stage


@dataclass(frozen=True)
class StageConfig:
    stage: str = "baseline"
    monte_carlo_samples: int = 5
    monte_carlo_sigma: float = 0.05
    adversarial_fraction: float = 0.2
    smote: SmoteConfig = field(default_factory=SmoteConfig)
    fine_tune_budget: int = 30
    validation_fraction: float = 0.2
    attack: AttackConfig = field(default_factory=AttackConfig)
    seed: int = 0

    def __post_init__(self):
        if self.stage not in STAGES:
            raise ValueError(f"unknown stage {self.stage!r}; expected one of {STAGES}")
        if self.monte_carlo_samples < 0 or self.monte_carlo_sigma < 0:
            raise ValueError("Monte Carlo samples and sigma must be non-negative")
        if not 0 < self.adversarial_fraction <= 1:
            raise ValueError("adversarial_fraction must lie in (0, 1]")
        if self.fine_tune_budget < 1:
            raise ValueError("fine_tune_budget must be >= 1")
        if not 0 < self.validation_fraction < 1:
            raise ValueError("validation_fraction must lie in (0, 1)")

    @property
    def techniques(self) -> frozenset[str]:
        return TECHNIQUES[self.stage]

    def to_dict(self) -> dict:
        return asdict(self)


def derive_seed(seed: int, *keys: int) -> int:
    """Independent sub-seed keyed by task identity."""
    return int(np.random.SeedSequence([seed, *keys]).generate_state(1)[0])


# ---------------------------------------------------------------------------
# augmentation


def monte_carlo_augment(train_attacks: LabeledDataset, schema: FeatureSchema, samples: int = 5,
                        sigma: float = 0.05, seed: int = 0) -> LabeledDataset:
    """``samples`` noisy copies per row: Gaussian noise with std ``sigma * span`` on
    mutable features, then projection onto the valid set around the row."""
    if np.any(train_attacks.labels != 1):
        raise DatasetError("Monte Carlo augmentation expects attack rows only")
    n, D = len(train_attacks), train_attacks.n_features
    if samples == 0 or n == 0:
        return train_attacks.take(np.zeros(0, dtype=np.intp))
    X = np.repeat(train_attacks.features, samples, axis=0)
    mut = schema.mutable_indices
    rng = np.random.default_rng(seed)
    noisy = X.copy()
    noisy[:, mut] += rng.standard_normal((len(X), len(mut))) * (sigma * schema.spans[mut])
    V = project_to_valid(noisy, X, schema)
    return LabeledDataset(V, np.ones(len(V), dtype=np.int8), train_attacks.schema_id,
                          train_attacks.feature_names, np.full(len(V), "adversarial", dtype=object),
                          train_attacks.categories)


def snap_columns(schema: FeatureSchema) -> list[int]:
    return [i for i, f in enumerate(schema.features) if f.kind in ("categorical", "flag")]


def adversarial_slice(train: LabeledDataset, fraction: float, seed: int) -> np.ndarray:
    """Row indices of the training attacks set aside as GA / Monte Carlo sources."""
    attacks = np.flatnonzero(train.labels == 1)
    k = max(1, int(round(fraction * len(attacks))))
    rng = np.random.default_rng(seed)
    return np.sort(rng.choice(attacks, size=min(k, len(attacks)), replace=False))


# ---------------------------------------------------------------------------
# fine-tuning


@dataclass(frozen=True)
class TuneResult:
    spec: ClassifierSpec
    accuracy: float
    trials: tuple[tuple[ClassifierSpec, float], ...]


def fine_tune(base: ClassifierSpec, train: tuple[np.ndarray, np.ndarray],
              validation: tuple[np.ndarray, np.ndarray], budget: int, seed: int) -> TuneResult:
    """Random search around ``base``; the first spec reaching the best validation accuracy wins."""
    if budget < 1:
        raise ValueError("budget must be >= 1")
    rng = np.random.default_rng(seed)
    Xv, yv = validation
    trials = []
    best = None
    for _ in range(budget):
        spec = sample_spec(base, rng)
        model = fit(spec, train)
        acc = float(np.mean((model.predict_proba(Xv) >= 0.5) == (yv == 1)))
        trials.append((spec, acc))
        if best is None or acc > best[1]:
            best = (spec, acc)
    return TuneResult(best[0], best[1], tuple(trials))


def stratified_split(n_or_labels: np.ndarray, fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """(train rows, validation rows) with ``fraction`` of each class held out."""
    y = np.asarray(n_or_labels)
    rng = np.random.default_rng(seed)
    val = []
    for c in (0, 1):
        rows = np.flatnonzero(y == c)
        k = int(round(fraction * len(rows)))
        val.extend(rng.choice(rows, size=k, replace=False).tolist())
    val = np.sort(np.array(val, dtype=np.intp))
    mask = np.ones(len(y), dtype=bool)
    mask[val] = False
    return np.flatnonzero(mask), val


# ---------------------------------------------------------------------------
# pipelines


@dataclass(eq=False)
class TrainedPipeline:
    stage: str
    schema: FeatureSchema
    preprocessor: PreprocessorState | None
    ensembles: dict[str, Ensemble]
    specs: dict[str, list[ClassifierSpec]]
    config: StageConfig
    training_rows: dict[str, int] = field(default_factory=dict)

    def detector(self, ensemble: str) -> Detector:
        return Detector(self.ensembles[ensemble], self.preprocessor)

    def save(self, directory: str | Path) -> None:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        self.schema.save(d / "schema.json")
        if self.preprocessor is not None:
            (d / "preprocessor.json").write_text(json.dumps(self.preprocessor.to_dict()))
        for name, e in self.ensembles.items():
            e.save(d / name)
        manifest = {
            "stage": self.stage,
            "techniques": sorted(self.config.techniques),
            "config": self.config.to_dict(),
            "specs": {k: [s.to_dict() for s in v] for k, v in self.specs.items()},
            "training_rows": self.training_rows,
            "ensembles": sorted(self.ensembles),
            "preprocessor": self.preprocessor is not None,
        }
        (d / "stage.json").write_text(json.dumps(manifest, indent=1, default=str))

    @classmethod
    def load(cls, directory: str | Path) -> "TrainedPipeline":
        from .features import load_schema

        d = Path(directory)
        man = json.loads((d / "stage.json").read_text())
        pre = None
        if man["preprocessor"]:
            pre = PreprocessorState.from_dict(json.loads((d / "preprocessor.json").read_text()))
        cfgd = dict(man["config"])
        cfgd["smote"] = SmoteConfig(**cfgd["smote"])
        cfgd["attack"] = AttackConfig(**cfgd["attack"])
        return cls(man["stage"], load_schema(d / "schema.json"), pre,
                   {k: Ensemble.load(d / k) for k in man["ensembles"]},
                   {k: [ClassifierSpec.from_dict(s) for s in v] for k, v in man["specs"].items()},
                   StageConfig(**cfgd), dict(man.get("training_rows", {})))


@dataclass(eq=False)
class StageOutcome:
    pipeline: TrainedPipeline
    reports: list[StageReport]
    # GA training rows accumulated per ensemble track (raw units)
    ga_rows: dict[str, LabeledDataset]
    monte_carlo: LabeledDataset | None
    attack_stats: dict[str, AttackStats] = field(default_factory=dict)
    adversarial_tests: dict[str, LabeledDataset] = field(default_factory=dict)


AdversarialSource = LabeledDataset | str | None


def _stage_training_set(train: LabeledDataset, extra: list[LabeledDataset], schema: FeatureSchema,
                        cfg: StageConfig) -> LabeledDataset:
    data = train.concat(*extra) if extra else train
    if "smote" in cfg.techniques:
        data = smote(data, replace(cfg.smote, seed=derive_seed(cfg.seed, 3)), snap_columns(schema),
                     schema.spans)
    return data


def _train_track(kind: str, X: np.ndarray, y: np.ndarray, cfg: StageConfig,
                 tuned: bool, stage_idx: int, ens_idx: int) -> tuple[Ensemble, list[ClassifierSpec]]:
    base = member_specs(kind, seed=derive_seed(cfg.seed, 10, ens_idx))
    if tuned:
        tr, va = stratified_split(y, cfg.validation_fraction, derive_seed(cfg.seed, 11, stage_idx))
        specs = []
        for m, spec in enumerate(base):
            res = fine_tune(spec, (X[tr], y[tr]), (X[va], y[va]), cfg.fine_tune_budget,
                            derive_seed(cfg.seed, 12, ens_idx, m))
            log.info("fine-tuned %s/%s: val acc %.4f %s", kind, member_keys(kind)[m], res.accuracy,
                     res.spec.hyperparameters)
            specs.append(res.spec)
    else:
        specs = base
    return build_ensemble(specs, X, y, name=kind), specs


def run_stage(train: LabeledDataset, test_normal: LabeledDataset, test_adversarial: AdversarialSource,
              cfg: StageConfig, schema: FeatureSchema, previous: StageOutcome | None = None,
              surrogate: bool = False, jobs: int = 1) -> StageOutcome:
    """Train both ensembles for one stage and evaluate them.

    ``test_adversarial`` is a fixed adversarial test set, ``"generate"`` to
    evolve one against each ensemble under test (against TC only when
    ``surrogate``), or ``None`` for normal-only evaluation.
    """
    stage_idx = STAGES.index(cfg.stage)
    if stage_idx > 0 and (previous is None or previous.pipeline.stage != STAGES[stage_idx - 1]):
        raise StageError(cfg.stage, f"requires the outcome of stage {STAGES[stage_idx - 1]!r}")
    if train.feature_names != schema.names or test_normal.feature_names != schema.names:
        raise StageError(cfg.stage, "datasets do not match the schema")

    # augmentation rows, raw units
    mc = previous.monte_carlo if previous is not None else None
    ga_rows = dict(previous.ga_rows) if previous is not None else {}
    if "monte_carlo" in cfg.techniques:
        slice_rows = adversarial_slice(train, cfg.adversarial_fraction, derive_seed(cfg.seed, 1))
        sources = train.take(slice_rows)
        if mc is None:
            mc = monte_carlo_augment(sources, schema, cfg.monte_carlo_samples, cfg.monte_carlo_sigma,
                                     derive_seed(cfg.seed, 2))
        for e, kind in enumerate(ENSEMBLES):
            det = previous.pipeline.detector(kind)
            acfg = replace(cfg.attack, seed=derive_seed(cfg.seed, 20, stage_idx, e))
            res = generate_adversarial_dataset(sources, det, schema, acfg, jobs=jobs)
            log.info("stage %s: %s training GA evasion %.3f over %d rows", cfg.stage, kind,
                     res.stats.evasion_rate, res.stats.n_attacks)
            ga_rows[kind] = ga_rows[kind].concat(res.dataset) if kind in ga_rows else res.dataset

    pre = None
    if "preprocessing" in cfg.techniques:
        pre = fit_preprocessor(train, schema, engineer=True, correlation_residuals=True)

    ensembles, specs, rows = {}, {}, {}
    for e, kind in enumerate(ENSEMBLES):
        extra = [d for d in (mc, ga_rows.get(kind)) if d is not None and len(d)]
        data = _stage_training_set(train, extra, schema, cfg)
        X = data.features if pre is None else pre.transform_matrix(data.features)
        y = data.labels.astype(np.float64)
        ensembles[kind], specs[kind] = _train_track(kind, X, y, cfg, "fine_tuning" in cfg.techniques,
                                                    stage_idx, e)
        rows[kind] = len(data)
    pipe = TrainedPipeline(cfg.stage, schema, pre, ensembles, specs, cfg, rows)

    reports, stats, adv_sets = [], {}, {}
    for e, kind in enumerate(ENSEMBLES):
        det = pipe.detector(kind)
        cm_n = confusion(test_normal.labels, det.classify(test_normal.features))
        adv = None
        if isinstance(test_adversarial, LabeledDataset):
            adv = test_adversarial
        elif test_adversarial == "generate":
            if surrogate and kind != "tc":
                adv = adv_sets["tc"]
            else:
                acfg = replace(cfg.attack, seed=derive_seed(cfg.seed, 30, stage_idx, e))
                res = generate_adversarial_dataset(test_normal, det, schema, acfg, jobs=jobs)
                adv, stats[kind] = res.dataset, res.stats
        elif test_adversarial is not None:
            raise StageError(cfg.stage, f"unknown adversarial test source {test_adversarial!r}")
        cm_a = None if adv is None else confusion(adv.labels, det.classify(adv.features))
        if adv is not None:
            adv_sets[kind] = adv
        reports.append(StageReport(kind, cfg.stage, cm_n, cm_a))
    return StageOutcome(pipe, reports, ga_rows, mc, stats, adv_sets)


def run_stages(train: LabeledDataset, test: LabeledDataset, schema: FeatureSchema,
               configs: list[StageConfig], test_adversarial: AdversarialSource = "generate",
               surrogate: bool = False, jobs: int = 1,
               on_stage: Callable[[StageOutcome], None] | None = None) -> list[StageOutcome]:
    """Run stages in order; ``configs`` must list a prefix of the four stages."""
    names = [c.stage for c in configs]
    if names != list(STAGES[:len(names)]):
        raise StageError(names[0] if names else "?", f"stages must run in order {STAGES}, got {names}")
    outcomes: list[StageOutcome] = []
    prev = None
    for cfg in configs:
        try:
            prev = run_stage(train, test, test_adversarial, cfg, schema, prev, surrogate, jobs)
        except StageError:
            raise
        except Exception as exc:  # surfaced with the stage name for the CLI
            raise StageError(cfg.stage, f"{type(exc).__name__}: {exc}") from exc
        outcomes.append(prev)
        if on_stage is not None:
            on_stage(prev)
    return outcomes


def stage_configs(base: StageConfig, stages=STAGES) -> list[StageConfig]:
    return [replace(base, stage=s) for s in stages]


def subsample_pair(train: LabeledDataset, test: LabeledDataset, n_train: int | None,
                   n_test: int | None, seed: int) -> tuple[LabeledDataset, LabeledDataset]:
    if n_train is not None and n_train < len(train):
        train = stratified_subsample(train, n_train, derive_seed(seed, 100))
    if n_test is not None and n_test < len(test):
        test = stratified_subsample(test, n_test, derive_seed(seed, 101))
    return train, test

