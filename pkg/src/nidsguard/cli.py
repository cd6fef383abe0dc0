"""Command-line entry point.

Every command reads a JSON experiment config (``--config``) and accepts flat
overrides such as ``--seed=3`` or ``--attack.population_size=50``. The seed is
mandatory. Exit codes: 0 success, 1 runtime failure, 2 usage or config error.
"""

from __future__ import annotations

import argparse
import copy
import hashlib
import json
import logging
import sys
from dataclasses import fields, replace
from pathlib import Path

from .attack import AttackConfig, generate_adversarial_dataset, write_generation_log
from .balance import SmoteConfig
from .dataset import (DatasetError, DatasetManifest, LabeledDataset, builtin_manifest, load_dataset,
                      load_dataset_csv, save_dataset_csv)
from .defense import (StageConfig, StageError, TrainedPipeline, run_stages, stage_configs,
                      subsample_pair)
from .evaluation import STAGES, StageReport, fpr_change, parse_report_csv, render_report
from .features import FeatureSchema, builtin_schema, compute_correlation_groups, load_schema

log = logging.getLogger("nidsguard")

DEFAULT_CONFIG = {
    "dataset": "nsl_kdd",
    "train_path": None,
    "test_path": None,
    "manifest": None,
    "schema": None,
    "n_train": None,
    "n_test": None,
    "seed": None,
    "epsilon": None,
    "correlation_threshold": 0.7,
    "attack": {},
    "stage": {},
    "stages": list(STAGES),
    "adversarial_test": "generate",
    "surrogate": False,
    "out": None,
}

SCHEMA_FOR = {"nsl_kdd": "nsl_kdd", "unsw_nb15": "unsw_nb15", "unsw_nb15_full": None}


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# configuration


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(cfg: dict, overrides: list[str]) -> dict:
    cfg = copy.deepcopy(cfg)
    for item in overrides:
        if not item.startswith("--") or "=" not in item:
            raise ConfigError(f"unrecognised argument {item!r}; overrides look like --key=value")
        key, value = item[2:].split("=", 1)
        parts = key.replace("-", "_").split(".")
        node = cfg
        for p in parts[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise ConfigError(f"cannot override {key}: {p} is not a section")
        node[parts[-1]] = _parse_value(value)
    return cfg


def resolve_config(path: str | None, overrides: list[str]) -> dict:
    cfg = copy.deepcopy(DEFAULT_CONFIG)
    if path:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file {path} not found")
        try:
            user = json.loads(p.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
        unknown = set(user) - set(DEFAULT_CONFIG)
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        cfg.update(user)
    cfg = apply_overrides(cfg, overrides)
    unknown = set(cfg) - set(DEFAULT_CONFIG)
    if unknown:
        raise ConfigError(f"unknown config keys {sorted(unknown)}")
    if cfg["seed"] is None:
        raise ConfigError("a seed is required (set \"seed\" in the config or pass --seed=N)")
    if not isinstance(cfg["seed"], int):
        raise ConfigError("seed must be an integer")
    return cfg


def attack_config(cfg: dict, seed: int) -> AttackConfig:
    names = {f.name for f in fields(AttackConfig)} - {"seed"}
    unknown = set(cfg["attack"]) - names
    if unknown:
        raise ConfigError(f"unknown attack settings {sorted(unknown)}")
    try:
        return AttackConfig(**cfg["attack"], seed=seed)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"attack: {exc}") from exc


def stage_config(cfg: dict) -> StageConfig:
    sc = dict(cfg["stage"])
    names = {f.name for f in fields(StageConfig)} - {"stage", "attack", "seed"}
    unknown = set(sc) - names
    if unknown:
        raise ConfigError(f"unknown stage settings {sorted(unknown)}")
    try:
        if "smote" in sc:
            sc["smote"] = SmoteConfig(**sc["smote"])
        return StageConfig(**sc, attack=attack_config(cfg, cfg["seed"]), seed=cfg["seed"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"stage: {exc}") from exc


def _manifest(cfg: dict) -> DatasetManifest:
    try:
        if cfg["manifest"]:
            return DatasetManifest.load(cfg["manifest"])
        return builtin_manifest(cfg["dataset"])
    except (OSError, DatasetError, KeyError) as exc:
        raise ConfigError(f"manifest: {exc}") from exc


def load_splits(cfg: dict) -> tuple[LabeledDataset, LabeledDataset]:
    for key in ("train_path", "test_path"):
        if not cfg[key]:
            raise ConfigError(f"{key} is not set")
        if not Path(cfg[key]).is_file():
            raise ConfigError(f"{key}: file {cfg[key]} not found")
    manifest = _manifest(cfg)
    train = load_dataset(cfg["train_path"], manifest)
    test = load_dataset(cfg["test_path"], manifest, vocabulary=train.categories)
    return train, test


def build_schema(cfg: dict, train: LabeledDataset) -> FeatureSchema:
    if cfg["schema"]:
        if not Path(cfg["schema"]).is_file():
            raise ConfigError(f"schema file {cfg['schema']} not found")
        schema = load_schema(cfg["schema"], train)
    else:
        name = SCHEMA_FOR.get(cfg["dataset"])
        if name is None:
            raise ConfigError(f"no shipped schema for {cfg['dataset']}; set \"schema\"")
        schema = builtin_schema(name, train)
    if cfg["epsilon"] is not None:
        schema = replace(schema, epsilon=float(cfg["epsilon"]))
    if schema.correlation_groups == () and cfg["correlation_threshold"]:
        schema = compute_correlation_groups(train, schema, float(cfg["correlation_threshold"]))
    return schema


def prepare(cfg: dict):
    train, test = load_splits(cfg)
    train, test = subsample_pair(train, test, cfg["n_train"], cfg["n_test"], cfg["seed"])
    return train, test, build_schema(cfg, train)


def out_dir(cfg: dict, args) -> Path:
    out = args.out or cfg["out"]
    if not out:
        raise ConfigError("an output directory is required (--out)")
    d = Path(out)
    d.mkdir(parents=True, exist_ok=True)
    resolved = dict(cfg, out=str(d))
    (d / "config.resolved.json").write_text(json.dumps(resolved, indent=1, sort_keys=True) + "\n")
    return d


# ---------------------------------------------------------------------------
# commands


def cmd_ingest(cfg: dict, args) -> int:
    train, test = load_splits(cfg)
    d = out_dir(cfg, args)
    summary = {}
    for name, ds in (("train", train), ("test", test)):
        save_dataset_csv(ds, d / f"{name}.csv")
        benign, attack = ds.class_counts()
        summary[name] = {"rows": len(ds), "benign": benign, "attack": attack,
                         "features": ds.n_features}
        print(f"{name}: {len(ds)} rows ({benign} benign, {attack} attack), {ds.n_features} features")
    (d / "summary.json").write_text(json.dumps(summary, indent=1) + "\n")
    return 0


def _base_stage(cfg: dict) -> StageConfig:
    return stage_config(cfg)


def _stage_list(cfg: dict, upto: str | None = None) -> list[str]:
    stages = list(cfg["stages"])
    if upto is not None:
        if upto not in STAGES:
            raise ConfigError(f"unknown stage {upto!r}")
        stages = list(STAGES[:STAGES.index(upto) + 1])
    if stages != list(STAGES[:len(stages)]) or not stages:
        raise ConfigError(f"stages must be a non-empty prefix of {list(STAGES)}")
    return stages


def _adversarial_source(cfg: dict):
    src = cfg["adversarial_test"]
    if src in (None, "none"):
        return None
    if src == "generate":
        return "generate"
    if not Path(src).is_file():
        raise ConfigError(f"adversarial test file {src} not found")
    return load_dataset_csv(src)


def cmd_train(cfg: dict, args) -> int:
    stages = _stage_list(cfg, args.stage)
    base = _base_stage(cfg)
    train, test, schema = prepare(cfg)
    d = out_dir(cfg, args)

    def save(o):
        o.pipeline.save(d / "pipeline" / o.pipeline.stage)
        print(f"trained stage {o.pipeline.stage}: {o.pipeline.training_rows}")

    run_stages(train, test, schema, stage_configs(base, stages), None, jobs=args.jobs, on_stage=save)
    return 0


def cmd_attack(cfg: dict, args) -> int:
    train, test, schema = prepare(cfg)
    acfg = attack_config(cfg, cfg["seed"])
    d = out_dir(cfg, args)
    if args.pipeline:
        if not (Path(args.pipeline) / "stage.json").is_file():
            raise ConfigError(f"{args.pipeline} is not a trained pipeline directory")
        pipe = TrainedPipeline.load(args.pipeline)
    else:
        base = _base_stage(cfg)
        pipe = run_stages(train, test, schema, stage_configs(base, ["baseline"]), None)[0].pipeline
    if args.ensemble not in pipe.ensembles:
        raise ConfigError(f"pipeline has no ensemble {args.ensemble!r}")
    oracle = pipe.detector(args.ensemble)
    res = generate_adversarial_dataset(test, oracle, pipe.schema, acfg, jobs=args.jobs)
    save_dataset_csv(res.dataset, d / "adversarial.csv")
    write_generation_log(res.logs, d / "generation_log.csv")
    stats = res.stats.to_dict()
    stats["sha256"] = hashlib.sha256((d / "adversarial.csv").read_bytes()).hexdigest()
    (d / "attack_stats.json").write_text(json.dumps(stats, indent=1) + "\n")
    print(json.dumps(stats, indent=1))
    return 0


def cmd_run_stages(cfg: dict, args) -> int:
    stages = _stage_list(cfg)
    base = _base_stage(cfg)
    adv = _adversarial_source(cfg)
    train, test, schema = prepare(cfg)
    d = out_dir(cfg, args)
    reports: list[StageReport] = []
    attack_stats = {}

    def record(o):
        reports.extend(o.reports)
        for k, v in o.attack_stats.items():
            attack_stats[f"{o.pipeline.stage}/{k}"] = v.to_dict()
        if args.save_pipelines:
            o.pipeline.save(d / "pipeline" / o.pipeline.stage)
        log.info("finished stage %s", o.pipeline.stage)

    run_stages(train, test, schema, stage_configs(base, stages), adv,
               surrogate=bool(cfg["surrogate"]), jobs=args.jobs, on_stage=record)
    text, csv_text = render_report(reports)
    (d / "report.csv").write_text(csv_text)
    (d / "report.txt").write_text(text)
    (d / "attack_stats.json").write_text(json.dumps(attack_stats, indent=1, sort_keys=True) + "\n")
    (d / "fpr_change.json").write_text(json.dumps(fpr_change(reports), indent=1) + "\n")
    print(text, end="")
    return 0


def cmd_report(cfg: dict | None, args) -> int:
    path = Path(args.report)
    if not path.is_file():
        raise ConfigError(f"report file {path} not found")
    rows = parse_report_csv(path.read_text())
    header = f"{'ensemble':<8} {'stage':<12} {'condition':<12} accuracy  precision recall    fpr"
    print(header)
    for ens, stage, cond, m in rows:
        vals = ["NA" if v is None else f"{v:.3f}" for v in m]
        print(f"{ens:<8} {stage:<12} {cond:<12} " + " ".join(f"{v:<9}" for v in vals).rstrip())
    return 0


def cmd_synth(cfg: dict | None, args) -> int:
    from .synth import write_surrogate

    paths = write_surrogate(args.dataset, args.out_dir, n_train=args.n_train, n_test=args.n_test,
                            seed=args.seed)
    for p in paths:
        print(p)
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nidsguard", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, jobs=True):
        p.add_argument("--config", help="experiment config (JSON)")
        p.add_argument("--out", help="output directory")
        if jobs:
            p.add_argument("--jobs", type=int, default=1, help="worker threads (results do not depend on it)")

    p = sub.add_parser("ingest", help="parse raw record files and cache them as CSV")
    common(p, jobs=False)
    p = sub.add_parser("train", help="train pipelines up to a stage and save them")
    common(p)
    p.add_argument("--stage", default=None, choices=STAGES)
    p = sub.add_parser("attack", help="evolve adversarial variants of the test attacks")
    common(p)
    p.add_argument("--pipeline", help="trained pipeline directory (default: train the baseline)")
    p.add_argument("--ensemble", default="tc", choices=("tc", "dl"))
    p = sub.add_parser("run-stages", help="run the cumulative defence stages and report")
    common(p)
    p.add_argument("--save-pipelines", action="store_true")
    p = sub.add_parser("report", help="print a saved report CSV")
    p.add_argument("report", help="report.csv written by run-stages")
    p = sub.add_parser("synth", help="write surrogate record files in the official layouts")
    p.add_argument("dataset", choices=("nsl_kdd", "unsw_nb15"))
    p.add_argument("out_dir")
    p.add_argument("--n-train", type=int, default=30000)
    p.add_argument("--n-test", type=int, default=8000)
    p.add_argument("--seed", type=int, required=True)
    return parser


COMMANDS = {"ingest": cmd_ingest, "train": cmd_train, "attack": cmd_attack,
            "run-stages": cmd_run_stages, "report": cmd_report, "synth": cmd_synth}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args, extra = parser.parse_known_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command in ("report", "synth"):
            if extra:
                raise ConfigError(f"unexpected arguments {extra}")
            cfg = None
        else:
            cfg = resolve_config(args.config, extra)
            if getattr(args, "jobs", 1) < 1:
                raise ConfigError("--jobs must be >= 1")
        return COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"nidsguard: config error: {exc}", file=sys.stderr)
        return 2
    except StageError as exc:
        print(f"nidsguard: failed in {exc}", file=sys.stderr)
        return 1
    except (DatasetError, OSError, ValueError, RuntimeError) as exc:
        print(f"nidsguard: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
