"""Genetic-algorithm evasion of a black-box detector under feature constraints.

Each attack record gets its own population. Individuals live in raw feature
units; every candidate is projected onto the valid set around its source
record, so immutable features never move, mutable ones stay inside the
epsilon box and bounds, integral ones move in whole steps, and correlated
pairs stay near their fitted line.

Fitness is ``P(benign | x_hat) - lam * ||x_hat - x||_p`` where the distance
is taken on range-normalised coordinates by default.

Records are evolved in fixed blocks so one oracle call scores a whole block's
offspring. Every random draw comes from a generator keyed by
``(seed, record id, generation)``, so results do not depend on block size,
worker count or scheduling.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .dataset import LabeledDataset
from .ensemble import Oracle
from .features import FeatureSchema, dependent_interval, project_to_valid


class AttackError(ValueError):
    pass


@dataclass(frozen=True)
class AttackConfig:
    population_size: int = 200
    max_generations: int = 1000
    crossover_prob: float = 0.8
    mutation_rate: float = 0.01
    elitism_fraction: float = 0.05
    tournament_size: int = 3
    lam: float = 0.1
    window: int = 50
    min_improvement: float = 1e-4
    distance_space: str = "preprocessed"
    seed: int = 0
    block_size: int = 32

    def __post_init__(self):
        for name in ("crossover_prob", "mutation_rate", "elitism_fraction"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise AttackError(f"{name} must lie in [0, 1]")
        if self.population_size < 2:
            raise AttackError("population_size must be at least 2")
        if self.n_elite < 1:
            raise AttackError("elitism_fraction * population_size must be at least 1")
        if self.n_elite >= self.population_size:
            raise AttackError("elitism leaves no room for offspring")
        if not 1 <= self.tournament_size <= self.population_size:
            raise AttackError("tournament_size must lie in [1, population_size]")
        if self.lam < 0:
            raise AttackError("lam must be non-negative")
        if self.max_generations < 0 or self.window < 1 or self.block_size < 1:
            raise AttackError("max_generations, window and block_size must be positive")
        if self.distance_space not in ("preprocessed", "raw"):
            raise AttackError("distance_space must be 'preprocessed' or 'raw'")

    @property
    def n_elite(self) -> int:
        # round() guards against 0.05 * 200 = 10.000000000000002
        return int(round(self.elitism_fraction * self.population_size, 9))


@dataclass(eq=False)
class Individual:
    """Candidate ``x_hat = x + delta``; ``lo``/``hi`` are its current ranges over mutable features."""

    x_hat: np.ndarray
    x: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    fitness: float | None = None

    @property
    def delta(self) -> np.ndarray:
        return self.x_hat - self.x


@dataclass(frozen=True)
class GenerationStats:
    generation: int
    best_fitness: float
    mean_fitness: float


@dataclass(frozen=True, eq=False)
class AttackStats:
    n_attacks: int
    n_evaded: int
    n_missed_before: int
    mean_linf: float
    mean_distance: float
    mean_generations: float

    @property
    def evasion_rate(self) -> float:
        return self.n_evaded / self.n_attacks if self.n_attacks else 0.0

    @property
    def baseline_miss_rate(self) -> float:
        return self.n_missed_before / self.n_attacks if self.n_attacks else 0.0

    def to_dict(self) -> dict:
        return {"n_attacks": self.n_attacks, "n_evaded": self.n_evaded,
                "evasion_rate": self.evasion_rate, "baseline_miss_rate": self.baseline_miss_rate,
                "mean_linf_budget_fraction": self.mean_linf, "mean_distance": self.mean_distance,
                "mean_generations": self.mean_generations}


@dataclass(eq=False)
class AttackResult:
    dataset: LabeledDataset
    stats: AttackStats
    # per attacked row (in input order): list of GenerationStats
    logs: dict[int, list[GenerationStats]] = field(default_factory=dict)


# ---------------------------------------------------------------------------
# array kernels; leading axes are (records, population) or just (population,)


def _rng(seed: int, record_id: int, generation: int) -> np.random.Generator:
    return np.random.default_rng([seed, record_id, generation])


def _distance_scale(schema: FeatureSchema, cfg: AttackConfig) -> np.ndarray:
    mut = schema.mutable_indices
    if cfg.distance_space == "raw":
        return np.ones(len(mut))
    return schema.spans[mut]


def _distances(V, X, schema, scale) -> np.ndarray:
    mut = schema.mutable_indices
    d = (V[..., mut] - X[..., mut]) / scale
    p = schema.norm_order
    if d.shape[-1] == 0:
        return np.zeros(d.shape[:-1])
    if math.isinf(p):
        return np.abs(d).max(axis=-1)
    return np.sum(np.abs(d) ** p, axis=-1) ** (1.0 / p)


def _fitness_values(p_attack, V, X, schema, cfg, scale) -> np.ndarray:
    return (1.0 - p_attack) - cfg.lam * _distances(V, X, schema, scale)


def _refresh_ranges(V, X, schema, lo, hi):
    """Recompute correlation dependents' ranges from their anchors' current values."""
    mut = schema.mutable_indices
    pos = {int(i): k for k, i in enumerate(mut)}
    box_lo, box_hi = schema.box(X, mut)
    lo = np.array(lo)
    hi = np.array(hi)
    for g in schema.correlation_groups:
        if g.anchor not in pos or g.dependent not in pos:
            continue
        k = pos[g.dependent]
        blo = np.broadcast_to(box_lo[..., k], V.shape[:-1])
        bhi = np.broadcast_to(box_hi[..., k], V.shape[:-1])
        lo[..., k], hi[..., k] = dependent_interval(schema, g, V[..., g.anchor], X, blo, bhi)
    return lo, hi


def _tournament(F: np.ndarray, n: int, k: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` tournaments of ``k`` distinct entrants each; ties go to the lower index."""
    P = len(F)
    chosen = np.empty((n, k), dtype=np.int64)
    for j in range(k):
        r = rng.integers(0, P - j, size=n)
        # shift past already-chosen indices in ascending order -> uniform over the rest
        for s in np.sort(chosen[:, :j], axis=1).T:
            r += r >= s
        chosen[:, j] = r
    Fc = F[chosen]
    top = Fc.max(axis=1)
    return np.where(Fc == top[:, None], chosen, P).min(axis=1)


def _crossover(va, vb, la, lb, ha, hb, pc, rng):
    """Uniform crossover of value/range triples for ``n`` parent pairs (arrays (n, M))."""
    n, M = va.shape
    do = rng.random(n) < pc
    swap = (rng.random((n, M)) < 0.5) & do[:, None]
    c1 = np.where(swap, vb, va), np.where(swap, lb, la), np.where(swap, hb, ha)
    c2 = np.where(swap, va, vb), np.where(swap, la, lb), np.where(swap, ha, hb)
    return c1, c2


def _mutate(v, lo, hi, rate, rng):
    mask = rng.random(v.shape) < rate
    u = rng.random(v.shape)
    return np.where(mask, lo + u * (hi - lo), v), mask


def _initial(x, schema, cfg, rng):
    """Population for one record: row 0 is ``x`` itself, the rest uniform in the box, projected."""
    P = cfg.population_size
    mut = schema.mutable_indices
    lo, hi = schema.box(x, mut)
    V = np.tile(x, (P, 1))
    U = rng.random((P - 1, len(mut)))
    V[1:, mut] = lo + U * (hi - lo)
    V = project_to_valid(V, x, schema)
    LO, HI = _refresh_ranges(V, x, schema, np.tile(lo, (P, 1)), np.tile(hi, (P, 1)))
    return V, LO, HI


def _offspring(V, LO, HI, F, x, schema, cfg, rng):
    """Children filling the non-elite slots of one record's next generation."""
    P = cfg.population_size
    n_child = P - cfg.n_elite
    n_pairs = (n_child + 1) // 2
    mut = schema.mutable_indices
    parents = _tournament(F, 2 * n_pairs, cfg.tournament_size, rng)
    a, b = parents[0::2], parents[1::2]
    Vm = V[:, mut]
    c1, c2 = _crossover(Vm[a], Vm[b], LO[a], LO[b], HI[a], HI[b], cfg.crossover_prob, rng)
    cv = np.concatenate([c1[0], c2[0]])[:n_child]
    clo = np.concatenate([c1[1], c2[1]])[:n_child]
    chi = np.concatenate([c1[2], c2[2]])[:n_child]
    cv, _ = _mutate(cv, clo, chi, cfg.mutation_rate, rng)
    C = np.tile(x, (n_child, 1))
    C[:, mut] = cv
    C = project_to_valid(C, x, schema)
    clo, chi = _refresh_ranges(C, x, schema, clo, chi)
    return C, clo, chi


# ---------------------------------------------------------------------------
# single-individual operations


def initialize_population(x: np.ndarray, schema: FeatureSchema, cfg: AttackConfig,
                          rng: np.random.Generator | None = None) -> list[Individual]:
    if len(schema.mutable_indices) == 0:
        raise AttackError("schema has no mutable features")
    x = np.asarray(x, dtype=np.float64)
    rng = rng if rng is not None else _rng(cfg.seed, 0, 0)
    V, LO, HI = _initial(x, schema, cfg, rng)
    return [Individual(V[i], x, LO[i], HI[i]) for i in range(len(V))]


def fitness(ind: Individual, oracle: Oracle, cfg: AttackConfig,
            schema: FeatureSchema | None = None) -> float:
    """``P(benign) - lam * distance``; without a schema the distance is over all raw coordinates."""
    p_attack = float(oracle.ensemble_proba(ind.x_hat[None, :])[0])
    if schema is None:
        d = ind.x_hat - ind.x
        dist = float(np.linalg.norm(d, ord=2))
        return (1.0 - p_attack) - cfg.lam * dist
    scale = _distance_scale(schema, cfg)
    return float(_fitness_values(np.array(p_attack), ind.x_hat, ind.x, schema, cfg, scale))


def tournament_select(pop: Sequence[Individual], cfg: AttackConfig,
                      rng: np.random.Generator) -> Individual:
    if not pop:
        raise AttackError("empty population")
    F = np.array([ind.fitness for ind in pop], dtype=np.float64)
    k = min(cfg.tournament_size, len(pop))
    return pop[int(_tournament(F, 1, k, rng)[0])]


def crossover(a: Individual, b: Individual, cfg: AttackConfig, rng: np.random.Generator,
              schema: FeatureSchema | None = None) -> tuple[Individual, Individual]:
    """Uniform gene swap of values and ranges; children are projected when ``schema`` is given."""
    mut = schema.mutable_indices if schema is not None else np.arange(len(a.lo))
    (v1, l1, h1), (v2, l2, h2) = _crossover(a.x_hat[mut][None], b.x_hat[mut][None], a.lo[None],
                                            b.lo[None], a.hi[None], b.hi[None],
                                            cfg.crossover_prob, rng)
    kids = []
    for v, lo, hi in ((v1[0], l1[0], h1[0]), (v2[0], l2[0], h2[0])):
        xh = a.x.copy()
        xh[mut] = v
        if schema is not None:
            xh = project_to_valid(xh, a.x, schema)
            lo, hi = _refresh_ranges(xh, a.x, schema, lo, hi)
        kids.append(Individual(xh, a.x, lo, hi))
    return kids[0], kids[1]


def mutate(ind: Individual, schema: FeatureSchema, cfg: AttackConfig,
           rng: np.random.Generator) -> Individual:
    """Resample each mutable gene with probability ``mutation_rate`` inside its range,
    then re-derive correlated ranges and project."""
    mut = schema.mutable_indices
    v, mask = _mutate(ind.x_hat[mut], ind.lo, ind.hi, cfg.mutation_rate, rng)
    if not mask.any():
        return replace(ind)
    xh = ind.x.copy()
    xh[mut] = v
    # projection clamps each dependent to the band of its (possibly new) anchor
    xh = project_to_valid(xh, ind.x, schema)
    lo, hi = _refresh_ranges(xh, ind.x, schema, ind.lo, ind.hi)
    return Individual(xh, ind.x, lo, hi)


# ---------------------------------------------------------------------------
# block engine


@dataclass(eq=False)
class _Run:
    record_id: int
    x: np.ndarray
    V: np.ndarray
    LO: np.ndarray
    HI: np.ndarray
    F: np.ndarray
    log: list = field(default_factory=list)
    done: bool = False

    def best(self) -> int:
        return int(np.argmax(self.F))


def _evolve_block(X: np.ndarray, record_ids: Sequence[int], oracle: Oracle,
                  schema: FeatureSchema, cfg: AttackConfig) -> list[_Run]:
    scale = _distance_scale(schema, cfg)
    runs = []
    for x, rid in zip(X, record_ids):
        V, LO, HI = _initial(x, schema, cfg, _rng(cfg.seed, int(rid), 0))
        runs.append(_Run(int(rid), x, V, LO, HI, np.empty(len(V))))
    if not runs:
        return runs
    allV = np.concatenate([r.V for r in runs])
    p = oracle.ensemble_proba(allV)
    P = cfg.population_size
    for i, r in enumerate(runs):
        r.F = _fitness_values(p[i * P:(i + 1) * P], r.V, r.x, schema, cfg, scale)
        r.log.append(GenerationStats(0, float(r.F.max()), float(r.F.mean())))
        if cfg.max_generations == 0:
            r.done = True
    ne = cfg.n_elite
    gen = 0
    while True:
        active = [r for r in runs if not r.done]
        if not active:
            break
        gen += 1
        kids = []
        for r in active:
            rng = _rng(cfg.seed, r.record_id, gen)
            kids.append(_offspring(r.V, r.LO, r.HI, r.F, r.x, schema, cfg, rng))
        p = oracle.ensemble_proba(np.concatenate([k[0] for k in kids]))
        nc = P - ne
        for i, (r, (C, clo, chi)) in enumerate(zip(active, kids)):
            elite = np.argsort(-r.F, kind="stable")[:ne]
            Fc = _fitness_values(p[i * nc:(i + 1) * nc], C, r.x, schema, cfg, scale)
            r.V = np.concatenate([r.V[elite], C])
            r.LO = np.concatenate([r.LO[elite], clo])
            r.HI = np.concatenate([r.HI[elite], chi])
            r.F = np.concatenate([r.F[elite], Fc])
            r.log.append(GenerationStats(gen, float(r.F.max()), float(r.F.mean())))
            if gen >= cfg.max_generations:
                r.done = True
            elif gen >= cfg.window:
                if r.log[gen].best_fitness - r.log[gen - cfg.window].best_fitness < cfg.min_improvement:
                    r.done = True
    return runs


def evolve(x: np.ndarray, oracle: Oracle, schema: FeatureSchema, cfg: AttackConfig,
           record_id: int = 0) -> tuple[Individual, list[GenerationStats]]:
    """Run the GA for one record; returns the best individual and per-generation fitness."""
    if len(schema.mutable_indices) == 0:
        raise AttackError("schema has no mutable features")
    x = np.asarray(x, dtype=np.float64)
    run = _evolve_block(x[None, :], [record_id], oracle, schema, cfg)[0]
    b = run.best()
    return Individual(run.V[b], x, run.LO[b], run.HI[b], float(run.F[b])), run.log


def generate_adversarial_dataset(test: LabeledDataset, oracle: Oracle, schema: FeatureSchema,
                                 cfg: AttackConfig, jobs: int = 1) -> AttackResult:
    """Replace every attack row with its evolved best variant.

    Benign rows pass through unchanged, so the result can serve directly as
    the adversarial test condition. Record ids are the row positions in
    ``test``.
    """
    if len(schema.mutable_indices) == 0:
        raise AttackError("schema has no mutable features")
    if test.feature_names != schema.names:
        raise AttackError("dataset columns do not match the schema")
    rows = np.flatnonzero(test.labels == 1)
    X = test.features
    blocks = [rows[s:s + cfg.block_size] for s in range(0, len(rows), cfg.block_size)]

    def work(block):
        return _evolve_block(X[block], block, oracle, schema, cfg)

    if jobs > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(work, blocks))
    else:
        results = [work(b) for b in blocks]

    out = np.array(X)
    prov = np.array(test.provenance, dtype=object)
    logs: dict[int, list[GenerationStats]] = {}
    for runs in results:
        for r in runs:
            out[r.record_id] = r.V[r.best()]
            prov[r.record_id] = "adversarial"
            logs[r.record_id] = r.log
    adv = test.with_features(out, provenance=prov)

    n = len(rows)
    if n:
        before = oracle.classify(X[rows])
        after = oracle.classify(out[rows])
        mut = schema.mutable_indices
        budget = schema.budgets()[mut]
        dev = np.abs(out[rows][:, mut] - X[rows][:, mut])
        linf = np.max(np.where(budget > 0, dev / np.where(budget > 0, budget, 1.0), 0.0), axis=1)
        dist = _distances(out[rows], X[rows], schema, _distance_scale(schema, cfg))
        stats = AttackStats(n, int(np.sum(after == 0)), int(np.sum(before == 0)),
                            float(linf.mean()), float(dist.mean()),
                            float(np.mean([len(v) - 1 for v in logs.values()])))
    else:
        stats = AttackStats(0, 0, 0, 0.0, 0.0, 0.0)
    return AttackResult(adv, stats, logs)


def write_generation_log(logs: dict[int, list[GenerationStats]], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["record", "generation", "best_fitness", "mean_fitness"])
        for rid in sorted(logs):
            for g in logs[rid]:
                w.writerow([rid, g.generation, repr(g.best_fitness), repr(g.mean_fitness)])
