"""Confusion-matrix metrics and stage reports (attack is the positive class)."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np

STAGES = ("baseline", "adv_balance", "feat_eng", "fine_tuned")
STAGE_TITLES = {
    "baseline": "Baseline",
    "adv_balance": "+ Adversarial Training & Balancing",
    "feat_eng": "+ Feature Engineering & Preprocessing",
    "fine_tuned": "+ Model Fine-Tuning",
}
ENSEMBLES = ("tc", "dl")
ENSEMBLE_TITLES = {"tc": "Traditional Classifier Ensemble", "dl": "Deep Learning Ensemble"}
CONDITIONS = ("normal", "adversarial")
CSV_COLUMNS = ("ensemble", "stage", "condition", "accuracy", "precision", "recall", "fpr")
UNDEFINED = "NA"


class EvalError(ValueError):
    pass


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    tn: int
    fp: int
    fn: int

    def __post_init__(self):
        if min(self.tp, self.tn, self.fp, self.fn) < 0:
            raise EvalError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn


class Metrics(NamedTuple):
    """``None`` marks a metric whose denominator is zero."""

    accuracy: float | None
    precision: float | None
    recall: float | None
    fpr: float | None


def confusion(labels: Sequence[int], predictions: Sequence[int]) -> ConfusionMatrix:
    y = np.asarray(labels).reshape(-1)
    p = np.asarray(predictions).reshape(-1)
    if len(y) != len(p):
        raise EvalError(f"{len(y)} labels but {len(p)} predictions")
    for name, v in (("labels", y), ("predictions", p)):
        if not np.all((v == 0) | (v == 1)):
            raise EvalError(f"{name} must be binary")
    y = y.astype(bool)
    p = p.astype(bool)
    return ConfusionMatrix(int(np.sum(y & p)), int(np.sum(~y & ~p)), int(np.sum(~y & p)),
                           int(np.sum(y & ~p)))


def _ratio(num: int, den: int) -> float | None:
    return num / den if den else None


def metrics(cm: ConfusionMatrix) -> Metrics:
    if cm.total == 0:
        raise EvalError("cannot compute metrics of an empty confusion matrix")
    return Metrics(
        accuracy=(cm.tp + cm.tn) / cm.total,
        precision=_ratio(cm.tp, cm.tp + cm.fp),
        recall=_ratio(cm.tp, cm.tp + cm.fn),
        fpr=_ratio(cm.fp, cm.fp + cm.tn),
    )


@dataclass(frozen=True)
class StageReport:
    ensemble: str
    stage: str
    normal: ConfusionMatrix | None
    adversarial: ConfusionMatrix | None = None

    def metrics(self, condition: str) -> Metrics | None:
        cm = self.normal if condition == "normal" else self.adversarial
        return None if cm is None else metrics(cm)


def _order_key(r: StageReport):
    e = ENSEMBLES.index(r.ensemble) if r.ensemble in ENSEMBLES else len(ENSEMBLES)
    s = STAGES.index(r.stage) if r.stage in STAGES else len(STAGES)
    return (e, r.ensemble, s, r.stage)


def _fmt_csv(v: float | None) -> str:
    return UNDEFINED if v is None else repr(float(v))


def _fmt_table(v: float | None) -> str:
    return UNDEFINED if v is None else f"{v:.3f}"


def report_rows(reports: Iterable[StageReport]) -> list[tuple[str, str, str, Metrics | None]]:
    rows = []
    for r in sorted(reports, key=_order_key):
        for c in CONDITIONS:
            rows.append((r.ensemble, r.stage, c, r.metrics(c)))
    return rows


def render_csv(reports: Iterable[StageReport]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for ens, stage, cond, m in report_rows(reports):
        vals = m if m is not None else Metrics(None, None, None, None)
        w.writerow([ens, stage, cond, *(_fmt_csv(v) for v in vals)])
    return buf.getvalue()


def parse_report_csv(text: str) -> list[tuple[str, str, str, Metrics]]:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(rows[0]) != CSV_COLUMNS:
        raise EvalError("not a stage report CSV")
    out = []
    for r in rows[1:]:
        vals = [None if v == UNDEFINED else float(v) for v in r[3:]]
        out.append((r[0], r[1], r[2], Metrics(*vals)))
    return out


def render_table(reports: Iterable[StageReport]) -> str:
    """Aligned text table: one row per (ensemble, stage), normal then adversarial metrics."""
    header = ["Ensemble", "Stage", "Normal Accuracy", "Normal Precision", "Normal Recall",
              "Adversarial Accuracy", "Adversarial Precision", "Adversarial Recall"]
    body = []
    for r in sorted(reports, key=_order_key):
        cells = [ENSEMBLE_TITLES.get(r.ensemble, r.ensemble), STAGE_TITLES.get(r.stage, r.stage)]
        for c in CONDITIONS:
            m = r.metrics(c)
            cells += [_fmt_table(None if m is None else getattr(m, k))
                      for k in ("accuracy", "precision", "recall")]
        body.append(cells)
    widths = [max(len(row[i]) for row in [header] + body) for i in range(len(header))]
    lines = ["  ".join(h.ljust(w) for h, w in zip(header, widths)).rstrip()]
    lines.append("  ".join("-" * w for w in widths))
    for row in body:
        lines.append("  ".join(c.ljust(w) if i < 2 else c.rjust(w)
                               for i, (c, w) in enumerate(zip(row, widths))).rstrip())
    return "\n".join(lines) + "\n"


def fpr_change(reports: Iterable[StageReport], first: str = "baseline",
               last: str = "fine_tuned") -> dict[str, dict[str, float | None]]:
    """Normal-test false-positive rate at ``first`` and ``last`` per ensemble, with
    absolute and relative reductions (positive = fewer false positives)."""
    by = {(r.ensemble, r.stage): r for r in reports}
    out = {}
    for ens in sorted({e for e, _ in by}, key=lambda e: (ENSEMBLES.index(e) if e in ENSEMBLES else 9, e)):
        a, b = by.get((ens, first)), by.get((ens, last))
        if a is None or b is None or a.normal is None or b.normal is None:
            continue
        f0, f1 = metrics(a.normal).fpr, metrics(b.normal).fpr
        absolute = None if f0 is None or f1 is None else f0 - f1
        relative = None if absolute is None or not f0 else absolute / f0
        out[ens] = {"fpr_first": f0, "fpr_last": f1, "absolute_reduction": absolute,
                    "relative_reduction": relative}
    return out


def render_report(reports: Sequence[StageReport]) -> tuple[str, str]:
    """Text table (plus a false-positive summary) and CSV for a set of stage reports."""
    text = render_table(reports)
    changes = fpr_change(reports)
    if changes:
        text += "\nFalse-positive rate on normal test traffic (baseline -> fine-tuned):\n"
        for ens, c in changes.items():
            text += (f"  {ENSEMBLE_TITLES.get(ens, ens)}: {_fmt_table(c['fpr_first'])} -> "
                     f"{_fmt_table(c['fpr_last'])}  absolute reduction {_fmt_table(c['absolute_reduction'])}"
                     f"  relative reduction {_fmt_table(c['relative_reduction'])}\n")
    return text, render_csv(reports)
