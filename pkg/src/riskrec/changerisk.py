"""Defect risk from change-history metrics.

A linear probability model: the 0/1 buggy label is regressed by ordinary
least squares on the eleven standardized change metrics, and predictions are
clamped into [0, 1]. Per-metric Pearson correlations against the label are
reported alongside the fit. Model accuracy is assessed by seeded 10-fold
cross-validation repeated 100 times, classifying predictions >= 0.5 as buggy
and reporting PC (percent correct), TP and FP.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import tableio
from .errors import InputError

METRIC_NAMES = (
    "modification_count",
    "loc_added",
    "max_loc_added",
    "ave_loc_added",
    "loc_deleted",
    "max_loc_deleted",
    "ave_loc_deleted",
    "code_churn",
    "max_code_churn",
    "ave_code_churn",
    "age_weeks",
)

# each max_* must dominate the matching ave_*
_MAX_AVE_PAIRS = (
    ("max_loc_added", "ave_loc_added"),
    ("max_loc_deleted", "ave_loc_deleted"),
    ("max_code_churn", "ave_code_churn"),
)

CLASSIFY_THRESHOLD = 0.5

CHANGE_METRICS_HEADER = ("component_id",) + METRIC_NAMES + ("buggy",)
RISK_HEADER = ("component_id", "i_score")

_TRUE_LABELS = {"1", "true", "yes"}
_FALSE_LABELS = {"0", "false", "no"}


@dataclass
class ChangeMetricsRecord:
    component_id: str
    metrics: dict[str, float]
    label: bool | None = None

    def validate(self, *, path: str | None = None, line: int | None = None) -> None:
        missing = [m for m in METRIC_NAMES if m not in self.metrics]
        if missing:
            raise InputError(f"missing metrics {missing}", path=path, line=line)
        for name in METRIC_NAMES:
            if self.metrics[name] < 0:
                raise InputError(f"negative metric {name}={self.metrics[name]}", path=path, line=line)
        for max_name, ave_name in _MAX_AVE_PAIRS:
            if self.metrics[max_name] < self.metrics[ave_name]:
                raise InputError(
                    f"{max_name}={self.metrics[max_name]} below {ave_name}={self.metrics[ave_name]}",
                    path=path,
                    line=line,
                )


@dataclass
class LinearModel:
    coefficients: dict[str, float]
    intercept: float
    standardization: dict[str, tuple[float, float]]  # metric -> (mean, std)
    metric_correlations: dict[str, float]


@dataclass
class CvReport:
    pc: float  # percent correctly classified, averaged over repeats
    tp: int  # mean true positives, rounded
    fp: int  # mean false positives, rounded
    folds: int
    repeats: int
    seed: int

    def as_dict(self) -> dict:
        return {
            "pc": self.pc,
            "tp": self.tp,
            "fp": self.fp,
            "folds": self.folds,
            "repeats": self.repeats,
            "seed": self.seed,
        }


def load_change_metrics(path: str | Path) -> list[ChangeMetricsRecord]:
    """Read change-metrics records; the header names the columns, any order.

    ``buggy`` is optional; when present it must parse as a boolean or be empty.
    """
    rows = list(tableio.iter_table(path))
    if not rows:
        raise InputError("missing header row", path=str(path))
    header_line, header = rows[0]
    if "component_id" not in header:
        raise InputError("header lacks component_id", path=str(path), line=header_line)
    missing = [m for m in METRIC_NAMES if m not in header]
    if missing:
        raise InputError(f"header lacks metric columns {missing}", path=str(path), line=header_line)
    col = {name: header.index(name) for name in header}
    has_label = "buggy" in col

    records: list[ChangeMetricsRecord] = []
    for line_no, fields in rows[1:]:
        if len(fields) != len(header):
            raise InputError(
                f"expected {len(header)} fields, found {len(fields)}", path=str(path), line=line_no
            )
        metrics = {
            name: tableio.parse_float(fields[col[name]], path=path, line=line_no, column=name)
            for name in METRIC_NAMES
        }
        label: bool | None = None
        if has_label:
            raw = fields[col["buggy"]].strip().lower()
            if raw in _TRUE_LABELS:
                label = True
            elif raw in _FALSE_LABELS:
                label = False
            elif raw:
                raise InputError(f"column 'buggy': not a boolean: {raw!r}", path=str(path), line=line_no)
        record = ChangeMetricsRecord(fields[col["component_id"]], metrics, label)
        record.validate(path=str(path), line=line_no)
        records.append(record)
    return records


def _metric_matrix(records: Sequence[ChangeMetricsRecord]) -> np.ndarray:
    return np.array([[r.metrics[name] for name in METRIC_NAMES] for r in records])


def metric_correlations(
    records: Sequence[ChangeMetricsRecord], labels: Sequence[float]
) -> dict[str, float]:
    """Pearson correlation of each metric column with the 0/1 label column."""
    if len(records) < 2:
        raise ValueError("need at least 2 records for correlations")
    x = _metric_matrix(records)
    y = np.asarray(labels, dtype=float)
    xc = x - x.mean(axis=0)
    yc = y - y.mean()
    sx = np.sqrt((xc**2).sum(axis=0))
    sy = np.sqrt((yc**2).sum())
    out: dict[str, float] = {}
    for k, name in enumerate(METRIC_NAMES):
        if sx[k] == 0.0 or sy == 0.0:
            out[name] = 0.0
        else:
            out[name] = float(xc[:, k] @ yc / (sx[k] * sy))
    return out


def _standardize(x: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    means = x.mean(axis=0)
    stds = x.std(axis=0)
    stds = np.where(stds == 0.0, 1.0, stds)  # constant columns stay at 0 after centering
    return (x - means) / stds, means, stds


def fit_linear_model(
    records: Sequence[ChangeMetricsRecord], labels: Sequence[float]
) -> LinearModel:
    """OLS of the label on standardized metrics plus an intercept.

    A rank-deficient design does not fail: lstsq falls back to the
    minimum-norm solution and the deficiency is surfaced as a warning.
    """
    if not records:
        raise ValueError("no records to fit")
    if len(records) != len(labels):
        raise ValueError("records and labels differ in length")
    x = _metric_matrix(records)
    y = np.asarray(labels, dtype=float)
    z, means, stds = _standardize(x)
    design = np.hstack([np.ones((len(records), 1)), z])
    solution, _, rank, _ = np.linalg.lstsq(design, y, rcond=None)
    if rank < design.shape[1]:
        warnings.warn(
            f"rank-deficient design (rank {rank} of {design.shape[1]}); using minimum-norm fit",
            RuntimeWarning,
        )
    correlations = metric_correlations(records, labels) if len(records) >= 2 else {m: 0.0 for m in METRIC_NAMES}
    return LinearModel(
        coefficients={name: float(c) for name, c in zip(METRIC_NAMES, solution[1:])},
        intercept=float(solution[0]),
        standardization={name: (float(m), float(s)) for name, m, s in zip(METRIC_NAMES, means, stds)},
        metric_correlations=correlations,
    )


def predict_risk(model: LinearModel, record: ChangeMetricsRecord) -> float:
    """Linear prediction on standardized metrics, clamped into [0, 1]."""
    total = model.intercept
    for name in METRIC_NAMES:
        mean, std = model.standardization[name]
        total += model.coefficients[name] * (record.metrics[name] - mean) / std
    return min(1.0, max(0.0, total))


def risk_scores(model: LinearModel, records: Sequence[ChangeMetricsRecord]) -> dict[str, float]:
    return {r.component_id: predict_risk(model, r) for r in records}


def fold_partition(n: int, folds: int, rng: np.random.Generator) -> list[np.ndarray]:
    """Shuffle 0..n-1 and split into folds whose sizes differ by at most 1."""
    if n < folds:
        raise ValueError(f"need at least {folds} records, have {n}")
    return np.array_split(rng.permutation(n), folds)


def cross_validate(
    records: Sequence[ChangeMetricsRecord],
    labels: Sequence[float],
    folds: int = 10,
    repeats: int = 100,
    seed: int = 0,
) -> CvReport:
    """Repeated k-fold cross-validation of the linear probability model.

    Each repeat r reshuffles with seed + r, holds out each fold once, and
    classifies held-out predictions >= 0.5 as buggy. PC/TP/FP accumulate
    globally within a repeat; PC averages over repeats, TP/FP are mean
    counts rounded to the nearest integer.
    """
    n = len(records)
    if n < folds:
        raise ValueError(f"need at least {folds} records, have {n}")
    y = np.asarray(labels, dtype=float)
    pcs = np.zeros(repeats)
    tps = np.zeros(repeats)
    fps = np.zeros(repeats)
    for r in range(repeats):
        rng = np.random.default_rng(seed + r)
        correct = tp = fp = 0
        for holdout in fold_partition(n, folds, rng):
            train = np.setdiff1d(np.arange(n), holdout)
            model = fit_linear_model([records[k] for k in train], y[train])
            for k in holdout:
                positive = predict_risk(model, records[k]) >= CLASSIFY_THRESHOLD
                actual = bool(y[k] >= 0.5)
                if positive == actual:
                    correct += 1
                if positive and actual:
                    tp += 1
                if positive and not actual:
                    fp += 1
        pcs[r] = 100.0 * correct / n
        tps[r] = tp
        fps[r] = fp
    return CvReport(
        pc=float(pcs.mean()),
        tp=int(round(float(tps.mean()))),
        fp=int(round(float(fps.mean()))),
        folds=folds,
        repeats=repeats,
        seed=seed,
    )


def write_change_metrics(
    path: str | Path, records: Sequence[ChangeMetricsRecord], *, seed: int | None = None
) -> None:
    def rows():
        for r in records:
            label = "" if r.label is None else ("1" if r.label else "0")
            yield (r.component_id, *(tableio.format_float(r.metrics[m]) for m in METRIC_NAMES), label)

    tableio.write_table(path, CHANGE_METRICS_HEADER, rows(), seed=seed)


def write_risk_scores(path: str | Path, scores: dict[str, float], *, seed: int | None = None) -> None:
    rows = ((c, tableio.format_float(v)) for c, v in scores.items())
    tableio.write_table(path, RISK_HEADER, rows, seed=seed)


def read_risk_scores(path: str | Path) -> dict[str, float]:
    scores: dict[str, float] = {}
    for line_no, fields in tableio.read_table(path, RISK_HEADER):
        if len(fields) != 2:
            raise InputError(f"expected 2 fields, found {len(fields)}", path=str(path), line=line_no)
        comp, raw = fields
        if comp in scores:
            raise InputError(f"duplicate component {comp!r}", path=str(path), line=line_no)
        value = tableio.parse_float(raw, path=path, line=line_no, column="i_score")
        if not 0.0 <= value <= 1.0:
            raise InputError(f"i_score out of [0,1]: {value}", path=str(path), line=line_no)
        scores[comp] = value
    return scores
