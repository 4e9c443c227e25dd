"""APFD/NAPFD scoring of prioritized suites and the budget-sweep report.

NAPFD generalizes APFD to partial execution: only the first
ceil(budget * total) tests run, m counts the faults the FULL suite can
detect, p is the budget-detected share of m, and undetected faults
contribute a zero first-detection position:

    NAPFD = p - (TF_1 + ... + TF_m) / (n * m) + p / (2 * n)

At a full budget with every fault detected this reduces to APFD exactly.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from . import tableio
from .errors import InputError
from .prioritize import PrioritizedSuite, seeded_permutation

DEFAULT_BUDGETS = tuple(range(10, 101, 10))
DEFAULT_RANDOM_RUNS = 10

REPORT_HEADER = ("application", "budget_percent", "t_ch", "t_mfm", "t_r", "t_g", "t_hcf")
_REPORT_COLUMNS = {"ch": "t_ch", "mfm": "t_mfm", "random": "t_r", "greedy": "t_g", "hcf": "t_hcf"}


@dataclass
class FaultMatrix:
    """Boolean test x fault detection."""

    tests: list[str]
    faults: list[str]
    cells: np.ndarray  # bool, tests x faults

    def validate(self) -> None:
        if len(set(self.tests)) != len(self.tests):
            raise InputError("duplicate test ids in fault matrix")
        if len(set(self.faults)) != len(self.faults):
            raise InputError("duplicate fault ids in fault matrix")
        if self.cells.shape != (len(self.tests), len(self.faults)):
            raise InputError("fault cell shape disagrees with axes")


@dataclass
class BudgetReport:
    budgets: list[int]  # percentages
    random_runs: int
    values: dict[str, dict[int, float]]  # technique -> budget -> napfd
    seeds: dict[str, int | None]  # technique -> seed, random only

    def rows(self) -> Iterator[tuple[str, int, float]]:
        for technique, per_budget in self.values.items():
            for budget, value in per_budget.items():
                yield technique, budget, value


def _first_detections(order: Sequence[str], fm: FaultMatrix) -> np.ndarray:
    """1-based position of the first detecting test per fault; 0 = undetected."""
    position = {test: k + 1 for k, test in enumerate(order)}
    if sorted(position) != sorted(fm.tests) or len(order) != len(fm.tests):
        raise ValueError("ordering is not a permutation of the fault matrix tests")
    test_positions = np.array([position[t] for t in fm.tests])
    detections = np.zeros(len(fm.faults), dtype=int)
    for j in range(len(fm.faults)):
        detecting = test_positions[fm.cells[:, j]]
        detections[j] = int(detecting.min()) if detecting.size else 0
    return detections


def apfd(suite: PrioritizedSuite, fm: FaultMatrix) -> float:
    """1 - sum(TF) / (n*m) + 1/(2n); requires every fault to be detected."""
    detections = _first_detections(suite.order, fm)
    if len(fm.faults) == 0:
        raise ValueError("fault matrix has no faults")
    if (detections == 0).any():
        undetected = [f for f, d in zip(fm.faults, detections) if d == 0]
        raise ValueError(f"faults never detected (use napfd): {undetected}")
    n = len(fm.tests)
    m = len(fm.faults)
    return 1.0 - detections.sum() / (n * m) + 1.0 / (2 * n)


def napfd(suite: PrioritizedSuite, fm: FaultMatrix, budget_fraction: float) -> float:
    """NAPFD of the first ceil(budget_fraction * total) tests of the ordering."""
    if not 0.0 < budget_fraction <= 1.0:
        raise ValueError(f"budget_fraction must be in (0, 1], got {budget_fraction}")
    detections = _first_detections(suite.order, fm)
    m = int((detections > 0).sum())  # faults the full suite can detect
    if m == 0:
        warnings.warn("full suite detects no faults; NAPFD defined as 0", RuntimeWarning)
        return 0.0
    n = math.ceil(budget_fraction * len(fm.tests))
    within = (detections > 0) & (detections <= n)
    p = within.sum() / m
    tf_sum = detections[within].sum()  # undetected faults contribute 0
    return float(p - tf_sum / (n * m) + p / (2 * n))


def budget_sweep(
    suites: Sequence[PrioritizedSuite],
    fm: FaultMatrix,
    budgets: Sequence[int] = DEFAULT_BUDGETS,
    random_runs: int = DEFAULT_RANDOM_RUNS,
) -> BudgetReport:
    """NAPFD per technique per budget percentage.

    The random technique is scored as the mean over random_runs permutations
    seeded base, base+1, ... so the report is reproducible from its seed.
    """
    for b in budgets:
        if not 0 < b <= 100:
            raise ValueError(f"budget percentages must be in (0, 100], got {b}")
    values: dict[str, dict[int, float]] = {}
    seeds: dict[str, int | None] = {}
    for suite in suites:
        seeds[suite.technique] = suite.seed
        per_budget: dict[int, float] = {}
        for budget in budgets:
            fraction = budget / 100.0
            if suite.technique == "random":
                if suite.seed is None:
                    raise ValueError("random suite carries no seed")
                runs = [
                    napfd(
                        PrioritizedSuite("random", seeded_permutation(fm.tests, suite.seed + k)),
                        fm,
                        fraction,
                    )
                    for k in range(random_runs)
                ]
                per_budget[budget] = float(np.mean(runs))
            else:
                per_budget[budget] = napfd(suite, fm, fraction)
        values[suite.technique] = per_budget
    return BudgetReport(list(budgets), random_runs, values, seeds)


def read_fault_matrix(path: str | Path) -> FaultMatrix:
    rows = list(tableio.iter_table(path))
    if not rows:
        raise InputError("missing header row", path=str(path))
    header_line, header = rows[0]
    if not header or header[0] != "test_id":
        raise InputError("header must start with test_id", path=str(path), line=header_line)
    faults = header[1:]
    tests: list[str] = []
    bits: list[list[bool]] = []
    for line_no, fields in rows[1:]:
        if len(fields) != len(header):
            raise InputError(f"expected {len(header)} fields, found {len(fields)}", path=str(path), line=line_no)
        tests.append(fields[0])
        bits.append(
            [tableio.parse_bit(f, path=path, line=line_no, column=c) for f, c in zip(fields[1:], faults)]
        )
    cells = np.array(bits, dtype=bool) if bits else np.zeros((0, len(faults)), dtype=bool)
    matrix = FaultMatrix(tests, faults, cells)
    matrix.validate()
    return matrix


def write_fault_matrix(path: str | Path, fm: FaultMatrix, *, seed: int | None = None) -> None:
    header = ("test_id", *fm.faults)
    rows = ((test, *("1" if cell else "0" for cell in fm.cells[k])) for k, test in enumerate(fm.tests))
    tableio.write_table(path, header, rows, seed=seed)


def write_report_csv(
    path: str | Path, report: BudgetReport, *, application: str, seed: int | None = None
) -> None:
    def rows():
        for budget in report.budgets:
            row = [application, budget]
            for technique in ("ch", "mfm", "random", "greedy", "hcf"):
                value = report.values.get(technique, {}).get(budget)
                row.append("" if value is None else tableio.format_float(value))
            yield row

    tableio.write_table(path, REPORT_HEADER, rows(), seed=seed)


def write_report_json(
    path: str | Path, report: BudgetReport, *, application: str, seed: int | None = None
) -> None:
    payload = {
        "application": application,
        "budgets": report.budgets,
        "random_runs": report.random_runs,
        "technique_seeds": report.seeds,
        "napfd": {
            technique: {str(budget): value for budget, value in per_budget.items()}
            for technique, per_budget in report.values.items()
        },
    }
    tableio.write_json(path, payload, seed=seed)
