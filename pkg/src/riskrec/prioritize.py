"""Hybrid test-case prioritization plus the four control techniques.

The hybrid heuristic scores each component by r = f * i (usage frequency
times change risk) and places tests by descending total covered risk, with
one twist reconstructed from the published ordering: a test whose covered
components are all already covered by earlier picks is deferred until the
end, where the leftovers are appended in descending total-risk order. The
change-history (ch) and most-frequent-methods (mfm) controls run the same
placement over i or f alone; greedy sorts by covered-component count; random
is a seeded uniform permutation. Every tie anywhere breaks by ascending
test/component index, so all five techniques are deterministic functions of
their inputs.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import tableio
from .cf import FrequencyScores
from .errors import InputError

TECHNIQUES = ("hcf", "ch", "mfm", "random", "greedy")
BASELINE_KINDS = ("ch", "mfm", "random", "greedy")
ORDERING_STRATEGIES = ("deferred", "total", "additional")

RISK_TABLE_HEADER = ("component_id", "f_score", "i_score", "r_score")
SUITE_HEADER = ("rank", "test_id", "technique", "seed")


@dataclass
class CoverageMatrix:
    """Boolean component x test coverage."""

    components: list[str]
    tests: list[str]
    cells: np.ndarray  # bool, components x tests

    def components_covered_by(self, test_index: int) -> list[int]:
        return list(np.nonzero(self.cells[:, test_index])[0])

    def validate(self) -> None:
        if len(set(self.components)) != len(self.components):
            raise InputError("duplicate component ids in coverage matrix")
        if len(set(self.tests)) != len(self.tests):
            raise InputError("duplicate test ids in coverage matrix")
        if self.cells.shape != (len(self.components), len(self.tests)):
            raise InputError("coverage cell shape disagrees with axes")


@dataclass
class ComponentRiskTable:
    """Per-component (f, i, r) triple with r = f * i."""

    components: list[str]
    f_scores: dict[str, float]
    i_scores: dict[str, float]
    r_scores: dict[str, float]


@dataclass
class PrioritizedSuite:
    technique: str
    order: list[str]
    seed: int | None = None


def combine_scores(frequency: FrequencyScores, risk: dict[str, float]) -> ComponentRiskTable:
    """r = f_scaled * i per component; a side missing a component scores 0 there."""
    components = list(frequency.components)
    for comp in risk:
        if comp not in frequency.scaled:
            components.append(comp)
    only_f = [c for c in frequency.components if c not in risk]
    only_i = [c for c in risk if c not in frequency.scaled]
    if only_f or only_i:
        warnings.warn(
            f"score sets differ; missing side treated as 0 (no risk: {only_f}, no frequency: {only_i})",
            RuntimeWarning,
        )
    f_scores = {c: frequency.scaled.get(c, 0.0) for c in components}
    i_scores = {c: risk.get(c, 0.0) for c in components}
    r_scores = {c: f_scores[c] * i_scores[c] for c in components}
    return ComponentRiskTable(components, f_scores, i_scores, r_scores)


def top_n_components(table: ComponentRiskTable, n: int) -> list[str]:
    """n components with highest r, descending; ties by ascending index."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if n > len(table.components):
        warnings.warn(
            f"requested top {n} of {len(table.components)} components; returning all",
            RuntimeWarning,
        )
        n = len(table.components)
    index = {c: k for k, c in enumerate(table.components)}
    ranked = sorted(table.components, key=lambda c: (-table.r_scores[c], index[c]))
    return ranked[:n]


def _component_scores_for_coverage(scores: dict[str, float], cov: CoverageMatrix) -> np.ndarray:
    unknown = [c for c in cov.components if c not in scores]
    if unknown:
        # cold-start components: never scored, so they contribute nothing
        warnings.warn(f"components without scores contribute 0: {unknown}", RuntimeWarning)
    return np.array([scores.get(c, 0.0) for c in cov.components])


def _place_tests(scores: dict[str, float], cov: CoverageMatrix, strategy: str) -> list[str]:
    """Order test indices by the configured placement strategy, then map to ids."""
    if strategy not in ORDERING_STRATEGIES:
        raise ValueError(f"unknown ordering strategy {strategy!r}")
    comp_scores = _component_scores_for_coverage(scores, cov)
    n_tests = len(cov.tests)
    totals = comp_scores @ cov.cells  # total covered risk per test
    by_total = sorted(range(n_tests), key=lambda t: (-totals[t], t))

    if strategy == "total":
        return [cov.tests[t] for t in by_total]

    order: list[int] = []
    covered = np.zeros(len(cov.components), dtype=bool)
    remaining = set(range(n_tests))
    while remaining:
        if strategy == "deferred":
            # highest total-risk test that still covers something new;
            # when nothing new is reachable, append leftovers by total risk
            candidates = [t for t in by_total if t in remaining and bool((cov.cells[:, t] & ~covered).any())]
            if not candidates:
                order.extend(t for t in by_total if t in remaining)
                break
            pick = candidates[0]
        else:  # additional: plain greedy on newly covered risk
            pick = min(remaining, key=lambda t: (-float(comp_scores @ (cov.cells[:, t] & ~covered)), t))
        order.append(pick)
        remaining.discard(pick)
        covered |= cov.cells[:, pick]
    return [cov.tests[t] for t in order]


def order_tests_hcf(
    table: ComponentRiskTable, cov: CoverageMatrix, strategy: str = "deferred"
) -> PrioritizedSuite:
    """The hybrid technique: placement driven by the combined r scores."""
    if not cov.tests:
        raise ValueError("coverage matrix has no tests")
    return PrioritizedSuite("hcf", _place_tests(table.r_scores, cov, strategy))


def seeded_permutation(items: Sequence[str], seed: int) -> list[str]:
    rng = np.random.default_rng(seed)
    return [items[k] for k in rng.permutation(len(items))]


def order_tests_baseline(
    kind: str,
    *,
    table: ComponentRiskTable | None = None,
    cov: CoverageMatrix | None = None,
    seed: int | None = None,
    strategy: str = "deferred",
) -> PrioritizedSuite:
    """One of the four control techniques; see the module docstring."""
    if kind not in BASELINE_KINDS:
        raise ValueError(f"unknown baseline kind {kind!r}; expected one of {BASELINE_KINDS}")
    if cov is None:
        raise ValueError("coverage matrix is required")
    if kind == "random":
        if seed is None:
            raise ValueError("random ordering requires a seed")
        return PrioritizedSuite("random", seeded_permutation(cov.tests, seed), seed=seed)
    if kind == "greedy":
        counts = cov.cells.sum(axis=0)
        order = sorted(range(len(cov.tests)), key=lambda t: (-counts[t], t))
        return PrioritizedSuite("greedy", [cov.tests[t] for t in order])
    if table is None:
        raise ValueError(f"{kind} ordering requires the component risk table")
    scores = table.i_scores if kind == "ch" else table.f_scores
    return PrioritizedSuite(kind, _place_tests(scores, cov, strategy))


def read_coverage_matrix(path: str | Path) -> CoverageMatrix:
    rows = list(tableio.iter_table(path))
    if not rows:
        raise InputError("missing header row", path=str(path))
    header_line, header = rows[0]
    if not header or header[0] != "component_id":
        raise InputError("header must start with component_id", path=str(path), line=header_line)
    tests = header[1:]
    components: list[str] = []
    bits: list[list[bool]] = []
    for line_no, fields in rows[1:]:
        if len(fields) != len(header):
            raise InputError(f"expected {len(header)} fields, found {len(fields)}", path=str(path), line=line_no)
        components.append(fields[0])
        bits.append(
            [tableio.parse_bit(f, path=path, line=line_no, column=t) for f, t in zip(fields[1:], tests)]
        )
    cells = np.array(bits, dtype=bool) if bits else np.zeros((0, len(tests)), dtype=bool)
    matrix = CoverageMatrix(components, tests, cells)
    matrix.validate()
    return matrix


def write_coverage_matrix(path: str | Path, cov: CoverageMatrix, *, seed: int | None = None) -> None:
    header = ("component_id", *cov.tests)
    rows = (
        (comp, *("1" if cell else "0" for cell in cov.cells[k]))
        for k, comp in enumerate(cov.components)
    )
    tableio.write_table(path, header, rows, seed=seed)


def write_risk_table(path: str | Path, table: ComponentRiskTable, *, seed: int | None = None) -> None:
    rows = (
        (
            c,
            tableio.format_float(table.f_scores[c]),
            tableio.format_float(table.i_scores[c]),
            tableio.format_float(table.r_scores[c]),
        )
        for c in table.components
    )
    tableio.write_table(path, RISK_TABLE_HEADER, rows, seed=seed)


def read_risk_table(path: str | Path) -> ComponentRiskTable:
    components: list[str] = []
    f_scores: dict[str, float] = {}
    i_scores: dict[str, float] = {}
    r_scores: dict[str, float] = {}
    for line_no, fields in tableio.read_table(path, RISK_TABLE_HEADER):
        if len(fields) != 4:
            raise InputError(f"expected 4 fields, found {len(fields)}", path=str(path), line=line_no)
        comp, f_raw, i_raw, r_raw = fields
        if comp in f_scores:
            raise InputError(f"duplicate component {comp!r}", path=str(path), line=line_no)
        f = tableio.parse_float(f_raw, path=path, line=line_no, column="f_score")
        i = tableio.parse_float(i_raw, path=path, line=line_no, column="i_score")
        r = tableio.parse_float(r_raw, path=path, line=line_no, column="r_score")
        if abs(r - f * i) > 1e-12:
            raise InputError(f"r_score {r} is not f*i = {f * i}", path=str(path), line=line_no)
        components.append(comp)
        f_scores[comp] = f
        i_scores[comp] = i
        r_scores[comp] = r
    return ComponentRiskTable(components, f_scores, i_scores, r_scores)


def write_suites(path: str | Path, suites: Sequence[PrioritizedSuite], *, seed: int | None = None) -> None:
    def rows():
        for suite in suites:
            for rank, test_id in enumerate(suite.order, start=1):
                yield rank, test_id, suite.technique, "" if suite.seed is None else suite.seed

    tableio.write_table(path, SUITE_HEADER, rows(), seed=seed)


def read_suites(path: str | Path) -> list[PrioritizedSuite]:
    suites: dict[str, PrioritizedSuite] = {}
    for line_no, fields in tableio.read_table(path, SUITE_HEADER):
        if len(fields) != 4:
            raise InputError(f"expected 4 fields, found {len(fields)}", path=str(path), line=line_no)
        rank_raw, test_id, technique, seed_raw = fields
        if technique not in TECHNIQUES:
            raise InputError(f"unknown technique {technique!r}", path=str(path), line=line_no)
        rank = tableio.parse_count(rank_raw, path=path, line=line_no, column="rank")
        suite = suites.get(technique)
        if suite is None:
            seed = int(seed_raw) if seed_raw else None
            suite = PrioritizedSuite(technique, [], seed=seed)
            suites[technique] = suite
        if rank != len(suite.order) + 1:
            raise InputError(
                f"rank {rank} out of sequence for technique {technique!r}", path=str(path), line=line_no
            )
        suite.order.append(test_id)
    return list(suites.values())
