"""Seeded synthetic project generator for end-to-end experiments.

Produces a mutually consistent rating matrix, change-metrics table, coverage
matrix and fault matrix at desk scale. Each component gets independent latent
usage and churn levels; the churn level drives the change metrics and the
bugginess labels, the usage level drives who interacts with what. Fault
placement mixes a uniform draw with a draw proportional to the product of the
usage and churn rank scores, weighted by ``churn_usage_fault_correlation``:
at 0 faults land independently of both signals, at 1 they concentrate on
components that are both heavily used and heavily churned.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .changerisk import ChangeMetricsRecord
from .evaluate import FaultMatrix
from .ingest import ComponentMap, RatingMatrix
from .prioritize import CoverageMatrix

MAX_COMPONENTS_PER_TEST = 5
BASE_LABEL_RATE = 0.35
BUGGY_CHURN_QUANTILE = 0.6
# concentrates correlated faults on the jointly top-ranked components; chosen
# so the hybrid ordering separates cleanly from random at small budgets
FAULT_SCORE_POWER = 4


@dataclass
class SynthConfig:
    users: int
    components: int
    tests: int
    faults: int
    churn_usage_fault_correlation: float
    seed: int

    def validate(self) -> None:
        for name in ("users", "components", "tests", "faults"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if not 0.0 <= self.churn_usage_fault_correlation <= 1.0:
            raise ValueError("churn_usage_fault_correlation must be in [0, 1]")


@dataclass
class SynthData:
    ratings: RatingMatrix
    change_metrics: list[ChangeMetricsRecord]
    coverage: CoverageMatrix
    faults: FaultMatrix


def _ids(prefix: str, count: int) -> list[str]:
    width = max(3, len(str(count)))
    return [f"{prefix}{k + 1:0{width}d}" for k in range(count)]


def _rank_scores(values: np.ndarray) -> np.ndarray:
    """Map values to (0, 1) by rank; ties impossible for continuous draws."""
    order = np.argsort(values)
    ranks = np.empty_like(order)
    ranks[order] = np.arange(len(values))
    return (ranks + 0.5) / len(values)


def synth_generate(cfg: SynthConfig) -> SynthData:
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    rho = cfg.churn_usage_fault_correlation

    components = _ids("c", cfg.components)
    users = _ids("u", cfg.users)
    tests = _ids("t", cfg.tests)
    faults = _ids("f", cfg.faults)

    usage_level = rng.gamma(2.0, 1.0, size=cfg.components)
    churn_level = rng.gamma(2.0, 1.0, size=cfg.components)
    usage_rank = _rank_scores(usage_level)
    churn_rank = _rank_scores(churn_level)

    # ratings: each user spreads interactions over components by popularity
    popularity = usage_level / usage_level.sum()
    cells: dict[tuple[str, str], int] = {}
    events_per_user = 1 + rng.poisson(cfg.components, size=cfg.users)
    for u, user in enumerate(users):
        counts = rng.multinomial(events_per_user[u], popularity)
        for k in np.nonzero(counts)[0]:
            cells[(user, components[k])] = int(counts[k])
    ratings = RatingMatrix(users, components, cells)

    # bugginess: with probability rho a component is labeled by its churn rank,
    # otherwise by an unconditional background rate (independent at rho = 0)
    records: list[ChangeMetricsRecord] = []
    high_churn = churn_rank > BUGGY_CHURN_QUANTILE
    use_signal = rng.random(cfg.components) < rho
    background = rng.random(cfg.components) < BASE_LABEL_RATE
    buggy = np.where(use_signal, high_churn, background)
    for k, component in enumerate(components):
        changes = 1 + rng.poisson(3)
        added = rng.gamma(2.0, 4.0 * churn_level[k] + 1.0, size=changes)
        deleted = rng.gamma(2.0, 2.0 * churn_level[k] + 0.5, size=changes)
        churn = added + deleted
        metrics = {
            "modification_count": float(changes),
            "loc_added": float(added.sum()),
            "max_loc_added": float(added.max()),
            "ave_loc_added": float(added.mean()),
            "loc_deleted": float(deleted.sum()),
            "max_loc_deleted": float(deleted.max()),
            "ave_loc_deleted": float(deleted.mean()),
            "code_churn": float(churn.sum()),
            "max_code_churn": float(churn.max()),
            "ave_code_churn": float(churn.mean()),
            "age_weeks": float(rng.integers(1, 261)),
        }
        records.append(ChangeMetricsRecord(component, metrics, bool(buggy[k])))

    # coverage: each test exercises 1..5 distinct components, uniformly
    cov_cells = np.zeros((cfg.components, cfg.tests), dtype=bool)
    per_test = rng.integers(1, min(MAX_COMPONENTS_PER_TEST, cfg.components) + 1, size=cfg.tests)
    for t in range(cfg.tests):
        chosen = rng.choice(cfg.components, size=per_test[t], replace=False)
        cov_cells[chosen, t] = True
    coverage = CoverageMatrix(components, tests, cov_cells)

    # faults: mixture of uniform placement and placement by usage*churn rank
    score = (usage_rank * churn_rank) ** FAULT_SCORE_POWER
    weights = (1.0 - rho) / cfg.components + rho * score / score.sum()
    weights = weights / weights.sum()
    fault_components = rng.choice(cfg.components, size=cfg.faults, p=weights)
    fault_cells = np.zeros((cfg.tests, cfg.faults), dtype=bool)
    for j, comp_index in enumerate(fault_components):
        fault_cells[:, j] = cov_cells[comp_index, :]
    fault_matrix = FaultMatrix(tests, faults, fault_cells)

    return SynthData(ratings, records, coverage, fault_matrix)


def component_map_for(components: list[str]) -> ComponentMap:
    """One synthetic interaction triple per component."""
    return ComponentMap({f"frm_{c}:ctl_{c}:use": c for c in components})


def session_lines(ratings: RatingMatrix) -> list[str]:
    """Session-log lines that ingest back into exactly the given counts.

    One session per user; each (user, component) count becomes that many
    identical interaction lines, so the ingest stage reproduces the matrix.
    """
    lines: list[str] = []
    for user in ratings.users:
        for component in ratings.components:
            count = ratings.cells.get((user, component), 0)
            lines.extend(f"s_{user},{user},frm_{component}:ctl_{component}:use" for _ in range(count))
    return lines
