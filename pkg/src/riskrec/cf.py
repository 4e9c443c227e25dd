"""Item-based collaborative filtering over the access-frequency matrix.

The completion pipeline is: mean-center each component over its observed
ratings (blanks become 0), measure component similarity with the Pearson-r
form on the centered columns, pick the top-N positively similar neighbors,
and predict each missing cell as the similarity-weighted mean of the
neighbors' centered ratings. Predictions are brought back to count scale by
adding the component mean, clamped at zero so they stay comparable to
observed counts.

Two similarity variants exist. ``all_users`` (default) takes the centered
columns over every user, treating blanks as zero exactly as the worked
normalization does. ``co_rated`` restricts the sums to users who rated both
components, which is what the similarity formula's prose describes; it is
kept for comparison.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import tableio
from .errors import InputError
from .ingest import RatingMatrix

SIMILARITY_VARIANTS = ("all_users", "co_rated")
DEFAULT_NEIGHBORS = 2
# similarities are rounded to this many decimals: the strictly-positive
# neighbor cutoff and tie-breaks must not hinge on summation-order noise
SIMILARITY_DECIMALS = 12

COMPLETED_HEADER = ("user_id", "component_id", "value", "flag")
FREQUENCY_HEADER = ("component_id", "f_raw", "f_scaled")


@dataclass
class CenteredMatrix:
    """Dense mean-centered view of a rating matrix; missing cells hold exactly 0."""

    users: list[str]
    components: list[str]
    values: np.ndarray  # users x components
    observed: np.ndarray  # bool mask, same shape
    means: np.ndarray  # per-component mean over observed cells only

    def component_index(self, component_id: str) -> int:
        try:
            return self.components.index(component_id)
        except ValueError:
            raise KeyError(f"unknown component {component_id!r}") from None

    def component_means(self) -> dict[str, float]:
        return {c: float(m) for c, m in zip(self.components, self.means)}


@dataclass
class SimilarityTable:
    components: list[str]
    values: np.ndarray  # symmetric, |values| <= 1

    def sim(self, i: str, j: str) -> float:
        idx = {c: k for k, c in enumerate(self.components)}
        return float(self.values[idx[i], idx[j]])


@dataclass
class NeighborSet:
    """Top-N most similar components, positive similarities only, best first."""

    component_id: str
    neighbors: list[tuple[str, float]]


@dataclass
class CompletedMatrix:
    users: list[str]
    components: list[str]
    values: np.ndarray  # float, >= 0
    observed: np.ndarray  # True = copied from input, False = predicted


@dataclass
class FrequencyScores:
    components: list[str]
    raw: dict[str, float]
    scaled: dict[str, float]  # min-max rescale of raw into [0, 1]


def _as_arrays(matrix: RatingMatrix) -> tuple[np.ndarray, np.ndarray]:
    values = np.zeros((len(matrix.users), len(matrix.components)))
    observed = np.zeros(values.shape, dtype=bool)
    user_idx = {u: k for k, u in enumerate(matrix.users)}
    comp_idx = {c: k for k, c in enumerate(matrix.components)}
    for (user, comp), count in matrix.cells.items():
        values[user_idx[user], comp_idx[comp]] = count
        observed[user_idx[user], comp_idx[comp]] = True
    return values, observed


def mean_center(matrix: RatingMatrix) -> CenteredMatrix:
    """Subtract each component's mean observed rating; blanks stay 0."""
    values, observed = _as_arrays(matrix)
    if not observed.any():
        raise ValueError("rating matrix has no observed cells to center")
    counts = observed.sum(axis=0)
    empty = counts == 0
    if empty.any():
        names = [c for c, e in zip(matrix.components, empty) if e]
        warnings.warn(f"components with no observed ratings center to 0: {names}", RuntimeWarning)
    means = np.where(empty, 0.0, values.sum(axis=0) / np.where(empty, 1, counts))
    centered = np.where(observed, values - means, 0.0)
    return CenteredMatrix(list(matrix.users), list(matrix.components), centered, observed, means)


def pearson_similarity(centered: CenteredMatrix, i: str, j: str, variant: str = "all_users") -> float:
    """Cosine of two centered component columns; 0 when either norm vanishes."""
    if variant not in SIMILARITY_VARIANTS:
        raise ValueError(f"unknown similarity variant {variant!r}")
    xi = centered.values[:, centered.component_index(i)]
    xj = centered.values[:, centered.component_index(j)]
    if variant == "co_rated":
        mask = centered.observed[:, centered.component_index(i)] & centered.observed[:, centered.component_index(j)]
        xi = xi * mask
        xj = xj * mask
    num = float(np.dot(xi, xj))
    norm_i = float(np.sqrt(np.dot(xi, xi)))
    norm_j = float(np.sqrt(np.dot(xj, xj)))
    if norm_i == 0.0 or norm_j == 0.0:
        return 0.0
    return round(num / (norm_i * norm_j), SIMILARITY_DECIMALS)


def similarity_table(centered: CenteredMatrix, variant: str = "all_users") -> SimilarityTable:
    """All pairwise similarities; mirrored from the upper triangle so the
    table is exactly symmetric."""
    if variant not in SIMILARITY_VARIANTS:
        raise ValueError(f"unknown similarity variant {variant!r}")
    x = centered.values
    if variant == "all_users":
        num = x.T @ x
        norms = np.sqrt(np.einsum("ui,ui->i", x, x))
        denom = np.outer(norms, norms)
    else:
        # numerator is unchanged (products vanish outside the co-rated set);
        # norms must be restricted to users who rated both components
        num = x.T @ x
        normsq_co = (x**2).T @ centered.observed.astype(float)  # [i, j] = ||x_i||^2 over co-raters
        denom = np.sqrt(normsq_co * normsq_co.T)
    with np.errstate(divide="ignore", invalid="ignore"):
        sims = np.where(denom > 0.0, num / np.where(denom > 0.0, denom, 1.0), 0.0)
    sims = np.round(sims, SIMILARITY_DECIMALS)
    sims = np.triu(sims) + np.triu(sims, 1).T
    # pin the diagonal: self-similarity is 1 by definition unless the column is degenerate
    norms = np.sqrt(np.einsum("ui,ui->i", x, x))
    np.fill_diagonal(sims, np.where(norms > 0.0, 1.0, 0.0))
    return SimilarityTable(list(centered.components), sims)


def top_n_neighbors(sims: SimilarityTable, i: str, n: int) -> NeighborSet:
    """Up to n components with strictly positive similarity to i, best first,
    ties broken by ascending component index; never includes i itself."""
    if n < 1:
        raise ValueError("n must be >= 1")
    idx = {c: k for k, c in enumerate(sims.components)}
    if i not in idx:
        raise KeyError(f"unknown component {i!r}")
    row = sims.values[idx[i]]
    candidates = [
        (component, float(row[k]))
        for k, component in enumerate(sims.components)
        if component != i and row[k] > 0.0
    ]
    candidates.sort(key=lambda item: (-item[1], idx[item[0]]))
    return NeighborSet(i, candidates[:n])


def predict_missing(user: str, i: str, neighbors: NeighborSet, centered: CenteredMatrix) -> float:
    """Similarity-weighted mean of the neighbors' centered ratings; 0 when the
    neighbor set is empty."""
    if not neighbors.neighbors:
        return 0.0
    u = centered.users.index(user)
    num = 0.0
    den = 0.0
    for component, sim in neighbors.neighbors:
        num += sim * float(centered.values[u, centered.component_index(component)])
        den += sim
    return num / den


def complete_matrix(
    matrix: RatingMatrix,
    n_neighbors: int = DEFAULT_NEIGHBORS,
    variant: str = "all_users",
) -> CompletedMatrix:
    """Fill every missing cell with max(0, prediction + component mean)."""
    if not matrix.users or not matrix.components:
        raise ValueError("rating matrix is empty")
    centered = mean_center(matrix)
    sims = similarity_table(centered, variant)
    values, observed = _as_arrays(matrix)
    completed = values.copy()
    for k, component in enumerate(matrix.components):
        missing = ~observed[:, k]
        if not missing.any():
            continue
        neighbors = top_n_neighbors(sims, component, n_neighbors)
        if neighbors.neighbors:
            nbr_idx = [centered.component_index(c) for c, _ in neighbors.neighbors]
            weights = np.array([s for _, s in neighbors.neighbors])
            predictions = centered.values[:, nbr_idx] @ weights / weights.sum()
        else:
            predictions = np.zeros(len(matrix.users))
        completed[missing, k] = np.maximum(0.0, predictions[missing] + centered.means[k])
    return CompletedMatrix(list(matrix.users), list(matrix.components), completed, observed)


def frequency_scores(completed: CompletedMatrix) -> FrequencyScores:
    """Per-component score: column sum over users divided by the component
    count, then min-max rescaled into [0, 1] (all-equal collapses to 0.5)."""
    if not completed.components:
        raise ValueError("completed matrix is empty")
    raw = completed.values.sum(axis=0) / len(completed.components)
    lo, hi = float(raw.min()), float(raw.max())
    if hi > lo:
        scaled = (raw - lo) / (hi - lo)
    else:
        scaled = np.full_like(raw, 0.5)
    return FrequencyScores(
        list(completed.components),
        {c: float(v) for c, v in zip(completed.components, raw)},
        {c: float(v) for c, v in zip(completed.components, scaled)},
    )


def write_completed_matrix(path: str | Path, completed: CompletedMatrix, *, seed: int | None = None) -> None:
    def rows():
        for u, user in enumerate(completed.users):
            for k, comp in enumerate(completed.components):
                flag = "observed" if completed.observed[u, k] else "predicted"
                yield user, comp, tableio.format_float(completed.values[u, k]), flag

    tableio.write_table(path, COMPLETED_HEADER, rows(), seed=seed)


def write_frequency_scores(path: str | Path, scores: FrequencyScores, *, seed: int | None = None) -> None:
    rows = (
        (c, tableio.format_float(scores.raw[c]), tableio.format_float(scores.scaled[c]))
        for c in scores.components
    )
    tableio.write_table(path, FREQUENCY_HEADER, rows, seed=seed)


def read_frequency_scores(path: str | Path) -> FrequencyScores:
    components: list[str] = []
    raw: dict[str, float] = {}
    scaled: dict[str, float] = {}
    for line_no, fields in tableio.read_table(path, FREQUENCY_HEADER):
        if len(fields) != 3:
            raise InputError(f"expected 3 fields, found {len(fields)}", path=str(path), line=line_no)
        comp, f_raw, f_scaled = fields
        if comp in raw:
            raise InputError(f"duplicate component {comp!r}", path=str(path), line=line_no)
        components.append(comp)
        raw[comp] = tableio.parse_float(f_raw, path=path, line=line_no, column="f_raw")
        value = tableio.parse_float(f_scaled, path=path, line=line_no, column="f_scaled")
        if not 0.0 <= value <= 1.0:
            raise InputError(f"f_scaled out of [0,1]: {value}", path=str(path), line=line_no)
        scaled[comp] = value
    return FrequencyScores(components, raw, scaled)
