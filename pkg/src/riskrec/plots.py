"""Figure rendering for the evaluation report path."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .evaluate import BudgetReport

_LABELS = {"ch": "T_ch", "mfm": "T_mfm", "random": "T_r", "greedy": "T_g", "hcf": "T_hcf"}
_STYLES = {"ch": "s-", "mfm": "^-", "random": "d--", "greedy": "v-", "hcf": "o-"}


def render_budget_curves(report: BudgetReport, path: str | Path, *, title: str | None = None) -> Path:
    """Write the NAPFD-vs-budget line chart alongside the delimited report."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for technique in ("ch", "mfm", "random", "greedy", "hcf"):
        per_budget = report.values.get(technique)
        if not per_budget:
            continue
        budgets = [b for b in report.budgets if b in per_budget]
        ax.plot(
            budgets,
            [per_budget[b] for b in budgets],
            _STYLES[technique],
            label=_LABELS[technique],
            markersize=4,
        )
    ax.set_xlabel("Test execution budget (%)")
    ax.set_ylabel("NAPFD")
    ax.set_ylim(0.0, 1.0)
    ax.grid(True, alpha=0.3)
    ax.legend(loc="lower right", fontsize=9)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    # fixed metadata keeps the PNG bytes reproducible run to run
    fig.savefig(path, dpi=150, metadata={"Software": "riskrec"})
    plt.close(fig)
    return path
