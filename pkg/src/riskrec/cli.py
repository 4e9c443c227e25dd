"""Batch pipeline driver.

Subcommands mirror the stage graph: ingest -> complete -> risk -> score ->
prioritize -> evaluate, plus ``synth`` to generate a self-contained synthetic
project and ``pipeline`` to run every stage in order. Configuration comes
from a flat ``key = value`` manifest (see ``riskrec.toml`` written by synth)
and/or flags; flags win. All randomness flows from the single config seed:
stage-level seeds derive as sha256("riskrec:<base>:<label>") and the random
ordering evaluated in the budget sweep uses that derived seed plus the run
index. Exit codes: 0 success, 1 input/config error, 2 internal invariant
violation.
"""

from __future__ import annotations

import argparse
import hashlib
import sys
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Sequence

from . import __version__, cf, changerisk, evaluate, ingest, plots, prioritize, synth, tableio
from .errors import InputError, InvariantError

ARTIFACTS = {
    "rating": "rating_matrix.csv",
    "completed": "completed_matrix.csv",
    "frequency": "frequency_scores.csv",
    "risk": "risk_scores.csv",
    "cv_report": "cv_report.json",
    "model": "risk_model.json",
    "risk_table": "component_risk.csv",
    "suites": "prioritized_suites.csv",
    "report_csv": "napfd_report.csv",
    "report_json": "napfd_report.json",
    "figure": "napfd_budgets.png",
}

_PATH_KEYS = (
    "sessions",
    "component_map",
    "change_metrics",
    "coverage",
    "faults",
    "rating",
    "frequency_scores",
    "risk_scores",
    "risk_table",
    "suites",
    "out_dir",
)


@dataclass
class PipelineConfig:
    sessions: str | None = None
    component_map: str | None = None
    change_metrics: str | None = None
    coverage: str | None = None
    faults: str | None = None
    rating: str | None = None
    frequency_scores: str | None = None
    risk_scores: str | None = None
    risk_table: str | None = None
    suites: str | None = None
    out_dir: str = "out"
    application: str = "app"
    n_neighbors: int = 2
    budgets: list[int] = field(default_factory=lambda: list(evaluate.DEFAULT_BUDGETS))
    seed: int = 0
    random_runs: int = 10
    cv_folds: int = 10
    cv_repeats: int = 100
    similarity: str = "all_users"
    strategy: str = "deferred"

    def validate(self) -> None:
        if self.n_neighbors < 1:
            raise InputError("n_neighbors must be >= 1")
        if self.similarity not in cf.SIMILARITY_VARIANTS:
            raise InputError(f"similarity must be one of {cf.SIMILARITY_VARIANTS}")
        if self.strategy not in prioritize.ORDERING_STRATEGIES:
            raise InputError(f"strategy must be one of {prioritize.ORDERING_STRATEGIES}")
        if self.cv_folds < 2:
            raise InputError("cv_folds must be >= 2")
        if self.cv_repeats < 1 or self.random_runs < 1:
            raise InputError("cv_repeats and random_runs must be >= 1")
        if not self.budgets:
            raise InputError("budgets must not be empty")
        for b in self.budgets:
            if not 0 < b <= 100:
                raise InputError(f"budgets must be percentages in (0, 100], got {b}")

    def artifact(self, name: str) -> Path:
        return Path(self.out_dir) / ARTIFACTS[name]

    def input_path(self, key: str, fallback_artifact: str | None = None) -> Path:
        configured = getattr(self, key)
        if configured:
            return Path(configured)
        if fallback_artifact is not None:
            return self.artifact(fallback_artifact)
        raise InputError(f"config key {key!r} is required for this stage")


def derive_seed(base: int, label: str) -> int:
    """Stable per-stage seed from the single config seed."""
    digest = hashlib.sha256(f"riskrec:{base}:{label}".encode()).digest()
    return int.from_bytes(digest[:8], "big") % (2**63)


def _parse_scalar(text: str):
    text = text.strip()
    if text.startswith(("'", '"')) and text.endswith(text[0]) and len(text) >= 2:
        return text[1:-1]
    for caster in (int, float):
        try:
            return caster(text)
        except ValueError:
            continue
    if text.lower() in ("true", "false"):
        return text.lower() == "true"
    return text


def parse_manifest(path: str | Path) -> dict:
    """Flat key = value manifest; '#' comments, bracketed or comma lists."""
    path = Path(path)
    if not path.exists():
        raise InputError("manifest not found", path=str(path))
    values: dict = {}
    for line_no, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise InputError("expected key = value", path=str(path), line=line_no)
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if value.startswith("[") and value.endswith("]"):
            value = value[1:-1]
            values[key] = [_parse_scalar(part) for part in value.split(",") if part.strip()]
        elif "," in value and key == "budgets":
            values[key] = [_parse_scalar(part) for part in value.split(",") if part.strip()]
        else:
            values[key] = _parse_scalar(value)
    return values


def load_config(manifest: str | None, overrides: dict) -> PipelineConfig:
    cfg = PipelineConfig()
    known = {f.name for f in fields(PipelineConfig)}
    if manifest:
        base = Path(manifest).parent
        for key, value in parse_manifest(manifest).items():
            if key not in known:
                raise InputError(f"unknown config key {key!r}", path=manifest)
            if key in _PATH_KEYS and isinstance(value, str):
                value = str((base / value))
            cfg = replace(cfg, **{key: value})
    for key, value in overrides.items():
        if value is None:
            continue
        cfg = replace(cfg, **{key: value})
    if isinstance(cfg.budgets, list):
        cfg.budgets = [int(b) for b in cfg.budgets]
    cfg.validate()
    return cfg


def stage_ingest(cfg: PipelineConfig) -> str:
    sessions_path = cfg.input_path("sessions")
    map_path = cfg.input_path("component_map")
    sessions = ingest.load_session_log(sessions_path)
    component_map = ingest.load_component_map(map_path)
    events, unmapped = ingest.map_interactions(sessions, component_map)
    matrix = ingest.build_rating_matrix(events)
    out = cfg.artifact("rating")
    ingest.write_rating_matrix(out, matrix, seed=cfg.seed)
    return (
        f"ingest: {len(sessions)} sessions, {len(events)} events"
        f" ({unmapped} unmapped) -> {out}"
    )


def stage_complete(cfg: PipelineConfig) -> str:
    rating_path = cfg.input_path("rating", "rating")
    matrix = ingest.read_rating_matrix(rating_path)
    if not matrix.users:
        raise InputError("rating matrix is empty", path=str(rating_path))
    completed = cf.complete_matrix(matrix, cfg.n_neighbors, cfg.similarity)
    scores = cf.frequency_scores(completed)
    out_completed = cfg.artifact("completed")
    out_frequency = cfg.artifact("frequency")
    cf.write_completed_matrix(out_completed, completed, seed=cfg.seed)
    cf.write_frequency_scores(out_frequency, scores, seed=cfg.seed)
    predicted = int((~completed.observed).sum())
    return (
        f"complete: {len(matrix.users)}x{len(matrix.components)} matrix,"
        f" {predicted} cells predicted -> {out_completed}, {out_frequency}"
    )


def stage_risk(cfg: PipelineConfig) -> str:
    metrics_path = cfg.input_path("change_metrics")
    records = changerisk.load_change_metrics(metrics_path)
    labeled = [r for r in records if r.label is not None]
    if len(labeled) < cfg.cv_folds:
        raise InputError(
            f"need at least {cfg.cv_folds} labeled records for {cfg.cv_folds}-fold CV,"
            f" found {len(labeled)}",
            path=str(metrics_path),
        )
    labels = [1.0 if r.label else 0.0 for r in labeled]
    model = changerisk.fit_linear_model(labeled, labels)
    scores = changerisk.risk_scores(model, records)
    cv = changerisk.cross_validate(
        labeled, labels, folds=cfg.cv_folds, repeats=cfg.cv_repeats, seed=derive_seed(cfg.seed, "risk.cv")
    )
    out_risk = cfg.artifact("risk")
    changerisk.write_risk_scores(out_risk, scores, seed=cfg.seed)
    tableio.write_json(cfg.artifact("cv_report"), cv.as_dict(), seed=cfg.seed)
    tableio.write_json(
        cfg.artifact("model"),
        {
            "coefficients": model.coefficients,
            "intercept": model.intercept,
            "standardization": {k: list(v) for k, v in model.standardization.items()},
            "metric_correlations": model.metric_correlations,
        },
        seed=cfg.seed,
    )
    return (
        f"risk: {len(records)} components, {len(labeled)} labeled,"
        f" CV PC={cv.pc:.2f}% TP={cv.tp} FP={cv.fp} -> {out_risk}"
    )


def stage_score(cfg: PipelineConfig) -> str:
    frequency = cf.read_frequency_scores(cfg.input_path("frequency_scores", "frequency"))
    risk = changerisk.read_risk_scores(cfg.input_path("risk_scores", "risk"))
    table = prioritize.combine_scores(frequency, risk)
    out = cfg.artifact("risk_table")
    prioritize.write_risk_table(out, table, seed=cfg.seed)
    top = prioritize.top_n_components(table, min(3, len(table.components)))
    return f"score: {len(table.components)} components, top {top} -> {out}"


def stage_prioritize(cfg: PipelineConfig) -> str:
    table = prioritize.read_risk_table(cfg.input_path("risk_table", "risk_table"))
    cov = prioritize.read_coverage_matrix(cfg.input_path("coverage"))
    random_seed = derive_seed(cfg.seed, "prioritize.random")
    suites = [
        prioritize.order_tests_hcf(table, cov, cfg.strategy),
        prioritize.order_tests_baseline("ch", table=table, cov=cov, strategy=cfg.strategy),
        prioritize.order_tests_baseline("mfm", table=table, cov=cov, strategy=cfg.strategy),
        prioritize.order_tests_baseline("random", cov=cov, seed=random_seed),
        prioritize.order_tests_baseline("greedy", cov=cov),
    ]
    out = cfg.artifact("suites")
    prioritize.write_suites(out, suites, seed=cfg.seed)
    return f"prioritize: {len(cov.tests)} tests x {len(suites)} techniques -> {out}"


def stage_evaluate(cfg: PipelineConfig) -> str:
    suites = prioritize.read_suites(cfg.input_path("suites", "suites"))
    fm = evaluate.read_fault_matrix(cfg.input_path("faults"))
    for suite in suites:
        if sorted(suite.order) != sorted(fm.tests):
            raise InputError(
                f"suite {suite.technique!r} is not a permutation of the fault matrix tests"
            )
    report = evaluate.budget_sweep(suites, fm, cfg.budgets, cfg.random_runs)
    out_csv = cfg.artifact("report_csv")
    out_json = cfg.artifact("report_json")
    out_fig = cfg.artifact("figure")
    evaluate.write_report_csv(out_csv, report, application=cfg.application, seed=cfg.seed)
    evaluate.write_report_json(out_json, report, application=cfg.application, seed=cfg.seed)
    plots.render_budget_curves(report, out_fig, title=cfg.application)
    return (
        f"evaluate: {len(suites)} techniques x {len(cfg.budgets)} budgets"
        f" -> {out_csv}, {out_json}, {out_fig}"
    )


def stage_synth(args: argparse.Namespace) -> str:
    config = synth.SynthConfig(
        users=args.users,
        components=args.components,
        tests=args.tests,
        faults=args.faults,
        churn_usage_fault_correlation=args.correlation,
        seed=args.seed,
    )
    try:
        config.validate()
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    data = synth.synth_generate(config)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    sessions_path = out_dir / "sessions.csv"
    with sessions_path.open("w", encoding="utf-8") as handle:
        handle.write(tableio.stamp(config.seed) + "\n")
        for line in synth.session_lines(data.ratings):
            handle.write(line + "\n")
    component_map = synth.component_map_for(data.ratings.components)
    tableio.write_table(
        out_dir / "component_map.csv",
        ingest.COMPONENT_MAP_HEADER,
        sorted(component_map.entries.items()),
        seed=config.seed,
    )
    changerisk.write_change_metrics(out_dir / "change_metrics.csv", data.change_metrics, seed=config.seed)
    prioritize.write_coverage_matrix(out_dir / "coverage.csv", data.coverage, seed=config.seed)
    evaluate.write_fault_matrix(out_dir / "faults.csv", data.faults, seed=config.seed)
    ingest.write_rating_matrix(out_dir / "rating_reference.csv", data.ratings, seed=config.seed)

    manifest = out_dir / "riskrec.toml"
    manifest.write_text(
        "\n".join(
            [
                tableio.stamp(config.seed),
                'sessions = "sessions.csv"',
                'component_map = "component_map.csv"',
                'change_metrics = "change_metrics.csv"',
                'coverage = "coverage.csv"',
                'faults = "faults.csv"',
                'application = "synthetic"',
                f"seed = {config.seed}",
                "",
            ]
        ),
        encoding="utf-8",
    )
    return (
        f"synth: {config.users} users, {config.components} components,"
        f" {config.tests} tests, {config.faults} faults -> {out_dir}"
    )


_PIPELINE_STAGES = ("ingest", "complete", "risk", "score", "prioritize", "evaluate")


def _validate_input_paths(cfg: PipelineConfig) -> None:
    # every configured input must exist before the first stage runs
    for key in ("sessions", "component_map", "change_metrics", "coverage", "faults",
                "frequency_scores", "risk_scores"):
        configured = getattr(cfg, key)
        if configured and not Path(configured).exists():
            raise InputError("file not found", path=configured)


def run_pipeline(cfg: PipelineConfig) -> list[str]:
    _validate_input_paths(cfg)
    summaries: list[str] = []
    if cfg.sessions:
        summaries.append(stage_ingest(cfg))
        summaries.append(stage_complete(cfg))
    elif cfg.frequency_scores:
        summaries.append(f"ingest/complete: skipped, using {cfg.frequency_scores}")
    else:
        raise InputError("pipeline needs sessions + component_map, or frequency_scores")
    if cfg.change_metrics:
        summaries.append(stage_risk(cfg))
    elif cfg.risk_scores:
        summaries.append(f"risk: skipped, using {cfg.risk_scores}")
    else:
        raise InputError("pipeline needs change_metrics, or risk_scores")
    summaries.append(stage_score(cfg))
    summaries.append(stage_prioritize(cfg))
    if cfg.faults:
        summaries.append(stage_evaluate(cfg))
    else:
        summaries.append("evaluate: skipped (no fault matrix configured)")
    return summaries


def _add_config_flags(parser: argparse.ArgumentParser, *names: str) -> None:
    flags = {
        "sessions": ("--sessions", str, "session log CSV"),
        "component_map": ("--component-map", str, "interaction-to-component map CSV"),
        "change_metrics": ("--change-metrics", str, "change metrics CSV"),
        "coverage": ("--coverage", str, "coverage matrix CSV"),
        "faults": ("--faults", str, "fault matrix CSV"),
        "rating": ("--rating", str, "rating matrix CSV"),
        "frequency_scores": ("--frequency", str, "frequency scores CSV"),
        "risk_scores": ("--risk", str, "risk scores CSV"),
        "risk_table": ("--risk-table", str, "component risk table CSV"),
        "suites": ("--suites", str, "prioritized suites CSV"),
        "out_dir": ("--out-dir", str, "output directory"),
        "application": ("--application", str, "application label for reports"),
        "n_neighbors": ("--n-neighbors", int, "neighbor count for CF completion"),
        "seed": ("--seed", int, "base seed for all randomness"),
        "random_runs": ("--random-runs", int, "random permutations averaged per budget"),
        "cv_folds": ("--cv-folds", int, "cross-validation folds"),
        "cv_repeats": ("--cv-repeats", int, "cross-validation repeats"),
        "similarity": ("--similarity", str, "all_users or co_rated"),
        "strategy": ("--strategy", str, "deferred, total or additional"),
    }
    parser.add_argument("--config", help="flat key = value manifest file")
    for name in names:
        if name == "budgets":
            parser.add_argument("--budgets", dest="budgets", help="comma-separated budget percentages")
            continue
        flag, caster, help_text = flags[name]
        parser.add_argument(flag, dest=name, type=caster, help=help_text)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="riskrec",
        description="Usage- and change-risk-driven regression test prioritization",
    )
    parser.add_argument("--version", action="version", version=f"riskrec {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="command")

    p = sub.add_parser("ingest", help="sessions + component map -> rating matrix")
    _add_config_flags(p, "sessions", "component_map", "out_dir", "seed")
    p.set_defaults(stage="ingest")

    p = sub.add_parser("complete", help="rating matrix -> completed matrix + frequency scores")
    _add_config_flags(p, "rating", "out_dir", "seed", "n_neighbors", "similarity")
    p.set_defaults(stage="complete")

    p = sub.add_parser("risk", help="change metrics -> risk scores + CV report")
    _add_config_flags(p, "change_metrics", "out_dir", "seed", "cv_folds", "cv_repeats")
    p.set_defaults(stage="risk")

    p = sub.add_parser("score", help="frequency + risk scores -> combined component risk table")
    _add_config_flags(p, "frequency_scores", "risk_scores", "out_dir", "seed")
    p.set_defaults(stage="score")

    p = sub.add_parser("prioritize", help="risk table + coverage -> prioritized suites")
    _add_config_flags(p, "risk_table", "coverage", "out_dir", "seed", "strategy")
    p.set_defaults(stage="prioritize")

    p = sub.add_parser("evaluate", help="suites + fault matrix -> NAPFD report + figure")
    _add_config_flags(
        p, "suites", "faults", "out_dir", "seed", "random_runs", "application", "budgets"
    )
    p.set_defaults(stage="evaluate")

    p = sub.add_parser("synth", help="generate a synthetic project directory")
    p.add_argument("--users", type=int, default=20)
    p.add_argument("--components", type=int, default=50)
    p.add_argument("--tests", type=int, default=40)
    p.add_argument("--faults", type=int, default=10)
    p.add_argument("--correlation", type=float, default=0.8, help="churn/usage fault correlation")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", default="out")
    p.set_defaults(stage="synth")

    p = sub.add_parser("pipeline", help="run every stage in order")
    _add_config_flags(
        p,
        "sessions",
        "component_map",
        "change_metrics",
        "coverage",
        "faults",
        "frequency_scores",
        "risk_scores",
        "out_dir",
        "seed",
        "n_neighbors",
        "similarity",
        "strategy",
        "random_runs",
        "cv_folds",
        "cv_repeats",
        "application",
        "budgets",
    )
    p.set_defaults(stage="pipeline")

    return parser


_STAGE_HANDLERS = {
    "ingest": stage_ingest,
    "complete": stage_complete,
    "risk": stage_risk,
    "score": stage_score,
    "prioritize": stage_prioritize,
    "evaluate": stage_evaluate,
}


def _config_from_args(args: argparse.Namespace) -> PipelineConfig:
    overrides = {
        f.name: getattr(args, f.name)
        for f in fields(PipelineConfig)
        if hasattr(args, f.name) and getattr(args, f.name) is not None
    }
    if "budgets" in overrides and isinstance(overrides["budgets"], str):
        try:
            overrides["budgets"] = [int(b) for b in overrides["budgets"].split(",") if b.strip()]
        except ValueError:
            raise InputError(f"cannot parse budgets {overrides['budgets']!r}") from None
    return load_config(getattr(args, "config", None), overrides)


def run(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors; those are input errors here
        return 0 if exc.code == 0 else 1
    if getattr(args, "stage", None) is None:
        parser.print_help()
        return 1
    try:
        if args.stage == "synth":
            print(stage_synth(args))
        elif args.stage == "pipeline":
            cfg = _config_from_args(args)
            for summary in run_pipeline(cfg):
                print(summary)
        else:
            cfg = _config_from_args(args)
            print(_STAGE_HANDLERS[args.stage](cfg))
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except InvariantError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - anything else is an internal defect
        print(f"internal error: {exc}", file=sys.stderr)
        return 2
    return 0


def main() -> int:
    return run()


if __name__ == "__main__":
    raise SystemExit(main())
