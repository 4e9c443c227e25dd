"""CLI subcommands: stage wiring, manifest handling, determinism, exit codes."""

from __future__ import annotations

import filecmp
import json
from pathlib import Path

import pytest

from riskrec import cli
from riskrec.errors import InputError

FIXTURE_DIR = Path(__file__).resolve().parent.parent / "fixtures" / "worked_example"


def run(*argv: str) -> int:
    return cli.run(list(argv))


def read_nonblank(path: Path) -> list[str]:
    return [l for l in path.read_text().splitlines() if l and not l.startswith("#")]


def assert_dirs_byte_identical(a: Path, b: Path) -> None:
    files_a = sorted(p.name for p in a.iterdir())
    files_b = sorted(p.name for p in b.iterdir())
    assert files_a == files_b
    for name in files_a:
        assert filecmp.cmp(a / name, b / name, shallow=False), f"{name} differs"


@pytest.fixture()
def synth_dir(tmp_path: Path) -> Path:
    out = tmp_path / "data"
    code = run(
        "synth", "--seed", "7", "--users", "12", "--components", "25",
        "--tests", "20", "--faults", "6", "--out-dir", str(out),
    )
    assert code == 0
    return out


class TestSynthCommand:
    def test_writes_all_artifacts_and_manifest(self, synth_dir):
        expected = {
            "sessions.csv", "component_map.csv", "change_metrics.csv",
            "coverage.csv", "faults.csv", "rating_reference.csv", "riskrec.toml",
        }
        assert {p.name for p in synth_dir.iterdir()} == expected

    def test_same_seed_byte_identical_directory(self, tmp_path, synth_dir):
        second = tmp_path / "data2"
        assert run(
            "synth", "--seed", "7", "--users", "12", "--components", "25",
            "--tests", "20", "--faults", "6", "--out-dir", str(second),
        ) == 0
        assert_dirs_byte_identical(synth_dir, second)

    def test_outputs_carry_seed_stamp(self, synth_dir):
        for name in ("sessions.csv", "coverage.csv", "faults.csv", "riskrec.toml"):
            first = (synth_dir / name).read_text().splitlines()[0]
            assert first.startswith("#") and "seed=7" in first

    def test_invalid_counts_exit_one(self, tmp_path, capsys):
        assert run("synth", "--users", "0", "--out-dir", str(tmp_path / "x")) == 1
        assert "users" in capsys.readouterr().err


class TestStageChain:
    def test_stages_run_in_sequence(self, synth_dir, tmp_path):
        out = tmp_path / "out"
        manifest = str(synth_dir / "riskrec.toml")
        base = ["--config", manifest, "--out-dir", str(out)]
        assert run("ingest", *base) == 0
        assert run("complete", *base) == 0
        assert run("risk", *base, "--cv-repeats", "5") == 0
        assert run("score", *base) == 0
        assert run("prioritize", *base) == 0
        assert run("evaluate", *base) == 0
        for artifact in cli.ARTIFACTS.values():
            assert (out / artifact).exists(), artifact

    def test_stage_rerun_is_byte_identical(self, synth_dir, tmp_path):
        out = tmp_path / "out"
        manifest = str(synth_dir / "riskrec.toml")
        base = ["--config", manifest, "--out-dir", str(out)]
        assert run("ingest", *base) == 0
        first = (out / "rating_matrix.csv").read_bytes()
        assert run("ingest", *base) == 0
        assert (out / "rating_matrix.csv").read_bytes() == first

    def test_cv_report_shape(self, synth_dir, tmp_path):
        out = tmp_path / "out"
        base = ["--config", str(synth_dir / "riskrec.toml"), "--out-dir", str(out)]
        assert run("risk", *base, "--cv-repeats", "3") == 0
        payload = json.loads((out / "cv_report.json").read_text())
        assert set(payload) >= {"pc", "tp", "fp", "folds", "repeats", "seed"}
        assert payload["folds"] == 10 and payload["repeats"] == 3


class TestPipelineCommand:
    def test_worked_example_reproduces_published_order(self, tmp_path):
        out = tmp_path / "out"
        assert run(
            "pipeline", "--config", str(FIXTURE_DIR / "riskrec.toml"), "--out-dir", str(out)
        ) == 0
        rows = read_nonblank(out / "prioritized_suites.csv")
        hcf_rows = [r for r in rows[1:] if r.split(",")[2] == "hcf"]
        ordered = [r.split(",")[1] for r in hcf_rows]
        assert ordered == ["T3", "T4", "T1", "T2", "T5"]

    def test_full_synthetic_pipeline_deterministic(self, synth_dir, tmp_path):
        out1, out2 = tmp_path / "o1", tmp_path / "o2"
        manifest = str(synth_dir / "riskrec.toml")
        for out in (out1, out2):
            assert run(
                "pipeline", "--config", manifest, "--out-dir", str(out), "--cv-repeats", "5"
            ) == 0
        assert_dirs_byte_identical(out1, out2)

    def test_report_and_figure_written(self, tmp_path):
        out = tmp_path / "out"
        assert run(
            "pipeline", "--config", str(FIXTURE_DIR / "riskrec.toml"), "--out-dir", str(out)
        ) == 0
        rows = read_nonblank(out / "napfd_report.csv")
        assert rows[0] == "application,budget_percent,t_ch,t_mfm,t_r,t_g,t_hcf"
        assert len(rows) == 11  # header + ten default budgets
        assert rows[1].startswith("worked-example,10,")
        assert (out / "napfd_budgets.png").stat().st_size > 0
        payload = json.loads((out / "napfd_report.json").read_text())
        assert payload["seed"] == 42

    def test_configured_paths_validated_before_stages_run(self, tmp_path, capsys):
        manifest = tmp_path / "riskrec.toml"
        manifest.write_text('coverage = "cov.csv"\n')
        out = tmp_path / "o"
        assert run("pipeline", "--config", str(manifest), "--out-dir", str(out)) == 1
        assert "cov.csv" in capsys.readouterr().err
        assert not out.exists()  # nothing ran

    def test_missing_entry_inputs_exit_one(self, tmp_path, capsys):
        manifest = tmp_path / "riskrec.toml"
        cov = tmp_path / "cov.csv"
        cov.write_text("component_id,T1\nc1,1\n")
        manifest.write_text('coverage = "cov.csv"\n')
        assert run("pipeline", "--config", str(manifest), "--out-dir", str(tmp_path / "o")) == 1
        assert "sessions" in capsys.readouterr().err


class TestErrorHandling:
    def test_unknown_subcommand_exits_one(self, capsys):
        assert run("optimize") == 1
        assert "usage" in capsys.readouterr().err.lower()

    def test_no_subcommand_prints_help(self, capsys):
        assert run() == 1
        assert "usage" in capsys.readouterr().out.lower()

    def test_missing_file_names_the_file(self, tmp_path, capsys):
        assert run(
            "ingest", "--sessions", "nope.csv", "--component-map", "also-nope.csv",
            "--out-dir", str(tmp_path),
        ) == 1
        assert "nope.csv" in capsys.readouterr().err

    def test_unknown_manifest_key_exits_one(self, tmp_path, capsys):
        manifest = tmp_path / "riskrec.toml"
        manifest.write_text("not_a_key = 5\n")
        assert run("score", "--config", str(manifest)) == 1
        assert "not_a_key" in capsys.readouterr().err

    def test_bad_config_value_exits_one(self, tmp_path, capsys):
        assert run(
            "evaluate", "--config", str(FIXTURE_DIR / "riskrec.toml"),
            "--out-dir", str(tmp_path), "--budgets", "0,50",
        ) == 1
        assert "budgets" in capsys.readouterr().err

    def test_internal_error_exits_two(self, synth_dir, tmp_path, monkeypatch, capsys):
        def boom(cfg):
            raise RuntimeError("wires crossed")

        monkeypatch.setitem(cli._STAGE_HANDLERS, "ingest", boom)
        code = run(
            "ingest", "--config", str(synth_dir / "riskrec.toml"), "--out-dir", str(tmp_path / "o")
        )
        assert code == 2
        assert "internal error" in capsys.readouterr().err

    def test_version_flag(self, capsys):
        assert run("--version") == 0
        assert "riskrec" in capsys.readouterr().out


class TestManifestParsing:
    def test_values_and_lists(self, tmp_path):
        manifest = tmp_path / "m.toml"
        manifest.write_text(
            "\n".join(
                [
                    "# comment",
                    'application = "demo"',
                    "seed = 9",
                    "budgets = [10, 30, 50]",
                    "similarity = co_rated",
                ]
            )
        )
        values = cli.parse_manifest(manifest)
        assert values == {
            "application": "demo",
            "seed": 9,
            "budgets": [10, 30, 50],
            "similarity": "co_rated",
        }

    def test_flags_override_manifest(self, tmp_path):
        manifest = tmp_path / "m.toml"
        manifest.write_text("seed = 9\n")
        cfg = cli.load_config(str(manifest), {"seed": 12})
        assert cfg.seed == 12

    def test_manifest_paths_resolve_relative_to_manifest(self, tmp_path):
        nested = tmp_path / "nested"
        nested.mkdir()
        manifest = nested / "m.toml"
        manifest.write_text('sessions = "logs.csv"\n')
        cfg = cli.load_config(str(manifest), {})
        assert cfg.sessions == str(nested / "logs.csv")

    def test_malformed_line_rejected(self, tmp_path):
        manifest = tmp_path / "m.toml"
        manifest.write_text("just some text\n")
        with pytest.raises(InputError):
            cli.parse_manifest(manifest)

    def test_derive_seed_stable_and_distinct(self):
        a = cli.derive_seed(7, "risk.cv")
        assert a == cli.derive_seed(7, "risk.cv")
        assert a != cli.derive_seed(7, "prioritize.random")
        assert a != cli.derive_seed(8, "risk.cv")
