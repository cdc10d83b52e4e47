"""Command-line behaviour: exit codes, seeds, dry runs and byte-stable outputs."""

import json
import subprocess
import sys
import time
from importlib import resources

import pytest

from fracbayes.cli import EXIT_ASSERTION, EXIT_CONFIG, EXIT_OK, EXIT_RUNTIME, main
from fracbayes.config import SEED_ENV

SIMULATE = {
    "design": {"kind": "gaussian_iso"},
    "prior": {"kind": "student"},
    "sampler": {"kind": "gibbs", "alpha": 0.9, "iterations": 200, "burn_in": 50},
    "simulate": {"n": 30, "d": 8, "s_star": 2, "sigma0": 0.5, "functional_m": 1000},
    "output_dir": "out",
}

RATE = {
    "sampler": {"kind": "gibbs", "alpha": 0.9, "iterations": 150, "burn_in": 50},
    "study": {
        "type": "rate",
        "n_grid": [20, 40, 80],
        "d_grid": [100],
        "s_grid": [1],
        "sigma0": 0.3,
        "replications": 3,
        "functional_m": 1000,
        "max_draws": 50,
    },
    "output_dir": "rate",
}


def packaged(name):
    return str(resources.files("fracbayes") / "configs" / name)


@pytest.fixture
def workdir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    monkeypatch.delenv(SEED_ENV, raising=False)
    return tmp_path


def write(path, doc):
    path.write_text(json.dumps(doc))
    return str(path)


def with_changes(doc, **sections):
    out = json.loads(json.dumps(doc))
    for key, value in sections.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key].update(value)
        else:
            out[key] = value
    return out


class TestSimulate:
    """The ``simulate`` command."""

    def test_exit_ok_and_outputs(self, workdir):
        assert main(["simulate", write(workdir / "c.json", SIMULATE)]) == EXIT_OK
        summary = json.loads((workdir / "out" / "summary.json").read_text())
        assert summary["draws"] == 150 and summary["n"] == 30
        lines = (workdir / "out" / "functionals.csv").read_bytes().split(b"\r\n")
        assert lines[0] == b"functional,mean,mcse" and len(lines) == 5

    def test_reruns_byte_identical(self, workdir):
        cfg = write(workdir / "c.json", SIMULATE)
        main(["simulate", cfg])
        first = {p.name: p.read_bytes() for p in (workdir / "out").iterdir()}
        main(["simulate", cfg])
        assert first == {p.name: p.read_bytes() for p in (workdir / "out").iterdir()}

    def test_alpha_out_of_range_names_field(self, workdir, capsys):
        doc = with_changes(SIMULATE, sampler={"alpha": 1.5})
        assert main(["simulate", write(workdir / "c.json", doc)]) == EXIT_CONFIG
        assert "sampler.alpha" in capsys.readouterr().err

    def test_unknown_key(self, workdir, capsys):
        doc = with_changes(SIMULATE, bogus=1)
        assert main(["simulate", write(workdir / "c.json", doc)]) == EXIT_CONFIG
        assert "bogus" in capsys.readouterr().err

    def test_bad_json(self, workdir):
        (workdir / "c.json").write_text("{not json")
        assert main(["simulate", str(workdir / "c.json")]) == EXIT_CONFIG

    def test_missing_config_file(self, workdir):
        assert main(["simulate", str(workdir / "absent.json")]) == EXIT_CONFIG

    def test_missing_output_parent(self, workdir):
        doc = with_changes(SIMULATE, output_dir=str(workdir / "no" / "such" / "dir"))
        assert main(["simulate", write(workdir / "c.json", doc)]) == EXIT_CONFIG
        assert not (workdir / "no").exists()

    def test_dry_run_writes_nothing(self, workdir, capsys):
        assert main(["simulate", write(workdir / "c.json", SIMULATE), "--dry-run"]) == EXIT_OK
        assert not (workdir / "out").exists()
        assert json.loads(capsys.readouterr().out)["command"] == "simulate"

    def test_seed_flag_and_environment(self, workdir, capsys, monkeypatch):
        cfg = write(workdir / "c.json", SIMULATE)
        main(["simulate", cfg, "--dry-run", "--seed", "7"])
        assert json.loads(capsys.readouterr().out)["base_seed"] == 7
        monkeypatch.setenv(SEED_ENV, "11")
        main(["simulate", cfg, "--dry-run"])
        assert json.loads(capsys.readouterr().out)["base_seed"] == 11
        main(["simulate", cfg, "--dry-run", "--seed", "5"])
        assert json.loads(capsys.readouterr().out)["base_seed"] == 5

    def test_bad_seed_environment(self, workdir, monkeypatch):
        monkeypatch.setenv(SEED_ENV, "abc")
        assert main(["simulate", write(workdir / "c.json", SIMULATE), "--dry-run"]) == EXIT_CONFIG

    def test_seed_changes_output(self, workdir):
        cfg = write(workdir / "c.json", SIMULATE)
        main(["simulate", cfg, "--seed", "1"])
        a = (workdir / "out" / "summary.json").read_bytes()
        main(["simulate", cfg, "--seed", "2"])
        assert a != (workdir / "out" / "summary.json").read_bytes()

    def test_overrides(self, workdir, capsys):
        doc = with_changes(SIMULATE, overrides={"simulate.n": 40})
        main(["simulate", write(workdir / "c.json", doc), "--dry-run"])
        assert json.loads(capsys.readouterr().out)["n"] == 40

    def test_tiny_c1_is_runtime_failure(self, workdir, capsys):
        doc = with_changes(SIMULATE, prior={"kind": "student", "c1": 1e-9})
        assert main(["simulate", write(workdir / "c.json", doc)]) == EXIT_RUNTIME
        assert "runtime failure" in capsys.readouterr().err

    def test_packaged_config_dry_run(self, workdir):
        assert main(["simulate", packaged("simulate_minimal.json"), "--dry-run"]) == EXIT_OK

    def test_bad_jobs(self, workdir):
        assert main(["simulate", write(workdir / "c.json", SIMULATE), "--jobs", "0"]) == EXIT_CONFIG

    def test_unknown_command(self):
        assert main(["frobnicate"]) == EXIT_CONFIG


class TestVerifyLemmas:
    """The ``verify-lemmas`` command."""

    def test_only_one_row(self, workdir, capsys):
        cfg = write(workdir / "l.json", {"output_dir": "lem"})
        assert main(["verify-lemmas", cfg, "--only", "A.7"]) == EXIT_OK
        rows = (workdir / "lem" / "lemmas.csv").read_text().splitlines()
        assert rows[0] == "lemma_id,lhs,rhs,margin,passed,se,digest"
        assert len(rows) == 2 and rows[1].startswith("A.7,")
        assert "A.7," in capsys.readouterr().out

    def test_precondition_skip_exits_ok(self, workdir):
        cfg = write(workdir / "l.json", {"lemmas": {"suite": {"A.3": [{"epsilon_grid": [0.6]}]}}, "output_dir": "lem"})
        assert main(["verify-lemmas", cfg, "--only", "A.3"]) == EXIT_OK
        row = (workdir / "lem" / "lemmas.csv").read_text().splitlines()[1]
        assert "precondition-skipped" in row

    def test_unknown_only_id(self, workdir):
        cfg = write(workdir / "l.json", {"output_dir": "lem"})
        assert main(["verify-lemmas", cfg, "--only", "Z.9"]) == EXIT_CONFIG

    def test_unknown_suite_id(self, workdir):
        cfg = write(workdir / "l.json", {"lemmas": {"suite": {"Z.9": [{}]}}, "output_dir": "lem"})
        assert main(["verify-lemmas", cfg]) == EXIT_CONFIG

    def test_dry_run_lists_checks(self, workdir, capsys):
        assert main(["verify-lemmas", packaged("lemmas_default.json"), "--dry-run"]) == EXIT_OK
        out = capsys.readouterr().out
        assert "A.1:" in out and "A.9:" in out
        assert not (workdir / "fracbayes_lemmas").exists()


class TestStudies:
    """The ``rate-study`` and ``misspec-study`` commands."""

    def test_rate_smoke_under_a_minute(self, workdir, capsys):
        start = time.perf_counter()
        code = main(["rate-study", packaged("rate_smoke.json"), "--jobs", "1"])
        elapsed = time.perf_counter() - start
        assert code == EXIT_OK and elapsed < 60
        for name in ("cells.csv", "slopes.csv", "report.md"):
            assert (workdir / "fracbayes_rate_smoke" / name).is_file()
        assert "PASS  all cells completed" in capsys.readouterr().out

    def test_dry_run_counts_chains(self, workdir, capsys):
        assert main(["rate-study", packaged("rate_n_sweep.json"), "--dry-run"]) == EXIT_OK
        assert "replications" in capsys.readouterr().out
        assert not (workdir / "fracbayes_rate_n_sweep").exists()

    def test_impossible_assertion_exits_one(self, workdir):
        doc = json.loads(json.dumps(RATE))
        doc["study"]["assertions"] = {"slope_n": {"metric": "sq_l2_error", "range": [5.0, 6.0]}}
        assert main(["rate-study", write(workdir / "r.json", doc), "--jobs", "1"]) == EXIT_ASSERTION

    def test_wrong_study_type(self, workdir):
        assert main(["misspec-study", write(workdir / "r.json", RATE), "--dry-run"]) == EXIT_CONFIG

    def test_invalid_grid(self, workdir, capsys):
        doc = json.loads(json.dumps(RATE))
        doc["study"]["s_grid"] = [200]
        assert main(["rate-study", write(workdir / "r.json", doc), "--dry-run"]) == EXIT_CONFIG
        assert "study" in capsys.readouterr().err

    def test_misspec_dry_run(self, workdir):
        assert main(["misspec-study", packaged("misspec_sin.json"), "--dry-run"]) == EXIT_OK


class TestCalibrate:
    """The ``calibrate`` command."""

    def test_dry_run(self, workdir, capsys):
        assert main(["calibrate", "--dry-run", "--output", str(workdir / "k.json")]) == EXIT_OK
        assert "would fit" in capsys.readouterr().out
        assert not (workdir / "k.json").exists()

    def test_missing_output_parent(self, workdir):
        assert main(["calibrate", "--dry-run", "--output", str(workdir / "no" / "k.json")]) == EXIT_CONFIG


class TestEntryPoint:
    """``python -m fracbayes.cli`` returns the documented exit codes."""

    def test_module_exit_code(self, workdir):
        doc = with_changes(SIMULATE, sampler={"alpha": 1.5})
        proc = subprocess.run(
            [sys.executable, "-m", "fracbayes.cli", "simulate", write(workdir / "c.json", doc)],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == EXIT_CONFIG and "sampler.alpha" in proc.stderr

    def test_version(self, capsys):
        assert main(["--version"]) == EXIT_OK
        assert "fracbayes" in capsys.readouterr().out
