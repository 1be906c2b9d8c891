import json
from pathlib import Path

import numpy as np
import pytest
import yaml

from smmevo import automaton as am
from smmevo import cli
from smmevo.config import ConfigError, RunConfig, config_from_mapping, load_config


class TestRunConfig:
    def test_defaults_valid(self):
        c = RunConfig(seed=1)
        assert c.kind == "evolve" and c.seed == 1

    def test_seed_generated_when_absent(self):
        c = RunConfig()
        assert isinstance(c.seed, int)

    def test_unknown_key_named(self):
        with pytest.raises(ConfigError, match="n_agnets"):
            config_from_mapping({"n_agnets": 10})

    @pytest.mark.parametrize("key,value,fragment", [
        ("kind", "train", "kind"),
        ("n_agents", 1, "n_agents"),
        ("burn_in", 300, "burn_in"),
        ("paradigm", "z", "paradigm"),
        ("game", "poker", "game"),
        ("sigma", -0.5, "mutation"),
        ("backend", "quantum", "engine"),
        ("dims", [1, 2], "dims"),
    ])
    def test_bad_values_name_offender(self, key, value, fragment):
        with pytest.raises(ConfigError, match=fragment):
            config_from_mapping({key: value, "seed": 0})

    def test_grouped_params_round_trip(self):
        c = RunConfig(sigma=0.25, backend="joint", seed=0)
        assert c.mutation_params().sigma == 0.25
        assert c.engine_params().backend == "joint"

    def test_yaml_and_json_loading(self, tmp_path):
        payload = {"kind": "evolve", "n_agents": 4, "generations": 10,
                   "burn_in": 2, "seed": 9}
        ypath = tmp_path / "run.yaml"
        ypath.write_text(yaml.safe_dump(payload))
        jpath = tmp_path / "run.json"
        jpath.write_text(json.dumps(payload))
        assert load_config(ypath).n_agents == 4
        assert load_config(jpath).seed == 9

    def test_load_error_names_file(self, tmp_path):
        path = tmp_path / "bad.yaml"
        path.write_text("n_agents: [unclosed")
        with pytest.raises(ConfigError, match="bad.yaml"):
            load_config(path)

    def test_overrides_beat_file(self, tmp_path):
        path = tmp_path / "run.yaml"
        path.write_text("n_agents: 4\nseed: 1\ngenerations: 10\nburn_in: 0\n")
        assert load_config(path, n_agents=6).n_agents == 6

    def test_custom_game_mapping(self):
        c = config_from_mapping({"seed": 0, "game": {
            "name": "pd2", "payoff": {"CC": [3, 3], "CD": [1, 4],
                                      "DC": [4, 1], "DD": [2, 2]}}})
        assert c.mutation_params() is not None


def small_run_args(tmp_path, **extra):
    args = ["evolve", "--n-agents", "4", "--generations", "6", "--trials", "2",
            "--burn-in", "2", "--seed", "5", "--out-dir", str(tmp_path / "run"),
            "--no-plot"]
    for k, v in extra.items():
        args += [f"--{k.replace('_', '-')}", str(v)]
    return args


class TestCliEvolve:
    def test_artifacts_and_manifest(self, tmp_path):
        assert cli.main(small_run_args(tmp_path)) == 0
        out = tmp_path / "run"
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["status"] == "done"
        assert manifest["seed"] == 5
        assert "PCG64" in manifest["prng"]
        assert len(manifest["trial_paths"]) == 2
        summary = (out / "summary.csv").read_text().splitlines()
        assert summary[0] == "trial,mean_score,min_cooperation_bound"
        assert len(summary) == 3

    def test_deterministic_rerun(self, tmp_path):
        cli.main(small_run_args(tmp_path))
        first = (tmp_path / "run" / "trial_000" / "records.csv").read_text()
        (tmp_path / "run" / "trial_000" / "records.csv").unlink()
        cli.main(small_run_args(tmp_path))
        second = (tmp_path / "run" / "trial_000" / "records.csv").read_text()
        assert first == second

    def test_resume_skips_existing_trials(self, tmp_path, caplog):
        cli.main(small_run_args(tmp_path))
        path = tmp_path / "run" / "trial_001" / "records.csv"
        before = path.stat().st_mtime_ns
        with caplog.at_level("INFO"):
            cli.main(small_run_args(tmp_path))
        assert path.stat().st_mtime_ns == before
        assert "skipping" in caplog.text

    def test_output_root_env(self, tmp_path, monkeypatch):
        monkeypatch.setenv(cli.OUTPUT_ROOT_ENV, str(tmp_path))
        args = ["evolve", "--n-agents", "4", "--generations", "4",
                "--trials", "1", "--burn-in", "1", "--seed", "2",
                "--out-dir", "rel", "--no-plot"]
        assert cli.main(args) == 0
        assert (tmp_path / "rel" / "summary.csv").exists()

    def test_bad_config_exit_code_1(self, tmp_path, capsys):
        assert cli.main(["evolve", "--paradigm", "zz",
                         "--out-dir", str(tmp_path)]) == 1
        assert "paradigm" in capsys.readouterr().err

    def test_snapshots_file(self, tmp_path):
        assert cli.main(small_run_args(tmp_path, snapshot_every=3)) == 0
        snaps = json.loads(
            (tmp_path / "run" / "trial_000" / "genotypes.json").read_text())
        assert set(snaps) == {"0", "3", "6"}
        g = am.from_dict(snaps["6"][0])
        assert am.validate(g) == []


class TestCliFigures:
    def test_plots_regenerate_from_csvs(self, tmp_path):
        cli.main(small_run_args(tmp_path))
        out = tmp_path / "run"
        assert cli.main(["figures", "--out-dir", str(out)]) == 0
        svg = out / "score_histogram.svg"
        first = svg.read_bytes()
        svg.unlink()
        assert cli.main(["figures", "--out-dir", str(out)]) == 0
        assert svg.read_bytes() == first
        assert (out / "interaction_ratios.svg").exists()
        assert (out / "homogeneity.svg").exists()

    def test_missing_run_dir(self, tmp_path):
        assert cli.main(["figures", "--out-dir", str(tmp_path / "nope")]) == 1

    def test_corrupt_csv_header_rejected(self, tmp_path):
        cli.main(small_run_args(tmp_path))
        out = tmp_path / "run"
        (out / "summary.csv").write_text("a,b\n1,2\n")
        assert cli.main(["figures", "--out-dir", str(out)]) == 1


class TestCliPayoff:
    def test_canonical_pair_all_backends(self, tmp_path, capsys):
        report_path = tmp_path / "r.json"
        assert cli.main(["payoff", "grim", "grim", "--seed", "0",
                         "--out", str(report_path)]) == 0
        report = json.loads(report_path.read_text())
        for backend in ("marginal", "joint", "monte_carlo"):
            assert report["backends"][backend]["u_i"] == pytest.approx(3.0)
        assert "marginal" in capsys.readouterr().out

    def test_genotype_file_input(self, tmp_path):
        path = tmp_path / "tft.json"
        am.save_file(am.canonical("tit_for_tat"), path)
        assert cli.main(["payoff", str(path), "all_d", "--seed", "1"]) == 0

    def test_malformed_file_exit_2(self, tmp_path, capsys):
        path = tmp_path / "bad.json"
        path.write_text("{broken")
        assert cli.main(["payoff", str(path), "all_d"]) == 2
        assert "bad.json" in capsys.readouterr().err


class TestCliValidateMutation:
    def test_artifacts(self, tmp_path):
        out = tmp_path / "vm"
        assert cli.main(["validate-mutation", "--dims", "2", "3",
                         "--iterations", "2000", "--seed", "3",
                         "--out-dir", str(out), "--no-plot"]) == 0
        fits = json.loads((out / "fits.json").read_text())["fits"]
        assert {(f["mechanism"], f["dim"]) for f in fits} == {
            ("pairwise", 2), ("pairwise", 3),
            ("linear_normalization", 2), ("linear_normalization", 3)}
        assert (out / "bias_trace.csv").exists()
        assert (out / "histograms.csv").exists()

    def test_deterministic(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        for out in (a, b):
            cli.main(["validate-mutation", "--dims", "2",
                      "--iterations", "1500", "--seed", "3",
                      "--out-dir", str(out), "--no-plot"])
        assert (a / "fits.json").read_text() == (b / "fits.json").read_text()


class TestCliSweep:
    def test_sweep_covers_all_paradigms(self, tmp_path):
        out = tmp_path / "sweep"
        args = ["sweep", "--n-agents", "4", "--generations", "4",
                "--trials", "1", "--burn-in", "1", "--seed", "5",
                "--out-dir", str(out), "--no-plot"]
        assert cli.main(args) == 0
        lines = (out / "sweep_summary.csv").read_text().splitlines()
        assert len(lines) == 10
        labels = [line.split(",")[0] for line in lines[1:]]
        assert labels == list("abcdefghi")
        for label in "abcdefghi":
            assert (out / f"paradigm_{label}" / "summary.csv").exists()
