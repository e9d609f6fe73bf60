import json

import pytest

from opelab import cli
from opelab.errors import ConfigurationError


def write_config(tmp_path, payload, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(payload))
    return str(path)


BASE = {
    "experiment": "stats",
    "measure": {"family": "chebyshev1st"},
    "n_grid": [2, 5],
    "statistic": {"f": "identity", "alpha": 0.0, "xstar": 0.0},
    "seed": 7,
}


class TestConfigValidation:
    def test_minimal_config_fills_defaults(self):
        cfg = cli.ExperimentConfig.from_dict({"experiment": "stats"})
        assert cfg.n_grid == [10]
        assert cfg.replicas == 1
        assert cfg.method == "hkpv"

    def test_missing_experiment(self):
        with pytest.raises(ConfigurationError):
            cli.ExperimentConfig.from_dict({"n_grid": [5]})

    def test_unknown_experiment(self):
        with pytest.raises(ConfigurationError):
            cli.ExperimentConfig.from_dict({"experiment": "frobnicate"})

    @pytest.mark.parametrize("grid", [[], [5, 5], [10, 5], [0, 3]])
    def test_bad_n_grid(self, grid):
        with pytest.raises(ConfigurationError):
            cli.ExperimentConfig.from_dict({"experiment": "stats", "n_grid": grid})

    def test_alpha_out_of_range(self):
        with pytest.raises(ConfigurationError):
            cli.ExperimentConfig.from_dict(
                {"experiment": "stats", "statistic": {"f": "identity", "alpha": 1.0}})

    def test_zero_replicas(self):
        with pytest.raises(ConfigurationError):
            cli.ExperimentConfig.from_dict({"experiment": "sample", "replicas": 0})

    def test_bad_seed(self):
        with pytest.raises(ConfigurationError):
            cli.ExperimentConfig.from_dict({"experiment": "stats", "seed": -1})

    def test_bad_method(self):
        with pytest.raises(ConfigurationError):
            cli.ExperimentConfig.from_dict({"experiment": "sample", "method": "mcmc"})

    def test_nonpositive_epsilon(self):
        with pytest.raises(ConfigurationError):
            cli.ExperimentConfig.from_dict({"experiment": "bounds", "epsilons": [0.0]})

    def test_polynomial_f_spec(self):
        cfg = cli.ExperimentConfig.from_dict(
            {"experiment": "stats", "statistic": {"f": {"poly": [0.0, 1.0]}}})
        assert cfg.statistic.f.sup_norm > 0


class TestMainEntry:
    def test_validate_ok(self, tmp_path, capsys):
        path = write_config(tmp_path, BASE)
        assert cli.main(["validate", "--config", path]) == 0
        assert capsys.readouterr().out.strip() == "valid"

    def test_validate_bad_exit_code(self, tmp_path):
        path = write_config(tmp_path, {"experiment": "stats", "n_grid": [3, 2]})
        assert cli.main(["validate", "--config", path]) == 2

    def test_missing_file_exit_code(self, tmp_path):
        assert cli.main(["validate", "--config", str(tmp_path / "nope.json")]) == 2

    def test_subcommand_config_mismatch(self, tmp_path):
        path = write_config(tmp_path, BASE)
        assert cli.main(["sample", "--config", path]) == 2

    def test_stats_run_writes_manifest(self, tmp_path):
        path = write_config(tmp_path, BASE)
        out = tmp_path / "out"
        assert cli.main(["stats", "--config", path, "--out", str(out)]) == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["schema_version"] == 1
        assert manifest["config"]["seed"] == 7
        assert manifest["constant_A"] == pytest.approx(7818.9766, abs=1e-3)
        assert set(manifest["outputs"]) == {"stats.csv"}
        assert "stats" in manifest["wall_clock_s"]

    def test_stats_values(self, tmp_path):
        # identity on the symmetric Chebyshev weight: zero mean, variance b_n^2
        path = write_config(tmp_path, BASE)
        out = tmp_path / "out"
        cli.main(["stats", "--config", path, "--out", str(out)])
        lines = (out / "stats.csv").read_text().splitlines()
        assert lines[0] == "n,mean,variance,scaled_variance"
        for line in lines[1:]:
            n, mean, var, _ = line.split(",")
            assert abs(float(mean)) < 1e-12
            assert float(var) == pytest.approx(0.25, abs=1e-12)

    def test_sample_determinism(self, tmp_path):
        payload = dict(BASE, experiment="sample", n_grid=[4], replicas=5)
        path = write_config(tmp_path, payload)
        sums = []
        for sub in ("a", "b"):
            out = tmp_path / sub
            assert cli.main(["sample", "--config", path, "--out", str(out)]) == 0
            manifest = json.loads((out / "manifest.json").read_text())
            sums.append(manifest["outputs"]["samples_n4.csv"])
        assert sums[0] == sums[1]

    def test_sample_seed_override_changes_output(self, tmp_path):
        payload = dict(BASE, experiment="sample", n_grid=[4], replicas=5)
        path = write_config(tmp_path, payload)
        out1, out2 = tmp_path / "s1", tmp_path / "s2"
        cli.main(["sample", "--config", path, "--out", str(out1)])
        cli.main(["sample", "--config", path, "--out", str(out2), "--seed", "99"])
        m1 = json.loads((out1 / "manifest.json").read_text())
        m2 = json.loads((out2 / "manifest.json").read_text())
        assert m1["outputs"]["samples_n4.csv"] != m2["outputs"]["samples_n4.csv"]
        assert m2["config"]["seed"] == 99

    def test_tridiagonal_requires_varying_gaussian(self, tmp_path):
        payload = dict(BASE, experiment="sample", n_grid=[3], method="tridiagonal")
        path = write_config(tmp_path, payload)
        assert cli.main(["sample", "--config", path, "--out",
                         str(tmp_path / "o")]) == 2

    def test_bounds_run_dominated_column(self, tmp_path):
        payload = dict(BASE, experiment="bounds", n_grid=[3], replicas=1000,
                       epsilons=[2.5], statistic={"f": "identity"})
        path = write_config(tmp_path, payload)
        out = tmp_path / "out"
        assert cli.main(["bounds", "--config", path, "--out", str(out)]) == 0
        lines = (out / "bounds.csv").read_text().splitlines()
        header = lines[0].split(",")
        row = dict(zip(header, lines[1].split(",")))
        # eps beyond the range bound: empirically impossible, trivially dominated
        assert float(row["empirical"]) == 0.0
        assert row["dominated"] == "True"

    def test_report_bundle(self, tmp_path):
        # n large enough that the scaled evaluation grid stays inside [-1, 1]
        payload = dict(BASE, experiment="report", n_grid=[8, 16],
                       statistic={"f": "smooth_bump", "alpha": 0.4, "xstar": 0.0})
        path = write_config(tmp_path, payload)
        out = tmp_path / "out"
        assert cli.main(["report", "--config", path, "--out", str(out)]) == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert set(manifest["outputs"]) == {
            "stats.csv", "nevai.csv", "universality.csv", "report.json"}
        report = json.loads((out / "report.json").read_text())
        assert report["measure"]["family"] == "chebyshev1st"

    def test_universality_varying_gaussian(self, tmp_path):
        payload = dict(BASE, experiment="universality", n_grid=[20],
                       measure={"family": "varying_gaussian", "params": {"n": 20}})
        path = write_config(tmp_path, payload)
        out = tmp_path / "out"
        assert cli.main(["universality", "--config", path, "--out", str(out)]) == 0
        lines = (out / "universality.csv").read_text().splitlines()
        assert lines[0] == "n,universality_error,totik_error"
        _, ue, te = lines[1].split(",")
        assert float(ue) < 0.5 and float(te) < 0.5
