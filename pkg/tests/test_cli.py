import csv
import hashlib
import json

import pytest
import yaml

from sphere_sgd.cli import ConfigError, execute, main, parse_config


def write_cfg(tmp_path, payload, name="cfg.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(payload))
    return path


SIM = {
    "command": "simulate",
    "master_seed": 3,
    "model": {"family": "supervised", "activation": "linear"},
    "dynamics": {"N": 40, "delta": 0.5, "alpha": 2.0, "thresholds": [0.5]},
}


class TestParse:
    def test_minimal_defaults(self, tmp_path):
        cfg = parse_config(write_cfg(tmp_path, SIM))
        assert cfg.command == "simulate" and cfg.master_seed == 3
        assert cfg.dynamics["init"] == "uniform"
        assert cfg.dynamics["diagnostics"] is False
        assert cfg.experiment["seeds"] == 20
        assert cfg.output.endswith("simulate")

    def test_misspelled_field(self, tmp_path):
        bad = {**SIM, "dynamics": {"N": 40, "detla": 0.5, "alpha": 2.0}}
        with pytest.raises(ConfigError, match="detla"):
            parse_config(write_cfg(tmp_path, bad))

    def test_missing_required(self, tmp_path):
        bad = {**SIM, "dynamics": {"N": 40, "alpha": 2.0}}
        with pytest.raises(ConfigError, match="dynamics.delta"):
            parse_config(write_cfg(tmp_path, bad))

    def test_seed_required(self, tmp_path):
        bad = {k: v for k, v in SIM.items() if k != "master_seed"}
        with pytest.raises(ConfigError, match="master_seed"):
            parse_config(write_cfg(tmp_path, bad))

    def test_unknown_model_param(self, tmp_path):
        bad = {**SIM, "model": {"family": "supervised", "activation": "linear", "p": 3}}
        with pytest.raises(ConfigError, match="p"):
            parse_config(write_cfg(tmp_path, bad))

    def test_overrides_win(self, tmp_path):
        cfg = parse_config(write_cfg(tmp_path, SIM), {"dynamics.delta": 0.25})
        assert cfg.dynamics["delta"] == 0.25

    def test_env_output(self, tmp_path, monkeypatch):
        monkeypatch.setenv("SPHERE_SGD_OUTPUT", str(tmp_path / "envout"))
        cfg = parse_config(write_cfg(tmp_path, SIM))
        assert cfg.output == str(tmp_path / "envout")


class TestCommands:
    def test_hermite_relu(self, tmp_path, capsys):
        out = tmp_path / "h"
        assert main(["hermite", "--activation", "relu", "--out", str(out)]) == 0
        rows = list(csv.DictReader(open(out / "hermite.csv")))
        assert float(rows[1]["u_k"]) == pytest.approx(0.5, abs=1e-10)
        assert (out / "manifest.json").exists()

    def test_predict(self, tmp_path, capsys):
        out = tmp_path / "p"
        assert main(["predict", "--k", "2", "--n", "1000", "--out", str(out)]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["alpha_critical"] == pytest.approx(6.907755278982137)
        assert json.loads((out / "prediction.json").read_text())["k"] == 2

    def test_simulate_manifest(self, tmp_path):
        out = tmp_path / "s"
        assert main(["simulate", "--config", str(write_cfg(tmp_path, SIM)), "--out", str(out)]) == 0
        man = json.loads((out / "manifest.json").read_text())
        assert man["config"]["dynamics"]["delta"] == 0.5
        assert man["config"]["dynamics"]["stride"] is None
        for name, digest in man["digests"].items():
            assert hashlib.sha256((out / name).read_bytes()).hexdigest() == digest
        assert {"started", "finished", "artifact_version", "derived_seeds"} <= set(man)

    def test_theory_delta_recorded(self, tmp_path):
        cfg = {**SIM, "model": {"family": "supervised", "activation": "square"},
               "dynamics": {"N": 100, "delta": "theory", "alpha": "theory", "lbar": 10.0}}
        out = tmp_path / "t"
        assert main(["simulate", "--config", str(write_cfg(tmp_path, cfg)), "--out", str(out)]) == 0
        resolved = json.loads((out / "manifest.json").read_text())["resolved"]
        assert isinstance(resolved["delta"], float) and resolved["delta"] > 0
        assert resolved["alpha"] * resolved["delta"] > 2

    def test_repeat_is_byte_identical(self, tmp_path):
        path = write_cfg(tmp_path, SIM)
        a, b = tmp_path / "a", tmp_path / "b"
        assert main(["simulate", "--config", str(path), "--out", str(a)]) == 0
        assert main(["simulate", "--config", str(path), "--out", str(b)]) == 0
        for name in ("trajectory.csv", "hitting_times.json"):
            assert (a / name).read_bytes() == (b / name).read_bytes()

    def test_manifest_rerun(self, tmp_path):
        out = tmp_path / "first"
        assert main(["scan", "--family", "supervised", "--activation", "linear", "--set",
                     "experiment.N_grid=[16,32,64]", "--seeds", "5", "--delta", "0.5",
                     "--seed", "2", "--out", str(out)]) == 0
        again = tmp_path / "again"
        assert main(["scan", "--config", str(out / "manifest.json"), "--out", str(again)]) == 0
        for name in ("cells.csv", "summary.json", "plot.csv"):
            assert (out / name).read_bytes() == (again / name).read_bytes()

    def test_exit_codes(self, tmp_path, capsys):
        bad = {**SIM, "dynamics": {"N": 40, "detla": 0.5, "alpha": 2.0}}
        assert main(["simulate", "--config", str(write_cfg(tmp_path, bad))]) == 2
        out = tmp_path / "cens"
        assert main(["scan", "--activation", "linear", "--set", "experiment.N_grid=[16,32,64]",
                     "--seeds", "5", "--delta", "0.5", "--alpha", "0.01", "--seed", "0",
                     "--out", str(out)]) == 4
        assert (out / "manifest.json").exists()

    def test_failure_cleans_up(self, tmp_path):
        out = tmp_path / "gone"
        rc = main(["scan", "--activation", "linear", "--set", "experiment.N_grid=[64,32,128]",
                   "--seed", "0", "--out", str(out)])
        assert rc == 2
        assert not out.exists()

    def test_numeric_failure(self, tmp_path):
        out = tmp_path / "num"
        rc = main(["simulate", "--activation", "cubic", "--n", "10", "--delta", "1e300",
                   "--alpha", "1", "--seed", "0", "--out", str(out)])
        assert rc == 3
        assert not out.exists()

    def test_refute_and_compare(self, tmp_path):
        r = tmp_path / "r"
        assert main(["refute", "--activation", "square", "--n", "64", "--delta", "0.2",
                     "--seeds", "5", "--seed", "1", "--out", str(r)]) == 0
        assert json.loads((r / "summary.json").read_text())["alpha"] == pytest.approx(0.41588830833596715)
        c = tmp_path / "c"
        assert main(["compare", "--set", "experiment.activations=[linear,square]", "--n", "32",
                     "--alpha", "50", "--delta", "0.2", "--seeds", "5", "--seed", "1",
                     "--out", str(c)]) == 0
        header = (c / "compare.csv").read_text().splitlines()[0]
        assert header == "seed,linear,square"

    def test_lln_and_verify_b(self, tmp_path):
        lo = tmp_path / "l"
        assert main(["lln", "--activation", "square", "--set", "experiment.N_grid=[32,64,128]",
                     "--delta", "0.05", "--alpha", "5", "--seeds", "5", "--seed", "1",
                     "--out", str(lo)]) == 0
        assert len(json.loads((lo / "summary.json").read_text())["rows"]) == 3
        vb = tmp_path / "v"
        assert main(["verify-b", "--activation", "relu", "--n", "50", "--set",
                     "experiment.samples_per_probe=200", "--seed", "1", "--out", str(vb)]) == 0
        assert "c1_hat" in json.loads((vb / "assumption_b.json").read_text())

    def test_execute_direct(self, tmp_path):
        cfg = parse_config(write_cfg(tmp_path, SIM), {"output": str(tmp_path / "x")})
        assert execute(cfg) == 0
