import hashlib
import json
from pathlib import Path

import numpy as np
import pytest

from freejacobi import cli


def read_manifest(out_dir):
    return json.loads((Path(out_dir) / "manifest.json").read_text())


class TestStationaryCmd:
    def test_arcsine_outputs(self, tmp_path):
        out = tmp_path / "s"
        rc = cli.main(["stationary", "--lambda", "1", "--theta", "0.5",
                       "--grid-size", "256", "--out-dir", str(out)])
        assert rc == 0
        meta = json.loads((out / "measure.json").read_text())
        assert meta["atom0"] == 0.0 and meta["atom1"] == 0.0
        assert meta["lo"] == pytest.approx(0.0, abs=1e-15)
        assert meta["hi"] == pytest.approx(1.0, abs=1e-15)
        rows = (out / "moments.csv").read_text().strip().splitlines()
        assert rows[0] == "n,series,quadrature"
        n2 = rows[3].split(",")
        assert float(n2[1]) == pytest.approx(0.375, abs=1e-10)

    def test_atom_reported(self, tmp_path):
        out = tmp_path / "a"
        rc = cli.main(["stationary", "--lambda", "2", "--theta", "0.25",
                       "--grid-size", "128", "--out-dir", str(out)])
        assert rc == 2  # outside the SDE regime, outputs still written
        meta = json.loads((out / "measure.json").read_text())
        assert meta["atom0"] == pytest.approx(0.5, abs=1e-12)

    def test_regime_violation_still_writes(self, tmp_path, capsys):
        out = tmp_path / "r"
        rc = cli.main(["stationary", "--lambda", "1", "--theta", "0.9",
                       "--grid-size", "128", "--out-dir", str(out)])
        assert rc == 2
        assert (out / "measure.csv").exists()
        report = json.loads((out / "log_potentials.json").read_text())
        assert report["sde_valid"] is False
        assert report["log_potentials"] is None
        assert "regime violation" in capsys.readouterr().err

    def test_invalid_params(self, tmp_path):
        assert cli.main(["stationary", "--lambda", "4", "--theta", "0.5",
                         "--out-dir", str(tmp_path / "x")]) == 2

    def test_manifest_hashes(self, tmp_path):
        out = tmp_path / "m"
        cli.main(["stationary", "--lambda", "0.5", "--theta", "0.5",
                  "--grid-size", "128", "--out-dir", str(out)])
        man = read_manifest(out)
        assert man["schema"] == "v1"
        for entry in man["outputs"]:
            digest = hashlib.sha256((out / entry["path"]).read_bytes()).hexdigest()
            assert digest == entry["sha256"]


class TestMomentsCmd:
    def test_basic_run(self, tmp_path):
        out = tmp_path / "m"
        rc = cli.main(["moments", "--lambda", "0.5", "--theta", "0.5", "--start", "0.25",
                       "--T", "1.0", "--N", "32", "--record-every", "100",
                       "--out-dir", str(out)])
        assert rc == 0
        header = (out / "trajectory.csv").read_text().splitlines()[0]
        assert header.split(",")[:3] == ["t", "m1", "m2"]
        fit = json.loads((out / "relaxation_fit.json").read_text())
        assert fit["m1_rate"] == pytest.approx(-1.0, abs=0.02)
        health = read_manifest(out)["health"]
        assert health["log_identity_max_residual"] < 1e-4

    def test_m1_column_matches_closed_form(self, tmp_path):
        out = tmp_path / "c"
        cli.main(["moments", "--lambda", "1", "--theta", "0.5", "--start", "0.25",
                  "--T", "1.0", "--N", "8", "--record-every", "1000",
                  "--out-dir", str(out)])
        last = (out / "trajectory.csv").read_text().strip().splitlines()[-1].split(",")
        assert float(last[1]) == pytest.approx(0.5 - 0.25 * np.exp(-1.0), abs=1e-8)

    def test_stationary_start_flat(self, tmp_path):
        out = tmp_path / "f"
        cli.main(["moments", "--lambda", "0.5", "--theta", "0.5", "--start", "stationary",
                  "--T", "1.0", "--N", "16", "--record-every", "100", "--out-dir", str(out)])
        rows = (out / "trajectory.csv").read_text().strip().splitlines()[1:]
        first = np.array([float(v) for v in rows[0].split(",")[1:]])
        last = np.array([float(v) for v in rows[-1].split(",")[1:]])
        assert np.max(np.abs(first - last)) <= 1e-6

    def test_zero_order_rejected(self, tmp_path):
        assert cli.main(["moments", "--lambda", "0.5", "--theta", "0.5", "--N", "0",
                         "--out-dir", str(tmp_path / "z")]) == 2


class TestPdeCmd:
    def test_stationary_residual_report(self, tmp_path):
        out = tmp_path / "p"
        rc = cli.main(["pde", "--lambda", "0.5", "--theta", "0.5", "--start", "stationary",
                       "--T", "0.2", "--record-every", "100", "--out-dir", str(out)])
        assert rc == 0
        rep = json.loads((out / "pde_report.json").read_text())
        assert rep["stationary_sup_residual"] <= 1e-6
        assert rep["max_drift_from_initial"] <= 1e-5
        assert rep["herglotz_preserved"] is True

    def test_time_zero_echo(self, tmp_path):
        out = tmp_path / "e"
        cli.main(["pde", "--lambda", "1", "--theta", "0.5", "--start", "0.25",
                  "--T", "0", "--out-dir", str(out)])
        rows = (out / "contour.csv").read_text().strip().splitlines()[1:]
        times = {row.split(",")[0] for row in rows}
        assert times == {"0"}

    def test_oracle_deviation_reported(self, tmp_path):
        out = tmp_path / "o"
        cli.main(["pde", "--lambda", "1", "--theta", "0.5", "--start", "0.25",
                  "--T", "0.5", "--record-every", "250", "--out-dir", str(out)])
        rep = json.loads((out / "pde_report.json").read_text())
        assert rep["max_dev_vs_moment_oracle"] <= 5e-5


class TestSimulateCmd:
    def test_outputs_and_health(self, tmp_path):
        out = tmp_path / "s"
        rc = cli.main(["simulate", "--d", "32", "--m", "8", "--p", "16", "--trials", "4",
                       "--T", "0.2", "--step", "0.02", "--seed", "5",
                       "--snapshot-times", "0.2", "--out-dir", str(out)])
        assert rc == 0
        man = read_manifest(out)
        assert man["health"]["aborted_trials"] == []
        assert man["health"]["lambda"] == "1/2"
        rows = (out / "eigenvalues.csv").read_text().strip().splitlines()
        assert rows[0] == "t,eig"
        assert len(rows) == 1 + 4 * 8

    def test_geometry_rejected(self, tmp_path):
        assert cli.main(["simulate", "--d", "16", "--m", "20", "--p", "8",
                         "--out-dir", str(tmp_path / "g")]) == 2

    def test_zero_trials_rejected(self, tmp_path):
        assert cli.main(["simulate", "--d", "16", "--m", "4", "--p", "8", "--trials", "0",
                         "--out-dir", str(tmp_path / "t")]) == 2

    def test_jobs_byte_identical(self, tmp_path):
        outs = []
        for jobs in ("1", "2"):
            out = tmp_path / f"j{jobs}"
            rc = cli.main(["simulate", "--d", "32", "--m", "8", "--p", "16",
                           "--trials", "6", "--T", "0.2", "--step", "0.02",
                           "--seed", "31415", "--snapshot-times", "0.2",
                           "--jobs", jobs, "--out-dir", str(out)])
            assert rc == 0
            outs.append(out)
        for name in ("trajectory.csv", "eigenvalues.csv"):
            assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()

    def test_direct_scheme(self, tmp_path):
        out = tmp_path / "d"
        rc = cli.main(["simulate", "--d", "64", "--m", "16", "--p", "32", "--trials", "2",
                       "--T", "0.2", "--step", "0.02", "--start", "0.25",
                       "--scheme", "direct-sde", "--out-dir", str(out)])
        assert rc == 0


class TestConfigFile:
    def test_config_supplies_and_flags_win(self, tmp_path):
        cfg = tmp_path / "run.toml"
        cfg.write_text(
            "[stationary]\nlam = 1.0\ntheta = 0.5\ngrid-size = 128\n"
        )
        out1 = tmp_path / "c1"
        rc = cli.main(["stationary", "--config", str(cfg), "--out-dir", str(out1)])
        assert rc == 0
        assert read_manifest(out1)["params"]["theta"] == 0.5
        out2 = tmp_path / "c2"
        rc = cli.main(["stationary", "--config", str(cfg), "--theta", "0.25",
                       "--out-dir", str(out2)])
        assert rc == 0
        assert read_manifest(out2)["params"]["theta"] == 0.25


class TestVerifyCmd:
    def test_unknown_suite(self):
        assert cli.main(["verify", "bogus"]) == 2

    def test_stationary_suite_passes(self, tmp_path, capsys):
        out = tmp_path / "verdict.json"
        rc = cli.main(["verify", "stationary", "--json-out", str(out)])
        assert rc == 0
        verdict = json.loads(out.read_text())
        assert verdict["passed"] is True
        assert len(verdict["criteria"]) == 2
        lines = capsys.readouterr().out.strip().splitlines()
        assert all(line.startswith("PASS") for line in lines)

    def test_exact_identity_criterion(self):
        from freejacobi.verify import run_criterion

        res = run_criterion(10)
        assert res.passed
