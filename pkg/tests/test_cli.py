import json
import subprocess
import sys

import numpy as np
import pytest

BETA_LN2 = float(np.log(2.0))


def gclind(*args, cwd=None):
    return subprocess.run(
        [sys.executable, "-m", "gclind.cli", *args],
        capture_output=True, text=True, cwd=cwd,
    )


def write_config(tmp_path, data, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return path


EVOLVE = {
    "scenario": "evolve",
    "model": {"kind": "two_level_thermal", "omega0": 1.0, "beta": BETA_LN2, "gamma0": 1.0},
    "numerics": {"dt": 0.001, "t_span": [0.0, 20.0]},
}

SAMPLE = {
    "scenario": "sample",
    "gc": {"beta": 1.0, "mu": 0.3, "sectors": {"family": "single_mode", "eps": 1.0, "n_max": 4},
           "tail_threshold": 1.0},
    "hierarchy": {"window_center": 2, "window_half_width": 2, "n_steps": 2000,
                  "proposal_mode": "symmetric"},
    "numerics": {"dt": 0.01, "seed": 31},
    "observables": [{"name": "particle_number", "kind": "number"}],
}


class TestEvolveCommand:
    def test_writes_outputs_and_reaches_gibbs(self, tmp_path):
        config = write_config(tmp_path, EVOLVE)
        out = tmp_path / "out"
        result = gclind("evolve", "--config", str(config), "--out", str(out), "--quiet")
        assert result.returncode == 0, result.stderr
        csv = (out / "evolve_trajectory.csv").read_text()
        last = csv.strip().splitlines()[-1].split(",")
        header = csv.splitlines()[1].split(",")
        pops = dict(zip(header, last))
        assert float(pops["pop_0"]) == pytest.approx(1 / 3, abs=1e-8)
        assert float(pops["pop_1"]) == pytest.approx(2 / 3, abs=1e-8)
        report = json.loads((out / "evolve_report.json").read_text())
        assert report["final_trace"] == pytest.approx(1.0, abs=1e-9)

    def test_positional_config_accepted(self, tmp_path):
        config = write_config(tmp_path, dict(EVOLVE, numerics={"dt": 0.01, "t_span": [0.0, 0.1]}))
        result = gclind("evolve", str(config), "--out", str(tmp_path / "o"), "--quiet")
        assert result.returncode == 0, result.stderr

    def test_both_config_forms_rejected(self, tmp_path):
        config = write_config(tmp_path, EVOLVE)
        result = gclind("evolve", str(config), "--config", str(config))
        assert result.returncode == 2
        assert "not both" in result.stderr

    def test_missing_config_file(self, tmp_path):
        result = gclind("evolve", "--config", str(tmp_path / "absent.json"))
        assert result.returncode == 2
        assert "does not exist" in result.stderr

    def test_invalid_config_exits_2(self, tmp_path):
        bad = dict(EVOLVE, numerics={"dt": -1.0, "t_span": [0.0, 1.0]})
        config = write_config(tmp_path, bad)
        result = gclind("evolve", str(config), "--quiet")
        assert result.returncode == 2
        assert "numerics.dt" in result.stderr

    def test_numerical_failure_exits_3(self, tmp_path):
        unstable = {
            "scenario": "evolve",
            "model": {"kind": "two_level_thermal", "omega0": 1.0, "beta": BETA_LN2, "gamma0": 50.0},
            "numerics": {"dt": 0.5, "t_span": [0.0, 10.0]},
        }
        config = write_config(tmp_path, unstable)
        result = gclind("evolve", str(config), "--out", str(tmp_path / "o"), "--quiet")
        assert result.returncode == 3
        assert "state checks failed" in result.stderr


class TestValidateCommand:
    def test_ok(self, tmp_path):
        config = write_config(tmp_path, EVOLVE)
        result = gclind("validate", str(config))
        assert result.returncode == 0
        assert "config ok" in result.stdout

    def test_defects_listed(self, tmp_path):
        bad = {**EVOLVE, "numerics": {"dt": -1.0, "t_span": [0.0, 1.0]}, "oops": 1}
        config = write_config(tmp_path, bad)
        result = gclind("validate", str(config))
        assert result.returncode == 2
        assert "numerics.dt" in result.stderr and "oops" in result.stderr


class TestSampleCommand:
    def test_chain_and_estimates_written(self, tmp_path):
        config = write_config(tmp_path, SAMPLE)
        out = tmp_path / "out"
        result = gclind("sample", str(config), "--out", str(out), "--quiet")
        assert result.returncode == 0, result.stderr
        chain = (out / "sample_chain.csv").read_text().splitlines()
        assert chain[1] == "step,time,n,accepted,weight_n"
        assert len(chain) == 2 + SAMPLE["hierarchy"]["n_steps"]
        estimates = (out / "sample_estimates.csv").read_text().splitlines()
        assert estimates[1] == "observable,estimate,std_error,n_samples"
        assert estimates[2].startswith("particle_number,")

    def test_seed_override_changes_chain(self, tmp_path):
        config = write_config(tmp_path, SAMPLE)
        outs = []
        for i, seed in enumerate(("31", "99")):
            out = tmp_path / f"out{i}"
            result = gclind("sample", str(config), "--out", str(out), "--seed", seed, "--quiet")
            assert result.returncode == 0, result.stderr
            outs.append((out / "sample_chain.csv").read_bytes())
        assert outs[0] != outs[1]


class TestMuExtractCommand:
    def test_linear_reservoir(self, tmp_path):
        config = write_config(tmp_path, {
            "scenario": "mu-extract",
            "reservoir": {"total_particles": 10000, "linear": {"eps": 1.0}},
            "n_star": 50,
        })
        out = tmp_path / "out"
        result = gclind("mu-extract", str(config), "--out", str(out), "--quiet")
        assert result.returncode == 0, result.stderr
        report = json.loads((out / "mu_report.json").read_text())
        assert report["mu"] == 1.0


class TestRemoteServer:
    def test_client_against_running_service(self, tmp_path):
        import socket
        import threading
        import time

        import httpx
        import uvicorn

        from gclind.service import create_app

        with socket.socket() as probe:
            probe.bind(("127.0.0.1", 0))
            port = probe.getsockname()[1]
        server = uvicorn.Server(
            uvicorn.Config(create_app(), host="127.0.0.1", port=port, log_level="error")
        )
        thread = threading.Thread(target=server.run, daemon=True)
        thread.start()
        base = f"http://127.0.0.1:{port}"
        try:
            for _ in range(100):
                try:
                    if httpx.get(f"{base}/health", timeout=1.0).status_code == 200:
                        break
                except httpx.HTTPError:
                    time.sleep(0.05)
            else:
                pytest.fail("service did not come up")
            config = write_config(tmp_path, {
                "scenario": "mu-extract",
                "reservoir": {"total_particles": 10000, "linear": {"eps": 2.0}},
                "n_star": 10,
            })
            out = tmp_path / "out"
            result = gclind("mu-extract", str(config), "--out", str(out),
                            "--server", base, "--quiet")
            assert result.returncode == 0, result.stderr
            report = json.loads((out / "mu_report.json").read_text())
            assert report["mu"] == 2.0
        finally:
            server.should_exit = True
            thread.join(timeout=5)


class TestCheckCommand:
    def test_condition_a_failure_reported(self, tmp_path):
        sigma_minus = "2\n0.0 0.0\n0.0 0.0\n1.0 0.0\n0.0 0.0\n"
        config = write_config(tmp_path, {
            "scenario": "check",
            "condition": "A",
            "channels": [{"l_op": sigma_minus, "rate": 1.0}],
            "gc": {"beta": 1.0, "mu": 0.0,
                   "sectors": {"family": "n_times_eps", "eps": 1.0, "dims": [2]},
                   "tail_threshold": 1.0},
        })
        out = tmp_path / "out"
        result = gclind("check", str(config), "--out", str(out), "--quiet")
        assert result.returncode == 0, result.stderr
        report = json.loads((out / "check_report.json").read_text())
        assert report["passed"] is False
        assert report["channels"][0]["normality_defect"] == 1.0
