from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np
import pytest

from mtflock.cli import main
from mtflock.config import ExperimentConfig, init_ensemble, load_config, parse_config_text
from mtflock.errors import ConfigError
from mtflock.kernel import Kernel
from mtflock.state import delta_frobenius

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

BASE = """
kernel.c1 = 0.1
kernel.c2 = 0.5
kernel.beta = 0.01   # trailing comment
n_particles = 6
dim = 2
steps = 300
target_dx0 = 0.9
target_dv0 = 0.9
"""


def write(tmp_path: Path, text: str, name: str = "run.cfg") -> Path:
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


def read_csv(path: Path) -> list[dict[str, str]]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


class TestParse:
    def test_defaults_and_overrides(self):
        cfg = parse_config_text(BASE + "init.v.low = -1\ninit.high = 2\ntransition.h_list = 0.02, 0.01\n")
        assert (cfg.c1, cfg.c2, cfg.beta, cfg.kappa, cfg.h) == (0.1, 0.5, 0.01, 1.0, 0.01)
        assert cfg.init_x.low == 0.0 and cfg.init_v.low == -1.0
        assert cfg.init_x.high == cfg.init_v.high == 2.0
        assert cfg.transition_h_list == (0.02, 0.01)
        assert cfg.sweep_n_particles == (10, 20, 50)

    @pytest.mark.parametrize(
        "text",
        [
            "kernel.c2 = 0.5\nkernel.beta = 1\n",
            BASE + "bogus = 1\n",
            BASE + "kappa\n",
            BASE + "kappa = fast\n",
            BASE + "h = 1.5\n",
            BASE + "kappa = 1\nkappa = 2\n",
            BASE + "init.mode = gaussian\n",
            BASE + "init.low = 1\ninit.high = 0\n",
            BASE.replace("kernel.c1 = 0.1", "kernel.c1 = 0.9"),
            BASE.replace("target_dx0 = 0.9", "target_dx0 = -1"),
            "kernel.c1 = 1\nkernel.c2 = 1\nkernel.beta = 0\ntarget_dx0 = 0.5\n",
        ],
    )
    def test_malformed(self, text):
        with pytest.raises(ConfigError):
            parse_config_text(text)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "nope.cfg")

    def test_shipped_configs_parse(self):
        for path in CONFIGS.glob("*.cfg"):
            load_config(path)


class TestInitEnsemble:
    def test_deterministic(self):
        cfg = parse_config_text(BASE)
        a, b = init_ensemble(cfg), init_ensemble(cfg)
        assert a.positions.tobytes() == b.positions.tobytes()
        assert a.velocities.tobytes() == b.velocities.tobytes()
        c = init_ensemble(cfg.replace(seed=1))
        assert not np.array_equal(a.positions, c.positions)

    def test_target_scaling(self):
        cfg = parse_config_text(BASE).replace(target_dx0=0.95, target_dv0=None)
        ens = init_ensemble(cfg)
        m = Kernel(0.1, 0.5, 0.01).flocking_radius()
        assert delta_frobenius(ens.positions) == pytest.approx(0.95 * m, rel=1e-12)
        np.testing.assert_allclose(ens.positions.mean(axis=0), 0.0, atol=1e-15)

    def test_uniform_bounds(self):
        cfg = ExperimentConfig(c1=0.1, c2=0.5, beta=0.5, n_particles=200, dim=3, seed=9)
        ens = init_ensemble(cfg)
        for arr in (ens.positions, ens.velocities):
            assert arr.min() >= 0.0 and arr.max() <= 1.0

    def test_truncated_normal_bounds(self):
        text = BASE + "init.mode = truncated-normal\ninit.mean = 3\ninit.sd = 2\ninit.low = 2\ninit.high = 2.5\n"
        cfg = parse_config_text(text).replace(target_dx0=None, target_dv0=None, n_particles=300)
        ens = init_ensemble(cfg)
        assert ens.positions.min() >= 2.0 and ens.positions.max() <= 2.5

    def test_invalid_truncation(self):
        with pytest.raises(ConfigError):
            parse_config_text(BASE + "init.mode = truncated-normal\ninit.low = 1\ninit.high = 1\n")


class TestCli:
    def test_simulate(self, tmp_path):
        out = tmp_path / "sim"
        assert main(["simulate", "--config", str(write(tmp_path, BASE)), "--out", str(out)]) == 0
        rows = read_csv(out / "observables.csv")
        assert len(rows) == 301
        assert list(rows[0]) == ["step", "t", "dx_frob", "dv_frob", "diam_x", "diam_v", "lambda", "alpha",
                                 "envelope_v", "x_bound_M"]
        consts = json.loads((out / "manifest.json").read_text())["constants"]
        ratio = 1 - 0.01 * consts["psi_M"]
        for row in rows:
            n = int(row["step"])
            assert float(row["envelope_v"]) == pytest.approx(consts["dv0"] * ratio**n, rel=1e-9)
            assert float(row["x_bound_M"]) == consts["M"]
            assert float(row["dv_frob"]) <= float(row["envelope_v"]) * (1 + 1e-9)
        assert b"\r" not in (out / "observables.csv").read_bytes()

    def test_certify_and_strict(self, tmp_path):
        cfg = write(tmp_path, BASE.replace("steps = 300", "steps = 3000"))
        assert main(["certify", "--config", str(cfg), "--out", str(tmp_path / "ok"), "--strict"]) == 0
        checks = {r["check"]: r["passed"] for r in read_csv(tmp_path / "ok" / "checks.csv")}
        assert checks == {"recursions": "true", "kernel_lemmas": "true", "envelope": "true", "velocity_tail": "true"}
        bad = write(tmp_path, BASE.replace("target_dx0 = 0.9", "target_dx0 = 1.05"), "bad.cfg")
        out = tmp_path / "strict"
        assert main(["certify", "--config", str(bad), "--out", str(out), "--strict"]) == 3
        assert not out.exists()
        assert main(["certify", "--config", str(bad), "--out", str(tmp_path / "lax")]) == 0

    def test_missing_key_writes_nothing(self, tmp_path):
        cfg = write(tmp_path, BASE.replace("kernel.c1 = 0.1", ""))
        out = tmp_path / "none"
        assert main(["simulate", "--config", str(cfg), "--out", str(out)]) == 2
        assert not out.exists()

    def test_transition(self, tmp_path):
        text = BASE + "transition.T = 2\n"
        assert main(["transition", "--config", str(write(tmp_path, text)), "--out", str(tmp_path / "t")]) == 0
        rows = read_csv(tmp_path / "t" / "transition.csv")
        assert [r["h"] for r in rows] == ["0.02", "0.01", "0.005"]
        assert [int(r["n_horizon"]) for r in rows] == [100, 200, 400]
        diag = json.loads((tmp_path / "t" / "transition_diagnostics.json").read_text())
        assert 0.8 <= diag["slope"] <= 1.2

    def test_stability(self, tmp_path):
        assert main(["stability", "--config", str(write(tmp_path, BASE)), "--out", str(tmp_path / "s")]) == 0
        rows = read_csv(tmp_path / "s" / "stability.csv")
        assert len(rows) == 301
        assert all(r["prop42_pass"] == r["lem46_pass"] == r["thm41_pass"] == "true" for r in rows)

    def test_reindex(self, tmp_path):
        text = BASE + "reindex.paths = 200\n"
        assert main(["reindex-check", "--config", str(write(tmp_path, text)), "--out", str(tmp_path / "r")]) == 0
        rows = {r["case_id"]: r for r in read_csv(tmp_path / "r" / "reindex.csv")}
        assert float(rows["example_1324"]["monotone_sum"]) == pytest.approx(2.4, abs=1e-12)
        assert float(rows["example_0213"]["direct_sum"]) == pytest.approx(3.0, abs=1e-12)
        assert all(r["pass"] == "true" for r in rows.values())

    def test_sweep(self, tmp_path):
        text = BASE + "sweep.beta = 0.005, 0.01\nsweep.seed = 0, 1\nsweep.n_particles = 4, 6\nsweep.workers = 2\n"
        out = tmp_path / "sw"
        assert main(["sweep", "--config", str(write(tmp_path, text)), "--out", str(out)]) == 0
        rows = read_csv(out / "sweep.csv")
        assert len(rows) == 8
        assert all((out / r["run"] / "observables.csv").exists() for r in rows)
        assert all(r["envelope_pass"] == "true" for r in rows)

    def test_seed_override_and_determinism(self, tmp_path):
        cfg = str(write(tmp_path, BASE))
        for name in ("a", "b"):
            assert main(["simulate", "--config", cfg, "--out", str(tmp_path / name), "--seed", "11"]) == 0
        a = (tmp_path / "a" / "observables.csv").read_bytes()
        assert a == (tmp_path / "b" / "observables.csv").read_bytes()
        assert json.loads((tmp_path / "a" / "manifest.json").read_text())["config"]["seed"] == 11
