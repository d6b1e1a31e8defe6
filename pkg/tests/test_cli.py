import json

import numpy as np
import pytest

from qexciton.analysis import PopulationSeries, read_series_csv, write_series_csv
from qexciton.cli import main
from qexciton.pauli import PauliSum


def write_json(path, data):
    path.write_text(json.dumps(data))
    return str(path)


class TestEncode:
    def test_section_v_snapshot(self, tmp_path, capsys):
        snap = {"energies": [0.01, 0.01, -0.01, -0.01],
                "couplings": [[0, 0.04, 0, 0.04], [0.04, 0, 0.04, 0], [0, 0.04, 0, 0.04], [0.04, 0, 0.04, 0]]}
        assert main(["encode", write_json(tmp_path / "s.json", snap)]) == 0
        out = capsys.readouterr().out
        body, offset = out.strip().rsplit("\n", 1)
        assert PauliSum.from_text(body) == PauliSum([(0.01, "ZI"), (0.04, "IX"), (0.04, "XX")])
        assert offset == "offset 0.0"


class TestEvolve:
    def test_exact_section_v(self, tmp_path):
        cfg = write_json(tmp_path / "c.json", {"model": {"kind": "section_v"}, "total_time": 50.0})
        assert main(["evolve", "--config", cfg, "--method", "exact", "--out", str(tmp_path / "run")]) == 0
        s = read_series_csv(tmp_path / "run" / "populations.csv")
        assert s.site(0)[0] == 1.0
        assert np.allclose(s.populations.sum(axis=1), 1, atol=1e-8)
        resolved = json.loads((tmp_path / "run" / "config.json").read_text())
        assert resolved["method"] == "exact"

    def test_vqa_writes_theta(self, tmp_path):
        cfg = write_json(tmp_path / "c.json", {"total_time": 10.0})
        assert main(["evolve", "--config", cfg, "--method", "vqa", "--out", str(tmp_path / "v")]) == 0
        assert (tmp_path / "v" / "theta.csv").read_text().startswith("t_fs,theta_1,theta_2,theta_3")

    def test_noisy_trotter_overrides(self, tmp_path):
        cfg = write_json(tmp_path / "c.json", {"total_time": 10.0})
        rc = main(["evolve", "--config", cfg, "--method", "trotter", "--lambda", "0.05", "--shots", "500", "--seed", "3",
                   "--out", str(tmp_path / "t")])
        assert rc == 0
        resolved = json.loads((tmp_path / "t" / "config.json").read_text())
        assert resolved["backend"] == {"kind": "noisy", "shots": 500, "lambda": 0.05, "mode": "per_gate"}
        assert resolved["seed"] == 3

    def test_fullspace_model(self, tmp_path):
        mols = [{"energy": 2.0, "transition_dipole": [1, 0, 0], "position": [0, 0, 0]},
                {"energy": 2.0, "transition_dipole": [1, 0, 0], "position": [0, 0, 6]}]
        cfg = write_json(tmp_path / "c.json", {"model": {"kind": "fullspace", "molecules": mols}, "dt": 1.0, "total_time": 5.0})
        assert main(["evolve", "--config", cfg, "--out", str(tmp_path / "f")]) == 0
        s = read_series_csv(tmp_path / "f" / "populations.csv")
        assert np.allclose(s.populations[0], [1, 0])

    def test_tfi_model(self, tmp_path):
        cfg = write_json(tmp_path / "c.json", {"model": {"kind": "tfi"}, "dt": 0.1, "total_time": 1.0})
        assert main(["evolve", "--config", cfg, "--out", str(tmp_path / "tfi")]) == 0


class TestMitigate:
    def test_identical_series(self, tmp_path, capsys):
        t = np.linspace(0, 40, 201)
        p = 0.5 + 0.5 * np.cos(0.2 * t)
        s = PopulationSeries.from_populations(t, np.column_stack([p, 1 - p]))
        write_series_csv(s, tmp_path / "a.csv")
        rc = main(["mitigate", "--vqa", str(tmp_path / "a.csv"), "--trotter", str(tmp_path / "a.csv"),
                   "--t-cutoff", "20", "--alpha-range", "0.5,3", "--out", str(tmp_path / "m")])
        assert rc == 0
        assert "alpha 1.0" in capsys.readouterr().out
        out = read_series_csv(tmp_path / "m" / "corrected.csv")
        assert np.allclose(out.populations, s.populations) and np.allclose(out.times, s.times)
        assert (tmp_path / "m" / "mitigation.csv").exists()

    def test_missing_cutoff(self, tmp_path):
        t = np.linspace(0, 4, 5)
        s = PopulationSeries.from_populations(t, np.column_stack([np.ones(5), np.zeros(5)]))
        write_series_csv(s, tmp_path / "a.csv")
        assert main(["mitigate", "--vqa", str(tmp_path / "a.csv"), "--trotter", str(tmp_path / "a.csv"),
                     "--out", str(tmp_path / "m")]) == 1


class TestEnsembleAndTrajectories:
    def test_synth_traj(self, tmp_path):
        cfg = write_json(tmp_path / "c.json", {"total_time": 10.0, "ensemble": {"trajectory_dt": 2.0}})
        assert main(["synth-traj", "--config", cfg, "--seed", "5", "--out", str(tmp_path / "t")]) == 0
        header = (tmp_path / "t" / "trajectory.csv").read_text().splitlines()[0]
        assert header.startswith("t_fs,E_1,E_2,E_3,E_4,V_1_2")

    def test_ensemble(self, tmp_path):
        cfg = write_json(tmp_path / "c.json", {"dt": 2.0, "total_time": 6.0})
        assert main(["ensemble", "--config", cfg, "--count", "3", "--out", str(tmp_path / "e")]) == 0
        s = read_series_csv(tmp_path / "e" / "ensemble.csv")
        assert np.allclose(s.populations.sum(axis=1), 1, atol=1e-8)
        assert dict(s.extra)["ipr_member_mean"].shape == (4,)

    def test_trajectory_model_from_file(self, tmp_path):
        cfg = write_json(tmp_path / "c.json", {"total_time": 10.0, "ensemble": {"trajectory_dt": 1.0}})
        assert main(["synth-traj", "--config", cfg, "--out", str(tmp_path / "t")]) == 0
        cfg2 = write_json(tmp_path / "c2.json", {"model": {"kind": "trajectory", "path": str(tmp_path / "t" / "trajectory.csv")},
                                                  "dt": 1.0, "total_time": 8.0})
        assert main(["evolve", "--config", cfg2, "--method", "trotter", "--out", str(tmp_path / "r")]) == 0


class TestExitCodes:
    def test_unknown_flag(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["evolve", "--bogus", "--out", "x"])
        assert exc.value.code == 1
        assert "usage" in capsys.readouterr().err

    def test_unknown_subcommand(self):
        with pytest.raises(SystemExit) as exc:
            main(["frobnicate"])
        assert exc.value.code == 1

    def test_bad_config(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        assert main(["evolve", "--config", str(bad), "--out", str(tmp_path / "o")]) == 1
        assert main(["evolve", "--config", str(tmp_path / "missing.json"), "--out", str(tmp_path / "o")]) == 1

    def test_bad_model(self, tmp_path):
        cfg = write_json(tmp_path / "c.json", {"model": {"kind": "unknown"}})
        assert main(["evolve", "--config", cfg, "--out", str(tmp_path / "o")]) == 1

    def test_numerical_failure(self, tmp_path, monkeypatch):
        from qexciton import cli
        from qexciton.errors import NumericalError

        def boom(*args, **kwargs):
            raise NumericalError("did not converge")

        monkeypatch.setattr(cli, "evolve", boom)
        cfg = write_json(tmp_path / "c.json", {})
        assert main(["evolve", "--config", cfg, "--out", str(tmp_path / "o")]) == 2
