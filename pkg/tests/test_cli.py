import csv
import json
import os
import shutil
import subprocess
import sys

import numpy as np
import pytest

from irsbeam.channel_model import SystemConfig, generate_channels
from irsbeam.cli import main, validate_document
from irsbeam.errors import ConfigError

MINIMAL = {
    "system": {"M": 2, "irs_sizes": [3], "groups": [[0], [1]], "noise_powers": 0.1, "sinr_targets": 1.0},
    "channel": {"seed": 4},
    "algorithm": {"seed": 1, "trials": 200, "max_iter": 10},
}


def _write(tmp_path, doc, name="scenario.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


def _run(tmp_path, doc, *extra, out="out"):
    code = main(["run", "--scenario", _write(tmp_path, doc), "--out", str(tmp_path / out), *extra])
    return code, tmp_path / out


def _sweep_rows(out):
    with open(out / "sweep.csv") as fh:
        return list(csv.DictReader(fh))


class TestRun:
    def test_minimal_scenario(self, tmp_path):
        code, out = _run(tmp_path, MINIMAL)
        assert code == 0
        assert sorted(os.listdir(out)) == ["report.json", "solution.json", "trajectory.csv"]
        with open(out / "trajectory.csv") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["iteration", "objective", "min_scaled_sinr", "wall_ms"]
        report = json.loads((out / "report.json").read_text())
        assert report["report"]["status"] == "converged"
        assert len(rows) == 1 + report["report"]["iterations"]
        assert report["timing"]["kernel_backend"] in ("compiled", "python")

    def test_wrong_target_count(self, tmp_path, capsys):
        doc = json.loads(json.dumps(MINIMAL))
        doc["system"]["sinr_targets"] = [1.0, 1.0, 1.0]
        code, out = _run(tmp_path, doc)
        assert code == 1
        assert "system.sinr_targets" in capsys.readouterr().err
        assert not out.exists()

    @pytest.mark.parametrize("mutate,path", [
        (lambda d: d["system"].update(foo=1), "system.foo"),
        (lambda d: d["system"].update(M=0), "system.M"),
        (lambda d: d["system"].update(groups=[[0], [0]]), "system.groups"),
        (lambda d: d.update(constraints={"phase_mode": "discrete"}), "constraints.tau"),
        (lambda d: d.update(algorithm={"problem": "rate"}), "algorithm.problem"),
    ])
    def test_validation_paths(self, mutate, path):
        doc = json.loads(json.dumps(MINIMAL))
        mutate(doc)
        with pytest.raises(ConfigError) as exc:
            validate_document(doc)
        assert exc.value.path == path

    def test_missing_file(self, tmp_path):
        assert main(["run", "--scenario", str(tmp_path / "nope.json"), "--out", str(tmp_path / "o")]) == 1

    def test_rerun_identical_except_timing(self, tmp_path):
        _, a = _run(tmp_path, MINIMAL, out="a")
        _, b = _run(tmp_path, MINIMAL, out="b")
        ra, rb = (json.loads((d / "report.json").read_text()) for d in (a, b))
        ra.pop("timing"), rb.pop("timing")
        assert ra == rb
        assert (a / "solution.json").read_bytes() == (b / "solution.json").read_bytes()

    def test_overrides_and_seed(self, tmp_path):
        _, out = _run(tmp_path, MINIMAL, "--set", "system.power_budget=2.5", "--set", "algorithm.max_iter=3",
                      "--seed", "9")
        doc = json.loads((out / "report.json").read_text())["scenario"]
        assert doc["system"]["power_budget"] == 2.5
        assert doc["algorithm"]["max_iter"] == 3 and doc["algorithm"]["seed"] == 9
        assert doc["channel"]["seed"] == 4

    def test_embedded_scenario_reproduces_solution(self, tmp_path):
        _, out = _run(tmp_path, MINIMAL, "--jobs", "3")
        doc = json.loads((out / "report.json").read_text())["scenario"]
        validate_document(doc)
        _, again = _run(tmp_path, doc, out="again")
        assert (out / "solution.json").read_bytes() == (again / "solution.json").read_bytes()

    def test_inline_channels(self, tmp_path):
        cfg = SystemConfig.unicast(2, [3], 2, noise_powers=0.1)
        doc = json.loads(json.dumps(MINIMAL))
        doc["channel"] = {"model": "inline", "data": generate_channels(cfg, seed=4).to_dict()}
        _, a = _run(tmp_path, doc, out="inline")
        _, b = _run(tmp_path, MINIMAL, out="drawn")
        assert (a / "solution.json").read_bytes() == (b / "solution.json").read_bytes()

    def test_discrete_fixed_values(self, tmp_path):
        doc = json.loads(json.dumps(MINIMAL))
        doc["constraints"] = {"amplitude_mode": "fixed_values", "beta": [0.9, 0.8, 0.7], "phase_mode": "discrete",
                              "tau": 4}
        code, out = _run(tmp_path, doc)
        assert code in (0, 3, 4)
        phase = json.loads((out / "solution.json").read_text())["phase"]
        assert phase["tau"] == 4
        np.testing.assert_allclose(np.concatenate(phase["amplitudes"]), [0.9, 0.8, 0.7])

    def test_infeasible_exit_code(self, tmp_path):
        doc = json.loads(json.dumps(MINIMAL))
        doc["system"].update(M=1, groups=[[0], [1], [2]], sinr_targets=50.0)
        code, out = _run(tmp_path, doc)
        assert code == 2
        assert json.loads((out / "solution.json").read_text())["W"] is None


class TestSweep:
    def test_more_elements_never_hurt_single_user(self, tmp_path):
        doc = {"system": {"M": 2, "irs_sizes": [2], "groups": [[0]], "noise_powers": 0.1, "sinr_targets": 1.0},
               "channel": {"seed": 2}, "algorithm": {"seed": 0, "trials": 200}}
        out = tmp_path / "sw"
        assert main(["sweep", "--scenario", _write(tmp_path, doc), "--out", str(out), "--axis", "N",
                     "--values", "2,4,8"]) == 0
        power = [float(r["final_objective"]) for r in _sweep_rows(out)]
        assert np.all(np.diff(power) <= 1e-8 * power[0])
        assert sorted(p.name for p in out.iterdir() if p.is_dir()) == ["N_2", "N_4", "N_8"]

    def test_empty_values(self, tmp_path):
        assert main(["sweep", "--scenario", _write(tmp_path, MINIMAL), "--out", str(tmp_path / "o"),
                     "--axis", "P", "--values", ""]) == 1

    def test_single_group_budget_linearity(self, tmp_path):
        doc = {"system": {"M": 2, "irs_sizes": [3], "groups": [[0, 1]], "noise_powers": 0.1, "sinr_targets": 1.0},
               "channel": {"seed": 5}, "algorithm": {"problem": "maxmin_qos", "seed": 0, "trials": 200}}
        out = tmp_path / "sw"
        assert main(["sweep", "--scenario", _write(tmp_path, doc), "--out", str(out), "--axis", "P",
                     "--values", "0.5,1,2,4", "--jobs", "2"]) == 0
        rows = _sweep_rows(out)
        ratio = [float(r["final_objective"]) / float(r["value"]) for r in rows]
        np.testing.assert_allclose(ratio, ratio[0], rtol=0.02)

    def test_nested_channels(self, tmp_path):
        out = tmp_path / "sw"
        assert main(["sweep", "--scenario", _write(tmp_path, MINIMAL), "--out", str(out), "--axis", "M",
                     "--values", "1,2"]) == 0
        small = json.loads((out / "M_1" / "report.json").read_text())
        assert small["scenario"]["system"]["M"] == 1


@pytest.mark.skipif(shutil.which("irsbeam") is None, reason="console script not installed")
def test_console_script(tmp_path):
    proc = subprocess.run(["irsbeam", "run", "--scenario", _write(tmp_path, MINIMAL), "--out", str(tmp_path / "o")],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "irsbeam.cli", "sweep", "--scenario", _write(tmp_path, MINIMAL),
                           "--out", str(tmp_path / "o"), "--axis", "bogus", "--values", "1"],
                          capture_output=True, text=True)
    assert proc.returncode != 0
