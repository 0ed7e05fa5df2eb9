import json
import subprocess
import sys

import pytest

from envprobe import cli, jsonio

GUE42 = {
    "scenario": {"seed": 42, "d_S": 2, "d_E": 2, "hamiltonian": {"kind": "random_gue", "strength": 1.0},
                 "initial_state": {"kind": "random_pure"}},
}
TRIVIAL = {
    "scenario": {"seed": 1, "d_S": 2, "d_E": 1,
                 "hamiltonian": {"kind": "explicit", "matrix": [[0.5, 0.1], [0.1, -0.5]]},
                 "initial_state": {"kind": "explicit", "vector": [1, 0]}},
}


def _write(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return p


def _report(out):
    return jsonio.load(out / "report.json")


def test_trivial_pipeline(tmp_path):
    out = tmp_path / "run"
    assert cli.main(["pipeline", "--config", str(_write(tmp_path, TRIVIAL)), "--out", str(out)]) == 0
    rep = _report(out)
    assert rep["steering"]["K"] == 1
    assert rep["reconstruction"]["equivalence_deviation"] <= 1e-9


def test_gue_pipeline(tmp_path):
    out = tmp_path / "run"
    assert cli.main(["pipeline", "--config", str(_write(tmp_path, GUE42)), "--out", str(out)]) == 0
    rep = _report(out)
    assert rep["steering"]["K"] <= 2
    assert rep["spectral"]["L"] <= 6
    assert rep["reconstruction"]["equivalence_deviation"] <= 1e-6
    assert rep["reconstruction"]["true_affine_distance"] <= 1e-7
    assert rep["rng_algorithm"] and rep["tool"]["name"] == "envprobe"
    for key in ("triple", "steered", "delta_e", "spectral", "reconstruction", "samples", "verify", "lie", "timing"):
        assert (out / cli.ARTIFACTS[key]).exists()
    assert "timing" not in rep


def test_report_is_byte_identical(tmp_path):
    cfg = _write(tmp_path, GUE42)
    for name in ("a", "b"):
        assert cli.main(["pipeline", "--config", str(cfg), "--out", str(tmp_path / name)]) == 0
    assert (tmp_path / "a/report.json").read_bytes() == (tmp_path / "b/report.json").read_bytes()


def test_staged_run_matches_pipeline(tmp_path):
    cfg = _write(tmp_path, GUE42)
    cli.main(["pipeline", "--config", str(cfg), "--out", str(tmp_path / "p")])
    staged = tmp_path / "s"
    assert cli.main(["stage", "generate", "--config", str(cfg), "--out", str(staged)]) == 0
    for name in ("steer", "tomo", "verify", "lie"):
        # later stages pick the config up from the output directory
        assert cli.main(["stage", name, "--out", str(staged)]) == 0
    assert (tmp_path / "p/report.json").read_bytes() == (staged / "report.json").read_bytes()


def test_staged_trivial_steer(tmp_path):
    cfg = _write(tmp_path, TRIVIAL)
    out = tmp_path / "s"
    cli.main(["stage", "generate", "--config", str(cfg), "--out", str(out)])
    cli.main(["stage", "steer", "--out", str(out)])
    assert jsonio.load(out / "steered.json")["trace"]["halted_at"] == 1
    assert (out / "delta_e.csv").read_text().startswith("t,delta_e_sa\n")


def test_malformed_json_exits_1(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert cli.main(["pipeline", "--config", str(bad), "--out", str(tmp_path / "o")]) == 1
    assert "not valid JSON" in capsys.readouterr().err


@pytest.mark.parametrize("cfg", [
    {"scenario": {"seed": 1}},
    {"scenario": GUE42["scenario"], "extra": {}},
    {"scenario": GUE42["scenario"], "steering": {"nope": 1}},
    {"scenario": GUE42["scenario"], "control": {"controls": ["Q"]}},
])
def test_invalid_config_exits_1(tmp_path, cfg):
    assert cli.main(["pipeline", "--config", str(_write(tmp_path, cfg)), "--out", str(tmp_path / "o")]) == 1


def test_missing_artifact_exits_1(tmp_path, capsys):
    cfg = _write(tmp_path, GUE42)
    assert cli.main(["stage", "tomo", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1
    assert "steered.json" in capsys.readouterr().err


def test_stage_failure_exits_2(tmp_path, capsys):
    cfg = dict(GUE42, tomography={"samples": 3})
    assert cli.main(["pipeline", "--config", str(_write(tmp_path, cfg)), "--out", str(tmp_path / "o")]) == 2
    assert "stage tomo failed" in capsys.readouterr().err


def test_seed_override_and_csv(tmp_path):
    cfg = _write(tmp_path, GUE42)
    out = tmp_path / "o"
    assert cli.main(["pipeline", "--config", str(cfg), "--out", str(out), "--seed", "5", "--format", "csv"]) == 0
    rep = _report(out)
    assert rep["config"]["scenario"]["seed"] == 5
    assert rep["config"]["steering"]["rng_seed"] == 5
    lines = (out / "report.csv").read_text().splitlines()
    assert lines[0] == "key,value"
    assert any(line.startswith("steering.K,") for line in lines)


def test_full_flag_dumps_lie_basis(tmp_path):
    out = tmp_path / "o"
    cli.main(["pipeline", "--config", str(_write(tmp_path, GUE42)), "--out", str(out), "--full"])
    lie = jsonio.load(out / "lie.json")
    assert len(lie["basis"]) == lie["dimension"]


def test_mc_filter_flag(tmp_path):
    out = tmp_path / "o"
    assert cli.main(["pipeline", "--config", str(_write(tmp_path, GUE42)), "--out", str(out), "--mc-filter"]) == 0
    rep = _report(out)
    assert rep["config"]["steering"]["mc_filter"] is True
    assert rep["steering"]["restarts"] >= 0


def test_sweep(tmp_path):
    out = tmp_path / "sw"
    assert cli.main(["pipeline", "--config", str(_write(tmp_path, GUE42)), "--out", str(out),
                     "--sweep", "seeds=1..2"]) == 0
    summary = jsonio.load(out / "sweep.json")
    assert [r["seed"] for r in summary["runs"]] == [1, 2]
    assert (out / "seed_2" / "report.json").exists()
    assert cli.main(["pipeline", "--config", str(_write(tmp_path, GUE42)), "--out", str(out),
                     "--sweep", "1-2"]) == 1


def test_compare_identical_triples(tmp_path, capsys):
    out = tmp_path / "o"
    cli.main(["pipeline", "--config", str(_write(tmp_path, GUE42)), "--out", str(out)])
    capsys.readouterr()
    assert cli.main(["compare", str(out / "steered.json"), str(out / "steered.json")]) == 0
    assert json.loads(capsys.readouterr().out)["equivalence_deviation"] == 0.0
    assert cli.main(["compare", str(out / "steered.json"), str(out / "reconstruction.json")]) == 0
    assert json.loads(capsys.readouterr().out)["equivalence_deviation"] <= 1e-6


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "envprobe", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.startswith("envprobe ")
