"""Config parsing, the experiment registry and the command-line runner."""
import json
import sys
from pathlib import Path

import h5py
import pytest

from app.cli.config import RunConfig, parse_measure, parse_target
from app.cli.experiments import EXPERIMENTS, list_experiments
from app.cli.runner import EXIT_INVALID, EXIT_OK, EXIT_RUNTIME, main, run
from app.errors import ConfigError
from app.model.torus import GridMeasure, TorusGrid, atoms, dirac, uniform
from app.targets.processes import BernoulliTarget, PoissonJumpTarget

LINE = TorusGrid(1, 4)
CONFIGS = Path(__file__).parent / "configs"


def write_config(tmp_path, data, name="run.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return path


# ---------------------------------------------------------------------------
# Config
# ---------------------------------------------------------------------------

def test_registry_lists_every_experiment():
    lines = list_experiments().splitlines()
    assert len(lines) == 1 + len(EXPERIMENTS) == 9
    assert lines[0].split()[:2] == ["experiment", "output"]
    assert {line.split()[0] for line in lines[1:]} == set(EXPERIMENTS)


def test_run_config_round_trip():
    data = {"experiment": "det-value", "seed": 3, "grid": {"dim": 1, "n": 4},
            "parameters": {"mu": {"dirac": 0}, "nu": {"dirac": 2}}}
    cfg = RunConfig.from_dict(data)
    assert RunConfig.from_dict(cfg.to_dict()) == cfg
    assert cfg.sha256() == RunConfig.from_dict(json.loads(json.dumps(data))).sha256()
    assert cfg.sha256() != RunConfig.from_dict({**data, "seed": 4}).sha256()


@pytest.mark.parametrize("data,field", [
    ({"parameters": {}}, "experiment"),
    ({"experiment": "x", "extra": 1}, "extra"),
    ({"experiment": "x", "seed": -1}, "seed"),
    ({"experiment": "x", "seed": 2 ** 64}, "seed"),
    ({"experiment": "x", "parameters": []}, "parameters"),
])
def test_run_config_rejects(data, field):
    with pytest.raises(ConfigError) as info:
        RunConfig.from_dict(data)
    assert info.value.field == field


def test_measure_presets():
    assert parse_measure({"dirac": 2}, LINE) == dirac(LINE, 2)
    assert parse_measure("uniform", LINE) == uniform(LINE)
    assert parse_measure({"uniform": True}, LINE) == uniform(LINE)
    assert parse_measure({"two_atoms": [0, 1]}, LINE) == atoms(LINE, [0, 1])
    assert parse_measure([0.5, 0.5, 0, 0], LINE) == GridMeasure(LINE, [0.5, 0.5, 0, 0])
    assert parse_measure({"weights": [0, 0, 0, 1]}, LINE) == dirac(LINE, 3)
    with pytest.raises(ConfigError):
        parse_measure({"two_atoms": [0, 1, 2]}, LINE)
    with pytest.raises(ConfigError):
        parse_measure({"dirac": 9}, LINE)
    with pytest.raises(ConfigError):
        parse_measure({"gaussian": 1}, LINE)


def test_target_parsing():
    b = parse_target({"kind": "bernoulli", "nu1": {"dirac": 2}, "nu2": {"dirac": 1}, "p": 0.3}, LINE)
    assert isinstance(b, BernoulliTarget) and b.nu_pre is None
    j = parse_target({"kind": "poisson_jump", "nu0": {"dirac": 0}, "intensity": {"constant": 2},
                      "operator": {"translate": [1]}}, LINE)
    assert isinstance(j, PoissonJumpTarget)
    with pytest.raises(ConfigError) as info:
        parse_target({"kind": "bernoulli", "nu1": {"dirac": 2}, "nu2": {"dirac": 1}}, LINE)
    assert info.value.field == "parameters.target.p"
    with pytest.raises(ConfigError):
        parse_target({"kind": "levy"}, LINE)


# ---------------------------------------------------------------------------
# Runner
# ---------------------------------------------------------------------------

def test_wasserstein_of_identical_measures(tmp_path, capsys):
    path = write_config(tmp_path, {"experiment": "wasserstein", "grid": {"dim": 2, "n": 3},
                                   "parameters": {"mu": "uniform", "nu": "uniform"}})
    assert run(path) == EXIT_OK
    doc = json.loads((tmp_path / "run.result.json").read_text())
    assert doc["distance"] == 0.0
    assert doc["seed"] == 0
    assert len(doc["config_sha256"]) == 64
    assert "wasserstein" in capsys.readouterr().out


def test_det_value_output(tmp_path):
    path = write_config(tmp_path, {"experiment": "det-value", "grid": {"dim": 1, "n": 4},
                                   "parameters": {"mu": {"dirac": 0}, "nu": {"dirac": 2}, "t": 0.0, "T": 1.0,
                                                  "t_list": [0.0, 0.5, 0.9]}})
    out = tmp_path / "det.json"
    assert run(path, output=str(out)) == EXIT_OK
    doc = json.loads(out.read_text())
    assert doc["u_det"] == 0.125
    assert doc["omega"] == 0.125
    assert doc["rescale_drift"] <= 1e-12


def test_malformed_json_is_invalid(tmp_path, capsys):
    path = tmp_path / "broken.json"
    path.write_text('{"experiment": "det-value",\n "seed": }')
    assert run(path) == EXIT_INVALID
    assert "line 2" in capsys.readouterr().err


def test_unknown_experiment_is_invalid(tmp_path, capsys):
    path = write_config(tmp_path, {"experiment": "teleport"})
    assert run(path) == EXIT_INVALID
    assert "teleport" in capsys.readouterr().err


BAD_PARAMETERS = [
    ("blowup-probe", {"nu": {"dirac": 0}, "operator": {"translate": [2]}, "lambda": 2.0,
                      "epsilons": ["tiny"]}, "parameters.epsilons[0]"),
    ("gap-curve", {"mu": {"dirac": 0}, "target": {"kind": "constant", "nu": {"dirac": 2}},
                   "policy": {"kind": "geodesic"}, "t_list": [0.5], "rel_tol": "10%"}, "parameters.rel_tol"),
    ("gap-curve", {"mu": {"dirac": 0}, "target": {"kind": "constant", "nu": {"dirac": 2}},
                   "policy": {"kind": "geodesic"}, "t_list": []}, "parameters.t_list"),
    ("det-value", {"mu": {"dirac": 0}, "nu": {"dirac": 2}, "t_list": [0.0, "late"]}, "parameters.t_list[1]"),
    ("steering-check", {"sigma": {"power": {"K": 1, "gamma": 1}}, "n_paths": 4, "x0_offset": 0.0,
                        "dt_min": "small"}, "parameters.dt_min"),
    ("superdiff-test", {"n_instances": 4, "max_atoms": 0}, "parameters.max_atoms"),
    ("hjb-residual", {"n_pairs": 4, "max_atoms": "two"}, "parameters.max_atoms"),
    ("simulate", {"mu": {"dirac": 0}, "policy": {"kind": "geodesic"},
                  "target": {"kind": "bernoulli", "nu1": {"dirac": 2}, "nu2": {"dirac": 1}, "p": 0.5,
                             "switch_time": "mid"}}, "parameters.target.switch_time"),
]


@pytest.mark.parametrize("experiment,parameters,field", BAD_PARAMETERS)
def test_malformed_parameters_are_invalid(tmp_path, capsys, experiment, parameters, field):
    path = write_config(tmp_path, {"experiment": experiment, "grid": {"dim": 1, "n": 4},
                                   "parameters": parameters})
    assert run(path, threads=1) == EXIT_INVALID
    assert field in capsys.readouterr().err
    assert not list(tmp_path.glob("run.result.*"))


def test_failed_rollout_is_a_runtime_error(tmp_path, capsys):
    path = write_config(tmp_path, {
        "experiment": "simulate", "grid": {"dim": 1, "n": 4},
        "parameters": {"mu": {"dirac": 0}, "target": {"kind": "constant", "nu": {"dirac": 2}},
                       "policy": {"kind": "idle"}, "n_paths": 4},
    })
    assert run(path) == EXIT_RUNTIME
    assert "error:" in capsys.readouterr().err
    assert not (tmp_path / "run.result.json").exists()


def test_shipped_blowup_config_shows_growth(tmp_path):
    out = tmp_path / "blowup.csv"
    assert run(CONFIGS / "blowup_probe.json", output=str(out)) == EXIT_OK
    rows = [line.split(",") for line in out.read_text().splitlines() if not line.startswith("#")]
    assert rows[0] == ["epsilon", "lower_bound", "floor_bound"]
    bounds = [float(row[1]) for row in rows[1:]]
    assert len(bounds) == 4
    assert bounds[-1] / bounds[0] >= 10


GAP_CONFIG = {
    "experiment": "gap-curve", "seed": 5, "grid": {"dim": 1, "n": 4},
    "parameters": {
        "mu": {"dirac": 0},
        "target": {"kind": "poisson_jump", "nu0": {"dirac": 0}, "intensity": {"constant": 2},
                   "operator": {"translate": [1]}},
        "policy": {"kind": "replanning"},
        "t_list": [0.5, 0.75],
        "n_paths": 600,
    },
}


def test_csv_output_and_trailer(tmp_path):
    path = write_config(tmp_path, GAP_CONFIG)
    assert run(path, threads=1) == EXIT_OK
    lines = (tmp_path / "run.result.csv").read_text().splitlines()
    assert lines[0] == "t,T_minus_t,mc_mean,mc_stderr,u_det,gap"
    assert len(lines) == 4
    sha = RunConfig.load(path).sha256()
    assert lines[-1] == f"# config_sha256={sha} seed=5"
    assert lines[1].split(",")[0] == "0.5"


def test_output_does_not_depend_on_threads(tmp_path):
    path = write_config(tmp_path, GAP_CONFIG)
    one, four = tmp_path / "one.csv", tmp_path / "four.csv"
    assert run(path, output=str(one), threads=1) == EXIT_OK
    assert run(path, output=str(four), threads=4) == EXIT_OK
    assert one.read_bytes() == four.read_bytes()


def test_seed_override(tmp_path):
    path = write_config(tmp_path, GAP_CONFIG)
    out = tmp_path / "seeded.csv"
    assert run(path, output=str(out), threads=1, seed=42) == EXIT_OK
    assert out.read_text().splitlines()[-1].endswith("seed=42")
    assert run(path, output=str(out), seed=-3) == EXIT_INVALID


def test_store_writes_workbook(tmp_path):
    data = json.loads(json.dumps(GAP_CONFIG))
    data["experiment"] = "simulate"
    data["parameters"].pop("t_list")
    data["parameters"]["keep_paths"] = True
    path = write_config(tmp_path, data)
    assert run(path, threads=1, store=True) == EXIT_OK
    with h5py.File(tmp_path / "run.result.h5", "r") as h5:
        assert "inputs/config" in h5
        assert "outputs/simulate" in h5
        assert h5["outputs/paths/simulate/cost"].shape == (600,)


def test_show_reads_a_stored_workbook(tmp_path, capsys):
    data = json.loads(json.dumps(GAP_CONFIG))
    data["experiment"] = "simulate"
    data["parameters"].pop("t_list")
    data["parameters"]["keep_paths"] = True
    path = write_config(tmp_path, data)
    assert run(path, threads=1, store=True) == EXIT_OK
    workbook = tmp_path / "run.result.h5"
    capsys.readouterr()

    assert main(["show", str(workbook)]) == EXIT_OK
    listing = capsys.readouterr().out.splitlines()
    assert listing == [
        "inputs/config  json",
        "outputs/paths/simulate/cost  array 600",
        "outputs/simulate  json",
    ]

    assert main(["show", str(workbook), "outputs/simulate"]) == EXIT_OK
    stored = json.loads(capsys.readouterr().out)
    written = json.loads((tmp_path / "run.result.json").read_text())
    assert stored["mean_cost"] == written["mean_cost"]
    assert stored["per_path_costs"] == written["per_path_costs"]

    assert main(["show", str(workbook), "outputs/paths/simulate/cost"]) == EXIT_OK
    column = capsys.readouterr().out.splitlines()
    assert column[0] == "cost"
    assert [float(v) for v in column[1:]] == written["per_path_costs"]


def test_show_prints_a_stored_table(tmp_path, capsys):
    path = write_config(tmp_path, GAP_CONFIG)
    assert run(path, threads=1, store=True) == EXIT_OK
    capsys.readouterr()
    workbook = tmp_path / "run.result.h5"
    assert main(["show", str(workbook)]) == EXIT_OK
    assert "outputs/tables/gap-curve  table 2 rows x 6 columns" in capsys.readouterr().out
    assert main(["show", str(workbook), "outputs/tables/gap-curve"]) == EXIT_OK
    table = capsys.readouterr().out.splitlines()
    assert table[0] == "t,T_minus_t,mc_mean,mc_stderr,u_det,gap"
    assert len(table) == 3
    assert table[1].split(",")[0] == "0.5"


def test_show_rejects_missing_workbook_and_entry(tmp_path, capsys):
    assert main(["show", str(tmp_path / "absent.h5")]) == EXIT_INVALID
    assert "no workbook" in capsys.readouterr().err
    path = write_config(tmp_path, GAP_CONFIG)
    assert run(path, threads=1, store=True) == EXIT_OK
    capsys.readouterr()
    assert main(["show", str(tmp_path / "run.result.h5"), "outputs/tables/nothing"]) == EXIT_INVALID
    assert "outputs/tables/nothing" in capsys.readouterr().err

def test_main_list(capsys):
    assert main(["list"]) == EXIT_OK
    assert "superdiff-test" in capsys.readouterr().out


def test_help_lists_experiments(capsys):
    with pytest.raises(SystemExit) as info:
        main(["--help"])
    assert info.value.code == 0
    out = capsys.readouterr().out
    assert all(name in out for name in EXPERIMENTS)


def test_single_path_simulate_is_repeatable(tmp_path):
    data = json.loads(json.dumps(GAP_CONFIG))
    data["experiment"] = "simulate"
    data["parameters"].pop("t_list")
    data["parameters"]["n_paths"] = 1
    path = write_config(tmp_path, data)
    first, second = tmp_path / "a.json", tmp_path / "b.json"
    assert run(path, output=str(first)) == EXIT_OK
    assert run(path, output=str(second)) == EXIT_OK
    assert first.read_bytes() == second.read_bytes()


def test_main_run(tmp_path):
    path = write_config(tmp_path, {"experiment": "superdiff-test", "grid": {"dim": 1, "n": 4},
                                   "parameters": {"n_instances": 20, "max_atoms": 2}})
    assert main(["run", str(path), "--threads", "1"]) == EXIT_OK
    doc = json.loads((tmp_path / "run.result.json").read_text())
    assert doc["violations"] == 0


if __name__ == "__main__":
    sys.exit(pytest.main([__file__]))
