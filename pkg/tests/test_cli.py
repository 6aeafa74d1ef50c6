#!/usr/bin/env python3

############################################################################
#
# MODULE:       tests of the dlcz-sim command line interface
#
# AUTHOR(S):    dlcz_sim developers
#
# PURPOSE:      subcommands, written files and exit codes
#
# COPYRIGHT:	(C) 2026 by the dlcz_sim developers
#
# 		This program is free software under the GNU General Public
# 		License (>=v2). Read the file COPYING that comes with dlcz_sim
# 		for details.
#
#############################################################################

import csv
import json

import pytest

from dlcz_sim.cli import EXIT_CONFIG, EXIT_ERROR, EXIT_OK, EXIT_USAGE, main


def read_report(path):
    with open(path, encoding="utf-8") as json_file:
        return json.load(json_file)


def last_error(capsys):
    return json.loads(capsys.readouterr().err.strip().splitlines()[-1])


def write_config(tmp_path, data):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(data, indent=2), encoding="utf-8")
    return str(path)


def test_fringe_exact(tmp_path):
    out = tmp_path / "fringe"
    code = main(["fringe", "--engine", "exact", "--seed", "7", "--out", str(out), "--quiet"])
    assert code == EXIT_OK
    with open(out / "fringe.csv", newline="", encoding="utf-8") as csv_file:
        rows = list(csv.DictReader(csv_file))
    assert len(rows) == 16
    assert list(rows[0]) == ["phase", "N_plus", "N_minus", "heralds"]
    report = read_report(out / "fringe.json")
    assert report["experiment"] == "fringe"
    assert 0.8 < report["results"]["V"] < 0.95
    assert report["provenance"]["seed"] == 7
    assert report["provenance"]["engine"] == "exact"
    assert report["config"]["experiment"]["seed"] == 7


def test_tomography_counts_can_be_analysed_again(tmp_path):
    simulated = tmp_path / "simulated"
    assert main(["tomo", "--engine", "exact", "--out", str(simulated), "--quiet"]) == EXIT_OK
    counts_path = simulated / "tomo_counts.csv"
    assert counts_path.is_file()
    analysed = tmp_path / "analysed"
    code = main(["tomo", "--counts", str(counts_path), "--out", str(analysed), "--quiet"])
    assert code == EXIT_OK
    first = read_report(simulated / "tomo.json")["results"]["result"]
    second = read_report(analysed / "tomo.json")["results"]["result"]
    assert second["concurrence"] == pytest.approx(first["concurrence"], abs=1e-3)
    assert second["fidelity"] == pytest.approx(first["fidelity"], abs=1e-3)


def test_chsh_from_a_count_table(tmp_path):
    simulated = tmp_path / "simulated"
    assert main(["chsh", "--engine", "exact", "--out", str(simulated), "--quiet"]) == EXIT_OK
    analysed = tmp_path / "analysed"
    code = main(
        ["chsh", "--counts", str(simulated / "chsh_counts.csv"), "--out", str(analysed), "--quiet"],
    )
    assert code == EXIT_OK
    result = read_report(analysed / "chsh.json")["results"]["result"]
    assert result["S"] == pytest.approx(2.47, abs=0.02)
    assert set(result["E"]) == {"a,b", "a,b'", "a',b", "a',b'"}


def test_config_errors_are_reported_as_json(tmp_path, capsys):
    path = write_config(tmp_path, {"noise": {"chix": 0.1}})
    code = main(["fringe", "--config", path, "--out", str(tmp_path / "out")])
    assert code == EXIT_CONFIG
    error = last_error(capsys)
    assert error["error"] == "ConfigError"
    assert error["field"] == "noise.chix"
    assert error["line"] == 3


def test_simulation_errors_exit_with_one(tmp_path, capsys):
    path = write_config(tmp_path, {"noise": {"chi": 0.0, "dark_prob": 0.0}})
    code = main(["fringe", "--config", path, "--engine", "exact", "--out", str(tmp_path / "out")])
    assert code == EXIT_ERROR
    assert last_error(capsys)["error"] == "HeraldImpossibleError"


@pytest.mark.parametrize("argv", [[], ["frobnicate"], ["fringe", "--engine", "magic"]])
def test_usage_errors(argv):
    assert main(argv) == EXIT_USAGE


def test_lock(tmp_path):
    path = write_config(tmp_path, {"phase_lock": {"duration": 0.2, "gains": [20.0, 50.0]}})
    out = tmp_path / "out"
    assert main(["lock", "--config", path, "--out", str(out), "--quiet"]) == EXIT_OK
    with open(out / "lock_gains.csv", newline="", encoding="utf-8") as csv_file:
        rows = list(csv.DictReader(csv_file))
    assert [float(row["k_i"]) for row in rows] == [20.0, 50.0]
    assert (out / "lock_trajectory.csv").is_file()
    assert read_report(out / "lock.json")["results"]["report"]["n_samples"] == 201


def test_run(tmp_path):
    out = tmp_path / "out"
    assert main(["run", "--trials", "2000", "--out", str(out), "--quiet"]) == EXIT_OK
    with open(out / "run_counts.csv", newline="", encoding="utf-8") as csv_file:
        counts = {row["outcome"]: int(row["counts"]) for row in csv.DictReader(csv_file)}
    assert counts["trials"] == 2000
    assert (out / "run_events.csv").is_file()
    assert read_report(out / "run.json")["results"]["summary"]["trials"] == 2000


def test_fixed_seed_gives_identical_outputs(tmp_path):
    outputs = []
    for name in ("first", "second"):
        out = tmp_path / name
        argv = ["fringe", "--seed", "3", "--out", str(out), "--quiet"]
        assert main(argv) == EXIT_OK
        report = read_report(out / "fringe.json")
        report["provenance"].pop("timestamp")
        outputs.append(((out / "fringe.csv").read_bytes(), json.dumps(report, sort_keys=True)))
    assert outputs[0] == outputs[1]
