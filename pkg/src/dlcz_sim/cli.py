#!/usr/bin/env python3

############################################################################
#
# MODULE:       dlcz-sim command line interface
#
# AUTHOR(S):    dlcz_sim developers
#
# PURPOSE:      runs the experiments of a configuration file and writes
#               JSON reports and CSV data tables
#
# COPYRIGHT:	(C) 2026 by the dlcz_sim developers
#
# 		This program is free software under the GNU General Public
# 		License (>=v2). Read the file COPYING that comes with dlcz_sim
# 		for details.
#
#############################################################################

import argparse
import json
import os
import sys

from .config import ENGINES, load_config
from .data_io import (
    check_out_dir,
    read_count_table,
    write_count_table,
    write_csv_table,
    write_json_report,
)
from .errors import ConfigError, DlczSimError
from .estimation import CHSH_OUTCOMES, chsh, tomography
from .experiment import (
    calibrate,
    chsh_experiment,
    delay_choice_sweep,
    fringe_experiment,
    lock_experiment,
    mode_matrix_experiment,
    phase_pool,
    run_trials,
    tomography_experiment,
)
from .general import log_memory
from .messages import message, set_verbosity
from .node import bell_state
from .phase_lock import write_trajectory_csv

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_USAGE = 2
EXIT_CONFIG = 3

SUBCOMMANDS = ("run", "fringe", "matrix", "tomo", "chsh", "delay", "lock", "calibrate")
TOMO_OUTCOME = "coincidence"


def build_parser():
    parser = argparse.ArgumentParser(
        prog="dlcz-sim",
        description="Simulate heralded entanglement between two atomic ensembles.",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON configuration file (defaults if omitted)")
    common.add_argument("--seed", type=int, help="master seed, overrides the file")
    common.add_argument("--trials", type=int, help="trials per setting, overrides the file")
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--engine", choices=ENGINES, help="exact or sampling engine")
    verbosity = common.add_mutually_exclusive_group()
    verbosity.add_argument("--verbose", action="store_true", help="debug output")
    verbosity.add_argument("--quiet", action="store_true", help="warnings and errors only")
    subparsers = parser.add_subparsers(dest="command", metavar="SUBCOMMAND")
    subparsers.required = True
    helps = {
        "run": "write/read trials with time-tagged records",
        "fringe": "interference fringe sweep and fit",
        "matrix": "mode matrix and concurrence bound",
        "tomo": "two-qubit polarization tomography",
        "chsh": "CHSH correlations",
        "delay": "delay-choice sweep",
        "lock": "interferometer phase lock",
        "calibrate": "fit noise parameters to observables",
    }
    for name in SUBCOMMANDS:
        sub = subparsers.add_parser(name, parents=[common], help=helps[name])
        if name in ("tomo", "chsh"):
            sub.add_argument("--counts", help="count table (CSV) to analyse instead of simulating")
    return parser


def _overrides(args):
    return {
        "experiment.seed": args.seed,
        "experiment.trials": args.trials,
        "experiment.engine": args.engine,
    }


def _out(args, name):
    return os.path.join(args.out, name)


def _report(args, config, name, results):
    write_json_report(
        _out(args, f"{name}.json"),
        name,
        results,
        config,
        config.run.seed,
        config.run.engine,
    )


def cmd_run(args, config):
    result = run_trials(config)
    write_csv_table(
        _out(args, "run_counts.csv"),
        ("outcome", "counts"),
        sorted(result.counts.items()),
    )
    rows = []
    for record in result.records:
        for event in record.events:
            rows.append(
                (
                    record.trial_id,
                    record.branch,
                    record.phase,
                    event.detector_id,
                    event.time,
                    event.position,
                ),
            )
    write_csv_table(
        _out(args, "run_events.csv"),
        ("trial_id", "branch", "phase", "detector", "time", "position"),
        rows,
    )
    _report(args, config, "run", result.as_dict())


def _fringe_results(fringe):
    return {
        "V": fringe["V"],
        "V_err": fringe["V_err"],
        "fits": {channel: fit.as_dict() for channel, fit in fringe["fits"].items()},
    }


def cmd_fringe(args, config):
    fringe = fringe_experiment(config, pool=phase_pool(config))
    write_csv_table(
        _out(args, "fringe.csv"),
        ("phase", "N_plus", "N_minus", "heralds"),
        fringe["data"].rows(),
    )
    _report(args, config, "fringe", _fringe_results(fringe))


def cmd_matrix(args, config):
    result = mode_matrix_experiment(config, pool=phase_pool(config))
    write_csv_table(
        _out(args, "fringe.csv"),
        ("phase", "N_plus", "N_minus", "heralds"),
        result["fringe"]["data"].rows(),
    )
    _report(
        args,
        config,
        "matrix",
        {
            "counts": result["counts"],
            "signal_only": result["signal_only"],
            "matrix": result["matrix"].as_dict(),
            "concurrence": result["concurrence"].as_dict(),
            "concurrence_plus": result["concurrence_plus"].as_dict(),
            "concurrence_minus": result["concurrence_minus"].as_dict(),
            "fringe": _fringe_results(result["fringe"]),
        },
    )


def cmd_tomo(args, config):
    if args.counts:
        table = read_count_table(args.counts)
        counts = {setting: value for (setting, outcome), value in table.items() if outcome == TOMO_OUTCOME}
        result = tomography(
            counts,
            target=bell_state(),
            bootstrap=config.run.tomo_bootstrap,
            seed=config.run.seed,
            nprocs=config.run.nprocs,
        )
        results = {"result": result.as_dict(), "counts": counts}
    else:
        experiment = tomography_experiment(config, pool=phase_pool(config))
        counts = experiment["counts"]
        write_count_table(
            _out(args, "tomo_counts.csv"),
            {(setting, TOMO_OUTCOME): value for setting, value in counts.items()},
        )
        results = {
            "result": experiment["result"].as_dict(),
            "counts": counts,
            "model_fidelity": experiment["model_fidelity"],
            "note": experiment["note"],
        }
    _report(args, config, "tomo", results)


def cmd_chsh(args, config):
    if args.counts:
        table = read_count_table(args.counts)
        counts = {}
        for (setting, outcome), value in table.items():
            counts.setdefault(setting, {})[outcome] = value
        result = chsh(counts)
    else:
        experiment = chsh_experiment(config, pool=phase_pool(config))
        counts = experiment["counts"]
        result = experiment["result"]
        write_count_table(
            _out(args, "chsh_counts.csv"),
            {
                (setting, outcome): counts[setting][outcome]
                for setting in counts
                for outcome in CHSH_OUTCOMES
            },
        )
    _report(args, config, "chsh", {"result": result.as_dict(), "counts": counts})


def cmd_delay(args, config):
    result = delay_choice_sweep(config)
    write_csv_table(
        _out(args, "delay.csv"),
        ("delay", "ordering", "interval", "V", "V_err", "C_p", "C_p_err"),
        result.rows(),
    )
    _report(args, config, "delay", result.as_dict())


def cmd_lock(args, config):
    result = lock_experiment(config)
    write_trajectory_csv(result["report"], _out(args, "lock_trajectory.csv"))
    write_csv_table(
        _out(args, "lock_gains.csv"),
        ("k_i", "residual_std", "lock_acquired", "settling_time", "saturated"),
        [
            (gain, r.residual_std, r.lock_acquired, r.settling_time, r.saturated)
            for gain, r in result["scan"]
        ],
    )
    _report(
        args,
        config,
        "lock",
        {
            "report": result["report"].summary(),
            "scan": [{"k_i": gain, **r.summary()} for gain, r in result["scan"]],
        },
    )


def cmd_calibrate(args, config):
    result = calibrate(config)
    results = result.as_dict()
    results["noise"] = {
        name: getattr(result.params, name)
        for name in config.raw["noise"]
    }
    _report(args, config, "calibrate", results)


COMMANDS = {
    "run": cmd_run,
    "fringe": cmd_fringe,
    "matrix": cmd_matrix,
    "tomo": cmd_tomo,
    "chsh": cmd_chsh,
    "delay": cmd_delay,
    "lock": cmd_lock,
    "calibrate": cmd_calibrate,
}


def _error(error, code):
    payload = error.as_dict() if isinstance(error, ConfigError) else {
        "error": type(error).__name__,
        "message": str(error),
    }
    sys.stderr.write(json.dumps(payload) + "\n")
    return code


def main(argv=None):
    """Entry point of dlcz-sim.

    Returns:
        (int): 0 on success, 1 on simulation errors, 2 on usage errors and
               3 on configuration errors

    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as error:
        return EXIT_OK if error.code == 0 else EXIT_USAGE
    set_verbosity("DEBUG" if args.verbose else "WARNING" if args.quiet else "INFO")
    if args.verbose:
        log_memory()
    try:
        config = load_config(args.config, _overrides(args))
        args.out = check_out_dir(args.out)
        COMMANDS[args.command](args, config)
    except ConfigError as error:
        return _error(error, EXIT_CONFIG)
    except DlczSimError as error:
        return _error(error, EXIT_ERROR)
    message(f"dlcz-sim {args.command} finished")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
