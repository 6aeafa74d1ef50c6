#!/usr/bin/env python3

############################################################################
#
# MODULE:       lib with the file input and output of dlcz_sim
#
# AUTHOR(S):    dlcz_sim developers
#
# PURPOSE:      output directory check, count tables, CSV data tables and
#               JSON reports with provenance
#
# COPYRIGHT:	(C) 2026 by the dlcz_sim developers
#
# 		This program is free software under the GNU General Public
# 		License (>=v2). Read the file COPYING that comes with dlcz_sim
# 		for details.
#
#############################################################################

import csv
import hashlib
import json
import os
from datetime import datetime, timezone

import numpy as np

from .errors import ValidationError
from .messages import fatal, message, verbose, warning
from .validation import (
    HERMITIAN_TOL,
    NEGATIVE_EIGENVALUE_TOL,
    POVM_TOL,
    TRACE_TOL,
    UNITARY_TOL,
)

COUNT_COLUMNS = ("setting_id", "outcome_id", "counts")


def check_out_dir(out_dir):
    """Check if the output directory exists, create it otherwise.

    Args:
        out_dir (str): Output directory parameter
    Returns:
        (str): Path to the output directory

    """
    if not out_dir:
        out_dir = os.getcwd()
    elif not os.path.isdir(out_dir):
        message(f"Output folder {out_dir} does not exist and will be created.")
        os.makedirs(out_dir)
    elif os.listdir(out_dir):
        warning(
            f"Output folder {out_dir} exists and is not empty. Files with "
            "the same names will be overwritten.",
        )
    verbose(f"Output directory: {out_dir}")
    return out_dir


def read_count_table(path):
    """Read a count table with the columns setting_id, outcome_id, counts.

    Args:
        path (str): CSV file
    Returns:
        (dict): (setting_id, outcome_id) -> counts

    """
    table = {}
    with open(path, newline="", encoding="utf-8") as csv_file:
        reader = csv.DictReader(csv_file)
        missing = set(COUNT_COLUMNS) - set(reader.fieldnames or ())
        if missing:
            fatal(
                f"Count table {path} misses the column(s) {sorted(missing)}",
                ValidationError,
            )
        for num, row in enumerate(reader, start=2):
            try:
                counts = int(row["counts"])
            except ValueError:
                fatal(
                    f"Line {num} of {path}: counts <{row['counts']}> is not an integer",
                    ValidationError,
                )
            if counts < 0:
                fatal(f"Line {num} of {path}: negative counts", ValidationError)
            key = (row["setting_id"].strip(), row["outcome_id"].strip())
            table[key] = table.get(key, 0) + counts
    verbose(f"Read {len(table)} count entries from {path}")
    return table


def write_count_table(path, table):
    """Write a (setting_id, outcome_id) -> counts mapping as CSV.

    Expected counts of the exact engine are rounded to whole counts.
    """
    rows = [(setting, outcome, int(round(counts))) for (setting, outcome), counts in table.items()]
    write_csv_table(path, COUNT_COLUMNS, rows)


def write_csv_table(path, columns, rows):
    """Write a data table with a header line.

    Args:
        path (str): CSV file
        columns (list): column names
        rows (iterable): rows with one value per column

    """
    with open(path, "w", newline="", encoding="utf-8") as csv_file:
        writer = csv.writer(csv_file)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_plain(value) for value in row])
    verbose(f"Wrote {path}")


def _plain(value):
    """Convert numpy values into JSON/CSV friendly python values."""
    if isinstance(value, np.ndarray):
        return [_plain(item) for item in value.tolist()]
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return _plain(float(value))
    if isinstance(value, (complex, np.complexfloating)):
        return {"re": float(np.real(value)), "im": float(np.imag(value))}
    if isinstance(value, (np.bool_,)):
        return bool(value)
    if isinstance(value, dict):
        return {str(key): _plain(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(item) for item in value]
    if isinstance(value, float) and not np.isfinite(value):
        return str(value)
    return value


def config_hash(config):
    """sha256 of the canonical JSON form of a configuration."""
    if hasattr(config, "as_dict"):
        config = config.as_dict()
    canonical = json.dumps(_plain(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def provenance(config, seed, engine):
    from . import __version__

    return {
        "package": "dlcz_sim",
        "version": __version__,
        "config_sha256": config_hash(config),
        "seed": seed,
        "engine": engine,
        "tolerances": {
            "hermitian": HERMITIAN_TOL,
            "trace": TRACE_TOL,
            "unitary": UNITARY_TOL,
            "povm": POVM_TOL,
            "negative_eigenvalue": NEGATIVE_EIGENVALUE_TOL,
        },
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }


def write_json_report(path, name, results, config, seed, engine):
    """Write a JSON report with a provenance block.

    Args:
        path (str): JSON file
        name (str): name of the experiment
        results (dict): the estimates
        config (ExperimentConfig|dict): the configuration of the run
        seed (int): master seed
        engine (str): "exact" or "sampling"
    Returns:
        (dict): the written report

    """
    report = {
        "experiment": name,
        "results": _plain(results),
        "config": _plain(config.as_dict() if hasattr(config, "as_dict") else config),
        "provenance": provenance(config, seed, engine),
    }
    with open(path, "w", encoding="utf-8") as json_file:
        json.dump(report, json_file, indent=2, sort_keys=True)
        json_file.write("\n")
    message(f"Report written to {path}")
    return report
