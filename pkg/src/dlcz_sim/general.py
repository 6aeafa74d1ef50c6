#!/usr/bin/env python3

############################################################################
#
# MODULE:       lib with general related helper functions for dlcz_sim
#
# AUTHOR(S):    dlcz_sim developers
#
# PURPOSE:      number of processes, free memory and dense operator
#               memory checks
#
# COPYRIGHT:	(C) 2026 by the dlcz_sim developers
#
# 		This program is free software under the GNU General Public
# 		License (>=v2). Read the file COPYING that comes with dlcz_sim
# 		for details.
#
#############################################################################

import multiprocessing as mp

import psutil

from .errors import DomainError
from .messages import fatal, verbose, warning

COMPLEX_BYTES = 16
MEMORY_SHARE = 0.8
SMALL_OPERATOR_MB = 64


def set_nprocs(nprocs):
    """Set nprocs to value if it is -2, otherwise check value."""
    if isinstance(nprocs, str):
        nprocs = int(nprocs)
    if nprocs == -2:
        return mp.cpu_count() - 1 if mp.cpu_count() > 1 else 1
    if nprocs < 1:
        fatal(f"Number of processes must be >= 1 or -2, got {nprocs}", DomainError)
    nprocs_real = mp.cpu_count()
    if nprocs > nprocs_real:
        warning(
            f"Using {nprocs} parallel processes but only "
            f"{nprocs_real} CPUs available.",
        )
    return nprocs


def _available_mb():
    """Available RAM plus free swap in MB."""
    return (psutil.virtual_memory().available + psutil.swap_memory().free) / 1024.0**2


def log_memory():
    """Log memory usage."""
    verbose(f"memory: {psutil.virtual_memory()!s}")
    verbose(f"swap memory: {psutil.swap_memory()!s}")
    verbose(f"available for dense operators: {_available_mb() * MEMORY_SHARE:.0f} MB")


def check_dense_memory(dim, n_matrices=4):
    """Check if dense complex dim x dim matrices fit into the free RAM.
    In case they do not fit, the simulation is aborted.

    Only MEMORY_SHARE of the available RAM and free swap is budgeted.

    Args:
        dim (int): dimension of the Hilbert space
        n_matrices (int): number of matrices held at the same time
    Returns:
        needed_mb(float): the memory needed in MB

    """
    needed_mb = n_matrices * COMPLEX_BYTES * float(dim) ** 2 / 1024.0**2
    if needed_mb < SMALL_OPERATOR_MB:
        return needed_mb
    budget_mb = _available_mb() * MEMORY_SHARE
    if budget_mb < needed_mb:
        fatal(
            f"Dense operators of dimension {dim} need {needed_mb:.0f} MB "
            f"but only {budget_mb:.0f} MB RAM available. Reduce n_max or the "
            "number of modes.",
            DomainError,
        )
    warning(f"Dense operators of dimension {dim} need {needed_mb:.0f} MB RAM.")
    return needed_mb
