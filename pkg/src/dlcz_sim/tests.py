#!/usr/bin/env python3

############################################################################
#
# MODULE:       lib with test related helper functions for dlcz_sim
#
# AUTHOR(S):    dlcz_sim developers
#
# PURPOSE:      assertion helpers for states and probabilities
#
# COPYRIGHT:	(C) 2026 by the dlcz_sim developers
#
# 		This program is free software under the GNU General Public
# 		License (>=v2). Read the file COPYING that comes with dlcz_sim
# 		for details.
#
#############################################################################

import numpy as np

from .fock import DensityOperator


def check_density_operator(rho, atol=1e-9):
    """Check that a state is Hermitian, positive and of unit trace.

    Args:
        rho (DensityOperator|numpy.ndarray): the state
        atol (float): absolute tolerance

    """
    matrix = np.asarray(rho.matrix if isinstance(rho, DensityOperator) else rho)
    assert np.allclose(matrix, matrix.conj().T, atol=atol), "The state is not Hermitian"
    trace = np.trace(matrix).real
    assert abs(trace - 1) <= atol, f"The trace is {trace} but should be 1"
    smallest = np.linalg.eigvalsh((matrix + matrix.conj().T) / 2).min()
    assert smallest >= -atol, f"The smallest eigenvalue is {smallest}"


def check_probability_vector(probabilities, atol=1e-9):
    """Check that values are probabilities summing to one."""
    values = np.asarray(list(probabilities.values()) if isinstance(probabilities, dict) else probabilities)
    assert np.all(values >= -atol), f"Negative probabilities in {values}"
    assert abs(values.sum() - 1) <= atol, f"The probabilities sum to {values.sum()}"


def check_close_up_to_phase(first, second, atol=1e-9):
    """Check that two state vectors agree up to a global phase."""
    first = np.asarray(first, dtype=complex)
    second = np.asarray(second, dtype=complex)
    overlap = np.vdot(first, second)
    phase = overlap / abs(overlap) if abs(overlap) > 0 else 1.0
    assert np.allclose(first * phase, second, atol=atol), (
        f"The vectors differ by more than a global phase: {first} vs {second}"
    )
