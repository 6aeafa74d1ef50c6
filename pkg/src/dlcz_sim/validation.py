#!/usr/bin/env python3

############################################################################
#
# MODULE:       lib with validation related helper functions for dlcz_sim
#
# AUTHOR(S):    dlcz_sim developers
#
# PURPOSE:      checks of probabilities, unitaries, density matrices and
#               POVMs which abort with the matching error class
#
# COPYRIGHT:	(C) 2026 by the dlcz_sim developers
#
# 		This program is free software under the GNU General Public
# 		License (>=v2). Read the file COPYING that comes with dlcz_sim
# 		for details.
#
#############################################################################

import numpy as np

from .errors import DomainError, ShapeError, ValidationError
from .messages import fatal

HERMITIAN_TOL = 1e-10
TRACE_TOL = 1e-10
UNITARY_TOL = 1e-10
POVM_TOL = 1e-10
NEGATIVE_EIGENVALUE_TOL = 1e-9


def check_probability(name, value, upper_open=False):
    """Check that a value lies in [0, 1] (or [0, 1) if upper_open)."""
    value = float(value)
    upper_ok = value < 1.0 if upper_open else value <= 1.0
    if not (np.isfinite(value) and value >= 0.0 and upper_ok):
        interval = "[0, 1)" if upper_open else "[0, 1]"
        fatal(f"<{name}> must be in {interval}, got {value}", DomainError)
    return value


def check_positive(name, value, strict=True):
    """Check that a value is positive (strict) or non-negative."""
    value = float(value)
    if np.isnan(value) or value < 0.0 or (strict and value == 0.0):
        relation = "> 0" if strict else ">= 0"
        fatal(f"<{name}> must be {relation}, got {value}", DomainError)
    return value


def check_square(name, matrix):
    """Check that an array is a square matrix and return it as complex."""
    matrix = np.asarray(matrix, dtype=complex)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        fatal(
            f"<{name}> must be a square matrix, got shape {matrix.shape}",
            ShapeError,
        )
    return matrix


def check_unitary(matrix, name="U"):
    """Check U^dagger U = I within UNITARY_TOL."""
    matrix = check_square(name, matrix)
    deviation = np.max(
        np.abs(matrix.conj().T @ matrix - np.eye(matrix.shape[0])),
    )
    if deviation > UNITARY_TOL:
        fatal(
            f"<{name}> is not unitary (max |U^dag U - I| = {deviation:.2e})",
            ValidationError,
        )
    return matrix


def check_density_matrix(matrix, name="rho"):
    """Check that a matrix is Hermitian, has unit trace and is PSD.

    Args:
        matrix (array): The matrix to check
        name (str): Name used in the error message

    Returns:
        (numpy.ndarray): The matrix as complex array

    """
    matrix = check_square(name, matrix)
    if np.max(np.abs(matrix - matrix.conj().T)) > HERMITIAN_TOL:
        fatal(f"<{name}> is not Hermitian", ValidationError)
    trace = np.trace(matrix).real
    if abs(trace - 1.0) > TRACE_TOL:
        fatal(f"<{name}> has trace {trace}, expected 1", ValidationError)
    min_eig = np.linalg.eigvalsh(matrix).min()
    if min_eig < -NEGATIVE_EIGENVALUE_TOL:
        fatal(
            f"<{name}> is not positive semidefinite "
            f"(minimum eigenvalue {min_eig:.3e})",
            ValidationError,
        )
    return matrix


def check_povm(elements, dim):
    """Check that POVM elements are PSD and sum to the identity.

    Args:
        elements (list): List of dim x dim matrices
        dim (int): Dimension of the Hilbert space

    Returns:
        (list): The elements as complex arrays

    """
    checked = []
    total = np.zeros((dim, dim), dtype=complex)
    for num, element in enumerate(elements):
        element = check_square(f"POVM element {num}", element)
        if element.shape[0] != dim:
            fatal(
                f"POVM element {num} has dimension {element.shape[0]}, "
                f"expected {dim}",
                ShapeError,
            )
        hermitian = (element + element.conj().T) / 2
        if np.linalg.eigvalsh(hermitian).min() < -POVM_TOL:
            fatal(f"POVM element {num} is not PSD", ValidationError)
        total += element
        checked.append(element)
    deviation = np.max(np.abs(total - np.eye(dim)))
    if deviation > POVM_TOL:
        fatal(
            f"POVM is incomplete (max |sum E - I| = {deviation:.2e})",
            ValidationError,
        )
    return checked
