#!/usr/bin/env python3

############################################################################
#
# MODULE:       lib with the truncated multi-mode Fock space engine
#
# AUTHOR(S):    dlcz_sim developers
#
# PURPOSE:      mode registers, pure states, density operators, unitaries,
#               loss and dephasing channels, partial trace and measurement
#               probabilities
#
# COPYRIGHT:	(C) 2026 by the dlcz_sim developers
#
# 		This program is free software under the GNU General Public
# 		License (>=v2). Read the file COPYING that comes with dlcz_sim
# 		for details.
#
#############################################################################

"""Truncated multi-mode Fock space.

Basis ordering: a register with modes (m_1, ..., m_k) and truncation n_max
uses the occupation tuples (n_1, ..., n_k), n_i in 0..n_max, in
lexicographic order with the last mode running fastest. This is the C order
of ``numpy.ravel_multi_index`` and the order of ``numpy.kron``.

All values are immutable after construction, every operation returns a new
value.
"""

import string
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm, logm
from scipy.special import comb

from .errors import DomainError, ShapeError, ValidationError
from .general import check_dense_memory
from .messages import fatal, verbose, warning
from .validation import (
    NEGATIVE_EIGENVALUE_TOL,
    check_density_matrix,
    check_povm,
    check_probability,
    check_unitary,
)

SITES = ("L", "R")
SPECIES = ("spin-wave", "Stokes", "anti-Stokes")
POLARIZATIONS = ("H", "V")
SPECIES_SHORT = {"spin-wave": "sw", "Stokes": "S", "anti-Stokes": "AS"}
MAX_MODES = 8
NORM_TOL = 1e-10


@dataclass(frozen=True)
class ModeLabel:
    """Label of one bosonic mode.

    Args:
        site (str): "L" or "R"
        species (str): "spin-wave", "Stokes" or "anti-Stokes"
        polarization (str): "H" or "V"
        port (str): optional detector port the mode is routed to

    """

    site: str
    species: str
    polarization: str
    port: str = ""

    def __post_init__(self):
        if self.site not in SITES:
            fatal(f"Unknown site <{self.site}>", ValidationError)
        if self.species not in SPECIES:
            fatal(f"Unknown species <{self.species}>", ValidationError)
        if self.polarization not in POLARIZATIONS:
            fatal(f"Unknown polarization <{self.polarization}>", ValidationError)

    def __str__(self):
        name = f"{SPECIES_SHORT[self.species]}_{self.site}_{self.polarization}"
        return f"{name}@{self.port}" if self.port else name

    def with_port(self, port):
        """Return the label routed to a detector port."""
        return ModeLabel(self.site, self.species, self.polarization, port)

    def with_species(self, species):
        """Return the label of the same site/polarization but another species."""
        return ModeLabel(self.site, species, self.polarization, self.port)


# L is carried by H and R by V once the two paths share a spatial mode
SW_L = ModeLabel("L", "spin-wave", "H")
SW_R = ModeLabel("R", "spin-wave", "V")
S_L = ModeLabel("L", "Stokes", "H")
S_R = ModeLabel("R", "Stokes", "V")
AS_L = ModeLabel("L", "anti-Stokes", "H")
AS_R = ModeLabel("R", "anti-Stokes", "V")


@dataclass(frozen=True)
class ModeRegister:
    """Ordered set of modes with a common photon-number truncation."""

    modes: tuple
    n_max: int = 2

    def __post_init__(self):
        object.__setattr__(self, "modes", tuple(self.modes))
        if int(self.n_max) != self.n_max or self.n_max < 1:
            fatal(f"n_max must be an integer >= 1, got {self.n_max}", DomainError)
        if len(self.modes) == 0:
            fatal("A register needs at least one mode", DomainError)
        if len(set(self.modes)) != len(self.modes):
            fatal(
                f"Mode labels are not unique: {[str(m) for m in self.modes]}",
                ValidationError,
            )
        if len(self.modes) > MAX_MODES:
            warning(
                f"Register with {len(self.modes)} modes exceeds the supported "
                f"{MAX_MODES} simultaneous modes",
            )
        check_dense_memory(self.dim)

    @property
    def levels(self):
        return self.n_max + 1

    @property
    def dim(self):
        return self.levels ** len(self.modes)

    @property
    def shape(self):
        return (self.levels,) * len(self.modes)

    def index(self, mode):
        """Position of a mode in the register."""
        for num, label in enumerate(self.modes):
            if label == mode or str(label) == mode:
                return num
        fatal(f"Mode <{mode}> is not part of the register", ShapeError)
        return None

    def indices(self, modes):
        if isinstance(modes, (ModeLabel, str)):
            modes = [modes]
        return [self.index(mode) for mode in modes]

    def basis_index(self, occupations):
        """Index of the basis state with the given occupation tuple."""
        return int(np.ravel_multi_index(tuple(occupations), self.shape))

    def occupations(self, index):
        """Occupation tuple of a basis index."""
        return tuple(int(n) for n in np.unravel_index(index, self.shape))

    def occupation_grid(self, mode):
        """Occupation of one mode for every basis index."""
        grids = np.unravel_index(np.arange(self.dim), self.shape)
        return grids[self.index(mode)]

    def subregister(self, modes):
        return ModeRegister(tuple(self.modes[i] for i in self.indices(modes)), self.n_max)

    def relabeled(self, mapping):
        """Register with modes renamed according to mapping (old -> new)."""
        return ModeRegister(tuple(mapping.get(m, m) for m in self.modes), self.n_max)

    def concat(self, other):
        if other.n_max != self.n_max:
            fatal(
                f"Registers with different truncation ({self.n_max} vs "
                f"{other.n_max}) cannot be combined",
                ShapeError,
            )
        return ModeRegister(self.modes + other.modes, self.n_max)


def _frozen(array):
    array = np.array(array, dtype=complex)
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class PureState:
    """Normalized vector of complex amplitudes over a register's basis."""

    register: ModeRegister
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self):
        amplitudes = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if amplitudes.shape[0] != self.register.dim:
            fatal(
                f"{amplitudes.shape[0]} amplitudes for a register of "
                f"dimension {self.register.dim}",
                ShapeError,
            )
        norm = np.linalg.norm(amplitudes)
        if abs(norm - 1.0) > NORM_TOL:
            fatal(f"State is not normalized (norm {norm})", ValidationError)
        object.__setattr__(self, "amplitudes", _frozen(amplitudes))

    def amplitude(self, occupations):
        return self.amplitudes[self.register.basis_index(occupations)]

    def density(self):
        """Projector |psi><psi| as DensityOperator."""
        return DensityOperator(
            self.register,
            np.outer(self.amplitudes, self.amplitudes.conj()),
        )


@dataclass(frozen=True)
class DensityOperator:
    """Hermitian, unit-trace, positive semidefinite operator over a register."""

    register: ModeRegister
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        matrix = np.asarray(self.matrix, dtype=complex)
        if matrix.shape != (self.register.dim, self.register.dim):
            fatal(
                f"Matrix of shape {matrix.shape} for a register of "
                f"dimension {self.register.dim}",
                ShapeError,
            )
        check_density_matrix(matrix)
        object.__setattr__(self, "matrix", _frozen(matrix))

    def element(self, row_occupations, col_occupations):
        return self.matrix[
            self.register.basis_index(row_occupations),
            self.register.basis_index(col_occupations),
        ]

    def population(self, occupations):
        return float(self.element(occupations, occupations).real)

    def populations(self):
        """Diagonal of the matrix as real array."""
        return np.real(np.diag(self.matrix)).copy()


def sanitize_matrix(matrix):
    """Re-Hermitize a matrix and clip tiny negative eigenvalues.

    Eigenvalues in [-1e-9, 0) are set to 0 and the trace is restored;
    eigenvalues below -1e-9 abort with a ValidationError.

    Args:
        matrix (numpy.ndarray): The matrix to clean
    Returns:
        (numpy.ndarray): The cleaned matrix

    """
    matrix = (matrix + matrix.conj().T) / 2
    eigenvalues = np.linalg.eigvalsh(matrix)
    if eigenvalues.min() < -NEGATIVE_EIGENVALUE_TOL:
        fatal(
            f"Channel produced a negative eigenvalue {eigenvalues.min():.3e}",
            ValidationError,
        )
    if eigenvalues.min() < 0:
        trace = np.trace(matrix).real
        eigenvalues, vectors = np.linalg.eigh(matrix)
        eigenvalues = np.clip(eigenvalues, 0.0, None)
        matrix = (vectors * eigenvalues) @ vectors.conj().T
        matrix = matrix * trace / np.trace(matrix).real
        matrix = (matrix + matrix.conj().T) / 2
    return matrix


def density_from_matrix(register, matrix, normalize=False):
    """Build a DensityOperator after the numerical hygiene step.

    Args:
        register (ModeRegister): The register of the operator
        matrix (numpy.ndarray): Unchecked matrix
        normalize (bool): Divide by the trace before checking
    Returns:
        (DensityOperator): The cleaned operator

    """
    matrix = np.asarray(matrix, dtype=complex)
    if normalize:
        trace = np.trace(matrix).real
        if trace <= 0:
            fatal("Cannot normalize an operator with zero trace", ValidationError)
        matrix = matrix / trace
    return DensityOperator(register, sanitize_matrix(matrix))


def as_density(state):
    """Return a DensityOperator for a PureState or DensityOperator."""
    if isinstance(state, PureState):
        return state.density()
    if isinstance(state, DensityOperator):
        return state
    fatal(f"Expected a PureState or DensityOperator, got {type(state)}", ShapeError)
    return None


def vacuum(register):
    """The all-modes vacuum |0...0>."""
    amplitudes = np.zeros(register.dim, dtype=complex)
    amplitudes[0] = 1.0
    return PureState(register, amplitudes)


def fock_state(register, occupations):
    """The number state with the given occupation tuple."""
    amplitudes = np.zeros(register.dim, dtype=complex)
    amplitudes[register.basis_index(occupations)] = 1.0
    return PureState(register, amplitudes)


def tensor_product(*states):
    """Tensor product of states in the given order (register concatenation).

    All states must be of the same kind, either all PureState or all
    DensityOperator.
    """
    if not states:
        fatal("tensor_product needs at least one state", DomainError)
    register = states[0].register
    if all(isinstance(state, PureState) for state in states):
        amplitudes = states[0].amplitudes
        for state in states[1:]:
            register = register.concat(state.register)
            amplitudes = np.kron(amplitudes, state.amplitudes)
        return PureState(register, amplitudes)
    matrix = as_density(states[0]).matrix
    for state in states[1:]:
        register = register.concat(state.register)
        matrix = np.kron(matrix, as_density(state).matrix)
    return density_from_matrix(register, matrix)


def relabel(state, mapping):
    """Rename modes of a state, e.g. spin-wave modes to anti-Stokes modes."""
    register = state.register.relabeled(mapping)
    if isinstance(state, PureState):
        return PureState(register, state.amplitudes)
    return DensityOperator(register, state.matrix)


def make_two_mode_squeezed(chi, n_max=2, modes=None):
    """Two-mode squeezed write-process state sum_n c_n |n, n>.

    The weights are |c_n|^2 proportional to chi^n, truncated at n_max and
    normalized.

    Args:
        chi (float): excitation probability in [0, 1)
        n_max (int): photon-number truncation per mode, >= 1
        modes (tuple): the two mode labels, default spin wave and Stokes
                       mode of the L ensemble
    Returns:
        (PureState): the normalized state

    """
    chi = check_probability("chi", chi, upper_open=True)
    if int(n_max) != n_max or n_max < 1:
        fatal(f"n_max must be an integer >= 1, got {n_max}", DomainError)
    if modes is None:
        modes = (SW_L, S_L)
    register = ModeRegister(tuple(modes), int(n_max))
    amplitudes = np.zeros(register.dim, dtype=complex)
    for num in range(register.levels):
        amplitudes[register.basis_index((num, num))] = chi ** (num / 2.0)
    amplitudes /= np.linalg.norm(amplitudes)
    return PureState(register, amplitudes)


def annihilation(levels):
    """Single-mode annihilation operator in a truncated space."""
    return np.diag(np.sqrt(np.arange(1, levels)), k=1).astype(complex)


def phase_unitary(phi, n_max):
    """Single-mode phase shift exp(i phi n)."""
    return np.diag(np.exp(1j * phi * np.arange(n_max + 1)))


def linear_optics_unitary(transfer, n_max):
    """Fock-space unitary of a passive linear-optics transfer matrix.

    A single photon in input mode j leaves in the superposition
    sum_i transfer[i, j] |mode i>. The unitary is exp(i G) with the
    number-conserving generator G = sum_ij h_ij a_i^dag a_j and
    transfer = exp(i h). Within the truncated space it is exact for all
    components with at most n_max photons in total.

    Args:
        transfer (array): k x k unitary (e.g. a Jones matrix for k=2)
        n_max (int): truncation per mode
    Returns:
        (numpy.ndarray): the (n_max+1)^k square unitary

    """
    transfer = check_unitary(transfer, "transfer")
    n_modes = transfer.shape[0]
    levels = n_max + 1
    hamiltonian = -1j * logm(transfer)
    hamiltonian = (hamiltonian + hamiltonian.conj().T) / 2
    single = annihilation(levels)
    eye = np.eye(levels)
    ladders = []
    for num in range(n_modes):
        op = np.array([[1.0]])
        for pos in range(n_modes):
            op = np.kron(op, single if pos == num else eye)
        ladders.append(op)
    generator = np.zeros((levels**n_modes,) * 2, dtype=complex)
    for i in range(n_modes):
        for j in range(n_modes):
            if hamiltonian[i, j] != 0:
                generator += hamiltonian[i, j] * ladders[i].conj().T @ ladders[j]
    generator = (generator + generator.conj().T) / 2
    return expm(1j * generator)


def _apply_to_axes(tensor, op, axes, levels):
    """Apply op to the tensor axes listed in axes (op acts from the left)."""
    k = len(axes)
    front = list(range(k))
    moved = np.moveaxis(tensor, axes, front)
    shape = moved.shape
    out = (op @ moved.reshape(levels**k, -1)).reshape(shape)
    return np.moveaxis(out, front, axes)


def _conjugate_matrix(register, matrix, op, axes):
    """Return op rho op^dagger with op acting on the given mode axes."""
    n_modes = len(register.modes)
    tensor = matrix.reshape(register.shape * 2)
    tensor = _apply_to_axes(tensor, op, axes, register.levels)
    tensor = _apply_to_axes(
        tensor,
        op.conj(),
        [axis + n_modes for axis in axes],
        register.levels,
    )
    return tensor.reshape(register.dim, register.dim)


def local_operator(register, op, target_modes):
    """Embed an operator acting on target_modes into the full register."""
    axes = register.indices(target_modes)
    op = np.asarray(op, dtype=complex)
    if op.shape != (register.levels ** len(axes),) * 2:
        fatal(
            f"Operator of shape {op.shape} does not match {len(axes)} target "
            f"mode(s) with {register.levels} levels",
            ShapeError,
        )
    eye = np.eye(register.dim, dtype=complex).reshape(register.shape * 2)
    out = _apply_to_axes(eye, op, axes, register.levels)
    return out.reshape(register.dim, register.dim)


def apply_unitary(state, unitary, target_modes):
    """Apply a unitary to the target modes of a pure state or density operator.

    Args:
        state (PureState|DensityOperator): input state
        unitary (array): unitary of dimension (n_max+1)^len(target_modes)
        target_modes (list): mode labels the unitary acts on, in the order
                             of the unitary's tensor factors
    Returns:
        (PureState|DensityOperator): the transformed state

    """
    register = state.register
    axes = register.indices(target_modes)
    unitary = np.asarray(unitary, dtype=complex)
    expected = register.levels ** len(axes)
    if unitary.shape != (expected, expected):
        fatal(
            f"Unitary of shape {unitary.shape} does not match the target "
            f"space of dimension {expected}",
            ShapeError,
        )
    unitary = check_unitary(unitary)
    if isinstance(state, PureState):
        tensor = state.amplitudes.reshape(register.shape)
        out = _apply_to_axes(tensor, unitary, axes, register.levels)
        amplitudes = out.reshape(-1)
        return PureState(register, amplitudes / np.linalg.norm(amplitudes))
    matrix = _conjugate_matrix(register, state.matrix, unitary, axes)
    return density_from_matrix(register, matrix)


def loss_kraus_operators(eta, n_max):
    """Kraus operators of the single-mode photon-loss channel.

    A_k = sum_n sqrt(C(n, k)) eta^((n-k)/2) (1-eta)^(k/2) |n-k><n|
    """
    levels = n_max + 1
    numbers = np.arange(levels)
    operators = []
    for k in range(levels):
        op = np.zeros((levels, levels), dtype=complex)
        for n in numbers[k:]:
            op[n - k, n] = (
                np.sqrt(comb(n, k)) * eta ** ((n - k) / 2.0) * (1 - eta) ** (k / 2.0)
            )
        operators.append(op)
    return operators


def dephasing_kraus_operators(lam, n_max):
    """Kraus operators of the Gaussian phase-damping channel on one mode.

    The channel multiplies <n|rho|m> by lam^((n-m)^2); the Kraus operators
    are diagonal and come from the eigen-decomposition of that kernel.
    """
    numbers = np.arange(n_max + 1)
    kernel = lam ** ((numbers[:, None] - numbers[None, :]) ** 2).astype(float)
    eigenvalues, vectors = np.linalg.eigh(kernel)
    eigenvalues = np.clip(eigenvalues, 0.0, None)
    return [
        np.diag(np.sqrt(value) * vectors[:, num]).astype(complex)
        for num, value in enumerate(eigenvalues)
        if value > 0
    ]


def apply_kraus(rho, operators, target_modes):
    """Apply a channel given by Kraus operators to the target modes."""
    register = rho.register
    axes = register.indices(target_modes)
    matrix = np.zeros_like(rho.matrix)
    for op in operators:
        matrix = matrix + _conjugate_matrix(register, rho.matrix, op, axes)
    return density_from_matrix(register, matrix)


def loss_channel(rho, mode, eta):
    """Photon loss with transmission eta on one mode.

    Args:
        rho (DensityOperator|PureState): input state
        mode (ModeLabel|str): the lossy mode
        eta (float): transmission in [0, 1]
    Returns:
        (DensityOperator): the state after the loss

    """
    eta = check_probability("eta", eta)
    rho = as_density(rho)
    if eta == 1.0:
        return rho
    return apply_kraus(rho, loss_kraus_operators(eta, rho.register.n_max), [mode])


def dephasing_channel(rho, modes, lam):
    """Gaussian random relative phase between a mode pair.

    The phase acts on the second mode of the pair relative to the first;
    <n|rho|m> is multiplied by lam^((n_b - m_b)^2), so a single excitation
    shared by the pair loses coherence by the factor lam.

    Args:
        rho (DensityOperator|PureState): input state
        modes (tuple): (reference mode, dephased mode)
        lam (float): coherence factor in [0, 1]
    Returns:
        (DensityOperator): the dephased state

    """
    lam = check_probability("lambda", lam)
    rho = as_density(rho)
    reference, target = modes
    register = rho.register
    if register.index(reference) == register.index(target):
        fatal("Dephasing needs two different modes", DomainError)
    if lam == 1.0:
        return rho
    occupation = register.occupation_grid(target)
    difference = (occupation[:, None] - occupation[None, :]) ** 2
    factors = np.where(difference == 0, 1.0, lam ** difference.astype(float))
    return density_from_matrix(register, rho.matrix * factors)


@dataclass(frozen=True)
class QuantumChannel:
    """A trace-preserving map on some modes.

    Args:
        kind (str): "unitary", "loss" or "dephasing"
        targets (tuple): target modes (unitary: any number, loss: one,
                         dephasing: the mode pair)
        unitary (array): the unitary for kind "unitary"
        eta (float): the transmission for kind "loss"
        lam (float): the coherence factor for kind "dephasing"

    """

    kind: str
    targets: tuple
    unitary: np.ndarray = None
    eta: float = None
    lam: float = None

    def __post_init__(self):
        object.__setattr__(self, "targets", tuple(self.targets))
        if self.kind == "unitary":
            object.__setattr__(self, "unitary", _frozen(check_unitary(self.unitary)))
        elif self.kind == "loss":
            if len(self.targets) != 1:
                fatal("A loss channel acts on exactly one mode", ShapeError)
            check_probability("eta", self.eta)
        elif self.kind == "dephasing":
            if len(self.targets) != 2:
                fatal("A dephasing channel acts on a mode pair", ShapeError)
            check_probability("lambda", self.lam)
        else:
            fatal(f"Unknown channel kind <{self.kind}>", ValidationError)

    def kraus_operators(self, n_max):
        """Kraus operators on the target modes."""
        if self.kind == "unitary":
            return [np.asarray(self.unitary)]
        if self.kind == "loss":
            return loss_kraus_operators(self.eta, n_max)
        return dephasing_kraus_operators(self.lam, n_max)

    def apply(self, state):
        if self.kind == "unitary":
            return apply_unitary(as_density(state), self.unitary, self.targets)
        if self.kind == "loss":
            return loss_channel(state, self.targets[0], self.eta)
        return dephasing_channel(state, self.targets, self.lam)


def partial_trace(rho, keep_modes):
    """Reduced operator on keep_modes (in the given order).

    Args:
        rho (DensityOperator|PureState): input state
        keep_modes (list): modes to keep, non empty
    Returns:
        (DensityOperator): reduced operator

    """
    rho = as_density(rho)
    if isinstance(keep_modes, (ModeLabel, str)):
        keep_modes = [keep_modes]
    if len(keep_modes) == 0:
        fatal("partial_trace needs at least one mode to keep", DomainError)
    register = rho.register
    keep = register.indices(keep_modes)
    if len(set(keep)) != len(keep):
        fatal("Modes to keep are not unique", DomainError)
    n_modes = len(register.modes)
    letters = string.ascii_letters
    rows = list(letters[:n_modes])
    cols = list(letters[n_modes : 2 * n_modes])
    for num in range(n_modes):
        if num not in keep:
            cols[num] = rows[num]
    out = "".join(rows[i] for i in keep) + "".join(cols[i] for i in keep)
    tensor = rho.matrix.reshape(register.shape * 2)
    reduced = np.einsum(f"{''.join(rows)}{''.join(cols)}->{out}", tensor)
    sub = register.subregister(keep_modes)
    return density_from_matrix(sub, reduced.reshape(sub.dim, sub.dim))


def prune_modes(rho, drop_modes):
    """Trace out modes which no longer take part in the simulation."""
    rho = as_density(rho)
    drop = set(rho.register.indices(drop_modes))
    keep = [m for num, m in enumerate(rho.register.modes) if num not in drop]
    verbose(
        f"Pruning modes {[str(rho.register.modes[i]) for i in sorted(drop)]}, "
        f"dimension {rho.register.dim} -> {rho.register.levels ** len(keep)}",
    )
    return partial_trace(rho, keep)


def prune_vacuum_modes(rho, tol=1e-12):
    """Drop every mode whose reduced state is the vacuum within tol."""
    rho = as_density(rho)
    register = rho.register
    populations = rho.populations()
    vacuum_modes = []
    for mode in register.modes:
        occupied = register.occupation_grid(mode) > 0
        if populations[occupied].sum() <= tol:
            vacuum_modes.append(mode)
    if not vacuum_modes or len(vacuum_modes) == len(register.modes):
        return rho
    return prune_modes(rho, vacuum_modes)


def outcome_probabilities(state, projectors):
    """Probabilities of the outcomes of a POVM.

    Args:
        state (PureState|DensityOperator): measured state
        projectors (list): POVM elements as full-register matrices
    Returns:
        (numpy.ndarray): probability vector summing to 1

    """
    rho = as_density(state)
    elements = check_povm(projectors, rho.register.dim)
    probabilities = np.array(
        [np.trace(element @ rho.matrix).real for element in elements],
    )
    return np.clip(probabilities, 0.0, None)


def expectation(state, operator):
    """Real part of Tr(rho O)."""
    rho = as_density(state)
    return float(np.trace(np.asarray(operator) @ rho.matrix).real)
