#!/usr/bin/env python3

############################################################################
#
# MODULE:       lib with the DLCZ protocol steps of dlcz_sim
#
# AUTHOR(S):    dlcz_sim developers
#
# PURPOSE:      symmetric write of two ensembles, heralding on a Stokes
#               click, storage decoherence, retrieval to anti-Stokes modes
#               and the joint Stokes/anti-Stokes polarization state
#
# COPYRIGHT:	(C) 2026 by the dlcz_sim developers
#
# 		This program is free software under the GNU General Public
# 		License (>=v2). Read the file COPYING that comes with dlcz_sim
# 		for details.
#
#############################################################################

from dataclasses import dataclass, replace

import numpy as np

from .errors import HeraldImpossibleError, ValidationError
from .fock import (
    AS_L,
    AS_R,
    S_L,
    S_R,
    SW_L,
    SW_R,
    DensityOperator,
    ModeRegister,
    PureState,
    apply_unitary,
    as_density,
    density_from_matrix,
    dephasing_channel,
    linear_optics_unitary,
    loss_channel,
    make_two_mode_squeezed,
    partial_trace,
    phase_unitary,
    relabel,
    tensor_product,
)
from .messages import fatal, warning
from .optics import half_wave_plate
from .validation import check_positive, check_probability

CHI_WARN_LEVEL = 0.1
HERALD_DETECTORS = {"D1": +1, "D2": -1}
HERALD_PORTS = {"D1": S_L, "D2": S_R}

# two polarization qubits; occupation 0 encodes H and 1 encodes V, so the
# basis order is HH, HV, VH, VV (Stokes first)
POLARIZATION_REGISTER = ModeRegister((S_L, AS_L), n_max=1)


@dataclass(frozen=True)
class NoiseParams:
    """Physical parameters of the two-node setup.

    Args:
        chi (float): excitation probability per write pulse
        eta_ret (float): spin-wave retrieval efficiency
        eta_trans (float): optical path transmission without the filter
                           cavities
        eta_det (float): detector efficiency
        dark_prob (float): dark-count probability per detector and gate
        sigma_phi (float): residual interferometer phase jitter in rad
        tau_mem (float): memory coherence time in ns
        tau_amp (float): memory amplitude decay time in ns (inf: none)
        n_max (int): photon-number truncation per mode
        fp_transmission (float): transmission of one filter cavity
        cavities_per_path (int): filter cavities passed by each photon
        fp_extinction (float): pump extinction ratio of one cavity
        leakage_prob (float): probability per gate of leaked pump light
                              producing a click

    """

    chi: float = 0.01
    eta_ret: float = 0.05
    eta_trans: float = 0.35
    eta_det: float = 0.45
    dark_prob: float = 1e-6
    sigma_phi: float = 0.517
    tau_mem: float = 1e5
    tau_amp: float = np.inf
    n_max: int = 2
    fp_transmission: float = 0.92
    cavities_per_path: int = 2
    fp_extinction: float = 500.0
    leakage_prob: float = 0.0

    def __post_init__(self):
        check_probability("chi", self.chi, upper_open=True)
        for name in (
            "eta_ret",
            "eta_trans",
            "eta_det",
            "dark_prob",
            "fp_transmission",
            "leakage_prob",
        ):
            check_probability(name, getattr(self, name))
        check_positive("sigma_phi", self.sigma_phi, strict=False)
        check_positive("tau_mem", self.tau_mem)
        check_positive("tau_amp", self.tau_amp)
        check_positive("fp_extinction", self.fp_extinction)
        check_positive("cavities_per_path", self.cavities_per_path, strict=False)
        check_positive("n_max", self.n_max)
        if self.chi > CHI_WARN_LEVEL:
            warning(
                f"chi={self.chi} is above {CHI_WARN_LEVEL}, multi-excitation "
                "terms dominate and the truncation may be too small",
            )

    @property
    def path_transmission(self):
        """Optical transmission of one path including its filter cavities."""
        return self.eta_trans * self.fp_transmission**self.cavities_per_path

    @property
    def herald_efficiency(self):
        return self.path_transmission * self.eta_det

    @property
    def verify_efficiency(self):
        return self.eta_ret * self.path_transmission * self.eta_det

    @property
    def efficiency_product(self):
        return self.eta_ret * self.eta_trans * self.eta_det

    @property
    def effective_dark_prob(self):
        """Dark counts and leaked pump light as one click probability."""
        return 1.0 - (1.0 - self.dark_prob) * (1.0 - self.leakage_prob)

    @property
    def coherence_factor(self):
        """Gaussian phase-jitter damping exp(-sigma_phi^2 / 2)."""
        return float(np.exp(-self.sigma_phi**2 / 2))

    def storage_factor(self, storage_time):
        return float(np.exp(-storage_time / self.tau_mem))


@dataclass(frozen=True)
class EnsembleNode:
    site: str
    spin_wave_mode: object
    stokes_mode: object
    tau_mem: float
    eta_ret: float

    def __post_init__(self):
        check_positive(f"{self.site}.tau_mem", self.tau_mem)
        check_probability(f"{self.site}.eta_ret", self.eta_ret)


def ensemble_nodes(params):
    """The L and R ensembles of a setup."""
    return (
        EnsembleNode("L", SW_L, S_L, params.tau_mem, params.eta_ret),
        EnsembleNode("R", SW_R, S_R, params.tau_mem, params.eta_ret),
    )


@dataclass(frozen=True)
class HeraldedState:
    """Spin-wave state conditioned on a herald click.

    Args:
        rho (DensityOperator): state over {sw_L, sw_R}, all heralds
        herald_sign (int): +1 for D1, -1 for D2
        herald_probability (float): click probability per write pulse
        dark_herald_fraction (float): share of heralds caused by dark
                                      counts without any Stokes photon
        signal_rho (DensityOperator): state of the heralds caused by a
                                      Stokes photon only

    """

    rho: DensityOperator
    herald_sign: int
    herald_probability: float
    dark_herald_fraction: float = 0.0
    signal_rho: DensityOperator = None

    def __post_init__(self):
        check_probability("herald_probability", self.herald_probability)
        check_probability("dark_herald_fraction", self.dark_herald_fraction)
        if self.herald_sign not in (1, -1):
            fatal(f"Herald sign must be +1 or -1, got {self.herald_sign}", ValidationError)

    def signal_only(self):
        """The heralded state without dark-count heralds."""
        if self.signal_rho is None:
            return self
        return replace(self, rho=self.signal_rho, dark_herald_fraction=0.0)


def symmetric_write(params, phi_s=0.0):
    """Write both ensembles with equal strength.

    Args:
        params (NoiseParams): the noise parameters
        phi_s (float): phase of the R Stokes branch in rad
    Returns:
        (PureState): joint state over sw_L, S_L, sw_R, S_R

    """
    nodes = ensemble_nodes(params)
    pairs = [
        make_two_mode_squeezed(
            params.chi,
            params.n_max,
            (node.spin_wave_mode, node.stokes_mode),
        )
        for node in nodes
    ]
    joint = tensor_product(*pairs)
    return apply_unitary(joint, phase_unitary(phi_s, params.n_max), [S_R])


def herald_branches(joint, params, detector="D1"):
    """Split the written state by the Stokes photon number at a detector.

    The Stokes modes are merged (H = L, V = R), sent through a half-wave
    plate at 22.5 degree and a polarizer; D1 sees the H output and D2 the
    V output. Dark counts are not included.

    Args:
        joint (PureState|DensityOperator): state over sw_L, S_L, sw_R, S_R
        params (NoiseParams): the noise parameters
        detector (str): "D1" or "D2"
    Returns:
        (dict): True (photon at the detector) / False (none) ->
                (probability, conditional spin-wave state or None)

    """
    if detector not in HERALD_PORTS:
        fatal(f"Herald detector must be D1 or D2, got <{detector}>", ValidationError)
    rho = as_density(joint)
    register = rho.register
    mixer = linear_optics_unitary(half_wave_plate(np.pi / 8), register.n_max)
    rho = apply_unitary(rho, mixer, [S_L, S_R])
    for mode in (S_L, S_R):
        rho = loss_channel(rho, mode, params.herald_efficiency)
    photon = register.occupation_grid(HERALD_PORTS[detector]) > 0
    branches = {}
    for flag, mask in ((True, photon), (False, ~photon)):
        projected = rho.matrix * np.outer(mask, mask)
        probability = float(np.trace(projected).real)
        if probability <= 0:
            branches[flag] = (0.0, None)
            continue
        conditional = density_from_matrix(register, projected, normalize=True)
        branches[flag] = (probability, partial_trace(conditional, [SW_L, SW_R]))
    return branches


def herald(joint, detector_outcome, params):
    """Condition the written state on a click of D1 or D2.

    The click POVM is I - (1 - p_dark)|0><0| on the detector's port,
    independent of the other detector. Dark-count heralds are kept.

    Args:
        joint (PureState|DensityOperator): output of symmetric_write
        detector_outcome (str): "D1" or "D2"
        params (NoiseParams): the noise parameters
    Returns:
        (HeraldedState): the conditional spin-wave state

    """
    branches = herald_branches(joint, params, detector_outcome)
    p_signal, rho_signal = branches[True]
    p_none, rho_none = branches[False]
    dark = params.effective_dark_prob
    p_click = p_signal + dark * p_none
    if p_click <= 0:
        fatal(
            f"Detector {detector_outcome} never clicks for the given parameters",
            HeraldImpossibleError,
        )
    matrix = 0
    if rho_signal is not None:
        matrix = matrix + p_signal * rho_signal.matrix
    if rho_none is not None and dark > 0:
        matrix = matrix + dark * p_none * rho_none.matrix
    rho = density_from_matrix(
        (rho_signal or rho_none).register,
        matrix / p_click,
        normalize=True,
    )
    return HeraldedState(
        rho=rho,
        herald_sign=HERALD_DETECTORS[detector_outcome],
        herald_probability=min(p_click, 1.0),
        dark_herald_fraction=dark * p_none / p_click,
        signal_rho=rho_signal,
    )


def _decay(rho, storage_time, params):
    rho = dephasing_channel(rho, (SW_L, SW_R), params.storage_factor(storage_time))
    if np.isfinite(params.tau_amp):
        survival = float(np.exp(-storage_time / params.tau_amp))
        for mode in (SW_L, SW_R):
            rho = loss_channel(rho, mode, survival)
    return rho


def store(state, storage_time, params):
    """Let the heralded spin waves decohere for storage_time ns.

    The coherence between sw_L and sw_R is multiplied by
    exp(-storage_time / tau_mem); with a finite tau_amp each spin wave
    also decays with exp(-storage_time / tau_amp).
    """
    storage_time = check_positive("storage time", storage_time, strict=False)
    if storage_time == 0:
        return state
    signal = state.signal_rho
    return replace(
        state,
        rho=_decay(state.rho, storage_time, params),
        signal_rho=None if signal is None else _decay(signal, storage_time, params),
    )


def read(state, params, phi_as=0.0):
    """Convert the spin waves into anti-Stokes photons.

    Args:
        state (HeraldedState): stored state
        params (NoiseParams): eta_ret is applied to both modes
        phi_as (float): phase of the R anti-Stokes branch in rad
    Returns:
        (DensityOperator): state over AS_L, AS_R

    """
    rho = relabel(state.rho, {SW_L: AS_L, SW_R: AS_R})
    for mode in (AS_L, AS_R):
        rho = loss_channel(rho, mode, params.eta_ret)
    return apply_unitary(rho, phase_unitary(phi_as, rho.register.n_max), [AS_R])


def apply_phase_jitter(rho_as, sigma):
    """Average over a Gaussian phase N(0, sigma^2) on the R anti-Stokes mode."""
    return dephasing_channel(rho_as, (AS_L, AS_R), float(np.exp(-(sigma**2) / 2)))


def heralded_target(n_max=2, sign=1, phase=0.0):
    """(|10> + sign e^(i phase) |01>)/sqrt(2) over sw_L, sw_R."""
    register = ModeRegister((SW_L, SW_R), n_max)
    amplitudes = np.zeros(register.dim, dtype=complex)
    amplitudes[register.basis_index((1, 0))] = 1 / np.sqrt(2)
    amplitudes[register.basis_index((0, 1))] = sign * np.exp(1j * phase) / np.sqrt(2)
    return PureState(register, amplitudes)


def bell_state():
    """(|HH> + |VV>)/sqrt(2) of the Stokes and anti-Stokes polarizations."""
    amplitudes = np.zeros(4, dtype=complex)
    amplitudes[0] = amplitudes[3] = 1 / np.sqrt(2)
    return PureState(POLARIZATION_REGISTER, amplitudes)


def joint_polarization_state(
    params,
    storage_time=0.0,
    white_noise=0.0,
    phase=0.0,
    sigma=None,
):
    """Post-selected Stokes/anti-Stokes polarization state.

    The HH-VV coherence is damped by exp(-sigma^2/2) and by the storage
    factor; white_noise mixes in the maximally mixed state.

    Args:
        params (NoiseParams): the noise parameters
        storage_time (float): storage time in ns
        white_noise (float): weight of I/4 in [0, 1]
        phase (float): residual phase of the VV term in rad
        sigma (float): phase jitter, params.sigma_phi if None
    Returns:
        (DensityOperator): 4x4 operator in the basis HH, HV, VH, VV

    """
    white_noise = check_probability("white_noise", white_noise)
    storage_time = check_positive("storage time", storage_time, strict=False)
    sigma = params.sigma_phi if sigma is None else sigma
    coherence = (
        np.exp(-(sigma**2) / 2) * params.storage_factor(storage_time) * np.exp(-1j * phase)
    )
    matrix = np.zeros((4, 4), dtype=complex)
    matrix[0, 0] = matrix[3, 3] = 0.5
    matrix[0, 3] = coherence / 2
    matrix[3, 0] = np.conj(coherence) / 2
    matrix = (1 - white_noise) * matrix + white_noise * np.eye(4) / 4
    return DensityOperator(POLARIZATION_REGISTER, matrix)
