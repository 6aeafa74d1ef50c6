#!/usr/bin/env python3

############################################################################
#
# MODULE:       tests of the truncated Fock-space core
#
# AUTHOR(S):    dlcz_sim developers
#
# PURPOSE:      states, channels, partial traces and measurements
#
# COPYRIGHT:	(C) 2026 by the dlcz_sim developers
#
# 		This program is free software under the GNU General Public
# 		License (>=v2). Read the file COPYING that comes with dlcz_sim
# 		for details.
#
#############################################################################

import numpy as np
import pytest

from dlcz_sim.errors import DomainError, ShapeError, ValidationError
from dlcz_sim.fock import (
    AS_L,
    AS_R,
    S_L,
    SW_L,
    SW_R,
    DensityOperator,
    ModeRegister,
    PureState,
    QuantumChannel,
    apply_kraus,
    apply_unitary,
    dephasing_channel,
    dephasing_kraus_operators,
    fock_state,
    linear_optics_unitary,
    local_operator,
    loss_channel,
    make_two_mode_squeezed,
    outcome_probabilities,
    partial_trace,
    prune_vacuum_modes,
    sanitize_matrix,
    tensor_product,
    vacuum,
)
from dlcz_sim.node import NoiseParams, herald, heralded_target, read, symmetric_write
from dlcz_sim.optics import half_wave_plate
from dlcz_sim.tests import check_close_up_to_phase, check_density_operator, check_probability_vector


def random_density(register, rng):
    ginibre = rng.normal(size=(register.dim, register.dim)) + 1j * rng.normal(
        size=(register.dim, register.dim),
    )
    matrix = ginibre @ ginibre.conj().T
    return DensityOperator(register, matrix / np.trace(matrix).real)


def test_register_basis_is_c_ordered():
    register = ModeRegister((AS_L, AS_R), n_max=2)
    assert register.dim == 9
    assert register.basis_index((1, 0)) == 3
    assert register.occupations(5) == (1, 2)
    assert register.index("AS_R_V") == 1


def test_register_rejects_duplicates_and_unknown_modes():
    with pytest.raises(ValidationError):
        ModeRegister((AS_L, AS_L))
    register = ModeRegister((AS_L,))
    with pytest.raises(ShapeError):
        register.index(AS_R)
    with pytest.raises(DomainError):
        ModeRegister((AS_L,), n_max=0)


def test_states_check_their_invariants():
    register = ModeRegister((AS_L,), n_max=1)
    with pytest.raises(ValidationError):
        PureState(register, [1.0, 1.0])
    with pytest.raises(ShapeError):
        PureState(register, [1.0, 0.0, 0.0])
    with pytest.raises(ValidationError):
        DensityOperator(register, [[0.5, 0.3], [0.0, 0.5]])
    with pytest.raises(ValidationError):
        DensityOperator(register, [[1.2, 0.0], [0.0, -0.2]])


def test_two_mode_squeezed_weights():
    chi = 0.01
    state = make_two_mode_squeezed(chi, n_max=2)
    norm = 1 + chi + chi**2
    assert abs(state.amplitude((0, 0))) ** 2 == pytest.approx(1 / norm)
    assert abs(state.amplitude((1, 1))) ** 2 == pytest.approx(chi / norm)
    assert abs(state.amplitude((2, 2))) ** 2 == pytest.approx(chi**2 / norm)
    assert abs(state.amplitude((1, 0))) == 0
    check_density_operator(state.density())


def test_two_mode_squeezed_domain():
    with pytest.raises(DomainError):
        make_two_mode_squeezed(1.0)
    with pytest.raises(DomainError):
        make_two_mode_squeezed(-0.1)
    with pytest.raises(DomainError):
        make_two_mode_squeezed(0.1, n_max=0)
    assert make_two_mode_squeezed(0.0).amplitude((0, 0)) == pytest.approx(1.0)


def test_loss_gives_binomial_populations():
    register = ModeRegister((AS_L,), n_max=2)
    eta = 0.3
    rho = loss_channel(fock_state(register, (2,)), AS_L, eta)
    assert rho.populations() == pytest.approx([(1 - eta) ** 2, 2 * eta * (1 - eta), eta**2])
    check_density_operator(rho)


def test_loss_composition(rng):
    register = ModeRegister((AS_L, AS_R), n_max=2)
    rho = random_density(register, rng)
    twice = loss_channel(loss_channel(rho, AS_L, 0.6), AS_L, 0.5)
    once = loss_channel(rho, AS_L, 0.3)
    assert np.allclose(twice.matrix, once.matrix, atol=1e-12)


def test_loss_domain():
    register = ModeRegister((AS_L,), n_max=1)
    with pytest.raises(DomainError):
        loss_channel(vacuum(register), AS_L, 1.5)


def test_channels_keep_trace_and_positivity(rng):
    register = ModeRegister((SW_L, SW_R, S_L), n_max=2)
    rho = random_density(register, rng)
    for channel in (
        QuantumChannel("loss", (SW_R,), eta=0.27),
        QuantumChannel("dephasing", (SW_L, SW_R), lam=0.4),
        QuantumChannel(
            "unitary",
            (SW_L, SW_R),
            unitary=linear_optics_unitary(half_wave_plate(0.3), 2),
        ),
    ):
        rho = channel.apply(rho)
        check_density_operator(rho)


def test_unknown_channel_kind():
    with pytest.raises(ValidationError):
        QuantumChannel("amplify", (SW_L,))
    with pytest.raises(ShapeError):
        QuantumChannel("loss", (SW_L, SW_R), eta=0.5)


def test_dephasing_scales_the_shared_excitation_coherence():
    rho = dephasing_channel(heralded_target(n_max=2), (SW_L, SW_R), 0.6)
    assert rho.element((1, 0), (0, 1)) == pytest.approx(0.5 * 0.6)
    assert rho.population((1, 0)) == pytest.approx(0.5)
    with pytest.raises(DomainError):
        dephasing_channel(rho, (SW_L, SW_L), 0.5)


def test_dephasing_kraus_operators_match_the_channel(rng):
    register = ModeRegister((SW_L, SW_R), n_max=2)
    rho = random_density(register, rng)
    direct = dephasing_channel(rho, (SW_L, SW_R), 0.35)
    kraus = apply_kraus(rho, dephasing_kraus_operators(0.35, 2), [SW_R])
    assert np.allclose(direct.matrix, kraus.matrix, atol=1e-10)


def test_beam_splitter_on_single_photon():
    register = ModeRegister((AS_L, AS_R), n_max=1)
    unitary = linear_optics_unitary(half_wave_plate(np.pi / 8), 1)
    out = apply_unitary(fock_state(register, (1, 0)), unitary, [AS_L, AS_R])
    expected = np.zeros(4)
    expected[register.basis_index((1, 0))] = expected[register.basis_index((0, 1))] = 1 / np.sqrt(2)
    check_close_up_to_phase(out.amplitudes, expected)


def test_two_photon_interference_suppresses_coincidences():
    register = ModeRegister((AS_L, AS_R), n_max=2)
    unitary = linear_optics_unitary(half_wave_plate(np.pi / 8), 2)
    out = apply_unitary(fock_state(register, (1, 1)), unitary, [AS_L, AS_R])
    assert abs(out.amplitude((1, 1))) == pytest.approx(0.0, abs=1e-10)
    assert abs(out.amplitude((2, 0))) ** 2 == pytest.approx(0.5)
    assert abs(out.amplitude((0, 2))) ** 2 == pytest.approx(0.5)


def test_apply_unitary_checks_shapes():
    register = ModeRegister((AS_L, AS_R), n_max=1)
    with pytest.raises(ShapeError):
        apply_unitary(vacuum(register), np.eye(2), [AS_L, AS_R])
    with pytest.raises(ValidationError):
        apply_unitary(vacuum(register), 2 * np.eye(2), [AS_L])


def test_partial_trace_of_product_state():
    first = fock_state(ModeRegister((AS_L,), n_max=2), (1,))
    second = make_two_mode_squeezed(0.2, n_max=2, modes=(SW_L, SW_R))
    joint = tensor_product(first.density(), second.density())
    reduced = partial_trace(joint, [SW_L, SW_R])
    assert np.allclose(reduced.matrix, second.density().matrix, atol=1e-12)
    single = partial_trace(joint, [AS_L])
    assert single.populations() == pytest.approx([0.0, 1.0, 0.0])
    with pytest.raises(DomainError):
        partial_trace(joint, [])


def test_prune_vacuum_modes_keeps_occupied_modes():
    joint = tensor_product(
        fock_state(ModeRegister((AS_L,), n_max=1), (1,)),
        vacuum(ModeRegister((AS_R,), n_max=1)),
    )
    pruned = prune_vacuum_modes(joint)
    assert pruned.register.modes == (AS_L,)
    assert pruned.population((1,)) == pytest.approx(1.0)


def test_outcome_probabilities_of_number_projectors(rng):
    register = ModeRegister((AS_L, AS_R), n_max=2)
    rho = random_density(register, rng)
    projectors = [
        local_operator(register, np.diag(np.eye(3)[num]), [AS_L]) for num in range(3)
    ]
    probabilities = outcome_probabilities(rho, projectors)
    check_probability_vector(probabilities)
    with pytest.raises(ValidationError):
        outcome_probabilities(rho, projectors[:2])


def test_sanitize_matrix_clips_round_off_only():
    matrix = np.diag([0.5 + 1e-12, 0.5, -1e-12]).astype(complex)
    cleaned = sanitize_matrix(matrix)
    assert np.linalg.eigvalsh(cleaned).min() >= -1e-15
    assert np.trace(cleaned).real == pytest.approx(np.trace(matrix).real)
    with pytest.raises(ValidationError):
        sanitize_matrix(np.diag([1.1, -0.1]).astype(complex))


def click_projectors(register):
    vacuum_op = np.zeros((register.levels, register.levels))
    vacuum_op[0, 0] = 1.0
    click_op = np.eye(register.levels) - vacuum_op
    projectors = []
    for click_l in (False, True):
        for click_r in (False, True):
            op_l = click_op if click_l else vacuum_op
            op_r = click_op if click_r else vacuum_op
            projectors.append(local_operator(register, np.kron(op_l, op_r), [AS_L, AS_R]))
    return projectors


def test_detection_does_not_depend_on_the_truncation():
    probabilities = []
    for n_max in (3, 4):
        params = NoiseParams(chi=1e-4, eta_ret=0.5, n_max=n_max)
        heralded = herald(symmetric_write(params), "D1", params)
        rho_as = read(heralded, params, phi_as=0.4)
        probabilities.append(outcome_probabilities(rho_as, click_projectors(rho_as.register)))
    check_probability_vector(probabilities[0])
    assert probabilities[0][1] > 0.1
    assert np.allclose(probabilities[0], probabilities[1], rtol=0.0, atol=1e-10)
