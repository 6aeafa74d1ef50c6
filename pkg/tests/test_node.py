#!/usr/bin/env python3

############################################################################
#
# MODULE:       tests of the ensemble node model
#
# AUTHOR(S):    dlcz_sim developers
#
# PURPOSE:      write, herald, store and read of the two ensembles
#
# COPYRIGHT:	(C) 2026 by the dlcz_sim developers
#
# 		This program is free software under the GNU General Public
# 		License (>=v2). Read the file COPYING that comes with dlcz_sim
# 		for details.
#
#############################################################################

import logging

import numpy as np
import pytest

from dlcz_sim.errors import DomainError, HeraldImpossibleError, ValidationError
from dlcz_sim.estimation import fidelity, wootters_concurrence
from dlcz_sim.fock import AS_L, AS_R, loss_channel
from dlcz_sim.node import (
    HeraldedState,
    NoiseParams,
    apply_phase_jitter,
    bell_state,
    herald,
    heralded_target,
    joint_polarization_state,
    read,
    store,
    symmetric_write,
)
from dlcz_sim.optics import DetectorModel, InterferometerConfig, detect_fringe_probabilities
from dlcz_sim.tests import check_density_operator

WEAK = NoiseParams(chi=1e-4, dark_prob=0.0)


def test_noise_params_derived_quantities():
    params = NoiseParams(leakage_prob=1e-3)
    assert params.path_transmission == pytest.approx(0.35 * 0.92**2)
    assert params.efficiency_product == pytest.approx(0.05 * 0.35 * 0.45)
    assert params.effective_dark_prob == pytest.approx(1 - (1 - 1e-6) * (1 - 1e-3))
    assert params.coherence_factor == pytest.approx(np.exp(-(0.517**2) / 2))
    assert params.storage_factor(0.0) == 1.0


def test_noise_params_domain(caplog):
    with pytest.raises(DomainError):
        NoiseParams(eta_det=1.5)
    with pytest.raises(DomainError):
        NoiseParams(sigma_phi=-0.1)
    with pytest.raises(DomainError):
        NoiseParams(tau_mem=0.0)
    with caplog.at_level(logging.WARNING, logger="dlcz_sim"):
        NoiseParams(chi=0.2)
    assert "multi-excitation" in caplog.text


def test_d1_heralds_the_symmetric_state():
    heralded = herald(symmetric_write(WEAK), "D1", WEAK)
    assert heralded.herald_sign == 1
    assert fidelity(heralded.rho, heralded_target(WEAK.n_max, sign=1)) > 0.99
    assert fidelity(heralded.rho, heralded_target(WEAK.n_max, sign=-1)) < 0.01
    check_density_operator(heralded.rho)


def test_d2_heralds_the_antisymmetric_state():
    heralded = herald(symmetric_write(WEAK), "D2", WEAK)
    assert heralded.herald_sign == -1
    assert fidelity(heralded.rho, heralded_target(WEAK.n_max, sign=-1)) > 0.99


def test_stokes_phase_enters_the_heralded_state():
    heralded = herald(symmetric_write(WEAK, phi_s=0.8), "D1", WEAK)
    target = heralded_target(WEAK.n_max, sign=1, phase=0.8)
    assert fidelity(heralded.rho, target) > 0.99


def test_herald_probability_of_weak_excitation():
    heralded = herald(symmetric_write(WEAK), "D1", WEAK)
    assert heralded.herald_probability == pytest.approx(WEAK.chi * WEAK.herald_efficiency, rel=0.01)
    assert heralded.dark_herald_fraction == 0.0


def test_dark_count_heralds():
    params = NoiseParams(chi=0.0, dark_prob=1e-3)
    heralded = herald(symmetric_write(params), "D1", params)
    assert heralded.dark_herald_fraction == pytest.approx(1.0)
    assert heralded.herald_probability == pytest.approx(1e-3)
    assert heralded.rho.population((0, 0)) == pytest.approx(1.0)


def test_no_herald_without_photons_and_dark_counts():
    params = NoiseParams(chi=0.0, dark_prob=0.0)
    with pytest.raises(HeraldImpossibleError):
        herald(symmetric_write(params), "D1", params)


def test_herald_detector_must_be_d1_or_d2():
    with pytest.raises(ValidationError):
        herald(symmetric_write(WEAK), "D3", WEAK)
    with pytest.raises(ValidationError):
        HeraldedState(heralded_target().density(), 0, 0.1)


def test_storage_damps_the_coherence():
    params = NoiseParams(chi=1e-4, dark_prob=0.0, tau_mem=100.0)
    heralded = herald(symmetric_write(params), "D1", params)
    stored = store(heralded, 100.0, params)
    before = heralded.rho.element((1, 0), (0, 1))
    after = stored.rho.element((1, 0), (0, 1))
    assert abs(after / before) == pytest.approx(np.exp(-1.0))
    assert stored.rho.population((1, 0)) == pytest.approx(heralded.rho.population((1, 0)))
    assert store(heralded, 0.0, params) is heralded
    with pytest.raises(DomainError):
        store(heralded, -1.0, params)


def test_amplitude_decay_empties_the_memory():
    params = NoiseParams(chi=1e-4, dark_prob=0.0, tau_amp=50.0)
    heralded = herald(symmetric_write(params), "D1", params)
    stored = store(heralded, 100.0, params)
    check_density_operator(stored.rho)
    assert stored.rho.population((0, 0)) > heralded.rho.population((0, 0)) + 0.5


def test_read_maps_spin_waves_to_anti_stokes_modes():
    params = NoiseParams(eta_ret=1.0)
    state = HeraldedState(heralded_target(2).density(), 1, 0.1)
    rho_as = read(state, params, phi_as=0.7)
    assert rho_as.register.modes == (AS_L, AS_R)
    assert rho_as.population((1, 0)) == pytest.approx(0.5)
    assert rho_as.element((1, 0), (0, 1)) == pytest.approx(0.5 * np.exp(-0.7j))
    lossy = read(state, NoiseParams(eta_ret=0.2))
    assert lossy.population((0, 0)) == pytest.approx(0.8)


def test_phase_jitter_is_gaussian_dephasing():
    state = HeraldedState(heralded_target(2).density(), 1, 0.1)
    rho_as = apply_phase_jitter(read(state, NoiseParams(eta_ret=1.0)), 0.5)
    assert rho_as.element((1, 0), (0, 1)) == pytest.approx(0.5 * np.exp(-0.125))


def test_joint_polarization_state():
    params = NoiseParams(sigma_phi=0.517)
    rho = joint_polarization_state(params)
    assert wootters_concurrence(rho) == pytest.approx(params.coherence_factor, abs=1e-9)
    assert fidelity(rho, bell_state()) == pytest.approx((1 + params.coherence_factor) / 2)
    noisy = joint_polarization_state(params, white_noise=1.0)
    assert np.allclose(noisy.matrix, np.eye(4) / 4)
    with pytest.raises(DomainError):
        joint_polarization_state(params, white_noise=1.5)


def test_double_excitations_grow_linearly_with_chi():
    chis = np.array([1e-3, 1e-2, 1e-1])
    ratios = []
    for chi in chis:
        params = NoiseParams(chi=float(chi), dark_prob=0.0)
        rho = herald(symmetric_write(params), "D1", params).rho
        ratios.append(rho.population((1, 1)) / (rho.population((0, 1)) + rho.population((1, 0))))
    slope = np.polyfit(np.log(chis), np.log(ratios), 1)[0]
    assert slope == pytest.approx(1.0, abs=0.1)


@pytest.mark.parametrize("detector", ["D1", "D2"])
def test_herald_is_symmetric_in_the_ensemble_labels(detector):
    params = NoiseParams(chi=1e-4, dark_prob=1e-3)
    rho = herald(symmetric_write(params), detector, params).rho
    levels = rho.register.levels
    swapped = (
        rho.matrix.reshape((levels,) * 4).transpose(1, 0, 3, 2).reshape(rho.matrix.shape)
    )
    assert np.allclose(swapped, rho.matrix, rtol=0.0, atol=1e-6)


def test_path_loss_commutes_with_the_anti_stokes_merge():
    params = NoiseParams(chi=1e-4, eta_ret=0.5, n_max=3)
    heralded = herald(symmetric_write(params), "D1", params)
    rho_as = read(heralded, params, phi_as=0.3)
    detectors = (
        DetectorModel("D3", efficiency=0.45, dark_prob=1e-6),
        DetectorModel("D4", efficiency=0.45, dark_prob=1e-6),
    )
    config = InterferometerConfig(pb_phase=0.9)
    after = detect_fringe_probabilities(
        rho_as,
        config,
        detectors,
        transmission=params.path_transmission,
    )
    before = rho_as
    for mode in (AS_L, AS_R):
        before = loss_channel(before, mode, params.path_transmission)
    before = detect_fringe_probabilities(before, config, detectors)
    assert np.allclose(after, before, rtol=0.0, atol=1e-10)


def test_storage_steps_compose():
    params = NoiseParams(chi=1e-4, dark_prob=1e-3, tau_mem=300.0, tau_amp=2000.0)
    heralded = herald(symmetric_write(params), "D1", params)
    stepwise = store(store(heralded, 70.0, params), 130.0, params)
    at_once = store(heralded, 200.0, params)
    assert np.allclose(stepwise.rho.matrix, at_once.rho.matrix, rtol=0.0, atol=1e-12)
    assert np.allclose(stepwise.signal_rho.matrix, at_once.signal_rho.matrix, rtol=0.0, atol=1e-12)
    coherence = at_once.rho.element((1, 0), (0, 1)) / at_once.rho.population((1, 0))
    initial = heralded.rho.element((1, 0), (0, 1)) / heralded.rho.population((1, 0))
    assert abs(coherence / initial) == pytest.approx(np.exp(-200.0 / 300.0), rel=1e-3)
