#!/usr/bin/env python3

############################################################################
#
# MODULE:       tests of the estimators
#
# AUTHOR(S):    dlcz_sim developers
#
# PURPOSE:      fringe fits, concurrence bound, tomography and CHSH
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

from dlcz_sim.errors import (
    CompletenessError,
    ShapeError,
    UndefinedEstimateError,
    ValidationError,
)
from dlcz_sim.estimation import (
    CHSH_OUTCOMES,
    CHSH_SETTINGS,
    TOMOGRAPHY_SETTINGS,
    FringeDataset,
    ModeCounts,
    ModeDensityMatrix,
    chsh,
    chsh_probabilities,
    concurrence_bound,
    fidelity,
    fit_fringe,
    mode_matrix,
    setting_probabilities,
    tomography,
    wootters_concurrence,
)
from dlcz_sim.node import NoiseParams, bell_state, joint_polarization_state
from dlcz_sim.tests import check_density_operator

P01 = 3.1e-3
P10 = 3.5e-3
P11 = 5.5e-7
P00 = 1 - P01 - P10 - P11


def published_matrix(d):
    return ModeDensityMatrix(p00=P00, p01=P01, p10=P10, p11=P11, d=d)


def random_two_qubit_state(rng, rank=4):
    ginibre = rng.normal(size=(4, rank)) + 1j * rng.normal(size=(4, rank))
    matrix = ginibre @ ginibre.conj().T
    return matrix / np.trace(matrix).real


def dephased_bell(coherence):
    matrix = np.zeros((4, 4), dtype=complex)
    matrix[0, 0] = matrix[3, 3] = 0.5
    matrix[0, 3] = matrix[3, 0] = coherence / 2
    return matrix


def expected_chsh_counts(rho, n_per_setting):
    return {
        setting: dict(zip(CHSH_OUTCOMES, n_per_setting * chsh_probabilities(rho, alpha, beta)))
        for setting, (alpha, beta) in CHSH_SETTINGS.items()
    }


def test_concurrence_bound_of_published_values():
    bound = concurrence_bound(published_matrix(2.9e-3))
    assert bound.value == pytest.approx(2 * (2.9e-3 - np.sqrt(P00 * P11)), abs=1e-12)
    assert bound.value == pytest.approx(4.32e-3, abs=5e-6)
    assert concurrence_bound(published_matrix(2.97e-3)).value == pytest.approx(4.46e-3, abs=5e-6)


def test_ideal_bound_equals_the_click_probabilities():
    counts = ModeCounts(heralds=1000000, n10=3500, n01=3100, n11=0)
    matrix = mode_matrix(counts, visibility=1.0)
    assert matrix.c_max == pytest.approx(6.6e-3)
    assert concurrence_bound(matrix).value == pytest.approx(6.6e-3, abs=1e-15)


def test_bound_is_zero_without_coherence():
    assert concurrence_bound(published_matrix(0.0)).value == 0.0
    assert concurrence_bound(published_matrix(0.0)).error == 0.0


def test_bound_grows_with_the_visibility():
    counts = ModeCounts(heralds=10**7, n10=35000, n01=31000, n11=6)
    values = [
        concurrence_bound(mode_matrix(counts, visibility)).value
        for visibility in np.linspace(0.0, 1.0, 11)
    ]
    assert all(np.diff(values) >= 0)
    assert values[-1] > values[0]


def test_mode_matrix_estimates():
    counts = ModeCounts(heralds=10**6, n10=3500, n01=3100, n11=1)
    matrix = mode_matrix(counts, visibility=0.875, visibility_err=0.02)
    assert matrix.p10 == pytest.approx(3.5e-3)
    assert matrix.p01 == pytest.approx(3.1e-3)
    assert matrix.d == pytest.approx(0.875 * 6.6e-3 / 2)
    assert matrix.errors["p10"] == pytest.approx(np.sqrt(3500) / 1e6)
    assert matrix.matrix()[1, 2] == pytest.approx(matrix.d)
    assert np.trace(matrix.matrix()).real == pytest.approx(1.0)


def test_mode_matrix_needs_heralds():
    with pytest.raises(UndefinedEstimateError):
        mode_matrix({"heralds": 0, "n10": 0, "n01": 0, "n11": 0}, 0.9)
    with pytest.raises(ValidationError):
        ModeCounts(heralds=10, n10=6, n01=6, n11=0)


def test_bound_error_scales_with_inverse_sqrt_counts():
    small = ModeCounts(heralds=10**6, n10=3500, n01=3100, n11=4)
    large = ModeCounts(heralds=4 * 10**6, n10=14000, n01=12400, n11=16)
    error_small = concurrence_bound(mode_matrix(small, 0.9)).error
    error_large = concurrence_bound(mode_matrix(large, 0.9)).error
    assert error_small / error_large == pytest.approx(2.0, rel=1e-9)


def test_bootstrap_significance_at_published_scale(rng):
    heralds = 46000000
    counts = ModeCounts(
        heralds=heralds,
        n10=round(P10 * heralds),
        n01=round(P01 * heralds),
        n11=round(P11 * heralds),
    )
    bound = concurrence_bound(mode_matrix(counts, 0.875, 0.02), bootstrap=300, rng=rng)
    assert bound.bootstrap_error > 0
    assert bound.bootstrap_interval[0] < bound.value < bound.bootstrap_interval[1]
    assert bound.sigmas >= 10


def test_wootters_concurrence_of_reference_states():
    assert wootters_concurrence(bell_state().density()) == pytest.approx(1.0, abs=1e-9)
    product = np.zeros((4, 4))
    product[0, 0] = 1.0
    assert wootters_concurrence(product) == pytest.approx(0.0, abs=1e-9)
    assert wootters_concurrence(dephased_bell(0.875)) == pytest.approx(0.875, abs=1e-9)
    bell = bell_state().density().matrix
    for weight in (0.2, 0.5, 0.9):
        werner = weight * bell + (1 - weight) * np.eye(4) / 4
        expected = max(0.0, (3 * weight - 1) / 2)
        assert wootters_concurrence(werner) == pytest.approx(expected, abs=1e-9)


def test_wootters_concurrence_bounds(rng):
    for _ in range(20):
        value = wootters_concurrence(random_two_qubit_state(rng))
        assert 0.0 <= value <= 1.0
    with pytest.raises(ShapeError):
        wootters_concurrence(np.eye(3) / 3)
    with pytest.raises(ValidationError):
        wootters_concurrence(np.diag([1.2, -0.2, 0.0, 0.0]))


def test_fidelity_checks_dimensions():
    assert fidelity(dephased_bell(0.875), bell_state()) == pytest.approx(0.9375)
    with pytest.raises(ShapeError):
        fidelity(np.eye(2) / 2, bell_state())


def test_chsh_of_the_dephased_bell_state():
    params = NoiseParams(sigma_phi=0.517)
    rho = joint_polarization_state(params)
    result = chsh(expected_chsh_counts(rho, 10**6))
    assert result.s_value == pytest.approx(2 * np.sqrt(2) * params.coherence_factor, abs=1e-9)
    assert result.s_value == pytest.approx(2.474, abs=1e-3)
    assert result.violation_sigmas > 10


def test_chsh_respects_the_tsirelson_bound(rng):
    for _ in range(25):
        rho = random_two_qubit_state(rng, rank=1)
        assert chsh(expected_chsh_counts(rho, 10**4)).s_value <= 2 * np.sqrt(2) + 1e-9


def test_chsh_error_scaling():
    rho = dephased_bell(0.875)
    small = chsh(expected_chsh_counts(rho, 10**4))
    large = chsh(expected_chsh_counts(rho, 4 * 10**4))
    assert small.sigma_s / large.sigma_s == pytest.approx(2.0, rel=1e-9)


def test_chsh_input_checks():
    counts = expected_chsh_counts(dephased_bell(0.9), 100)
    counts.pop("a',b'")
    with pytest.raises(ValidationError):
        chsh(counts)
    counts = expected_chsh_counts(dephased_bell(0.9), 100)
    counts["a,b"] = {"++": 0, "--": 0}
    with pytest.raises(ValidationError):
        chsh(counts)


def test_tomography_round_trip_of_expected_counts():
    rho = dephased_bell(0.875)
    counts = dict(zip(TOMOGRAPHY_SETTINGS, 1e6 / 16 * setting_probabilities(rho)))
    result = tomography(counts)
    check_density_operator(result.rho)
    assert result.concurrence == pytest.approx(0.875, abs=1e-3)
    assert result.fidelity == pytest.approx(0.9375, abs=1e-3)


def test_tomography_round_trip_with_poisson_noise(rng):
    rho = dephased_bell(0.875)
    counts = rng.poisson(1e6 / 16 * setting_probabilities(rho))
    result = tomography(counts, TOMOGRAPHY_SETTINGS)
    assert result.concurrence == pytest.approx(0.875, abs=0.01)
    assert result.fidelity == pytest.approx(0.9375, abs=0.01)


def test_tomography_of_a_random_state(rng):
    rho = random_two_qubit_state(rng)
    counts = 1e7 * setting_probabilities(rho)
    result = tomography(counts)
    assert np.allclose(result.rho.matrix, rho, atol=1e-3)


def test_tomography_bootstrap_gives_uncertainties():
    rho = dephased_bell(0.875)
    counts = np.round(1e5 * setting_probabilities(rho))
    result = tomography(counts, bootstrap=5, seed=3)
    assert set(result.uncertainties) == {"concurrence", "fidelity"}
    assert result.uncertainties["concurrence"] > 0


def test_tomography_input_checks():
    with pytest.raises(CompletenessError):
        tomography(np.ones(10), TOMOGRAPHY_SETTINGS[:10])
    with pytest.raises(ShapeError):
        tomography(np.ones(10))
    with pytest.raises(UndefinedEstimateError):
        tomography(np.zeros(16))


def fringe_data(visibility, offset, amplitude=1000.0, n_phases=16):
    phases = np.linspace(0.0, 2 * np.pi, n_phases, endpoint=False)
    plus = amplitude * (1 + visibility * np.cos(phases - offset))
    minus = amplitude * (1 - visibility * np.cos(phases - offset))
    return FringeDataset(phases, plus, minus, np.full(n_phases, 1e6))


def test_fit_fringe_recovers_visibility_and_phase():
    data = fringe_data(0.9, 0.3)
    fit = fit_fringe(data, "plus")
    assert fit.visibility == pytest.approx(0.9, abs=1e-9)
    assert fit.phase == pytest.approx(0.3, abs=1e-9)
    assert fit.amplitude == pytest.approx(1000.0)
    assert 0 < fit.visibility_err < 0.05
    minus = fit_fringe(data, "minus")
    assert minus.visibility == pytest.approx(0.9, abs=1e-9)
    assert abs(np.angle(np.exp(1j * (minus.phase - fit.phase)))) == pytest.approx(np.pi)


def test_fit_fringe_error_shrinks_with_counts():
    small = fit_fringe(fringe_data(0.9, 0.0, amplitude=100.0))
    large = fit_fringe(fringe_data(0.9, 0.0, amplitude=400.0))
    assert small.visibility_err / large.visibility_err == pytest.approx(2.0, rel=1e-6)


def test_fit_fringe_of_flat_data():
    data = fringe_data(0.0, 0.0)
    fit = fit_fringe(data)
    assert fit.degenerate
    assert fit.visibility == 0.0


def test_fit_fringe_keeps_the_visibility_physical():
    phases = np.linspace(0.0, 2 * np.pi, 16, endpoint=False)
    counts = np.maximum(0.0, 500 * (1 + 1.4 * np.cos(phases)))
    fit = fit_fringe(FringeDataset(phases, counts, counts, np.ones(16)))
    assert 0.0 <= fit.visibility <= 1.0


def test_fit_fringe_input_checks():
    with pytest.raises(ValidationError):
        fit_fringe(fringe_data(0.9, 0.0, n_phases=4))
    with pytest.raises(UndefinedEstimateError):
        fit_fringe(fringe_data(0.9, 0.0, amplitude=0.0))
    with pytest.raises(ValidationError):
        fringe_data(0.9, 0.0).counts("both")
    with pytest.raises(ShapeError):
        FringeDataset([0.0, 1.0], [1.0], [1.0], [1.0])


@pytest.mark.parametrize("factor", [4.0, 25.0, 1000.0])
def test_fit_fringe_is_invariant_under_count_scaling(rng, factor):
    data = fringe_data(0.85, 1.1)
    noisy = FringeDataset(
        data.phases,
        rng.poisson(data.n_plus),
        rng.poisson(data.n_minus),
        data.heralds,
    )
    scaled = noisy.scaled(factor)
    for channel in ("plus", "minus"):
        fit = fit_fringe(noisy, channel)
        scaled_fit = fit_fringe(scaled, channel)
        assert scaled_fit.visibility == pytest.approx(fit.visibility, abs=1e-12)
        assert scaled_fit.phase == pytest.approx(fit.phase, abs=1e-12)
        assert scaled_fit.visibility_err == pytest.approx(
            fit.visibility_err / np.sqrt(factor),
            rel=1e-9,
        )
