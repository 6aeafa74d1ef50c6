#!/usr/bin/env python3

############################################################################
#
# MODULE:       tests of the interferometer phase lock
#
# AUTHOR(S):    dlcz_sim developers
#
# PURPOSE:      drift statistics, closed loop and trial phases
#
# COPYRIGHT:	(C) 2026 by the dlcz_sim developers
#
# 		This program is free software under the GNU General Public
# 		License (>=v2). Read the file COPYING that comes with dlcz_sim
# 		for details.
#
#############################################################################

import csv

import numpy as np
import pytest

from dlcz_sim.config import load_config
from dlcz_sim.errors import DomainError, ValidationError
from dlcz_sim.phase_lock import (
    Controller,
    DriftModel,
    error_signal,
    evolve_unlocked,
    run_locked,
    sample_trial_phases,
    scan_gains,
    trial_phase_pool,
    wrap_phase,
    write_trajectory_csv,
)


def test_ou_stationary_variance(rng):
    model = DriftModel(kappa=10.0, sigma_w=1.0, v_drift=0.0, dt=1e-3)
    trajectory = evolve_unlocked(model, 1.0, rng, n_paths=2000)
    final = trajectory.phases[:, -1]
    assert np.var(final) == pytest.approx(model.stationary_variance, rel=0.15)
    assert abs(np.mean(final)) < 4 * np.sqrt(model.stationary_variance / 2000)


def test_free_diffusion_grows_linearly(rng):
    model = DriftModel(kappa=0.0, sigma_w=0.3, v_drift=0.5, dt=1e-3)
    trajectory = evolve_unlocked(model, 2.0, rng, n_paths=2000)
    final = trajectory.phases[:, -1]
    assert np.var(final) == pytest.approx(0.3**2 * 2.0, rel=0.15)
    assert np.mean(final) == pytest.approx(0.5 * 2.0, abs=4 * 0.3 * np.sqrt(2.0 / 2000))
    assert model.stationary_variance == np.inf


def test_zero_gain_reproduces_the_unlocked_path():
    model = DriftModel()
    controller = Controller(k_i=0.0)
    locked = run_locked(model, controller, 0.5, np.random.default_rng(5))
    unlocked = evolve_unlocked(model, 0.5, np.random.default_rng(5))
    assert np.allclose(locked.phases, unlocked.phase)
    assert np.all(locked.actuator == 0.0)


def test_lock_acquires_the_setpoint():
    report = run_locked(DriftModel(), Controller(), 2.0, np.random.default_rng(1))
    assert report.lock_acquired
    assert report.failure is None
    assert report.residual_std < 0.2
    assert report.settling_time < 0.5
    assert not report.saturated
    summary = report.summary()
    assert summary["n_samples"] == 2001


def test_saturated_actuator_fails_the_lock():
    model = DriftModel(v_drift=5.0)
    controller = Controller(actuator_range=0.1)
    report = run_locked(model, controller, 2.0, np.random.default_rng(1))
    assert report.saturated
    assert not report.lock_acquired
    assert "saturated" in report.failure


def test_controller_validation():
    with pytest.raises(ValidationError):
        Controller(setpoint=0.0)
    with pytest.raises(DomainError):
        Controller(k_i=-1.0)
    with pytest.raises(ValidationError):
        run_locked(DriftModel(dt=1e-3), Controller(update_period=1e-4), 0.1, np.random.default_rng(0))
    with pytest.raises(DomainError):
        DriftModel(dt=0.0)


def test_error_signal_and_wrap():
    assert error_signal(np.pi / 2, np.pi / 2) == pytest.approx(0.0)
    assert error_signal(0.0, np.pi / 2) == pytest.approx(0.5)
    assert wrap_phase(3 * np.pi / 2) == pytest.approx(-np.pi / 2)
    assert wrap_phase(np.pi) == pytest.approx(np.pi)


def test_gain_scan_uses_one_noise_realization():
    model = DriftModel()
    reports = scan_gains(model, Controller(), (20.0, 200.0, 200.0), 1.0, seed=3)
    assert [gain for gain, _ in reports] == [20.0, 200.0, 200.0]
    assert all(report.lock_acquired for _, report in reports)
    assert reports[1][1].residual_std == reports[2][1].residual_std
    assert reports[1][1].residual_std < reports[0][1].residual_std


def test_trial_phases_come_from_the_locked_residual(rng):
    report = run_locked(DriftModel(), Controller(), 2.0, np.random.default_rng(1))
    pool = trial_phase_pool(report)
    assert np.mean(pool) == pytest.approx(0.0, abs=1e-12)
    phases = sample_trial_phases(report, 5000, rng)
    assert np.std(phases) == pytest.approx(np.std(pool), rel=0.1)
    assert set(np.unique(phases)) <= set(pool)


def test_trajectory_csv(tmp_path):
    report = run_locked(DriftModel(), Controller(), 0.05, np.random.default_rng(1))
    path = tmp_path / "trajectory.csv"
    write_trajectory_csv(report, str(path))
    with open(path, newline="", encoding="utf-8") as csv_file:
        rows = list(csv.DictReader(csv_file))
    assert list(rows[0]) == ["time", "phi", "error", "actuator"]
    assert len(rows) == len(report.times)


def test_locking_never_widens_the_open_loop_spread():
    config = load_config()
    duration = 10.0
    seed = 11
    controller = config.controller
    unlocked = evolve_unlocked(config.drift, duration, np.random.default_rng(seed))
    open_loop = np.std(wrap_phase(unlocked.phase - controller.setpoint))
    reports = scan_gains(config.drift, controller, config.lock_gains, duration, seed)
    assert [gain for gain, _ in reports] == list(config.lock_gains)
    for gain, report in reports:
        assert report.failure is None, gain
        assert report.residual_std <= open_loop, gain


def test_same_seed_gives_the_same_lock_run():
    model = DriftModel(kappa=2.0)
    controller = Controller(shot_noise=0.05)
    first = run_locked(model, controller, 1.0, np.random.default_rng(8))
    second = run_locked(model, controller, 1.0, np.random.default_rng(8))
    assert first.summary() == second.summary()
    for name in ("phases", "errors", "actuator", "residuals"):
        assert np.array_equal(getattr(first, name), getattr(second, name))


def test_quiet_interferometer_at_the_setpoint():
    controller = Controller()
    model = DriftModel(sigma_w=0.0, v_drift=0.0, phi0=controller.setpoint)
    report = run_locked(model, controller, 0.5, np.random.default_rng(0))
    assert report.residual_std == 0.0
    assert report.settling_time == 0.0
    assert report.lock_acquired
    assert np.all(report.actuator == 0.0)
