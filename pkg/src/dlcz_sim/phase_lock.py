#!/usr/bin/env python3

############################################################################
#
# MODULE:       lib with the interferometer phase drift and lock
#
# AUTHOR(S):    dlcz_sim developers
#
# PURPOSE:      Ornstein-Uhlenbeck phase drift, auxiliary fringe error
#               signal and the integral feedback loop on the piezo
#
# COPYRIGHT:	(C) 2026 by the dlcz_sim developers
#
# 		This program is free software under the GNU General Public
# 		License (>=v2). Read the file COPYING that comes with dlcz_sim
# 		for details.
#
#############################################################################

from dataclasses import dataclass, field, replace

import numpy as np

from .data_io import write_csv_table
from .errors import DomainError, ValidationError
from .messages import fatal, message, verbose, warning
from .validation import check_positive

SATURATION_LIMIT = 0.5


@dataclass(frozen=True)
class DriftModel:
    """Unlocked phase: OU process plus a linear drift.

    Args:
        kappa (float): mean-reversion rate in 1/s
        sigma_w (float): diffusion strength in rad/sqrt(s)
        v_drift (float): deterministic drift in rad/s
        dt (float): time step in s
        phi0 (float): phase at t = 0 in rad

    """

    kappa: float = 0.0
    sigma_w: float = 0.3
    v_drift: float = 0.5
    dt: float = 1e-3
    phi0: float = 0.0

    def __post_init__(self):
        check_positive("kappa", self.kappa, strict=False)
        check_positive("sigma_w", self.sigma_w, strict=False)
        check_positive("dt", self.dt)
        if not np.isfinite(self.v_drift):
            fatal("v_drift is not finite", DomainError)

    @property
    def decay(self):
        return float(np.exp(-self.kappa * self.dt))

    @property
    def step_std(self):
        """Standard deviation of the exact OU increment over one step."""
        if self.kappa == 0:
            return self.sigma_w * np.sqrt(self.dt)
        return self.sigma_w * np.sqrt((1 - np.exp(-2 * self.kappa * self.dt)) / (2 * self.kappa))

    @property
    def stationary_variance(self):
        if self.kappa == 0:
            return np.inf
        return self.sigma_w**2 / (2 * self.kappa)

    def n_steps(self, duration):
        duration = check_positive("duration", duration)
        return max(1, int(round(duration / self.dt)))


@dataclass(frozen=True)
class Controller:
    """Integral (optionally PI) controller driving the piezo.

    Args:
        k_i (float): integral gain in 1/s per unit of error signal
        update_period (float): controller period in s, >= dt
        actuator_range (float): piezo range in rad (+/-)
        setpoint (float): phase setpoint in rad
        k_p (float): proportional gain
        lock_threshold (float): residual std below which the lock counts
                                as acquired
        shot_noise (float): std of the additive noise on the error signal
        settle_tolerance (float): |residual| marking the end of the
                                  acquisition phase

    """

    k_i: float = 50.0
    update_period: float = 1e-3
    actuator_range: float = 50.0
    setpoint: float = np.pi / 2
    k_p: float = 0.0
    lock_threshold: float = 0.52
    shot_noise: float = 0.0
    settle_tolerance: float = 0.1

    def __post_init__(self):
        check_positive("k_i", self.k_i, strict=False)
        check_positive("k_p", self.k_p, strict=False)
        check_positive("update_period", self.update_period)
        check_positive("actuator_range", self.actuator_range)
        check_positive("lock_threshold", self.lock_threshold)
        check_positive("shot_noise", self.shot_noise, strict=False)
        check_positive("settle_tolerance", self.settle_tolerance)
        if np.isclose(np.sin(self.setpoint), 0.0):
            fatal(
                "The setpoint sits on a fringe extremum, the error signal "
                "has no slope there",
                ValidationError,
            )


@dataclass
class PhaseTrajectory:
    times: np.ndarray
    phases: np.ndarray

    @property
    def phase(self):
        """The first path."""
        return self.phases[0]


@dataclass
class LockReport:
    residual_std: float
    lock_acquired: bool
    settling_time: float
    saturated: bool = False
    saturation_share: float = 0.0
    failure: str = None
    times: np.ndarray = field(default=None, repr=False)
    phases: np.ndarray = field(default=None, repr=False)
    errors: np.ndarray = field(default=None, repr=False)
    actuator: np.ndarray = field(default=None, repr=False)
    residuals: np.ndarray = field(default=None, repr=False)

    def summary(self):
        """JSON friendly summary without the trajectory arrays."""
        return {
            "residual_std": float(self.residual_std),
            "lock_acquired": bool(self.lock_acquired),
            "settling_time": float(self.settling_time),
            "saturated": bool(self.saturated),
            "saturation_share": float(self.saturation_share),
            "failure": self.failure,
            "n_samples": 0 if self.times is None else int(len(self.times)),
            "mean_residual": (
                0.0 if self.residuals is None else float(np.mean(self.residuals))
            ),
        }


def wrap_phase(phi):
    """Map phases to (-pi, pi]."""
    return -((-np.asarray(phi) + np.pi) % (2 * np.pi) - np.pi)


def _drift_noise(model, n_steps, rng, n_paths=1):
    return rng.standard_normal((n_paths, n_steps))


def evolve_unlocked(model, duration, rng, n_paths=1):
    """Sample free-running phase paths.

    Args:
        model (DriftModel): the drift model
        duration (float): length in s
        rng (numpy.random.Generator): random generator
        n_paths (int): number of independent paths
    Returns:
        (PhaseTrajectory): times (n+1,) and phases (n_paths, n+1)

    """
    n_steps = model.n_steps(duration)
    noise = _drift_noise(model, n_steps, rng, n_paths)
    times = np.arange(n_steps + 1) * model.dt
    ou = np.zeros((n_paths, n_steps + 1))
    for step in range(n_steps):
        ou[:, step + 1] = model.decay * ou[:, step] + model.step_std * noise[:, step]
    return PhaseTrajectory(times, model.phi0 + ou + model.v_drift * times)


def fringe_intensity(phi):
    return (1 + np.cos(phi)) / 2


def error_signal(phi, setpoint):
    """Auxiliary fringe intensity relative to the setpoint, in [-1, 1]."""
    return fringe_intensity(phi) - fringe_intensity(setpoint)


def run_locked(model, controller, duration, rng):
    """Simulate the closed loop.

    The drift noise is drawn exactly as in evolve_unlocked, so a
    controller without gain reproduces the unlocked path of the same seed.

    Args:
        model (DriftModel): the drift model
        controller (Controller): the controller
        duration (float): length in s
        rng (numpy.random.Generator): random generator
    Returns:
        (LockReport): residual statistics and the trajectory

    """
    if controller.update_period < model.dt * (1 - 1e-9):
        fatal(
            f"Controller period {controller.update_period} s is shorter "
            f"than the time step {model.dt} s",
            ValidationError,
        )
    n_steps = model.n_steps(duration)
    noise = _drift_noise(model, n_steps, rng)[0]
    shot = (
        controller.shot_noise * rng.standard_normal(n_steps + 1)
        if controller.shot_noise > 0
        else np.zeros(n_steps + 1)
    )
    every = max(1, int(round(controller.update_period / model.dt)))
    period = every * model.dt
    sign = np.sign(np.sin(controller.setpoint))

    times = np.arange(n_steps + 1) * model.dt
    phases = np.zeros(n_steps + 1)
    errors = np.zeros(n_steps + 1)
    actuator = np.zeros(n_steps + 1)
    ou = 0.0
    integral = 0.0
    output = 0.0
    updates = 0
    saturated_updates = 0
    for step in range(n_steps + 1):
        if step > 0:
            ou = model.decay * ou + model.step_std * noise[step - 1]
        phases[step] = model.phi0 + ou + model.v_drift * times[step] + output
        errors[step] = error_signal(phases[step], controller.setpoint) + shot[step]
        if step % every == 0:
            updates += 1
            integral += controller.k_i * sign * errors[step] * period
            limit = controller.actuator_range
            if abs(integral) >= limit:
                saturated_updates += 1
                integral = float(np.clip(integral, -limit, limit))
            output = float(
                np.clip(integral + controller.k_p * sign * errors[step], -limit, limit),
            )
        actuator[step] = output

    residuals = wrap_phase(phases - controller.setpoint)
    inside = np.flatnonzero(np.abs(residuals) <= controller.settle_tolerance)
    settle_index = int(inside[0]) if inside.size else n_steps
    window = residuals[settle_index:]
    residual_std = float(np.std(window)) if window.size > 1 else 0.0
    saturation_share = saturated_updates / max(updates, 1)
    saturated = saturation_share > SATURATION_LIMIT
    failure = None
    if saturated:
        failure = (
            f"actuator saturated on {saturation_share:.0%} of the controller updates"
        )
        warning(f"Lock failed: {failure}")
    elif not inside.size:
        failure = "phase never came within the settle tolerance"
        warning(f"Lock failed: {failure}")
    lock_acquired = (
        failure is None and residual_std < controller.lock_threshold
    )
    verbose(
        f"Lock k_i={controller.k_i}: sigma_phi={residual_std:.4f} rad, "
        f"settling time {times[settle_index]:.4f} s",
    )
    return LockReport(
        residual_std=residual_std,
        lock_acquired=lock_acquired,
        settling_time=float(times[settle_index]),
        saturated=saturated,
        saturation_share=saturation_share,
        failure=failure,
        times=times,
        phases=phases,
        errors=errors,
        actuator=actuator,
        residuals=residuals,
    )


def scan_gains(model, controller, gains, duration, seed):
    """Run the lock for every integral gain with the same noise realization.

    Returns:
        (list): tuples (k_i, LockReport) in the order of gains

    """
    reports = []
    for gain in gains:
        rng = np.random.default_rng(seed)
        reports.append((gain, run_locked(model, replace(controller, k_i=gain), duration, rng)))
    best = min(reports, key=lambda item: item[1].residual_std)
    message(f"Best integral gain {best[0]} with sigma_phi={best[1].residual_std:.4f} rad")
    return reports


def trial_phase_pool(report):
    """Centred post-settling residuals of a lock run."""
    settle = int(np.searchsorted(report.times, report.settling_time))
    residuals = report.residuals[settle:]
    if residuals.size == 0:
        fatal("Lock trajectory has no post-settling samples", DomainError)
    return residuals - residuals.mean()


def sample_trial_phases(report, n_trials, rng):
    """Draw per-trial phases from the post-settling residual of a lock run."""
    return rng.choice(trial_phase_pool(report), size=n_trials, replace=True)


def write_trajectory_csv(report, path):
    """Write time, phase, error signal and actuator of a lock run."""
    rows = zip(report.times, report.phases, report.errors, report.actuator)
    write_csv_table(path, ("time", "phi", "error", "actuator"), rows)
