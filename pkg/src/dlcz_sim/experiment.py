#!/usr/bin/env python3

############################################################################
#
# MODULE:       lib with the experiments of dlcz_sim
#
# AUTHOR(S):    dlcz_sim developers
#
# PURPOSE:      trial runs, fringe sweep, mode matrix, tomography, CHSH,
#               delay-choice sweep, space-time classification and the
#               calibration of the noise parameters
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
from scipy.optimize import least_squares, minimize_scalar

from .engine import (
    PATTERN_KEYS,
    TrialRecord,
    build_plan,
    phase_response,
    simulate_counts,
    summarize_counts,
    trial_outcome_probabilities,
)
from .errors import (
    HeraldImpossibleError,
    InfeasibleTargetsError,
    ValidationError,
)
from .estimation import (
    CHSH_OUTCOMES,
    CHSH_SETTINGS,
    TOMOGRAPHY_SETTINGS,
    FringeDataset,
    ModeCounts,
    chsh,
    chsh_probabilities,
    concurrence_bound,
    fit_fringe,
    mode_matrix,
    setting_probabilities,
    tomography,
)
from .messages import fatal, message, verbose, warning
from .node import bell_state, joint_polarization_state
from .optics import INTERFERENCE_ANALYZER, MODE_ANALYZER, AomSchedule, route_by_time
from .phase_lock import run_locked, scan_gains, trial_phase_pool

SPEED_OF_LIGHT = 0.299792458  # m/ns
LIGHTLIKE_TOL = 1e-12
ORDER_NAMES = {"S": "Stokes", "AS": "anti-Stokes"}
CALIBRATION_BOUNDS = {
    "chi": (1e-6, 0.5),
    "eta_product": (1e-8, 1.0),
    "dark_prob": (1e-12, 0.1),
    "sigma_phi": (1e-4, np.pi),
    "tau_mem": (1.0, 1e12),
}
INFEASIBLE_RESIDUAL = 1e-3

# seed streams of the experiments
STREAMS = {
    "run": 0,
    "fringe": 1,
    "mode": 2,
    "tomo": 3,
    "chsh": 4,
    "delay": 5,
    "lock": 6,
}


def _seed(config, stream, *index):
    return [int(config.run.seed), STREAMS[stream], *index]


def _time_key(storage_time):
    """Exact integer key of a storage time; 0 stands for the scheduled one."""
    if storage_time is None:
        return 0
    return int(np.asarray(storage_time, dtype=np.float64).view(np.uint64)) + 1


def _engine(config, engine=None):
    return engine or config.run.engine


def phase_pool(config):
    """Per-trial phases of the configured phase source.

    Returns:
        (numpy.ndarray): centred lock residuals, None for Gaussian phases

    """
    if config.run.phase_source != "trajectory":
        return None
    rng = np.random.default_rng(_seed(config, "lock"))
    report = run_locked(config.drift, config.controller, config.lock_duration, rng)
    if not report.lock_acquired:
        warning(
            f"Phase lock not acquired (residual {report.residual_std:.3f} rad), "
            "trial phases follow the unlocked residual",
        )
    message(f"Trial phases from the lock residual, sigma={report.residual_std:.4f} rad")
    return trial_phase_pool(report)


def _characteristic(config, orders, pool):
    orders = np.asarray(orders)
    if pool is not None:
        return np.exp(1j * np.outer(pool, orders)).mean(axis=0)
    return np.exp(-(orders**2) * config.noise.sigma_phi**2 / 2)


def _draw_phases(config, rng, n_trials, pool):
    if pool is not None:
        return rng.choice(pool, size=n_trials, replace=True)
    return rng.normal(0.0, config.noise.sigma_phi, n_trials)


@dataclass
class RunResult:
    counts: dict
    records: list
    routed: object = None
    oracle: dict = field(default_factory=dict)

    @property
    def summary(self):
        return summarize_counts(self.counts)

    def as_dict(self):
        return {
            "counts": dict(self.counts),
            "summary": self.summary,
            "signal_only": summarize_counts(self.counts, include_dark=False),
            "oracle": dict(self.oracle),
            "records": len(self.records),
            "routed": (
                {}
                if self.routed is None
                else {
                    "heralding": len(self.routed.heralding),
                    "verifying": len(self.routed.verifying),
                    "dropped": len(self.routed.dropped),
                }
            ),
        }


def _route_records(config, records):
    schedule = config.schedule
    width = schedule.aom_width
    if schedule.storage_time <= 0:
        warning("Storage time 0: herald and verify windows coincide, events are not routed")
        return None
    if schedule.storage_time < width:
        warning(
            f"AOM width {width} ns exceeds the storage time, using "
            f"{schedule.storage_time} ns windows",
        )
        width = schedule.storage_time
    aom = AomSchedule.for_trial(schedule.write_time, schedule.storage_time, width)
    routed = route_by_time([event for record in records for event in record.events], aom)
    misrouted = [
        event
        for event in routed.verifying
        if event.detector_id in ("D1", "D2")
    ]
    if misrouted:
        warning(f"{len(misrouted)} herald event(s) fell into the verifying window")
    return routed


def run_trials(config, engine=None, trials=None):
    """Run write, herald, store and read trials of a configuration.

    Args:
        config (ExperimentConfig): the configuration
        engine (str): replaces config.run.engine
        trials (int): replaces config.run.trials
    Returns:
        (RunResult): counts, TrialRecords of the first trials and routing

    """
    engine = _engine(config, engine)
    trials = int(trials or config.run.trials)
    try:
        plan = build_plan(config, phase_pool=phase_pool(config))
    except HeraldImpossibleError as error:
        warning(f"{error}, no trial is heralded")
        records = [
            TrialRecord(trial_id, None, 0.0, (0, 0))
            for trial_id in range(min(trials, config.run.max_records))
        ]
        counts = {"trials": trials}
        counts.update({f"{b}_{k}": 0 for b in ("signal", "dark") for k in PATTERN_KEYS})
        return RunResult(counts, records)
    counts, records = simulate_counts(
        plan,
        trials,
        engine,
        _seed(config, "run"),
        config.run.tile_size,
        config.run.nprocs,
        config.run.assist_threshold,
    )
    routed = _route_records(config, records) if records else None
    summary = summarize_counts(counts)
    message(f"{summary['heralds']} heralds in {trials} trials")
    return RunResult(counts, records, routed, trial_outcome_probabilities(plan))


def phase_sweep(
    config,
    phases=None,
    engine=None,
    storage_time=None,
    pool=None,
    stream="fringe",
):
    """Heralded D3/D4 coincidences per Pancharatnam-Berry phase.

    Args:
        config (ExperimentConfig): the configuration
        phases (list): phase grid in rad, config.run.phases equidistant
                       phases if None
        engine (str): replaces config.run.engine
        storage_time (float): replaces the scheduled storage time
        pool (numpy.ndarray): per-trial phases, see phase_pool
        stream (str): seed stream
    Returns:
        (FringeDataset): N_plus (D3), N_minus (D4) and heralds per phase

    """
    if phases is None:
        phases = np.linspace(0.0, 2 * np.pi, config.run.phases, endpoint=False)
    phases = np.asarray(phases, dtype=float)
    engine = _engine(config, engine)
    interferometer = replace(config.interferometer, analyzer_angle=INTERFERENCE_ANALYZER)
    rows = []
    for num, phase in enumerate(phases):
        plan = build_plan(
            config,
            interferometer=interferometer.with_pb_phase(phase),
            storage_time=storage_time,
            phase_pool=pool,
        )
        counts, _ = simulate_counts(
            plan,
            config.run.trials,
            engine,
            _seed(config, stream, num, _time_key(storage_time)),
            config.run.tile_size,
            config.run.nprocs,
            config.run.assist_threshold,
        )
        summary = summarize_counts(counts)
        rows.append((phase, summary["n10"], summary["n01"], summary["heralds"]))
        verbose(f"Phase {phase:.3f}: N+={summary['n10']}, N-={summary['n01']}")
    return FringeDataset.from_rows(rows)


def fringe_experiment(config, engine=None, storage_time=None, pool=None):
    """Phase sweep and the fits of both channels."""
    data = phase_sweep(config, engine=engine, storage_time=storage_time, pool=pool)
    fits = {channel: fit_fringe(data, channel) for channel in ("plus", "minus")}
    visibility = (fits["plus"].visibility + fits["minus"].visibility) / 2
    visibility_err = np.hypot(fits["plus"].visibility_err, fits["minus"].visibility_err) / 2
    message(
        f"V+ = {fits['plus'].visibility:.3f} +/- {fits['plus'].visibility_err:.3f}, "
        f"V- = {fits['minus'].visibility:.3f} +/- {fits['minus'].visibility_err:.3f}",
    )
    return {
        "data": data,
        "fits": fits,
        "V": float(visibility),
        "V_err": float(visibility_err),
    }


def mode_matrix_experiment(config, fringe=None, engine=None, storage_time=None, pool=None):
    """Mode occupation matrix and concurrence bound.

    The analyzer at 0 degree separates the L and R anti-Stokes modes. d
    uses the mean visibility of both fringe channels; the bounds from V+
    and V- alone are reported as well.

    Args:
        config (ExperimentConfig): the configuration
        fringe (dict): output of fringe_experiment, run if None
        engine (str): replaces config.run.engine
        storage_time (float): replaces the scheduled storage time
        pool (numpy.ndarray): per-trial phases, see phase_pool
    Returns:
        (dict): counts, ModeDensityMatrix and ConcurrenceBounds

    """
    engine = _engine(config, engine)
    if fringe is None:
        fringe = fringe_experiment(config, engine, storage_time, pool)
    plan = build_plan(
        config,
        interferometer=replace(config.interferometer, analyzer_angle=MODE_ANALYZER),
        storage_time=storage_time,
        phase_pool=pool,
    )
    counts, _ = simulate_counts(
        plan,
        config.run.mode_trials,
        engine,
        _seed(config, "mode", 0, _time_key(storage_time)),
        config.run.tile_size,
        config.run.nprocs,
        config.run.assist_threshold,
    )
    summary = summarize_counts(counts)
    mode_counts = ModeCounts(
        heralds=summary["heralds"],
        n10=summary["n10"],
        n01=summary["n01"],
        n11=summary["n11"],
    )
    bootstrap = config.run.bootstrap if engine == "sampling" else 0
    rng = np.random.default_rng(_seed(config, "mode", 1, _time_key(storage_time)))
    bounds = {}
    matrices = {}
    for name, (visibility, visibility_err) in (
        ("mean", (fringe["V"], fringe["V_err"])),
        ("plus", (fringe["fits"]["plus"].visibility, fringe["fits"]["plus"].visibility_err)),
        ("minus", (fringe["fits"]["minus"].visibility, fringe["fits"]["minus"].visibility_err)),
    ):
        matrices[name] = mode_matrix(mode_counts, visibility, visibility_err)
        bounds[name] = concurrence_bound(
            matrices[name],
            bootstrap if name == "mean" else 0,
            rng,
        )
    bound = bounds["mean"]
    message(
        f"C_p = {bound.value:.3e} +/- {bound.error:.1e} "
        f"({bound.sigmas:.1f} sigma), C_max = {bound.c_max:.3e}",
    )
    return {
        "counts": summary,
        "signal_only": summarize_counts(counts, include_dark=False),
        "matrix": matrices["mean"],
        "concurrence": bound,
        "concurrence_plus": bounds["plus"],
        "concurrence_minus": bounds["minus"],
        "fringe": fringe,
    }


def _round_robin(n_samples, n_settings):
    return [n_samples // n_settings + (num < n_samples % n_settings) for num in range(n_settings)]


def _polarization_state(config, delta):
    return joint_polarization_state(
        config.noise,
        config.schedule.storage_time,
        config.run.white_noise,
        phase=delta,
        sigma=0.0,
    )


def tomography_counts(config, engine=None, pool=None):
    """Coincidences of the 16 tomography settings.

    Samples are assigned to the settings in turn; each sample carries its
    own residual phase.

    Returns:
        (dict): setting -> coincidence counts

    """
    engine = _engine(config, engine)
    rng = np.random.default_rng(_seed(config, "tomo"))
    counts = {}
    for setting, n_samples in zip(
        TOMOGRAPHY_SETTINGS,
        _round_robin(config.run.tomo_samples, len(TOMOGRAPHY_SETTINGS)),
    ):
        response = phase_response(
            lambda delta, setting=setting: _coincidence(config, delta, setting),
            1,
        )
        if engine == "exact":
            probability = response.average(_characteristic(config, response.orders, pool))[0]
            counts[setting] = n_samples * float(probability)
            continue
        deltas = _draw_phases(config, rng, n_samples, pool)
        probability = response.evaluate(deltas)[:, 0]
        counts[setting] = int((rng.random(n_samples) < probability).sum())
    return counts


def _coincidence(config, delta, setting):
    probability = float(setting_probabilities(_polarization_state(config, delta), (setting,))[0])
    probability = min(max(probability, 0.0), 1.0)
    return [probability, 1.0 - probability]


def tomography_experiment(config, engine=None, pool=None):
    """Tomography of the post-selected Stokes/anti-Stokes polarizations."""
    counts = tomography_counts(config, engine, pool)
    result = tomography(
        counts,
        TOMOGRAPHY_SETTINGS,
        target=bell_state(),
        bootstrap=config.run.tomo_bootstrap,
        seed=_seed(config, "tomo", 1),
        nprocs=config.run.nprocs,
    )
    coherence = config.noise.coherence_factor * config.noise.storage_factor(
        config.schedule.storage_time,
    )
    model_fidelity = (1 - config.run.white_noise) * (1 + coherence) / 2 + config.run.white_noise / 4
    message(f"Concurrence {result.concurrence:.4f}, fidelity {result.fidelity:.4f}")
    return {
        "counts": counts,
        "result": result,
        "model_fidelity": model_fidelity,
        "note": (
            "model_fidelity is (1 + V)/2 of the pure-dephasing model; "
            "white_noise adds an isotropic admixture that lowers it"
        ),
    }


def chsh_counts(config, engine=None, pool=None):
    """Coincidence counts of the four CHSH setting pairs.

    Returns:
        (dict): setting -> outcome -> counts

    """
    engine = _engine(config, engine)
    rng = np.random.default_rng(_seed(config, "chsh"))
    counts = {}
    for (setting, (alpha, beta)), n_samples in zip(
        CHSH_SETTINGS.items(),
        _round_robin(config.run.chsh_samples, len(CHSH_SETTINGS)),
    ):
        response = phase_response(
            lambda delta, alpha=alpha, beta=beta: np.clip(
                chsh_probabilities(_polarization_state(config, delta), alpha, beta),
                0.0,
                None,
            ),
            1,
        )
        if engine == "exact":
            probabilities = response.average(_characteristic(config, response.orders, pool))
            counts[setting] = {
                outcome: n_samples * float(value)
                for outcome, value in zip(CHSH_OUTCOMES, probabilities)
            }
            continue
        probabilities = response.evaluate(_draw_phases(config, rng, n_samples, pool))
        cumulative = np.cumsum(probabilities, axis=1)
        drawn = np.minimum(
            (rng.random((n_samples, 1)) > cumulative).sum(axis=1),
            len(CHSH_OUTCOMES) - 1,
        )
        bins = np.bincount(drawn, minlength=len(CHSH_OUTCOMES))
        counts[setting] = {outcome: int(value) for outcome, value in zip(CHSH_OUTCOMES, bins)}
    return counts


def chsh_experiment(config, engine=None, pool=None):
    counts = chsh_counts(config, engine, pool)
    result = chsh(counts)
    message(
        f"S = {result.s_value:.3f} +/- {result.sigma_s:.3f} "
        f"({result.violation_sigmas:.1f} sigma above 2)",
    )
    return {"counts": counts, "result": result}


@dataclass(frozen=True)
class SpaceTimeEvent:
    """A detection in the lab frame, t in ns and x in m."""

    label: str
    t: float
    x: float

    def __post_init__(self):
        if self.label not in ORDER_NAMES:
            fatal(f"Event label must be S or AS, got <{self.label}>", ValidationError)
        if not (np.isfinite(self.t) and np.isfinite(self.x)):
            fatal(f"Event <{self.label}> has non-finite coordinates", ValidationError)


@dataclass(frozen=True)
class IntervalClass:
    kind: str
    order: int
    first: str = None

    @property
    def ordering(self):
        """Stokes-first, simultaneous or anti-Stokes-first."""
        if self.first is None:
            return "simultaneous"
        return f"{ORDER_NAMES[self.first]}-first"


def classify_interval(e1, e2, tolerance=2.0):
    """Light-cone class and time order of two events.

    Args:
        e1 (SpaceTimeEvent): first event
        e2 (SpaceTimeEvent): second event
        tolerance (float): events closer than tolerance ns are simultaneous
    Returns:
        (IntervalClass): timelike, lightlike or spacelike; order +1 if e1
                         comes first, -1 if e2 comes first, 0 otherwise

    """
    light_distance = SPEED_OF_LIGHT * abs(e2.t - e1.t)
    distance = abs(e2.x - e1.x)
    if abs(light_distance - distance) <= LIGHTLIKE_TOL * max(light_distance, distance):
        kind = "lightlike"
    elif light_distance > distance:
        kind = "timelike"
    else:
        kind = "spacelike"
    delta = e2.t - e1.t
    if abs(delta) <= tolerance:
        return IntervalClass(kind, 0)
    if delta > 0:
        return IntervalClass(kind, 1, e1.label)
    return IntervalClass(kind, -1, e2.label)


@dataclass(frozen=True)
class DelayPoint:
    delay: float
    ordering: str
    interval: str
    visibility: float
    visibility_err: float
    concurrence: float
    concurrence_err: float
    c_max: float = 0.0

    def as_dict(self):
        return {
            "delay": self.delay,
            "ordering": self.ordering,
            "interval": self.interval,
            "V": self.visibility,
            "V_err": self.visibility_err,
            "C_p": self.concurrence,
            "C_p_err": self.concurrence_err,
            "C_max": self.c_max,
        }


@dataclass(frozen=True)
class DelayChoiceResult:
    points: tuple

    def __post_init__(self):
        points = tuple(sorted(self.points, key=lambda point: point.delay))
        object.__setattr__(self, "points", points)

    def _spread(self, values, errors):
        values = np.asarray(values)
        mean = values.mean()
        errors = np.asarray(errors)
        sigma = np.sqrt(errors**2 + (errors**2).mean())
        with np.errstate(divide="ignore", invalid="ignore"):
            spread = np.where(sigma > 0, np.abs(values - mean) / sigma, 0.0)
        return float(mean), float(spread.max())

    def summary(self):
        """Means and the largest deviation from the mean in combined sigma."""
        mean_v, spread_v = self._spread(
            [p.visibility for p in self.points],
            [p.visibility_err for p in self.points],
        )
        mean_c, spread_c = self._spread(
            [p.concurrence for p in self.points],
            [p.concurrence_err for p in self.points],
        )
        return {
            "mean_V": mean_v,
            "max_V_deviation_sigma": spread_v,
            "mean_C_p": mean_c,
            "max_C_p_deviation_sigma": spread_c,
        }

    def as_dict(self):
        return {"points": [p.as_dict() for p in self.points], "summary": self.summary()}

    def rows(self):
        return [
            (p.delay, p.ordering, p.interval, p.visibility, p.visibility_err, p.concurrence, p.concurrence_err)
            for p in self.points
        ]


def delay_choice_sweep(config, delays=None, engine=None):
    """Visibility and concurrence bound over storage delays.

    The Stokes photons get the fibre delay config.run.delay_stokes_delay,
    so the order of the Stokes and anti-Stokes detections changes within
    the sweep.

    Args:
        config (ExperimentConfig): the configuration
        delays (list): storage times in ns, config.run.delays if None
        engine (str): replaces config.run.engine
    Returns:
        (DelayChoiceResult): one point per delay, sorted by delay

    """
    delays = config.run.delays if delays is None else delays
    if any(delay < 0 for delay in delays):
        fatal("Storage delays must be >= 0", ValidationError)
    stokes_delay = config.run.delay_stokes_delay
    pool = phase_pool(config)
    write_time = config.schedule.write_time
    points = []
    for delay in sorted(float(d) for d in delays):
        stokes = SpaceTimeEvent("S", write_time + stokes_delay, config.geometry.herald_station)
        anti_stokes = SpaceTimeEvent("AS", write_time + delay, config.geometry.verify_station)
        interval = classify_interval(stokes, anti_stokes, config.run.simultaneity_tolerance)
        fringe = fringe_experiment(config, engine, storage_time=delay, pool=pool)
        result = mode_matrix_experiment(config, fringe, engine, storage_time=delay, pool=pool)
        bound = result["concurrence"]
        error = bound.bootstrap_error or bound.error
        points.append(
            DelayPoint(
                delay=delay,
                ordering=interval.ordering,
                interval=interval.kind,
                visibility=fringe["V"],
                visibility_err=fringe["V_err"],
                concurrence=bound.value,
                concurrence_err=error,
                c_max=bound.c_max,
            ),
        )
        message(
            f"Delay {delay} ns: {interval.ordering} ({interval.kind}), "
            f"V={fringe['V']:.3f}, C_p={bound.value:.3e}",
        )
    return DelayChoiceResult(tuple(points))


def lock_experiment(config, seed=None):
    """Gain scan and the locked run of the configured controller."""
    seed = _seed(config, "lock") if seed is None else seed
    scan = scan_gains(config.drift, config.controller, config.lock_gains, config.lock_duration, seed)
    report = run_locked(
        config.drift,
        config.controller,
        config.lock_duration,
        np.random.default_rng(seed),
    )
    return {"scan": scan, "report": report}


def forward_observables(config, params=None, storage_time=None):
    """Herald-conditional observables of the exact engine.

    Returns:
        (dict): p00, p01, p10, p11 with the analyzer at 0 degree, V of the
                D3 channel and the herald probability

    """
    params = params or config.noise
    plan = build_plan(
        config,
        params=params,
        interferometer=replace(
            config.interferometer,
            analyzer_angle=MODE_ANALYZER,
            elements=(),
        ),
        storage_time=storage_time,
    )
    summary = summarize_counts(trial_outcome_probabilities(plan))
    heralds = summary["heralds"]
    observables = {
        "p00": summary["n00"] / heralds,
        "p10": summary["n10"] / heralds,
        "p01": summary["n01"] / heralds,
        "p11": summary["n11"] / heralds,
        "herald_probability": heralds,
    }
    observables["V"] = predicted_visibility(config, params, storage_time)
    return observables


def predicted_visibility(config, params=None, storage_time=None, channel="plus"):
    """Exact jitter averaged fringe visibility of one channel.

    The Pancharatnam-Berry phase acts on the R anti-Stokes mode like the
    per-trial phase, so the averaged click probability is a
    trigonometric polynomial in the phase; its extrema are bracketed on a
    grid and refined.
    """
    params = params or config.noise
    plan = build_plan(
        config,
        params=params,
        interferometer=replace(
            config.interferometer,
            analyzer_angle=INTERFERENCE_ANALYZER,
            pb_phase=0.0,
            elements=(),
        ),
        storage_time=storage_time,
    )
    index = PATTERN_KEYS.index("10" if channel == "plus" else "01")
    weights = {"signal": plan.p_signal, "dark": plan.dark_prob * (1 - plan.p_signal)}
    terms = []
    for branch, response in plan.responses.items():
        if response is None or weights[branch] <= 0:
            continue
        characteristic = plan.characteristic(response.orders)
        terms.append((response.orders, weights[branch] * characteristic * response.coefficients[:, index]))

    def fringe(phi):
        return float(
            sum(np.real(np.sum(coeffs * np.exp(1j * orders * phi))) for orders, coeffs in terms),
        )

    grid = np.linspace(0.0, 2 * np.pi, 73)
    values = np.array([fringe(phi) for phi in grid])
    step = grid[1] - grid[0]
    extrema = []
    for sign, start in ((-1.0, grid[values.argmax()]), (1.0, grid[values.argmin()])):
        result = minimize_scalar(
            lambda phi, sign=sign: sign * fringe(phi),
            bounds=(start - step, start + step),
            method="bounded",
            options={"xatol": 1e-12},
        )
        extrema.append(fringe(result.x))
    high, low = extrema
    if high + low <= 0:
        return 0.0
    return float((high - low) / (high + low))


@dataclass
class CalibrationResult:
    params: object
    fitted: dict
    predicted: dict
    targets: dict
    residuals: dict
    success: bool
    notes: list = field(default_factory=list)
    asymmetry: float = 0.0
    cost: float = 0.0

    def as_dict(self):
        return {
            "fitted": dict(self.fitted),
            "predicted": dict(self.predicted),
            "targets": dict(self.targets),
            "residuals": dict(self.residuals),
            "success": self.success,
            "non_identifiable": list(self.notes),
            "p01_p10_asymmetry": self.asymmetry,
            "cost": self.cost,
        }


def _with_free(params, names, values):
    updates = {}
    for name, value in zip(names, values):
        if name == "eta_product":
            updates["eta_ret"] = min(1.0, value / (params.eta_trans * params.eta_det))
        else:
            updates[name] = value
    return replace(params, **updates)


def _free_value(params, name):
    if name == "eta_product":
        return params.efficiency_product
    return getattr(params, name)


def _check_targets(targets, params, free):
    for name, value in targets.items():
        if not np.isfinite(value) or value < 0:
            fatal(f"Calibration target <{name}> must be >= 0, got {value}", ValidationError)
    if "V" in targets:
        if targets["V"] > 1:
            fatal(f"A visibility target of {targets['V']} exceeds 1", ValidationError)
        if targets["V"] >= 1 - 1e-9:
            reasons = []
            if targets.get("p11", 0) > 0:
                reasons.append("p11 > 0")
            if "dark_prob" not in free and params.effective_dark_prob > 0:
                reasons.append("dark counts > 0")
            if "chi" in free or params.chi > 0:
                reasons.append("chi > 0")
            if reasons:
                fatal(
                    "V = 1 is not reachable with " + " and ".join(reasons),
                    InfeasibleTargetsError,
                )
    if "p01" in targets and "p10" in targets and targets["p01"] + targets["p10"] <= 0:
        fatal("p01 + p10 must be > 0", ValidationError)


def _residuals(observables, targets):
    """Relative residuals of p01 + p10, p11 and V."""
    residuals = {}
    if "p01" in targets and "p10" in targets:
        target = targets["p01"] + targets["p10"]
        residuals["p01+p10"] = (observables["p01"] + observables["p10"]) / target - 1
        scale = target
    else:
        scale = 1.0
    if "p11" in targets:
        target = targets["p11"]
        residuals["p11"] = (
            observables["p11"] / target - 1 if target > 0 else observables["p11"] / scale
        )
    if "V" in targets:
        residuals["V"] = observables["V"] / targets["V"] - 1 if targets["V"] > 0 else observables["V"]
    return residuals


def calibrate(config, targets=None, free=None, storage_time=None):
    """Fit free noise parameters to observed targets with the exact engine.

    The fit runs on log-parameters with bounds. The efficiency product
    eta_ret * eta_trans * eta_det is carried by eta_ret.

    Args:
        config (ExperimentConfig): start values and fixed parameters
        targets (dict): p01, p10, p11 and V (config.calibration if None)
        free (list): free parameters out of chi, eta_product, dark_prob,
                     sigma_phi and tau_mem
        storage_time (float): replaces the scheduled storage time
    Returns:
        (CalibrationResult): fitted parameters, predictions and residuals

    """
    targets = dict(config.calibration["targets"] if targets is None else targets)
    free = tuple(config.calibration["free"] if free is None else free)
    params = config.noise
    unknown = [name for name in free if name not in CALIBRATION_BOUNDS]
    if unknown or not free:
        fatal(f"Invalid free parameters {list(free)}", ValidationError)
    _check_targets(targets, params, free)

    lower = np.log([CALIBRATION_BOUNDS[name][0] for name in free])
    upper = np.log([CALIBRATION_BOUNDS[name][1] for name in free])
    if "eta_product" in free:
        index = free.index("eta_product")
        upper[index] = np.log(params.eta_trans * params.eta_det)
    start = np.clip(
        np.log([max(_free_value(params, name), 1e-300) for name in free]),
        lower + 1e-9,
        upper - 1e-9,
    )

    def residual_vector(log_values):
        trial = _with_free(params, free, np.exp(log_values))
        return np.array(list(_residuals(forward_observables(config, trial, storage_time), targets).values()))

    tolerance = config.calibration.get("tolerance", 1e-6)
    result = least_squares(
        residual_vector,
        start,
        bounds=(lower, upper),
        method="trf",
        x_scale="jac",
        xtol=1e-15,
        ftol=1e-15,
        gtol=1e-15,
        max_nfev=500,
    )
    fitted_params = _with_free(params, free, np.exp(result.x))
    predicted = forward_observables(config, fitted_params, storage_time)
    residuals = _residuals(predicted, targets)
    worst = max((abs(value) for value in residuals.values()), default=0.0)
    if worst > INFEASIBLE_RESIDUAL:
        fatal(
            f"Calibration targets not reachable, residuals {residuals}",
            InfeasibleTargetsError,
        )
    success = bool(result.success and worst <= tolerance)
    if not success:
        warning(f"Calibration residual {worst:.2e} above the tolerance {tolerance:.0e}")

    notes = [
        "only the efficiency product eta_ret*eta_trans*eta_det is constrained "
        "by the anti-Stokes observables; eta_ret carries it, eta_trans and "
        "eta_det stay fixed",
    ]
    if len(free) > len(residuals):
        notes.append(
            f"{len(free)} free parameters for {len(residuals)} observables: "
            f"the fit is one point of a {len(free) - len(residuals)}-dimensional "
            "family of solutions",
        )
    asymmetry = 0.0
    if targets.get("p01", 0) + targets.get("p10", 0) > 0:
        asymmetry = (targets.get("p10", 0) - targets.get("p01", 0)) / (
            targets.get("p10", 0) + targets.get("p01", 0)
        )
        if abs(asymmetry) > 0:
            notes.append(
                f"p10/p01 asymmetry {asymmetry:.3f} is outside the symmetric "
                "model and only p01 + p10 is fitted",
            )
    fitted = {name: float(_free_value(fitted_params, name)) for name in free}
    message(f"Calibrated {fitted} with residual {worst:.2e}")
    return CalibrationResult(
        params=fitted_params,
        fitted=fitted,
        predicted=predicted,
        targets=targets,
        residuals=residuals,
        success=success,
        notes=notes,
        asymmetry=float(asymmetry),
        cost=float(result.cost),
    )
