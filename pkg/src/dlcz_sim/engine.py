#!/usr/bin/env python3

############################################################################
#
# MODULE:       lib with the trial engine of dlcz_sim
#
# AUTHOR(S):    dlcz_sim developers
#
# PURPOSE:      herald and verify stages of one write/read trial, exact
#               outcome probabilities and tiled Monte-Carlo sampling
#
# COPYRIGHT:	(C) 2026 by the dlcz_sim developers
#
# 		This program is free software under the GNU General Public
# 		License (>=v2). Read the file COPYING that comes with dlcz_sim
# 		for details.
#
#############################################################################

from dataclasses import dataclass, field, replace
from functools import lru_cache, partial

import numpy as np

from .errors import HeraldImpossibleError
from .messages import fatal, message, verbose
from .node import (
    HERALD_DETECTORS,
    HeraldedState,
    herald_branches,
    read,
    store,
    symmetric_write,
)
from .optics import CLICK_PATTERNS, DetectionEvent, click_pattern_probabilities
from .parallel import merge_counts, run_tiles_parallel
from .tiling import create_trial_tiles

BRANCHES = ("signal", "dark")
PATTERN_KEYS = tuple(f"{d3}{d4}" for d3, d4 in CLICK_PATTERNS)
OUTCOME_KEYS = ("none",) + tuple(
    f"{branch}_{key}" for branch in BRANCHES for key in PATTERN_KEYS
)


@dataclass(frozen=True)
class HeraldStage:
    """Split of the written state by the herald detector.

    signal: a Stokes photon reached the herald detector
    dark: no Stokes photon, but the detector fired a dark count
    """

    p_signal: float
    p_none: float
    dark_prob: float
    signal: HeraldedState = None
    none: HeraldedState = None

    @property
    def weights(self):
        return {"signal": self.p_signal, "dark": self.dark_prob * self.p_none}

    @property
    def herald_probability(self):
        return self.p_signal + self.dark_prob * self.p_none

    @property
    def dark_herald_fraction(self):
        total = self.herald_probability
        return self.weights["dark"] / total if total > 0 else 0.0


@lru_cache(maxsize=64)
def herald_stage(params, phi_s=0.0, detector="D1"):
    """Write both ensembles and split the result at the herald detector.

    Args:
        params (NoiseParams): the noise parameters
        phi_s (float): Stokes phase in rad
        detector (str): "D1" or "D2"
    Returns:
        (HeraldStage): branch weights and conditional spin-wave states

    """
    branches = herald_branches(symmetric_write(params, phi_s), params, detector)
    sign = HERALD_DETECTORS[detector]
    states = {}
    for flag, (probability, rho) in branches.items():
        states[flag] = (
            None
            if rho is None
            else HeraldedState(rho, sign, min(probability, 1.0))
        )
    stage = HeraldStage(
        p_signal=branches[True][0],
        p_none=branches[False][0],
        dark_prob=params.effective_dark_prob,
        signal=states[True],
        none=states[False],
    )
    if stage.herald_probability <= 0:
        fatal(
            f"Detector {detector} never clicks for the given parameters",
            HeraldImpossibleError,
        )
    verbose(
        f"Herald {detector}: p={stage.herald_probability:.4e}, "
        f"dark share {stage.dark_herald_fraction:.3e}",
    )
    return stage


@dataclass(frozen=True)
class PhaseResponse:
    """Click pattern probabilities as a trigonometric polynomial.

    A phase delta on the R anti-Stokes mode enters the state as
    exp(i delta (n - m)) with |n - m| <= n_max, so the probabilities are
    sum_j c_j exp(i j delta) with |j| <= n_max.
    """

    orders: np.ndarray
    coefficients: np.ndarray

    def _probabilities(self, values):
        values = np.clip(np.real(values), 0.0, None)
        return values / values.sum(axis=-1, keepdims=True)

    def evaluate(self, deltas):
        """Probabilities (n, 4) at the phases deltas."""
        deltas = np.atleast_1d(np.asarray(deltas, dtype=float))
        waves = np.exp(1j * np.outer(deltas, self.orders))
        return self._probabilities(waves @ self.coefficients)

    def average(self, characteristic):
        """Probabilities averaged with E[exp(i j delta)] per order."""
        return self._probabilities(np.asarray(characteristic) @ self.coefficients)

    def gaussian_average(self, sigma):
        return self.average(np.exp(-(self.orders**2) * sigma**2 / 2))

    def sample_average(self, deltas):
        deltas = np.asarray(deltas, dtype=float)
        return self.average(np.exp(1j * np.outer(deltas, self.orders)).mean(axis=0))


def phase_response(func, n_max):
    """Fourier coefficients of a phase dependent probability vector.

    Args:
        func (callable): delta -> probability vector
        n_max (int): highest order
    Returns:
        (PhaseResponse): exact representation of func

    """
    n_points = 2 * n_max + 1
    grid = 2 * np.pi * np.arange(n_points) / n_points
    values = np.array([np.asarray(func(delta), dtype=float) for delta in grid])
    coefficients = np.fft.fft(values, axis=0) / n_points
    orders = np.rint(np.fft.fftfreq(n_points, 1.0 / n_points)).astype(int)
    return PhaseResponse(orders=orders, coefficients=coefficients)


@lru_cache(maxsize=256)
def branch_responses(params, interferometer, detectors, storage_time, herald_detector="D1"):
    """PhaseResponse of the D3/D4 patterns for each herald branch.

    Args:
        params (NoiseParams): the noise parameters
        interferometer (InterferometerConfig): phases and analyzer
        detectors (tuple): DetectorModel of D3 and D4
        storage_time (float): storage time in ns
        herald_detector (str): "D1" or "D2"
    Returns:
        (dict): branch -> PhaseResponse (None if the branch is empty)

    """
    stage = herald_stage(params, interferometer.phi_s, herald_detector)
    responses = {}
    for branch, state in (("signal", stage.signal), ("dark", stage.none)):
        if state is None:
            responses[branch] = None
            continue
        stored = store(state, storage_time, params)

        def patterns(delta, stored=stored):
            rho_as = read(stored, params, interferometer.phi_as + delta)
            probabilities = click_pattern_probabilities(
                rho_as,
                interferometer,
                detectors,
                params.path_transmission,
            )
            return [probabilities[pattern] for pattern in CLICK_PATTERNS]

        responses[branch] = phase_response(patterns, params.n_max)
    return responses


def verify_detectors(config, params=None):
    """D3 and D4 of a config with efficiency and dark counts of params."""
    params = params or config.noise
    return tuple(
        replace(
            config.detector(detector_id),
            efficiency=params.eta_det,
            dark_prob=params.effective_dark_prob,
        )
        for detector_id in ("D3", "D4")
    )


@dataclass(frozen=True)
class TrialPlan:
    """Everything a worker needs to sample trials."""

    p_signal: float
    dark_prob: float
    responses: dict
    sigma: float
    phase_pool: np.ndarray = field(default=None, repr=False)
    herald_detector: object = None
    verify_detectors: tuple = ()
    write_time: float = 0.0
    read_time: float = 0.0
    max_records: int = 0

    def characteristic(self, orders):
        if self.phase_pool is not None:
            return np.exp(1j * np.outer(self.phase_pool, orders)).mean(axis=0)
        return np.exp(-(orders**2) * self.sigma**2 / 2)

    def draw_phases(self, rng, n_trials):
        if self.phase_pool is not None:
            return rng.choice(self.phase_pool, size=n_trials, replace=True)
        return rng.normal(0.0, self.sigma, n_trials)


def build_plan(
    config,
    params=None,
    interferometer=None,
    storage_time=None,
    phase_pool=None,
    stokes_delay=None,
):
    """Trial plan of a configuration with optional replacements.

    Args:
        config (ExperimentConfig): the configuration
        params (NoiseParams): replaces config.noise
        interferometer (InterferometerConfig): replaces config.interferometer
        storage_time (float): replaces the scheduled storage time
        phase_pool (numpy.ndarray): per-trial phases drawn instead of a
                                    Gaussian with sigma_phi
        stokes_delay (float): replaces the scheduled Stokes fibre delay
    Returns:
        (TrialPlan): the plan

    """
    params = params or config.noise
    interferometer = interferometer or config.interferometer
    storage_time = config.schedule.storage_time if storage_time is None else storage_time
    detectors = verify_detectors(config, params)
    stage = herald_stage(params, interferometer.phi_s, config.herald_detector)
    herald_detector = config.detector(config.herald_detector)
    if stokes_delay is not None:
        herald_detector = replace(
            herald_detector,
            delay=herald_detector.delay - config.schedule.stokes_delay + stokes_delay,
        )
    write_time = config.schedule.write_time
    return TrialPlan(
        p_signal=stage.p_signal,
        dark_prob=stage.dark_prob,
        responses=branch_responses(
            params,
            interferometer,
            detectors,
            float(storage_time),
            config.herald_detector,
        ),
        sigma=params.sigma_phi,
        phase_pool=phase_pool,
        herald_detector=herald_detector,
        verify_detectors=detectors,
        write_time=write_time,
        read_time=write_time + storage_time,
        max_records=config.run.max_records,
    )


def trial_outcome_probabilities(plan):
    """Exact probabilities of the nine trial outcomes.

    Returns:
        (dict): "none" and "<branch>_<D3><D4>" -> probability

    """
    weights = {"signal": plan.p_signal, "dark": plan.dark_prob * (1 - plan.p_signal)}
    probabilities = {}
    for branch in BRANCHES:
        response = plan.responses[branch]
        if response is None or weights[branch] <= 0:
            patterns = np.zeros(len(PATTERN_KEYS))
        else:
            patterns = response.average(plan.characteristic(response.orders))
        for key, value in zip(PATTERN_KEYS, patterns):
            probabilities[f"{branch}_{key}"] = weights[branch] * float(value)
    probabilities["none"] = max(0.0, 1.0 - sum(probabilities.values()))
    return {key: probabilities[key] for key in OUTCOME_KEYS}


@dataclass(frozen=True)
class TrialRecord:
    """One sampled trial with its time-tagged events."""

    trial_id: int
    branch: str
    phase: float
    pattern: tuple
    events: tuple = ()

    @property
    def heralded(self):
        return self.branch is not None


def _trial_events(plan, trial_id, pattern):
    herald = plan.herald_detector
    events = [
        DetectionEvent(
            herald.detector_id,
            plan.write_time + herald.delay,
            herald.position,
            trial_id,
            emission_time=plan.write_time,
        ),
    ]
    for flag, detector in zip(pattern, plan.verify_detectors):
        if flag:
            events.append(
                DetectionEvent(
                    detector.detector_id,
                    plan.read_time + detector.delay,
                    detector.position,
                    trial_id,
                    emission_time=plan.read_time,
                ),
            )
    return tuple(events)


def sample_tile(plan, tile):
    """Sample the trials of one tile.

    Returns:
        (tuple): counts dict and the TrialRecords of the trials with an id
                 below plan.max_records

    """
    rng = tile.rng()
    n_trials = tile.n_trials
    photon = rng.random(n_trials) < plan.p_signal
    dark = rng.random(n_trials) < plan.dark_prob
    branches = np.full(n_trials, None, dtype=object)
    branches[photon] = "signal"
    branches[~photon & dark] = "dark"
    deltas = np.zeros(n_trials)
    pattern_index = np.full(n_trials, -1)
    counts = {"trials": n_trials}
    for branch in BRANCHES:
        mask = branches == branch
        selected = int(mask.sum())
        bins = np.zeros(len(PATTERN_KEYS), dtype=int)
        if selected and plan.responses[branch] is not None:
            deltas[mask] = plan.draw_phases(rng, selected)
            probabilities = plan.responses[branch].evaluate(deltas[mask])
            cumulative = np.cumsum(probabilities, axis=1)
            drawn = np.minimum(
                (rng.random((selected, 1)) > cumulative).sum(axis=1),
                len(PATTERN_KEYS) - 1,
            )
            pattern_index[mask] = drawn
            bins = np.bincount(drawn, minlength=len(PATTERN_KEYS))
        for key, value in zip(PATTERN_KEYS, bins):
            counts[f"{branch}_{key}"] = int(value)
    records = []
    for offset in range(max(0, min(n_trials, plan.max_records - tile.start))):
        trial_id = tile.start + offset
        branch = branches[offset]
        if branch is None or pattern_index[offset] < 0:
            records.append(TrialRecord(trial_id, None, 0.0, (0, 0)))
            continue
        pattern = CLICK_PATTERNS[pattern_index[offset]]
        records.append(
            TrialRecord(
                trial_id,
                branch,
                float(deltas[offset]),
                pattern,
                _trial_events(plan, trial_id, pattern),
            ),
        )
    return counts, records


def _expected_counts(plan, n_trials):
    probabilities = trial_outcome_probabilities(plan)
    counts = {key: n_trials * value for key, value in probabilities.items() if key != "none"}
    counts["trials"] = n_trials
    return counts


def _multinomial_counts(plan, n_trials, seed):
    probabilities = trial_outcome_probabilities(plan)
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(2**31 - 1,)))
    pvals = np.array([probabilities[key] for key in OUTCOME_KEYS])
    draws = rng.multinomial(n_trials, pvals / pvals.sum())
    counts = {key: int(value) for key, value in zip(OUTCOME_KEYS, draws) if key != "none"}
    counts["trials"] = n_trials
    return counts


def simulate_counts(
    plan,
    n_trials,
    engine="sampling",
    seed=1,
    tile_size=250000,
    nprocs=1,
    assist_threshold=0,
):
    """Outcome counts of n_trials write/read trials.

    The exact engine returns expected counts. The sampling engine samples
    every trial in seeded tiles; above assist_threshold trials only the
    recorded trials are sampled one by one and the rest is drawn from the
    exact multinomial outcome distribution.

    Args:
        plan (TrialPlan): the trial plan
        n_trials (int): number of trials
        engine (str): "exact" or "sampling"
        seed (int|list): master seed
        tile_size (int): trials per tile
        nprocs (int): number of processes
        assist_threshold (int): trial number above which the multinomial
                                draw is used, 0 to never use it
    Returns:
        (tuple): counts dict and list of TrialRecords

    """
    n_trials = int(n_trials)
    if engine == "exact":
        return _expected_counts(plan, n_trials), []
    if assist_threshold and n_trials > assist_threshold:
        verbose(f"Drawing {n_trials} trials from the outcome distribution")
        explicit = min(plan.max_records, n_trials)
        counts, records = {}, []
        if explicit:
            counts, records = sample_tile(plan, create_trial_tiles(explicit, explicit, seed)[0])
        rest = _multinomial_counts(plan, n_trials - explicit, seed)
        return merge_counts([counts, rest]), records
    tiles = create_trial_tiles(n_trials, tile_size, seed)
    results = run_tiles_parallel(partial(sample_tile, plan), tiles, nprocs)
    records = [record for _, tile_records in results for record in tile_records]
    message(f"Sampled {n_trials} trials")
    return merge_counts(counts for counts, _ in results), records


def summarize_counts(counts, include_dark=True):
    """Heralded click counts of a counts dict.

    Args:
        counts (dict): output of simulate_counts
        include_dark (bool): count dark-count heralds too
    Returns:
        (dict): trials, heralds, n00, n10, n01, n11 and dark_heralds

    """
    branches = BRANCHES if include_dark else ("signal",)
    summary = {
        f"n{key}": sum(counts.get(f"{branch}_{key}", 0) for branch in branches)
        for key in PATTERN_KEYS
    }
    summary["heralds"] = sum(summary.values())
    summary["trials"] = counts.get("trials", 0)
    summary["dark_heralds"] = sum(counts.get(f"dark_{key}", 0) for key in PATTERN_KEYS)
    return summary
