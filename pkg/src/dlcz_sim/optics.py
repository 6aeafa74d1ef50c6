#!/usr/bin/env python3

############################################################################
#
# MODULE:       lib with the measurement optics of dlcz_sim
#
# AUTHOR(S):    dlcz_sim developers
#
# PURPOSE:      wave plates, Pancharatnam-Berry phase shifter, analyzer,
#               detector models, click sampling and AOM time routing
#
# COPYRIGHT:	(C) 2026 by the dlcz_sim developers
#
# 		This program is free software under the GNU General Public
# 		License (>=v2). Read the file COPYING that comes with dlcz_sim
# 		for details.
#
#############################################################################

from collections.abc import Mapping
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np
from numpy.polynomial.hermite_e import hermegauss

from .errors import DomainError, ValidationError
from .fock import (
    AS_L,
    AS_R,
    as_density,
    linear_optics_unitary,
    local_operator,
    loss_channel,
    outcome_probabilities,
    apply_unitary,
)
from .messages import fatal, verbose, warning
from .validation import check_positive, check_probability

ELEMENT_KINDS = ("hwp", "qwp", "phase")
DETECTOR_IDS = ("D1", "D2", "D3", "D4")
INTERFERENCE_ANALYZER = np.pi / 8
MODE_ANALYZER = 0.0
CLICK_PATTERNS = ((0, 0), (1, 0), (0, 1), (1, 1))


def rotation(angle):
    return np.array(
        [[np.cos(angle), np.sin(angle)], [-np.sin(angle), np.cos(angle)]],
    )


def retarder_jones(retardance, angle):
    """Jones matrix of a linear retarder with its fast axis at angle."""
    core = np.diag([1.0, np.exp(1j * retardance)])
    return rotation(-angle) @ core @ rotation(angle)


def half_wave_plate(angle):
    """[[cos 2a, sin 2a], [sin 2a, -cos 2a]]"""
    return retarder_jones(np.pi, angle)


def quarter_wave_plate(angle):
    return retarder_jones(np.pi / 2, angle)


def phase_shifter(phi):
    return np.diag([1.0, np.exp(1j * phi)])


def pb_phase_unitary(phi):
    """Pancharatnam-Berry phase shifter QWP(45) HWP(theta) QWP(45).

    The sequence equals i * diag(exp(-2i theta), -exp(2i theta)), so the
    half-wave plate angle theta = (phi - pi) / 4 gives the relative phase
    phi between V and H.

    Args:
        phi (float): relative phase in radians
    Returns:
        (numpy.ndarray): 2x2 Jones matrix on {H, V}

    """
    quarter = quarter_wave_plate(np.pi / 4)
    return quarter @ half_wave_plate((phi - np.pi) / 4) @ quarter


@dataclass(frozen=True)
class WavePlate:
    """One element of an interferometer arm."""

    kind: str
    angle: float

    def __post_init__(self):
        if self.kind not in ELEMENT_KINDS:
            fatal(
                f"Unknown optical element <{self.kind}>, use one of "
                f"{ELEMENT_KINDS}",
                ValidationError,
            )
        if not np.isfinite(self.angle):
            fatal(f"Angle of <{self.kind}> is not finite", ValidationError)

    def jones(self):
        if self.kind == "hwp":
            return half_wave_plate(self.angle)
        if self.kind == "qwp":
            return quarter_wave_plate(self.angle)
        return phase_shifter(self.angle)


@dataclass(frozen=True)
class InterferometerConfig:
    """Phases and elements of the verifying interferometer.

    phi_s and phi_as are imprinted on the states by the write and read
    steps; the optics only add pb_phase (or the explicit element list)
    and the analyzer half-wave plate in front of the D3/D4 polarizing
    beam splitter.
    """

    phi_s: float = 0.0
    phi_as: float = 0.0
    pb_phase: float = 0.0
    elements: tuple = ()
    analyzer_angle: float = INTERFERENCE_ANALYZER

    def __post_init__(self):
        for name in ("phi_s", "phi_as", "pb_phase", "analyzer_angle"):
            if not np.isfinite(getattr(self, name)):
                fatal(f"<{name}> is not finite", ValidationError)
        elements = tuple(
            el if isinstance(el, WavePlate) else WavePlate(*el)
            for el in self.elements
        )
        object.__setattr__(self, "elements", elements)

    @property
    def total_phase(self):
        return self.phi_s + self.phi_as + self.pb_phase

    def with_pb_phase(self, pb_phase):
        return replace(self, pb_phase=float(pb_phase))

    def phase_transfer(self):
        """Jones matrix of the phase section, elements applied in order."""
        if not self.elements:
            return pb_phase_unitary(self.pb_phase)
        transfer = np.eye(2, dtype=complex)
        for element in self.elements:
            transfer = element.jones() @ transfer
        return transfer

    def transfer(self):
        return half_wave_plate(self.analyzer_angle) @ self.phase_transfer()


@dataclass(frozen=True)
class DetectorModel:
    """Single-photon avalanche photodiode.

    Args:
        detector_id (str): D1..D4
        efficiency (float): detection efficiency
        dark_prob (float): dark-count probability per gate
        position (float): lab coordinate in m
        gate_width (float): gate window in ns
        delay (float): time from photon emission to the time tag in ns

    """

    detector_id: str
    efficiency: float = 1.0
    dark_prob: float = 0.0
    position: float = 0.0
    gate_width: float = 100.0
    delay: float = 0.0

    def __post_init__(self):
        if self.detector_id not in DETECTOR_IDS:
            fatal(f"Unknown detector <{self.detector_id}>", ValidationError)
        check_probability(f"{self.detector_id}.efficiency", self.efficiency)
        check_probability(f"{self.detector_id}.dark_prob", self.dark_prob)
        check_positive(f"{self.detector_id}.gate_width", self.gate_width)
        check_positive(f"{self.detector_id}.delay", self.delay, strict=False)


@dataclass(frozen=True)
class DetectionEvent:
    """A time-tagged click.

    emission_time is the time the photon left the cell (used for AOM
    routing); time is the detector's time tag.
    """

    detector_id: str
    time: float
    position: float
    trial_id: int
    emission_time: float = None

    def __post_init__(self):
        if not self.time >= 0:
            fatal(f"Detection time must be >= 0, got {self.time}", ValidationError)
        if self.emission_time is None:
            object.__setattr__(self, "emission_time", self.time)


def _no_click_operator(levels, dark_prob):
    op = np.zeros((levels, levels))
    op[0, 0] = 1.0 - dark_prob
    return op


@lru_cache(maxsize=1)
def log_fringe_convention():
    """Log the D3/D4 sign convention once per process."""
    verbose("Fringes use the complementary pair N_+/- ~ 1 +/- V cos(phase) for D3/D4")


def click_pattern_probabilities(rho_as, config, detectors=None, transmission=1.0):
    """Probabilities of the four D3/D4 click patterns.

    D3 sits behind the H output of the analyzer, D4 behind the V output.
    A detector clicks on any photon that survives the path transmission
    and its efficiency, or on a dark count.

    Args:
        rho_as (DensityOperator): state of the AS_L/AS_R modes
        config (InterferometerConfig): phases and analyzer
        detectors (tuple): DetectorModel of D3 and D4, ideal if None
        transmission (float): common path transmission
    Returns:
        (dict): pattern (click D3, click D4) -> probability

    """
    log_fringe_convention()
    rho = as_density(rho_as)
    transmission = check_probability("transmission", transmission)
    if detectors is None:
        detectors = (DetectorModel("D3"), DetectorModel("D4"))
    n_max = rho.register.n_max
    rho = apply_unitary(rho, linear_optics_unitary(config.transfer(), n_max), [AS_L, AS_R])
    for mode, detector in zip((AS_L, AS_R), detectors):
        rho = loss_channel(rho, mode, transmission * detector.efficiency)
    levels = rho.register.levels
    no_clicks = [_no_click_operator(levels, det.dark_prob) for det in detectors]
    clicks = [np.eye(levels) - op for op in no_clicks]
    projectors = []
    for pattern in CLICK_PATTERNS:
        factors = [
            clicks[num] if flag else no_clicks[num] for num, flag in enumerate(pattern)
        ]
        projectors.append(
            local_operator(rho.register, np.kron(factors[0], factors[1]), [AS_L, AS_R]),
        )
    probabilities = outcome_probabilities(rho, projectors)
    return dict(zip(CLICK_PATTERNS, probabilities))


def detect_fringe_probabilities(rho_as, config, detectors=None, transmission=1.0):
    """Exclusive click probabilities of D3 and D4.

    Returns:
        (tuple): (P_D3 only, P_D4 only, P_noclick) where P_noclick covers
                 every other pattern, double clicks included

    """
    patterns = click_pattern_probabilities(rho_as, config, detectors, transmission)
    return (
        patterns[(1, 0)],
        patterns[(0, 1)],
        patterns[(0, 0)] + patterns[(1, 1)],
    )


def jitter_average(func, sigma, order=48):
    """Average func(delta) over a Gaussian phase delta ~ N(0, sigma^2).

    Uses Gauss-Hermite quadrature (probabilists' weight).
    """
    sigma = check_positive("sigma", sigma, strict=False)
    if sigma == 0:
        return np.asarray(func(0.0), dtype=float)
    nodes, weights = hermegauss(order)
    weights = weights / np.sqrt(2 * np.pi)
    return sum(
        weight * np.asarray(func(sigma * node), dtype=float)
        for node, weight in zip(nodes, weights)
    )


def jittered_fringe_probabilities(
    rho_as,
    config,
    sigma,
    detectors=None,
    transmission=1.0,
):
    """detect_fringe_probabilities averaged over Gaussian phase jitter."""
    return tuple(
        jitter_average(
            lambda delta: detect_fringe_probabilities(
                rho_as,
                config.with_pb_phase(config.pb_phase + delta),
                detectors,
                transmission,
            ),
            sigma,
        ),
    )


def conditional_visibility(p_plus, p_minus):
    """(N_max - N_min)/(N_max + N_min) of a conditional D3/D4 pair."""
    total = p_plus + p_minus
    if total <= 0:
        return 0.0
    return abs(p_plus - p_minus) / total


def sample_clicks(probabilities, detectors, rng, gate_time, trial_id=0):
    """Sample the clicks of one detection gate.

    Args:
        probabilities (list|dict): exclusive signal click probability per
                                   detector (the rest is "no signal"), or
                                   a mapping click pattern -> probability
        detectors (list): DetectorModel per position of the pattern
        rng (numpy.random.Generator): random generator of the trial
        gate_time (float): photon emission time of the gate in ns
        trial_id (int): id of the trial
    Returns:
        (list): DetectionEvent objects, dark counts included

    """
    detectors = list(detectors)
    if isinstance(probabilities, Mapping):
        patterns = [tuple(pattern) for pattern in probabilities]
        weights = np.array(list(probabilities.values()), dtype=float)
    else:
        singles = np.asarray(probabilities, dtype=float)
        patterns = [
            tuple(int(i == num) for i in range(len(detectors)))
            for num in range(len(singles))
        ]
        patterns.append(tuple(0 for _ in detectors))
        weights = np.append(singles, 1.0 - singles.sum())
    if np.any(weights < -1e-12) or abs(weights.sum() - 1.0) > 1e-9:
        fatal(f"Invalid click probabilities {weights}", DomainError)
    weights = np.clip(weights, 0.0, None)
    pattern = patterns[rng.choice(len(patterns), p=weights / weights.sum())]
    events = []
    for flag, detector in zip(pattern, detectors):
        dark = detector.dark_prob > 0 and rng.random() < detector.dark_prob
        if flag or dark:
            events.append(
                DetectionEvent(
                    detector.detector_id,
                    gate_time + detector.delay,
                    detector.position,
                    trial_id,
                    emission_time=gate_time,
                ),
            )
    return events


@dataclass(frozen=True)
class TimeWindow:
    stream: str
    start: float
    end: float

    def __post_init__(self):
        if not self.end >= self.start:
            fatal(
                f"Window <{self.stream}> ends before it starts "
                f"({self.start} > {self.end})",
                ValidationError,
            )


@dataclass(frozen=True)
class AomSchedule:
    """Time windows in which the AOM sends photons to a stream.

    Windows are closed intervals; neighbours may touch but not overlap.
    """

    windows: tuple

    def __post_init__(self):
        windows = tuple(
            sorted(
                (w if isinstance(w, TimeWindow) else TimeWindow(*w) for w in self.windows),
                key=lambda w: w.start,
            ),
        )
        for first, second in zip(windows, windows[1:]):
            if second.start < first.end:
                fatal(
                    f"AOM windows <{first.stream}> and <{second.stream}> overlap",
                    ValidationError,
                )
        object.__setattr__(self, "windows", windows)

    @classmethod
    def for_trial(cls, write_time, storage_time, aom_width):
        """Heralding window around the write pulse, verifying around the read."""
        half = aom_width / 2.0
        read_time = write_time + storage_time
        return cls(
            (
                TimeWindow("heralding", write_time - half, write_time + half),
                TimeWindow("verifying", read_time - half, read_time + half),
            ),
        )

    def window_of(self, time):
        """First window containing time (a shared boundary goes to the earlier)."""
        for window in self.windows:
            if window.start <= time <= window.end:
                return window
        return None


@dataclass
class RoutedEvents:
    heralding: list = field(default_factory=list)
    verifying: list = field(default_factory=list)
    dropped: list = field(default_factory=list)


def _event_key(event):
    return (event.time, event.trial_id, event.detector_id, event.emission_time, event.position)


def route_by_time(events, schedule):
    """Assign time-tagged events to the heralding or verifying stream.

    Routing uses the emission time. Events outside all windows are dropped
    and the drop reasons are logged.

    Args:
        events (list): DetectionEvent objects in any order
        schedule (AomSchedule): the AOM windows
    Returns:
        (RoutedEvents): sorted streams and the dropped events

    """
    routed = RoutedEvents()
    reasons = {}
    for event in sorted(events, key=_event_key):
        window = schedule.window_of(event.emission_time)
        if window is None:
            reason = "outside all AOM windows"
        elif window.stream not in ("heralding", "verifying"):
            reason = f"unknown stream <{window.stream}>"
        else:
            getattr(routed, window.stream).append(event)
            continue
        routed.dropped.append((event, reason))
        reasons[reason] = reasons.get(reason, 0) + 1
    for reason, num in sorted(reasons.items()):
        warning(f"Dropped {num} event(s): {reason}")
    return routed
