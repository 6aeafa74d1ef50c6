#!/usr/bin/env python3

############################################################################
#
# MODULE:       lib with the configuration handling of dlcz_sim
#
# AUTHOR(S):    dlcz_sim developers
#
# PURPOSE:      default configuration, JSON loading with field and line
#               diagnostics, overrides and the typed experiment config
#
# COPYRIGHT:	(C) 2026 by the dlcz_sim developers
#
# 		This program is free software under the GNU General Public
# 		License (>=v2). Read the file COPYING that comes with dlcz_sim
# 		for details.
#
#############################################################################

import copy
import json
import re
from dataclasses import dataclass, field, replace
from functools import partial

import numpy as np

from .errors import ConfigError, DlczSimError
from .general import set_nprocs
from .messages import verbose
from .node import NoiseParams
from .optics import DetectorModel, InterferometerConfig
from .phase_lock import Controller, DriftModel
from .validation import check_positive

ENGINES = ("exact", "sampling")
PHASE_SOURCES = ("gaussian", "trajectory")
FREE_PARAMETERS = ("chi", "eta_product", "dark_prob", "sigma_phi", "tau_mem")

DEFAULT_CONFIG = {
    "noise": {
        "chi": 0.01,
        "eta_ret": 0.05,
        "eta_trans": 0.35,
        "eta_det": 0.45,
        "dark_prob": 1e-6,
        "sigma_phi": 0.517,
        "tau_mem": 100000.0,
        "tau_amp": None,
        "n_max": 2,
        "fp_transmission": 0.92,
        "cavities_per_path": 2,
        "fp_extinction": 500.0,
        "leakage_prob": 0.0,
    },
    "interferometer": {
        "phi_s": 0.0,
        "phi_as": 0.0,
        "pb_phase": 0.0,
        "analyzer_angle": float(np.pi / 8),
        "herald_detector": "D1",
        "elements": [],
    },
    "detectors": {
        "D1": {"position": None, "delay": 0.0, "gate_width": 100.0},
        "D2": {"position": None, "delay": 0.0, "gate_width": 100.0},
        "D3": {"position": None, "delay": 0.0, "gate_width": 100.0},
        "D4": {"position": None, "delay": 0.0, "gate_width": 100.0},
    },
    "schedule": {
        "pump_duration": 2000.0,
        "control_pulse": 2.0,
        "storage_time": 100.0,
        "stokes_delay": 0.0,
        "aom_width": 100.0,
    },
    "geometry": {
        "cell_separation": 0.30,
        "herald_station": 0.0,
        "verify_station": 0.30,
    },
    "phase_lock": {
        "drift": {
            "kappa": 0.0,
            "sigma_w": 0.3,
            "v_drift": 0.5,
            "dt": 1e-3,
            "phi0": 0.0,
        },
        "controller": {
            "k_i": 50.0,
            "update_period": 1e-3,
            "actuator_range": 50.0,
            "setpoint": float(np.pi / 2),
            "k_p": 0.0,
            "lock_threshold": 0.52,
            "shot_noise": 0.0,
            "settle_tolerance": 0.1,
        },
        "duration": 20.0,
        "gains": [2.0, 5.0, 20.0, 50.0, 200.0],
    },
    "experiment": {
        "trials": 100000000,
        "mode_trials": 35000000000,
        "seed": 1,
        "engine": "sampling",
        "tile_size": 250000,
        "nprocs": 1,
        "phases": 16,
        "delays": [100.0, 130.0, 160.0, 190.0, 220.0],
        "delay_stokes_delay": 160.0,
        "tomo_samples": 1000000,
        "chsh_samples": 11000,
        "bootstrap": 1000,
        "tomo_bootstrap": 0,
        "phase_source": "gaussian",
        "max_records": 1000,
        "assist_threshold": 2000000,
        "white_noise": 0.0,
        "simultaneity_tolerance": 2.0,
    },
    "calibration": {
        "targets": {"p01": 3.1e-3, "p10": 3.5e-3, "p11": 5.5e-7, "V": 0.875},
        "free": ["chi", "eta_product", "dark_prob", "sigma_phi"],
        "tolerance": 1e-6,
    },
}

# keys whose value is a free-form mapping or list
_OPEN_KEYS = {"calibration.targets", "interferometer.elements"}
_NULLABLE_KEYS = {"tau_mem", "tau_amp", "position"}


@dataclass(frozen=True)
class Schedule:
    """Time sequence of one trial in ns.

    The write pulse follows the optical pumping, the read pulse follows
    after the storage time. stokes_delay is the extra fibre delay of the
    Stokes photons before D1/D2.
    """

    pump_duration: float = 2000.0
    control_pulse: float = 2.0
    storage_time: float = 100.0
    stokes_delay: float = 0.0
    aom_width: float = 100.0

    def __post_init__(self):
        check_positive("pump_duration", self.pump_duration)
        check_positive("control_pulse", self.control_pulse)
        check_positive("storage_time", self.storage_time, strict=False)
        check_positive("stokes_delay", self.stokes_delay, strict=False)
        check_positive("aom_width", self.aom_width)

    @property
    def write_time(self):
        return self.pump_duration

    @property
    def read_time(self):
        return self.write_time + self.storage_time


@dataclass(frozen=True)
class Geometry:
    """1-D lab coordinates in m."""

    cell_separation: float = 0.30
    herald_station: float = 0.0
    verify_station: float = 0.30

    def __post_init__(self):
        check_positive("cell_separation", self.cell_separation, strict=False)


@dataclass(frozen=True)
class ExperimentSettings:
    trials: int = 100000000
    mode_trials: int = 35000000000
    seed: int = 1
    engine: str = "sampling"
    tile_size: int = 250000
    nprocs: int = 1
    phases: int = 16
    delays: tuple = (100.0, 130.0, 160.0, 190.0, 220.0)
    delay_stokes_delay: float = 160.0
    tomo_samples: int = 1000000
    chsh_samples: int = 11000
    bootstrap: int = 1000
    tomo_bootstrap: int = 0
    phase_source: str = "gaussian"
    max_records: int = 1000
    assist_threshold: int = 2000000
    white_noise: float = 0.0
    simultaneity_tolerance: float = 2.0

    def __post_init__(self):
        object.__setattr__(self, "delays", tuple(float(d) for d in self.delays))
        for name in ("trials", "mode_trials", "tile_size", "phases", "tomo_samples", "chsh_samples"):
            check_positive(name, getattr(self, name))
        for name in ("bootstrap", "tomo_bootstrap", "max_records", "assist_threshold"):
            check_positive(name, getattr(self, name), strict=False)
        # JSON numbers such as 1e6 arrive as float
        for name in (
            "trials", "mode_trials", "seed", "tile_size", "nprocs", "phases", "tomo_samples",
            "chsh_samples", "bootstrap", "tomo_bootstrap", "max_records", "assist_threshold",
        ):  # fmt: skip
            object.__setattr__(self, name, int(getattr(self, name)))
        if any(delay < 0 for delay in self.delays):
            raise ConfigError("Delays must be >= 0", field="experiment.delays")
        if self.engine not in ENGINES:
            raise ConfigError(f"Unknown engine <{self.engine}>", field="experiment.engine")
        if self.phase_source not in PHASE_SOURCES:
            raise ConfigError(
                f"Unknown phase source <{self.phase_source}>",
                field="experiment.phase_source",
            )


@dataclass(frozen=True)
class ExperimentConfig:
    noise: NoiseParams
    interferometer: InterferometerConfig
    herald_detector: str
    detectors: dict
    schedule: Schedule
    geometry: Geometry
    drift: DriftModel
    controller: Controller
    lock_duration: float
    lock_gains: tuple
    run: ExperimentSettings
    calibration: dict
    raw: dict = field(repr=False, default_factory=dict)

    def as_dict(self):
        return copy.deepcopy(self.raw)

    def detector(self, detector_id):
        return self.detectors[detector_id]

    def with_overrides(self, overrides):
        """New config with dotted-path overrides, e.g. {"noise.chi": 0.02}."""
        return build_config(apply_overrides(self.raw, overrides))


def _line_of(text, path):
    """Line of the last key of a dotted path in a JSON text."""
    if not text or not path:
        return None
    position = 0
    for part in path.split("."):
        found = text.find(f'"{part}"', position)
        if found < 0:
            return None
        position = found
    return text.count("\n", 0, position) + 1


def _check_types(data, default, path, text):
    """Reject unknown keys and wrong value types."""
    if not isinstance(data, dict):
        raise ConfigError(
            f"Expected an object, got {type(data).__name__}",
            field=path or "<root>",
            line=_line_of(text, path),
        )
    for key, value in data.items():
        key_path = f"{path}.{key}" if path else key
        if key not in default:
            raise ConfigError(
                f"Unknown key <{key}>",
                field=key_path,
                line=_line_of(text, key_path),
            )
        reference = default[key]
        if key_path in _OPEN_KEYS:
            continue
        if isinstance(reference, dict):
            _check_types(value, reference, key_path, text)
            continue
        number = isinstance(value, (int, float)) and not isinstance(value, bool)
        if value is None or reference is None:
            valid = number or (value is None and key in _NULLABLE_KEYS)
        elif isinstance(reference, bool):
            valid = isinstance(value, bool)
        elif isinstance(reference, int):
            valid = number and float(value).is_integer()
        elif isinstance(reference, float):
            valid = number
        elif isinstance(reference, list):
            valid = isinstance(value, list)
        else:
            valid = isinstance(value, type(reference))
        if not valid:
            raise ConfigError(
                f"Wrong type {type(value).__name__}, expected "
                f"{type(reference).__name__}",
                field=key_path,
                line=_line_of(text, key_path),
            )


def _merge(default, data):
    merged = copy.deepcopy(default)
    for key, value in data.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict) and key != "targets":
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def apply_overrides(raw, overrides):
    """Apply {"section.key": value} overrides to a raw config dict."""
    raw = copy.deepcopy(raw)
    for path, value in (overrides or {}).items():
        if value is None:
            continue
        node = raw
        parts = path.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
        node[parts[-1]] = value
    return raw


def _section(build, section, text):
    """Build one typed section, mapping value errors to ConfigError."""
    try:
        return build()
    except ConfigError as error:
        if error.line is None and error.field:
            raise ConfigError(
                str(error).split(" [field:")[0],
                field=error.field,
                line=_line_of(text, error.field),
            ) from error
        raise
    except (DlczSimError, TypeError, ValueError) as error:
        match = re.search(r"<([\w.]+)>", str(error))
        field_path = f"{section}.{match.group(1)}" if match else section
        raise ConfigError(str(error), field=field_path, line=_line_of(text, field_path)) from error


def build_config(raw, text=None):
    """Validate a raw config dict (defaults merged) and build the typed config."""
    _check_types(raw, DEFAULT_CONFIG, "", text)
    raw = _merge(DEFAULT_CONFIG, raw)

    noise_raw = dict(raw["noise"])
    for key in ("tau_mem", "tau_amp"):
        if noise_raw[key] is None:
            noise_raw[key] = np.inf
    noise = _section(lambda: NoiseParams(**noise_raw), "noise", text)

    interferometer_raw = dict(raw["interferometer"])
    herald_detector = interferometer_raw.pop("herald_detector")
    if herald_detector not in ("D1", "D2"):
        raise ConfigError(
            f"Herald detector must be D1 or D2, got <{herald_detector}>",
            field="interferometer.herald_detector",
            line=_line_of(text, "interferometer.herald_detector"),
        )
    interferometer_raw["elements"] = tuple(tuple(el) for el in interferometer_raw["elements"])
    interferometer = _section(
        lambda: InterferometerConfig(**interferometer_raw),
        "interferometer",
        text,
    )
    schedule = _section(lambda: Schedule(**raw["schedule"]), "schedule", text)
    geometry = _section(lambda: Geometry(**raw["geometry"]), "geometry", text)

    detectors = {}
    for detector_id, values in raw["detectors"].items():
        station = geometry.herald_station if detector_id in ("D1", "D2") else geometry.verify_station
        position = station if values["position"] is None else values["position"]
        delay = values["delay"] + (schedule.stokes_delay if detector_id in ("D1", "D2") else 0.0)
        detectors[detector_id] = _section(
            partial(
                DetectorModel,
                detector_id,
                efficiency=noise.eta_det,
                dark_prob=noise.effective_dark_prob,
                position=position,
                gate_width=values["gate_width"],
                delay=delay,
            ),
            f"detectors.{detector_id}",
            text,
        )

    lock_raw = raw["phase_lock"]
    drift = _section(lambda: DriftModel(**lock_raw["drift"]), "phase_lock.drift", text)
    controller = _section(
        lambda: Controller(**lock_raw["controller"]),
        "phase_lock.controller",
        text,
    )
    run = _section(lambda: ExperimentSettings(**raw["experiment"]), "experiment", text)
    nprocs = _section(lambda: set_nprocs(run.nprocs), "experiment", text)
    run = replace(run, nprocs=nprocs)

    calibration = raw["calibration"]
    unknown = [name for name in calibration["free"] if name not in FREE_PARAMETERS]
    if unknown:
        raise ConfigError(
            f"Unknown free parameter(s) {unknown}, use {FREE_PARAMETERS}",
            field="calibration.free",
            line=_line_of(text, "calibration.free"),
        )
    for name, value in calibration["targets"].items():
        if name not in ("p01", "p10", "p11", "V") or not isinstance(value, (int, float)):
            raise ConfigError(
                f"Invalid calibration target <{name}>",
                field=f"calibration.targets.{name}",
                line=_line_of(text, f"calibration.targets.{name}"),
            )
    return ExperimentConfig(
        noise=noise,
        interferometer=interferometer,
        herald_detector=herald_detector,
        detectors=detectors,
        schedule=schedule,
        geometry=geometry,
        drift=drift,
        controller=controller,
        lock_duration=float(lock_raw["duration"]),
        lock_gains=tuple(float(g) for g in lock_raw["gains"]),
        run=run,
        calibration=calibration,
        raw=raw,
    )


def load_config(path=None, overrides=None):
    """Load a JSON configuration file.

    Args:
        path (str): JSON file, the defaults are used if None
        overrides (dict): dotted-path overrides, e.g. from the CLI
    Returns:
        (ExperimentConfig): the validated configuration

    """
    text = None
    raw = {}
    if path:
        try:
            with open(path, encoding="utf-8") as config_file:
                text = config_file.read()
        except OSError as error:
            raise ConfigError(f"Cannot read config file {path}: {error}") from error
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as error:
            raise ConfigError(
                f"Invalid JSON: {error.msg} (column {error.colno})",
                field="<json>",
                line=error.lineno,
            ) from error
        verbose(f"Loaded configuration {path}")
    return build_config(apply_overrides(raw, overrides), text)
