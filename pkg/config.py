"""
Configuration settings for the E-TRoll rolling-gripper simulator.

Module-level constants are the defaults. A YAML run-config file can
override any of them section by section (see load_settings).
"""

import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Tuple

import yaml

from errors import ConfigError


# Environment variable holding the default run-config path
CONFIG_ENV_VAR = "ETROLL_CONFIG"

# Gripper geometry (mm)
FINGER_LENGTH_MM = 132.0
PALM_MIN_MM = 50.0
PALM_MAX_MM = 150.0
# Joint axis to contact surface; the sensing (left) finger carries the pad and array.
# Their sum fits the 68.5 mm perpendicular palm around the 30 mm cylinder.
LEFT_SURFACE_OFFSET_MM = 33.25
RIGHT_SURFACE_OFFSET_MM = 5.25
OBJECT_INNER_DIAMETER_MM = 30.0
OBJECT_HEIGHT_MM = 50.0
L_MID_MM = 85.0
FIXED_PALM_WIDTH_MM = 68.5

# Solver tolerances
CONTACT_TOLERANCE_MM = 1e-9
PENETRATION_TOLERANCE_MM = 1e-6
CONTACT_LOSS_TOLERANCE_MM = 1e-6
ORIENTATION_TOLERANCE_RAD = 1e-10
FACE_ANGLE_TOLERANCE_RAD = 1e-9
MAX_STEP_RAD = 0.01
MAX_STEP_ATTEMPTS = 4
DEGENERATE_START_SHIFT_MM = 1e-7

# Palm controller
CONTROLLER_GAIN = 0.8
CONTROLLER_RATE_LIMIT_MM = 2.0  # per control tick
SINGULAR_ANGLE_GUARD_RAD = 0.05
CONTROLLER_REVERSAL_STEP_MM = 0.09  # largest step against the last large one
CONTROLLER_REVERSAL_TICKS = 10

# Sensor array
PHYSICAL_SENSOR_COUNT = 12
ACTIVE_SENSORS = (1, 11)  # slice of physical cells in use
SENSOR_PITCH_MM = 8.0
HOLE_OFFSET_MM = 1.5
FOOTPRINT_SIGMA_MM = 3.0
FOOTPRINT_TRUNCATION = 3.0  # kernel support in sigmas
SENSITIVITY_UNITS_PER_N = 0.06
NOISE_SIGMA = 0.01
SATURATION = 1.0
RAW_GAIN_SPREAD = 0.15
RAW_OFFSET_SPREAD = 0.02
CALIBRATION_MASSES_G = (7.75, 19.04, 29.70)
CALIBRATION_SAMPLES = 900  # 20 s hold per weight
GRAVITY = 9.81

# Predefined rolling procedure
SAMPLE_RATE_HZ = 45.0
FINGER_SPEED_DEG_S = 6.0
PULL_ROTATION_DEG = 44.0
SWAP_DWELL_S = 0.2
START_HOLD_S = 1.8
END_HOLD_S = 1.8
PUSH_TORQUE_NM = 0.85
INITIAL_OFFSET_RANGE_MM = 10.0
PLACEMENT_ATTEMPTS = 8  # re-seats after a contact leaves a finger
SENSING_FINGER = "left"
FIG2_SETTLE_TICKS = 200

# Feature extraction
SMOOTHING_WINDOW = 20
PEAK_THRESHOLD_UNITS = 0.05
PEAK_THRESHOLD_FRACTION = 0.2
PEAKS_PER_CHANNEL = 2

# Classification
PCA_VARIANCE = 0.95
ENSEMBLE_LEARNERS = 30
ENSEMBLE_NEIGHBORS = 1
PLAIN_KNN_NEIGHBORS = 10  # the "medium" KNN preset of desktop classification tools
CV_FOLDS = 3
DEFAULT_SEED = 0

# Dataset defaults
SHAPES = ("circle", "hexagon", "square")
RUNS_PER_OBJECT = 30
SCHEMA_VERSION = 1


@dataclass(frozen=True)
class GripperSettings:
    finger_length: float = FINGER_LENGTH_MM
    palm_min: float = PALM_MIN_MM
    palm_max: float = PALM_MAX_MM
    left_offset: float = LEFT_SURFACE_OFFSET_MM
    right_offset: float = RIGHT_SURFACE_OFFSET_MM
    l_mid: float = L_MID_MM
    object_diameter: float = OBJECT_INNER_DIAMETER_MM
    fixed_palm_width: float = FIXED_PALM_WIDTH_MM


@dataclass(frozen=True)
class ControllerSettings:
    gain: float = CONTROLLER_GAIN
    rate_limit: float = CONTROLLER_RATE_LIMIT_MM
    angle_guard: float = SINGULAR_ANGLE_GUARD_RAD
    reversal_step: float = CONTROLLER_REVERSAL_STEP_MM
    reversal_ticks: int = CONTROLLER_REVERSAL_TICKS


@dataclass(frozen=True)
class SensorSettings:
    physical_count: int = PHYSICAL_SENSOR_COUNT
    active: Tuple[int, int] = ACTIVE_SENSORS
    pitch: float = SENSOR_PITCH_MM
    hole_offset: float = HOLE_OFFSET_MM
    footprint_sigma: float = FOOTPRINT_SIGMA_MM
    truncation: float = FOOTPRINT_TRUNCATION
    sensitivity: float = SENSITIVITY_UNITS_PER_N
    noise_sigma: float = NOISE_SIGMA
    saturation: float = SATURATION
    raw_gain_spread: float = RAW_GAIN_SPREAD
    raw_offset_spread: float = RAW_OFFSET_SPREAD


@dataclass(frozen=True)
class ProcedureSettings:
    sample_rate: float = SAMPLE_RATE_HZ
    finger_speed_deg_s: float = FINGER_SPEED_DEG_S
    pull_rotation_deg: float = PULL_ROTATION_DEG
    swap_dwell: float = SWAP_DWELL_S
    start_hold: float = START_HOLD_S
    end_hold: float = END_HOLD_S
    push_torque: float = PUSH_TORQUE_NM
    initial_offset_range: float = INITIAL_OFFSET_RANGE_MM
    placement_attempts: int = PLACEMENT_ATTEMPTS
    sensing_finger: str = SENSING_FINGER


@dataclass(frozen=True)
class FeatureSettings:
    window: int = SMOOTHING_WINDOW
    threshold_units: float = PEAK_THRESHOLD_UNITS
    threshold_fraction: float = PEAK_THRESHOLD_FRACTION
    peaks_per_channel: int = PEAKS_PER_CHANNEL


@dataclass(frozen=True)
class ClassificationSettings:
    variance: float = PCA_VARIANCE
    learners: int = ENSEMBLE_LEARNERS
    neighbors: int = ENSEMBLE_NEIGHBORS
    plain_neighbors: int = PLAIN_KNN_NEIGHBORS
    folds: int = CV_FOLDS


@dataclass(frozen=True)
class Settings:
    gripper: GripperSettings = field(default_factory=GripperSettings)
    controller: ControllerSettings = field(default_factory=ControllerSettings)
    sensor: SensorSettings = field(default_factory=SensorSettings)
    procedure: ProcedureSettings = field(default_factory=ProcedureSettings)
    features: FeatureSettings = field(default_factory=FeatureSettings)
    classification: ClassificationSettings = field(default_factory=ClassificationSettings)

    def to_dict(self) -> Dict[str, Any]:
        return dataclasses.asdict(self)

    def config_hash(self) -> str:
        """SHA-256 of the canonical JSON form of these settings."""
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _overlay(section_cls, values: Dict[str, Any], section: str):
    known = {f.name: f for f in dataclasses.fields(section_cls)}
    unknown = set(values) - set(known)
    if unknown:
        raise ConfigError(f"Unknown keys in [{section}]: {', '.join(sorted(unknown))}")

    converted = {}
    for key, value in values.items():
        if isinstance(value, list):
            value = tuple(value)
        converted[key] = value
    return section_cls(**converted)


def settings_from_dict(data: Optional[Dict[str, Any]]) -> Settings:
    """
    Build Settings from a (possibly partial) nested dictionary.

    Args:
        data: Mapping of section name to key/value overrides

    Returns:
        Settings with defaults filled in for anything not given
    """
    data = data or {}
    sections = {f.name for f in dataclasses.fields(Settings)}
    unknown = set(data) - set(sections)
    if unknown:
        raise ConfigError(f"Unknown config sections: {', '.join(sorted(unknown))}")

    kwargs = {}
    for f in dataclasses.fields(Settings):
        section_cls = type(f.default_factory())
        values = data.get(f.name) or {}
        if not isinstance(values, dict):
            raise ConfigError(f"Section [{f.name}] must be a mapping")
        kwargs[f.name] = _overlay(section_cls, values, f.name)

    return Settings(**kwargs)


def load_settings(path: Optional[str] = None) -> Settings:
    """
    Load run settings from a YAML file, falling back to $ETROLL_CONFIG.

    Args:
        path: Explicit config file path, or None

    Returns:
        Settings instance (defaults when no file is configured)
    """
    path = path or os.environ.get(CONFIG_ENV_VAR)
    if not path:
        return Settings()

    try:
        with open(path, "r", encoding="utf-8") as f:
            data = yaml.safe_load(f)
    except OSError as e:
        raise ConfigError(f"Cannot read config file {path}: {e}") from e
    except yaml.YAMLError as e:
        raise ConfigError(f"Invalid YAML in {path}: {e}") from e

    if data is not None and not isinstance(data, dict):
        raise ConfigError(f"Config file {path} must contain a mapping")

    return settings_from_dict(data)
