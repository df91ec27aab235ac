"""
Barometric tactile array model for the sensing finger.

Each cell responds to normal load through a truncated two-sided Gaussian
footprint peaking at its sensitive hole, which sits off the cell centre. Raw cell
readings carry a per-cell gain and offset; a three-weight calibration
fit maps them back onto a common pressure-unit scale.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.special import erf

import config
from errors import ConfigError, DegenerateFitError, SingularLoadError
from geometry import ContactType, FingerContact


logger = logging.getLogger(__name__)

MIN_MOMENT_ARM_MM = 1.0


@dataclass(frozen=True)
class SensorArrayLayout:
    """
    Cell placement along the sensing finger.

    Physical cells are centred on `center`; only the `active` slice of them
    is reported.
    """
    physical_count: int = config.PHYSICAL_SENSOR_COUNT
    active: Tuple[int, int] = config.ACTIVE_SENSORS
    pitch: float = config.SENSOR_PITCH_MM
    hole_offset: float = config.HOLE_OFFSET_MM
    footprint_sigma: float = config.FOOTPRINT_SIGMA_MM
    truncation: float = config.FOOTPRINT_TRUNCATION
    saturation: float = config.SATURATION
    center: float = config.L_MID_MM
    finger_length: float = config.FINGER_LENGTH_MM

    def __post_init__(self):
        if not abs(self.hole_offset) < self.pitch / 2.0:
            raise ConfigError(f"hole offset {self.hole_offset} must be under half the pitch")
        if not 0 <= self.active[0] < self.active[1] <= self.physical_count:
            raise ConfigError(f"active cells {self.active} outside the {self.physical_count} physical cells")
        if self.footprint_sigma <= 0 or self.pitch <= 0:
            raise ConfigError("pitch and footprint sigma must be positive")
        if not abs(self.hole_offset) < self.truncation * self.footprint_sigma:
            raise ConfigError("hole offset must stay inside the footprint support")
        positions = self.physical_positions
        if positions[0] < 0 or positions[-1] > self.finger_length:
            raise ConfigError("sensor cells extend past the finger")

    @classmethod
    def from_settings(cls, sensor: config.SensorSettings, gripper: config.GripperSettings) -> "SensorArrayLayout":
        return cls(sensor.physical_count, tuple(sensor.active), sensor.pitch, sensor.hole_offset,
                   sensor.footprint_sigma, sensor.truncation, sensor.saturation,
                   gripper.l_mid, gripper.finger_length)

    @property
    def physical_positions(self) -> np.ndarray:
        i = np.arange(self.physical_count)
        return self.center + (i - (self.physical_count - 1) / 2.0) * self.pitch

    @property
    def positions(self) -> np.ndarray:
        """Active cell centres, distance from the joint (mm)."""
        return self.physical_positions[self.active[0]:self.active[1]]

    @property
    def holes(self) -> np.ndarray:
        return self.positions + self.hole_offset

    @property
    def sensor_count(self) -> int:
        return self.active[1] - self.active[0]

    @property
    def footprint_sigmas(self) -> Tuple[float, float]:
        """
        Gaussian widths toward and away from the cell centre.

        The footprint spans the cell symmetrically while its peak sits on
        the hole, so the side facing the cell centre is the wider one.
        """
        shift = abs(self.hole_offset) / self.truncation
        return self.footprint_sigma + shift, self.footprint_sigma - shift

    def _sides(self, offset: np.ndarray) -> np.ndarray:
        toward, away = self.footprint_sigmas
        if self.hole_offset >= 0:
            return np.where(offset < 0, toward, away)
        return np.where(offset < 0, away, toward)

    def kernel(self, offset: np.ndarray) -> np.ndarray:
        """Footprint weight at signed distance from a hole (1 at the hole)."""
        offset = np.asarray(offset, dtype=float)
        sigma = self._sides(offset)
        weight = np.exp(-0.5 * (offset / sigma) ** 2)
        return np.where(np.abs(offset) <= self.truncation * sigma, weight, 0.0)

    def kernel_integral(self, start: np.ndarray, end: np.ndarray) -> np.ndarray:
        """Integral of the kernel over [start, end] offsets, clipped to its support."""
        below, above = self._sides(np.array([-1.0, 1.0]))

        def half(sigma: float, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
            scale = sigma * math.sqrt(2.0)
            return sigma * math.sqrt(math.pi / 2.0) * (erf(hi / scale) - erf(lo / scale))

        s_below, s_above = self.truncation * below, self.truncation * above
        negative = half(below, np.clip(start, -s_below, 0.0), np.clip(end, -s_below, 0.0))
        positive = half(above, np.clip(start, 0.0, s_above), np.clip(end, 0.0, s_above))
        return negative + positive


@dataclass(frozen=True)
class ContactLoad:
    """Normal load on the finger: a point load when start == end."""
    force: float
    start: float
    end: float

    @classmethod
    def point(cls, force: float, position: float) -> "ContactLoad":
        return cls(force, position, position)

    @classmethod
    def line(cls, force: float, start: float, end: float) -> "ContactLoad":
        lo, hi = sorted((start, end))
        return cls(force, lo, hi)

    @classmethod
    def none(cls) -> "ContactLoad":
        return cls(0.0, 0.0, 0.0)

    @property
    def is_point(self) -> bool:
        return self.end - self.start <= config.CONTACT_TOLERANCE_MM


@dataclass(frozen=True)
class SensorFrame:
    timestamp: float
    pressures: Tuple[float, ...]

    def as_array(self) -> np.ndarray:
        return np.asarray(self.pressures, dtype=float)


@dataclass(frozen=True)
class CalibrationParams:
    """Per-cell linear fit raw = slope * mass_g + offset."""
    slopes: np.ndarray
    offsets: np.ndarray

    def __post_init__(self):
        if np.any(np.asarray(self.slopes) <= 0):
            raise DegenerateFitError("Calibration slopes must be positive")

    def to_grams(self, raw: np.ndarray) -> np.ndarray:
        return (np.asarray(raw) - self.offsets) / self.slopes


def contact_force(push_torque_setpoint: float, l: float, minimum_arm: float = MIN_MOMENT_ARM_MM) -> float:
    """
    Normal force from the pushing torque acting at distance l.

    Args:
        push_torque_setpoint: Pushing finger torque (N*m)
        l: Contact distance from the joint (mm)
        minimum_arm: Smallest accepted moment arm (mm)

    Returns:
        Force in N
    """
    if l <= minimum_arm:
        raise SingularLoadError(f"Moment arm {l:.3g} mm is too short")
    return push_torque_setpoint * 1000.0 / l


def load_from_contact(contact: FingerContact, force: float) -> ContactLoad:
    """Point load at a vertex or arc contact, uniform line load over a face."""
    if contact.contact_type is ContactType.FACE and contact.segment is not None:
        return ContactLoad.line(force, *contact.segment)
    return ContactLoad.point(force, contact.distance)


def ideal_response(layout: SensorArrayLayout, load: ContactLoad,
                   sensitivity: float = config.SENSITIVITY_UNITS_PER_N) -> np.ndarray:
    """Noise-free active-cell readings on the calibrated scale."""
    holes = layout.holes
    if load.force == 0.0:
        return np.zeros(layout.sensor_count)
    if load.is_point:
        weights = layout.kernel(load.start - holes)
    else:
        length = load.end - load.start
        weights = layout.kernel_integral(load.start - holes, load.end - holes) / length
    return sensitivity * load.force * weights


def respond(
    layout: SensorArrayLayout,
    load: ContactLoad,
    noise_seed=None,
    sensitivity: float = config.SENSITIVITY_UNITS_PER_N,
    noise_sigma: float = config.NOISE_SIGMA,
    timestamp: float = 0.0
) -> SensorFrame:
    """
    One frame of calibrated readings for a load.

    Args:
        layout: Sensor layout
        load: Point or line load along the finger
        noise_seed: Seed or numpy Generator for the additive noise
        sensitivity: Pressure units per newton at the hole
        noise_sigma: Standard deviation of additive noise
        timestamp: Frame time (s)

    Returns:
        SensorFrame clipped to [0, saturation]
    """
    rng = noise_seed if isinstance(noise_seed, np.random.Generator) else np.random.default_rng(noise_seed)
    values = ideal_response(layout, load, sensitivity)
    if noise_sigma > 0:
        values = values + rng.normal(0.0, noise_sigma, layout.sensor_count)
    values = np.clip(values, 0.0, layout.saturation)
    return SensorFrame(timestamp, tuple(float(v) for v in values))


def calibrate(masses: Sequence[float], readings: np.ndarray) -> CalibrationParams:
    """
    Least-squares linear fit of raw readings against applied mass.

    Args:
        masses: Calibration masses (g)
        readings: Raw readings, shape (len(masses), sensors)

    Returns:
        CalibrationParams with per-cell slope and offset
    """
    masses = np.asarray(masses, dtype=float)
    readings = np.asarray(readings, dtype=float)
    if readings.ndim == 1:
        readings = readings[:, None]
    if readings.shape[0] != len(masses) or len(masses) < 2:
        raise ValueError("need one row of readings per calibration mass")

    order = np.argsort(masses)
    if not np.all(np.diff(readings[order], axis=0) > 0):
        raise DegenerateFitError("Readings do not increase with the applied mass")

    slopes, offsets = np.polyfit(masses, readings, 1)
    return CalibrationParams(np.atleast_1d(slopes), np.atleast_1d(offsets))


@dataclass
class SensorArray:
    """A seeded physical array: raw gains/offsets plus its fitted calibration."""
    layout: SensorArrayLayout
    sensitivity: float = config.SENSITIVITY_UNITS_PER_N
    noise_sigma: float = config.NOISE_SIGMA
    raw_gain: np.ndarray = field(default_factory=lambda: np.ones(10))
    raw_offset: np.ndarray = field(default_factory=lambda: np.zeros(10))
    calibration: Optional[CalibrationParams] = None

    @property
    def units_per_gram(self) -> float:
        return config.GRAVITY * 1e-3 * self.sensitivity

    @classmethod
    def build(cls, settings: config.Settings, rng: np.random.Generator,
              masses: Sequence[float] = config.CALIBRATION_MASSES_G) -> "SensorArray":
        """Draw per-cell gains and offsets, then calibrate on the weight rig."""
        layout = SensorArrayLayout.from_settings(settings.sensor, settings.gripper)
        n = layout.sensor_count
        s = settings.sensor
        array = cls(
            layout=layout,
            sensitivity=s.sensitivity,
            noise_sigma=s.noise_sigma,
            raw_gain=1.0 + rng.uniform(-s.raw_gain_spread, s.raw_gain_spread, n),
            raw_offset=rng.uniform(0.0, s.raw_offset_spread, n),
        )
        array.calibration = calibrate(masses, array.calibration_readings(masses, rng))
        logger.debug(f"Calibrated slopes: {np.round(array.calibration.slopes, 5)}")
        return array

    def raw(self, ideal: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        noise = rng.normal(0.0, self.noise_sigma, len(ideal)) if self.noise_sigma > 0 else 0.0
        return self.raw_gain * ideal + self.raw_offset + noise

    def calibration_readings(self, masses: Sequence[float], rng: np.random.Generator,
                             samples: int = config.CALIBRATION_SAMPLES) -> np.ndarray:
        """Raw readings with each mass resting on each cell's hole, averaged over the hold."""
        rows = []
        for mass in masses:
            ideal = np.full(self.layout.sensor_count, mass * self.units_per_gram)
            rows.append(np.mean([self.raw(ideal, rng) for _ in range(samples)], axis=0))
        return np.vstack(rows)

    def read(self, load: ContactLoad, rng: np.random.Generator, timestamp: float = 0.0) -> SensorFrame:
        raw = self.raw(ideal_response(self.layout, load, self.sensitivity), rng)
        if self.calibration is None:
            values = raw
        else:
            values = self.calibration.to_grams(raw) * self.units_per_gram
        values = np.clip(values, 0.0, self.layout.saturation)
        return SensorFrame(timestamp, tuple(float(v) for v in values))
