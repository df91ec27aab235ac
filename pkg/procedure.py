"""
Predefined rolling procedure: drives geometry, palm controller and sensor
array through the four-step roll and records one SensorTrace per run.
"""

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Any, Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np
from tenacity import Retrying, retry_if_exception_type, stop_after_attempt

import config
from errors import ConfigError, ContactOffFingerError, ETrollError, GraspLostError, StepTooLargeError
from geometry import (
    LEFT,
    RIGHT,
    ContactState,
    ConvexProfile,
    GripperGeometry,
    contact_arc_length,
    initial_state,
    roll_step,
)
from palm_control import GripperState, PalmController
from sensor_model import SensorArray, SensorFrame, contact_force, load_from_contact


logger = logging.getLogger(__name__)

PALM_MODES = ("dynamic", "fixed")


@dataclass(frozen=True)
class Phase:
    """A stretch of ticks with a constant pulling-finger step."""
    name: str
    pull_role: str
    ticks: int
    delta: float = 0.0


def _draw_placement(seed: int, limit: float, index: int) -> Tuple[float, float]:
    placement_rng = np.random.default_rng(np.random.SeedSequence(seed).spawn(3)[0])
    for _ in range(index + 1):
        offset = float(placement_rng.uniform(-limit, limit))
        orientation = float(placement_rng.uniform(0.0, 2.0 * math.pi))
    return offset, orientation


@dataclass(frozen=True)
class RunConfig:
    shape: str
    seed: int
    initial_offset: float = 0.0
    initial_orientation: float = 0.0
    palm_mode: str = "dynamic"
    fixed_width: float = config.FIXED_PALM_WIDTH_MM
    settings: config.Settings = field(default_factory=config.Settings)
    placement: int = 0

    def __post_init__(self):
        limit = self.settings.procedure.initial_offset_range
        if abs(self.initial_offset) > limit:
            raise ConfigError(f"Initial offset {self.initial_offset:.2f} mm exceeds +/-{limit} mm")
        if self.settings.procedure.sample_rate <= 0:
            raise ConfigError("Sample rate must be positive")
        if self.palm_mode not in PALM_MODES:
            raise ConfigError(f"Unknown palm mode: {self.palm_mode}")
        if self.shape not in config.SHAPES:
            raise ConfigError(f"Unknown shape: {self.shape}")

    @classmethod
    def sample(cls, shape: str, seed: int, settings: Optional[config.Settings] = None,
               palm_mode: str = "dynamic", placement: int = 0) -> "RunConfig":
        """
        Draw the random object placement for one run from its seed.

        Placement k is the k-th (offset, orientation) pair of the seed's
        placement stream; re-seated runs use k > 0.
        """
        settings = settings or config.Settings()
        offset, orientation = _draw_placement(seed, settings.procedure.initial_offset_range, placement)
        return cls(shape, seed, offset, orientation, palm_mode,
                   settings.gripper.fixed_palm_width, settings, placement)

    def reseated(self, placement: int) -> "RunConfig":
        """The same run with the object put down at another placement."""
        limit = self.settings.procedure.initial_offset_range
        offset, orientation = _draw_placement(self.seed, limit, placement)
        return replace(self, initial_offset=offset, initial_orientation=orientation, placement=placement)

    @property
    def label(self) -> str:
        return self.shape

    @property
    def profile(self) -> ConvexProfile:
        return ConvexProfile.from_shape(self.shape, self.settings.gripper.object_diameter)

    @property
    def geometry(self) -> GripperGeometry:
        return GripperGeometry.from_settings(self.settings.gripper)

    def streams(self) -> Tuple[np.random.Generator, np.random.Generator]:
        """Independent generators for the sensor build and frame noise."""
        children = np.random.SeedSequence(self.seed).spawn(3)
        return np.random.default_rng(children[1]), np.random.default_rng(children[2])


@dataclass
class SensorTrace:
    frames: List[SensorFrame]
    gripper: List[GripperState]
    label: str
    seed: int
    config_hash: str
    states: List[ContactState] = field(default_factory=list, repr=False)

    @property
    def timestamps(self) -> np.ndarray:
        return np.array([f.timestamp for f in self.frames])

    @property
    def pressures(self) -> np.ndarray:
        """Frames x channels matrix of calibrated readings."""
        if not self.frames:
            return np.zeros((0, 0))
        return np.vstack([f.as_array() for f in self.frames])

    @property
    def duration(self) -> float:
        return self.frames[-1].timestamp - self.frames[0].timestamp if self.frames else 0.0

    def __len__(self) -> int:
        return len(self.frames)


def build_schedule(procedure: config.ProcedureSettings) -> List[Phase]:
    """
    The four-step roll as tick phases.

    Start perpendicular; the right finger pulls clockwise; roles swap and
    the left finger pulls counterclockwise twice as far; roles swap again
    and the right finger returns to perpendicular.
    """
    rate = procedure.sample_rate
    step = math.radians(procedure.finger_speed_deg_s) / rate
    pull_ticks = int(round(procedure.pull_rotation_deg / (procedure.finger_speed_deg_s / rate)))
    dwell = int(round(procedure.swap_dwell * rate))

    def rotation(name: str, role: str, multiple: int, sign: float) -> Phase:
        return Phase(name, role, pull_ticks * multiple, sign * step)

    return [
        Phase("start-hold", RIGHT, int(round(procedure.start_hold * rate))),
        rotation("pull-right-cw", RIGHT, 1, -1.0),
        Phase("swap-dwell", LEFT, dwell),
        rotation("pull-left-ccw", LEFT, 2, 1.0),
        Phase("swap-dwell", RIGHT, dwell),
        rotation("pull-right-cw-return", RIGHT, 1, -1.0),
        Phase("end-hold", RIGHT, int(round(procedure.end_hold * rate))),
    ]


class RollingSimulation:
    """Steps one object through a phase schedule under palm control."""

    def __init__(
        self,
        profile: ConvexProfile,
        geometry: GripperGeometry,
        controller: Optional[PalmController] = None,
        max_attempts: int = config.MAX_STEP_ATTEMPTS
    ):
        self.profile = profile
        self.geometry = geometry
        self.controller = controller
        self.max_attempts = max_attempts
        self.subdivided_steps = 0

    def advance(self, state: ContactState, delta: float, width: float) -> ContactState:
        """
        One tick of motion, split into finer sub-steps when the solve fails.

        Each retry halves the sub-step size; the last failure propagates.
        """
        for attempt in Retrying(
            stop=stop_after_attempt(self.max_attempts),
            retry=retry_if_exception_type(StepTooLargeError),
            reraise=True
        ):
            with attempt:
                pieces = 2 ** (attempt.retry_state.attempt_number - 1)
                if pieces > 1:
                    self.subdivided_steps += 1
                    logger.warning(f"Subdividing step into {pieces} sub-steps")
                current = state
                for i in range(1, pieces + 1):
                    target = state.palm_width + (width - state.palm_width) * i / pieces
                    current = roll_step(self.profile, current, delta / pieces, target,
                                        geometry=self.geometry)
        return current

    def run(self, state: ContactState, phases: Sequence[Phase]) -> Iterator[ContactState]:
        """Yield the configuration after every tick of every phase."""
        for phase in phases:
            if state.pull_role != phase.pull_role:
                state = state.with_roles(phase.pull_role)
            for _ in range(phase.ticks):
                if self.controller is not None:
                    width = self.controller.tick(state).width
                else:
                    width = state.palm_width
                state = self.advance(state, phase.delta, width)
                yield state


def _start_height(offset: float, settings: config.Settings) -> float:
    """Contact height on the sensing finger, nudged off cell boundaries."""
    pitch = settings.sensor.pitch
    remainder = math.fmod(offset, pitch)
    height = settings.gripper.l_mid + offset
    if abs(remainder) < config.DEGENERATE_START_SHIFT_MM or abs(abs(remainder) - pitch) < config.DEGENERATE_START_SHIFT_MM:
        height -= config.DEGENERATE_START_SHIFT_MM
    return height


def start_state(run: RunConfig) -> ContactState:
    width = None if run.palm_mode == "dynamic" else run.fixed_width
    return initial_state(
        run.profile,
        run.geometry,
        run.initial_orientation,
        _start_height(run.initial_offset, run.settings),
        palm_width=width,
        pull_role=RIGHT,
        push_torque=run.settings.procedure.push_torque,
    )


def run_procedure(run: RunConfig) -> SensorTrace:
    """
    Execute the predefined rolling procedure for one run.

    Args:
        run: Object, placement, palm mode, seed and settings

    Returns:
        SensorTrace with one frame per control tick

    Raises:
        GraspLostError: contact was lost; the partial trace is attached
    """
    settings = run.settings
    sensing = settings.procedure.sensing_finger
    sensor_rng, noise_rng = run.streams()
    array = SensorArray.build(settings, sensor_rng)
    controller = PalmController(settings.controller, settings.gripper)
    simulation = RollingSimulation(run.profile, run.geometry,
                                   controller if run.palm_mode == "dynamic" else None)
    period = 1.0 / settings.procedure.sample_rate

    trace = SensorTrace([], [], run.label, run.seed, settings.config_hash())

    def record(state: ContactState) -> None:
        t = len(trace.frames) * period
        force = contact_force(state.push_torque, state.contact_push.distance)
        load = load_from_contact(state.contact(sensing), force)
        trace.frames.append(array.read(load, noise_rng, t))
        trace.gripper.append(controller.observe(state))
        trace.states.append(state)

    try:
        state = start_state(run)
        record(state)
        for state in simulation.run(state, build_schedule(settings.procedure)):
            record(state)
    except ETrollError as e:
        logger.warning(f"Run {run.label}/{run.seed} aborted after {len(trace)} frames: {e}")
        error = ContactOffFingerError if isinstance(e, ContactOffFingerError) else GraspLostError
        raise error(f"Grasp lost after {len(trace)} frames: {e}", trace=trace) from e

    if controller.saturated_ticks:
        logger.warning(f"Palm saturated on {controller.saturated_ticks} ticks")
    if controller.reversal_limited_ticks:
        logger.debug(f"Palm reversal limited on {controller.reversal_limited_ticks} ticks")
    logger.debug(f"Run {run.label}/{run.seed}: {len(trace)} frames, {trace.duration:.2f} s")
    return trace


class RunProcessor:
    """Processes a single run and reports the outcome as a result dict."""

    def __init__(self, run: RunConfig):
        self.run = run
        self.trace: Optional[SensorTrace] = None
        self.error: Optional[str] = None

    def process(self) -> Dict[str, Any]:
        """
        Execute the run.

        Returns:
            Dictionary with the trace or error information
        """
        try:
            self.trace = self._run_reseating()
            return self._build_result()
        except ETrollError as e:
            self.error = str(e)
            if isinstance(e, GraspLostError):
                self.trace = e.trace
            return self._build_error_result()

    def _run_reseating(self) -> SensorTrace:
        """Run the procedure, putting the object down again whenever a contact leaves a finger."""
        for attempt in Retrying(
            stop=stop_after_attempt(self.run.settings.procedure.placement_attempts),
            retry=retry_if_exception_type(ContactOffFingerError),
            reraise=True
        ):
            with attempt:
                placement = attempt.retry_state.attempt_number - 1
                if placement:
                    self.run = self.run.reseated(placement)
                    logger.info(f"Run {self.run.label}/{self.run.seed}: re-seated at placement {placement}")
                return run_procedure(self.run)

    def _build_result(self) -> Dict[str, Any]:
        angle_errors = [abs(g.d_theta) for g in self.trace.gripper]
        return {
            'label': self.run.label,
            'seed': self.run.seed,
            'success': True,
            'error': None,
            'frames': len(self.trace),
            'duration': self.trace.duration,
            'max_angle_error_deg': math.degrees(max(angle_errors)),
            'placement': self.run.placement,
            'trace': self.trace,
        }

    def _build_error_result(self) -> Dict[str, Any]:
        return {
            'label': self.run.label,
            'seed': self.run.seed,
            'success': False,
            'error': self.error,
            'frames': len(self.trace) if self.trace else 0,
            'duration': self.trace.duration if self.trace else 0.0,
            'max_angle_error_deg': None,
            'placement': self.run.placement,
            'trace': None,
        }


def run_seeds(base_seed: int, count: int) -> List[int]:
    """Per-run seeds derived from one base seed."""
    children = np.random.SeedSequence(base_seed).spawn(count)
    return [int(c.generate_state(1)[0]) for c in children]


def plan_runs(shapes: Sequence[str], runs_per_object: int, seed: int,
              settings: Optional[config.Settings] = None) -> List[RunConfig]:
    settings = settings or config.Settings()
    seeds = run_seeds(seed, len(shapes) * runs_per_object)
    runs = []
    for i, shape in enumerate(shapes):
        for j in range(runs_per_object):
            runs.append(RunConfig.sample(shape, seeds[i * runs_per_object + j], settings))
    return runs


def _process(run: RunConfig) -> Dict[str, Any]:
    return RunProcessor(run).process()


def process_runs(runs: Sequence[RunConfig], workers: int = 1) -> List[Dict[str, Any]]:
    """Process runs in order, optionally across a process pool."""
    if workers <= 1:
        return [_process(r) for r in runs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_process, runs))


@dataclass(frozen=True)
class Fig2Result:
    rotation_dynamic: float
    rotation_fixed: float
    arc_dynamic: float
    arc_fixed: float
    fixed_width: float
    final_width_dynamic: float

    @property
    def rotation_increase(self) -> float:
        """Percent rotation gained by the dynamic palm."""
        return 100.0 * (self.rotation_dynamic - self.rotation_fixed) / self.rotation_fixed

    @property
    def arc_increase(self) -> float:
        return 100.0 * (self.arc_dynamic - self.arc_fixed) / self.arc_fixed

    def to_dict(self) -> Dict[str, float]:
        return {
            'rotation_dynamic_deg': self.rotation_dynamic,
            'rotation_fixed_deg': self.rotation_fixed,
            'rotation_increase_pct': self.rotation_increase,
            'arc_dynamic_mm': self.arc_dynamic,
            'arc_fixed_mm': self.arc_fixed,
            'arc_increase_pct': self.arc_increase,
            'fixed_width_mm': self.fixed_width,
            'final_width_dynamic_mm': self.final_width_dynamic,
        }


def _single_pull(profile: ConvexProfile, geometry: GripperGeometry, settings: config.Settings,
                 palm_width: Optional[float]) -> Tuple[float, float, float]:
    procedure = settings.procedure
    start = initial_state(profile, geometry, 0.0, settings.gripper.l_mid,
                          palm_width=palm_width, pull_role=RIGHT,
                          push_torque=procedure.push_torque)
    controller = PalmController(settings.controller, settings.gripper) if palm_width is None else None
    simulation = RollingSimulation(profile, geometry, controller)

    rate = procedure.sample_rate
    pull = build_schedule(procedure)[1]
    phases = [pull]
    if controller is not None:
        phases.append(Phase("settle", RIGHT, config.FIG2_SETTLE_TICKS))

    states = [start] + list(simulation.run(start, phases))
    rotation = abs(math.degrees(states[-1].pose.phi - start.pose.phi))
    arc = contact_arc_length(states, procedure.sensing_finger, profile)
    logger.debug(f"Single pull at {rate} Hz: rotation {rotation:.2f} deg, arc {arc:.2f} mm")
    return rotation, arc, states[-1].palm_width


def fig2_experiment(
    diameter: float = config.OBJECT_INNER_DIAMETER_MM,
    fixed_w: float = config.FIXED_PALM_WIDTH_MM,
    settings: Optional[config.Settings] = None
) -> Fig2Result:
    """
    Compare a single pull on a cylinder with a dynamic and a fixed palm.

    Args:
        diameter: Cylinder diameter (mm)
        fixed_w: Palm width for the fixed-palm run (mm)
        settings: Run settings; defaults when None

    Returns:
        Fig2Result with object rotations (deg) and sensing-finger arcs (mm)
    """
    settings = settings or config.Settings()
    profile = ConvexProfile.circle(diameter)
    geometry = GripperGeometry.from_settings(settings.gripper)

    rot_dyn, arc_dyn, width_dyn = _single_pull(profile, geometry, settings, None)
    rot_fix, arc_fix, _ = _single_pull(profile, geometry, settings, fixed_w)
    return Fig2Result(rot_dyn, rot_fix, arc_dyn, arc_fix, fixed_w, width_dyn)


def noise_free(settings: config.Settings) -> config.Settings:
    """Settings with sensor noise and raw gain/offset spread disabled."""
    sensor = replace(settings.sensor, noise_sigma=0.0, raw_gain_spread=0.0, raw_offset_spread=0.0)
    return replace(settings, sensor=sensor)
