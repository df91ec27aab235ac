"""
Prismatic palm controller.

Keeps the pushing finger parallel to the pulling finger by adjusting the
palm width. Angles here are in the pull frame: measured from the palm
direction that points from the pulling joint toward the pushing joint.
"""

import logging
import math
from dataclasses import dataclass, replace
from typing import Optional, Tuple

import config
from errors import SingularAngleError
from geometry import LEFT, ContactState


logger = logging.getLogger(__name__)


def _check_angle(theta_pull: float, guard: float) -> None:
    if not guard < theta_pull < math.pi - guard:
        raise SingularAngleError(
            f"Pulling finger angle {math.degrees(theta_pull):.2f} deg is within "
            f"{guard} rad of the palm"
        )


def error_ratio(l: float, theta_pull: float, guard: float = config.SINGULAR_ANGLE_GUARD_RAD) -> float:
    """
    Palm width error per radian of finger angle error.

    Args:
        l: Object distance along the pushing finger (mm)
        theta_pull: Pulling finger angle (rad)
        guard: Minimum distance of theta_pull from 0 and pi

    Returns:
        dw/dtheta in mm per rad
    """
    _check_angle(theta_pull, guard)
    if not l > 0:
        raise ValueError(f"object distance must be positive, got {l}")
    return -l / math.sin(theta_pull)


def object_roll_offset(w: float, theta_pull: float) -> float:
    """Offset of the object along the fingers produced by the palm geometry."""
    return (w / 2.0) * math.cos(theta_pull)


def estimate_object_position(
    w: float,
    theta_pull: float,
    l_mid: float = config.L_MID_MM,
    finger_length: float = config.FINGER_LENGTH_MM
) -> float:
    """
    Estimate the object distance l along the pushing finger.

    Args:
        w: Palm width (mm)
        theta_pull: Pulling finger angle (rad)
        l_mid: Object distance when fingers are perpendicular (mm)
        finger_length: Finger length, for the out-of-finger warning

    Returns:
        l in mm
    """
    l = l_mid - object_roll_offset(w, theta_pull)
    if not 0.0 <= l <= finger_length:
        logger.warning(f"Estimated object position {l:.1f} mm is outside the finger")
    return l


def palm_correction(state: "GripperState", guard: float = config.SINGULAR_ANGLE_GUARD_RAD) -> float:
    """
    Palm width correction for the current finger angle error.

    dw = [(w/2)*cot(theta_pull) - l_mid*csc(theta_pull)] * d_theta

    Args:
        state: Current gripper state
        guard: Singular-angle guard (rad)

    Returns:
        dw in mm
    """
    _check_angle(state.theta_pull, guard)
    theta = state.theta_pull
    return ((state.w / 2.0) / math.tan(theta) - state.l_mid / math.sin(theta)) * state.d_theta


@dataclass(frozen=True)
class GripperState:
    w: float
    theta_pull: float
    theta_push: float
    l: float
    l_roll: float
    pull_role: str
    l_mid: float = config.L_MID_MM
    dw: float = 0.0

    @property
    def theta_target(self) -> float:
        return self.theta_pull

    @property
    def d_theta(self) -> float:
        return self.theta_push - self.theta_target

    @classmethod
    def from_angles(
        cls,
        w: float,
        theta_pull: float,
        theta_push: float,
        pull_role: str,
        l_mid: float = config.L_MID_MM,
        guard: float = config.SINGULAR_ANGLE_GUARD_RAD
    ) -> "GripperState":
        """Build a state with l, l_roll and dw filled from the estimator."""
        partial = cls(w, theta_pull, theta_push,
                      estimate_object_position(w, theta_pull, l_mid),
                      object_roll_offset(w, theta_pull), pull_role, l_mid)
        return cls(partial.w, partial.theta_pull, partial.theta_push, partial.l,
                   partial.l_roll, pull_role, l_mid, palm_correction(partial, guard))

    @classmethod
    def from_contact(
        cls,
        contact: ContactState,
        l_mid: float = config.L_MID_MM,
        guard: float = config.SINGULAR_ANGLE_GUARD_RAD
    ) -> "GripperState":
        """Read a gripper state off a geometric configuration."""
        pull, push = contact.pull_role, contact.push_role
        theta_pull = pull_frame_angle(contact.finger_angle(pull), pull)
        theta_push = pull_frame_angle(contact.finger_angle(push), pull)
        return cls.from_angles(contact.palm_width, theta_pull, theta_push, pull, l_mid, guard)


def pull_frame_angle(global_angle: float, pull_role: str) -> float:
    """Convert a palm-frame finger angle to the pull frame."""
    return global_angle if pull_role == LEFT else math.pi - global_angle


@dataclass(frozen=True)
class PalmCommand:
    width: float
    saturated: bool = False
    rate_limited: bool = False
    reversal_limited: bool = False


def controller_tick(
    state: GripperState,
    gain: float = config.CONTROLLER_GAIN,
    rate_limit: float = config.CONTROLLER_RATE_LIMIT_MM,
    palm_min: float = config.PALM_MIN_MM,
    palm_max: float = config.PALM_MAX_MM
) -> PalmCommand:
    """
    One control update of the palm width.

    Args:
        state: Gripper state with dw filled in
        gain: Proportional gain on dw
        rate_limit: Largest width change per tick (mm)
        palm_min: Palm lower travel limit (mm)
        palm_max: Palm upper travel limit (mm)

    Returns:
        PalmCommand with the new width and saturation/rate-limit flags
    """
    step = gain * state.dw
    rate_limited = abs(step) > rate_limit
    if rate_limited:
        step = math.copysign(rate_limit, step)

    width = state.w + step
    saturated = not palm_min <= width <= palm_max
    if saturated:
        width = min(max(width, palm_min), palm_max)
        logger.warning(f"Palm command saturated at {width:.1f} mm")

    return PalmCommand(width, saturated, rate_limited)


class PalmController:
    """
    Controller bound to one run's settings.

    A step larger than reversal_step that points against the previous
    large step is cut to reversal_step until reversal_ticks have passed,
    so the width never reverses hard inside that window.
    """

    def __init__(self, settings: Optional[config.ControllerSettings] = None,
                 gripper: Optional[config.GripperSettings] = None):
        self.settings = settings or config.ControllerSettings()
        self.gripper = gripper or config.GripperSettings()
        self.saturated_ticks = 0
        self.reversal_limited_ticks = 0
        self._ticks = 0
        self._last_large: Optional[Tuple[int, float]] = None

    def observe(self, contact: ContactState) -> GripperState:
        return GripperState.from_contact(contact, self.gripper.l_mid, self.settings.angle_guard)

    def _limit_reversal(self, width: float, command: PalmCommand) -> PalmCommand:
        step = command.width - width
        limit = self.settings.reversal_step
        if abs(step) <= limit:
            return command

        direction = math.copysign(1.0, step)
        if self._last_large is not None:
            tick, last_direction = self._last_large
            if direction != last_direction and self._ticks - tick < self.settings.reversal_ticks:
                self.reversal_limited_ticks += 1
                return replace(command, width=width + direction * limit, reversal_limited=True)
        self._last_large = (self._ticks, direction)
        return command

    def tick(self, contact: ContactState) -> PalmCommand:
        state = self.observe(contact)
        self._ticks += 1
        command = controller_tick(state, self.settings.gain, self.settings.rate_limit,
                                  self.gripper.palm_min, self.gripper.palm_max)
        command = self._limit_reversal(state.w, command)
        if command.saturated:
            self.saturated_ticks += 1
        return command
