"""
Planar rolling-contact geometry for prisms held between two finger lines.

Each finger is a line through its joint; its contact surface is offset
from that line toward the object. Rolling is quasi-static and without
slip: at each contact, travel along the finger equals the arc length
traversed on the object boundary (zero at a polygon vertex pivot).

Angles are global, measured counterclockwise from the +x palm baseline.
The left joint sits at (-w/2, 0), the right joint at (+w/2, 0).
"""

import logging
import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq

import config
from errors import ContactOffFingerError, GraspLostError, NoContactError, StepTooLargeError


logger = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi
LEFT = "left"
RIGHT = "right"
ROLE_SIDES = {LEFT: -1, RIGHT: 1}


def other_role(role: str) -> str:
    return RIGHT if role == LEFT else LEFT


def _rotate(v: np.ndarray, phi: float) -> np.ndarray:
    c, s = math.cos(phi), math.sin(phi)
    return np.array([c * v[0] - s * v[1], s * v[0] + c * v[1]])


class ProfileKind(str, Enum):
    CIRCLE = "circle"
    POLYGON = "regular-polygon"


class ContactType(str, Enum):
    VERTEX = "vertex"
    FACE = "face"
    ARC = "circular-arc"


SHAPE_SIDES = {"circle": 0, "square": 4, "hexagon": 6}


@dataclass(frozen=True)
class BoundaryPoint:
    """Support data of a profile in one body-frame normal direction."""
    rho: float
    point: np.ndarray
    sigma: float
    index: int


@dataclass(frozen=True)
class ConvexProfile:
    """
    Cross-section of a rollable prism, centered on its centroid.

    Polygon face normals sit at body angles 2*pi*k/N; vertex k sits at
    (2k+1)*pi/N, between faces k and k+1. The boundary arc parameter
    increases counterclockwise.
    """
    kind: ProfileKind
    circumradius: float
    side_count: int = 0
    name: str = ""

    def __post_init__(self):
        if not self.circumradius > 0:
            raise ValueError(f"circumradius must be positive, got {self.circumradius}")
        if self.kind is ProfileKind.POLYGON and self.side_count < 3:
            raise ValueError(f"polygon needs at least 3 sides, got {self.side_count}")

    @classmethod
    def circle(cls, diameter: float, name: str = "circle") -> "ConvexProfile":
        return cls(ProfileKind.CIRCLE, diameter / 2.0, 0, name)

    @classmethod
    def regular_polygon(cls, side_count: int, inner_diameter: float, name: str = "") -> "ConvexProfile":
        inradius = inner_diameter / 2.0
        return cls(ProfileKind.POLYGON, inradius / math.cos(math.pi / side_count), side_count, name)

    @classmethod
    def from_shape(cls, shape: str, inner_diameter: float = config.OBJECT_INNER_DIAMETER_MM) -> "ConvexProfile":
        """Build one of the named test objects (circle, square, hexagon)."""
        if shape not in SHAPE_SIDES:
            raise ValueError(f"Unknown shape: {shape}")
        sides = SHAPE_SIDES[shape]
        if sides == 0:
            return cls.circle(inner_diameter, name=shape)
        return cls.regular_polygon(sides, inner_diameter, name=shape)

    @property
    def is_circle(self) -> bool:
        return self.kind is ProfileKind.CIRCLE

    @property
    def inradius(self) -> float:
        if self.is_circle:
            return self.circumradius
        return self.circumradius * math.cos(math.pi / self.side_count)

    @property
    def side_length(self) -> float:
        if self.is_circle:
            return 0.0
        return 2.0 * self.circumradius * math.sin(math.pi / self.side_count)

    @property
    def perimeter(self) -> float:
        if self.is_circle:
            return TWO_PI * self.circumradius
        return 2.0 * self.side_count * self.inradius * math.tan(math.pi / self.side_count)

    def vertices(self) -> np.ndarray:
        """Body-frame vertex coordinates, shape (N, 2)."""
        n = self.side_count
        angles = (2.0 * np.arange(n) + 1.0) * math.pi / n
        return self.circumradius * np.column_stack([np.cos(angles), np.sin(angles)])

    def boundary(self, beta: float) -> BoundaryPoint:
        """
        Support value, support point and arc parameter for body-frame
        outward normal angle beta (unwrapped).
        """
        if self.is_circle:
            r = self.circumradius
            return BoundaryPoint(r, np.array([r * math.cos(beta), r * math.sin(beta)]), r * beta, 0)

        n = self.side_count
        k = math.floor(beta * n / TWO_PI)
        vertex_angle = (2 * k + 1) * math.pi / n
        point = self.circumradius * np.array([math.cos(vertex_angle), math.sin(vertex_angle)])
        rho = self.circumradius * math.cos(beta - vertex_angle)
        return BoundaryPoint(rho, point, self.side_length * (k + 0.5), k)

    def support(self, beta: float) -> float:
        return self.boundary(beta).rho

    def face_offset(self, beta: float) -> float:
        """Angular distance from beta to the nearest face normal (0 for circles)."""
        if self.is_circle:
            return math.inf
        pitch = TWO_PI / self.side_count
        d = beta / pitch
        return abs(d - round(d)) * pitch

    def face_index(self, beta: float) -> int:
        return int(round(beta * self.side_count / TWO_PI))

    def face_arc_interval(self, beta: float) -> Tuple[float, float]:
        """Arc-parameter interval of the face whose normal is nearest beta."""
        m = self.face_index(beta)
        side = self.side_length
        return side * (m - 0.5), side * (m + 0.5)

    def width(self, beta: float) -> float:
        """Caliper width along body direction beta."""
        return self.support(beta) + self.support(beta + math.pi)


@dataclass(frozen=True)
class ObjectPose:
    x: float
    y: float
    phi: float

    @property
    def center(self) -> np.ndarray:
        return np.array([self.x, self.y])


@dataclass(frozen=True)
class FingerLine:
    """
    A finger as a line segment from its joint.

    side=+1 puts the object on the left of the finger direction (the
    right-hand finger); side=-1 on the right (the left-hand finger).
    offset is the distance from the joint axis line to the contact surface.
    """
    base: Tuple[float, float]
    angle: float
    length: float = config.FINGER_LENGTH_MM
    side: int = 1
    offset: float = 0.0

    def __post_init__(self):
        if not self.length > 0:
            raise ValueError(f"finger length must be positive, got {self.length}")
        if self.side not in (1, -1):
            raise ValueError(f"side must be +1 or -1, got {self.side}")
        if not math.isfinite(self.angle):
            raise ValueError("finger angle must be finite")

    @property
    def origin(self) -> np.ndarray:
        return np.asarray(self.base, dtype=float)

    @property
    def direction(self) -> np.ndarray:
        return np.array([math.cos(self.angle), math.sin(self.angle)])

    @property
    def normal(self) -> np.ndarray:
        """Unit normal pointing toward the object."""
        return self.side * np.array([-math.sin(self.angle), math.cos(self.angle)])

    @property
    def contact_angle(self) -> float:
        """World angle of the object's outward normal at the contact."""
        return self.angle - self.side * math.pi / 2.0

    def point_at(self, distance: float) -> np.ndarray:
        return self.origin + distance * self.direction + self.offset * self.normal

    def clearance(self, point: np.ndarray) -> float:
        return float((point - self.origin) @ self.normal) - self.offset


@dataclass(frozen=True)
class FingerContact:
    point: Tuple[float, float]
    sigma: float
    distance: float
    contact_type: ContactType
    clearance: float
    beta: float
    feature: int = 0
    segment: Optional[Tuple[float, float]] = None


@dataclass(frozen=True)
class GripperGeometry:
    """Finger length and the joint-axis-to-surface offset of each finger."""
    finger_length: float = config.FINGER_LENGTH_MM
    left_offset: float = config.LEFT_SURFACE_OFFSET_MM
    right_offset: float = config.RIGHT_SURFACE_OFFSET_MM

    @classmethod
    def from_settings(cls, gripper: config.GripperSettings) -> "GripperGeometry":
        return cls(gripper.finger_length, gripper.left_offset, gripper.right_offset)

    def offset(self, role: str) -> float:
        return self.left_offset if role == LEFT else self.right_offset

    def joint(self, role: str, palm_width: float) -> Tuple[float, float]:
        return (ROLE_SIDES[role] * palm_width / 2.0, 0.0)

    def finger(self, role: str, palm_width: float, angle: float) -> FingerLine:
        return FingerLine(self.joint(role, palm_width), angle, self.finger_length,
                          ROLE_SIDES[role], self.offset(role))


@dataclass(frozen=True)
class ContactState:
    """Full quasi-static configuration of gripper and object."""
    pose: ObjectPose
    palm_width: float
    theta_left: float
    theta_right: float
    left: FingerContact
    right: FingerContact
    pull_role: str = RIGHT
    push_torque: float = config.PUSH_TORQUE_NM

    @property
    def push_role(self) -> str:
        return other_role(self.pull_role)

    def finger_angle(self, role: str) -> float:
        return self.theta_left if role == LEFT else self.theta_right

    def contact(self, role: str) -> FingerContact:
        return self.left if role == LEFT else self.right

    @property
    def contact_pull(self) -> FingerContact:
        return self.contact(self.pull_role)

    @property
    def contact_push(self) -> FingerContact:
        return self.contact(self.push_role)

    def rolling_constant(self, role: str) -> float:
        """Invariant of no-slip rolling: distance - side * sigma."""
        contact = self.contact(role)
        return contact.distance - ROLE_SIDES[role] * contact.sigma

    def with_roles(self, pull_role: str) -> "ContactState":
        return replace(self, pull_role=pull_role)


def _contact_unchecked(profile: ConvexProfile, pose: ObjectPose, line: FingerLine) -> FingerContact:
    beta = line.contact_angle - pose.phi
    bp = profile.boundary(beta)
    point = pose.center + _rotate(bp.point, pose.phi)
    u = line.direction
    distance = float((point - line.origin) @ u)
    clearance = line.clearance(point)

    segment = None
    if profile.is_circle:
        contact_type = ContactType.ARC
    elif profile.face_offset(beta) < config.FACE_ANGLE_TOLERANCE_RAD:
        contact_type = ContactType.FACE
        m = profile.face_index(beta)
        verts = profile.vertices()
        n = profile.side_count
        ends = [pose.center + _rotate(verts[(m - 1) % n], pose.phi),
                pose.center + _rotate(verts[m % n], pose.phi)]
        d = sorted(float((p - line.origin) @ u) for p in ends)
        segment = (d[0], d[1])
    else:
        contact_type = ContactType.VERTEX

    return FingerContact((float(point[0]), float(point[1])), bp.sigma, distance,
                         contact_type, clearance, beta, bp.index, segment)


def support_contact(
    profile: ConvexProfile,
    pose: ObjectPose,
    line: FingerLine,
    tolerance: float = config.CONTACT_LOSS_TOLERANCE_MM
) -> FingerContact:
    """
    Find where a posed profile touches a finger line.

    Args:
        profile: Object cross-section
        pose: Object pose in the palm frame
        line: Finger line (contact surface = line offset toward the object)
        tolerance: Allowed |clearance| for the contact to count

    Returns:
        FingerContact with the extremal boundary point, its arc parameter,
        distance along the finger and contact type; face contacts carry
        the full tangent segment as distances along the finger

    Raises:
        NoContactError: the object is clear of (or cuts through) the line
    """
    contact = _contact_unchecked(profile, pose, line)
    if abs(contact.clearance) > tolerance:
        raise NoContactError(
            f"Object is {contact.clearance:.3g} mm from the finger surface"
        )
    return contact


def _tangent_angle(
    profile: ConvexProfile,
    pose: ObjectPose,
    base: np.ndarray,
    side: int,
    offset: float,
    guess: float
) -> float:
    """Finger angle at which a finger on `base` just touches the posed object."""
    if profile.is_circle:
        points = pose.center[None, :]
        radii = np.array([offset + profile.circumradius])
    else:
        verts = profile.vertices()
        c, s = math.cos(pose.phi), math.sin(pose.phi)
        points = pose.center + verts @ np.array([[c, s], [-s, c]])
        radii = np.full(len(points), offset)

    d = points - base
    dist = np.hypot(d[:, 0], d[:, 1])
    if np.any(dist <= radii):
        raise GraspLostError("Object overlaps a finger joint")

    psi = np.arctan2(d[:, 1], d[:, 0])
    psi = psi + TWO_PI * np.round((guess - psi) / TWO_PI)
    candidates = psi - side * np.arcsin(radii / dist)
    return float(candidates.min() if side > 0 else candidates.max())


def _assemble(
    profile: ConvexProfile,
    geometry: GripperGeometry,
    pose: ObjectPose,
    palm_width: float,
    theta_left: float,
    theta_right: float,
    pull_role: str,
    push_torque: float
) -> ContactState:
    left = _contact_unchecked(profile, pose, geometry.finger(LEFT, palm_width, theta_left))
    right = _contact_unchecked(profile, pose, geometry.finger(RIGHT, palm_width, theta_right))
    return ContactState(pose, palm_width, theta_left, theta_right, left, right, pull_role, push_torque)


def _validate(state: ContactState, geometry: GripperGeometry) -> None:
    for role in (LEFT, RIGHT):
        angle = state.finger_angle(role)
        if not 0.0 < angle < math.pi:
            raise GraspLostError(f"{role} finger angle {math.degrees(angle):.2f} deg left (0, 180)")
        contact = state.contact(role)
        if contact.clearance < -config.PENETRATION_TOLERANCE_MM:
            raise GraspLostError(f"Object penetrates the {role} finger by {-contact.clearance:.3g} mm")
        if not 0.0 <= contact.distance <= geometry.finger_length:
            raise ContactOffFingerError(
                f"Contact on the {role} finger at {contact.distance:.2f} mm is off the finger"
            )


def _nearest_root(f: Callable[[float], float], x0: float, f0: float,
                  initial: float = 1e-3, limit: float = 0.5) -> float:
    """Root of f nearest x0, found by expanding a symmetric bracket."""
    step = initial
    while step <= limit:
        roots = []
        for sign in (1.0, -1.0):
            x1 = x0 + sign * step
            f1 = f(x1)
            if math.isfinite(f1) and f0 * f1 <= 0.0:
                lo, hi = sorted((x0, x1))
                roots.append(brentq(f, lo, hi, xtol=config.ORIENTATION_TOLERANCE_RAD, rtol=4 * np.finfo(float).eps))
        if roots:
            return min(roots, key=lambda r: abs(r - x0))
        step *= 2.0
    raise StepTooLargeError(f"No-slip solve found no root within {limit} rad of {x0:.6f}")


def initial_state(
    profile: ConvexProfile,
    geometry: GripperGeometry,
    orientation: float,
    contact_height: float,
    palm_width: Optional[float] = None,
    pull_role: str = RIGHT,
    push_torque: float = config.PUSH_TORQUE_NM
) -> ContactState:
    """
    Place the object between two perpendicular fingers.

    Args:
        profile: Object cross-section
        geometry: Finger length and surface offsets
        orientation: Initial object orientation (rad)
        contact_height: Desired contact distance along the left finger (mm)
        palm_width: Fixed palm width, or None to fit the palm to the object
        pull_role: Finger that pulls first
        push_torque: Pushing-finger torque setpoint (N*m)

    Returns:
        ContactState with the right finger perpendicular; the left finger
        is perpendicular too when the palm was fitted to the object
    """
    phi = orientation
    right_bp = profile.boundary(-phi)
    left_bp = profile.boundary(math.pi - phi)
    if palm_width is None:
        palm_width = right_bp.rho + left_bp.rho + geometry.left_offset + geometry.right_offset

    left_point = _rotate(left_bp.point, phi)
    cx = palm_width / 2.0 - geometry.right_offset - right_bp.rho
    cy = contact_height - left_point[1]
    pose = ObjectPose(cx, cy, phi)

    theta_right = math.pi / 2.0
    theta_left = _tangent_angle(profile, pose, np.asarray(geometry.joint(LEFT, palm_width)),
                                ROLE_SIDES[LEFT], geometry.left_offset, math.pi / 2.0)

    state = _assemble(profile, geometry, pose, palm_width, theta_left, theta_right, pull_role, push_torque)
    _validate(state, geometry)
    return state


def solve_configuration(
    profile: ConvexProfile,
    geometry: GripperGeometry,
    prev: ContactState,
    theta_pull: float,
    palm_width: float
) -> ContactState:
    """
    Quasi-static no-slip configuration for a new pull angle and palm width.

    The pulling finger fixes the object pose as a function of its
    orientation phi; the pushing finger is brought into tangency; phi is
    the root of the pushing finger's rolling residual.
    """
    if theta_pull == prev.finger_angle(prev.pull_role) and palm_width == prev.palm_width:
        return prev

    pull = prev.pull_role
    push = other_role(pull)
    pull_line = geometry.finger(pull, palm_width, theta_pull)
    push_base = np.asarray(geometry.joint(push, palm_width))
    push_side = ROLE_SIDES[push]
    k_pull = prev.rolling_constant(pull)
    k_push = prev.rolling_constant(push)
    push_guess = prev.finger_angle(push)
    u, n = pull_line.direction, pull_line.normal

    def place(phi: float) -> Tuple[ObjectPose, float, FingerContact]:
        bp = profile.boundary(pull_line.contact_angle - phi)
        s = k_pull + pull_line.side * bp.sigma
        x = _rotate(bp.point, phi)
        center = pull_line.origin + (geometry.offset(pull) + bp.rho) * n + (s - float(x @ u)) * u
        pose = ObjectPose(float(center[0]), float(center[1]), phi)
        theta = _tangent_angle(profile, pose, push_base, push_side, geometry.offset(push), push_guess)
        line = FingerLine(tuple(push_base), theta, geometry.finger_length, push_side, geometry.offset(push))
        return pose, theta, _contact_unchecked(profile, pose, line)

    def residual(phi: float) -> float:
        try:
            _, _, contact = place(phi)
        except GraspLostError:
            return math.nan
        return contact.distance - push_side * contact.sigma - k_push

    phi0 = prev.pose.phi
    f0 = residual(phi0)
    if not math.isfinite(f0):
        raise GraspLostError("Pushing finger cannot reach the object")
    phi = phi0 if abs(f0) < 1e-12 else _nearest_root(residual, phi0, f0)

    pose, theta_push, _ = place(phi)
    angles = {pull: theta_pull, push: theta_push}
    state = _assemble(profile, geometry, pose, palm_width, angles[LEFT], angles[RIGHT],
                      pull, prev.push_torque)
    _validate(state, geometry)
    return state


def roll_step(
    profile: ConvexProfile,
    state: ContactState,
    pull_angle_delta: float,
    palm_width: float,
    push_torque_setpoint: Optional[float] = None,
    geometry: GripperGeometry = GripperGeometry()
) -> ContactState:
    """
    Advance the configuration by a small pulling-finger rotation.

    Args:
        profile: Object cross-section
        state: Prior configuration
        pull_angle_delta: Pulling finger rotation (rad, |delta| <= 0.01)
        palm_width: Palm width for the new configuration (mm)
        push_torque_setpoint: Pushing torque to record, None keeps the prior one
        geometry: Finger length and surface offsets

    Returns:
        New ContactState under no-slip rolling on both contacts

    Raises:
        StepTooLargeError: step above the cap or the solve did not converge
        GraspLostError: a contact cannot be maintained
    """
    if abs(pull_angle_delta) > config.MAX_STEP_RAD + 1e-12:
        raise StepTooLargeError(
            f"Step of {pull_angle_delta:.4f} rad exceeds the {config.MAX_STEP_RAD} rad cap"
        )

    if push_torque_setpoint is not None and push_torque_setpoint != state.push_torque:
        state = replace(state, push_torque=push_torque_setpoint)

    theta_pull = state.finger_angle(state.pull_role) + pull_angle_delta
    return solve_configuration(profile, geometry, state, theta_pull, palm_width)


def contact_arc_length(
    states: Sequence[ContactState],
    role: str,
    profile: ConvexProfile
) -> float:
    """
    Object boundary arc that touched one finger over a trace.

    Touched intervals are merged modulo the perimeter so re-touching
    the same boundary is not counted twice. A face contact counts its
    whole face.

    Args:
        states: Time-ordered configurations of one run
        role: Finger to measure ('left' or 'right')
        profile: Object cross-section

    Returns:
        Arc length in mm, at most the perimeter
    """
    perimeter = profile.perimeter
    intervals: List[Tuple[float, float]] = []

    contacts = [s.contact(role) for s in states]
    for a, b in zip(contacts, contacts[1:]):
        lo, hi = sorted((a.sigma, b.sigma))
        if hi > lo:
            intervals.append((lo, hi))
    for c in contacts:
        if c.contact_type is ContactType.FACE:
            intervals.append(profile.face_arc_interval(c.beta))

    wrapped: List[Tuple[float, float]] = []
    for lo, hi in intervals:
        if hi - lo >= perimeter:
            return perimeter
        start = lo % perimeter
        end = start + (hi - lo)
        if end > perimeter:
            wrapped.append((start, perimeter))
            wrapped.append((0.0, end - perimeter))
        else:
            wrapped.append((start, end))

    total = 0.0
    current_lo, current_hi = None, None
    for lo, hi in sorted(wrapped):
        if current_hi is None or lo > current_hi:
            if current_hi is not None:
                total += current_hi - current_lo
            current_lo, current_hi = lo, hi
        else:
            current_hi = max(current_hi, hi)
    if current_hi is not None:
        total += current_hi - current_lo

    return min(total, perimeter)
