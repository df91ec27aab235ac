"""Tests for the rolling-contact geometry."""

import math
from types import SimpleNamespace

import numpy as np
import pytest

import config
from errors import NoContactError, StepTooLargeError
from geometry import (
    LEFT,
    RIGHT,
    ContactType,
    ConvexProfile,
    FingerContact,
    FingerLine,
    GripperGeometry,
    ObjectPose,
    contact_arc_length,
    initial_state,
    roll_step,
    support_contact,
)
from palm_control import PalmController
from procedure import Phase, RollingSimulation


FLOOR = FingerLine(base=(-50.0, 0.0), angle=0.0, side=1)
GEOMETRY = GripperGeometry()


def _rotated_vertices(profile, phi):
    c, s = math.cos(phi), math.sin(phi)
    return profile.vertices() @ np.array([[c, s], [-s, c]])


class TestConvexProfile:

    def test_perimeters(self):
        assert ConvexProfile.circle(30).perimeter == pytest.approx(2 * math.pi * 15)
        hexagon = ConvexProfile.from_shape("hexagon")
        assert hexagon.perimeter == pytest.approx(2 * 6 * 15 * math.tan(math.pi / 6))
        square = ConvexProfile.from_shape("square")
        assert square.perimeter == pytest.approx(120.0)
        assert square.side_length == pytest.approx(30.0)

    def test_inradius_is_half_the_inner_diameter(self):
        for shape in config.SHAPES:
            assert ConvexProfile.from_shape(shape).inradius == pytest.approx(15.0)

    def test_invalid_profiles(self):
        with pytest.raises(ValueError):
            ConvexProfile.circle(0.0)
        with pytest.raises(ValueError):
            ConvexProfile.regular_polygon(2, 30.0)
        with pytest.raises(ValueError):
            ConvexProfile.from_shape("triangle")

    def test_polygon_is_centrally_symmetric_in_width(self):
        square = ConvexProfile.from_shape("square")
        for beta in np.linspace(0, 2 * math.pi, 37):
            assert square.width(beta) == pytest.approx(square.width(beta + math.pi))

    def test_arc_parameter_steps_by_one_side_per_vertex(self):
        hexagon = ConvexProfile.from_shape("hexagon")
        sigmas = [hexagon.boundary(math.radians(30 + 60 * k)).sigma for k in range(7)]
        assert np.allclose(np.diff(sigmas), hexagon.side_length)
        assert sigmas[-1] - sigmas[0] == pytest.approx(hexagon.perimeter)


class TestSupportContact:

    def test_circle_on_horizontal_line(self):
        contact = support_contact(ConvexProfile.circle(30), ObjectPose(0.0, 15.0, 0.0), FLOOR)
        assert contact.point == pytest.approx((0.0, 0.0), abs=1e-12)
        assert contact.contact_type is ContactType.ARC
        assert contact.distance == pytest.approx(50.0)

    def test_axis_aligned_square_gives_face_segment(self):
        square = ConvexProfile.from_shape("square")
        contact = support_contact(square, ObjectPose(0.0, 15.0, 0.0), FLOOR)
        assert contact.contact_type is ContactType.FACE
        start, end = contact.segment
        assert end - start == pytest.approx(30.0)
        assert (start, end) == pytest.approx((35.0, 65.0))

    def test_rotated_square_touches_at_lowest_vertex(self):
        square = ConvexProfile.from_shape("square")
        phi = math.radians(10)
        verts = _rotated_vertices(square, phi)
        pose = ObjectPose(0.0, -verts[:, 1].min(), phi)

        # dense boundary sampling as the reference
        world = verts + pose.center
        samples = np.vstack([world[i] + np.linspace(0, 1, 2000)[:, None] * (world[(i + 1) % 4] - world[i])
                             for i in range(4)])
        lowest = samples[np.argmin(samples[:, 1])]

        contact = support_contact(square, pose, FLOOR)
        assert contact.contact_type is ContactType.VERTEX
        assert contact.point == pytest.approx(tuple(lowest), abs=1e-6)

    def test_object_clear_of_line_is_no_contact(self):
        with pytest.raises(NoContactError):
            support_contact(ConvexProfile.circle(30), ObjectPose(0.0, 20.0, 0.0), FLOOR)

    def test_hexagon_pivots_one_exterior_angle_between_faces(self):
        hexagon = ConvexProfile.from_shape("hexagon")
        types, features = [], []
        for deg in np.linspace(30.0, 90.0, 61):
            phi = math.radians(deg)
            height = hexagon.support(-math.pi / 2 - phi)
            contact = support_contact(hexagon, ObjectPose(0.0, height, phi), FLOOR)
            types.append(contact.contact_type)
            features.append(contact.feature)

        assert types[0] is ContactType.FACE
        assert types[-1] is ContactType.FACE
        assert all(t is ContactType.VERTEX for t in types[1:-1])
        assert len(set(features[1:-1])) == 1

    def test_double_rack_and_pinion(self):
        circle = ConvexProfile.circle(30)
        r = circle.circumradius
        d = 3.0
        start = ObjectPose(0.0, 0.0, 0.0)
        moved = ObjectPose(0.0, 0.0, -d / r)

        bottom = FingerLine((-50.0, -r), 0.0, side=1)
        top = FingerLine((-50.0, r), 0.0, side=-1)
        bottom_moved = FingerLine((-50.0 - d, -r), 0.0, side=1)
        top_moved = FingerLine((-50.0 + d, r), 0.0, side=-1)

        b0, b1 = support_contact(circle, start, bottom), support_contact(circle, moved, bottom_moved)
        t0, t1 = support_contact(circle, start, top), support_contact(circle, moved, top_moved)

        # no slip at either contact for rotation d / r with the centre fixed
        assert b1.distance - b1.sigma == pytest.approx(b0.distance - b0.sigma, abs=1e-9)
        assert t1.distance + t1.sigma == pytest.approx(t0.distance + t0.sigma, abs=1e-9)
        assert abs(moved.phi - start.phi) == pytest.approx(d / r)


class TestRollStep:

    def test_zero_step_is_identity(self):
        state = initial_state(ConvexProfile.circle(30), GEOMETRY, 0.0, 85.0)
        assert roll_step(ConvexProfile.circle(30), state, 0.0, state.palm_width) is state

    def test_step_above_cap_is_rejected(self):
        state = initial_state(ConvexProfile.circle(30), GEOMETRY, 0.0, 85.0)
        with pytest.raises(StepTooLargeError):
            roll_step(ConvexProfile.circle(30), state, 0.02, state.palm_width)

    def test_initial_state_is_perpendicular_for_a_fitted_palm(self):
        state = initial_state(ConvexProfile.from_shape("square"), GEOMETRY, 0.3, 85.0)
        assert state.theta_right == pytest.approx(math.pi / 2)
        assert state.theta_left == pytest.approx(math.pi / 2, abs=1e-9)
        assert state.left.distance == pytest.approx(85.0, abs=1e-9)

    def test_fixed_palm_matches_cylinder_fit(self):
        state = initial_state(ConvexProfile.circle(30), GEOMETRY, 0.0, 85.0, palm_width=68.5)
        assert state.theta_left == pytest.approx(math.pi / 2, abs=1e-9)
        assert state.left.clearance == pytest.approx(0.0, abs=1e-9)


def _roll(profile, orientation, ticks, offset=0.0, pull_role=RIGHT, delta=None, geometry=GEOMETRY):
    start = initial_state(profile, geometry, orientation, config.L_MID_MM + offset, pull_role=pull_role)
    step = math.radians(config.FINGER_SPEED_DEG_S) / config.SAMPLE_RATE_HZ
    if delta is None:
        delta = -step if pull_role == RIGHT else step
    simulation = RollingSimulation(profile, geometry, PalmController())
    return [start] + list(simulation.run(start, [Phase("pull", pull_role, ticks, delta)]))


class TestRollingInvariants:

    def test_rolling_conservation_and_non_penetration(self):
        rng = np.random.default_rng(7)
        solved = 0
        for shape in config.SHAPES:
            profile = ConvexProfile.from_shape(shape)
            for _ in range(6):
                states = _roll(profile, rng.uniform(0, 2 * math.pi), 250, rng.uniform(-5, 5))
                for prev, curr in zip(states, states[1:]):
                    solved += 1
                    for role in (LEFT, RIGHT):
                        assert curr.rolling_constant(role) == pytest.approx(prev.rolling_constant(role), abs=1e-6)
                        assert curr.contact(role).clearance >= -config.PENETRATION_TOLERANCE_MM
                        assert abs(curr.contact(role).clearance) <= config.CONTACT_LOSS_TOLERANCE_MM
        assert solved >= 10_000

    def test_vertex_pivot_keeps_contact_fixed_on_finger(self):
        states = _roll(ConvexProfile.from_shape("square"), 0.4, 200)
        pivots = 0
        for prev, curr in zip(states, states[1:]):
            a, b = prev.contact(RIGHT), curr.contact(RIGHT)
            if a.contact_type is ContactType.VERTEX and b.contact_type is ContactType.VERTEX and a.feature == b.feature:
                pivots += 1
                assert b.distance == pytest.approx(a.distance, abs=1e-6)
        assert pivots > 0

    def test_circle_rolling_ignores_initial_orientation(self):
        circle = ConvexProfile.circle(30)
        a = _roll(circle, 0.0, 120)
        b = _roll(circle, 1.0, 120)
        for sa, sb in zip(a, b):
            assert sb.theta_left == pytest.approx(sa.theta_left, abs=1e-6)
            assert sb.theta_right == pytest.approx(sa.theta_right, abs=1e-6)
            assert sb.palm_width == pytest.approx(sa.palm_width, abs=1e-6)
            assert (sb.pose.x, sb.pose.y) == pytest.approx((sa.pose.x, sa.pose.y), abs=1e-6)
            assert sb.pose.phi - sa.pose.phi == pytest.approx(1.0, abs=1e-6)

    def test_mirrored_roll_gives_mirrored_log(self):
        circle = ConvexProfile.circle(30)
        even = GripperGeometry(config.FINGER_LENGTH_MM, 19.25, 19.25)
        right = _roll(circle, 0.0, 120, pull_role=RIGHT, geometry=even)
        left = _roll(circle, 0.0, 120, pull_role=LEFT, geometry=even)
        for r, l in zip(right, left):
            assert l.theta_left == pytest.approx(math.pi - r.theta_right, abs=1e-6)
            assert l.theta_right == pytest.approx(math.pi - r.theta_left, abs=1e-6)
            assert l.palm_width == pytest.approx(r.palm_width, abs=1e-6)
            assert l.pose.x == pytest.approx(-r.pose.x, abs=1e-6)
            assert l.pose.y == pytest.approx(r.pose.y, abs=1e-6)


def _stub(sigma, contact_type=ContactType.VERTEX, beta=0.0):
    contact = FingerContact((0.0, 0.0), sigma, 0.0, contact_type, 0.0, beta)
    return SimpleNamespace(contact=lambda role: contact)


class TestContactArcLength:

    def test_no_motion_is_zero(self):
        state = initial_state(ConvexProfile.circle(30), GEOMETRY, 0.0, 85.0)
        assert contact_arc_length([state, state], LEFT, ConvexProfile.circle(30)) == 0.0

    def test_single_face_contact_counts_the_face(self):
        square = ConvexProfile.from_shape("square")
        state = initial_state(square, GEOMETRY, 0.0, 85.0)
        assert state.left.contact_type is ContactType.FACE
        assert contact_arc_length([state], LEFT, square) == pytest.approx(30.0)

    def test_retouching_is_not_double_counted(self):
        circle = ConvexProfile.circle(30)
        states = [_stub(s) for s in (0.0, 10.0, 0.0, 10.0, 5.0)]
        assert contact_arc_length(states, LEFT, circle) == pytest.approx(10.0)

    def test_polygon_transitions_recover_the_perimeter(self):
        hexagon = ConvexProfile.from_shape("hexagon")
        side = hexagon.side_length
        states = [_stub(side * (k + 0.5)) for k in range(7)]
        assert contact_arc_length(states, LEFT, hexagon) == pytest.approx(hexagon.perimeter)

    def test_intervals_wrap_around_the_perimeter(self):
        circle = ConvexProfile.circle(30)
        p = circle.perimeter
        states = [_stub(p - 5.0), _stub(p + 5.0)]
        assert contact_arc_length(states, LEFT, circle) == pytest.approx(10.0)

    def test_hexagon_rolled_one_turn_covers_its_perimeter(self):
        hexagon = ConvexProfile.from_shape("hexagon")
        perimeter = hexagon.perimeter
        states, features, shifts = [], set(), []
        constant, first_sigma, last_sigma = None, None, None
        for deg in np.arange(0.0, 360.5, 0.5):
            phi = math.radians(deg)
            pose = ObjectPose(0.0, hexagon.support(-math.pi / 2 - phi), phi)
            contact = support_contact(hexagon, pose, FLOOR)
            sigma = contact.sigma
            if last_sigma is not None:
                sigma += perimeter * round((last_sigma - sigma) / perimeter)
            last_sigma = sigma
            if first_sigma is None:
                first_sigma = sigma
                constant = contact.distance - sigma
            # slide along the floor so no-slip holds at the contact
            shift = constant - (contact.distance - sigma)
            shifts.append(shift)
            pose = ObjectPose(shift, pose.y, phi)
            contact = support_contact(hexagon, pose, FLOOR)
            if contact.contact_type is ContactType.VERTEX:
                features.add(contact.feature % hexagon.side_count)
            states.append(_stub(sigma))
            assert contact.clearance == pytest.approx(0.0, abs=1e-9)

        assert len(features) == 6
        assert abs(last_sigma - first_sigma) == pytest.approx(perimeter, abs=1e-6)
        assert abs(pose.x) == pytest.approx(perimeter, abs=1e-6)
        # the centre never jumps, also across the six face transitions
        assert np.abs(np.diff(shifts)).max() < 0.5
        assert contact_arc_length(states, LEFT, hexagon) == pytest.approx(perimeter)
