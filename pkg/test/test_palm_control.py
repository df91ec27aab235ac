"""Tests for the prismatic palm controller."""

import math

import numpy as np
import pytest

import config
from errors import SingularAngleError
from geometry import ConvexProfile, GripperGeometry, initial_state
from palm_control import (
    GripperState,
    PalmController,
    controller_tick,
    error_ratio,
    estimate_object_position,
    object_roll_offset,
    palm_correction,
    pull_frame_angle,
)


def _state(w, theta_pull, d_theta=0.0, dw=None, pull_role="right"):
    state = GripperState.from_angles(w, theta_pull, theta_pull + d_theta, pull_role)
    if dw is None:
        return state
    return GripperState(state.w, state.theta_pull, state.theta_push, state.l, state.l_roll,
                        pull_role, state.l_mid, dw)


class TestErrorRatio:

    @pytest.mark.parametrize("l, theta, expected", [
        (85.0, math.pi / 2, -85.0),
        (85.0, math.pi / 6, -170.0),
        (42.5, math.pi / 2, -42.5),
    ])
    def test_examples(self, l, theta, expected):
        assert error_ratio(l, theta) == pytest.approx(expected)

    @pytest.mark.parametrize("theta", [0.01, math.pi - 0.01, 0.0])
    def test_singular_angles_rejected(self, theta):
        with pytest.raises(SingularAngleError):
            error_ratio(85.0, theta)

    def test_small_angle_linearisation(self):
        for d_theta in np.linspace(-0.01, 0.01, 41):
            if d_theta == 0:
                continue
            assert abs(math.sin(-d_theta) + d_theta) / abs(d_theta) < 2e-5


class TestObjectPosition:

    @pytest.mark.parametrize("w, theta, expected", [
        (100.0, math.pi / 2, 85.0),
        (100.0, math.pi / 3, 60.0),
        (68.5, math.pi / 2, 85.0),
    ])
    def test_examples(self, w, theta, expected):
        assert estimate_object_position(w, theta) == pytest.approx(expected)

    def test_roll_offset(self):
        assert object_roll_offset(100.0, math.pi / 2) == pytest.approx(0.0, abs=1e-12)
        assert object_roll_offset(100.0, math.pi / 3) == pytest.approx(25.0)

    def test_out_of_finger_estimate_warns(self, caplog):
        with caplog.at_level("WARNING", logger="palm_control"):
            estimate_object_position(150.0, math.pi - 0.1, l_mid=85.0, finger_length=132.0)
        assert "outside the finger" in caplog.text


class TestPalmCorrection:

    def test_perpendicular_example(self):
        assert palm_correction(_state(100.0, math.pi / 2, 0.01)) == pytest.approx(-0.85)

    def test_oblique_example(self):
        expected = (50.0 / math.sqrt(3) - 85.0 * 2.0 / math.sqrt(3)) * 0.02
        assert expected == pytest.approx(-1.386, abs=1e-3)
        assert palm_correction(_state(100.0, math.pi / 3, 0.02)) == pytest.approx(expected, rel=1e-9)

    def test_parallel_fingers_need_no_correction(self):
        for theta in np.linspace(0.3, math.pi - 0.3, 7):
            assert palm_correction(_state(90.0, theta)) == 0.0

    def test_equals_error_ratio_of_estimate(self):
        d_theta = 0.01
        for theta in np.linspace(0.1, math.pi - 0.1, 100):
            for w in np.linspace(50.0, 150.0, 100):
                state = _state(w, theta, d_theta)
                composed = error_ratio(estimate_object_position(w, theta), theta) * state.d_theta
                assert palm_correction(state) == pytest.approx(composed, rel=1e-12)

    def test_larger_push_angle_narrows_palm(self):
        for theta in np.linspace(0.1, math.pi - 0.1, 25):
            for w in np.linspace(50.0, 150.0, 11):
                assert palm_correction(_state(w, theta, 0.005)) < 0

    def test_singular_state_rejected(self):
        state = GripperState(100.0, 0.01, 0.02, 85.0, 50.0, "right")
        with pytest.raises(SingularAngleError):
            palm_correction(state)


class TestControllerTick:

    def test_no_error_keeps_width(self):
        command = controller_tick(_state(100.0, math.pi / 2))
        assert command.width == 100.0
        assert not command.saturated
        assert not command.rate_limited

    def test_command_clamped_at_upper_limit(self):
        command = controller_tick(_state(149.5, math.pi / 2, dw=5.0))
        assert command.width == config.PALM_MAX_MM
        assert command.saturated
        assert command.rate_limited

    def test_rate_limit(self):
        command = controller_tick(_state(100.0, math.pi / 2, dw=-10.0), gain=1.0, rate_limit=2.0)
        assert command.width == pytest.approx(98.0)
        assert command.rate_limited
        assert not command.saturated

    def test_gain_scales_correction(self):
        command = controller_tick(_state(100.0, math.pi / 2, dw=-1.0), gain=0.8)
        assert command.width == pytest.approx(99.2)


class TestPullFrame:

    def test_pull_frame_mirrors_for_right_pull(self):
        assert pull_frame_angle(math.radians(46), "right") == pytest.approx(math.radians(134))
        assert pull_frame_angle(math.radians(46), "left") == pytest.approx(math.radians(46))

    def test_observe_perpendicular_start(self):
        state = initial_state(ConvexProfile.circle(30), GripperGeometry(), 0.0, 85.0)
        gripper = PalmController().observe(state)
        assert gripper.theta_pull == pytest.approx(math.pi / 2)
        assert gripper.d_theta == pytest.approx(0.0, abs=1e-9)
        assert gripper.l == pytest.approx(85.0)
        assert gripper.theta_target == gripper.theta_pull


class _Scripted(PalmController):
    """Controller fed a fixed sequence of dw values instead of contacts."""

    def __init__(self, corrections):
        super().__init__()
        self.corrections = list(corrections)
        self.width = 100.0
        self._dw = 0.0

    def observe(self, contact):
        return _state(self.width, math.pi / 2, dw=self._dw)

    def run(self):
        widths = [self.width]
        for dw in self.corrections:
            self._dw = dw
            self.width = self.tick(None).width
            widths.append(self.width)
        return np.array(widths)


class TestReversalLimit:

    def test_hard_reversal_is_cut_inside_the_window(self):
        controller = _Scripted([1.0, -1.0, -1.0, 1.0])
        steps = np.diff(controller.run())
        assert steps == pytest.approx([0.8, -0.09, -0.09, 0.8])
        assert controller.reversal_limited_ticks == 2

    def test_reversal_allowed_after_the_window(self):
        controller = _Scripted([1.0] + [0.0] * 9 + [-1.0])
        steps = np.diff(controller.run())
        assert steps[-1] == pytest.approx(-0.8)
        assert controller.reversal_limited_ticks == 0

    def test_small_steps_pass_unchanged(self):
        controller = _Scripted([1.0, -0.1, 0.1, -0.1])
        steps = np.diff(controller.run())
        assert steps == pytest.approx([0.8, -0.08, 0.08, -0.08])

    def test_chattering_corrections_never_alternate_hard(self):
        rng = np.random.default_rng(0)
        controller = _Scripted(rng.choice([-2.5, 2.5], size=200))
        steps = np.diff(controller.run())
        large = np.flatnonzero(np.abs(steps) > 0.1)
        assert len(large) > 5
        for i, j in zip(large[:-1], large[1:]):
            assert j - i >= config.CONTROLLER_REVERSAL_TICKS or np.sign(steps[i]) == np.sign(steps[j])
