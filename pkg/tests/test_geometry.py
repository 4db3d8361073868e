import math

import numpy as np
import pytest
from hypothesis import given, settings
import hypothesis.strategies as st

from sudsid.geometry import (
    BodyVelocity, GroupElement, body_to_world, compose, exp, exp_step, inverse, log,
    world_to_body, wrap_angle,
)

coord = st.floats(-10, 10, allow_nan=False)
angle = st.floats(-3 * math.pi, 3 * math.pi, allow_nan=False)
rate = st.floats(-5, 5, allow_nan=False)
poses = st.builds(GroupElement, coord, coord, angle)
twists = st.builds(BodyVelocity, rate, rate, rate)


def close(g1, g2, tol):
    dh = wrap_angle(g1.heading - g2.heading)
    return abs(g1.x - g2.x) < tol and abs(g1.y - g2.y) < tol and abs(dh) < tol


def euler_oracle(xi, dt, steps):
    """Fine forward-Euler integration of the world-frame kinematics."""
    x = y = th = 0.0
    h = dt / steps
    for _ in range(steps):
        c, s = math.cos(th), math.sin(th)
        x, y, th = (x + h * (c * xi.vx - s * xi.vy),
                    y + h * (s * xi.vx + c * xi.vy),
                    th + h * xi.omega_z)
    return GroupElement(x, y, th)


class TestGroupElement:
    @pytest.mark.parametrize("theta, wrapped", [
        (math.pi, math.pi), (-math.pi, math.pi), (3 * math.pi, math.pi),
        (4.0, 4.0 - 2 * math.pi), (0.5, 0.5),
    ])
    def test_heading_wrapped(self, theta, wrapped):
        assert GroupElement(0, 0, theta).heading == pytest.approx(wrapped, abs=1e-15)

    @given(poses)
    def test_identity_is_neutral(self, g):
        e = GroupElement.identity()
        assert compose(e, g) == g
        assert close(compose(g, e), g, 1e-15)

    @given(poses)
    def test_inverse(self, g):
        assert close(compose(g, inverse(g)), GroupElement.identity(), 1e-12)

    def test_translation_adds(self):
        assert compose(GroupElement(1, 0, 0), GroupElement(1, 0, 0)) == GroupElement(2, 0, 0)

    @given(poses, poses, poses)
    def test_associative(self, a, b, c):
        assert close(compose(compose(a, b), c), compose(a, compose(b, c)), 1e-11)


class TestVelocityFrames:
    def test_identity_pose(self):
        assert world_to_body(GroupElement(), (1, 0, 0)) == BodyVelocity(1, 0, 0)

    def test_quarter_turn(self):
        # oracle: R(-pi/2) @ [1, 0]
        rot = np.array([[0.0, 1.0], [-1.0, 0.0]])
        expected = rot @ np.array([1.0, 0.0])
        v = world_to_body(GroupElement(5, -2, math.pi / 2), (1, 0, 0))
        np.testing.assert_allclose([v.vx, v.vy], expected, atol=1e-15)
        assert v.omega_z == 0.0

    @given(angle, rate)
    def test_angular_rate_invariant(self, theta, w):
        assert world_to_body(GroupElement(0, 0, theta), (0, 0, w)).omega_z == w

    @given(poses, twists)
    def test_round_trip(self, g, xi):
        back = world_to_body(g, body_to_world(g, xi))
        np.testing.assert_allclose(back.as_array(), xi.as_array(), atol=1e-14)

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError):
            BodyVelocity(float("nan"), 0, 0)


class TestExpStep:
    def test_zero_twist(self):
        g = GroupElement(1, 2, 0.3)
        assert close(exp_step(g, BodyVelocity(), 0.7), g, 1e-15)

    def test_pure_translation(self):
        assert exp_step(GroupElement(), BodyVelocity(1, 0, 0), 0.5) == GroupElement(0.5, 0, 0)

    def test_matches_fine_euler(self):
        xi = BodyVelocity(1, 0, math.pi)
        oracle = euler_oracle(xi, 1.0, 100_000)
        got = exp_step(GroupElement(), xi, 1.0)
        # forward Euler at 1e5 steps carries O(1e-5) error; compare with its
        # Richardson extrapolation instead of the raw run
        oracle2 = euler_oracle(xi, 1.0, 200_000)
        rich = 2 * oracle2.as_array() - oracle.as_array()
        np.testing.assert_allclose(got.as_array(), rich, atol=1e-6)
        assert close(got, GroupElement(0, 2 / math.pi, math.pi), 1e-14)

    def test_rejects_nonpositive_dt(self):
        with pytest.raises(ValueError):
            exp_step(GroupElement(), BodyVelocity(1, 0, 0), 0.0)

    @given(poses, twists, st.floats(0.01, 1.0), st.floats(0.01, 1.0))
    def test_one_parameter_subgroup(self, g, xi, a, b):
        once = exp_step(g, xi, a + b)
        twice = exp_step(exp_step(g, xi, a), xi, b)
        assert close(once, twice, 1e-12 * max(1.0, abs(g.x) + abs(g.y)))

    @given(poses, poses, twists, st.floats(0.01, 1.0))
    def test_left_equivariance(self, h, g, xi, dt):
        lhs = exp_step(compose(h, g), xi, dt)
        rhs = compose(h, exp_step(g, xi, dt))
        assert close(lhs, rhs, 1e-11)

    def test_small_angle_branch_continuous(self):
        xi_lo = BodyVelocity(1.0, 0.5, 0.999e-8)
        xi_hi = BodyVelocity(1.0, 0.5, 1.001e-8)
        lo, hi = exp(xi_lo, 1.0), exp(xi_hi, 1.0)
        # the heading differs by 2e-11; translation must be continuous across the switch
        np.testing.assert_allclose([lo.x, lo.y], [hi.x, hi.y], atol=1e-11)

    @settings(max_examples=200)
    @given(twists)
    def test_log_inverts_exp(self, xi):
        if abs(xi.omega_z) >= math.pi:
            return
        np.testing.assert_allclose(log(exp(xi, 1.0)).as_array(), xi.as_array(), atol=1e-12)
