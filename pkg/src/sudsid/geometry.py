"""Planar rigid-body poses, body velocities and the SE(2) exponential.

The translation-only group used by the linear passive swimmer and the
pushmepullyou is handled with the same types, keeping ``y`` and
``heading`` at zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# |omega * dt| below this uses the series form of the exponential
SMALL_ANGLE = 1e-8


def wrap_angle(theta: float) -> float:
    """Wrap an angle to the half-open interval (-pi, pi]."""
    rem = math.fmod(math.pi - theta, 2.0 * math.pi)
    if rem < 0.0:
        rem += 2.0 * math.pi
    return math.pi - rem


@dataclass(frozen=True)
class GroupElement:
    x: float = 0.0
    y: float = 0.0
    heading: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))
        object.__setattr__(self, "heading", wrap_angle(float(self.heading)))

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.heading])

    @classmethod
    def identity(cls) -> "GroupElement":
        return cls(0.0, 0.0, 0.0)


@dataclass(frozen=True)
class BodyVelocity:
    vx: float = 0.0
    vy: float = 0.0
    omega_z: float = 0.0

    def __post_init__(self):
        for name in ("vx", "vy", "omega_z"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise ValueError(f"BodyVelocity.{name} must be finite, got {value}")
            object.__setattr__(self, name, value)

    def as_array(self) -> np.ndarray:
        return np.array([self.vx, self.vy, self.omega_z])

    @classmethod
    def from_vector(cls, v, group_dim: int = 3) -> "BodyVelocity":
        """Build from a length-1 (x only) or length-3 vector."""
        v = np.asarray(v, dtype=float).ravel()
        if group_dim == 1:
            return cls(v[0], 0.0, 0.0)
        return cls(v[0], v[1], v[2])

    def to_vector(self, group_dim: int = 3) -> np.ndarray:
        if group_dim == 1:
            return np.array([self.vx])
        return self.as_array()


def compose(g1: GroupElement, g2: GroupElement) -> GroupElement:
    """SE(2) product g1 * g2."""
    c, s = math.cos(g1.heading), math.sin(g1.heading)
    return GroupElement(
        g1.x + c * g2.x - s * g2.y,
        g1.y + s * g2.x + c * g2.y,
        g1.heading + g2.heading,
    )


def inverse(g: GroupElement) -> GroupElement:
    c, s = math.cos(g.heading), math.sin(g.heading)
    return GroupElement(-c * g.x - s * g.y, s * g.x - c * g.y, -g.heading)


def world_to_body(g: GroupElement, gdot_world) -> BodyVelocity:
    """Express a world-frame velocity (xdot, ydot, headingdot) in the body frame of g."""
    xd, yd, wd = (float(v) for v in gdot_world)
    c, s = math.cos(g.heading), math.sin(g.heading)
    return BodyVelocity(c * xd + s * yd, -s * xd + c * yd, wd)


def body_to_world(g: GroupElement, xi: BodyVelocity) -> np.ndarray:
    c, s = math.cos(g.heading), math.sin(g.heading)
    return np.array([c * xi.vx - s * xi.vy, s * xi.vx + c * xi.vy, xi.omega_z])


def exp(xi: BodyVelocity, dt: float) -> GroupElement:
    """Group element reached from the identity by holding twist xi for time dt."""
    ux, uy, a = xi.vx * dt, xi.vy * dt, xi.omega_z * dt
    if abs(a) < SMALL_ANGLE:
        # second-order series of sin(a)/a and (1 - cos(a))/a
        return GroupElement(ux - 0.5 * a * uy, uy + 0.5 * a * ux, a)
    sa = math.sin(a) / a
    ca = 2.0 * math.sin(0.5 * a) ** 2 / a
    return GroupElement(sa * ux - ca * uy, ca * ux + sa * uy, a)


def log(g: GroupElement) -> BodyVelocity:
    """Twist xi with exp(xi, 1) == g (heading taken in (-pi, pi])."""
    a = g.heading
    if abs(a) < SMALL_ANGLE:
        half_cot = 1.0 - a * a / 12.0
    else:
        half_cot = 0.5 * a / math.tan(0.5 * a)
    return BodyVelocity(
        half_cot * g.x + 0.5 * a * g.y,
        -0.5 * a * g.x + half_cot * g.y,
        a,
    )


def exp_step(g: GroupElement, xi: BodyVelocity, dt: float) -> GroupElement:
    """Advance g by the body twist xi held constant over dt: g * exp(dt xi)."""
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    return compose(g, exp(xi, dt))
