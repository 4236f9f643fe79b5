"""The moving planar reference frame that targets and observations live in.

The frame carries (x, y, yaw). While walking it advances by integrating the
commanded body-frame path velocity; while standing it relaxes toward the
midpoint between the feet. Either way it is kept within a bounded distance
and yaw gap of the torso so it can never run away from the character.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from animech.core.rotations import wrap_angle


@dataclass(frozen=True)
class PathFrameState:
    x: float = 0.0
    y: float = 0.0
    yaw: float = 0.0  # rad, wrapped to (-pi, pi]

    def __post_init__(self):
        object.__setattr__(self, "yaw", wrap_angle(self.yaw))


def advance_walking(
    pf: PathFrameState, v_cmd: tuple[float, float, float], dt: float
) -> PathFrameState:
    """Integrate a body-frame velocity command (vx, vy, omega) over dt."""
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    vx, vy, omega = v_cmd
    c, s = math.cos(pf.yaw), math.sin(pf.yaw)
    return PathFrameState(
        x=pf.x + dt * (c * vx - s * vy),
        y=pf.y + dt * (s * vx + c * vy),
        yaw=wrap_angle(pf.yaw + dt * omega),
    )


def converge_standing(
    pf: PathFrameState,
    foot_mid: tuple[float, float, float],
    dt: float,
    rate: float = 0.5,
) -> PathFrameState:
    """First-order pull toward the feet midpoint; never overshoots.

    Each component closes (1 - exp(-rate dt)) of its gap; the yaw gap is
    computed on the wrapped difference.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    if rate <= 0.0:
        raise ValueError("rate must be positive")
    k = 1.0 - math.exp(-rate * dt)
    return PathFrameState(
        x=pf.x + k * (foot_mid[0] - pf.x),
        y=pf.y + k * (foot_mid[1] - pf.y),
        yaw=wrap_angle(pf.yaw + k * wrap_angle(foot_mid[2] - pf.yaw)),
    )


def clamp_to_torso(
    pf: PathFrameState,
    torso: tuple[float, float, float],
    max_dist: float = 0.5,
    max_yaw: float = 0.8,
) -> PathFrameState:
    """Project the frame into a ball around the torso pose.

    Position is clamped radially, yaw independently on the wrapped gap
    (idempotent: points inside the bounds are untouched).
    """
    if max_dist <= 0.0:
        raise ValueError("max_dist must be positive")
    dx, dy = pf.x - torso[0], pf.y - torso[1]
    dist = math.hypot(dx, dy)
    x, y = pf.x, pf.y
    if dist > max_dist:
        scale = max_dist / dist
        x = torso[0] + dx * scale
        y = torso[1] + dy * scale
    dyaw = wrap_angle(pf.yaw - torso[2])
    if abs(dyaw) > max_yaw:
        dyaw = math.copysign(max_yaw, dyaw)
    return PathFrameState(x=x, y=y, yaw=wrap_angle(torso[2] + dyaw))
