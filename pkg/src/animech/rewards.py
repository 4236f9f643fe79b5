"""Reward formulation: imitation, regularization, limits, impact reduction.

Term conventions, with hats denoting reference quantities from the kinematic
target (state quantities expressed in the path frame):

    imitation        exp kernels on torso pose/velocity errors, negated
                     squared norms on joint pos/vel (legs and neck split),
                     contact agreement indicators, constant survival bonus
    regularization   -|tau|^2, -|qdd|^2, action rate and acceleration
                     penalties (legs and neck split)
    limits           control-barrier violations for actuator temperature and
                     joint range, foot-foot collision indicator
    impact           -(sum_i min(dv_iz^2, dv_max^2)), saturated so a single
                     contact spike cannot dominate the return

The total is the weighted sum; weights default to the standing/walking table
below and every term is exposed unweighted for telemetry.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields

import numpy as np

from animech.core.rotations import boxminus
from animech.refgen import KinematicTarget
from animech.thermal import ThermalCbfConfig, thermal_cbf_penalty

JOINT_LIMIT_MARGIN = 0.1  # rad
JOINT_LIMIT_GAMMA = 20.0  # 1/s
DV_MAX_DEFAULT = 1.0  # m/s

GROUP_IMITATION = (
    "torso_position_xy",
    "torso_orientation",
    "linear_vel_xy",
    "linear_vel_z",
    "angular_vel_xy",
    "angular_vel_z",
    "leg_joint_pos",
    "neck_joint_pos",
    "leg_joint_vel",
    "neck_joint_vel",
    "contact",
    "survival",
)
GROUP_REGULARIZATION = (
    "joint_torques",
    "joint_acc",
    "leg_action_rate",
    "neck_action_rate",
    "leg_action_acc",
    "neck_action_acc",
)
GROUP_LIMITS = ("neck_temperature", "joint_limits", "foot_collision")
GROUP_IMPACT = ("impact_reduction",)
ALL_TERMS = GROUP_IMITATION + GROUP_REGULARIZATION + GROUP_LIMITS + GROUP_IMPACT


@dataclass(frozen=True)
class RewardWeights:
    """(standing, walking) weight per term; single published values repeated."""

    torso_position_xy: tuple[float, float] = (1.0, 4.0)
    torso_orientation: tuple[float, float] = (2.0, 1.5)
    linear_vel_xy: tuple[float, float] = (1.5, 2.5)
    linear_vel_z: tuple[float, float] = (1.0, 1.0)
    # the published weight table has no entry for the angular-velocity-xy
    # kernel; it is computed but weighted zero
    angular_vel_xy: tuple[float, float] = (0.0, 0.0)
    angular_vel_z: tuple[float, float] = (1.5, 1.5)
    leg_joint_pos: tuple[float, float] = (15.0, 15.0)
    neck_joint_pos: tuple[float, float] = (40.0, 40.0)
    leg_joint_vel: tuple[float, float] = (1.0e-3, 1.0e-3)
    neck_joint_vel: tuple[float, float] = (0.5, 0.5)
    contact: tuple[float, float] = (2.0, 1.0)
    survival: tuple[float, float] = (20.0, 20.0)
    joint_torques: tuple[float, float] = (1.0e-3, 1.0e-3)
    joint_acc: tuple[float, float] = (2.5e-6, 2.5e-6)
    leg_action_rate: tuple[float, float] = (2.0, 5.0)
    neck_action_rate: tuple[float, float] = (5.0, 10.0)
    leg_action_acc: tuple[float, float] = (0.5, 1.0)
    neck_action_acc: tuple[float, float] = (15.0, 10.0)
    neck_temperature: tuple[float, float] = (2.0, 2.0)
    joint_limits: tuple[float, float] = (0.5, 0.2)
    foot_collision: tuple[float, float] = (10.0, 10.0)
    impact_reduction: tuple[float, float] = (2.5e-3, 2.5e-3)

    def for_mode(self, mode: str) -> dict[str, float]:
        col = 0 if mode == "standing" else 1
        return {f.name: getattr(self, f.name)[col] for f in fields(self)}

    def override(self, updates: dict[str, float | tuple[float, float]]):
        """New weights with some terms replaced (scalar applies to both modes)."""
        kw = {}
        for name, value in updates.items():
            if name not in {f.name for f in fields(self)}:
                raise KeyError(f"unknown reward term '{name}'")
            kw[name] = tuple(value) if isinstance(value, (tuple, list)) else (
                float(value),
                float(value),
            )
        return RewardWeights(**{**{f.name: getattr(self, f.name) for f in fields(self)}, **kw})


def format_weight_table(weights: RewardWeights | None = None) -> str:
    """Fixed-format dump of the weight table (standing / walking)."""
    w = weights or RewardWeights()
    lines = ["term                        standing    walking"]
    for f in fields(w):
        s, k = getattr(w, f.name)
        lines.append(f"{f.name:<26} {s:>10g} {k:>10g}")
    return "\n".join(lines)


@dataclass
class RewardBreakdown:
    terms: dict[str, float] = field(default_factory=dict)  # unweighted
    weighted: dict[str, float] = field(default_factory=dict)
    groups: dict[str, float] = field(default_factory=dict)  # weighted per group
    total: float = 0.0

    def merge(self, other: "RewardBreakdown") -> "RewardBreakdown":
        self.terms.update(other.terms)
        return self


def _sq(x) -> float:
    x = np.asarray(x, dtype=float)
    return float(np.dot(x.ravel(), x.ravel()))


# ---------------------------------------------------------------------------
# term groups


def imitation_terms(
    pos: np.ndarray,
    quat: np.ndarray,
    linvel: np.ndarray,
    angvel: np.ndarray,
    q: np.ndarray,
    qd: np.ndarray,
    contact_left: bool,
    contact_right: bool,
    target: KinematicTarget,
    leg_idx,
    neck_idx,
) -> RewardBreakdown:
    """Imitation rows; all pose quantities already in the path frame."""
    b = RewardBreakdown()
    t = b.terms
    t["torso_position_xy"] = float(
        np.exp(-200.0 * _sq(pos[:2] - target.pos[:2]))
    )
    t["torso_orientation"] = float(
        np.exp(-20.0 * _sq(boxminus(quat, target.quat)))
    )
    t["linear_vel_xy"] = float(np.exp(-8.0 * _sq(linvel[:2] - target.linvel[:2])))
    t["linear_vel_z"] = float(np.exp(-8.0 * _sq(linvel[2] - target.linvel[2])))
    t["angular_vel_xy"] = float(np.exp(-2.0 * _sq(angvel[:2] - target.angvel[:2])))
    t["angular_vel_z"] = float(np.exp(-2.0 * _sq(angvel[2] - target.angvel[2])))
    t["leg_joint_pos"] = -_sq(q[leg_idx] - target.q[leg_idx])
    t["neck_joint_pos"] = -_sq(q[neck_idx] - target.q[neck_idx])
    t["leg_joint_vel"] = -_sq(qd[leg_idx] - target.qd[leg_idx])
    t["neck_joint_vel"] = -_sq(qd[neck_idx] - target.qd[neck_idx])
    t["contact"] = float(
        int(contact_left == target.contact_left)
        + int(contact_right == target.contact_right)
    )
    t["survival"] = 1.0
    return b


def regularization_terms(
    action: np.ndarray,
    action_prev: np.ndarray,
    action_prev2: np.ndarray,
    torque: np.ndarray,
    qdd: np.ndarray,
    leg_idx,
    neck_idx,
) -> RewardBreakdown:
    b = RewardBreakdown()
    t = b.terms
    t["joint_torques"] = -_sq(torque)
    t["joint_acc"] = -_sq(qdd)
    rate = action - action_prev
    acc = action - 2.0 * action_prev + action_prev2
    t["leg_action_rate"] = -_sq(rate[leg_idx])
    t["neck_action_rate"] = -_sq(rate[neck_idx])
    t["leg_action_acc"] = -_sq(acc[leg_idx])
    t["neck_action_acc"] = -_sq(acc[neck_idx])
    return b


def joint_limit_violation(
    q: np.ndarray,
    qd: np.ndarray,
    q_lo: np.ndarray,
    q_hi: np.ndarray,
    margin: float = JOINT_LIMIT_MARGIN,
    gamma: float = JOINT_LIMIT_GAMMA,
) -> float:
    """Summed CBF violation magnitude over all joints, lower + upper limits."""
    lower = qd + gamma * (q - (q_lo + margin))
    upper = -qd + gamma * ((q_hi - margin) - q)
    return float(np.sum(np.minimum(lower, 0.0)) + np.sum(np.minimum(upper, 0.0)))


def feet_collide(
    center_left: np.ndarray, center_right: np.ndarray, radius_left: float,
    radius_right: float,
) -> bool:
    """Foot circles overlap (3-D distance: lateral offsets count)."""
    d = np.linalg.norm(np.asarray(center_left) - np.asarray(center_right))
    return bool(d < radius_left + radius_right)


def limit_terms(
    q: np.ndarray,
    qd: np.ndarray,
    q_lo: np.ndarray,
    q_hi: np.ndarray,
    temps_clipped: np.ndarray,
    t_dots: np.ndarray,
    thermal_cfg: ThermalCbfConfig,
    foot_contact_pair: bool,
    margin: float = JOINT_LIMIT_MARGIN,
    gamma: float = JOINT_LIMIT_GAMMA,
) -> RewardBreakdown:
    """Limits rows. Temperatures must be pre-clipped by the caller."""
    b = RewardBreakdown()
    t = b.terms
    t["neck_temperature"] = -float(
        sum(
            thermal_cbf_penalty(float(temp), float(td), thermal_cfg)
            for temp, td in zip(temps_clipped, t_dots)
        )
    )
    t["joint_limits"] = joint_limit_violation(q, qd, q_lo, q_hi, margin, gamma)
    t["foot_collision"] = -1.0 if foot_contact_pair else 0.0
    return b


def impact_term(
    dv_left: float, dv_right: float, dv_max: float = DV_MAX_DEFAULT
) -> RewardBreakdown:
    b = RewardBreakdown()
    b.terms["impact_reduction"] = -(
        min(dv_left**2, dv_max**2) + min(dv_right**2, dv_max**2)
    )
    return b


# ---------------------------------------------------------------------------
# totals


def total_reward(
    breakdowns: list[RewardBreakdown],
    weights: RewardWeights,
    mode: str,
) -> RewardBreakdown:
    """Weighted sum over all terms with the mode's weight column."""
    out = RewardBreakdown()
    for b in breakdowns:
        out.terms.update(b.terms)
    w = weights.for_mode(mode)
    for name in ALL_TERMS:
        value = out.terms.get(name, 0.0)
        out.weighted[name] = w[name] * value
    for group_name, names in (
        ("imitation", GROUP_IMITATION),
        ("regularization", GROUP_REGULARIZATION),
        ("limits", GROUP_LIMITS),
        ("impact", GROUP_IMPACT),
    ):
        out.groups[group_name] = float(
            sum(out.weighted.get(n, 0.0) for n in names)
        )
    out.total = float(sum(out.weighted.values()))
    return out
