"""Character description: links, joints, actuator limits, and thermal tags.

The description is the single source of truth consumed by the reference
generator, the simulator, and the runtime. It serializes to a plain JSON
document (schema in README). All geometry is planar: points are (x, z) in the
owning link's frame, x forward and z up, angles CCW in the x-z plane.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from animech.thermal import ThermalParams


@dataclass(frozen=True)
class FootGeometry:
    """Snowball foot: a circle around the link origin.

    Ground contact acts at the heel/toe points (-radius, 0) and (+radius, 0);
    the circle itself is used for the foot-foot collision indicator, with
    lateral_offset_y giving each foot's fixed out-of-plane position.
    """

    radius: float
    lateral_offset_y: float


@dataclass(frozen=True)
class LinkSpec:
    name: str
    mass: float  # kg
    com: tuple[float, float]  # m, link frame
    inertia: float  # kg m^2 about the com, lateral axis
    foot: FootGeometry | None = None


@dataclass(frozen=True)
class JointSpec:
    """Revolute joint about the lateral axis, connecting parent to child.

    The child link frame origin sits at `attach` (parent frame); the joint
    angle is the child frame rotation relative to the parent.
    """

    name: str
    parent: str
    child: str
    attach: tuple[float, float]
    q_min: float  # rad
    q_max: float  # rad
    torque_limit: float  # N m
    kp: float  # N m / rad
    kd: float  # N m s / rad
    group: str  # "leg" | "neck"
    thermal: ThermalParams | None = None  # None = athermal
    neck_pitch: bool = False  # the thermally critical joint


@dataclass(frozen=True)
class CharacterDescription:
    name: str
    root: str  # floating base link
    links: tuple[LinkSpec, ...]
    joints: tuple[JointSpec, ...]

    @property
    def joint_count(self) -> int:
        return len(self.joints)

    def link(self, name: str) -> LinkSpec:
        for l in self.links:
            if l.name == name:
                return l
        raise KeyError(name)

    def joint_index(self, name: str) -> int:
        for i, j in enumerate(self.joints):
            if j.name == name:
                return i
        raise KeyError(name)

    def joint_names(self) -> list[str]:
        return [j.name for j in self.joints]

    def leg_indices(self) -> list[int]:
        return [i for i, j in enumerate(self.joints) if j.group == "leg"]

    def neck_indices(self) -> list[int]:
        return [i for i, j in enumerate(self.joints) if j.group == "neck"]

    def thermal_indices(self) -> list[int]:
        return [i for i, j in enumerate(self.joints) if j.thermal is not None]

    def foot_links(self) -> tuple[LinkSpec, LinkSpec]:
        """(left, right), left being the lateral +y side."""
        feet = [l for l in self.links if l.foot is not None]
        if len(feet) != 2:
            raise ValueError("character does not have exactly two feet")
        feet.sort(key=lambda l: -l.foot.lateral_offset_y)
        return feet[0], feet[1]

    def q_limits(self):
        import numpy as np

        lo = np.array([j.q_min for j in self.joints])
        hi = np.array([j.q_max for j in self.joints])
        return lo, hi


def validate_character(desc: CharacterDescription) -> list[str]:
    """Return a list of invariant violations; empty iff the description is sound."""
    problems: list[str] = []
    link_names = [l.name for l in desc.links]
    if len(set(link_names)) != len(link_names):
        problems.append("duplicate link names")
    if desc.root not in link_names:
        problems.append(f"root link '{desc.root}' not among links")

    for l in desc.links:
        if not l.mass > 0.0:
            problems.append(f"link '{l.name}': mass must be strictly positive")
        if not l.inertia > 0.0:
            problems.append(f"link '{l.name}': inertia must be strictly positive")
        if l.foot is not None and not l.foot.radius > 0.0:
            problems.append(f"link '{l.name}': foot radius must be positive")

    children = set()
    for j in desc.joints:
        if j.parent not in link_names:
            problems.append(f"joint '{j.name}': unknown parent link '{j.parent}'")
        if j.child not in link_names:
            problems.append(f"joint '{j.name}': unknown child link '{j.child}'")
        if j.child == desc.root:
            problems.append(f"joint '{j.name}': root link cannot be a child")
        if j.child in children:
            problems.append(f"joint '{j.name}': link '{j.child}' has two parents")
        children.add(j.child)
        if not j.q_min < j.q_max:
            problems.append(f"joint '{j.name}': q_min must be < q_max")
        if not j.torque_limit > 0.0:
            problems.append(f"joint '{j.name}': torque limit must be positive")
        if j.kp < 0.0 or j.kd < 0.0:
            problems.append(f"joint '{j.name}': PD gains must be non-negative")
        if j.group not in ("leg", "neck"):
            problems.append(f"joint '{j.name}': unknown group '{j.group}'")
        if j.thermal is not None:
            if not j.thermal.alpha > 0.0:
                problems.append(f"joint '{j.name}': thermal alpha must be > 0")
            if j.thermal.beta < 0.0:
                problems.append(f"joint '{j.name}': thermal beta must be >= 0")

    for l in link_names:
        if l != desc.root and l not in children:
            problems.append(f"link '{l}' is not connected by any joint")

    n_feet = sum(1 for l in desc.links if l.foot is not None)
    if n_feet != 2:
        problems.append(f"expected exactly 2 foot links, found {n_feet}")
    n_neck = sum(1 for j in desc.joints if j.neck_pitch)
    if n_neck != 1:
        problems.append(f"expected exactly 1 neck-pitch joint, found {n_neck}")
    return problems


# ---------------------------------------------------------------------------
# JSON round trip


def to_json_dict(desc: CharacterDescription) -> dict:
    return {
        "name": desc.name,
        "root": desc.root,
        "links": [
            {
                "name": l.name,
                "mass": l.mass,
                "com": list(l.com),
                "inertia": l.inertia,
                **(
                    {
                        "foot": {
                            "radius": l.foot.radius,
                            "lateral_offset_y": l.foot.lateral_offset_y,
                        }
                    }
                    if l.foot is not None
                    else {}
                ),
            }
            for l in desc.links
        ],
        "joints": [
            {
                "name": j.name,
                "parent": j.parent,
                "child": j.child,
                "attach": list(j.attach),
                "q_min": j.q_min,
                "q_max": j.q_max,
                "torque_limit": j.torque_limit,
                "kp": j.kp,
                "kd": j.kd,
                "group": j.group,
                "neck_pitch": j.neck_pitch,
                "thermal": (
                    None
                    if j.thermal is None
                    else {
                        "alpha": j.thermal.alpha,
                        "beta": j.thermal.beta,
                        "t_ambient": j.thermal.t_ambient,
                    }
                ),
            }
            for j in desc.joints
        ],
    }


def from_json_dict(doc: dict) -> CharacterDescription:
    links = []
    for l in doc["links"]:
        foot = None
        if "foot" in l and l["foot"] is not None:
            foot = FootGeometry(
                radius=float(l["foot"]["radius"]),
                lateral_offset_y=float(l["foot"]["lateral_offset_y"]),
            )
        links.append(
            LinkSpec(
                name=l["name"],
                mass=float(l["mass"]),
                com=(float(l["com"][0]), float(l["com"][1])),
                inertia=float(l["inertia"]),
                foot=foot,
            )
        )
    joints = []
    for j in doc["joints"]:
        th = j.get("thermal")
        joints.append(
            JointSpec(
                name=j["name"],
                parent=j["parent"],
                child=j["child"],
                attach=(float(j["attach"][0]), float(j["attach"][1])),
                q_min=float(j["q_min"]),
                q_max=float(j["q_max"]),
                torque_limit=float(j["torque_limit"]),
                kp=float(j["kp"]),
                kd=float(j["kd"]),
                group=j["group"],
                neck_pitch=bool(j.get("neck_pitch", False)),
                thermal=(
                    None
                    if th is None
                    else ThermalParams(
                        alpha=float(th["alpha"]),
                        beta=float(th["beta"]),
                        t_ambient=float(th["t_ambient"]),
                    )
                ),
            )
        )
    return CharacterDescription(
        name=doc["name"], root=doc["root"], links=tuple(links), joints=tuple(joints)
    )


def save_character(desc: CharacterDescription, path: str | Path) -> None:
    Path(path).write_text(json.dumps(to_json_dict(desc), indent=2) + "\n")


def load_character(path: str | Path) -> CharacterDescription:
    desc = from_json_dict(json.loads(Path(path).read_text()))
    problems = validate_character(desc)
    if problems:
        raise ValueError("invalid character file: " + "; ".join(problems))
    return desc


# ---------------------------------------------------------------------------
# Default character: a planar snowman biped with a heavy head on a weak neck.


def default_character() -> CharacterDescription:
    """Planar biped: floating torso, hip/knee/ankle per leg, one neck joint.

    The head carries >25% of total mass so the neck actuator is the thermal
    bottleneck; its thermal coefficients are the identified neck values
    (alpha 0.038 1/s, beta 0.377, ambient 43.94 C).
    """
    neck_thermal = ThermalParams(alpha=0.038, beta=0.377, t_ambient=43.94)
    links = (
        LinkSpec("torso", mass=6.0, com=(0.0, 0.10), inertia=0.080),
        LinkSpec("head", mass=4.0, com=(0.0, 0.12), inertia=0.030),
        LinkSpec("l_thigh", mass=0.9, com=(0.0, -0.10), inertia=0.004),
        LinkSpec("l_shank", mass=0.6, com=(0.0, -0.09), inertia=0.003),
        LinkSpec(
            "l_foot",
            mass=0.5,
            com=(0.0, 0.0),
            inertia=0.004,
            foot=FootGeometry(radius=0.075, lateral_offset_y=0.07),
        ),
        LinkSpec("r_thigh", mass=0.9, com=(0.0, -0.10), inertia=0.004),
        LinkSpec("r_shank", mass=0.6, com=(0.0, -0.09), inertia=0.003),
        LinkSpec(
            "r_foot",
            mass=0.5,
            com=(0.0, 0.0),
            inertia=0.004,
            foot=FootGeometry(radius=0.075, lateral_offset_y=-0.07),
        ),
    )
    # Angles are CCW in x-z: positive hip swings the leg forward, the knee
    # flexes negative, positive ankle is dorsiflexion (toe up).
    def leg(side: str) -> tuple[JointSpec, JointSpec, JointSpec]:
        return (
            JointSpec(
                f"{side}_hip_pitch", "torso", f"{side}_thigh", (0.0, 0.0),
                q_min=-0.9, q_max=1.6, torque_limit=25.0, kp=100.0, kd=5.0,
                group="leg",
            ),
            JointSpec(
                f"{side}_knee", f"{side}_thigh", f"{side}_shank", (0.0, -0.20),
                q_min=-2.4, q_max=-0.02, torque_limit=25.0, kp=100.0, kd=5.0,
                group="leg",
            ),
            JointSpec(
                f"{side}_ankle", f"{side}_shank", f"{side}_foot", (0.0, -0.18),
                q_min=-1.3, q_max=1.3, torque_limit=16.0, kp=100.0, kd=2.0,
                group="leg",
            ),
        )

    joints = leg("l") + leg("r") + (
        JointSpec(
            "neck_pitch", "torso", "head", (0.0, 0.25),
            q_min=-0.9, q_max=0.9, torque_limit=4.0, kp=25.0, kd=1.0,
            group="neck", thermal=neck_thermal, neck_pitch=True,
        ),
    )
    return CharacterDescription(
        name="snowman-biped", root="torso", links=links, joints=joints
    )
