"""Reference generation: control inputs to full kinematic target states.

Maps the path-frame state, a control input (standing posture commands or a
walking velocity command), and the gait phase to a complete kinematic target:
torso pose and velocities in the path frame, joint targets from planar leg
IK, and per-foot contact flags. The walk cycle is parametric with a heel-toe
ankle profile: dorsiflexed (+) at touchdown, plantarflexed (-) at lift-off,
with the stance foot rolling over the heel/toe contact points accordingly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from animech.core.character import CharacterDescription
from animech.core.rotations import quat_from_pitch
from animech.pathframe import PathFrameState

STANDING = "standing"
WALKING = "walking"


class ReachabilityError(ValueError):
    """Commanded posture outside the legs' reachable workspace."""


@dataclass(frozen=True)
class ControlInput:
    mode: str  # STANDING | WALKING
    neck: tuple[float, ...] = (0.0,)  # rad, one per neck joint
    # standing channels
    torso_pitch: float = 0.0  # rad
    height: float | None = None  # m, absolute hip height; None = nominal
    # walking channels
    velocity: tuple[float, float, float] = (0.0, 0.0, 0.0)  # vx, vy, omega


@dataclass(frozen=True)
class KinematicTarget:
    """Full reference state, expressed in the path frame."""

    pos: np.ndarray  # (3,) torso position [x, y, z]
    pitch: float  # torso planar pitch, rad
    linvel: np.ndarray  # (3,)
    angvel: np.ndarray  # (3,)
    q: np.ndarray  # (n_joints,)
    qd: np.ndarray  # (n_joints,)
    contact_left: bool
    contact_right: bool
    speed_clamped: bool = False  # command exceeded config range and was clamped

    @property
    def quat(self) -> np.ndarray:
        return quat_from_pitch(self.pitch)


@dataclass(frozen=True)
class GaitParams:
    frequency: float = 1.8  # Hz
    duty_factor: float = 0.65  # stance fraction; > 0.5 gives double support
    step_length_gain: float = 0.3611  # s; stride = gain * |v|. duty/frequency
    # keeps the stance foot world-fixed.
    step_height: float = 0.05  # m
    ankle_amplitude: float = 0.2  # rad heel-toe profile; 0 disables the styling
    base_hip_height: float = 0.32  # m
    stance_offset: float = 0.012  # m; stride center ahead of the hips, putting
    # the support under the character's forward-riding CoM
    lean_gain: float = 0.12  # rad per m/s of commanded speed, leaning into travel

    def __post_init__(self):
        if not (0.5 < self.duty_factor < 1.0):
            raise ValueError("duty factor must be in (0.5, 1) for double support")
        if self.step_height < 0.0:
            raise ValueError("step height must be >= 0")


@dataclass(frozen=True)
class CommandRanges:
    speed_x: float = 0.4  # m/s, symmetric
    speed_y: float = 0.0  # m/s; zero for the sagittal character
    turn: float = 1.0  # rad/s
    height_delta: float = 0.05  # m about nominal
    torso_pitch: float = 0.2  # rad
    neck: float = 0.6  # rad


@dataclass(frozen=True)
class RefGenConfig:
    gait: GaitParams = field(default_factory=GaitParams)
    ranges: CommandRanges = field(default_factory=CommandRanges)
    resample_interval: tuple[float, float] = (2.0, 6.0)  # s, command hold time
    limit_margin: float = 0.1  # rad; emitted q stays inside limits by this much


def advance_phase(phase: float, frequency: float, dt: float) -> float:
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    return (phase + frequency * dt) % 1.0


def _smoothstep(s: float) -> float:
    s = min(1.0, max(0.0, s))
    return s * s * (3.0 - 2.0 * s)


def _bump(s: float) -> float:
    """C1 bump: 0 -> 1 -> 0 over s in [0, 1] with zero end slopes."""
    return _smoothstep(2.0 * s) if s < 0.5 else _smoothstep(2.0 - 2.0 * s)


@dataclass(frozen=True)
class _LegChain:
    hip_idx: int
    knee_idx: int
    ankle_idx: int
    hip_attach: tuple[float, float]  # torso frame
    l_thigh: float
    l_shank: float
    foot_radius: float


class RefGen:
    """Owns the character geometry and gait/command configuration."""

    def __init__(self, desc: CharacterDescription, cfg: RefGenConfig | None = None):
        self.desc = desc
        self.cfg = cfg or RefGenConfig()
        self.left, self.right = self._resolve_legs(desc)
        self.neck_idx = desc.neck_indices()
        self._q_lo, self._q_hi = desc.q_limits()

    @staticmethod
    def _resolve_legs(desc: CharacterDescription) -> tuple[_LegChain, _LegChain]:
        chains = []
        for foot in desc.foot_links():
            ankle = next(j for j in desc.joints if j.child == foot.name)
            knee = next(j for j in desc.joints if j.child == ankle.parent)
            hip = next(j for j in desc.joints if j.child == knee.parent)
            if hip.parent != desc.root:
                raise ValueError("leg chains must hang off the root link")
            chains.append(
                _LegChain(
                    hip_idx=desc.joint_index(hip.name),
                    knee_idx=desc.joint_index(knee.name),
                    ankle_idx=desc.joint_index(ankle.name),
                    hip_attach=hip.attach,
                    l_thigh=math.hypot(*knee.attach),
                    l_shank=math.hypot(*ankle.attach),
                    foot_radius=foot.foot.radius,
                )
            )
        return chains[0], chains[1]

    # -- workspace -----------------------------------------------------------

    def reachable_heights(self) -> tuple[float, float]:
        """Feasible hip heights for flat feet, honoring knee limits + margin."""
        leg = self.left
        m = self.cfg.limit_margin
        knee = self.desc.joints[leg.knee_idx]
        # knee angle is negative flexion; usable flexion range after margin
        f_min = max(0.0, -(knee.q_max - m))
        f_max = -(knee.q_min + m)
        def reach(flex: float) -> float:
            return math.sqrt(
                leg.l_thigh**2
                + leg.l_shank**2
                + 2.0 * leg.l_thigh * leg.l_shank * math.cos(flex)
            )
        return reach(f_max), reach(f_min)

    def nominal_height(self) -> float:
        return self.cfg.gait.base_hip_height

    # -- IK -------------------------------------------------------------------

    def _leg_ik(
        self,
        leg: _LegChain,
        torso_pitch: float,
        hip_world: tuple[float, float],
        ankle_world: tuple[float, float],
        foot_pitch: float,
    ) -> tuple[float, float, float]:
        """Planar two-link IK; returns (hip, knee, ankle) joint angles.

        The knee points forward (+x); the ankle closes the chain so the foot
        reaches `foot_pitch` in the world.
        """
        dx = ankle_world[0] - hip_world[0]
        dz = ankle_world[1] - hip_world[1]
        r = math.hypot(dx, dz)
        l1, l2 = leg.l_thigh, leg.l_shank
        r = min(max(r, abs(l1 - l2) + 1e-6), l1 + l2 - 1e-6)
        cos_flex = (r * r - l1 * l1 - l2 * l2) / (2.0 * l1 * l2)
        flex = math.acos(min(1.0, max(-1.0, cos_flex)))
        delta = math.atan2(dx, -dz)  # direction angle of hip->ankle, 0 = down
        beta = math.atan2(l2 * math.sin(flex), l1 + l2 * math.cos(flex))
        q_hip = delta + beta - torso_pitch
        q_knee = -flex
        q_ankle = foot_pitch - (torso_pitch + q_hip + q_knee)
        return q_hip, q_knee, q_ankle

    def _clamp_q(self, q: np.ndarray) -> np.ndarray:
        m = self.cfg.limit_margin
        return np.clip(q, self._q_lo + m, self._q_hi - m)

    def _neck_targets(self, g: ControlInput) -> np.ndarray:
        neck = np.zeros(len(self.neck_idx))
        for k, value in enumerate(g.neck[: len(self.neck_idx)]):
            neck[k] = value
        return neck

    # -- standing --------------------------------------------------------------

    def generate_standing(self, pf: PathFrameState, g: ControlInput) -> KinematicTarget:
        if g.mode != STANDING:
            raise ValueError("control input is not a standing command")
        height = self.nominal_height() if g.height is None else g.height
        lo, hi = self.reachable_heights()
        if not (lo <= height <= hi):
            raise ReachabilityError(
                f"commanded hip height {height:.3f} m outside feasible "
                f"interval [{lo:.3f}, {hi:.3f}] m"
            )
        n = self.desc.joint_count
        q = np.zeros(n)
        for leg in (self.left, self.right):
            hip_world = (
                leg.hip_attach[0] * math.cos(g.torso_pitch)
                - leg.hip_attach[1] * math.sin(g.torso_pitch),
                height
                + leg.hip_attach[0] * math.sin(g.torso_pitch)
                + leg.hip_attach[1] * math.cos(g.torso_pitch),
            )
            ankle_world = (hip_world[0], 0.0)  # feet flat, directly under the hips
            q_hip, q_knee, q_ankle = self._leg_ik(
                leg, g.torso_pitch, hip_world, ankle_world, foot_pitch=0.0
            )
            q[leg.hip_idx] = q_hip
            q[leg.knee_idx] = q_knee
            q[leg.ankle_idx] = q_ankle
        for k, idx in enumerate(self.neck_idx):
            q[idx] = self._neck_targets(g)[k]
        q = self._clamp_q(q)
        return KinematicTarget(
            pos=np.array([0.0, 0.0, height]),
            pitch=g.torso_pitch,
            linvel=np.zeros(3),
            angvel=np.zeros(3),
            q=q,
            qd=np.zeros(n),
            contact_left=True,
            contact_right=True,
        )

    # -- walking ----------------------------------------------------------------

    def _stance_window(self, phase: float, offset: float) -> tuple[bool, float]:
        """(in_stance, progress) for a foot whose cycle starts at `offset`."""
        duty = self.cfg.gait.duty_factor
        local = (phase - offset) % 1.0
        if local < duty:
            return True, local / duty
        return False, (local - duty) / (1.0 - duty)

    def _foot_profile(self, phase: float, offset: float, stride: float):
        """Path-frame (x, z, foot_pitch, in_stance) of one foot."""
        gait = self.cfg.gait
        amp = gait.ankle_amplitude
        rho = self.left.foot_radius
        in_stance, s = self._stance_window(phase, offset)
        roll_dir = 1.0 if stride >= 0.0 else -1.0  # reverse gait strikes toe-first
        z_edge = rho * math.sin(amp)  # rolled-contact height at both stance ends
        if in_stance:
            x = stride * (0.5 - s)
            nu = roll_dir * amp * (1.0 - 2.0 * _smoothstep(s))
            z = rho * abs(math.sin(nu))
        else:
            # cubic Hermite in x keeps the foot speed continuous at both ends
            slope = -stride * (1.0 - gait.duty_factor) / gait.duty_factor
            h00 = 2 * s**3 - 3 * s**2 + 1
            h10 = s**3 - 2 * s**2 + s
            h01 = -2 * s**3 + 3 * s**2
            h11 = s**3 - s**2
            x = h00 * (-0.5 * stride) + h10 * slope + h01 * (0.5 * stride) + h11 * slope
            nu = roll_dir * (-amp + 2.0 * amp * _smoothstep(s))
            z = z_edge + gait.step_height * _bump(s)
        return x, z, nu, in_stance

    def generate_walking(
        self, pf: PathFrameState, g: ControlInput, phase: float
    ) -> KinematicTarget:
        if g.mode != WALKING:
            raise ValueError("control input is not a walking command")
        ranges = self.cfg.ranges
        vx, vy, om = g.velocity
        clamped = (
            abs(vx) > ranges.speed_x + 1e-12
            or abs(vy) > ranges.speed_y + 1e-12
            or abs(om) > ranges.turn + 1e-12
        )
        vx = min(max(vx, -ranges.speed_x), ranges.speed_x)
        vy = min(max(vy, -ranges.speed_y), ranges.speed_y)
        om = min(max(om, -ranges.turn), ranges.turn)

        target = self._walking_pose(g, phase, vx, vy, om)
        # joint velocity targets by central difference through the generator
        dphi = 1e-4
        q_plus = self._walking_pose(g, (phase + dphi) % 1.0, vx, vy, om).q
        q_minus = self._walking_pose(g, (phase - dphi) % 1.0, vx, vy, om).q
        dq = q_plus - q_minus
        # contact transitions produce a jump; central difference across one is
        # meaningless, so suppress outliers instead of emitting spikes
        dq[np.abs(dq) > 0.1] = 0.0
        qd = dq / (2.0 * dphi) * self.cfg.gait.frequency
        return replace(target, qd=qd, speed_clamped=clamped)

    def _walking_pose(
        self, g: ControlInput, phase: float, vx: float, vy: float, om: float
    ) -> KinematicTarget:
        gait = self.cfg.gait
        height = gait.base_hip_height
        stride = gait.step_length_gain * abs(vx)
        direction = 1.0 if vx >= 0.0 else -1.0
        pitch = -gait.lean_gain * vx
        n = self.desc.joint_count
        q = np.zeros(n)
        contacts = []
        for leg, offset in ((self.left, 0.0), (self.right, 0.5)):
            x, z, nu, in_stance = self._foot_profile(phase, offset, direction * stride)
            hip_world = (leg.hip_attach[0], height + leg.hip_attach[1])
            q_hip, q_knee, q_ankle = self._leg_ik(
                leg,
                pitch,
                hip_world,
                (hip_world[0] + x + gait.stance_offset, z),
                foot_pitch=nu,
            )
            q[leg.hip_idx] = q_hip
            q[leg.knee_idx] = q_knee
            q[leg.ankle_idx] = q_ankle
            contacts.append(in_stance)
        for k, idx in enumerate(self.neck_idx):
            q[idx] = self._neck_targets(g)[k]
        q = self._clamp_q(q)
        return KinematicTarget(
            pos=np.array([0.0, 0.0, height]),
            pitch=pitch,
            linvel=np.array([vx, vy, 0.0]),
            angvel=np.array([0.0, 0.0, om]),
            q=q,
            qd=np.zeros(n),
            contact_left=contacts[0],
            contact_right=contacts[1],
        )

    def generate(
        self, pf: PathFrameState, g: ControlInput, phase: float
    ) -> KinematicTarget:
        if g.mode == STANDING:
            return self.generate_standing(pf, g)
        return self.generate_walking(pf, g, phase)


# ---------------------------------------------------------------------------
# Command randomization


def randomize_control(
    rng: np.random.Generator, mode: str, cfg: RefGenConfig, nominal_height: float
) -> ControlInput:
    """Uniform sample of a control input within the configured ranges."""
    r = cfg.ranges
    neck = (float(rng.uniform(-r.neck, r.neck)),)
    if mode == STANDING:
        return ControlInput(
            mode=STANDING,
            neck=neck,
            torso_pitch=float(rng.uniform(-r.torso_pitch, r.torso_pitch)),
            height=float(
                nominal_height + rng.uniform(-r.height_delta, r.height_delta)
            ),
        )
    return ControlInput(
        mode=WALKING,
        neck=neck,
        velocity=(
            float(rng.uniform(-r.speed_x, r.speed_x)),
            float(rng.uniform(-r.speed_y, r.speed_y)) if r.speed_y > 0 else 0.0,
            float(rng.uniform(-r.turn, r.turn)) if r.turn > 0 else 0.0,
        ),
    )


class ControlSampler:
    """Piecewise-constant random commands, resampled every few seconds."""

    def __init__(
        self,
        rng: np.random.Generator,
        mode: str,
        cfg: RefGenConfig,
        nominal_height: float,
    ):
        self.rng = rng
        self.mode = mode
        self.cfg = cfg
        self.nominal_height = nominal_height
        self._time_left = 0.0
        self.current = self._sample()
        self._reset_hold()

    def _sample(self) -> ControlInput:
        return randomize_control(self.rng, self.mode, self.cfg, self.nominal_height)

    def _reset_hold(self):
        lo, hi = self.cfg.resample_interval
        self._time_left = float(self.rng.uniform(lo, hi))

    def advance(self, dt: float) -> ControlInput:
        self._time_left -= dt
        if self._time_left <= 0.0:
            self.current = self._sample()
            self._reset_hold()
        return self.current


# ---------------------------------------------------------------------------
# Reference-clip import: JSON array of timestamped targets at 50 Hz.

CLIP_RATE_HZ = 50.0


def target_to_json(t: KinematicTarget) -> dict:
    return {
        "pos": t.pos.tolist(),
        "pitch": t.pitch,
        "linvel": t.linvel.tolist(),
        "angvel": t.angvel.tolist(),
        "q": t.q.tolist(),
        "qd": t.qd.tolist(),
        "contact_left": t.contact_left,
        "contact_right": t.contact_right,
    }


def target_from_json(doc: dict) -> KinematicTarget:
    return KinematicTarget(
        pos=np.array(doc["pos"], dtype=float),
        pitch=float(doc["pitch"]),
        linvel=np.array(doc["linvel"], dtype=float),
        angvel=np.array(doc["angvel"], dtype=float),
        q=np.array(doc["q"], dtype=float),
        qd=np.array(doc["qd"], dtype=float),
        contact_left=bool(doc["contact_left"]),
        contact_right=bool(doc["contact_right"]),
    )


def load_reference_clip(path: str | Path) -> list[KinematicTarget]:
    """Load a time-sampled target sequence (fixed 50 Hz records)."""
    doc = json.loads(Path(path).read_text())
    records = doc["samples"] if isinstance(doc, dict) else doc
    out = []
    for k, rec in enumerate(records):
        if "time_s" in rec:
            expected = k / CLIP_RATE_HZ
            if abs(rec["time_s"] - expected) > 1e-6:
                raise ValueError(
                    f"sample {k}: time {rec['time_s']} is not on the 50 Hz grid"
                )
        out.append(target_from_json(rec))
    return out
