"""Training/evaluation environment around the planar physics kernel.

One step runs the 600 Hz substep loop (first-order-hold action upsampling,
low-pass filtering, PD torques, contact, thermal propagation), then advances
the gait phase and path frame, generates the kinematic target for the new
time, and scores the full reward breakdown. Episodes terminate early when a
body link (head, torso, upper legs) touches the ground or the state goes
non-finite.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from animech import rewards
from animech.core.character import CharacterDescription
from animech.core.rotations import (
    boxminus,
    multiply as rot_multiply,
    pitch_from_quat,
    quat_from_pitch,
    quat_from_yaw,
)
from animech.pathframe import (
    PathFrameState,
    advance_walking,
    clamp_to_torso,
    converge_standing,
)
from animech.refgen import (
    STANDING,
    WALKING,
    ControlInput,
    KinematicTarget,
    RefGen,
    RefGenConfig,
)
from animech.sim import model as planar_model
from animech.sim.model import PlanarModel, build_model
from animech.thermal import ThermalCbfConfig

TERMINATED_BODY_CONTACT = "body-contact"
TERMINATED_NAN = "nan-state"
TERMINATED_EXTERNAL = "external"
CONTACT_FORCE_THRESHOLD = 1.0  # N


@dataclass(frozen=True)
class EnvConfig:
    physics_dt: float = 1.0 / 600.0
    control_dt: float = 1.0 / 50.0
    gravity: float = 9.81
    contact_stiffness: float = 1.2e4  # N/m
    contact_damping: float = 100.0  # N s/m
    friction: float = 0.8
    tangent_stiffness: float = 6.0e3
    tangent_damping: float = 100.0
    action_filter_cutoff_hz: float = 37.5
    disturbance_force: tuple[float, float] = (0.0, 80.0)  # N, horizontal
    disturbance_interval: tuple[float, float] = (2.0, 5.0)  # s
    termination_links: tuple[str, ...] = ("head", "torso", "l_thigh", "r_thigh")
    reset_joint_noise: float = 0.05  # rad
    reset_height_noise: float = 0.02  # m
    obs_noise_q: float = 0.005
    obs_noise_qd: float = 0.05
    obs_noise_vel: float = 0.02
    dv_max: float = 1.0  # m/s, impact-term saturation
    pathframe_rate: float = 0.5  # 1/s, standing convergence
    pathframe_max_dist: float = 0.5  # m
    pathframe_max_yaw: float = 0.8  # rad
    planar_commands: bool = True  # zero lateral/turn commands (sagittal model)

    @property
    def n_substeps(self) -> int:
        k = self.control_dt / self.physics_dt
        n = int(round(k))
        if abs(k - n) > 1e-9 or n < 1:
            raise ValueError("control_dt must be an integer multiple of physics_dt")
        return n


@dataclass(frozen=True)
class SimState:
    pos: np.ndarray  # (3,) torso position, world; y fixed 0 in planar mode
    quat: np.ndarray  # (4,) torso orientation (w, x, y, z)
    linvel: np.ndarray  # (3,)
    angvel: np.ndarray  # (3,)
    q: np.ndarray  # (n,)
    qd: np.ndarray  # (n,)
    temps: np.ndarray  # (n,) C
    contact_left: bool
    contact_right: bool
    phase: float
    path_frame: PathFrameState
    time: float
    # integration auxiliaries carried so trajectories replay exactly
    filt_action: np.ndarray = None
    prev_action: np.ndarray = None
    prev_action2: np.ndarray = None
    contact_anchor: np.ndarray = None
    anchor_active: np.ndarray = None

    @property
    def pitch(self) -> float:
        return pitch_from_quat(self.quat)


@dataclass(frozen=True)
class StepResult:
    state: SimState
    reward: rewards.RewardBreakdown
    terminated: bool
    reason: str | None
    dv: tuple[float, float]  # per-foot max |vertical velocity change| (m/s)
    observation: np.ndarray
    target: KinematicTarget = None
    torque: np.ndarray = None


class PlanarEnv:
    """Owns the model, reward config, and one mutable control input."""

    def __init__(
        self,
        desc: CharacterDescription,
        cfg: EnvConfig | None = None,
        refgen_cfg: RefGenConfig | None = None,
        weights: rewards.RewardWeights | None = None,
        thermal_cfg: ThermalCbfConfig | None = None,
        mode: str = STANDING,
    ):
        self.desc = desc
        self.cfg = cfg or EnvConfig()
        self.model: PlanarModel = build_model(desc, self.cfg.termination_links)
        self.refgen = RefGen(desc, refgen_cfg)
        self.weights = weights or rewards.RewardWeights()
        self.thermal_cfg = thermal_cfg or ThermalCbfConfig()
        self.mode = mode
        self.rng = np.random.default_rng(0)
        self.training = False  # observation noise (+ disturbances, when enabled)
        self.disturbances_enabled = True
        self._next_disturbance = np.inf
        self._control: ControlInput = self._neutral_control(mode)
        self._standing_cache: tuple[ControlInput, KinematicTarget] | None = None
        self.n = desc.joint_count
        self.leg_idx = np.array(desc.leg_indices(), dtype=int)
        self.neck_idx = np.array(desc.neck_indices(), dtype=int)
        self.thermal_idx = np.array(desc.thermal_indices(), dtype=int)
        dt = self.cfg.physics_dt
        rc = 1.0 / (2.0 * np.pi * self.cfg.action_filter_cutoff_hz)
        self.filter_alpha = dt / (dt + rc)

    # -- control -------------------------------------------------------------

    def _neutral_control(self, mode: str) -> ControlInput:
        if mode == STANDING:
            return ControlInput(mode=STANDING)
        return ControlInput(mode=WALKING)

    def set_mode(self, mode: str) -> None:
        if mode not in (STANDING, WALKING):
            raise ValueError(f"unknown mode '{mode}'")
        self.mode = mode
        self._control = self._neutral_control(mode)
        self._standing_cache = None

    def set_control(self, g: ControlInput) -> None:
        if g.mode != self.mode:
            raise ValueError(f"control mode '{g.mode}' != env mode '{self.mode}'")
        if self.cfg.planar_commands and g.mode == WALKING:
            g = replace(g, velocity=(g.velocity[0], 0.0, 0.0))
        self._control = g

    @property
    def control(self) -> ControlInput:
        return self._control

    # -- reset ---------------------------------------------------------------

    def reset(self, rng: np.random.Generator | None = None, mode: str | None = None) -> SimState:
        if mode is not None:
            self.set_mode(mode)
        if rng is not None:
            self.rng = rng
        rng = self.rng
        ref = self.refgen.generate_standing(
            PathFrameState(), self._neutral_control(STANDING)
        )
        q = ref.q + rng.uniform(
            -self.cfg.reset_joint_noise, self.cfg.reset_joint_noise, self.n
        )
        lo, hi = self.model.q_lo, self.model.q_hi
        q = np.clip(q, lo + 0.01, hi - 0.01)

        x = np.zeros(3 + self.n)
        x[1] = ref.pos[2]
        x[3:] = q
        # settle the base so the lowest contact point starts on the ground,
        # then lift by the sampled height noise
        low = self._lowest_contact_z(x)
        x[1] += -low + rng.uniform(0.0, self.cfg.reset_height_noise)

        temps = self.model.th_tamb.copy()
        for j in self.thermal_idx:
            temps[j] = rng.uniform(self.thermal_cfg.t_clip_min, self.thermal_cfg.t_max)

        feet_mid = self._feet_midpoint(x)
        state = SimState(
            pos=np.array([x[0], 0.0, x[1]]),
            quat=quat_from_pitch(x[2]),
            linvel=np.zeros(3),
            angvel=np.zeros(3),
            q=x[3:].copy(),
            qd=np.zeros(self.n),
            temps=temps,
            contact_left=True,
            contact_right=True,
            phase=0.0,
            path_frame=PathFrameState(x=feet_mid[0], y=feet_mid[1], yaw=feet_mid[2]),
            time=0.0,
            filt_action=x[3:].copy(),
            prev_action=x[3:].copy(),
            prev_action2=x[3:].copy(),
            contact_anchor=np.zeros(len(self.model.cp_link)),
            anchor_active=np.zeros(len(self.model.cp_link), dtype=np.uint8),
        )
        if self.training and self.cfg.disturbance_force[1] > 0.0:
            self._next_disturbance = float(rng.uniform(*self.cfg.disturbance_interval))
        else:
            self._next_disturbance = np.inf
        return state

    def _lowest_contact_z(self, x: np.ndarray) -> float:
        origins, angles, _ = planar_model.forward_kinematics(self.model, x)
        zs = []
        for cidx in range(len(self.model.cp_link)):
            i = self.model.cp_link[cidx]
            u = planar_model.rot(angles[i]) @ self.model.cp_point[cidx]
            zs.append(origins[i][1] + u[1])
        return float(min(zs))

    def _feet_midpoint(self, x: np.ndarray) -> tuple[float, float, float]:
        origins, _, _ = planar_model.forward_kinematics(self.model, x)
        l, r = self.model.foot_link
        mx = 0.5 * (origins[l][0] + origins[r][0])
        return (mx, 0.0, 0.0)

    # -- stepping --------------------------------------------------------------

    def _planar_vectors(self, state: SimState):
        x = np.empty(3 + self.n)
        x[0] = state.pos[0]
        x[1] = state.pos[2]
        x[2] = pitch_from_quat(state.quat)
        x[3:] = state.q
        v = np.empty(3 + self.n)
        v[0] = state.linvel[0]
        v[1] = state.linvel[2]
        v[2] = -state.angvel[1]  # planar CCW rate embeds as omega_y = -thetadot
        v[3:] = state.qd
        return x, v

    def apply_disturbance(
        self, rng: np.random.Generator, state: SimState, force: float | None = None
    ) -> SimState:
        """Horizontal impulse at the torso COM (force held for one control step)."""
        lo, hi = self.cfg.disturbance_force
        if force is None:
            force = float(rng.uniform(lo, hi)) * (1.0 if rng.random() < 0.5 else -1.0)
        if force == 0.0:
            return state
        x, v = self._planar_vectors(state)
        v2 = planar_model.apply_impulse(self.model, x, v, force * self.cfg.control_dt)
        return replace(
            state,
            linvel=np.array([v2[0], 0.0, v2[1]]),
            angvel=np.array([0.0, -v2[2], 0.0]),
            qd=v2[3:].copy(),
        )

    def step(self, state: SimState, action: np.ndarray) -> StepResult:
        from animech.sim import kernel  # resolved once at package import

        cfg = self.cfg
        action = np.ascontiguousarray(np.asarray(action, dtype=float))
        if action.shape != (self.n,):
            raise ValueError(f"action must have shape ({self.n},)")
        if not np.all(np.isfinite(action)):
            raise ValueError("action must be finite")

        if self.training and self.disturbances_enabled and state.time >= self._next_disturbance:
            state = self.apply_disturbance(self.rng, state)
            self._next_disturbance = state.time + float(
                self.rng.uniform(*cfg.disturbance_interval)
            )

        x, v = self._planar_vectors(state)
        temps = state.temps.copy()
        filt = state.filt_action.copy()
        anchor = state.contact_anchor.copy()
        active = state.anchor_active.copy()
        mean_tau = np.zeros(self.n)
        mean_tausq = np.zeros(self.n)

        ok, dv_l, dv_r, fn_l, fn_r, _, _ = kernel.run_substeps(
            self.model,
            x,
            v,
            temps,
            filt,
            anchor,
            active,
            state.prev_action,
            action,
            cfg.n_substeps,
            cfg.physics_dt,
            self.filter_alpha,
            cfg.gravity,
            cfg.contact_stiffness,
            cfg.contact_damping,
            cfg.friction,
            cfg.tangent_stiffness,
            cfg.tangent_damping,
            mean_tau,
            mean_tausq,
        )

        time = state.time + cfg.control_dt
        g = self._control
        if self.mode == WALKING:
            phase = (state.phase + self.refgen.cfg.gait.frequency * cfg.control_dt) % 1.0
            pf = advance_walking(state.path_frame, g.velocity, cfg.control_dt)
        else:
            phase = state.phase
            pf = converge_standing(
                state.path_frame,
                self._feet_midpoint(x) if ok else (0.0, 0.0, 0.0),
                cfg.control_dt,
                cfg.pathframe_rate,
            )
        if ok:
            pf = clamp_to_torso(
                pf, (x[0], 0.0, 0.0), cfg.pathframe_max_dist, cfg.pathframe_max_yaw
            )

        contact_left = fn_l > CONTACT_FORCE_THRESHOLD
        contact_right = fn_r > CONTACT_FORCE_THRESHOLD
        next_state = SimState(
            pos=np.array([x[0], 0.0, x[1]]),
            quat=quat_from_pitch(x[2]),
            linvel=np.array([v[0], 0.0, v[1]]),
            angvel=np.array([0.0, -v[2], 0.0]),
            q=x[3:].copy(),
            qd=v[3:].copy(),
            temps=temps,
            contact_left=bool(contact_left),
            contact_right=bool(contact_right),
            phase=phase,
            path_frame=pf,
            time=time,
            filt_action=filt,
            prev_action=action.copy(),
            prev_action2=state.prev_action.copy(),
            contact_anchor=anchor,
            anchor_active=active,
        )

        if not ok:
            obs = np.zeros(self.observation_size())
            return StepResult(
                state=next_state,
                reward=rewards.RewardBreakdown(total=0.0),
                terminated=True,
                reason=TERMINATED_NAN,
                dv=(dv_l, dv_r),
                observation=obs,
                torque=mean_tau,
            )

        target = self.refgen.generate(pf, g, phase)
        breakdown = self._score(
            state, next_state, target, action, mean_tau, mean_tausq, (dv_l, dv_r), x
        )
        terminated, reason = self._check_termination(x)
        obs = self.observe(next_state)
        return StepResult(
            state=next_state,
            reward=breakdown,
            terminated=terminated,
            reason=reason,
            dv=(dv_l, dv_r),
            observation=obs,
            target=target,
            torque=mean_tau,
        )

    # -- reward assembly -------------------------------------------------------

    def _state_in_path_frame(self, state: SimState):
        pf = state.path_frame
        c, s = np.cos(pf.yaw), np.sin(pf.yaw)
        dx, dy = state.pos[0] - pf.x, state.pos[1] - pf.y
        pos = np.array([c * dx + s * dy, -s * dx + c * dy, state.pos[2]])
        quat = rot_multiply(quat_from_yaw(-pf.yaw), state.quat)
        vx, vy = state.linvel[0], state.linvel[1]
        linvel = np.array([c * vx + s * vy, -s * vx + c * vy, state.linvel[2]])
        return pos, quat, linvel, state.angvel

    def _foot_centers(self, x: np.ndarray):
        origins, _, _ = planar_model.forward_kinematics(self.model, x)
        l, r = self.model.foot_link
        left = np.array([origins[l][0], self.model.foot_y[0], origins[l][1]])
        right = np.array([origins[r][0], self.model.foot_y[1], origins[r][1]])
        return left, right

    def _score(
        self, state, next_state, target, action, mean_tau, mean_tausq, dv, x
    ) -> rewards.RewardBreakdown:
        pos, quat, linvel, angvel = self._state_in_path_frame(next_state)
        imit = rewards.imitation_terms(
            pos,
            quat,
            linvel,
            angvel,
            next_state.q,
            next_state.qd,
            next_state.contact_left,
            next_state.contact_right,
            target,
            self.leg_idx,
            self.neck_idx,
        )
        qdd = (next_state.qd - state.qd) / self.cfg.control_dt
        reg = rewards.regularization_terms(
            action,
            state.prev_action,
            state.prev_action2,
            mean_tau,
            qdd,
            self.leg_idx,
            self.neck_idx,
        )
        t_clip = self.thermal_cfg.clip(next_state.temps[self.thermal_idx])
        t_dots = np.array(
            [
                -self.model.th_alpha[j] * (next_state.temps[j] - self.model.th_tamb[j])
                + self.model.th_beta[j] * mean_tausq[j]
                for j in self.thermal_idx
            ]
        )
        left, right = self._foot_centers(x)
        colliding = rewards.feet_collide(
            left, right, self.model.foot_radius[0], self.model.foot_radius[1]
        )
        lim = rewards.limit_terms(
            next_state.q,
            next_state.qd,
            self.model.q_lo,
            self.model.q_hi,
            t_clip,
            t_dots,
            self.thermal_cfg,
            colliding,
        )
        imp = rewards.impact_term(dv[0], dv[1], self.cfg.dv_max)
        return rewards.total_reward([imit, reg, lim, imp], self.weights, self.mode)

    def _check_termination(self, x: np.ndarray):
        origins, angles, _ = planar_model.forward_kinematics(self.model, x)
        for pidx in range(len(self.model.probe_link)):
            i = self.model.probe_link[pidx]
            u = planar_model.rot(angles[i]) @ self.model.probe_point[pidx]
            if origins[i][1] + u[1] < 0.0:
                return True, TERMINATED_BODY_CONTACT
        return False, None

    # -- observations ------------------------------------------------------------

    def observation_size(self, mode: str | None = None) -> int:
        mode = mode or self.mode
        base = 3 + 3 + 3 + 3 + self.n * 4 + len(self.thermal_idx)
        return base + (1 if mode == WALKING else 0)

    def observe(self, state: SimState) -> np.ndarray:
        """Layout: [p^PF(3), log3(theta^PF)(3), v^R(3), w^R(3), q(n), qd(n),
        a_prev(n), a_prev2(n), T_clipped(n_thermal), phase(walking only)]."""
        pos, quat, linvel, angvel = self._state_in_path_frame(state)
        ori = boxminus(quat, np.array([1.0, 0.0, 0.0, 0.0]))
        # root-frame velocities: rotate the world velocity by -pitch in-plane
        pitch = state.pitch
        c, s = np.cos(-pitch), np.sin(-pitch)
        v_root = np.array(
            [
                c * state.linvel[0] - s * state.linvel[2],
                state.linvel[1],
                s * state.linvel[0] + c * state.linvel[2],
            ]
        )
        q = state.q.copy()
        qd = state.qd.copy()
        vel_noise = np.zeros(6)
        if self.training:
            q += self.rng.uniform(-self.cfg.obs_noise_q, self.cfg.obs_noise_q, self.n)
            qd += self.rng.uniform(
                -self.cfg.obs_noise_qd, self.cfg.obs_noise_qd, self.n
            )
            vel_noise = self.rng.uniform(
                -self.cfg.obs_noise_vel, self.cfg.obs_noise_vel, 6
            )
        parts = [
            pos,
            ori,
            v_root + vel_noise[:3],
            state.angvel + vel_noise[3:],
            q,
            qd,
            state.prev_action,
            state.prev_action2,
            self.thermal_cfg.clip(state.temps[self.thermal_idx]),
        ]
        if self.mode == WALKING:
            parts.append(np.array([state.phase]))
        return np.concatenate(parts)

    def observation_normalization(self, mode: str | None = None):
        """(center, scale) arrays matching the observation layout."""
        mode = mode or self.mode
        n, nt = self.n, len(self.thermal_idx)
        mid = 0.5 * (self.model.q_lo + self.model.q_hi)
        half = 0.5 * (self.model.q_hi - self.model.q_lo)
        center = [np.zeros(3), np.zeros(3), np.zeros(3), np.zeros(3), mid,
                  np.zeros(n), mid, mid,
                  np.full(nt, 0.5 * (self.thermal_cfg.t_clip_min + self.thermal_cfg.t_clip_max))]
        scale = [np.full(3, 0.5), np.full(3, 0.5), np.ones(3), np.full(3, 2.0),
                 half, np.full(n, 4.0), half, half,
                 np.full(nt, 0.5 * (self.thermal_cfg.t_clip_max - self.thermal_cfg.t_clip_min))]
        if mode == WALKING:
            center.append(np.zeros(1))
            scale.append(np.ones(1))
        return np.concatenate(center), np.concatenate(scale)

    def observation_layout(self, mode: str | None = None) -> str:
        mode = mode or self.mode
        n, nt = self.n, len(self.thermal_idx)
        fields = [
            ("pos_pf", 3),
            ("ori_log", 3),
            ("linvel_root", 3),
            ("angvel_root", 3),
            ("q", n),
            ("qd", n),
            ("a_prev", n),
            ("a_prev2", n),
            ("temps", nt),
        ]
        if mode == WALKING:
            fields.append(("phase", 1))
        return ",".join(f"{k}:{v}" for k, v in fields)
