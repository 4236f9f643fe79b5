"""Model-based reference controller: the baseline the policies are seeded from.

Emits the reference joint targets plus
  * static gravity compensation (phase-aware contact mask), so the PD
    equilibrium coincides with the reference pose,
  * a stance-ankle pitch regulator, and
  * velocity-feedback foot placement for the swing leg while walking.

Used as the rollout smoke baseline and as the teacher for the policy
warm-start regression.
"""

from __future__ import annotations

import math

import numpy as np

from animech.refgen import STANDING, WALKING, ControlInput
from animech.sim import model as planar_model
from animech.sim.env import PlanarEnv, SimState


class ReferenceController:
    def __init__(
        self,
        env: PlanarEnv,
        k_ankle: float = 25.0,  # N m per rad of torso pitch error
        k_ankle_rate: float = 6.0,
        k_hip: float = 110.0,
        k_hip_rate: float = 24.0,
        k_vel: float = 0.35,
        k_com: float = 0.5,
        max_shift: float = 0.14,
        counterlean_gain: float = 3.0,
    ):
        self.env = env
        self.rg = env.refgen
        self.k_ankle = k_ankle
        self.k_ankle_rate = k_ankle_rate
        self.k_hip = k_hip
        self.k_hip_rate = k_hip_rate
        self.k_vel = k_vel
        self.k_com = k_com
        self.max_shift = max_shift
        self.counterlean_gain = counterlean_gain
        self.accel_limit = 0.5  # m/s^2, internal command ramp
        # slew rates for the remaining command channels (height m/s, rad/s)
        self.height_rate = 0.08
        self.pitch_rate = 0.5
        self.neck_rate = 1.5
        self.k_int = 1.5  # 1/s, integral trim on the stride speed
        self.int_limit = 0.15  # m/s
        self._comp_cache: dict = {}
        self._landed_shift = [0.0, 0.0]  # per leg, frozen at touchdown
        self._liftoff_shift = [0.0, 0.0]
        self._was_stance = [True, True]
        self._last_time = -1.0
        self._v_ramp = 0.0
        self._v_int = 0.0
        self._v_meas = 0.0  # low-passed body speed
        self._g_slew: ControlInput | None = None

    def reset(self) -> None:
        self._landed_shift = [0.0, 0.0]
        self._liftoff_shift = [0.0, 0.0]
        self._was_stance = [True, True]
        self._last_time = -1.0
        self._v_ramp = 0.0
        self._v_int = 0.0
        self._v_meas = 0.0
        self._g_slew = None

    @staticmethod
    def _approach(value: float, goal: float, step: float) -> float:
        return value + max(-step, min(step, goal - value))

    def _slewed(self, g: ControlInput, dt: float) -> ControlInput:
        """Rate-limited copy of the command; jumps knock the character over."""
        import dataclasses

        prev = self._g_slew
        if prev is None or prev.mode != g.mode:
            prev = g
        height_goal = g.height
        height_prev = prev.height
        if g.mode == STANDING:
            if height_goal is None:
                height_goal = self.rg.nominal_height()
            if height_prev is None:
                height_prev = height_goal
        neck = tuple(
            self._approach(p, q, self.neck_rate * dt)
            for p, q in zip(prev.neck, g.neck)
        )
        out = dataclasses.replace(
            g,
            neck=neck,
            torso_pitch=self._approach(
                prev.torso_pitch, g.torso_pitch, self.pitch_rate * dt
            ),
            height=(
                None
                if height_goal is None
                else self._approach(height_prev, height_goal, self.height_rate * dt)
            ),
        )
        self._g_slew = out
        return out

    # -- gravity compensation --------------------------------------------------

    def _target_statics(self, target, mode: str) -> tuple[np.ndarray, float]:
        """(PD target offsets, hip-relative CoM x) for the reference pose."""
        key = (
            mode,
            round(float(target.pos[2]), 3),
            round(target.pitch, 3),
            tuple(np.round(target.q, 2)),
            target.contact_left,
            target.contact_right,
        )
        hit = self._comp_cache.get(key)
        if hit is not None:
            return hit
        n = self.env.n
        x = np.zeros(3 + n)
        x[1] = target.pos[2]
        x[2] = target.pitch
        x[3:] = target.q
        mask = np.zeros(len(self.env.model.cp_link), dtype=bool)
        for cidx in range(len(mask)):
            left = self.env.model.cp_foot[cidx] == 0
            mask[cidx] = target.contact_left if left else target.contact_right
        if not mask.any():
            mask[:] = True
        dq = planar_model.static_joint_compensation(
            self.env.model, x, self.env.cfg.gravity, mask
        )
        _, _, coms = planar_model.forward_kinematics(self.env.model, x)
        com_x = float(self.env.model.mass @ coms[:, 0]) / self.env.model.total_mass
        if len(self._comp_cache) > 4096:
            self._comp_cache.clear()
        self._comp_cache[key] = (dq, com_x)
        return dq, com_x

    def _compensation(self, target, mode: str) -> np.ndarray:
        return self._target_statics(target, mode)[0]

    # -- control ---------------------------------------------------------------

    def action(self, state: SimState, g: ControlInput | None = None) -> np.ndarray:
        env = self.env
        g = g or env.control
        if state.time < self._last_time:
            self.reset()
        self._last_time = state.time
        g = self._slewed(g, env.cfg.control_dt)
        if g.mode == STANDING:
            target = self.rg.generate_standing(state.path_frame, g)
            a = target.q + self._compensation(target, g.mode)
            pitch_rate = -float(state.angvel[1])
            pitch_err = state.pitch - target.pitch
            tq_ankle = -(self.k_ankle * pitch_err + self.k_ankle_rate * pitch_rate)
            tq_hip = self.k_hip * pitch_err + self.k_hip_rate * pitch_rate
            kp = env.model.kp
            for leg in (self.rg.left, self.rg.right):
                a[leg.ankle_idx] += tq_ankle / (2.0 * kp[leg.ankle_idx])
                a[leg.hip_idx] += tq_hip / (2.0 * kp[leg.hip_idx])
        else:
            a = self._walking_action(state, g)
        lo, hi = env.model.q_lo, env.model.q_hi
        return np.clip(a, lo + 0.02, hi - 0.02)

    __call__ = action

    def _walking_action(self, state: SimState, g: ControlInput) -> np.ndarray:
        """Balance-feedback walking: CoM-referenced foot placement plus
        torso-pitch regulation through the stance hip, with the swing hip's
        reaction torque compensated on the stance side."""
        env = self.env
        rg = self.rg
        gait = rg.cfg.gait
        phase_next = (state.phase + gait.frequency * env.cfg.control_dt) % 1.0
        target = rg.generate_walking(state.path_frame, g, phase_next)
        dq_comp, com_x_ref = self._target_statics(target, g.mode)
        a = target.q + dq_comp

        # rate-limit the speed actually strided so command steps cannot dump
        # an unrecoverable pitch impulse (CoP authority is a few N m only),
        # and trim it with an integral term: proportional foot placement
        # alone leaves a large steady-state speed error
        dt = env.cfg.control_dt
        dv = self.accel_limit * dt
        gap = g.velocity[0] - self._v_ramp
        self._v_ramp += max(-dv, min(dv, gap))
        self._v_meas += (dt / 0.5) * (float(state.linvel[0]) - self._v_meas)
        self._v_int += self.k_int * (self._v_ramp - self._v_meas) * dt
        self._v_int = max(-self.int_limit, min(self.int_limit, self._v_int))
        vx_cmd = self._v_ramp + self._v_int
        stride = gait.step_length_gain * abs(vx_cmd)
        direction = 1.0 if vx_cmd >= 0.0 else -1.0

        x_vec, _ = env._planar_vectors(state)
        origins, _, coms = planar_model.forward_kinematics(env.model, x_vec)
        com_x = float(env.model.mass @ coms[:, 0]) / env.model.total_mass
        legs = ((rg.left, 0.0), (rg.right, 0.5))
        stance_flags = [rg._stance_window(phase_next, off)[0] for _, off in legs]
        stance_ankle_x = []
        for li, (leg, _) in enumerate(legs):
            if stance_flags[li]:
                stance_ankle_x.append(float(origins[env.model.foot_link[li]][0]))
        d_com = com_x - (
            sum(stance_ankle_x) / len(stance_ankle_x) if stance_ankle_x else com_x
        )
        v_err = float(state.linvel[0]) - self._v_ramp
        shift_cmd = self.k_vel * v_err + self.k_com * d_com
        shift_cmd = max(-self.max_shift, min(self.max_shift, shift_cmd))

        for li, (leg, offset) in enumerate(legs):
            in_stance, s = rg._stance_window(phase_next, offset)
            x, z, nu, _ = rg._foot_profile(phase_next, offset, direction * stride)
            if in_stance:
                # decay the landed shift across stance; the swing profile
                # starts unshifted, so this keeps the cycle continuous
                if not self._was_stance[li]:
                    self._was_stance[li] = True
                x += self._landed_shift[li] * (1.0 - s)
            else:
                blend = s * s * (3.0 - 2.0 * s)  # reach the full shift by touchdown
                self._landed_shift[li] = shift_cmd * blend
                self._was_stance[li] = False
                x += self._landed_shift[li]
            hip_world = (leg.hip_attach[0], gait.base_hip_height + leg.hip_attach[1])
            # stride centered on the reference pose's actual CoM (the heavy
            # head moves it when the neck is commanded)
            q_hip, q_knee, q_ankle = rg._leg_ik(
                leg,
                target.pitch,
                hip_world,
                (hip_world[0] + x + com_x_ref, z),
                foot_pitch=nu,
            )
            a[leg.hip_idx] = q_hip
            a[leg.knee_idx] = q_knee
            a[leg.ankle_idx] = q_ankle

        # torso regulation through whichever hips are in stance; the swing
        # hip's PD reaction on the torso is fed forward to the stance side.
        # The torso counterleans against head-induced CoM shifts (bounded).
        counterlean = max(-0.15, min(0.15, -self.counterlean_gain * (com_x_ref - gait.stance_offset)))
        pitch_rate = -float(state.angvel[1])
        pitch_err = state.pitch - (target.pitch + counterlean)
        tq_hip = self.k_hip * pitch_err + self.k_hip_rate * pitch_rate
        tq_ankle = -(self.k_ankle * pitch_err + self.k_ankle_rate * pitch_rate)
        kp, kd = env.model.kp, env.model.kd
        n_stance = max(1, sum(stance_flags))
        swing_reaction = 0.0
        for li, (leg, _) in enumerate(legs):
            if not stance_flags[li]:
                j = leg.hip_idx
                swing_reaction += kp[j] * (a[j] - state.q[j]) - kd[j] * state.qd[j]
        for li, (leg, _) in enumerate(legs):
            if stance_flags[li]:
                a[leg.hip_idx] += (tq_hip + swing_reaction) / (
                    n_stance * kp[leg.hip_idx]
                )
                a[leg.ankle_idx] += tq_ankle / (n_stance * kp[leg.ankle_idx])
        return a
