"""The 50 Hz runtime loop: engine -> reference -> policy -> simulator.

A session owns the simulated character (the "virtual robot"), the animation
engine, and one actor per control mode. Every tick it composes the control
input, queries the active policy, steps the simulator, and emits telemetry
snapshots at 10 Hz. All inbound changes (joystick, clip triggers, mode
requests) arrive through explicit methods, so a recorded command log replays
to a bitwise-identical trace.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from animech.refgen import STANDING, WALKING, ControlInput
from animech.runtime import engine as engine_mod
from animech.runtime.clips import AnimationClip
from animech.runtime.engine import EngineState, JoystickState
from animech.runtime.protocol import PROTOCOL_VERSION
from animech.sim.env import PlanarEnv

TELEMETRY_EVERY = 5  # ticks -> 10 Hz
SWITCH_START_SPEED = 0.05  # m/s, standing -> walking
SWITCH_STOP_SPEED = 0.02  # walking -> standing
PHASE_ALIGN_TOL = 0.05  # switch near phase 0 or 0.5 only


@dataclass
class SessionConfig:
    telemetry_every: int = TELEMETRY_EVERY
    record_commands: bool = False


class RuntimeSession:
    def __init__(
        self,
        env: PlanarEnv,
        actors: dict,  # mode -> callable(obs, state) -> action
        clips: dict[str, AnimationClip] | None = None,
        seed: int = 0,
        cfg: SessionConfig | None = None,
    ):
        self.env = env
        self.actors = actors
        self.clips = clips or {}
        self.cfg = cfg or SessionConfig()
        self.seed = seed
        self.engine = EngineState(mode=env.mode)
        background = next(
            (c for c in self.clips.values() if c.loop), None
        )
        if background is not None:
            self.engine.background = background
        self.state = env.reset(np.random.default_rng(seed))
        self.obs = env.observe(self.state)
        self.tick_count = 0
        self.paused = False
        self.command_log: list[dict] = []
        self.trace: list[np.ndarray] = []
        self.last_result = None
        self._desired_mode = env.mode

    # -- inbound ---------------------------------------------------------------

    def apply_joystick(self, msg: dict) -> None:
        js = self.engine.joystick
        js.velocity = (
            float(msg.get("vx", 0.0)),
            float(msg.get("vy", 0.0)),
            float(msg.get("wz", 0.0)),
        )
        if "neck" in msg:
            js.neck = tuple(float(v) for v in msg["neck"])
        js.torso_pitch = float(msg.get("torso_pitch", 0.0))
        js.height_delta = float(msg.get("height_delta", 0.0))
        js.active = True

    def neutral_joystick(self) -> None:
        self.engine.joystick = JoystickState()

    def trigger_clip(self, name: str) -> None:
        if name not in self.clips:
            raise KeyError(f"unknown clip '{name}'")
        self.engine.trigger(self.clips[name], self.state.time)

    def request_mode(self, mode: str) -> None:
        if mode not in (STANDING, WALKING):
            raise ValueError(f"unknown mode '{mode}'")
        self._desired_mode = mode

    def set_paused(self, paused: bool) -> None:
        self.paused = bool(paused)

    # -- mode switching ----------------------------------------------------------

    def _auto_mode(self) -> None:
        speed = abs(self.engine.joystick.velocity[0])
        if self.engine.mode == STANDING and speed > SWITCH_START_SPEED:
            self._desired_mode = WALKING
        elif self.engine.mode == WALKING and self.engine.joystick.active and speed < SWITCH_STOP_SPEED:
            self._desired_mode = STANDING

    def _maybe_switch(self) -> None:
        if self._desired_mode == self.engine.mode:
            return
        if self.engine.mode == WALKING:
            # leave the walk only near a double-support phase
            ph = self.state.phase % 0.5
            if min(ph, 0.5 - ph) > PHASE_ALIGN_TOL:
                return
        self.engine.mode = self._desired_mode
        self.env.set_mode(self._desired_mode)
        self.obs = self.env.observe(self.state)

    # -- stepping -----------------------------------------------------------------

    def tick(self) -> dict | None:
        """Advance one 50 Hz step; returns a telemetry snapshot at 10 Hz."""
        if self.paused:
            return None
        self._auto_mode()
        self._maybe_switch()
        t = self.state.time
        self.engine.prune(t)
        g, show, audio = engine_mod.compose(
            self.engine,
            t,
            self.env.refgen.cfg.ranges,
            self.env.refgen.nominal_height(),
            n_neck=len(self.env.neck_idx),
        )
        self.env.set_control(g)
        actor = self.actors[self.engine.mode]
        action = actor(self.obs, self.state)
        result = self.env.step(self.state, action)
        self.state = result.state
        self.obs = result.observation
        self.last_result = result
        self.tick_count += 1
        if self.cfg.record_commands:
            self.command_log.append(_control_record(self.tick_count, g))
        self.trace.append(_trace_row(self.state))

        if result.terminated:
            # the virtual robot fell: reset in place, keep the session alive
            self.state = self.env.reset(np.random.default_rng(self.seed + self.tick_count))
            self.obs = self.env.observe(self.state)

        if self.tick_count % self.cfg.telemetry_every == 0:
            return self.telemetry_snapshot(result, show, audio)
        return None

    def _figure(self) -> dict:
        """Stick-figure geometry so clients need no character knowledge."""
        from animech.sim import model as planar_model

        x, _ = self.env._planar_vectors(self.state)
        origins, angles, _ = planar_model.forward_kinematics(self.env.model, x)
        m = self.env.model
        segments = []
        for i in range(1, m.n_links):
            p = m.parent[i]
            segments.append(
                [
                    float(origins[p][0]),
                    float(origins[p][1]),
                    float(origins[i][0]),
                    float(origins[i][1]),
                ]
            )
        # head marker: extend the head link along its center of mass
        feet = []
        for f in range(2):
            i = m.foot_link[f]
            feet.append(
                [float(origins[i][0]), float(origins[i][1]), float(m.foot_radius[f])]
            )
        return {"segments": segments, "feet": feet}

    def telemetry_snapshot(self, result, show: dict, audio: list[str]) -> dict:
        state = self.state
        track_err = 0.0
        if result.target is not None:
            track_err = float(np.mean(np.abs(state.q - result.target.q)))
        return {
            "type": "telemetry",
            "version": PROTOCOL_VERSION,
            "tick": self.tick_count,
            "time": state.time,
            "mode": self.engine.mode,
            "pose": {
                "x": float(state.pos[0]),
                "z": float(state.pos[2]),
                "pitch": float(state.pitch),
            },
            "path_frame": {
                "x": state.path_frame.x,
                "y": state.path_frame.y,
                "yaw": state.path_frame.yaw,
            },
            "joints": {
                "q": state.q.tolist(),
                "qd": state.qd.tolist(),
                "names": self.env.desc.joint_names(),
            },
            "tracking_error": track_err,
            "temperatures": state.temps.tolist(),
            "reward": {
                "total": result.reward.total,
                "groups": result.reward.groups,
            },
            "contacts": [bool(state.contact_left), bool(state.contact_right)],
            "dv": list(result.dv),
            "terminated": bool(result.terminated),
            "reason": result.reason,
            "show": show,
            "audio": audio,
            "active_clips": self.engine.active_clips(state.time),
            "figure": self._figure(),
        }


def _control_record(tick: int, g: ControlInput) -> dict:
    return {
        "tick": tick,
        "mode": g.mode,
        "neck": list(g.neck),
        "torso_pitch": g.torso_pitch,
        "height": g.height,
        "velocity": list(g.velocity),
    }


def _control_from_record(doc: dict) -> ControlInput:
    return ControlInput(
        mode=doc["mode"],
        neck=tuple(doc["neck"]),
        torso_pitch=doc["torso_pitch"],
        height=doc["height"],
        velocity=tuple(doc["velocity"]),
    )


def _trace_row(state) -> np.ndarray:
    return np.concatenate(
        [
            state.pos,
            state.quat,
            state.linvel,
            state.angvel,
            state.q,
            state.qd,
            state.temps,
            [state.phase, state.time],
        ]
    )


def save_command_log(path: str | Path, session: RuntimeSession) -> None:
    doc = {
        "format": "animech-command-log",
        "version": 1,
        "seed": session.seed,
        "mode_initial": session.env.mode,
        "records": session.command_log,
    }
    Path(path).write_text(json.dumps(doc) + "\n")


def replay_command_log(
    path: str | Path, env: PlanarEnv, actors: dict
) -> list[np.ndarray]:
    """Re-drive a session from a recorded control sequence.

    With the same environment configuration and actors, the returned trace is
    bitwise identical to the live run's.
    """
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != "animech-command-log":
        raise ValueError("not a command log")
    env.set_mode(doc["mode_initial"])
    state = env.reset(np.random.default_rng(doc["seed"]))
    obs = env.observe(state)
    trace = []
    for rec in doc["records"]:
        g = _control_from_record(rec)
        if g.mode != env.mode:
            env.set_mode(g.mode)
            obs = env.observe(state)
        env.set_control(g)
        actor = actors[g.mode]
        action = actor(obs, state)
        result = env.step(state, action)
        state, obs = result.state, result.observation
        trace.append(_trace_row(state))
        if result.terminated:
            state = env.reset(np.random.default_rng(doc["seed"] + rec["tick"]))
            obs = env.observe(state)
    return trace
