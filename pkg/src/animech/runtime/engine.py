"""Three-stage animation engine: background loop, triggered clips, joystick.

Composition order per tick: the looped background clip provides a base
command, triggered clips layer additive deltas (eased in and out over 0.2 s),
and the joystick overrides the absolute channels it owns last (gaze and
posture while standing, gaze and path velocity while walking). The result is
clamped to the configured command ranges.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from animech.refgen import STANDING, WALKING, CommandRanges, ControlInput
from animech.runtime.clips import AnimationClip, ClipSample

EASE_S = 0.2


@dataclass
class JoystickState:
    velocity: tuple[float, float, float] = (0.0, 0.0, 0.0)
    neck: tuple[float, ...] = (0.0,)
    torso_pitch: float = 0.0
    height_delta: float = 0.0
    active: bool = False  # false = neutral (no override)


@dataclass
class EngineState:
    mode: str = STANDING
    background: AnimationClip | None = None
    background_start: float = 0.0
    triggered: list = field(default_factory=list)  # (clip, start_time)
    joystick: JoystickState = field(default_factory=JoystickState)

    def trigger(self, clip: AnimationClip, t: float) -> None:
        self.triggered.append((clip, t))

    def prune(self, t: float) -> None:
        self.triggered = [
            (c, t0) for c, t0 in self.triggered if not c.finished(t - t0)
        ]

    def active_clips(self, t: float) -> list[str]:
        return [c.name for c, t0 in self.triggered if not c.finished(t - t0)]


def _ease(local_t: float, duration: float, loop: bool) -> float:
    """0.2 s ease-in/out envelope for triggered clips."""
    if loop:
        return 1.0
    up = min(1.0, max(0.0, local_t / EASE_S))
    down = min(1.0, max(0.0, (duration - local_t) / EASE_S))
    return min(up, down)


def compose(
    engine: EngineState,
    t: float,
    ranges: CommandRanges,
    nominal_height: float,
    n_neck: int = 1,
) -> tuple[ControlInput, dict, list[str]]:
    """Blend the stages into (control input, show targets, audio events)."""
    neck = np.zeros(n_neck)
    pitch = 0.0
    height_delta = 0.0
    velocity = np.zeros(3)
    show: dict = {}
    audio: list[str] = []

    def add(sample: ClipSample, gain: float, emit_audio: bool):
        nonlocal pitch, height_delta
        for k in range(min(n_neck, len(sample.neck))):
            neck[k] += gain * sample.neck[k]
        pitch += gain * sample.torso_pitch
        height_delta += gain * sample.height
        for k in range(3):
            velocity[k] += gain * sample.velocity[k]
        for key, value in sample.show.items():
            show[key] = show.get(key, 0.0) + gain * value
        if emit_audio:
            audio.extend(sample.audio)

    # the loop calls compose once per 50 Hz tick, so each clip sample is
    # consumed exactly once and may emit its audio markers directly
    if engine.background is not None:
        local = t - engine.background_start
        add(engine.background.sample_at(local), 1.0, emit_audio=True)

    for clip, t0 in engine.triggered:
        local = t - t0
        if local < 0.0 or clip.finished(local):
            continue
        add(clip.sample_at(local), _ease(local, clip.duration, clip.loop),
            emit_audio=True)

    js = engine.joystick
    if js.active:
        # joystick owns its channels outright
        for k in range(min(n_neck, len(js.neck))):
            neck[k] = js.neck[k]
        if engine.mode == WALKING:
            velocity = np.array(js.velocity)
        else:
            pitch = js.torso_pitch
            height_delta = js.height_delta

    neck = np.clip(neck, -ranges.neck, ranges.neck)
    pitch = float(np.clip(pitch, -ranges.torso_pitch, ranges.torso_pitch))
    height_delta = float(
        np.clip(height_delta, -ranges.height_delta, ranges.height_delta)
    )
    velocity = np.clip(
        velocity,
        [-ranges.speed_x, -ranges.speed_y, -ranges.turn],
        [ranges.speed_x, ranges.speed_y, ranges.turn],
    )

    if engine.mode == WALKING:
        g = ControlInput(
            mode=WALKING,
            neck=tuple(neck),
            velocity=(float(velocity[0]), float(velocity[1]), float(velocity[2])),
        )
    else:
        g = ControlInput(
            mode=STANDING,
            neck=tuple(neck),
            torso_pitch=pitch,
            height=nominal_height + height_delta,
        )
    return g, show, audio

