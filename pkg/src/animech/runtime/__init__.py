"""Deployment pipeline: filters, animation clips, engine, and the service."""

from animech.runtime.filters import (
    LowPassFilter,
    first_order_hold,
    lowpass_alpha,
    lowpass_step,
)
from animech.runtime.clips import AnimationClip, ClipSample, load_clip_directory
from animech.runtime.engine import EngineState, JoystickState, compose
from animech.runtime.session import (
    RuntimeSession,
    SessionConfig,
    replay_command_log,
    save_command_log,
)
from animech.runtime.server import RuntimeServer

__all__ = [
    "LowPassFilter",
    "first_order_hold",
    "lowpass_alpha",
    "lowpass_step",
    "AnimationClip",
    "ClipSample",
    "load_clip_directory",
    "EngineState",
    "JoystickState",
    "compose",
    "RuntimeSession",
    "SessionConfig",
    "replay_command_log",
    "save_command_log",
    "RuntimeServer",
]
