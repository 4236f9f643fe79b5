"""Animation clips: 50 Hz sampled command deltas with show and audio tracks.

Clip JSON documents live in a clips/ directory and are loaded at startup.
Each sample carries control-input deltas (layered additively over the
background), show-function functional coordinates, and audio trigger markers.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

CLIP_RATE_HZ = 50.0


@dataclass(frozen=True)
class ClipSample:
    neck: tuple[float, ...] = (0.0,)
    torso_pitch: float = 0.0
    height: float = 0.0
    velocity: tuple[float, float, float] = (0.0, 0.0, 0.0)
    show: dict = field(default_factory=dict)
    audio: tuple[str, ...] = ()


@dataclass(frozen=True)
class AnimationClip:
    name: str
    duration: float  # s
    samples: tuple[ClipSample, ...]
    loop: bool = False

    def __post_init__(self):
        expected = self.duration * CLIP_RATE_HZ
        if abs(len(self.samples) - expected) > 1.0 + 1e-9:
            raise ValueError(
                f"clip '{self.name}': {len(self.samples)} samples does not match "
                f"{self.duration} s at {CLIP_RATE_HZ:.0f} Hz"
            )
        if self.loop and len(self.samples) >= 2:
            a, b = self.samples[0], self.samples[-1]
            gaps = [abs(x - y) for x, y in zip(a.neck, b.neck)]
            gaps += [abs(a.torso_pitch - b.torso_pitch), abs(a.height - b.height)]
            gaps += [abs(x - y) for x, y in zip(a.velocity, b.velocity)]
            if max(gaps) > 1e-3:
                raise ValueError(
                    f"loop clip '{self.name}' does not end-match its start"
                )

    def sample_at(self, t: float) -> ClipSample:
        if self.loop:
            t = t % self.duration
        idx = int(t * CLIP_RATE_HZ)
        idx = min(max(idx, 0), len(self.samples) - 1)
        return self.samples[idx]

    def finished(self, t: float) -> bool:
        return (not self.loop) and t >= self.duration


def _sample_from_json(doc: dict) -> ClipSample:
    return ClipSample(
        neck=tuple(doc.get("neck", (0.0,))),
        torso_pitch=float(doc.get("torso_pitch", 0.0)),
        height=float(doc.get("height", 0.0)),
        velocity=tuple(doc.get("velocity", (0.0, 0.0, 0.0))),
        show=dict(doc.get("show", {})),
        audio=tuple(doc.get("audio", ())),
    )


def clip_from_json(doc: dict) -> AnimationClip:
    return AnimationClip(
        name=doc["name"],
        duration=float(doc["duration"]),
        samples=tuple(_sample_from_json(s) for s in doc["samples"]),
        loop=bool(doc.get("loop", False)),
    )


def clip_to_json(clip: AnimationClip) -> dict:
    return {
        "name": clip.name,
        "duration": clip.duration,
        "loop": clip.loop,
        "samples": [
            {
                "neck": list(s.neck),
                "torso_pitch": s.torso_pitch,
                "height": s.height,
                "velocity": list(s.velocity),
                "show": s.show,
                "audio": list(s.audio),
            }
            for s in clip.samples
        ],
    }


def load_clip(path: str | Path) -> AnimationClip:
    return clip_from_json(json.loads(Path(path).read_text()))


def load_clip_directory(path: str | Path) -> dict[str, AnimationClip]:
    clips = {}
    p = Path(path)
    if not p.is_dir():
        return clips
    for f in sorted(p.glob("*.json")):
        clip = load_clip(f)
        clips[clip.name] = clip
    return clips
