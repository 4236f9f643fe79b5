import json
import math

import numpy as np
import pytest

from animech.refgen import STANDING, WALKING, CommandRanges
from animech.runtime import clips as clips_mod
from animech.runtime import engine as engine_mod
from animech.runtime.engine import EngineState, JoystickState
from animech.runtime.filters import (
    LowPassFilter,
    first_order_hold,
    lowpass_alpha,
    lowpass_step,
)

RANGES = CommandRanges()
NOMINAL = 0.32


def test_foh_endpoints():
    assert first_order_hold(0.0, 1.2, 0, 12) == 0.0
    assert first_order_hold(0.0, 1.2, 12, 12) == pytest.approx(1.2)


def test_foh_midpoint():
    assert first_order_hold(0.0, 1.2, 6, 12) == pytest.approx(0.6)


def test_foh_linearity():
    rng = np.random.default_rng(0)
    a, b = rng.normal(size=4), rng.normal(size=4)
    c, d = rng.normal(size=4), rng.normal(size=4)
    lhs = first_order_hold(a + c, b + d, 5, 12)
    rhs = first_order_hold(a, b, 5, 12) + first_order_hold(c, d, 5, 12)
    assert np.allclose(lhs, rhs, atol=1e-12)


def test_lowpass_coefficient_at_600hz():
    # (1/600) / ((1/600) + 1/(2 pi 37.5)) = 0.28197...
    a = lowpass_alpha(1.0 / 600.0, 37.5)
    assert a == pytest.approx(0.2820, abs=1e-4)


def test_lowpass_dc_gain():
    y = 0.7
    for _ in range(100):
        y = lowpass_step(y, 0.7, 1.0 / 600.0, 37.5)
    assert y == pytest.approx(0.7, abs=1e-12)


def test_lowpass_passthrough_high_cutoff():
    a = lowpass_alpha(1.0 / 600.0, 1e9)
    assert a == pytest.approx(1.0, abs=1e-6)


def test_lowpass_stability_bound():
    rng = np.random.default_rng(1)
    for _ in range(200):
        dt = rng.uniform(1e-5, 1.0)
        fc = rng.uniform(1e-3, 1e4)
        assert 0.0 < lowpass_alpha(dt, fc) < 1.0


def test_lowpass_bibo():
    f = LowPassFilter(1.0 / 600.0, 37.5, initial=0.0)
    rng = np.random.default_rng(2)
    peak = 0.0
    for _ in range(5000):
        peak = max(peak, abs(float(f.step(rng.uniform(-1, 1)))))
    assert peak <= 1.0


# ---------------------------------------------------------------------------
# clips


def make_clip(name="wave", duration=1.0, loop=False, neck_amp=0.2):
    n = int(duration * 50)
    samples = []
    for k in range(n):
        phase = 2 * math.pi * k / (n - 1)  # loop clips end-match their start
        samples.append(
            clips_mod.ClipSample(
                neck=(neck_amp * math.sin(phase) if loop else neck_amp,),
                audio=("pop",) if k == 5 else (),
            )
        )
    return clips_mod.AnimationClip(name, duration, tuple(samples), loop=loop)


def test_clip_sample_count_validation():
    with pytest.raises(ValueError):
        clips_mod.AnimationClip("bad", 2.0, (clips_mod.ClipSample(),) * 10)


def test_loop_clip_end_match_validation():
    n = 50
    samples = [clips_mod.ClipSample(neck=(0.0,)) for _ in range(n - 1)]
    samples.append(clips_mod.ClipSample(neck=(0.5,)))
    with pytest.raises(ValueError):
        clips_mod.AnimationClip("bad-loop", 1.0, tuple(samples), loop=True)


def test_clip_json_round_trip(tmp_path):
    clip = make_clip(loop=True)
    path = tmp_path / "wave.json"
    path.write_text(json.dumps(clips_mod.clip_to_json(clip)))
    loaded = clips_mod.load_clip(path)
    assert loaded == clip


# ---------------------------------------------------------------------------
# engine composition


def test_compose_neutral():
    g, show, audio = engine_mod.compose(EngineState(), 0.0, RANGES, NOMINAL)
    assert g.mode == STANDING
    assert g.neck == (0.0,)
    assert g.height == pytest.approx(NOMINAL)
    assert show == {} and audio == []


def test_compose_single_trigger_passthrough():
    eng = EngineState()
    clip = make_clip(duration=1.0, neck_amp=0.3)
    eng.trigger(clip, 0.0)
    # mid-playback, outside the 0.2 s ease windows: full delta
    g, _, _ = engine_mod.compose(eng, 0.5, RANGES, NOMINAL)
    assert g.neck[0] == pytest.approx(0.3)


def test_compose_ease_in():
    eng = EngineState()
    eng.trigger(make_clip(duration=1.0, neck_amp=0.3), 0.0)
    g, _, _ = engine_mod.compose(eng, 0.1, RANGES, NOMINAL)
    assert g.neck[0] == pytest.approx(0.15)


def test_joystick_overrides_clip_stack():
    eng = EngineState(mode=WALKING)
    eng.trigger(make_clip(duration=1.0, neck_amp=0.3), 0.0)
    eng.joystick = JoystickState(velocity=(0.3, 0.0, 0.0), neck=(0.1,), active=True)
    g, _, _ = engine_mod.compose(eng, 0.5, RANGES, NOMINAL)
    assert g.velocity[0] == pytest.approx(0.3)
    assert g.neck[0] == pytest.approx(0.1)


def test_compose_clamps_to_ranges():
    eng = EngineState(mode=WALKING)
    eng.joystick = JoystickState(velocity=(5.0, 0.0, 0.0), active=True)
    g, _, _ = engine_mod.compose(eng, 0.0, RANGES, NOMINAL)
    assert g.velocity[0] == pytest.approx(RANGES.speed_x)


def test_compose_deterministic():
    eng = EngineState()
    eng.trigger(make_clip(), 0.0)
    a = engine_mod.compose(eng, 0.25, RANGES, NOMINAL)
    b = engine_mod.compose(eng, 0.25, RANGES, NOMINAL)
    assert a[0] == b[0]


def test_prune_finished_clips():
    eng = EngineState()
    eng.trigger(make_clip(duration=1.0), 0.0)
    eng.prune(0.5)
    assert len(eng.triggered) == 1
    eng.prune(1.5)
    assert len(eng.triggered) == 0


def test_audio_markers_emitted():
    eng = EngineState()
    eng.trigger(make_clip(), 0.0)
    _, _, audio = engine_mod.compose(eng, 5 / 50.0, RANGES, NOMINAL)
    assert audio == ["pop"]
