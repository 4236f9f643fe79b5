import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from animech.pathframe import (
    PathFrameState,
    advance_walking,
    clamp_to_torso,
    converge_standing,
)


def test_straight_line_integration():
    pf = PathFrameState()
    for _ in range(50):
        pf = advance_walking(pf, (0.5, 0.0, 0.0), 0.02)
    assert pf.x == pytest.approx(0.5, abs=1e-12)
    assert pf.y == pytest.approx(0.0, abs=1e-12)


def test_pure_rotation():
    pf = advance_walking(PathFrameState(), (0.0, 0.0, 0.2), 0.02)
    assert pf.yaw == pytest.approx(0.004)
    assert (pf.x, pf.y) == (0.0, 0.0)


def test_yawed_advance():
    # body-frame +x velocity with yaw pi/2 integrates along world +y
    pf = advance_walking(PathFrameState(yaw=math.pi / 2), (1.0, 0.0, 0.0), 0.02)
    assert pf.x == pytest.approx(0.0, abs=1e-15)
    assert pf.y == pytest.approx(0.02)
    assert pf.yaw == pytest.approx(math.pi / 2)


def test_advance_equivariance():
    # advancing then rigidly transforming equals transforming then advancing
    rng = np.random.default_rng(4)
    for _ in range(50):
        x, y, yaw = rng.normal(size=3)
        cmd = tuple(rng.normal(size=3))
        dx, dy, dyaw = rng.normal(size=3)

        def transform(p):
            c, s = math.cos(dyaw), math.sin(dyaw)
            return PathFrameState(
                x=c * p.x - s * p.y + dx,
                y=s * p.x + c * p.y + dy,
                yaw=p.yaw + dyaw,
            )

        a = transform(advance_walking(PathFrameState(x, y, yaw), cmd, 0.02))
        b = advance_walking(transform(PathFrameState(x, y, yaw)), cmd, 0.02)
        assert a.x == pytest.approx(b.x, abs=1e-12)
        assert a.y == pytest.approx(b.y, abs=1e-12)
        assert math.cos(a.yaw) == pytest.approx(math.cos(b.yaw), abs=1e-12)


def test_converge_fixed_point():
    pf = PathFrameState(0.3, -0.1, 0.2)
    out = converge_standing(pf, (0.3, -0.1, 0.2), dt=0.02, rate=1.0)
    assert (out.x, out.y, out.yaw) == (pf.x, pf.y, pf.yaw)


def test_converge_asymptotic():
    pf = PathFrameState()
    for _ in range(2000):
        pf = converge_standing(pf, (0.3, 0.0, 0.0), dt=0.02, rate=1.0)
    assert pf.x == pytest.approx(0.3, abs=1e-9)


def test_converge_single_step_closed_form():
    out = converge_standing(PathFrameState(), (1.0, 0.0, 0.0), dt=0.02, rate=1.0)
    assert out.x == pytest.approx(1.0 - math.exp(-0.02), abs=1e-15)


@given(
    gap=st.floats(-3.0, 3.0),
    dt=st.floats(1e-4, 5.0),
    rate=st.floats(1e-3, 10.0),
)
def test_converge_never_overshoots(gap, dt, rate):
    pf = converge_standing(PathFrameState(x=gap), (0.0, 0.0, 0.0), dt=dt, rate=rate)
    assert abs(pf.x) <= abs(gap) + 1e-12


def test_clamp_inside_untouched():
    pf = PathFrameState(0.1, 0.0, 0.1)
    out = clamp_to_torso(pf, (0.0, 0.0, 0.0), max_dist=0.5, max_yaw=0.8)
    assert (out.x, out.y, out.yaw) == (pf.x, pf.y, pf.yaw)


def test_clamp_radial_projection():
    out = clamp_to_torso(PathFrameState(x=1.0), (0.0, 0.0, 0.0), 0.5, 0.8)
    assert out.x == pytest.approx(0.5)
    assert out.y == pytest.approx(0.0)


def test_clamp_independent_yaw():
    out = clamp_to_torso(PathFrameState(x=0.1, yaw=1.0), (0.0, 0.0, 0.0), 0.5, 0.6)
    assert out.yaw == pytest.approx(0.6)
    assert out.x == pytest.approx(0.1)


def test_clamp_idempotent():
    rng = np.random.default_rng(1)
    for _ in range(100):
        pf = PathFrameState(*rng.normal(scale=2.0, size=3))
        torso = tuple(rng.normal(size=3))
        once = clamp_to_torso(pf, torso, 0.5, 0.8)
        twice = clamp_to_torso(once, torso, 0.5, 0.8)
        assert once.x == pytest.approx(twice.x, abs=1e-12)
        assert once.y == pytest.approx(twice.y, abs=1e-12)
        assert once.yaw == pytest.approx(twice.yaw, abs=1e-12)
