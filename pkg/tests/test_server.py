import json
import socket
import threading
import time

import numpy as np
import pytest

from animech.core.character import default_character
from animech.optim import es
from animech.optim.teacher import ReferenceController
from animech.refgen import STANDING, WALKING
from animech.runtime import protocol
from animech.runtime.clips import AnimationClip, ClipSample
from animech.runtime.server import RuntimeServer
from animech.runtime.session import (
    RuntimeSession,
    SessionConfig,
    replay_command_log,
    save_command_log,
)


def build_actors(desc):
    # one env serves the session; a single reference controller handles both
    # modes (it branches on the control input's mode)
    env = es.build_env(desc, es.TrainConfig(mode=STANDING))
    teacher = es.teacher_act_fn(ReferenceController(env))
    return env, {STANDING: teacher, WALKING: teacher}


def demo_clip():
    samples = tuple(
        ClipSample(neck=(0.1,), audio=("chime",) if k == 0 else ())
        for k in range(25)
    )
    return AnimationClip("nod", 0.5, samples)


@pytest.fixture()
def stack():
    desc = default_character()
    env, actors = build_actors(desc)
    return desc, env, actors


class Client:
    def __init__(self, port):
        self.sock = socket.create_connection(("127.0.0.1", port), timeout=10.0)
        self.sock.settimeout(10.0)

    def send(self, doc):
        self.sock.sendall(protocol.encode_message(doc))

    def recv(self):
        return protocol.read_message(self.sock)

    def recv_until(self, mtype, limit=500):
        for _ in range(limit):
            msg = self.recv()
            if msg is None:
                return None
            if msg["type"] == mtype:
                return msg
        raise AssertionError(f"no {mtype} message within {limit} frames")

    def close(self):
        self.sock.close()


def start_server(stack, max_ticks=2000):
    desc, env, actors = stack
    session = RuntimeSession(
        env, actors, clips={"nod": demo_clip()}, seed=0
    )
    server = RuntimeServer(
        session, port=0, as_fast_as_possible=True, max_ticks=max_ticks
    )
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    for _ in range(200):
        if server.bound_port is not None:
            break
        time.sleep(0.01)
    return server, thread


def test_handshake_and_telemetry(stack):
    server, thread = start_server(stack)
    try:
        client = Client(server.bound_port)
        hello = client.recv()
        assert hello["type"] == "hello"
        assert hello["version"] == protocol.PROTOCOL_VERSION
        assert "nod" in hello["clips"]
        assert hello["command_ranges"]["neck"] == pytest.approx(0.6)
        tele = client.recv_until("telemetry")
        assert tele["mode"] == STANDING
        assert len(tele["temperatures"]) == 7
        client.close()
    finally:
        server.stop()
        thread.join(timeout=5)


def test_walking_command_moves_path_frame(stack):
    server, thread = start_server(stack, max_ticks=6000)
    try:
        client = Client(server.bound_port)
        client.recv()  # hello
        client.send({"type": "set_mode", "mode": "walking"})
        client.send({"type": "joystick", "vx": 0.2})
        first = client.recv_until("telemetry")
        while first["mode"] != WALKING:
            first = client.recv_until("telemetry")
        start_x, start_t = first["path_frame"]["x"], first["time"]
        last = first
        while last["time"] - start_t < 5.0:
            last = client.recv_until("telemetry")
        displacement = last["path_frame"]["x"] - start_x
        expected = 0.2 * (last["time"] - start_t)
        assert displacement == pytest.approx(expected, rel=0.10)
        client.close()
    finally:
        server.stop()
        thread.join(timeout=5)


def test_unknown_clip_error_reply(stack):
    server, thread = start_server(stack)
    try:
        client = Client(server.bound_port)
        client.recv()
        client.send({"type": "trigger_clip", "name": "bogus"})
        msg = client.recv_until("error")
        assert "bogus" in msg["message"]
        # loop unaffected: telemetry keeps flowing
        assert client.recv_until("telemetry") is not None
        client.close()
    finally:
        server.stop()
        thread.join(timeout=5)


def test_malformed_message_error_reply(stack):
    server, thread = start_server(stack)
    try:
        client = Client(server.bound_port)
        client.recv()
        client.send({"type": "set_mode", "mode": "flying"})
        assert client.recv_until("error") is not None
        client.close()
    finally:
        server.stop()
        thread.join(timeout=5)


def test_disconnect_resets_to_neutral(stack):
    server, thread = start_server(stack)
    try:
        client = Client(server.bound_port)
        client.recv()
        client.send({"type": "joystick", "vx": 0.3})
        time.sleep(0.3)
        client.close()
        time.sleep(0.5)
        assert server.session.engine.joystick.active is False
        assert server.session.engine.joystick.velocity == (0.0, 0.0, 0.0)
    finally:
        server.stop()
        thread.join(timeout=5)


def test_trigger_clip_appears_in_active_list(stack):
    server, thread = start_server(stack)
    try:
        client = Client(server.bound_port)
        client.recv()
        client.send({"type": "trigger_clip", "name": "nod"})
        seen_active = False
        seen_audio = False
        for _ in range(60):
            tele = client.recv_until("telemetry")
            if "nod" in tele["active_clips"]:
                seen_active = True
            if "chime" in tele.get("audio", []):
                seen_audio = True
            if seen_active and seen_audio:
                break
        assert seen_active
        client.close()
    finally:
        server.stop()
        thread.join(timeout=5)


# ---------------------------------------------------------------------------
# command-log replay


def test_command_log_replay_bitwise(stack, tmp_path):
    desc, env, actors = stack
    session = RuntimeSession(
        env,
        actors,
        clips={"nod": demo_clip()},
        seed=7,
        cfg=SessionConfig(record_commands=True),
    )
    session.trigger_clip("nod")
    session.apply_joystick({"vx": 0.0, "neck": [0.2], "torso_pitch": 0.03})
    for _ in range(120):
        session.tick()
    live_trace = np.stack(session.trace)
    path = tmp_path / "commands.json"
    save_command_log(path, session)

    fresh_env, fresh_actors = build_actors(desc)
    replay_trace = np.stack(replay_command_log(path, fresh_env, fresh_actors))
    assert live_trace.shape == replay_trace.shape
    assert np.array_equal(live_trace, replay_trace)
