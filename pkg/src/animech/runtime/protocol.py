"""Socket protocol: length-delimited JSON messages, SI units throughout.

Framing: 4-byte big-endian payload length, then UTF-8 JSON. The service
sends a `hello` on connect (schema version, command ranges, clip catalog),
then 10 Hz `telemetry` snapshots; clients send `joystick`, `trigger_clip`,
`set_mode`, and `pause`. Malformed input gets an `error` reply and leaves
the loop untouched.
"""

from __future__ import annotations

import json
import socket
import struct

PROTOCOL_VERSION = 1
MAX_MESSAGE_BYTES = 1 << 20

INBOUND_TYPES = ("joystick", "trigger_clip", "set_mode", "pause")


class ProtocolError(ValueError):
    pass


def encode_message(doc: dict) -> bytes:
    payload = json.dumps(doc, separators=(",", ":")).encode("utf-8")
    if len(payload) > MAX_MESSAGE_BYTES:
        raise ProtocolError("message too large")
    return struct.pack(">I", len(payload)) + payload


def read_message(sock: socket.socket) -> dict | None:
    """Blocking read of one framed message; None on orderly disconnect."""
    header = _read_exact(sock, 4)
    if header is None:
        return None
    (length,) = struct.unpack(">I", header)
    if length > MAX_MESSAGE_BYTES:
        raise ProtocolError("declared message length too large")
    payload = _read_exact(sock, length)
    if payload is None:
        return None
    try:
        doc = json.loads(payload.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise ProtocolError(f"malformed JSON payload: {e}") from e
    if not isinstance(doc, dict):
        raise ProtocolError("message must be a JSON object")
    return doc


def _read_exact(sock: socket.socket, n: int) -> bytes | None:
    buf = b""
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            return None
        buf += chunk
    return buf


def validate_inbound(doc: dict) -> str:
    """Returns the message type; raises ProtocolError when out of schema."""
    mtype = doc.get("type")
    if mtype not in INBOUND_TYPES:
        raise ProtocolError(f"unknown message type {mtype!r}")
    if mtype == "joystick":
        for key in ("vx", "vy", "wz", "torso_pitch", "height_delta"):
            if key in doc and not isinstance(doc[key], (int, float)):
                raise ProtocolError(f"joystick field '{key}' must be a number")
        if "neck" in doc and not (
            isinstance(doc["neck"], list)
            and all(isinstance(v, (int, float)) for v in doc["neck"])
        ):
            raise ProtocolError("joystick field 'neck' must be a number list")
    elif mtype == "trigger_clip":
        if not isinstance(doc.get("name"), str):
            raise ProtocolError("trigger_clip needs a string 'name'")
    elif mtype == "set_mode":
        if doc.get("mode") not in ("standing", "walking"):
            raise ProtocolError("set_mode 'mode' must be standing|walking")
    elif mtype == "pause":
        if not isinstance(doc.get("paused"), bool):
            raise ProtocolError("pause needs boolean 'paused'")
    return mtype


def hello_message(
    character: str,
    ranges,
    nominal_height: float,
    clips: list[str],
    mode: str,
    telemetry_hz: float,
) -> dict:
    return {
        "type": "hello",
        "version": PROTOCOL_VERSION,
        "character": character,
        "mode": mode,
        "telemetry_hz": telemetry_hz,
        "command_ranges": {
            "speed_x": ranges.speed_x,
            "speed_y": ranges.speed_y,
            "turn": ranges.turn,
            "height_delta": ranges.height_delta,
            "torso_pitch": ranges.torso_pitch,
            "neck": ranges.neck,
            "nominal_height": nominal_height,
        },
        "clips": clips,
    }


def error_message(text: str) -> dict:
    return {"type": "error", "message": text}
