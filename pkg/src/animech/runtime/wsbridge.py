"""Minimal WebSocket bridge so browsers can speak to the runtime service.

Each text frame carries one JSON message, the same schema as the raw TCP
protocol (which frames with a 4-byte length prefix instead). Single client,
server-to-client frames unmasked per RFC 6455.
"""

from __future__ import annotations

import base64
import hashlib
import socket
import struct

WS_GUID = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11"


class WsError(ValueError):
    pass


def perform_handshake(sock: socket.socket) -> None:
    """Server side of the HTTP upgrade."""
    data = b""
    while b"\r\n\r\n" not in data:
        chunk = sock.recv(4096)
        if not chunk:
            raise WsError("client closed during handshake")
        data += chunk
        if len(data) > 1 << 16:
            raise WsError("oversized handshake")
    headers = {}
    for line in data.split(b"\r\n")[1:]:
        if b":" in line:
            k, v = line.split(b":", 1)
            headers[k.strip().lower()] = v.strip()
    key = headers.get(b"sec-websocket-key")
    if key is None:
        raise WsError("missing Sec-WebSocket-Key")
    accept = base64.b64encode(
        hashlib.sha1(key + WS_GUID.encode()).digest()
    ).decode()
    sock.sendall(
        (
            "HTTP/1.1 101 Switching Protocols\r\n"
            "Upgrade: websocket\r\n"
            "Connection: Upgrade\r\n"
            f"Sec-WebSocket-Accept: {accept}\r\n\r\n"
        ).encode()
    )


def encode_text_frame(payload: bytes) -> bytes:
    n = len(payload)
    if n < 126:
        header = struct.pack(">BB", 0x81, n)
    elif n < 1 << 16:
        header = struct.pack(">BBH", 0x81, 126, n)
    else:
        header = struct.pack(">BBQ", 0x81, 127, n)
    return header + payload


def _read_exact(sock: socket.socket, n: int) -> bytes | None:
    buf = b""
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            return None
        buf += chunk
    return buf


def read_text_frame(sock: socket.socket) -> bytes | None:
    """One message; answers pings, returns None on close."""
    while True:
        head = _read_exact(sock, 2)
        if head is None:
            return None
        b0, b1 = head
        opcode = b0 & 0x0F
        masked = bool(b1 & 0x80)
        length = b1 & 0x7F
        if length == 126:
            ext = _read_exact(sock, 2)
            if ext is None:
                return None
            (length,) = struct.unpack(">H", ext)
        elif length == 127:
            ext = _read_exact(sock, 8)
            if ext is None:
                return None
            (length,) = struct.unpack(">Q", ext)
        mask = _read_exact(sock, 4) if masked else b"\x00" * 4
        if mask is None:
            return None
        payload = _read_exact(sock, length) if length else b""
        if payload is None:
            return None
        if masked:
            payload = bytes(c ^ mask[i % 4] for i, c in enumerate(payload))
        if opcode == 0x8:  # close
            return None
        if opcode == 0x9:  # ping -> pong
            sock.sendall(struct.pack(">BB", 0x8A, len(payload)) + payload)
            continue
        if opcode in (0x1, 0x2):
            return payload
        # continuation/pong: ignore
