"""Teleoperation service: the runtime loop behind a TCP socket.

One puppeteer client at a time. A reader thread queues inbound messages; the
real-time loop drains the queue each tick, steps the session, and pushes
10 Hz telemetry back. Disconnects reset commands to neutral within one tick.
Wall-clock pacing is the default; tests run with as_fast_as_possible=True.
"""

from __future__ import annotations

import json
import queue
import socket
import threading
import time

import numpy as np

from animech.runtime import protocol, wsbridge
from animech.runtime.session import RuntimeSession


class RuntimeServer:
    def __init__(
        self,
        session: RuntimeSession,
        host: str = "127.0.0.1",
        port: int = 7845,
        as_fast_as_possible: bool = False,
        max_ticks: int | None = None,
        ws_port: int | None = None,
    ):
        self.session = session
        self.host = host
        self.port = port
        self.ws_port = ws_port
        self.as_fast_as_possible = as_fast_as_possible
        self.max_ticks = max_ticks
        self._stop = threading.Event()
        self._inbound: queue.Queue = queue.Queue()
        self._client_lock = threading.Lock()
        self._client: socket.socket | None = None
        self._ws_client: socket.socket | None = None
        self._listener: socket.socket | None = None
        self._ws_listener: socket.socket | None = None
        self.bound_port: int | None = None
        self.bound_ws_port: int | None = None

    # -- client handling --------------------------------------------------------

    def _accept_loop(self):
        while not self._stop.is_set():
            try:
                client, _ = self._listener.accept()
            except OSError:
                return
            client.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            with self._client_lock:
                if self._client is not None:
                    try:
                        client.sendall(
                            protocol.encode_message(
                                protocol.error_message("another puppeteer is connected")
                            )
                        )
                    finally:
                        client.close()
                    continue
                self._client = client
            self._send(self._hello())
            threading.Thread(
                target=self._reader_loop, args=(client,), daemon=True
            ).start()

    def _hello(self) -> dict:
        env = self.session.env
        return protocol.hello_message(
            character=env.desc.name,
            ranges=env.refgen.cfg.ranges,
            nominal_height=env.refgen.nominal_height(),
            clips=sorted(self.session.clips.keys()),
            mode=self.session.engine.mode,
            telemetry_hz=50.0 / self.session.cfg.telemetry_every,
        )

    def _reader_loop(self, client: socket.socket):
        try:
            while not self._stop.is_set():
                try:
                    msg = protocol.read_message(client)
                except protocol.ProtocolError as e:
                    self._inbound.put(("bad", str(e)))
                    continue
                except OSError:
                    break
                if msg is None:
                    break
                self._inbound.put(("msg", msg))
        finally:
            self._inbound.put(("disconnect", None))

    def _send(self, doc: dict) -> None:
        with self._client_lock:
            client = self._client
            ws = self._ws_client
        if client is not None:
            try:
                client.sendall(protocol.encode_message(doc))
            except OSError:
                self._drop_client()
        if ws is not None:
            try:
                payload = json.dumps(doc, separators=(",", ":")).encode()
                ws.sendall(wsbridge.encode_text_frame(payload))
            except OSError:
                self._drop_ws_client()

    def _drop_client(self):
        with self._client_lock:
            client, self._client = self._client, None
        if client is not None:
            try:
                client.close()
            except OSError:
                pass
        self.session.neutral_joystick()

    def _drop_ws_client(self):
        with self._client_lock:
            ws, self._ws_client = self._ws_client, None
        if ws is not None:
            try:
                ws.close()
            except OSError:
                pass
        self.session.neutral_joystick()

    # -- WebSocket bridge ---------------------------------------------------------

    def _ws_accept_loop(self):
        while not self._stop.is_set():
            try:
                client, _ = self._ws_listener.accept()
            except OSError:
                return
            try:
                wsbridge.perform_handshake(client)
            except (wsbridge.WsError, OSError):
                client.close()
                continue
            with self._client_lock:
                if self._ws_client is not None:
                    client.close()
                    continue
                self._ws_client = client
            try:
                payload = json.dumps(self._hello(), separators=(",", ":")).encode()
                client.sendall(wsbridge.encode_text_frame(payload))
            except OSError:
                self._drop_ws_client()
                continue
            threading.Thread(
                target=self._ws_reader_loop, args=(client,), daemon=True
            ).start()

    def _ws_reader_loop(self, client: socket.socket):
        try:
            while not self._stop.is_set():
                try:
                    payload = wsbridge.read_text_frame(client)
                except OSError:
                    break
                if payload is None:
                    break
                try:
                    doc = json.loads(payload.decode("utf-8"))
                    if not isinstance(doc, dict):
                        raise ValueError("message must be a JSON object")
                except (ValueError, UnicodeDecodeError) as e:
                    self._inbound.put(("bad", f"malformed JSON payload: {e}"))
                    continue
                self._inbound.put(("msg", doc))
        finally:
            self._inbound.put(("ws-disconnect", None))

    # -- inbound dispatch ---------------------------------------------------------

    def _handle(self, msg: dict) -> None:
        try:
            mtype = protocol.validate_inbound(msg)
            if mtype == "joystick":
                self.session.apply_joystick(msg)
            elif mtype == "trigger_clip":
                self.session.trigger_clip(msg["name"])
            elif mtype == "set_mode":
                self.session.request_mode(msg["mode"])
            elif mtype == "pause":
                self.session.set_paused(msg["paused"])
        except (protocol.ProtocolError, KeyError, ValueError) as e:
            self._send(protocol.error_message(str(e)))

    # -- main loop -----------------------------------------------------------------

    def run(self) -> None:
        self._listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._listener.bind((self.host, self.port))
        self.bound_port = self._listener.getsockname()[1]
        self._listener.listen(1)
        threading.Thread(target=self._accept_loop, daemon=True).start()
        if self.ws_port is not None:
            self._ws_listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
            self._ws_listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
            self._ws_listener.bind((self.host, self.ws_port))
            self.bound_ws_port = self._ws_listener.getsockname()[1]
            self._ws_listener.listen(1)
            threading.Thread(target=self._ws_accept_loop, daemon=True).start()

        dt = self.session.env.cfg.control_dt
        next_tick = time.monotonic()
        ticks = 0
        try:
            while not self._stop.is_set():
                if self.max_ticks is not None and ticks >= self.max_ticks:
                    break
                while True:
                    try:
                        kind, payload = self._inbound.get_nowait()
                    except queue.Empty:
                        break
                    if kind == "msg":
                        self._handle(payload)
                    elif kind == "bad":
                        self._send(protocol.error_message(payload))
                    elif kind == "disconnect":
                        self._drop_client()
                    elif kind == "ws-disconnect":
                        self._drop_ws_client()
                snapshot = self.session.tick()
                ticks += 1
                if snapshot is not None:
                    self._send(snapshot)
                if not self.as_fast_as_possible:
                    next_tick += dt
                    delay = next_tick - time.monotonic()
                    if delay > 0:
                        time.sleep(delay)
                    else:
                        next_tick = time.monotonic()
        finally:
            self.stop()

    def stop(self) -> None:
        self._stop.set()
        self._drop_client()
        self._drop_ws_client()
        for listener in (self._listener, self._ws_listener):
            if listener is not None:
                try:
                    listener.close()
                except OSError:
                    pass
