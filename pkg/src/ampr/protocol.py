"""Segmenter wire protocol: newline-delimited JSON over a child process's
stdio or a TCP socket. Masks travel as text RLE ("W H run run ...").

Requests carry an ``op`` and optionally an ``id`` that the response echoes.
Responses are ``{"ok": true, ...}`` or
``{"ok": false, "error": {"message": str, "retryable": bool}}``.

Ops:
  hello            {version}                          -> {ok, version}
  open_session     {session, frames, width, height, target_id} -> {ok}
  segment_frame    {session, frame_index, points, box?} -> {ok, mask}
  propagate_video  {session, prompt_sets}             -> {ok, masks}
  close_session    {session}                          -> {ok}
"""
from __future__ import annotations

import json
import shlex
import socket
import subprocess
import threading
import time
from typing import Callable, Optional, Sequence

import numpy as np

from .mask_core import Box
from .mask_io import rle_decode, rle_encode
from .segmenter import PointPrompt, PromptSet

PROTOCOL_VERSION = 1


class ProtocolError(RuntimeError):
    """Fatal: version mismatch, malformed peer, or a non-retryable refusal."""


class TransportError(RuntimeError):
    """Retryable: timeouts, broken pipes, connection drops."""


# --- wire encoding helpers ---

def encode_points(points: Sequence[PointPrompt]) -> list[dict]:
    return [{"x": p.x, "y": p.y, "polarity": p.polarity} for p in points]


def decode_points(items) -> list[PointPrompt]:
    return [PointPrompt(int(p["x"]), int(p["y"]), p.get("polarity", "positive"))
            for p in items]


def encode_box(box: Optional[Box]):
    return None if box is None else list(box.as_tuple())


def decode_box(value) -> Optional[Box]:
    if value is None:
        return None
    x0, y0, x1, y1 = (int(v) for v in value)
    return Box(x0, y0, x1, y1)


def encode_prompt_set(ps: PromptSet) -> dict:
    return {"frame_index": ps.frame_index, "target_id": ps.target_id,
            "points": encode_points(ps.points), "box": encode_box(ps.box)}


def decode_prompt_set(doc: dict) -> PromptSet:
    return PromptSet(int(doc["frame_index"]), int(doc["target_id"]),
                     tuple(decode_points(doc.get("points", []))),
                     decode_box(doc.get("box")))


# --- transports ---

class _StdioChild:
    def __init__(self, command: str):
        self._proc = subprocess.Popen(
            shlex.split(command), stdin=subprocess.PIPE, stdout=subprocess.PIPE,
            text=True, bufsize=1)

    def send_line(self, line: str) -> None:
        try:
            self._proc.stdin.write(line + "\n")
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise TransportError(f"child process pipe broken: {exc}") from exc

    def recv_line(self) -> str:
        line = self._proc.stdout.readline()
        if not line:
            raise TransportError("child process closed its output")
        return line.rstrip("\n")

    def close(self) -> None:
        if self._proc.poll() is None:
            try:
                self._proc.stdin.close()
            except OSError:
                pass
            try:
                self._proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self._proc.kill()


class _TcpPeer:
    def __init__(self, host: str, port: int, timeout: float):
        try:
            self._sock = socket.create_connection((host, port), timeout=timeout)
        except OSError as exc:
            raise TransportError(f"cannot connect to {host}:{port}: {exc}") from exc
        self._sock.settimeout(timeout)
        self._fh = self._sock.makefile("rw", encoding="utf-8", newline="\n")

    def send_line(self, line: str) -> None:
        try:
            self._fh.write(line + "\n")
            self._fh.flush()
        except OSError as exc:
            raise TransportError(f"socket write failed: {exc}") from exc

    def recv_line(self) -> str:
        try:
            line = self._fh.readline()
        except socket.timeout as exc:
            raise TransportError("request timed out") from exc
        except OSError as exc:
            raise TransportError(f"socket read failed: {exc}") from exc
        if not line:
            raise TransportError("peer closed the connection")
        return line.rstrip("\n")

    def close(self) -> None:
        try:
            self._sock.close()
        except OSError:
            pass


def _open_transport(endpoint: str, timeout: float):
    scheme, _, rest = endpoint.partition(":")
    if scheme == "cmd":
        return _StdioChild(rest)
    if scheme == "tcp":
        host, _, port = rest.rpartition(":")
        return _TcpPeer(host or "127.0.0.1", int(port), timeout)
    raise ValueError(f"endpoint must be cmd:<command> or tcp:<host:port>, got {endpoint!r}")


# --- client ---

class RemoteSegmenterClient:
    """Client side of the wire protocol; one transport, serialized requests.

    Transport failures on idempotent requests are retried up to ``retries``
    times with exponential backoff. Error responses are never retried unless
    the peer marks them retryable.
    """

    def __init__(self, endpoint: str, timeout: float = 30.0, retries: int = 3,
                 backoff: float = 0.1):
        self._endpoint = endpoint
        self._timeout = timeout
        self._retries = retries
        self._backoff = backoff
        self._lock = threading.Lock()
        self._next_id = 0
        self._peer = _open_transport(endpoint, timeout)
        self._handshake()

    def _handshake(self) -> None:
        reply = self.request({"op": "hello", "version": PROTOCOL_VERSION})
        if reply.get("version") != PROTOCOL_VERSION:
            raise ProtocolError(
                f"protocol version mismatch: peer={reply.get('version')}, "
                f"ours={PROTOCOL_VERSION}")

    def request(self, payload: dict) -> dict:
        last_exc: Exception | None = None
        for attempt in range(self._retries + 1):
            try:
                return self._round_trip(payload)
            except TransportError as exc:
                last_exc = exc
                if attempt < self._retries:
                    time.sleep(self._backoff * (2 ** attempt))
        raise TransportError(f"request failed after {self._retries + 1} attempts: {last_exc}")

    def _round_trip(self, payload: dict) -> dict:
        with self._lock:
            self._next_id += 1
            msg = dict(payload, id=self._next_id)
            self._peer.send_line(json.dumps(msg))
            while True:
                line = self._peer.recv_line()
                try:
                    reply = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise ProtocolError(f"peer sent invalid JSON: {line[:120]!r}") from exc
                if reply.get("id") in (None, msg["id"]):
                    break
        if reply.get("ok"):
            return reply
        error = reply.get("error") or {}
        message = error.get("message", "unspecified peer error")
        if error.get("retryable"):
            raise TransportError(message)
        raise ProtocolError(message)

    def open_session(self, session_id: str, frames: Sequence[str],
                     width: int, height: int, target_id: int) -> None:
        self.request({"op": "open_session", "session": session_id,
                      "frames": list(frames), "width": width, "height": height,
                      "target_id": target_id})

    def close(self) -> None:
        self._peer.close()


class RemoteSession:
    """SegmenterSession implementation backed by a RemoteSegmenterClient."""

    _counter = 0
    _counter_lock = threading.Lock()

    def __init__(self, client: RemoteSegmenterClient, frames: Sequence[str],
                 width: int, height: int, target_id: int):
        with RemoteSession._counter_lock:
            RemoteSession._counter += 1
            self.session_id = f"s{RemoteSession._counter}"
        self._client = client
        self._num_frames = len(frames)
        self._shape = (height, width)
        self.target_id = target_id
        client.open_session(self.session_id, frames, width, height, target_id)

    @property
    def num_frames(self) -> int:
        return self._num_frames

    @property
    def frame_shape(self) -> tuple[int, int]:
        return self._shape

    def segment_frame(self, frame_index: int, points, box: Optional[Box] = None) -> np.ndarray:
        reply = self._client.request({
            "op": "segment_frame", "session": self.session_id,
            "frame_index": frame_index, "points": encode_points(points),
            "box": encode_box(box)})
        return rle_decode(reply["mask"]) * 255

    def propagate_video(self, prompt_sets: Sequence[PromptSet]) -> list[np.ndarray]:
        reply = self._client.request({
            "op": "propagate_video", "session": self.session_id,
            "prompt_sets": [encode_prompt_set(ps) for ps in prompt_sets]})
        return [rle_decode(m) * 255 for m in reply["masks"]]


def remote_segmenter_factory(endpoint: str, timeout: float = 30.0,
                             retries: int = 3) -> Callable:
    """Session factory for run_ampr backed by a remote peer."""
    client = RemoteSegmenterClient(endpoint, timeout=timeout, retries=retries)

    def factory(manifest, target_id: int) -> RemoteSession:
        return RemoteSession(client, manifest.frames, manifest.width,
                             manifest.height, target_id)

    factory.client = client
    return factory


# --- server ---

def _error(message: str, retryable: bool = False, req_id=None) -> dict:
    doc = {"ok": False, "error": {"message": message, "retryable": retryable}}
    if req_id is not None:
        doc["id"] = req_id
    return doc


class MockProtocolBackend:
    """Serves the protocol on top of a MockVideoSegmenter."""

    def __init__(self, mock):
        self._mock = mock
        self._sessions: dict[str, object] = {}

    def handle(self, request: dict) -> dict:
        op = request.get("op")
        req_id = request.get("id")
        try:
            if op == "hello":
                return {"ok": True, "version": PROTOCOL_VERSION,
                        **({"id": req_id} if req_id is not None else {})}
            if op == "open_session":
                sid = str(request["session"])
                expected = (int(request["height"]), int(request["width"]))
                if expected != self._mock.gt[0][0].shape:
                    raise ValueError(
                        f"session dimensions {expected} disagree with backend "
                        f"{self._mock.gt[0][0].shape}")
                if len(request["frames"]) != len(self._mock.gt[0]):
                    raise ValueError("frame count disagrees with backend sequence")
                self._sessions[sid] = self._mock.session(int(request["target_id"]))
                return self._ok(req_id)
            if op == "close_session":
                self._sessions.pop(str(request.get("session")), None)
                return self._ok(req_id)
            if op == "segment_frame":
                session = self._session(request)
                mask = session.segment_frame(
                    int(request["frame_index"]),
                    decode_points(request.get("points", [])),
                    decode_box(request.get("box")))
                return self._ok(req_id, mask=rle_encode((mask > 127).astype(np.uint8)))
            if op == "propagate_video":
                session = self._session(request)
                sets = [decode_prompt_set(d) for d in request.get("prompt_sets", [])]
                masks = session.propagate_video(sets)
                return self._ok(req_id, masks=[rle_encode((m > 127).astype(np.uint8))
                                               for m in masks])
            return _error(f"unknown op {op!r}", req_id=req_id)
        except (KeyError, TypeError, ValueError) as exc:
            return _error(f"bad request: {exc}", req_id=req_id)

    def _session(self, request: dict):
        sid = str(request.get("session"))
        if sid not in self._sessions:
            raise ValueError(f"unknown session {sid!r}")
        return self._sessions[sid]

    @staticmethod
    def _ok(req_id, **extra) -> dict:
        doc = {"ok": True, **extra}
        if req_id is not None:
            doc["id"] = req_id
        return doc


def serve_lines(backend, lines, send: Callable[[str], None]) -> None:
    """Dispatch loop shared by every transport. Malformed input produces a
    structured error response; the loop never raises."""
    for raw in lines:
        raw = raw.strip()
        if not raw:
            continue
        try:
            request = json.loads(raw)
            if not isinstance(request, dict):
                raise ValueError("request must be a JSON object")
        except (json.JSONDecodeError, ValueError) as exc:
            send(json.dumps(_error(f"malformed request: {exc}")))
            continue
        try:
            response = backend.handle(request)
        except Exception as exc:  # backend bugs must not kill the server
            response = _error(f"internal error: {exc}", req_id=request.get("id"))
        send(json.dumps(response))


def serve_stdio(backend, stdin=None, stdout=None) -> None:
    import sys
    stdin = stdin if stdin is not None else sys.stdin
    stdout = stdout if stdout is not None else sys.stdout

    def send(line: str) -> None:
        stdout.write(line + "\n")
        stdout.flush()

    serve_lines(backend, stdin, send)


def serve_tcp(backend, host: str, port: int, ready_callback=None) -> None:
    """Accept connections one at a time, serving each until it closes."""
    server = socket.create_server((host, port))
    if ready_callback is not None:
        ready_callback(server.getsockname()[1])
    try:
        while True:
            conn, _ = server.accept()
            with conn:
                fh = conn.makefile("rw", encoding="utf-8", newline="\n")

                def send(line: str) -> None:
                    fh.write(line + "\n")
                    fh.flush()

                serve_lines(backend, fh, send)
    finally:
        server.close()
