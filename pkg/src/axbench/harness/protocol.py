"""Wire protocol for serving counterfactual models across process boundaries.

Newline-delimited UTF-8 JSON messages. Pixel payloads are base64 of
little-endian float32, row-major H*W*C, so a round trip is bit-exact. The
server speaks first with a hello advertising shape, parent space and its
max in-flight request count; afterwards each apply is one request/result
exchange. Message fields: type, id, x, pa, pa_star, seed, x_star, message,
shape, parents, pipelining.
"""

from __future__ import annotations

import base64
import json
import os
import select
import shlex
import socket
import subprocess
import threading

import numpy as np

from ..core import (Capabilities, ContinuousParent, ContractError,
                    CounterfactualModel, DiscreteParent, ModelError, Observation,
                    ParentSpace, clamp_pixels)

DEFAULT_TIMEOUT = 60.0


class ProtocolError(ModelError):
    pass


def encode_pixels(pixels: np.ndarray) -> str:
    return base64.b64encode(np.ascontiguousarray(pixels, dtype="<f4").tobytes()).decode()


def decode_pixels(text: str, shape) -> np.ndarray:
    raw = base64.b64decode(text)
    expected = int(np.prod(shape)) * 4
    if len(raw) != expected:
        raise ProtocolError(f"pixel payload is {len(raw)} bytes, expected {expected}")
    return np.frombuffer(raw, dtype="<f4").reshape(shape).copy()


def space_to_wire(space: ParentSpace) -> list[dict]:
    out = []
    for p in space.parents:
        if p.kind == "discrete":
            out.append({"name": p.name, "kind": "discrete", "cardinality": p.cardinality})
        else:
            out.append({"name": p.name, "kind": "continuous",
                        "lower": p.lower, "upper": p.upper})
    return out


def space_from_wire(parents: list[dict]) -> ParentSpace:
    descs = []
    for p in parents:
        if p["kind"] == "discrete":
            descs.append(DiscreteParent(p["name"], int(p["cardinality"])))
        elif p["kind"] == "continuous":
            descs.append(ContinuousParent(p["name"], float(p["lower"]), float(p["upper"])))
        else:
            raise ProtocolError(f"unknown parent kind {p.get('kind')!r} in hello")
    return ParentSpace(tuple(descs))


def dump_message(msg: dict) -> bytes:
    return (json.dumps(msg, sort_keys=True) + "\n").encode("utf-8")


# --- line channels -----------------------------------------------------------


class PipeChannel:
    """Line transport over raw file descriptors (child stdio)."""

    def __init__(self, read_fd: int, write_fd: int):
        self._read_fd = read_fd
        self._write_fd = write_fd
        self._buffer = bytearray()

    def send_line(self, data: bytes) -> None:
        try:
            os.write(self._write_fd, data)
        except (BrokenPipeError, OSError) as exc:
            raise ModelError(f"external model pipe closed: {exc}") from exc

    def recv_line(self, timeout: float) -> bytes | None:
        while True:
            nl = self._buffer.find(b"\n")
            if nl >= 0:
                line = bytes(self._buffer[:nl])
                del self._buffer[:nl + 1]
                return line
            ready, _, _ = select.select([self._read_fd], [], [], timeout)
            if not ready:
                raise ModelError(f"external model timed out after {timeout}s")
            chunk = os.read(self._read_fd, 65536)
            if not chunk:
                if self._buffer:
                    line = bytes(self._buffer)
                    self._buffer.clear()
                    return line
                return None
            self._buffer.extend(chunk)


class SocketChannel:
    def __init__(self, sock: socket.socket):
        self._sock = sock
        self._buffer = bytearray()

    def send_line(self, data: bytes) -> None:
        try:
            self._sock.sendall(data)
        except OSError as exc:
            raise ModelError(f"external model socket closed: {exc}") from exc

    def recv_line(self, timeout: float) -> bytes | None:
        while True:
            nl = self._buffer.find(b"\n")
            if nl >= 0:
                line = bytes(self._buffer[:nl])
                del self._buffer[:nl + 1]
                return line
            ready, _, _ = select.select([self._sock], [], [], timeout)
            if not ready:
                raise ModelError(f"external model timed out after {timeout}s")
            chunk = self._sock.recv(65536)
            if not chunk:
                if self._buffer:
                    line = bytes(self._buffer)
                    self._buffer.clear()
                    return line
                return None
            self._buffer.extend(chunk)


# --- server side ---------------------------------------------------------------


def serve_model(model: CounterfactualModel, infile, outfile,
                pipelining: int = 1) -> None:
    """Serve ``model`` over binary file objects until shutdown/EOF."""

    def emit(msg: dict) -> None:
        outfile.write(dump_message(msg))
        outfile.flush()

    emit({"type": "hello", "shape": list(model.shape),
          "parents": space_to_wire(model.space), "pipelining": pipelining})
    h, w, c = model.shape
    for raw in infile:
        raw = raw.strip()
        if not raw:
            continue
        try:
            msg = json.loads(raw.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            emit({"type": "error", "id": None, "message": f"malformed message: {exc}"})
            continue
        mtype = msg.get("type")
        if mtype == "shutdown":
            break
        if mtype != "request":
            emit({"type": "error", "id": msg.get("id"),
                  "message": f"unexpected message type {mtype!r}"})
            continue
        rid = msg.get("id")
        try:
            from .. import core  # local import avoids a cycle at module load
            x = Observation(decode_pixels(msg["x"], (h, w, c)))
            pa = model.space.assignment(msg["pa"])
            pa_star = model.space.assignment(msg["pa_star"])
            out = core.apply(model, x, pa, pa_star, int(msg["seed"]))
            emit({"type": "result", "id": rid, "x_star": encode_pixels(out.pixels)})
        except Exception as exc:  # per-request containment: report, keep serving
            emit({"type": "error", "id": rid, "message": f"{type(exc).__name__}: {exc}"})


# --- client side -----------------------------------------------------------------


class ExternalModel(CounterfactualModel):
    """Proxy that turns apply calls into protocol exchanges."""

    capabilities = Capabilities(supports_partial=False, deterministic=True,
                                single_threaded=True)

    def __init__(self, channel, closer=None, timeout: float = DEFAULT_TIMEOUT,
                 name: str = "external"):
        self._channel = channel
        self._closer = closer
        self._timeout = timeout
        self._lock = threading.Lock()
        self._next_id = 0
        self.name = name
        hello = self._recv()
        if hello is None or hello.get("type") != "hello":
            raise ProtocolError(f"expected hello, got {hello!r}")
        try:
            self.shape = tuple(int(v) for v in hello["shape"])
            self.space = space_from_wire(hello["parents"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ProtocolError(f"malformed hello: {exc}") from exc
        self.pipelining = int(hello.get("pipelining", 1))
        if self.pipelining < 1:
            raise ProtocolError(f"peer advertised pipelining {self.pipelining}")

    def _recv(self) -> dict | None:
        line = self._channel.recv_line(self._timeout)
        if line is None:
            return None
        try:
            return json.loads(line.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ProtocolError(f"malformed message from peer: {exc}") from exc

    def check_against(self, shape, space: ParentSpace) -> None:
        if tuple(shape) != self.shape:
            raise ProtocolError(
                f"handshake shape mismatch: model serves {self.shape}, "
                f"dataset has {tuple(shape)}"
            )
        if space != self.space:
            raise ProtocolError(
                f"handshake parent-space mismatch: model serves "
                f"{space_to_wire(self.space)}, dataset has {space_to_wire(space)}"
            )

    def _apply(self, x, pa, pa_star, function_seed):
        with self._lock:
            self._next_id += 1
            rid = self._next_id
            self._channel.send_line(dump_message({
                "type": "request", "id": rid, "x": encode_pixels(x.pixels),
                "pa": list(pa.values), "pa_star": list(pa_star.values),
                "seed": int(function_seed),
            }))
            while True:
                msg = self._recv()
                if msg is None:
                    raise ModelError("external model closed the connection")
                mtype = msg.get("type")
                if mtype == "error":
                    if msg.get("id") not in (rid, None):
                        raise ProtocolError(
                            f"error for unknown request id {msg.get('id')!r}")
                    raise ModelError(f"external model error: {msg.get('message')}")
                if mtype != "result":
                    raise ProtocolError(f"unexpected message type {mtype!r}")
                if msg.get("id") != rid:
                    raise ProtocolError(
                        f"result for unknown request id {msg.get('id')!r} "
                        f"(outstanding: {rid})"
                    )
                raw = decode_pixels(msg["x_star"], self.shape)
                if not np.isfinite(raw).all():
                    raise ModelError("external model returned non-finite pixels")
                return Observation(clamp_pixels(raw, source=self.name))

    def shutdown(self) -> None:
        try:
            self._channel.send_line(dump_message({"type": "shutdown"}))
        except ModelError:
            pass
        if self._closer is not None:
            self._closer()


def proxy_external(endpoint: str, expected_shape=None, expected_space=None,
                   timeout: float = DEFAULT_TIMEOUT) -> ExternalModel:
    """Connect to ``stdio:<command>`` or ``tcp:<host>:<port>``.

    Performs the hello handshake; if expectations are given, shape and parent
    space are validated against them.
    """
    if endpoint.startswith("stdio:"):
        command = endpoint[len("stdio:"):]
        proc = subprocess.Popen(shlex.split(command), stdin=subprocess.PIPE,
                                stdout=subprocess.PIPE)
        channel = PipeChannel(proc.stdout.fileno(), proc.stdin.fileno())

        def closer():
            try:
                proc.terminate()
                proc.wait(timeout=5)
            except Exception:
                proc.kill()

        model = ExternalModel(channel, closer, timeout, name=f"external:{endpoint}")
    elif endpoint.startswith("tcp:"):
        host, port = endpoint[len("tcp:"):].rsplit(":", 1)
        sock = socket.create_connection((host, int(port)), timeout=timeout)
        model = ExternalModel(SocketChannel(sock), sock.close, timeout,
                              name=f"external:{endpoint}")
    else:
        raise ContractError(f"endpoint {endpoint!r} must start with stdio: or tcp:")
    if expected_shape is not None and expected_space is not None:
        try:
            model.check_against(expected_shape, expected_space)
        except ProtocolError:
            model.shutdown()
            raise
    return model
