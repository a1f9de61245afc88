"""Serve a trained artifact over the wire protocol (stdio or tcp).

Messages are newline-delimited UTF-8 JSON; pixels are base64 little-endian
float32. The request's seed drives the posterior draw, so identical requests
return bit-identical counterfactuals.
"""

from __future__ import annotations

import base64
import json
import sys

import numpy as np
import torch

from .data import parents_to_wire
from .models import ParentCodec
from .train import load_artifact


def _encode_pixels(arr: np.ndarray) -> str:
    return base64.b64encode(np.ascontiguousarray(arr, dtype="<f4").tobytes()).decode()


def _decode_pixels(text: str, shape) -> np.ndarray:
    raw = base64.b64decode(text)
    expected = int(np.prod(shape)) * 4
    if len(raw) != expected:
        raise ValueError(f"pixel payload is {len(raw)} bytes, expected {expected}")
    return np.frombuffer(raw, dtype="<f4").reshape(shape)


def serve(artifact_path, infile=None, outfile=None, pipelining: int = 1) -> None:
    torch.set_num_threads(1)  # keeps repeated requests bit-identical
    infile = sys.stdin.buffer if infile is None else infile
    outfile = sys.stdout.buffer if outfile is None else outfile
    model, parents, shape = load_artifact(artifact_path)
    codec = ParentCodec(parents)
    h, w, c = shape

    def emit(msg: dict) -> None:
        outfile.write((json.dumps(msg, sort_keys=True) + "\n").encode("utf-8"))
        outfile.flush()

    emit({"type": "hello", "shape": [h, w, c],
          "parents": parents_to_wire(parents), "pipelining": pipelining})

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
            pixels = _decode_pixels(msg["x"], (h, w, c))
            x = torch.from_numpy(pixels.copy()).permute(2, 0, 1)[None]
            cond = codec.encode(np.asarray(msg["pa"], dtype=np.float64))
            cond_star = codec.encode(np.asarray(msg["pa_star"], dtype=np.float64))
            out = model.counterfactual(x, cond, cond_star, int(msg["seed"]))
            arr = out[0].permute(1, 2, 0).numpy().astype("<f4")
            emit({"type": "result", "id": rid, "x_star": _encode_pixels(arr)})
        except Exception as exc:
            emit({"type": "error", "id": rid, "message": f"{type(exc).__name__}: {exc}"})


def tcp_serve(artifact_path, port: int, pipelining: int = 1) -> None:
    import socket
    server = socket.create_server(("127.0.0.1", port))
    print(f"serving {artifact_path} on tcp:127.0.0.1:{port}", file=sys.stderr)
    conn, _ = server.accept()
    with conn, conn.makefile("rb") as rf, conn.makefile("wb") as wf:
        serve(artifact_path, rf, wf, pipelining)
    server.close()
