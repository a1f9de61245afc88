"""Loopback conformance fixture for protocol peers.

Checks that a served model completes the handshake, answers deterministic
repeated requests bit-identically, survives a malformed line (responding
with an error instead of dying), and advertises a sane pipelining count.
Run as ``python -m axbench.harness.conformance <endpoint>``.
"""

from __future__ import annotations

import sys

import numpy as np

from ..core import ModelError
from ..rng import Stream
from .protocol import ProtocolError, dump_message, proxy_external


def _probe_assignment(space):
    values = []
    for p in space.parents:
        if p.kind == "discrete":
            values.append(0)
        else:
            values.append((p.lower + p.upper) / 2.0)
    return space.assignment(values)


def _probe_pixels(shape, seed: int = 7) -> np.ndarray:
    n = int(np.prod(shape))
    u = Stream(seed, "conformance").u01_array(0, n)
    return u.astype(np.float32).reshape(shape)


def run_conformance(endpoint: str, timeout: float = 30.0) -> list[str]:
    """Returns a list of conformance issues; empty means the peer passes."""
    issues: list[str] = []
    try:
        model = proxy_external(endpoint, timeout=timeout)
    except (ProtocolError, ModelError, OSError) as exc:
        return [f"handshake failed: {exc}"]

    if model.pipelining < 1:
        issues.append(f"pipelining must be >= 1, got {model.pipelining}")

    from .. import core
    from ..core import Observation

    x = Observation(_probe_pixels(model.shape))
    pa = _probe_assignment(model.space)
    try:
        first = core.apply(model, x, pa, pa, function_seed=1234)
        second = core.apply(model, x, pa, pa, function_seed=1234)
        if not first.same_bits(second):
            issues.append("repeated identical requests returned different pixels")
    except ModelError as exc:
        issues.append(f"null-intervention request failed: {exc}")

    # a malformed line must be answered (with an error), not kill the peer
    model._channel.send_line(b"this is not json\n")
    try:
        reply = model._recv()
        if reply is None:
            issues.append("peer closed the connection on a malformed line")
        elif reply.get("type") != "error":
            issues.append(f"peer answered a malformed line with {reply.get('type')!r}")
    except (ProtocolError, ModelError) as exc:
        issues.append(f"no error reply to a malformed line: {exc}")

    if not issues:
        try:
            again = core.apply(model, x, pa, pa, function_seed=1234)
            if not again.same_bits(first):
                issues.append("peer state changed after the malformed line")
        except ModelError as exc:
            issues.append(f"peer unusable after a malformed line: {exc}")

    model.shutdown()
    return issues


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    if len(argv) != 1:
        print("usage: python -m axbench.harness.conformance <stdio:CMD | tcp:HOST:PORT>",
              file=sys.stderr)
        return 1
    issues = run_conformance(argv[0])
    if issues:
        for issue in issues:
            print(f"FAIL {issue}")
        return 2
    print("PASS protocol conformance")
    return 0


if __name__ == "__main__":
    sys.exit(main())
