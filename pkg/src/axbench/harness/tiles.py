"""PNG mosaics of raw counterfactual tiles (no chart rendering).

One strip per metric: composition shows an input followed by its repeated
null transformations, effectiveness shows input / null / partial
intervention, reversibility shows the forward and cycled-back images.
"""

from __future__ import annotations

import struct
import zlib

import numpy as np

from .. import core
from ..rng import Stream


def write_png(path, rgb: np.ndarray) -> None:
    """Minimal 8-bit RGB PNG writer."""
    rgb = np.ascontiguousarray(rgb, dtype=np.uint8)
    h, w, c = rgb.shape
    assert c == 3

    def chunk(tag: bytes, data: bytes) -> bytes:
        return (struct.pack(">I", len(data)) + tag + data
                + struct.pack(">I", zlib.crc32(tag + data)))

    header = struct.pack(">IIBBBBB", w, h, 8, 2, 0, 0, 0)
    raw = b"".join(b"\x00" + rgb[r].tobytes() for r in range(h))
    with open(path, "wb") as f:
        f.write(b"\x89PNG\r\n\x1a\n")
        f.write(chunk(b"IHDR", header))
        f.write(chunk(b"IDAT", zlib.compress(raw, 6)))
        f.write(chunk(b"IEND", b""))


def _to_rgb_u8(pixels: np.ndarray) -> np.ndarray:
    arr = np.asarray(pixels, dtype=np.float64)
    if arr.shape[2] == 1:
        arr = np.repeat(arr, 3, axis=2)
    return np.clip(np.rint(arr * 255.0), 0, 255).astype(np.uint8)


def tile_grid(rows: list[list[np.ndarray]], pad: int = 2) -> np.ndarray:
    h, w, _ = rows[0][0].shape
    n_rows = len(rows)
    n_cols = max(len(r) for r in rows)
    grid = np.full((n_rows * (h + pad) + pad, n_cols * (w + pad) + pad, 3), 255,
                   dtype=np.uint8)
    for i, row in enumerate(rows):
        for j, img in enumerate(row):
            y = pad + i * (h + pad)
            x = pad + j * (w + pad)
            grid[y:y + h, x:x + w] = _to_rgb_u8(img)
    return grid


def export_mosaics(model, dataset, out_prefix: str, n_rows: int = 6,
                   m: int = 5, seed: int = 0) -> list[str]:
    """Write composition/effectiveness/reversibility strips; returns paths."""
    stream = Stream(seed, "tiles")
    indices = [stream.randint(i, len(dataset)) for i in range(n_rows)]
    targets = list(range(len(dataset.space)))
    written = []

    comp_rows, eff_rows, rev_rows = [], [], []
    for i, idx in enumerate(indices):
        x = dataset.observation(idx)
        pa = dataset.assignment(idx)
        fs = stream.child("fseed").u64(idx)
        row = [x.pixels]
        current = x
        for _ in range(m):
            current = core.apply(model, current, pa, pa, fs)
            row.append(current.pixels)
        comp_rows.append(row)

        erow = [x.pixels, core.apply(model, x, pa, pa, fs).pixels]
        for t in targets:
            r = stream.child("star", t).randint(idx, len(dataset))
            v = dataset.values[r, t]
            v = int(v) if dataset.space.parents[t].kind == "discrete" else float(v)
            out = core.apply_partial(model, x, t, pa[t], v, fs, full_assignment=pa)
            erow.append(out.pixels)
        eff_rows.append(erow)

        t = targets[-1]
        r = stream.child("rev", t).randint(idx, len(dataset))
        v = dataset.values[r, t]
        v = int(v) if dataset.space.parents[t].kind == "discrete" else float(v)
        pa_star = pa.replace(t, v)
        rrow = [x.pixels]
        current = x
        for _ in range(m):
            forward = core.apply(model, current, pa, pa_star, fs)
            current = core.apply(model, forward, pa_star, pa, fs)
            rrow.extend([forward.pixels, current.pixels])
        rev_rows.append(rrow)

    for label, rows in (("composition", comp_rows), ("effectiveness", eff_rows),
                        ("reversibility", rev_rows)):
        path = f"{out_prefix}_{label}.png"
        write_png(path, tile_grid(rows))
        written.append(path)
    return written
