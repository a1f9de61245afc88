"""Minimal reader for the CFDS1 dataset container.

Implements just enough of the documented little-endian layout to train on:
parent descriptors, the parent value table and the pixel block. Exogenous
blobs are skipped (they are opaque to this package).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

MAGIC = b"CFDS1\n"


@dataclass(frozen=True)
class Parent:
    name: str
    kind: str                      # "discrete" | "continuous"
    cardinality: int = 0
    lower: float = 0.0
    upper: float = 1.0


@dataclass
class Dataset:
    parents: list[Parent]
    values: np.ndarray             # (n, P) float64
    pixels: np.ndarray             # (n, H, W, C) float32

    def __len__(self) -> int:
        return self.pixels.shape[0]

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.pixels.shape[1:]


def _read(f, count: int) -> bytes:
    data = f.read(count)
    if len(data) != count:
        raise ValueError("truncated CFDS1 container")
    return data


def load(path) -> Dataset:
    with open(path, "rb") as f:
        if _read(f, 6) != MAGIC:
            raise ValueError(f"{path}: not a CFDS1 container")
        version, n, h, w, c = struct.unpack("<IIIII", _read(f, 20))
        if version != 1:
            raise ValueError(f"unsupported CFDS version {version}")
        n_parents, = struct.unpack("<H", _read(f, 2))
        parents = []
        for _ in range(n_parents):
            kind, name_len = struct.unpack("<BH", _read(f, 3))
            name = _read(f, name_len).decode("utf-8")
            if kind == 0:
                card, = struct.unpack("<I", _read(f, 4))
                parents.append(Parent(name, "discrete", cardinality=card))
            else:
                lo, hi = struct.unpack("<dd", _read(f, 16))
                parents.append(Parent(name, "continuous", lower=lo, upper=hi))
        values = np.frombuffer(_read(f, n * n_parents * 8), dtype="<f8")
        values = values.reshape(n, n_parents).copy()
        pixels = np.frombuffer(_read(f, n * h * w * c * 4), dtype="<f4")
        pixels = pixels.reshape(n, h, w, c).copy()
    return Dataset(parents, values, pixels)


def parents_to_wire(parents: list[Parent]) -> list[dict]:
    out = []
    for p in parents:
        if p.kind == "discrete":
            out.append({"name": p.name, "kind": "discrete",
                        "cardinality": p.cardinality})
        else:
            out.append({"name": p.name, "kind": "continuous",
                        "lower": p.lower, "upper": p.upper})
    return out
