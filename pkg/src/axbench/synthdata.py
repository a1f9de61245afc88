"""Synthetic colour-digit and procedural-shapes datasets with known mechanisms.

The colour-digit generator draws a digit class and a hue under one of three
structural models (hue independent of digit; hue Normal around a digit-linked
mean without full support; the same plus a small uniform outlier rate that
restores full support), renders a procedural glyph, and keeps the glyph style
as an exogenous record so observations can be re-rendered bit-exactly. A
64x64 scene with four independent discrete parents stands in for datasets
whose parents fully determine the image (no exogenous noise at all).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import kernels
from .core import (ContinuousParent, ContractError, DiscreteParent, Observation,
                   ParentAssignment, ParentSpace)
from .rng import Stream, reflect_unit_array

# --- glyph styles and stroke tables ------------------------------------------

THICKNESS_RANGE = (0.5, 2.0)
SLANT_RANGE = (-0.3, 0.3)
SCALE_RANGE = (0.8, 1.1)
OFFSET_RANGE = (-2.0, 2.0)


@dataclass(frozen=True)
class GlyphStyle:
    """Writing-style exogenous noise for the glyph renderer."""

    thickness: float
    slant: float
    scale: float
    offset: tuple[float, float]

    def __post_init__(self):
        checks = (
            (self.thickness, THICKNESS_RANGE, "thickness"),
            (self.slant, SLANT_RANGE, "slant"),
            (self.scale, SCALE_RANGE, "scale"),
            (self.offset[0], OFFSET_RANGE, "offset[0]"),
            (self.offset[1], OFFSET_RANGE, "offset[1]"),
        )
        for value, (lo, hi), name in checks:
            if not lo <= value <= hi:
                raise ContractError(f"style {name}={value} outside [{lo}, {hi}]")


DEFAULT_STYLE = GlyphStyle(thickness=1.0, slant=0.0, scale=1.0, offset=(0.0, 0.0))

# Polylines in unit glyph coordinates (x right, y down). Deliberately coarse:
# these are stand-in glyphs, not a font.
STROKES: dict[int, tuple[tuple[tuple[float, float], ...], ...]] = {
    0: (((0.50, 0.04), (0.82, 0.18), (0.94, 0.50), (0.82, 0.82), (0.50, 0.96),
         (0.18, 0.82), (0.06, 0.50), (0.18, 0.18), (0.50, 0.04)),),
    1: (((0.22, 0.28), (0.55, 0.04), (0.55, 0.96)),
        ((0.28, 0.96), (0.80, 0.96))),
    2: (((0.10, 0.24), (0.28, 0.05), (0.72, 0.05), (0.90, 0.24), (0.88, 0.42),
         (0.12, 0.96), (0.92, 0.96)),),
    3: (((0.12, 0.06), (0.84, 0.06), (0.47, 0.42), (0.86, 0.58), (0.88, 0.78),
         (0.58, 0.96), (0.14, 0.86)),),
    4: (((0.70, 0.96), (0.70, 0.04), (0.10, 0.64), (0.92, 0.64)),),
    5: (((0.88, 0.04), (0.16, 0.04), (0.13, 0.46), (0.58, 0.42), (0.87, 0.58),
         (0.88, 0.78), (0.58, 0.96), (0.13, 0.87)),),
    6: (((0.78, 0.04), (0.34, 0.30), (0.14, 0.62), (0.22, 0.88), (0.52, 0.96),
         (0.80, 0.86), (0.86, 0.66), (0.66, 0.50), (0.34, 0.52), (0.15, 0.64)),),
    7: (((0.08, 0.04), (0.90, 0.04), (0.44, 0.96)),
        ((0.28, 0.50), (0.74, 0.50))),
    8: (((0.50, 0.04), (0.78, 0.15), (0.78, 0.33), (0.50, 0.46), (0.22, 0.33),
         (0.22, 0.15), (0.50, 0.04)),
        ((0.50, 0.46), (0.84, 0.60), (0.84, 0.82), (0.50, 0.96), (0.16, 0.82),
         (0.16, 0.60), (0.50, 0.46))),
    9: (((0.30, 0.92), (0.66, 0.68), (0.85, 0.38), (0.80, 0.13), (0.50, 0.04),
         (0.22, 0.13), (0.15, 0.35), (0.34, 0.51), (0.66, 0.49), (0.85, 0.38)),),
}

GLYPH_SIZE = 28
_GLYPH_W = 13.0
_GLYPH_H = 19.0
_AA = 1.0


def _stroke_radius(thickness: float) -> float:
    return 0.78 + 0.62 * thickness


def _glyph_segments(digit: int, style: GlyphStyle) -> np.ndarray:
    cx = cy = GLYPH_SIZE / 2.0
    dx, dy = style.offset
    rows = []
    for line in STROKES[digit]:
        pts = []
        for ux, uy in line:
            gy = cy + (uy - 0.5) * _GLYPH_H * style.scale + dy
            gx = cx + (ux - 0.5) * _GLYPH_W * style.scale + style.slant * (gy - cy) + dx
            pts.append((gx, gy))
        for (x0, y0), (x1, y1) in zip(pts, pts[1:]):
            rows.append((x0, y0, x1, y1))
    return np.asarray(rows, dtype=np.float64)


def render_digit(digit: int, style: GlyphStyle) -> Observation:
    """Deterministic 28x28x1 grayscale glyph for ``digit`` in ``style``."""
    if not 0 <= int(digit) <= 9 or int(digit) != digit:
        raise ContractError(f"digit must be in 0..9, got {digit!r}")
    segs = _glyph_segments(int(digit), style)
    cov = kernels.coverage_image(segs, GLYPH_SIZE, GLYPH_SIZE,
                                 _stroke_radius(style.thickness), _AA)
    return Observation(cov.astype(np.float32)[:, :, None])


def hue_basis(hue: float) -> tuple[float, float, float]:
    """Unit-value RGB for (H=hue, S=1) by the standard six-sector formula."""
    if not 0.0 <= hue < 1.0:
        raise ContractError(f"hue must be in [0, 1), got {hue!r}")
    h6 = hue * 6.0
    sector = int(h6)  # 0..5
    f = h6 - sector
    x_up = f          # rising secondary channel
    x_down = 1.0 - f  # falling secondary channel
    return (
        (1.0, x_up, 0.0), (x_down, 1.0, 0.0), (0.0, 1.0, x_up),
        (0.0, x_down, 1.0), (x_up, 0.0, 1.0), (1.0, 0.0, x_down),
    )[sector]


def colourise(gray: Observation, hue: float) -> Observation:
    """HSV->RGB with S=1 and V taken from the grayscale intensities."""
    if gray.channels != 1:
        raise ContractError(f"colourise expects 1 channel, got {gray.channels}")
    basis = np.asarray(hue_basis(hue), dtype=np.float64)
    rgb = gray.pixels[:, :, 0].astype(np.float64)[:, :, None] * basis[None, None, :]
    return Observation(rgb.astype(np.float32))


# --- SCM kinds ----------------------------------------------------------------


@dataclass(frozen=True)
class Unconfounded:
    label = "unconfounded"


@dataclass(frozen=True)
class ConfoundedNoSupport:
    sigma: float = 0.05
    label = "confounded-no-support"

    def __post_init__(self):
        if not self.sigma > 0:
            raise ContractError("sigma must be positive")


@dataclass(frozen=True)
class ConfoundedFullSupport:
    sigma: float = 0.05
    p: float = 0.01
    label = "confounded-full-support"

    def __post_init__(self):
        if not self.sigma > 0:
            raise ContractError("sigma must be positive")
        if not 0.0 < self.p < 1.0:
            raise ContractError("outlier probability must be in (0, 1)")


ScmKind = Unconfounded | ConfoundedNoSupport | ConfoundedFullSupport


def confounder_mean(digit: int) -> float:
    return digit / 10.0 + 0.05


# --- exogenous records ----------------------------------------------------------

_GLYPH_RECORD_TAG = 1


@dataclass(frozen=True)
class GlyphRecord:
    """True exogenous noise of one colour-digit sample (style + outlier flag)."""

    style: GlyphStyle
    outlier: bool = False

    def render(self, values: Sequence[float]) -> Observation:
        digit, hue = int(values[0]), float(values[1])
        return colourise(render_digit(digit, self.style), hue)

    def to_blob(self) -> bytes:
        s = self.style
        return struct.pack("<BdddddB", _GLYPH_RECORD_TAG, s.thickness, s.slant,
                           s.scale, s.offset[0], s.offset[1], int(self.outlier))

    @staticmethod
    def from_blob(blob: bytes) -> "GlyphRecord":
        tag, t, sl, sc, ox, oy, outlier = struct.unpack("<BdddddB", blob)
        assert tag == _GLYPH_RECORD_TAG
        return GlyphRecord(GlyphStyle(t, sl, sc, (ox, oy)), bool(outlier))


def decode_record(blob: bytes):
    if not blob:
        raise ContractError("empty exogenous blob")
    tag = blob[0]
    if tag == _GLYPH_RECORD_TAG:
        return GlyphRecord.from_blob(blob)
    raise ContractError(f"unknown exogenous record tag {tag}")


# --- dataset container -----------------------------------------------------------


@dataclass(frozen=True)
class Provenance:
    scm: str
    seed: int


class LabeledDataset:
    """Observations + parent assignments (+ optional exogenous records)."""

    def __init__(self, space: ParentSpace, pixels: np.ndarray, values: np.ndarray,
                 exogenous: list | None, provenance: Provenance):
        pixels = np.ascontiguousarray(pixels, dtype=np.float32)
        values = np.ascontiguousarray(values, dtype=np.float64)
        if pixels.ndim != 4:
            raise ContractError(f"pixels must be (n, H, W, C), got {pixels.shape}")
        n = pixels.shape[0]
        if values.shape != (n, len(space)):
            raise ContractError(
                f"parent table shape {values.shape} != ({n}, {len(space)})"
            )
        if exogenous is not None and len(exogenous) != n:
            raise ContractError(f"{len(exogenous)} exogenous records for {n} samples")
        for k, p in enumerate(space.parents):
            col = values[:, k]
            if p.kind == "discrete":
                ok = np.all((col == np.floor(col)) & (col >= 0) & (col < p.cardinality))
            else:
                ok = np.all((col >= p.lower) & (col <= p.upper))
            if not ok:
                raise ContractError(f"values outside domain of parent {p.name!r}")
        pixels.setflags(write=False)
        values.setflags(write=False)
        self.space = space
        self.pixels = pixels
        self.values = values
        self.exogenous = exogenous
        self.provenance = provenance

    def __len__(self) -> int:
        return self.pixels.shape[0]

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.pixels.shape[1:]

    def observation(self, i: int) -> Observation:
        return Observation(self.pixels[i])

    def assignment(self, i: int) -> ParentAssignment:
        return self.space.assignment(self.values[i])

    def column(self, k: int) -> np.ndarray:
        return self.values[:, k]

    def subset(self, indices: Sequence[int]) -> "LabeledDataset":
        idx = np.asarray(indices, dtype=np.int64)
        exo = [self.exogenous[i] for i in idx] if self.exogenous is not None else None
        return LabeledDataset(self.space, self.pixels[idx], self.values[idx],
                              exo, self.provenance)


COLOUR_DIGIT_SPACE = ParentSpace((
    DiscreteParent("digit", 10),
    ContinuousParent("hue", 0.0, 1.0),
))


def _sample_colour_parents(kind: ScmKind, n: int, seed: int):
    """Parent + style draws only (no rendering); shared with sample_dataset."""
    root = Stream(seed, "colour-digit")
    digits = root.child("digit").randint_array(0, n, 10).astype(np.float64)
    outliers = np.zeros(n, dtype=bool)
    if isinstance(kind, Unconfounded):
        hues = root.child("hue").u01_array(0, n)
    else:
        z = root.child("hue").normal_array(0, n)
        mean = digits / 10.0 + 0.05
        hues = reflect_unit_array(mean + kind.sigma * z)
        if isinstance(kind, ConfoundedFullSupport):
            outliers = root.child("outlier").u01_array(0, n) < kind.p
            uniform = root.child("hue-uniform").u01_array(0, n)
            hues = np.where(outliers, uniform, hues)
    style_cols = {
        name: root.child("style-" + name).uniform_array(0, n, lo, hi)
        for name, (lo, hi) in (
            ("thickness", THICKNESS_RANGE), ("slant", SLANT_RANGE),
            ("scale", SCALE_RANGE), ("dx", OFFSET_RANGE), ("dy", OFFSET_RANGE),
        )
    }
    styles = [
        GlyphStyle(style_cols["thickness"][i], style_cols["slant"][i],
                   style_cols["scale"][i],
                   (style_cols["dx"][i], style_cols["dy"][i]))
        for i in range(n)
    ]
    values = np.column_stack([digits, hues])
    return values, styles, outliers


def sample_dataset(kind: ScmKind, n: int, seed: int) -> LabeledDataset:
    """Draw n colour-digit samples under ``kind`` and render them."""
    if n < 1:
        raise ContractError("n must be >= 1")
    values, styles, outliers = _sample_colour_parents(kind, n, seed)
    pixels = np.empty((n, GLYPH_SIZE, GLYPH_SIZE, 3), dtype=np.float32)
    records = []
    for i in range(n):
        rec = GlyphRecord(styles[i], bool(outliers[i]))
        records.append(rec)
        pixels[i] = rec.render(values[i]).pixels
    return LabeledDataset(COLOUR_DIGIT_SPACE, pixels, values, records,
                          Provenance(kind.label, seed))


# --- procedural shapes (discrete-parent analog) ----------------------------------

SHAPES_SPACE = ParentSpace((
    DiscreteParent("background_colour", 8),
    DiscreteParent("object_colour", 8),
    DiscreteParent("object_shape", 3),
    DiscreteParent("object_scale", 4),
))

SHAPES_SIZE = 64
_SQRT3_2 = 0.8660254037844386
_TRI_NORMALS = ((-_SQRT3_2, -0.5), (0.0, 1.0), (_SQRT3_2, -0.5))


def render_shape_scene(values: Sequence[float]) -> Observation:
    """64x64x3 scene fully determined by its four discrete parents."""
    bg_c, obj_c, shape, scale = (int(v) for v in values)
    bg = np.asarray(hue_basis(bg_c / 8.0), dtype=np.float64) * 0.30
    fg = np.asarray(hue_basis(obj_c / 8.0), dtype=np.float64) * 0.95
    radius = 7.0 + 3.5 * scale
    c = SHAPES_SIZE / 2.0
    ys, xs = np.mgrid[0:SHAPES_SIZE, 0:SHAPES_SIZE]
    px = xs + 0.5 - c
    py = ys + 0.5 - c
    if shape == 0:  # disc
        d = np.sqrt(px * px + py * py) - radius
    elif shape == 1:  # square
        d = np.maximum(np.abs(px), np.abs(py)) - radius
    else:  # equilateral triangle, point up
        d = np.full(px.shape, -1e30)
        for nx, ny in _TRI_NORMALS:
            d = np.maximum(d, px * nx + py * ny - 0.5 * radius)
    cov = np.clip(0.5 - d / 1.5, 0.0, 1.0)
    img = bg[None, None, :] + (fg - bg)[None, None, :] * cov[:, :, None]
    return Observation(img.astype(np.float32))


def _sample_shape_parents(n: int, seed: int) -> np.ndarray:
    root = Stream(seed, "shapes")
    cols = [
        root.child(p.name).randint_array(0, n, p.cardinality).astype(np.float64)
        for p in SHAPES_SPACE.parents
    ]
    return np.column_stack(cols)


def sample_shapes_dataset(n: int, seed: int) -> LabeledDataset:
    if n < 1:
        raise ContractError("n must be >= 1")
    values = _sample_shape_parents(n, seed)
    pixels = np.empty((n, SHAPES_SIZE, SHAPES_SIZE, 3), dtype=np.float32)
    cache: dict[tuple, np.ndarray] = {}
    for i in range(n):
        key = tuple(values[i])
        img = cache.get(key)
        if img is None:
            img = render_shape_scene(values[i]).pixels
            cache[key] = img
        pixels[i] = img
    return LabeledDataset(SHAPES_SPACE, pixels, values, None,
                          Provenance("shapes", seed))


# --- IDX ingestion ----------------------------------------------------------------

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


def _read_exact(f, count: int, what: str) -> bytes:
    data = f.read(count)
    if len(data) != count:
        raise ContractError(f"truncated IDX payload reading {what}")
    return data


def load_idx(images_path, labels_path) -> LabeledDataset:
    """Load an IDX image/label pair (the classic digit-dataset format)."""
    with open(images_path, "rb") as f:
        magic, = struct.unpack(">I", _read_exact(f, 4, "image magic"))
        if magic != IDX_IMAGES_MAGIC:
            raise ContractError(
                f"bad IDX image magic 0x{magic:08x} (expected 0x{IDX_IMAGES_MAGIC:08x})"
            )
        n, h, w = struct.unpack(">III", _read_exact(f, 12, "image dimensions"))
        raw = _read_exact(f, n * h * w, "image pixels")
        images = np.frombuffer(raw, dtype=np.uint8).reshape(n, h, w)
    with open(labels_path, "rb") as f:
        magic, = struct.unpack(">I", _read_exact(f, 4, "label magic"))
        if magic != IDX_LABELS_MAGIC:
            raise ContractError(
                f"bad IDX label magic 0x{magic:08x} (expected 0x{IDX_LABELS_MAGIC:08x})"
            )
        n_labels, = struct.unpack(">I", _read_exact(f, 4, "label count"))
        labels = np.frombuffer(_read_exact(f, n_labels, "labels"), dtype=np.uint8)
    if n_labels != n:
        raise ContractError(f"image/label count mismatch: {n} images, {n_labels} labels")
    if labels.size and labels.max() > 9:
        raise ContractError(f"label {int(labels.max())} out of range for a digit parent")
    pixels = (images.astype(np.float64) / 255.0).astype(np.float32)[:, :, :, None]
    space = ParentSpace((DiscreteParent("digit", 10),))
    return LabeledDataset(space, pixels, labels.astype(np.float64)[:, None], None,
                          Provenance("external", 0))


# --- CFDS1 binary container ---------------------------------------------------------

CFDS_MAGIC = b"CFDS1\n"
CFDS_VERSION = 1


def save_cfds(dataset: LabeledDataset, path) -> None:
    """Write the little-endian CFDS1 container (bit-exact round trip)."""
    n = len(dataset)
    h, w, c = dataset.shape
    with open(path, "wb") as f:
        f.write(CFDS_MAGIC)
        f.write(struct.pack("<IIIII", CFDS_VERSION, n, h, w, c))
        f.write(struct.pack("<H", len(dataset.space)))
        for p in dataset.space.parents:
            name = p.name.encode("utf-8")
            if p.kind == "discrete":
                f.write(struct.pack("<BH", 0, len(name)) + name)
                f.write(struct.pack("<I", p.cardinality))
            else:
                f.write(struct.pack("<BH", 1, len(name)) + name)
                f.write(struct.pack("<dd", p.lower, p.upper))
        f.write(dataset.values.astype("<f8").tobytes())
        f.write(dataset.pixels.astype("<f4").tobytes())
        if dataset.exogenous is None:
            f.write(struct.pack("<B", 0))
        else:
            f.write(struct.pack("<B", 1))
            for rec in dataset.exogenous:
                blob = rec.to_blob()
                f.write(struct.pack("<I", len(blob)))
                f.write(blob)


def load_cfds(path) -> LabeledDataset:
    with open(path, "rb") as f:
        magic = _read_exact(f, len(CFDS_MAGIC), "magic")
        if magic != CFDS_MAGIC:
            raise ContractError(f"bad container magic {magic!r}")
        version, n, h, w, c = struct.unpack("<IIIII", _read_exact(f, 20, "header"))
        if version != CFDS_VERSION:
            raise ContractError(f"unsupported container version {version}")
        n_parents, = struct.unpack("<H", _read_exact(f, 2, "parent count"))
        parents: list = []
        for _ in range(n_parents):
            kind, name_len = struct.unpack("<BH", _read_exact(f, 3, "parent header"))
            name = _read_exact(f, name_len, "parent name").decode("utf-8")
            if kind == 0:
                card, = struct.unpack("<I", _read_exact(f, 4, "cardinality"))
                parents.append(DiscreteParent(name, card))
            elif kind == 1:
                lo, hi = struct.unpack("<dd", _read_exact(f, 16, "bounds"))
                parents.append(ContinuousParent(name, lo, hi))
            else:
                raise ContractError(f"unknown parent kind byte {kind}")
        space = ParentSpace(tuple(parents))
        values = np.frombuffer(
            _read_exact(f, n * n_parents * 8, "parent values"), dtype="<f8"
        ).reshape(n, n_parents)
        pixels = np.frombuffer(
            _read_exact(f, n * h * w * c * 4, "pixels"), dtype="<f4"
        ).reshape(n, h, w, c)
        has_exog, = struct.unpack("<B", _read_exact(f, 1, "exogenous flag"))
        exogenous = None
        if has_exog == 1:
            exogenous = []
            for _ in range(n):
                blob_len, = struct.unpack("<I", _read_exact(f, 4, "blob length"))
                exogenous.append(decode_record(_read_exact(f, blob_len, "blob")))
        elif has_exog != 0:
            raise ContractError(f"bad exogenous flag byte {has_exog}")
    return LabeledDataset(space, pixels.copy(), values.copy(), exogenous,
                          Provenance("external", 0))


def export_parents_csv(dataset: LabeledDataset, path) -> None:
    """Parent table as CSV: header of names, continuous at 9 significant digits."""
    with open(path, "w", encoding="utf-8") as f:
        f.write(",".join(dataset.space.names()) + "\n")
        kinds = [p.kind for p in dataset.space.parents]
        for row in dataset.values:
            cells = [
                str(int(v)) if kind == "discrete" else format(float(v), ".9g")
                for v, kind in zip(row, kinds)
            ]
            f.write(",".join(cells) + "\n")
