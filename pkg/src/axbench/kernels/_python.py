"""Numpy fallback for the stroke-coverage rasterizer.

Must stay bit-identical to kernels/_native.pyx: same per-element operation
order, only +,-,*,/ ,sqrt, min and clamps (all exact or correctly rounded
under IEEE-754).
"""

import numpy as np

_GRIDS: dict[tuple[int, int], tuple[np.ndarray, np.ndarray]] = {}


def _grid(height: int, width: int) -> tuple[np.ndarray, np.ndarray]:
    key = (height, width)
    g = _GRIDS.get(key)
    if g is None:
        ys, xs = np.mgrid[0:height, 0:width]
        g = (xs + 0.5, ys + 0.5)
        _GRIDS[key] = g
    return g


def coverage_image(segments: np.ndarray, height: int, width: int,
                   radius: float, aa: float) -> np.ndarray:
    """Antialiased coverage of a set of thick line segments.

    segments: float64 (S, 4) rows (x0, y0, x1, y1) in pixel coordinates;
    pixel centers sit at (col + 0.5, row + 0.5). Coverage is
    clamp01((radius + aa/2 - d) / aa) of the distance d to the nearest
    segment.
    """
    segments = np.ascontiguousarray(segments, dtype=np.float64)
    px, py = _grid(height, width)
    dmin = np.full((height, width), 1e30, dtype=np.float64)
    for x0, y0, x1, y1 in segments:
        dx = x1 - x0
        dy = y1 - y0
        len2 = dx * dx + dy * dy
        t = ((px - x0) * dx + (py - y0) * dy) / len2
        np.clip(t, 0.0, 1.0, out=t)
        ex = px - (x0 + t * dx)
        ey = py - (y0 + t * dy)
        d = np.sqrt(ex * ex + ey * ey)
        np.minimum(dmin, d, out=dmin)
    rp = radius + 0.5 * aa
    inv = 1.0 / aa
    cov = (rp - dmin) * inv
    np.clip(cov, 0.0, 1.0, out=cov)
    return cov
