# cython: boundscheck=False, wraparound=False, cdivision=True
# Compiled twin of kernels/_python.py; keep the arithmetic in the same
# order so both backends produce bit-identical images.

import numpy as np

from libc.math cimport sqrt


def coverage_image(double[:, ::1] segments, int height, int width,
                   double radius, double aa):
    out = np.empty((height, width), dtype=np.float64)
    cdef double[:, ::1] cov = out
    cdef Py_ssize_t r, c, s
    cdef Py_ssize_t nseg = segments.shape[0]
    cdef double px, py, x0, y0, x1, y1, dx, dy, len2, t, ex, ey, d, dmin, v
    cdef double rp = radius + 0.5 * aa
    cdef double inv = 1.0 / aa
    for r in range(height):
        py = r + 0.5
        for c in range(width):
            px = c + 0.5
            dmin = 1e30
            for s in range(nseg):
                x0 = segments[s, 0]
                y0 = segments[s, 1]
                x1 = segments[s, 2]
                y1 = segments[s, 3]
                dx = x1 - x0
                dy = y1 - y0
                len2 = dx * dx + dy * dy
                t = ((px - x0) * dx + (py - y0) * dy) / len2
                if t < 0.0:
                    t = 0.0
                elif t > 1.0:
                    t = 1.0
                ex = px - (x0 + t * dx)
                ey = py - (y0 + t * dy)
                d = sqrt(ex * ex + ey * ey)
                if d < dmin:
                    dmin = d
            v = (rp - dmin) * inv
            if v < 0.0:
                v = 0.0
            elif v > 1.0:
                v = 1.0
            cov[r, c] = v
    return out
