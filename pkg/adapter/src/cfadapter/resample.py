"""Marginal resampling for the GAN's interventional target distribution.

Continuous parents are histogram-binned (5 equal-width bins over the declared
domain) and resampled as if discrete: draw each parent's bin from its
marginal, then a sample from the matching joint cell. Requires full support.
"""

from __future__ import annotations

import numpy as np

from .data import Dataset


def _bins(ds: Dataset, k: int, n_bins: int = 5) -> tuple[np.ndarray, int]:
    p = ds.parents[k]
    col = ds.values[:, k]
    if p.kind == "discrete":
        return col.astype(np.int64), p.cardinality
    width = (p.upper - p.lower) / n_bins
    idx = np.floor((col - p.lower) / width).astype(np.int64)
    return np.clip(idx, 0, n_bins - 1), n_bins


def resample_indices(ds: Dataset, n_out: int, rng: np.random.Generator,
                     n_bins: int = 5) -> np.ndarray:
    """Sample indices whose parents follow independent marginals."""
    per_parent = [_bins(ds, k, n_bins) for k in range(len(ds.parents))]
    shape = tuple(size for _, size in per_parent)
    joint = np.ravel_multi_index(tuple(b for b, _ in per_parent), shape)
    order = np.argsort(joint, kind="stable")
    starts = np.searchsorted(joint[order], np.arange(int(np.prod(shape)) + 1))

    cdfs = []
    for bins, size in per_parent:
        counts = np.bincount(bins, minlength=size)
        cdfs.append(np.cumsum(counts) / len(ds))

    out = np.empty(n_out, dtype=np.int64)
    for i in range(n_out):
        draw = tuple(int(np.searchsorted(cdf, rng.random(), side="right"))
                     for cdf in cdfs)
        cell = np.ravel_multi_index(draw, shape)
        lo, hi = starts[cell], starts[cell + 1]
        if hi == lo:
            raise ValueError(f"empty joint cell {draw}: dataset lacks full support")
        out[i] = order[lo + rng.integers(0, hi - lo)]
    return out
