"""Simulated interventions by resampling.

Continuous parents are histogram-binned (equal-width over the declared
domain) and treated as discrete; resampling draws each target parent's bin
from its marginal and the remaining parents' joint bin from theirs, then
picks an original sample from the matching cell. That breaks parent-parent
dependence without synthesizing a single pixel, and is only possible when
the observed joint distribution has full support over the product of
marginals.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.stats import chi2

from .core import ContractError
from .rng import Stream
from .synthdata import LabeledDataset, Provenance


class SupportError(RuntimeError):
    """Raised when resampling would need samples from an empty joint cell."""

    def __init__(self, message: str, cells: list):
        super().__init__(message)
        self.cells = cells


@dataclass(frozen=True)
class Binning:
    """Bin assignment rule for one parent."""

    parent: int
    edges: np.ndarray  # len n_bins+1 for continuous; class ids for discrete
    counts: np.ndarray
    discrete: bool

    @property
    def n_bins(self) -> int:
        return len(self.counts)

    def assign(self, values: np.ndarray) -> np.ndarray:
        values = np.asarray(values, dtype=np.float64)
        if self.discrete:
            return values.astype(np.int64)
        lo = float(self.edges[0])
        hi = float(self.edges[-1])
        width = (hi - lo) / self.n_bins
        idx = np.floor((values - lo) / width).astype(np.int64)
        # right-open bins; the last bin is right-closed
        return np.clip(idx, 0, self.n_bins - 1)


def bin_parent(dataset: LabeledDataset, k: int, n_bins: int) -> Binning:
    """Equal-width histogram over the declared domain of parent ``k``."""
    p = dataset.space.parents[k]
    col = dataset.column(k)
    if p.kind == "discrete":
        edges = np.arange(p.cardinality + 1, dtype=np.float64)
        counts = np.bincount(col.astype(np.int64), minlength=p.cardinality)
        return Binning(k, edges, counts, discrete=True)
    if n_bins < 2:
        raise ContractError("n_bins must be >= 2 for continuous parents")
    edges = p.lower + (p.upper - p.lower) * np.arange(n_bins + 1) / n_bins
    binning = Binning(k, edges, np.zeros(n_bins, dtype=np.int64), discrete=False)
    counts = np.bincount(binning.assign(col), minlength=n_bins)
    return Binning(k, edges, counts, discrete=False)


@dataclass(frozen=True)
class SupportReport:
    """Occupancy of (target-parent bins x joint bins of the rest)."""

    target: int
    table: np.ndarray            # (target bins, rest joint bins)
    rest_parents: tuple[int, ...]
    rest_shape: tuple[int, ...]
    empty_cells: tuple[tuple, ...]  # (target_bin, rest bins...) per empty cell

    @property
    def full_support(self) -> bool:
        return len(self.empty_cells) == 0

    def to_json(self) -> str:
        cells = []
        for t in range(self.table.shape[0]):
            for j in range(self.table.shape[1]):
                rest = np.unravel_index(j, self.rest_shape) if self.rest_shape else ()
                cells.append([[t, *map(int, rest)], int(self.table[t, j])])
        return json.dumps({
            "target": self.target,
            "cells": cells,
            "empty": [list(c) for c in self.empty_cells],
            "full_support": self.full_support,
        }, sort_keys=True)


def _joint_index(bins: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if not shape:
        return np.zeros(bins.shape[0], dtype=np.int64)
    return np.ravel_multi_index(tuple(bins.T), shape)


def support_report(dataset: LabeledDataset, target: int,
                   binnings: Sequence[Binning]) -> SupportReport:
    by_parent = {b.parent: b for b in binnings}
    missing = [p for p in range(len(dataset.space)) if p not in by_parent]
    if missing:
        raise ContractError(f"binnings missing for parents {missing}")
    t_bins = by_parent[target].assign(dataset.column(target))
    rest_parents = tuple(p for p in range(len(dataset.space)) if p != target)
    rest_shape = tuple(by_parent[p].n_bins for p in rest_parents)
    rest_bins = np.column_stack(
        [by_parent[p].assign(dataset.column(p)) for p in rest_parents]
    ) if rest_parents else np.zeros((len(dataset), 0), dtype=np.int64)
    joint = _joint_index(rest_bins, rest_shape)
    n_joint = int(np.prod(rest_shape)) if rest_shape else 1
    table = np.zeros((by_parent[target].n_bins, n_joint), dtype=np.int64)
    np.add.at(table, (t_bins, joint), 1)
    empty = []
    for t, j in zip(*np.nonzero(table == 0)):
        rest = np.unravel_index(int(j), rest_shape) if rest_shape else ()
        empty.append((int(t), *map(int, rest)))
    return SupportReport(target, table, rest_parents, rest_shape, tuple(empty))


def resample_intervention(dataset: LabeledDataset, targets: Sequence[int],
                          binnings: Sequence[Binning], n_out: int | None,
                          seed: int) -> LabeledDataset:
    """Resample so every target parent follows its marginal, independently.

    Never substitutes for an empty cell: raises :class:`SupportError` naming
    the offending cells instead.
    """
    targets = sorted(set(int(t) for t in targets))
    if not targets:
        raise ContractError("at least one target parent is required")
    by_parent = {b.parent: b for b in binnings}
    n = len(dataset)
    n_out = n if n_out is None else int(n_out)

    for t in targets:
        report = support_report(dataset, t, binnings)
        if not report.full_support:
            raise SupportError(
                f"joint distribution lacks full support for target parent {t}: "
                f"{len(report.empty_cells)} empty cell(s), e.g. {report.empty_cells[0]}",
                list(report.empty_cells),
            )

    rest_parents = tuple(p for p in range(len(dataset.space)) if p not in targets)
    target_bins = np.column_stack([by_parent[t].assign(dataset.column(t)) for t in targets])
    rest_shape = tuple(by_parent[p].n_bins for p in rest_parents)
    rest_bins = np.column_stack(
        [by_parent[p].assign(dataset.column(p)) for p in rest_parents]
    ) if rest_parents else np.zeros((n, 0), dtype=np.int64)
    rest_joint = _joint_index(rest_bins, rest_shape)

    # members of every (target bins..., rest joint) cell
    full_shape = tuple(by_parent[t].n_bins for t in targets) + (max(
        int(np.prod(rest_shape)) if rest_shape else 1, 1),)
    cell_of = np.ravel_multi_index(
        tuple(target_bins.T) + (rest_joint,), full_shape)
    order = np.argsort(cell_of, kind="stable")
    sorted_cells = cell_of[order]
    starts = np.searchsorted(sorted_cells, np.arange(int(np.prod(full_shape)) + 1))

    # marginal CDFs to draw from
    t_cdfs = [np.cumsum(by_parent[t].counts) / n for t in targets]
    rest_counts = np.bincount(rest_joint, minlength=full_shape[-1])
    rest_cdf = np.cumsum(rest_counts) / n

    stream = Stream(seed, "resample")
    chosen = np.empty(n_out, dtype=np.int64)
    for i in range(n_out):
        draws = stream.child(i)
        t_draw = tuple(
            int(np.searchsorted(t_cdfs[j], draws.u01(j), side="right"))
            for j in range(len(targets))
        )
        rest_draw = int(np.searchsorted(rest_cdf, draws.u01(len(targets)), side="right"))
        cell = np.ravel_multi_index(t_draw + (rest_draw,), full_shape)
        lo, hi = starts[cell], starts[cell + 1]
        if hi == lo:
            rest = np.unravel_index(rest_draw, rest_shape) if rest_shape else ()
            raise SupportError(
                f"empty joint cell for target bins {t_draw} and rest bins {tuple(map(int, rest))}",
                [(*t_draw, *map(int, rest))],
            )
        chosen[i] = order[lo + draws.randint(len(targets) + 1, hi - lo)]

    out = dataset.subset(chosen)
    return LabeledDataset(out.space, out.pixels, out.values, out.exogenous,
                          Provenance("intervened", seed))


def chi_square_independence(table: np.ndarray) -> tuple[float, int, float, float]:
    """Pearson chi-squared test of independence on a contingency table.

    Returns (statistic, dof, p_value, cramers_v). Rows/columns with zero
    totals are dropped first.
    """
    table = np.asarray(table, dtype=np.float64)
    table = table[table.sum(axis=1) > 0][:, table.sum(axis=0) > 0]
    n = table.sum()
    rows = table.sum(axis=1, keepdims=True)
    cols = table.sum(axis=0, keepdims=True)
    expected = rows @ cols / n
    stat = float(((table - expected) ** 2 / expected).sum())
    r, c = table.shape
    dof = (r - 1) * (c - 1)
    if dof <= 0:
        return 0.0, 0, 1.0, 0.0
    p = float(chi2.sf(stat, dof))
    v = float(np.sqrt(stat / (n * (min(r, c) - 1))))
    return stat, dof, p, v


def contingency(a_bins: np.ndarray, b_bins: np.ndarray,
                a_size: int, b_size: int) -> np.ndarray:
    table = np.zeros((a_size, b_size), dtype=np.int64)
    np.add.at(table, (np.asarray(a_bins, dtype=np.int64),
                      np.asarray(b_bins, dtype=np.int64)), 1)
    return table
