"""Soundness metrics: composition, reversibility, effectiveness, commutativity.

Composition measures the distance between an observation and its m-fold
null-transformed image; reversibility the distance after m forward/backward
intervention cycles; effectiveness reads the intervened parent back out of
the counterfactual with a pseudo-oracle. A commutativity deviation compares
the two orders of applying two partial interventions. ``evaluate_suite``
aggregates everything over samples and seeds into a serializable report,
with the per-observation function seed drawn once and reused across that
observation's powers and cycles.
"""

from __future__ import annotations

import threading
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from . import core
from .core import ContractError, CounterfactualModel, ModelError, Observation
from .oracle import oracle_quality
from .rng import Stream
from .synthdata import LabeledDataset


# --- distances ----------------------------------------------------------------


def l1(a: Observation, b: Observation) -> float:
    """Mean absolute intensity difference, in percentage points of [0, 1]."""
    if a.shape != b.shape:
        raise ContractError(f"shape mismatch {a.shape} vs {b.shape}")
    diff = np.abs(a.pixels.astype(np.float64) - b.pixels.astype(np.float64))
    return 100.0 * float(diff.mean())


@dataclass(frozen=True)
class DistanceFn:
    identifier: str
    fn: Callable[[Observation, Observation], float]

    def __call__(self, a: Observation, b: Observation) -> float:
        return self.fn(a, b)


_DISTANCES = {"l1": DistanceFn("l1", l1)}


def get_distance(identifier: str) -> DistanceFn:
    try:
        return _DISTANCES[identifier]
    except KeyError:
        raise ContractError(f"unknown distance {identifier!r} (have {sorted(_DISTANCES)})")


# --- per-observation metrics -----------------------------------------------------


def composition(model: CounterfactualModel, x: Observation, pa,
                m: int, d: DistanceFn, function_seed: int) -> list[float]:
    """d(x, f^(i)(x, pa, pa)) for i = 1..m with one fixed function seed."""
    if m < 1:
        raise ContractError("m must be >= 1")
    out = []
    current = x
    for _ in range(m):
        current = core.apply(model, current, pa, pa, function_seed)
        out.append(d(x, current))
    return out


def reversibility(model: CounterfactualModel, x: Observation, pa, pa_star,
                  m: int, d: DistanceFn, function_seed: int) -> list[float]:
    """d(x, p^(i)(x, pa, pa*)) for i = 1..m, p = backward(forward(.))."""
    if m < 1:
        raise ContractError("m must be >= 1")
    out = []
    current = x
    for _ in range(m):
        forward = core.apply(model, current, pa, pa_star, function_seed)
        current = core.apply(model, forward, pa_star, pa, function_seed)
        out.append(d(x, current))
    return out


def effectiveness(model: CounterfactualModel, oracle, x: Observation, pa,
                  k: int, pa_k_star, function_seed: int) -> float:
    """Per-sample effectiveness: 0/1 correctness or 100*|error| of the readout."""
    if oracle.parent != k:
        raise ContractError(f"oracle targets parent {oracle.parent}, not {k}")
    out = core.apply_partial(model, x, k, pa[k], pa_k_star, function_seed,
                             full_assignment=pa)
    pred = oracle.predict(out)
    if oracle.kind == "classifier":
        return 1.0 if pred == pa_k_star else 0.0
    return 100.0 * abs(float(pred) - float(pa_k_star))


def commutativity_deviation(model: CounterfactualModel, x: Observation,
                            i: int, j: int, pa, value_i, value_j,
                            d: DistanceFn, function_seed: int) -> float:
    """Distance between applying partials (i then j) and (j then i)."""
    if i == j:
        raise ContractError("commutativity needs two distinct parents")
    a = core.apply_partial(model, x, i, pa[i], value_i, function_seed, full_assignment=pa)
    a = core.apply_partial(model, a, j, pa[j], value_j, function_seed,
                           full_assignment=pa.replace(i, value_i))
    b = core.apply_partial(model, x, j, pa[j], value_j, function_seed, full_assignment=pa)
    b = core.apply_partial(model, b, i, pa[i], value_i, function_seed,
                           full_assignment=pa.replace(j, value_j))
    return d(a, b)


# --- suite evaluation --------------------------------------------------------------


@dataclass(frozen=True)
class EvalConfig:
    m: int = 10
    targets: tuple[int, ...] | None = None   # parent indices; None = all
    n_samples: int = 1000
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    distance: str = "l1"
    commutativity: bool = True
    workers: int = 1   # worker-pool width; never changes the result

    def __post_init__(self):
        if self.m < 1:
            raise ContractError("m must be >= 1")
        if not self.seeds:
            raise ContractError("at least one seed is required")
        if self.workers < 1:
            raise ContractError("workers must be >= 1")


@dataclass
class SoundnessReport:
    """Aggregates plus the raw per-sample table (auditable by construction)."""

    model: str
    dataset: dict
    config: dict
    targets: list[str]
    composition: dict
    reversibility: dict
    effectiveness: dict
    preservation: dict
    commutativity: dict
    oracle_quality: dict
    failures: dict
    columns: list[str] = field(default_factory=list)
    rows: list[list] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "dataset": self.dataset,
            "config": self.config,
            "seeds": self.config["seeds"],
            "metrics": {
                "composition": self.composition,
                "reversibility": self.reversibility,
                "effectiveness": self.effectiveness,
                "preservation": self.preservation,
                "commutativity": self.commutativity,
            },
            "oracle_quality": self.oracle_quality,
            "failures": self.failures,
        }


def _choose_indices(stream: Stream, n: int, count: int) -> np.ndarray:
    """count distinct indices from range(n), deterministic partial shuffle."""
    if count > n:
        raise ContractError(f"n_samples={count} exceeds dataset size {n}")
    pool = np.arange(n)
    for i in range(count):
        j = i + stream.randint(i, n - i)
        pool[i], pool[j] = pool[j], pool[i]
    return pool[:count]


def _mean_std(per_seed: np.ndarray) -> tuple:
    mean = float(np.mean(per_seed))
    std = float(np.std(per_seed, ddof=1)) if per_seed.size > 1 else 0.0
    return mean, std


def evaluate_suite(model: CounterfactualModel, test_dataset: LabeledDataset,
                   oracles: Mapping[int, object], config: EvalConfig) -> SoundnessReport:
    """Run all soundness metrics for one model over samples and seeds."""
    space = test_dataset.space
    d = get_distance(config.distance)
    targets = tuple(config.targets) if config.targets is not None \
        else tuple(range(len(space)))
    for t in targets:
        if t not in oracles:
            raise ContractError(f"no oracle for requested target parent {t}")
    pairs = [(i, j) for a, i in enumerate(targets) for j in targets[a + 1:]] \
        if config.commutativity else []
    names = space.names()
    m = config.m
    n_obs = config.n_samples
    n_ds = len(test_dataset)
    h, w, c = test_dataset.shape

    comp_seed_means = np.zeros((len(config.seeds), m))
    rev_seed_means = {t: np.zeros((len(config.seeds), m)) for t in targets}
    eff_seed_means = {t: np.zeros(len(config.seeds)) for t in targets}
    pres_seed_means = {t: {p: np.zeros(len(config.seeds)) for p in oracles if p != t}
                       for t in targets}
    comm_seed_means = {pair: np.zeros(len(config.seeds)) for pair in pairs}
    failures = {"composition": 0, "reversibility": 0, "effectiveness": 0,
                "commutativity": 0}

    columns = ["seed", "sample_index"]
    columns += [f"composition_{i + 1}" for i in range(m)]
    for t in targets:
        columns += [f"reversibility_{names[t]}_{i + 1}" for i in range(m)]
    for t in targets:
        columns.append(f"effectiveness_{names[t]}")
        columns += [f"preservation_{names[t]}_{names[p]}"
                    for p in oracles if p != t]
    columns += [f"commutativity_{names[i]}|{names[j]}" for i, j in pairs]
    rows: list[list] = []

    for s_pos, seed in enumerate(config.seeds):
        root = Stream(seed, "evaluate")
        sel = _choose_indices(root.child("select"), n_ds, n_obs)
        fseed_stream = root.child("fseed")
        target_streams = {t: root.child("target", t) for t in targets}

        comp_vals = np.full((n_obs, m), np.nan)
        rev_vals = {t: np.full((n_obs, m), np.nan) for t in targets}
        eff_out = {t: np.zeros((n_obs, h, w, c), dtype=np.float32) for t in targets}
        eff_ok = {t: np.zeros(n_obs, dtype=bool) for t in targets}
        star_vals = {t: np.zeros(n_obs) for t in targets}
        comm_vals = {pair: np.full(n_obs, np.nan) for pair in pairs}
        fail_counts = {key: np.zeros(n_obs, dtype=np.int64) for key in failures}

        serialize = model.capabilities.single_threaded and config.workers > 1
        call_lock = threading.Lock() if serialize else None

        def work(pos: int, idx: int) -> None:
            x = test_dataset.observation(idx)
            pa = test_dataset.assignment(idx)
            fs = fseed_stream.u64(idx)

            try:
                comp_vals[pos] = composition(model, x, pa, m, d, fs)
            except ModelError:
                fail_counts["composition"][pos] += 1

            stars = {}
            for t in targets:
                r = target_streams[t].randint(idx, n_ds)
                v = test_dataset.values[r, t]
                stars[t] = int(v) if space.parents[t].kind == "discrete" else float(v)
                star_vals[t][pos] = stars[t]

            for t in targets:
                try:
                    rev_vals[t][pos] = reversibility(
                        model, x, pa, pa.replace(t, stars[t]), m, d, fs)
                except ModelError:
                    fail_counts["reversibility"][pos] += 1
                try:
                    out = core.apply_partial(model, x, t, pa[t], stars[t], fs,
                                             full_assignment=pa)
                    eff_out[t][pos] = out.pixels
                    eff_ok[t][pos] = True
                except ModelError:
                    fail_counts["effectiveness"][pos] += 1

            for i, j in pairs:
                try:
                    comm_vals[(i, j)][pos] = commutativity_deviation(
                        model, x, i, j, pa, stars[i], stars[j], d, fs)
                except ModelError:
                    fail_counts["commutativity"][pos] += 1

        def guarded(pos: int, idx: int) -> None:
            if call_lock is None:
                work(pos, idx)
            else:
                with call_lock:
                    work(pos, idx)

        if config.workers == 1:
            for pos, idx in enumerate(sel):
                work(pos, int(idx))
        else:
            # per-position writes touch disjoint array slots, so completion
            # order never affects the aggregates
            with ThreadPoolExecutor(max_workers=config.workers) as pool:
                list(pool.map(lambda item: guarded(item[0], int(item[1])),
                              enumerate(sel)))
        for key in failures:
            failures[key] += int(fail_counts[key].sum())

        # batched oracle readouts of the per-target counterfactuals
        eff_vals = {t: np.full(n_obs, np.nan) for t in targets}
        pres_vals = {t: {} for t in targets}
        for t in targets:
            ok = eff_ok[t]
            if ok.any():
                block = eff_out[t][ok]
                for p, oracle in oracles.items():
                    pred = oracle.predict_batch(block)
                    if p == t:
                        expected = star_vals[t][ok]
                    else:
                        expected = test_dataset.values[sel, p][ok]
                    if oracle.kind == "classifier":
                        scored = 100.0 * (pred == expected.astype(np.int64))
                    else:
                        scored = 100.0 * np.abs(pred - expected)
                    if p == t:
                        eff_vals[t][ok] = scored
                    else:
                        pres_vals[t][p] = np.full(n_obs, np.nan)
                        pres_vals[t][p][ok] = scored
            for p in oracles:
                if p != t and p not in pres_vals[t]:
                    pres_vals[t][p] = np.full(n_obs, np.nan)

        with warnings.catch_warnings():
            # all-failed metrics aggregate to NaN on purpose
            warnings.simplefilter("ignore", RuntimeWarning)
            comp_seed_means[s_pos] = np.nanmean(comp_vals, axis=0)
            for t in targets:
                rev_seed_means[t][s_pos] = np.nanmean(rev_vals[t], axis=0)
                eff_seed_means[t][s_pos] = np.nanmean(eff_vals[t])
                for p in pres_vals[t]:
                    pres_seed_means[t][p][s_pos] = np.nanmean(pres_vals[t][p])
            for pair in pairs:
                comm_seed_means[pair][s_pos] = np.nanmean(comm_vals[pair])

        for pos in range(n_obs):
            row: list = [seed, int(sel[pos])]
            row += [float(v) for v in comp_vals[pos]]
            for t in targets:
                row += [float(v) for v in rev_vals[t][pos]]
            for t in targets:
                row.append(float(eff_vals[t][pos]))
                row += [float(pres_vals[t][p][pos]) for p in oracles if p != t]
            row += [float(comm_vals[pair][pos]) for pair in pairs]
            rows.append(row)

    def stats_block(per_seed: np.ndarray) -> dict:
        if per_seed.ndim == 1:
            mean, std = _mean_std(per_seed)
            return {"mean": mean, "std": std,
                    "per_seed": [float(v) for v in per_seed]}
        means, stds = zip(*(_mean_std(per_seed[:, i]) for i in range(per_seed.shape[1])))
        return {"m": list(range(1, m + 1)),
                "mean": list(means), "std": list(stds),
                "per_seed": [[float(v) for v in row] for row in per_seed]}

    quality = {}
    for p, oracle in oracles.items():
        q = oracle_quality(oracle, test_dataset)
        quality[names[p]] = {"kind": q.kind, "value": q.value, "n": q.n_samples}

    report = SoundnessReport(
        model=getattr(model, "name", model.__class__.__name__),
        dataset={"scm": test_dataset.provenance.scm,
                 "seed": test_dataset.provenance.seed,
                 "n": n_ds, "shape": [h, w, c]},
        config={"m": m, "n_samples": n_obs, "seeds": list(config.seeds),
                "distance": config.distance,
                "targets": [names[t] for t in targets]},
        targets=[names[t] for t in targets],
        composition=stats_block(comp_seed_means),
        reversibility={names[t]: stats_block(rev_seed_means[t]) for t in targets},
        effectiveness={
            names[t]: {"kind": space.parents[t].kind,
                       **stats_block(eff_seed_means[t])}
            for t in targets
        },
        preservation={
            names[t]: {
                names[p]: {"kind": space.parents[p].kind,
                           **stats_block(pres_seed_means[t][p])}
                for p in pres_seed_means[t]
            }
            for t in targets
        },
        commutativity={
            f"{names[i]}|{names[j]}": stats_block(comm_seed_means[(i, j)])
            for i, j in pairs
        },
        oracle_quality=quality,
        failures=failures,
        columns=columns,
        rows=rows,
    )
    return report
