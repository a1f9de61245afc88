"""Observations, parent spaces, and the black-box counterfactual call contract.

A counterfactual model maps (observation, parents, counterfactual parents) to
a counterfactual observation; a 64-bit ``function_seed`` selects one concrete
function from the model's distribution over functions and is held fixed for
repeated applications on the same observation. Abduction of exogenous noise
is implicit: no operation here ever materializes it.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

log = logging.getLogger(__name__)


class ContractError(ValueError):
    """A call violated a declared pre-condition (shape, domain, ...)."""


class ModelError(RuntimeError):
    """The model itself failed; carries the peer message for external models."""


# --- observations -----------------------------------------------------------


@dataclass(frozen=True)
class Observation:
    """An H x W x C image of unit-interval intensities (float32 storage)."""

    pixels: np.ndarray

    def __post_init__(self):
        arr = np.ascontiguousarray(self.pixels, dtype=np.float32)
        if arr.ndim != 3:
            raise ContractError(f"observation must be HxWxC, got shape {arr.shape}")
        h, w, c = arr.shape
        if h < 1 or w < 1 or c not in (1, 3):
            raise ContractError(f"bad observation shape {arr.shape} (channels must be 1 or 3)")
        lo = float(arr.min())
        hi = float(arr.max())
        if not (0.0 <= lo and hi <= 1.0):
            raise ContractError(f"intensities outside [0, 1]: min={lo}, max={hi}")
        arr.setflags(write=False)
        object.__setattr__(self, "pixels", arr)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def channels(self) -> int:
        return self.pixels.shape[2]

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.pixels.shape

    def content_key(self) -> bytes:
        return self.pixels.tobytes()

    def same_bits(self, other: "Observation") -> bool:
        return self.shape == other.shape and self.pixels.tobytes() == other.pixels.tobytes()


# --- parent spaces and assignments ------------------------------------------


@dataclass(frozen=True)
class DiscreteParent:
    name: str
    cardinality: int

    def __post_init__(self):
        if self.cardinality < 2:
            raise ContractError(f"discrete parent {self.name!r} needs cardinality >= 2")

    kind = "discrete"

    def contains(self, value) -> bool:
        return float(value) == int(value) and 0 <= int(value) < self.cardinality


@dataclass(frozen=True)
class ContinuousParent:
    name: str
    lower: float
    upper: float

    def __post_init__(self):
        if not self.lower < self.upper:
            raise ContractError(f"continuous parent {self.name!r} needs lower < upper")

    kind = "continuous"

    def contains(self, value) -> bool:
        return self.lower <= float(value) <= self.upper


ParentDescriptor = DiscreteParent | ContinuousParent


@dataclass(frozen=True)
class ParentSpace:
    parents: tuple[ParentDescriptor, ...]

    def __post_init__(self):
        object.__setattr__(self, "parents", tuple(self.parents))
        names = [p.name for p in self.parents]
        if len(set(names)) != len(names):
            raise ContractError(f"duplicate parent names: {names}")

    def __len__(self) -> int:
        return len(self.parents)

    def names(self) -> tuple[str, ...]:
        return tuple(p.name for p in self.parents)

    def index_of(self, name: str) -> int:
        for i, p in enumerate(self.parents):
            if p.name == name:
                return i
        raise ContractError(f"unknown parent {name!r} (have {self.names()})")

    def assignment(self, values: Sequence[float]) -> "ParentAssignment":
        return ParentAssignment(tuple(values), self)


@dataclass(frozen=True)
class ParentAssignment:
    """One value per parent: class index for discrete, real for continuous."""

    values: tuple
    space: ParentSpace = field(repr=False)

    def __post_init__(self):
        if len(self.values) != len(self.space):
            raise ContractError(
                f"{len(self.values)} values for {len(self.space)} parents"
            )
        clean = []
        for v, p in zip(self.values, self.space.parents):
            if not p.contains(v):
                raise ContractError(f"value {v!r} outside domain of parent {p.name!r}")
            clean.append(int(v) if p.kind == "discrete" else float(v))
        object.__setattr__(self, "values", tuple(clean))

    def __getitem__(self, k: int):
        return self.values[k]

    def replace(self, k: int, value) -> "ParentAssignment":
        vals = list(self.values)
        vals[k] = value
        return ParentAssignment(tuple(vals), self.space)

    def changed_indices(self, other: "ParentAssignment") -> list[int]:
        return [k for k, (a, b) in enumerate(zip(self.values, other.values)) if a != b]


# --- the model contract ------------------------------------------------------


@dataclass(frozen=True)
class Capabilities:
    supports_partial: bool = False
    deterministic: bool = True
    single_threaded: bool = False


class CounterfactualModel:
    """Base class for anything implementing x* := f(x, pa, pa*).

    Subclasses must be pure in (x, pa, pa*, function_seed): repeated calls
    with identical arguments return bit-identical observations. Stochastic
    behaviour is carried entirely by the function_seed, which selects one
    function from the model's function distribution.
    """

    space: ParentSpace
    shape: tuple[int, int, int]
    capabilities: Capabilities = Capabilities()
    name: str = "model"

    def _apply(self, x: Observation, pa: ParentAssignment,
               pa_star: ParentAssignment, function_seed: int) -> Observation:
        raise NotImplementedError

    def _apply_partial(self, x: Observation, k: int, pa_k, pa_k_star,
                       function_seed: int) -> Observation:
        raise NotImplementedError


def _check_call(model: CounterfactualModel, x: Observation,
                *assignments: ParentAssignment) -> None:
    if x.shape != tuple(model.shape):
        raise ContractError(
            f"observation shape {x.shape} does not match model shape {tuple(model.shape)}"
        )
    for a in assignments:
        if a.space is not model.space and a.space != model.space:
            raise ContractError("assignment does not conform to the model's parent space")


def apply(model: CounterfactualModel, x: Observation, pa: ParentAssignment,
          pa_star: ParentAssignment, function_seed: int) -> Observation:
    """Full counterfactual call x* := f(x, pa, pa*)."""
    _check_call(model, x, pa, pa_star)
    out = model._apply(x, pa, pa_star, function_seed & ((1 << 64) - 1))
    if out.shape != x.shape:
        raise ContractError(
            f"model {model.name!r} returned shape {out.shape} for input {x.shape}"
        )
    return out


def apply_partial(model: CounterfactualModel, x: Observation, k: int,
                  pa_k, pa_k_star, function_seed: int,
                  full_assignment: ParentAssignment | None = None) -> Observation:
    """Partial call x* := f_k(x, pa_k, pa_k*): change one parent, hold the rest.

    Models without native partial support need ``full_assignment`` so the
    call can lower to ``apply`` with a one-coordinate substitution.
    """
    if not 0 <= k < len(model.space):
        raise ContractError(f"parent index {k} out of range for {len(model.space)} parents")
    parent = model.space.parents[k]
    for v in (pa_k, pa_k_star):
        if not parent.contains(v):
            raise ContractError(f"value {v!r} outside domain of parent {parent.name!r}")
    _check_call(model, x)
    if model.capabilities.supports_partial:
        out = model._apply_partial(x, k, pa_k, pa_k_star, function_seed & ((1 << 64) - 1))
        if out.shape != x.shape:
            raise ContractError(
                f"model {model.name!r} returned shape {out.shape} for input {x.shape}"
            )
        return out
    if full_assignment is None:
        raise ContractError(
            f"model {model.name!r} has no native partial support and no full "
            "assignment was supplied for lowering"
        )
    if full_assignment[k] != pa_k:
        raise ContractError(
            f"full assignment has {full_assignment[k]!r} at coordinate {k}, but "
            f"the partial call claims pa_k={pa_k!r}"
        )
    return apply(model, x, full_assignment, full_assignment.replace(k, pa_k_star),
                 function_seed)


def decompose_full(model: CounterfactualModel, x: Observation,
                   pa: ParentAssignment, pa_star: ParentAssignment,
                   order: Sequence[int], function_seed: int) -> Observation:
    """Apply the full intervention as ordered one-parent partial steps.

    ``order`` must be a permutation of the changed coordinates. For an ideal
    model the result is independent of the order.
    """
    changed = pa.changed_indices(pa_star)
    if sorted(order) != sorted(changed):
        raise ContractError(
            f"order {list(order)} is not a permutation of changed coordinates {changed}"
        )
    current = pa
    out = x
    for k in order:
        out = apply_partial(model, out, k, current[k], pa_star[k], function_seed,
                            full_assignment=current)
        current = current.replace(k, pa_star[k])
    return out


def clamp_pixels(raw: np.ndarray, source: str = "model") -> np.ndarray:
    """Clamp intensities to [0, 1], warning when that changes anything real."""
    clipped = np.clip(raw, 0.0, 1.0)
    drift = float(np.max(np.abs(clipped - raw))) if raw.size else 0.0
    if drift > 1e-6:
        log.warning("%s produced out-of-range intensities (clamped by up to %.3g)",
                    source, drift)
    return clipped
