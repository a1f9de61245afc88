"""Axiomatic soundness benchmarks for black-box counterfactual image models."""

from .core import (Capabilities, ContinuousParent, ContractError,
                   CounterfactualModel, DiscreteParent, ModelError, Observation,
                   ParentAssignment, ParentSpace, apply, apply_partial,
                   decompose_full)
from .kernels import BACKEND as KERNEL_BACKEND
from .soundness import (EvalConfig, SoundnessReport, commutativity_deviation,
                        composition, effectiveness, evaluate_suite, l1,
                        reversibility)

__version__ = "0.1.0"

__all__ = [
    "Capabilities", "ContinuousParent", "ContractError", "CounterfactualModel",
    "DiscreteParent", "ModelError", "Observation", "ParentAssignment",
    "ParentSpace", "apply", "apply_partial", "decompose_full",
    "EvalConfig", "SoundnessReport", "commutativity_deviation", "composition",
    "effectiveness", "evaluate_suite", "l1", "reversibility",
    "KERNEL_BACKEND", "__version__",
]
