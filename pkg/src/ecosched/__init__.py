"""Online energy-aware scheduling simulators with duality certificates.

Four single-package problem settings share the same toolbox: piecewise-
constant profiles, exact water-filling, a power family with its derived
constants, offline oracles, and a certificate layer that re-checks every
claimed inequality on each run.
"""
from .model import (
    CostBreakdown,
    GeneratorParams,
    Instance,
    Job,
    MachineState,
    ProblemKind,
    Schedule,
    ValidationError,
    generate_random,
    instance_from_dict,
    instance_to_dict,
    load_instance,
    save_instance,
)
from .power import PowerFunction
from .stepfn import StepFunction, integrate, pointwise_sum

__all__ = [
    "CostBreakdown",
    "GeneratorParams",
    "Instance",
    "Job",
    "MachineState",
    "ProblemKind",
    "Schedule",
    "ValidationError",
    "PowerFunction",
    "StepFunction",
    "generate_random",
    "instance_from_dict",
    "instance_to_dict",
    "integrate",
    "load_instance",
    "pointwise_sum",
    "save_instance",
]
