"""Deterministic service deployment planning and TSN network simulation for
software-defined vehicles: declarative descriptors in, validated placement +
shaper configuration + reliability paths out, verified in a reproducible
discrete-event simulator."""

__version__ = "0.1.0"

from .descriptors import (
    parse_service_descriptor,
    parse_topology_descriptor,
    serialize,
)
from .errors import (
    DescriptorError,
    DetsdvError,
    GatewayError,
    PlanningError,
    SimulationError,
)
from .netsim import SimConfig, compute_metrics, run
from .plan import build_plan

__all__ = [
    "DescriptorError",
    "DetsdvError",
    "GatewayError",
    "PlanningError",
    "SimulationError",
    "SimConfig",
    "build_plan",
    "compute_metrics",
    "parse_service_descriptor",
    "parse_topology_descriptor",
    "run",
    "serialize",
]
