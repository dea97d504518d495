"""Structured errors shared across the toolkit.

Every user-facing failure carries a stable machine-readable code and, where
it applies, the key path of the offending descriptor entry. Errors render to
JSON lines so the CLI can stream them.
"""

from __future__ import annotations

import json


class DetsdvError(Exception):
    """Base error with a stable code and optional descriptor key path."""

    def __init__(self, code: str, message: str, key_path: str = ""):
        super().__init__(message)
        self.code = code
        self.message = message
        self.key_path = key_path

    def to_dict(self) -> dict:
        return {"code": self.code, "key_path": self.key_path, "message": self.message}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    def __str__(self) -> str:  # pragma: no cover - cosmetic
        if self.key_path:
            return f"{self.code} at {self.key_path}: {self.message}"
        return f"{self.code}: {self.message}"


class DescriptorError(DetsdvError):
    """Raised by descriptor parsing/validation (SYNTAX, SCHEMA, INVARIANT, DISCONNECTED)."""


class PlanningError(DetsdvError):
    """Raised by placement and TSN synthesis (NO_FEASIBLE_NODE, CAPACITY_EXHAUSTED,
    NO_PATH, NO_DISJOINT_PATH, INFEASIBLE_SCHEDULE, OVERSUBSCRIBED, UNSCHEDULED_FLOW)."""


class SimulationError(DetsdvError):
    """Raised by the simulator (CONFIG_MISMATCH, UNKNOWN_LINK)."""


class GatewayError(DetsdvError):
    """Raised by the CAN gateway codec (MALFORMED_RECORD)."""
