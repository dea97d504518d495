"""ECU filtering, scoring, and replica placement for service flows.

Scoring is a weighted mean of per-field satisfaction: capacity fields score
residual/(residual+required) (exact fit 0.5, abundance approaching 1), the
gpu flag scores 1 when matched and only enters the mean when required.
Weights follow field criticality (MUST 1.0, SHOULD 0.5, MAY 0.25). Placement
is greedy per flow in descriptor order with best-effort anti-affinity.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

from .descriptors import (
    CritLevel,
    EcuNode,
    NodeSpec,
    ServiceDescriptor,
    TopologyDescriptor,
)
from .errors import PlanningError

_WEIGHTS = {CritLevel.MUST: 1.0, CritLevel.SHOULD: 0.5, CritLevel.MAY: 0.25}


@dataclass(frozen=True)
class Capacities:
    cpu: int
    memory: int
    storage: int

    def minus(self, spec: NodeSpec) -> "Capacities":
        return Capacities(self.cpu - spec.cpu, self.memory - spec.memory,
                          self.storage - spec.storage)


@dataclass(frozen=True)
class Violation:
    field: str
    required: object
    available: object
    criticality: CritLevel


@dataclass(frozen=True)
class NodeScore:
    ecu_id: str
    feasible: bool
    score: float
    violated: tuple  # of Violation
    energy_class: int = 0


@dataclass(frozen=True)
class Assignment:
    flow_id: str
    node_role: str
    replica_index: int
    ecu_id: str


@dataclass
class PlacementPlan:
    assignments: list
    residual_capacities: dict  # ecu_id -> Capacities
    warnings: list


@dataclass(frozen=True)
class AdmissionVerdict:
    flow_id: str
    admitted: bool
    bound_us: Optional[float]
    binding: Optional[str]


def initial_capacities(topology: TopologyDescriptor) -> dict:
    return {e.id: Capacities(e.cpu_cores, e.memory, e.storage) for e in topology.ecus}


def score_node(spec: NodeSpec, ecu: EcuNode, residual: Capacities) -> NodeScore:
    """Score one ECU against a NodeSpec given its remaining capacity."""
    parts = []  # (satisfaction, weight)
    violations = []
    feasible = True

    for field_name, required, available in (
        ("cpu", spec.cpu, residual.cpu),
        ("memory", spec.memory, residual.memory),
        ("storage", spec.storage, residual.storage),
    ):
        crit = spec.crit(field_name)
        if required <= 0:
            parts.append((1.0, _WEIGHTS[crit.level]))
            continue
        satisfaction = available / (available + required) if available > 0 else 0.0
        parts.append((satisfaction, _WEIGHTS[crit.level]))
        if available < required:
            violations.append(Violation(field_name, required, available, crit.level))
            shortfall = 1.0 - available / required
            if crit.level is CritLevel.MUST or shortfall > crit.slack:
                feasible = False

    if spec.gpu:
        crit = spec.crit("gpu")
        matched = ecu.gpu
        parts.append((1.0 if matched else 0.0, _WEIGHTS[crit.level]))
        if not matched:
            violations.append(Violation("gpu", True, False, crit.level))
            if crit.level is CritLevel.MUST or 1.0 > crit.slack:
                feasible = False

    total_weight = sum(w for _, w in parts)
    score = sum(s * w for s, w in parts) / total_weight
    return NodeScore(ecu.id, feasible, score, tuple(violations), ecu.energy_class)


def _rank_key(ns: NodeScore):
    # Higher score first, then lower energy class, then ecu id.
    return (-ns.score, ns.energy_class, ns.ecu_id)


def filter_feasible(spec: NodeSpec, topology: TopologyDescriptor,
                    residuals: dict) -> list:
    """Feasible ECUs for a NodeSpec, ranked; raises NO_FEASIBLE_NODE if none."""
    scores = [score_node(spec, ecu, residuals[ecu.id]) for ecu in topology.ecus]
    feasible = sorted((s for s in scores if s.feasible), key=_rank_key)
    if not feasible:
        raise PlanningError("NO_FEASIBLE_NODE", "no ECU satisfies the node spec")
    return feasible


def place(service: ServiceDescriptor, topology: TopologyDescriptor,
          residuals: Optional[dict] = None) -> PlacementPlan:
    """Greedy replica placement for every (flow, role) of a service.

    Replicas of one role go to the top-scoring distinct ECUs; when distinct
    ECUs run out, co-location is allowed (with a warning) unless the flow
    requires reliability, in which case distinct hosts are mandatory.
    """
    if residuals is None:
        residuals = initial_capacities(topology)
    assignments = []
    warnings = []

    for flow in service.flows:
        for role, spec in flow.node_specs.items():
            where = f"{flow.id}/{role}"
            try:
                ranked = filter_feasible(spec, topology, residuals)
            except PlanningError as exc:
                raise PlanningError(exc.code, f"{where}: {exc.message}") from exc

            chosen = [ns.ecu_id for ns in ranked[: spec.replicas]]
            if len(chosen) < spec.replicas and flow.traffic_spec.reliability:
                raise PlanningError(
                    "CAPACITY_EXHAUSTED",
                    f"{where}: reliability requires {spec.replicas} distinct ECUs, "
                    f"only {len(chosen)} feasible",
                )
            for replica, ecu_id in enumerate(chosen):
                assignments.append(Assignment(flow.id, role, replica, ecu_id))
                residuals[ecu_id] = residuals[ecu_id].minus(spec)

            # Best-effort anti-affinity exhausted: co-locate remaining replicas.
            replica = len(chosen)
            while replica < spec.replicas:
                candidates = [score_node(spec, ecu, residuals[ecu.id])
                              for ecu in topology.ecus]
                candidates = sorted((c for c in candidates if c.feasible), key=_rank_key)
                if not candidates:
                    raise PlanningError(
                        "CAPACITY_EXHAUSTED",
                        f"{where}: capacity exhausted after {replica} replicas",
                    )
                ecu_id = candidates[0].ecu_id
                warnings.append(f"{where}: replica {replica} co-located on {ecu_id}")
                assignments.append(Assignment(flow.id, role, replica, ecu_id))
                residuals[ecu_id] = residuals[ecu_id].minus(spec)
                replica += 1

    return PlacementPlan(assignments, residuals, warnings)


def place_many(services, topology: TopologyDescriptor) -> PlacementPlan:
    """Place several services sequentially against one shared capacity pool."""
    residuals = initial_capacities(topology)
    merged = PlacementPlan([], residuals, [])
    for service in services:
        plan = place(service, topology, residuals)
        merged.assignments.extend(plan.assignments)
        merged.warnings.extend(plan.warnings)
        merged.residual_capacities = plan.residual_capacities
    return merged


def flow_endpoints(flow, assignments) -> tuple:
    """Source and destination ECU for a flow's traffic.

    Traffic runs from the first declared role to the last; a single-role flow
    with several replicas runs from replica 0 to replica 1 (state sync
    between redundant instances).
    """
    by_role = {}
    for a in assignments:
        if a.flow_id == flow.id:
            by_role.setdefault(a.node_role, {})[a.replica_index] = a.ecu_id
    roles = list(flow.node_specs)
    if not roles or roles[0] not in by_role:
        raise PlanningError("NO_FEASIBLE_NODE", f"flow {flow.id} has no placement")
    if len(roles) >= 2:
        return by_role[roles[0]][0], by_role[roles[-1]][0]
    replicas = by_role[roles[0]]
    if len(replicas) >= 2:
        return replicas[0], replicas[1]
    return replicas[0], replicas[0]


def admit(service: ServiceDescriptor, plan: PlacementPlan, bounds: dict) -> list:
    """Per-flow admission: worst-case bound must not exceed MaxLatency.

    `bounds` maps flow id to a worst-case total in microseconds (None =
    unbounded). Flows without a MaxLatency are always admitted.
    """
    verdicts = []
    for flow in service.flows:
        max_latency_ms = flow.traffic_spec.time.max_latency
        bound_us = bounds.get(flow.id)
        if max_latency_ms is None:
            verdicts.append(AdmissionVerdict(flow.id, True, bound_us, None))
        elif bound_us is not None and bound_us <= max_latency_ms * 1000.0:
            verdicts.append(AdmissionVerdict(flow.id, True, bound_us, None))
        else:
            verdicts.append(AdmissionVerdict(flow.id, False, bound_us, "MaxLatency"))
    return verdicts


def placement_to_dict(plan: PlacementPlan, verdicts: Optional[list] = None) -> dict:
    out = {
        "schema": "v1",
        "assignments": [
            {"flow": a.flow_id, "role": a.node_role, "replica": a.replica_index,
             "ecu": a.ecu_id}
            for a in plan.assignments
        ],
        "residual": {
            ecu_id: {"cpu": c.cpu, "memory": c.memory, "storage": c.storage}
            for ecu_id, c in sorted(plan.residual_capacities.items())
        },
        "warnings": list(plan.warnings),
    }
    if verdicts is not None:
        out["admission"] = [
            {"flow": v.flow_id, "admitted": v.admitted, "bound_us": v.bound_us,
             "binding": v.binding}
            for v in verdicts
        ]
    return out
