"""End-to-end deployment plan synthesis and its JSON artifact formats.

build_plan runs the pipeline: place replicas, classify and route each flow,
synthesize gate schedules and CBS slopes, compute worst-case bounds, admit
flows against their latency budgets, and derive FRER plus interoperability
profiles. Placement- and routing-level failures reject the affected service
or flow (they become admission verdicts); port-level infeasibility
(INFEASIBLE_SCHEDULE, OVERSUBSCRIBED) aborts the plan.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .descriptors import ServiceDescriptor, TopologyDescriptor
from .errors import PlanningError
from .interop import (
    FiveQiProfile,
    constraint_vector,
    derive_data_layer_qos,
    map_to_5qi,
)
from .orchestrator import (
    AdmissionVerdict,
    PlacementPlan,
    admit,
    flow_endpoints,
    initial_capacities,
    place,
    placement_to_dict,
)
from .tsn_config import (
    DEFAULT_CLOCK_BUDGET_NS,
    CbsParams,
    FlowRoute,
    FrerConfig,
    GateControlList,
    GclEntry,
    PlannedFlow,
    Schedule,
    TrafficClass,
    compute_cbs,
    derive_frer,
    planned_flow,
    route,
    synthesize_gcl,
    worst_case_bound,
)

_REJECTING_CODES = {"NO_FEASIBLE_NODE", "CAPACITY_EXHAUSTED", "NO_PATH",
                    "NO_DISJOINT_PATH"}


@dataclass
class DeploymentPlan:
    services: list
    topology: TopologyDescriptor
    placement: PlacementPlan
    verdicts: list  # AdmissionVerdict, one per flow across all services
    flows: list  # routed PlannedFlows (admitted or not)
    admitted: list  # admitted PlannedFlows
    schedule: Schedule
    cbs: list
    frer: list
    bounds: dict  # flow_id -> WorstCaseBound or None
    five_qi: dict  # flow_id -> FiveQiProfile
    data_qos: dict  # flow_id -> DataLayerQosProfile
    warnings: list = field(default_factory=list)

    @property
    def all_admitted(self) -> bool:
        return all(v.admitted for v in self.verdicts)


def build_plan(services, topology: TopologyDescriptor,
               clock_budget_ns: int = DEFAULT_CLOCK_BUDGET_NS) -> DeploymentPlan:
    services = list(services)
    seen = set()
    for svc in services:
        for flow in svc.flows:
            if flow.id in seen:
                raise PlanningError(
                    "DUPLICATE_FLOW_ID",
                    f"flow id {flow.id!r} appears in more than one service")
            seen.add(flow.id)

    residuals = initial_capacities(topology)
    placement = PlacementPlan([], residuals, [])
    rejected = {}  # flow_id -> binding code
    placed_services = []
    for svc in services:
        trial = dict(residuals)
        try:
            part = place(svc, topology, trial)
        except PlanningError as exc:
            if exc.code not in _REJECTING_CODES:
                raise
            for flow in svc.flows:
                rejected[flow.id] = exc.code
            continue
        placement.assignments.extend(part.assignments)
        placement.warnings.extend(part.warnings)
        residuals = part.residual_capacities
        placed_services.append(svc)
    placement.residual_capacities = residuals

    flows = []
    for svc in placed_services:
        domain = svc.metadata.domain
        for flow in svc.flows:
            source, dest = flow_endpoints(flow, placement.assignments)
            try:
                r = route(flow.id, source, dest, topology,
                          flow.traffic_spec.reliability)
            except PlanningError as exc:
                if exc.code not in _REJECTING_CODES:
                    raise
                rejected[flow.id] = exc.code
                continue
            flows.append(planned_flow(flow, domain, source, dest, r))

    def synthesize(candidates):
        schedule = synthesize_gcl(candidates, topology, all_flows=candidates,
                                  clock_budget_ns=clock_budget_ns)
        cbs = compute_cbs(candidates, topology)
        bounds = {f.flow_id: worst_case_bound(f, schedule, topology,
                                              candidates, cbs=cbs)
                  for f in candidates}
        return schedule, cbs, bounds

    schedule, cbs, bounds = synthesize(flows)

    def bound_us(fid):
        b = bounds.get(fid)
        return None if b is None else b.total_ns / 1000.0

    verdicts = []
    admitted_ids = set()
    for svc in services:
        sub = admit(svc, placement, {f.id: bound_us(f.id) for f in svc.flows})
        for v in sub:
            if v.flow_id in rejected:
                v = AdmissionVerdict(v.flow_id, False, None, rejected[v.flow_id])
            verdicts.append(v)
            if v.admitted:
                admitted_ids.add(v.flow_id)

    admitted = [f for f in flows if f.flow_id in admitted_ids]
    if len(admitted) != len(flows):
        # Rejected flows vacate the schedule; bounds can only improve, so
        # admission needs no further pass.
        schedule, cbs, admitted_bounds = synthesize(admitted)
        bounds.update(admitted_bounds)

    frer = []
    for f in admitted:
        if len(f.paths) == 2:
            b = bounds.get(f.flow_id)
            frer.append(derive_frer(
                f, FlowRoute(f.flow_id, f.source, f.destination, f.paths),
                None if b is None else b.total_ns))

    five_qi = {}
    data_qos = {}
    for svc in services:
        domain = svc.metadata.domain
        for flow in svc.flows:
            vector = constraint_vector(flow, domain)
            five_qi[flow.id] = map_to_5qi(vector, flow.traffic_spec.time,
                                          flow.traffic_spec)
            data_qos[flow.id] = derive_data_layer_qos(flow)

    return DeploymentPlan(
        services=services, topology=topology, placement=placement,
        verdicts=verdicts, flows=flows, admitted=admitted, schedule=schedule,
        cbs=cbs, frer=frer, bounds=bounds, five_qi=five_qi, data_qos=data_qos,
        warnings=list(placement.warnings),
    )


# ---------------------------------------------------------------------------
# JSON artifact formats

def _us(ns: Optional[int]) -> Optional[float]:
    return None if ns is None else ns / 1000.0


def placement_json(plan: DeploymentPlan) -> dict:
    return placement_to_dict(plan.placement, plan.verdicts)


def tsn_json(plan: DeploymentPlan) -> dict:
    ports = {}
    for gcl in plan.schedule.gcls:
        key = (gcl.node, gcl.port, gcl.link)
        ports[key] = {
            "switch": gcl.node,
            "port": gcl.port,
            "link": gcl.link,
            "gcl": {
                "cycle_us": gcl.cycle_ns / 1000.0,
                "entries": [
                    {"offset_us": e.offset_ns / 1000.0,
                     "duration_us": e.duration_ns / 1000.0,
                     "mask": e.mask}
                    for e in gcl.entries
                ],
            },
            "cbs": [],
        }
    for c in plan.cbs:
        port = plan.topology.switch(c.node).port_for_link(c.link)
        key = (c.node, port.port_id if port else "", c.link)
        entry = ports.setdefault(key, {
            "switch": c.node, "port": key[1], "link": c.link,
            "gcl": None, "cbs": [],
        })
        entry["cbs"].append({
            "queue": c.queue,
            "idle_slope_bps": c.idle_slope_bps,
            "send_slope_bps": c.send_slope_bps,
        })

    return {
        "schema": "v1",
        "ports": [ports[k] for k in sorted(ports)],
        "frer": [
            {"flow": f.flow_id, "replication": f.replication_point,
             "elimination": f.elimination_point,
             "sequence_space": f.sequence_space,
             "recovery_window": f.recovery_window}
            for f in plan.frer
        ],
        "bounds": [
            {"flow": fid,
             "total_us": _us(b.total_ns),
             "per_hop": [
                 {"link": h.link,
                  "processing_us": h.processing_ns / 1000.0,
                  "queuing_us": h.queuing_ns / 1000.0,
                  "transmission_us": h.transmission_ns / 1000.0,
                  "propagation_us": h.propagation_ns / 1000.0}
                 for h in b.per_hop
             ]}
            for fid, b in sorted(plan.bounds.items()) if b is not None
        ],
        "flows": [
            {"id": f.flow_id,
             "class": f.traffic_class.value,
             "priority": f.priority,
             "source": f.source,
             "destination": f.destination,
             "paths": [list(p) for p in f.paths],
             "payload": f.payload,
             "period_us": _us(f.period_ns),
             "offset_us": f.offset_ns / 1000.0,
             "max_latency_us": _us(f.max_latency_ns),
             "jitter_us": _us(f.jitter_ns),
             "delivery": f.delivery,
             "reliability": f.reliability,
             "admitted": f.flow_id in {g.flow_id for g in plan.admitted}}
            for f in plan.flows
        ],
    }


def interop_json(plan: DeploymentPlan) -> dict:
    return {
        "schema": "v1",
        "five_qi": [
            {"flow": fid,
             "resource_type": p.resource_type.value,
             "priority_level": p.priority_level,
             "delay_budget_ms": p.delay_budget_ms,
             "per_target": p.per_target}
            for fid, p in sorted(plan.five_qi.items())
        ],
        "data_layer": [
            {"flow": fid,
             "reliability": p.reliability.value,
             "deadline_ms": p.deadline_ms,
             "latency_budget_ms": p.latency_budget_ms,
             "history_depth": p.history_depth}
            for fid, p in sorted(plan.data_qos.items())
        ],
    }


# ---------------------------------------------------------------------------
# artifact loading (the simulate command consumes plan files)

def _ns(us: Optional[float]) -> Optional[int]:
    return None if us is None else int(round(us * 1000))


def flows_from_tsn_json(doc: dict) -> list:
    flows = []
    for f in doc.get("flows", []):
        flows.append(PlannedFlow(
            flow_id=f["id"],
            traffic_class=TrafficClass(f["class"]),
            priority=f["priority"],
            source=f["source"],
            destination=f["destination"],
            paths=tuple(tuple(p) for p in f["paths"]),
            payload=f["payload"],
            period_ns=_ns(f.get("period_us")),
            offset_ns=_ns(f.get("offset_us")) or 0,
            max_latency_ns=_ns(f.get("max_latency_us")),
            delivery=f["delivery"],
            reliability=f["reliability"],
            jitter_ns=_ns(f.get("jitter_us")),
        ))
    return flows


def admitted_flows_from_tsn_json(doc: dict) -> list:
    return [f for f, raw in zip(flows_from_tsn_json(doc), doc.get("flows", []))
            if raw.get("admitted", True)]


def gcls_from_tsn_json(doc: dict) -> list:
    gcls = []
    for port in doc.get("ports", []):
        if not port.get("gcl"):
            continue
        entries = tuple(
            GclEntry(int(round(e["offset_us"] * 1000)),
                     int(round(e["duration_us"] * 1000)),
                     e["mask"])
            for e in port["gcl"]["entries"]
        )
        gcls.append(GateControlList(
            port["switch"], port["port"], port["link"],
            int(round(port["gcl"]["cycle_us"] * 1000)), entries))
    return gcls


def cbs_from_tsn_json(doc: dict) -> list:
    out = []
    for port in doc.get("ports", []):
        for c in port.get("cbs", []):
            out.append(CbsParams(port["switch"], port["port"], port["link"],
                                 c["queue"], c["idle_slope_bps"],
                                 c["send_slope_bps"]))
    return out


def frer_from_tsn_json(doc: dict) -> list:
    return [FrerConfig(f["flow"], f["replication"], f["elimination"],
                       f["sequence_space"], f["recovery_window"])
            for f in doc.get("frer", [])]
