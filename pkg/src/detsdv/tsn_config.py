"""Traffic classification, routing, and TSN shaper synthesis.

Implements the centralized planner role: flows are classified into traffic
classes, routed over the Ethernet substrate (with a disjoint second path for
reliability flows), scheduled into per-port gate control lists, rate-reserved
via credit-based shaper slopes, and bounded analytically so admission can
compare against each flow's latency budget.

All internal times are integer nanoseconds; exported values are microseconds.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional

from .descriptors import FlowSpec, Link, Medium, TopologyDescriptor
from .errors import PlanningError

# Per-frame Ethernet overhead: preamble 7 + SFD 1 + MAC header 14 + FCS 4
# + interframe gap 12. A PCP tag adds 4 more when present.
ETH_OVERHEAD_BYTES = 38
VLAN_TAG_BYTES = 4
ETH_MIN_PAYLOAD = 46
ETH_MTU = 1500

NS_PER_SEC = 1_000_000_000
HYPERPERIOD_CAP_NS = 10 * NS_PER_SEC
# A port schedule larger than this is not usable on real hardware either.
MAX_WINDOWS_PER_PORT = 65536
# Standing window period for aperiodic control flows.
APERIODIC_CONTROL_PERIOD_NS = 1_000_000
# Assumed minimum inter-arrival of aperiodic flows (half the simulator's
# default mean interval); keeps interference bounds finite.
APERIODIC_MIN_INTERVAL_NS = 5_000_000
# Clock-error budget the synthesis plans for (matches the default SimConfig
# sync error); windows are widened by twice this value.
DEFAULT_CLOCK_BUDGET_NS = 1_000
# Response-time iteration gives up past this horizon (flow has no finite bound).
RTA_HORIZON_NS = NS_PER_SEC


def wire_bytes(payload: int, tagged: bool = False) -> int:
    """Bytes a payload occupies on the wire, including padding and overhead."""
    return max(payload, ETH_MIN_PAYLOAD) + ETH_OVERHEAD_BYTES + (VLAN_TAG_BYTES if tagged else 0)


def tx_time_ns(payload: int, rate_bps: int, tagged: bool = False) -> int:
    """Transmission time of one frame, rounded up to whole nanoseconds."""
    bits = wire_bytes(payload, tagged) * 8
    return -(-bits * NS_PER_SEC // rate_bps)


def guard_ns(rate_bps: int, max_payload: int = ETH_MTU) -> int:
    """Guard band: one maximum-size frame at link rate."""
    return tx_time_ns(max(max_payload, ETH_MTU), rate_bps)


class TrafficClass(Enum):
    CONTROL = "control"
    STREAM = "stream"
    SERVICE = "service"
    BEST_EFFORT = "best_effort"


PRIORITY = {
    TrafficClass.CONTROL: 7,
    TrafficClass.STREAM: 5,
    TrafficClass.SERVICE: 3,
    TrafficClass.BEST_EFFORT: 0,
}


def classify(flow: FlowSpec, domain: str = "") -> TrafficClass:
    """Map a flow onto one of the four traffic classes. Total and deterministic."""
    spec = flow.traffic_spec
    time = spec.time
    if spec.guarantee == 4 or domain == "safety":
        return TrafficClass.CONTROL
    aperiodic = time.periodicity is None
    if flow.data_spec.data_size >= ETH_MTU or (aperiodic and spec.guarantee >= 1):
        return TrafficClass.STREAM
    if not aperiodic and time.max_latency is not None:
        return TrafficClass.SERVICE
    return TrafficClass.BEST_EFFORT


def assign_priority(traffic_class: TrafficClass) -> int:
    """802.1Q priority queue (PCP) for a traffic class."""
    return PRIORITY[traffic_class]


# ---------------------------------------------------------------------------
# routing

@dataclass(frozen=True)
class FlowRoute:
    flow_id: str
    source: str
    destination: str
    paths: tuple  # 1 or 2 tuples of link ids; 2 iff FRER


def _ethernet_adjacency(topology: TopologyDescriptor) -> dict:
    adj = {n: [] for n in topology.node_ids()}
    for link in topology.links:
        if link.medium is not Medium.ETHERNET:
            continue
        adj[link.endpoint_a].append((link.id, link.endpoint_b))
        adj[link.endpoint_b].append((link.id, link.endpoint_a))
    for entries in adj.values():
        entries.sort()
    return adj


def _shortest_path(adj: dict, source: str, destination: str,
                   banned_links: frozenset = frozenset(),
                   banned_nodes: frozenset = frozenset()) -> Optional[tuple]:
    """Hop-count shortest path, ties broken by lexicographic link-id sequence."""
    if source == destination:
        return ()
    best = {source: (0, ())}
    heap = [(0, (), source)]
    settled = set()
    while heap:
        dist, path, node = heapq.heappop(heap)
        if node in settled:
            continue
        settled.add(node)
        if node == destination:
            return path
        for link_id, nxt in adj[node]:
            if link_id in banned_links or nxt in banned_nodes or nxt in settled:
                continue
            cand = (dist + 1, path + (link_id,))
            if nxt not in best or cand < best[nxt]:
                best[nxt] = cand
                heapq.heappush(heap, (cand[0], cand[1], nxt))
    return None


def _path_nodes(path: tuple, topology: TopologyDescriptor, source: str) -> list:
    nodes = [source]
    for link_id in path:
        nodes.append(topology.link(link_id).other_end(nodes[-1]))
    return nodes


def _disjoint_pair_maxflow(adj: dict, source: str,
                           destination: str) -> Optional[tuple]:
    """Two node-disjoint paths via unit-capacity max flow on a split graph.

    Nodes are split into in/out halves (inner capacity 1) so the pair shares
    no intermediate node; one arc per physical link direction so parallel
    links stay distinguishable.
    """
    arcs = []  # dicts: u, v, cap, flow, link

    def add(u, v, cap, link=None):
        arcs.append({"u": u, "v": v, "cap": cap, "flow": 0, "link": link})

    for n in sorted(adj):
        add((n, "in"), (n, "out"), 2 if n in (source, destination) else 1)
    for n in sorted(adj):
        for link_id, m in adj[n]:
            add((n, "out"), (m, "in"), 1, link_id)

    by_tail = {}
    by_head = {}
    for i, a in enumerate(arcs):
        by_tail.setdefault(a["u"], []).append(i)
        by_head.setdefault(a["v"], []).append(i)
    sort_key = lambda i: (arcs[i]["v"], arcs[i]["link"] or "")
    for lst in by_tail.values():
        lst.sort(key=sort_key)
    for lst in by_head.values():
        lst.sort(key=lambda i: (arcs[i]["u"], arcs[i]["link"] or ""))

    s, t = (source, "out"), (destination, "in")

    def bfs_augment() -> bool:
        prev = {s: None}
        queue = [s]
        while queue:
            u = queue.pop(0)
            if u == t:
                break
            for i in by_tail.get(u, ()):
                a = arcs[i]
                if a["cap"] - a["flow"] > 0 and a["v"] not in prev:
                    prev[a["v"]] = ("fwd", i)
                    queue.append(a["v"])
            for i in by_head.get(u, ()):
                a = arcs[i]
                if a["flow"] > 0 and a["u"] not in prev:
                    prev[a["u"]] = ("rev", i)
                    queue.append(a["u"])
        if t not in prev:
            return False
        node = t
        while node != s:
            kind, i = prev[node]
            if kind == "fwd":
                arcs[i]["flow"] += 1
                node = arcs[i]["u"]
            else:
                arcs[i]["flow"] -= 1
                node = arcs[i]["v"]
        return True

    if not (bfs_augment() and bfs_augment()):
        return None

    paths = []
    for _ in range(2):
        path = []
        u = s
        while u != t:
            i = next(j for j in by_tail[u] if arcs[j]["flow"] > 0)
            arcs[i]["flow"] -= 1
            if arcs[i]["link"] is not None:
                path.append(arcs[i]["link"])
            u = arcs[i]["v"]
        paths.append(tuple(path))
    paths.sort(key=lambda p: (len(p), p))
    return paths[0], paths[1]


def route(flow_id: str, source: str, destination: str,
          topology: TopologyDescriptor, reliability: bool) -> FlowRoute:
    """Deterministic explicit route; two fully disjoint paths when reliable."""
    adj = _ethernet_adjacency(topology)
    if source not in adj or destination not in adj:
        raise PlanningError("NO_PATH", f"{flow_id}: unknown endpoint")
    primary = _shortest_path(adj, source, destination)
    if primary is None:
        raise PlanningError("NO_PATH", f"{flow_id}: no path {source} -> {destination}")
    if not reliability or source == destination:
        return FlowRoute(flow_id, source, destination, (primary,))

    inner = frozenset(_path_nodes(primary, topology, source)[1:-1])
    secondary = _shortest_path(adj, source, destination,
                               banned_links=frozenset(primary), banned_nodes=inner)
    if secondary is not None:
        return FlowRoute(flow_id, source, destination, (primary, secondary))
    pair = _disjoint_pair_maxflow(adj, source, destination)
    if pair is None:
        raise PlanningError(
            "NO_DISJOINT_PATH",
            f"{flow_id}: no fully disjoint path pair {source} -> {destination}",
        )
    return FlowRoute(flow_id, source, destination, pair)


def paths_disjoint(route_: FlowRoute, topology: TopologyDescriptor) -> bool:
    """True when a 2-path route shares no link and no intermediate node."""
    if len(route_.paths) != 2:
        return True
    a, b = route_.paths
    if set(a) & set(b):
        return False
    inner_a = set(_path_nodes(a, topology, route_.source)[1:-1])
    inner_b = set(_path_nodes(b, topology, route_.source)[1:-1])
    return not (inner_a & inner_b)


# ---------------------------------------------------------------------------
# planned flows (the planner/simulator contract)

@dataclass(frozen=True)
class PlannedFlow:
    flow_id: str
    traffic_class: TrafficClass
    priority: int
    source: str
    destination: str
    paths: tuple  # of link-id tuples
    payload: int  # bytes per message
    period_ns: Optional[int]  # None = aperiodic
    offset_ns: int
    max_latency_ns: Optional[int]
    delivery: bool
    reliability: bool
    jitter_ns: Optional[int] = None

    @property
    def scheduled(self) -> bool:
        """Gate-scheduled: control flows always, service flows when periodic."""
        if self.traffic_class is TrafficClass.CONTROL:
            return True
        return self.traffic_class is TrafficClass.SERVICE and self.period_ns is not None

    def schedule_period_ns(self) -> int:
        if self.period_ns is not None:
            return self.period_ns
        return APERIODIC_CONTROL_PERIOD_NS

    def rate_period_ns(self) -> int:
        """Period used for rate/interference math; aperiodic flows use the
        minimum inter-arrival the simulator can produce."""
        if self.period_ns is not None:
            return self.period_ns
        return APERIODIC_MIN_INTERVAL_NS


def planned_flow(flow: FlowSpec, domain: str, source: str, destination: str,
                 route_: FlowRoute) -> PlannedFlow:
    cls = classify(flow, domain)
    time = flow.traffic_spec.time

    def to_ns(ms):
        return None if ms is None else int(round(ms * 1_000_000))

    return PlannedFlow(
        flow_id=flow.id,
        traffic_class=cls,
        priority=assign_priority(cls),
        source=source,
        destination=destination,
        paths=route_.paths,
        payload=flow.data_spec.data_size,
        period_ns=to_ns(time.periodicity),
        offset_ns=int(round(time.transmit_offset * 1_000_000)),
        max_latency_ns=to_ns(time.max_latency),
        delivery=flow.traffic_spec.delivery,
        reliability=flow.traffic_spec.reliability,
        jitter_ns=to_ns(time.jitter),
    )


def hops_of(path: tuple, source: str, topology: TopologyDescriptor) -> list:
    """Egress hops along a path: list of (egress_node, link)."""
    hops = []
    node = source
    for link_id in path:
        link = topology.link(link_id)
        hops.append((node, link))
        node = link.other_end(node)
    return hops


def link_prop_ns(link: Link) -> int:
    return int(round(link.propagation_delay_us * 1000))


def proc_ns(node: str, topology: TopologyDescriptor) -> int:
    if topology.is_switch(node):
        return int(round(topology.switch(node).processing_delay_us * 1000))
    return 0


def _crossing_flows(node: str, link_id: str, flows: list,
                    topology: TopologyDescriptor) -> list:
    """Flows with some path transmitting on (node, link)."""
    out = []
    for g in flows:
        for path in g.paths:
            if any(n == node and l.id == link_id
                   for n, l in hops_of(path, g.source, topology)):
                out.append(g)
                break
    return out


def _port_guard_ns(node: str, link: Link, all_flows: list,
                   topology: TopologyDescriptor) -> int:
    """Guard sized for the largest frame that can occupy this port."""
    biggest = ETH_MTU
    for g in _crossing_flows(node, link.id, all_flows, topology):
        biggest = max(biggest, g.payload)
    return tx_time_ns(biggest, link.rate_bps)


def _priority_wait(f: PlannedFlow, node: str, link: Link, all_flows: list,
                   topology: TopologyDescriptor, clock_budget_ns: int,
                   closed_per_cycle: int = 0, cycle_ns: int = 0,
                   idle_slope: Optional[int] = None) -> Optional[int]:
    """Non-preemptive response-time iteration for a priority-queued hop.

    One maximum lower-or-unsynchronized frame blocking plus ceil-interference
    from higher/equal-priority flows crossing the port; stream flows served
    by a credit shaper see their service stretched by rate/idle_slope.
    Returns None when no finite wait exists.
    """
    sharers = [g for g in _crossing_flows(node, link.id, all_flows, topology)
               if g.flow_id != f.flow_id]
    tx = tx_time_ns(f.payload, link.rate_bps)
    blocking = 0
    for g in sharers:
        if g.priority < f.priority:
            blocking = max(blocking, tx_time_ns(g.payload, link.rate_bps))
    stretch = 1.0
    if f.traffic_class is TrafficClass.STREAM and idle_slope:
        stretch = link.rate_bps / idle_slope
    base = blocking + int(tx * (stretch - 1.0))

    w = base
    for _ in range(64):
        interference = 0
        for g in sharers:
            if g.priority < f.priority:
                continue
            gtx = tx_time_ns(g.payload, link.rate_bps)
            if g.traffic_class is TrafficClass.STREAM and idle_slope:
                gtx = int(gtx * stretch)
            count = -(-(w + 2 * clock_budget_ns + 1) // g.rate_period_ns())
            interference += count * gtx
        gate_loss = (-(-(w + 1) // cycle_ns)) * closed_per_cycle if cycle_ns else 0
        new_w = base + interference + gate_loss
        if new_w == w:
            return w
        w = new_w
        if w > RTA_HORIZON_NS:
            return None
    return None


# ---------------------------------------------------------------------------
# gate control list synthesis

@dataclass(frozen=True)
class GclEntry:
    offset_ns: int
    duration_ns: int
    mask: int  # bit i set = queue i open


@dataclass(frozen=True)
class GateControlList:
    node: str
    port: str
    link: str
    cycle_ns: int
    entries: tuple  # of GclEntry


@dataclass(frozen=True)
class Window:
    start_ns: int  # normalized to [0, cycle)
    duration_ns: int
    queue: int
    flow_id: str
    traffic_class: TrafficClass


@dataclass
class Schedule:
    gcls: list
    # (flow_id, path_index) -> {link_id: planned queue wait in ns}
    hop_waits: dict
    port_cycles: dict  # (node, link_id) -> cycle_ns
    port_windows: dict  # (node, link_id) -> list of Window
    clock_budget_ns: int = DEFAULT_CLOCK_BUDGET_NS


def _circular_pieces(start: int, length: int, cycle: int) -> list:
    start %= cycle
    end = start + length
    if end <= cycle:
        return [(start, end)]
    return [(start, cycle), (0, end - cycle)]


class _PortOccupancy:
    """Circular interval set over one port cycle."""

    def __init__(self, cycle_ns: int):
        self.cycle = cycle_ns
        self.taken = []  # sorted (start, end) pieces, end <= cycle

    def min_push(self, start: int, length: int) -> int:
        """0 when [start, start+length) is free (circularly); otherwise the
        smallest forward shift clearing the first conflict found."""
        push = 0
        for ps, pe in _circular_pieces(start, length, self.cycle):
            for ts, te in self.taken:
                if ts < pe and ps < te:
                    push = max(push, te - ps)
        return push

    def reserve(self, start: int, length: int) -> None:
        for piece in _circular_pieces(start, length, self.cycle):
            self.taken.append(piece)
        self.taken.sort()


def _lcm(values) -> int:
    out = 1
    for v in values:
        out = out * v // math.gcd(out, v)
    return out


def synthesize_gcl(flows: list, topology: TopologyDescriptor,
                   all_flows: Optional[list] = None,
                   clock_budget_ns: int = DEFAULT_CLOCK_BUDGET_NS) -> Schedule:
    """First-fit no-wait window placement for scheduled flows.

    Windows on every hop of a flow instance are chained: the hop-h window
    cannot open before the frame can have arrived from hop h-1 under worst
    assumptions. All instances of one flow are placed as one comb (stride =
    period) so the port schedule is exactly periodic in the port cycle. A
    guard band (one max-size frame) is kept free ahead of every window; for
    control windows it is emitted as an all-closed entry.
    """
    if all_flows is None:
        all_flows = flows
    scheduled = [f for f in flows if f.scheduled]
    scheduled.sort(key=lambda f: (f.schedule_period_ns(), f.flow_id))

    # Which scheduled flows traverse which TSN-capable switch egress port.
    port_flows = {}
    for f in scheduled:
        for path in f.paths:
            for node, link in hops_of(path, f.source, topology):
                if not topology.is_switch(node):
                    continue
                port = topology.switch(node).port_for_link(link.id)
                if port is None or not port.tsn_capable:
                    continue
                port_flows.setdefault((node, link.id), []).append(f)

    port_cycles = {}
    for key, pflows in sorted(port_flows.items()):
        cycle = _lcm(sorted({f.schedule_period_ns() for f in pflows}))
        if cycle > HYPERPERIOD_CAP_NS:
            raise PlanningError(
                "INFEASIBLE_SCHEDULE",
                f"port {key[0]}/{key[1]}: hyperperiod {cycle} ns exceeds "
                f"{HYPERPERIOD_CAP_NS} ns; harmonize flow periods "
                f"(flows: {sorted(f.flow_id for f in pflows)})",
            )
        windows = sum(cycle // f.schedule_period_ns() for f in pflows)
        if windows > MAX_WINDOWS_PER_PORT:
            raise PlanningError(
                "INFEASIBLE_SCHEDULE",
                f"port {key[0]}/{key[1]}: {windows} gate windows per cycle "
                f"exceed {MAX_WINDOWS_PER_PORT}; harmonize flow periods",
            )
        port_cycles[key] = cycle

    occupancy = {key: _PortOccupancy(cycle) for key, cycle in port_cycles.items()}
    port_windows = {key: [] for key in port_cycles}
    hop_waits = {}
    slack = 2 * clock_budget_ns

    for f in scheduled:
        period = f.schedule_period_ns()
        anchored = f.period_ns is not None  # standing windows have no emission anchor
        for path_index, path in enumerate(f.paths):
            waits = {}
            ready = f.offset_ns if anchored else 0
            for node, link in hops_of(path, f.source, topology):
                tx = tx_time_ns(f.payload, link.rate_bps)
                duration = tx + slack
                key = (node, link.id)
                if key not in occupancy:
                    # Talker NIC or non-TSN port: no window; worst co-located
                    # interference is budgeted into the chain and the bound.
                    wait = _priority_wait(f, node, link, all_flows, topology,
                                          clock_budget_ns)
                    if wait is None:
                        raise PlanningError(
                            "INFEASIBLE_SCHEDULE",
                            f"port {node}/{link.id}: unbounded interference for "
                            f"scheduled flow {f.flow_id}",
                        )
                    waits[link.id] = wait
                    ready += wait + tx + link_prop_ns(link) \
                        + proc_ns(link.other_end(node), topology)
                    continue

                occ = occupancy[key]
                guard = _port_guard_ns(node, link, all_flows, topology)
                cycle = occ.cycle
                instances = cycle // period
                delta = 0
                placed = False
                while delta < period:
                    bump = 0
                    for k in range(instances):
                        start = ready + delta + k * period
                        bump = max(bump, occ.min_push(start - guard, guard + duration))
                    if bump == 0:
                        placed = True
                        break
                    delta += bump
                if not placed:
                    raise PlanningError(
                        "INFEASIBLE_SCHEDULE",
                        f"port {node}/{link.id}: no window fits flow {f.flow_id} "
                        f"(period {period} ns)",
                    )
                blocking = 0 if f.traffic_class is TrafficClass.CONTROL else guard
                for k in range(instances):
                    start = ready + delta + k * period
                    occ.reserve(start - guard, guard + duration)
                    port_windows[key].append(Window(
                        start % cycle, duration, f.priority, f.flow_id,
                        f.traffic_class))
                waits[link.id] = delta + blocking
                ready += delta + blocking + tx + link_prop_ns(link) \
                    + proc_ns(link.other_end(node), topology)
            hop_waits[(f.flow_id, path_index)] = waits

    # Emit GCLs for every TSN-capable switch egress port.
    gcls = []
    for sw in topology.switches:
        for port in sw.ports:
            if port.link_id is None or not port.tsn_capable:
                continue
            key = (sw.id, port.link_id)
            if key not in port_windows or not port_windows[key]:
                gcls.append(GateControlList(
                    sw.id, port.port_id, port.link_id,
                    cycle_ns=1_000_000,
                    entries=(GclEntry(0, 1_000_000, 0xFF),),
                ))
                continue
            link = topology.link(port.link_id)
            cycle = port_cycles[key]
            guard = _port_guard_ns(sw.id, link, all_flows, topology)
            residual_mask = 0xFF
            for w in port_windows[key]:
                residual_mask &= ~(1 << w.queue)
            regions = []
            for w in port_windows[key]:
                if w.traffic_class is TrafficClass.CONTROL:
                    for ps, pe in _circular_pieces(w.start_ns - guard, guard, cycle):
                        regions.append((ps, pe, 0))
                for ps, pe in _circular_pieces(w.start_ns, w.duration_ns, cycle):
                    regions.append((ps, pe, 1 << w.queue))
            regions.sort()
            entries = []
            cursor = 0
            for rs, re_, mask in regions:
                if rs > cursor:
                    entries.append(GclEntry(cursor, rs - cursor, residual_mask))
                elif rs < cursor:
                    raise PlanningError(
                        "INFEASIBLE_SCHEDULE",
                        f"port {sw.id}/{port.link_id}: window overlap at {rs} ns",
                    )
                entries.append(GclEntry(rs, re_ - rs, mask))
                cursor = re_
            if cursor < cycle:
                entries.append(GclEntry(cursor, cycle - cursor, residual_mask))
            gcls.append(GateControlList(sw.id, port.port_id, port.link_id,
                                        cycle, tuple(entries)))

    return Schedule(gcls, hop_waits, port_cycles, port_windows, clock_budget_ns)


# ---------------------------------------------------------------------------
# credit-based shaper

@dataclass(frozen=True)
class CbsParams:
    node: str
    port: str
    link: str
    queue: int
    idle_slope_bps: int
    send_slope_bps: int


def compute_cbs(flows: list, topology: TopologyDescriptor) -> list:
    """Reserve per-port bandwidth for stream flows: idle slope = 1.10 x demand,
    capped at 75% of link rate."""
    stream_queue = PRIORITY[TrafficClass.STREAM]
    demand = {}  # (node, link_id) -> aggregate bit/s
    for f in flows:
        if f.traffic_class is not TrafficClass.STREAM:
            continue
        bits = wire_bytes(f.payload) * 8
        flow_bps = bits * NS_PER_SEC // f.rate_period_ns()
        for path in f.paths:
            for node, link in hops_of(path, f.source, topology):
                if not topology.is_switch(node):
                    continue
                key = (node, link.id)
                demand[key] = demand.get(key, 0) + flow_bps

    params = []
    for (node, link_id), bps in sorted(demand.items()):
        link = topology.link(link_id)
        idle = -(-bps * 11 // 10)  # ceil(1.10 x demand) in exact integers
        cap = link.rate_bps * 3 // 4
        if idle > cap:
            raise PlanningError(
                "OVERSUBSCRIBED",
                f"port {node}/{link_id}: stream demand {bps} bps needs idle slope "
                f"{idle} > cap {cap}",
            )
        port = topology.switch(node).port_for_link(link_id)
        params.append(CbsParams(node, port.port_id if port else "", link_id,
                                stream_queue, idle, idle - link.rate_bps))
    return params


# ---------------------------------------------------------------------------
# worst-case latency bounds

@dataclass(frozen=True)
class HopBound:
    link: str
    processing_ns: int
    queuing_ns: int
    transmission_ns: int
    propagation_ns: int


@dataclass(frozen=True)
class WorstCaseBound:
    flow_id: str
    per_hop: tuple  # of HopBound
    total_ns: int


def worst_case_bound(f: PlannedFlow, schedule: Schedule,
                     topology: TopologyDescriptor, flows: list,
                     cbs: Optional[list] = None) -> Optional[WorstCaseBound]:
    """Conservative per-hop latency bound; None when no finite bound exists.

    Gated hops of scheduled flows use the planned window wait plus clock
    slack and a displacement term for other windows of the same queue on the
    same port. All other hops use non-preemptive response-time iteration.
    For a two-path (FRER) route the worse path is reported.
    """
    if not f.paths:
        raise PlanningError("UNSCHEDULED_FLOW", f"{f.flow_id}: no route")
    eps = schedule.clock_budget_ns
    cbs = cbs or []
    idle_by_port = {(c.node, c.link): c.idle_slope_bps for c in cbs}

    worst = None
    for path_index, path in enumerate(f.paths):
        per_hop = []
        for node, link in hops_of(path, f.source, topology):
            tx = tx_time_ns(f.payload, link.rate_bps)
            processing = proc_ns(node, topology)
            key = (node, link.id)
            waits = schedule.hop_waits.get((f.flow_id, path_index), {})

            if f.scheduled and key in schedule.port_cycles:
                queuing = waits.get(link.id, 0) + 4 * eps
                if f.period_ns is None:
                    queuing += APERIODIC_CONTROL_PERIOD_NS
                guard = _port_guard_ns(node, link, flows, topology)
                for w in schedule.port_windows[key]:
                    if w.flow_id != f.flow_id and w.queue == f.priority:
                        queuing += w.duration_ns + guard
            elif f.scheduled:
                # Ungated hop of a scheduled flow: the chain already budgeted it.
                queuing = waits.get(link.id, 0) + 2 * eps
            else:
                closed = 0
                cycle = schedule.port_cycles.get(key, 0)
                if cycle:
                    guard = _port_guard_ns(node, link, flows, topology)
                    for w in schedule.port_windows[key]:
                        closed += w.duration_ns
                        if w.traffic_class is TrafficClass.CONTROL:
                            closed += guard
                    closed = min(closed, cycle)
                wait = _priority_wait(f, node, link, flows, topology, eps,
                                      closed_per_cycle=closed, cycle_ns=cycle,
                                      idle_slope=idle_by_port.get(key))
                if wait is None:
                    return None
                queuing = wait + 2 * eps
            per_hop.append(HopBound(link.id, processing, queuing, tx,
                                    link_prop_ns(link)))
        total = sum(h.processing_ns + h.queuing_ns + h.transmission_ns
                    + h.propagation_ns for h in per_hop)
        if worst is None or total > worst.total_ns:
            worst = WorstCaseBound(f.flow_id, tuple(per_hop), total)
    return worst


# ---------------------------------------------------------------------------
# frame replication and elimination

@dataclass(frozen=True)
class FrerConfig:
    flow_id: str
    replication_point: str
    elimination_point: str
    sequence_space: int  # 2**16 wrap
    recovery_window: int


def derive_frer(f: PlannedFlow, route_: FlowRoute,
                bound_total_ns: Optional[int]) -> FrerConfig:
    """Replication/elimination config; window covers twice the in-flight count."""
    if len(route_.paths) != 2:
        raise PlanningError("NO_DISJOINT_PATH",
                            f"{f.flow_id}: FRER needs a 2-path route")
    period = f.rate_period_ns()
    if bound_total_ns is None:
        in_flight = 4
    else:
        in_flight = -(-bound_total_ns // period)
    window = max(8, 2 * in_flight)
    return FrerConfig(f.flow_id, route_.source, route_.destination, 1 << 16, window)
