"""Deterministic discrete-event simulator for planned deployments.

Executes planned flows over the topology: per-node constant clock offsets,
gate-controlled and credit-shaped egress queues with strict priority, frame
replication/elimination for reliable flows, link fault injection, and CAN
buses with id-based arbitration. All event times are integer nanoseconds and
ties break on a fixed key, so identical inputs produce byte-identical traces.
"""

from __future__ import annotations

import hashlib
import heapq
import random
from bisect import bisect_right
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

from .descriptors import Medium, TopologyDescriptor
from .errors import SimulationError
from .tsn_config import (
    GateControlList,
    PlannedFlow,
    link_prop_ns,
    proc_ns,
    tx_time_ns,
    wire_bytes,
)

TRACE_SCHEMA = "v1"
DEFAULT_QUEUE_CAP = 1024

# Event kind ranks for same-instant ordering on one (node, link).
_K_EMIT, _K_ARRIVE, _K_ENQUEUE, _K_TX_END, _K_KICK = range(5)


@dataclass(frozen=True)
class LinkFailure:
    link_id: str
    fail_at_ms: float
    restore_at_ms: Optional[float] = None


@dataclass
class SimConfig:
    duration_ms: float = 1000.0
    seed: int = 0
    clock_sync_error_us: float = 1.0
    failures: list = field(default_factory=list)
    aperiodic_mean_interval_ms: float = 10.0
    queue_capacity: int = DEFAULT_QUEUE_CAP


@dataclass
class FlowMetrics:
    created: int = 0
    delivered: int = 0
    dropped: int = 0
    deadline_misses: int = 0
    miss_rate: float = 0.0
    latency_min_us: float = 0.0
    latency_mean_us: float = 0.0
    latency_max_us: float = 0.0
    jitter_us: float = 0.0
    inter_frame_mean_us: float = 0.0
    inter_frame_max_us: float = 0.0
    frer_eliminated: int = 0
    delivery_ratio: float = 0.0
    observed_rate_hz: float = 0.0
    worst_frame: Optional[dict] = None


@dataclass
class PortMetrics:
    node: str
    link: str
    max_queue_len: int = 0
    mean_queue_len: float = 0.0
    throughput_bps: float = 0.0


@dataclass
class MetricsReport:
    flows: dict
    ports: dict
    frames_created: int
    delivered: int
    dropped: int
    in_flight_at_end: int

    def to_dict(self) -> dict:
        return {
            "schema": TRACE_SCHEMA,
            "flows": {
                fid: {
                    "created": m.created,
                    "delivered": m.delivered,
                    "dropped": m.dropped,
                    "deadline_misses": m.deadline_misses,
                    "miss_rate": m.miss_rate,
                    "latency_us": {
                        "min": m.latency_min_us,
                        "mean": m.latency_mean_us,
                        "max": m.latency_max_us,
                        "jitter": m.jitter_us,
                    },
                    "inter_frame_us": {
                        "mean": m.inter_frame_mean_us,
                        "max": m.inter_frame_max_us,
                    },
                    "frer_eliminated": m.frer_eliminated,
                    "delivery_ratio": m.delivery_ratio,
                    "observed_rate_hz": m.observed_rate_hz,
                    "worst_frame": m.worst_frame,
                }
                for fid, m in sorted(self.flows.items())
            },
            "ports": {
                f"{node}/{link}": {
                    "max_queue_len": p.max_queue_len,
                    "mean_queue_len": p.mean_queue_len,
                    "throughput_bps": p.throughput_bps,
                }
                for (node, link), p in sorted(self.ports.items())
            },
            "global": {
                "frames_created": self.frames_created,
                "delivered": self.delivered,
                "dropped": self.dropped,
                "in_flight_at_end": self.in_flight_at_end,
            },
        }


class _Frame:
    __slots__ = ("uid", "flow", "seq", "member", "path", "hop_index",
                 "created_ns", "hop_log", "arrival_ns", "can_id", "can_bits",
                 "dest")

    def __init__(self, uid, flow, seq, member, path, created_ns, dest):
        self.uid = uid
        self.flow = flow  # PlannedFlow or None for injected CAN frames
        self.seq = seq
        self.member = member
        self.path = path
        self.hop_index = 0
        self.created_ns = created_ns
        self.hop_log = []
        self.arrival_ns = created_ns
        self.can_id = 0
        self.can_bits = 0
        self.dest = dest

    @property
    def priority(self) -> int:
        return self.flow.priority if self.flow is not None else 0

    @property
    def flow_label(self) -> str:
        return self.flow.flow_id if self.flow is not None else f"can:{self.path[0]}"

    def wire_b(self) -> int:
        if self.flow is not None:
            return wire_bytes(self.flow.payload)
        return -(-self.can_bits // 8)


class _CompiledGcl:
    """Gate lookup over one port's cyclic schedule, in node-local time."""

    def __init__(self, gcl: GateControlList):
        self.cycle = gcl.cycle_ns
        self.entries = sorted(gcl.entries, key=lambda e: e.offset_ns)
        self.starts = [e.offset_ns for e in self.entries]

    def _entry_at(self, pos: int):
        i = bisect_right(self.starts, pos) - 1
        if i < 0:
            return None
        e = self.entries[i]
        if e.offset_ns <= pos < e.offset_ns + e.duration_ns:
            return e
        return None

    def is_open(self, queue: int, local_ns: int) -> bool:
        entry = self._entry_at(local_ns % self.cycle)
        return bool(entry and (entry.mask >> queue) & 1)

    def next_open(self, queue: int, local_ns: int) -> Optional[int]:
        """Earliest local time >= local_ns with the queue's gate open."""
        pos = local_ns % self.cycle
        base = local_ns - pos
        idx = max(0, bisect_right(self.starts, pos) - 1)
        for cycle_index in (0, 1):
            entries = self.entries[idx:] if cycle_index == 0 else self.entries
            shift = base + cycle_index * self.cycle
            for e in entries:
                if not (e.mask >> queue) & 1:
                    continue
                start = shift + e.offset_ns
                end = start + e.duration_ns
                if end <= local_ns:
                    continue
                return max(start, local_ns)
        return None


class _CbsState:
    __slots__ = ("idle", "send", "credit", "last_ns", "transmitting")

    def __init__(self, idle_bps: int, send_bps: int):
        self.idle = idle_bps
        self.send = send_bps
        self.credit = 0  # scaled: bit * ns (credit_bits = credit / 1e9)
        self.last_ns = 0
        self.transmitting = False

    def advance(self, now_ns: int, queue_nonempty: bool) -> None:
        dt = now_ns - self.last_ns
        if dt <= 0:
            self.last_ns = now_ns
            return
        if self.transmitting:
            self.credit += self.send * dt
        elif queue_nonempty:
            self.credit += self.idle * dt
        self.last_ns = now_ns

    def on_queue_empty(self) -> None:
        if self.credit > 0:
            self.credit = 0

    def zero_credit_in(self) -> int:
        """ns until credit reaches 0 while accruing at idle slope."""
        if self.credit >= 0:
            return 0
        return -(-(-self.credit) // self.idle)


class _Port:
    """Egress port: 8 strict-priority FIFO queues behind gates and credits."""

    def __init__(self, node: str, link, clock_offset_ns: int, cap: int):
        self.node = node
        self.link = link
        self.offset = clock_offset_ns
        self.cap = cap  # per-queue frame cap
        self.queues = [deque() for _ in range(8)]
        self.gcl: Optional[_CompiledGcl] = None
        self.cbs: dict = {}
        self.busy = False
        self.scheduled_wake: Optional[int] = None

    def gate_open(self, queue: int, t_ns: int) -> bool:
        if self.gcl is None:
            return True
        return self.gcl.is_open(queue, t_ns + self.offset)

    def next_gate_open(self, queue: int, t_ns: int) -> Optional[int]:
        if self.gcl is None:
            return t_ns
        local = self.gcl.next_open(queue, t_ns + self.offset)
        return None if local is None else local - self.offset


class _CanBus:
    """Shared CAN segment: one transmitter at a time, lowest id wins."""

    def __init__(self, link):
        self.link = link
        self.pending = []  # heap of (can_id, uid, enqueue_t, src_node)
        self.busy = False


class _RecoveryState:
    """802.1CB-style vector recovery over a 16-bit sequence space."""

    MOD = 1 << 16

    def __init__(self, window: int):
        self.window = window
        self.latest: Optional[int] = None
        self.seen: set = set()

    def submit(self, seq: int) -> str:
        seq %= self.MOD
        if self.latest is None:
            self.latest = seq
            self.seen = {seq}
            return "accept"
        delta = ((seq - self.latest + (self.MOD >> 1)) % self.MOD) - (self.MOD >> 1)
        if delta > 0:
            self.latest = seq
            self.seen.add(seq)
            self.seen = {s for s in self.seen
                         if ((self.latest - s) % self.MOD) < self.window}
            return "accept"
        if delta <= -self.window:
            return "stale"
        if seq in self.seen:
            return "duplicate"
        self.seen.add(seq)
        return "accept"


def new_recovery_state(window: int) -> _RecoveryState:
    return _RecoveryState(window)


def eliminate_duplicates(state: _RecoveryState, seq: int) -> str:
    """Submit one sequence number to a recovery state; returns the verdict."""
    return state.submit(seq)


def _derive_seed(seed: int, label: str) -> int:
    digest = hashlib.sha256(f"{seed}/{label}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


class Engine:
    """One scenario's deterministic event loop."""

    def __init__(self, flows: list, topology: TopologyDescriptor,
                 config: SimConfig, gcls: Optional[list] = None,
                 frer: Optional[list] = None, cbs: Optional[list] = None):
        if config.duration_ms <= 0:
            raise SimulationError("CONFIG_MISMATCH", "duration must be > 0")
        if config.clock_sync_error_us < 0:
            raise SimulationError("CONFIG_MISMATCH", "clock sync error must be >= 0")
        self.topology = topology
        self.config = config
        self.flows = list(flows)
        self.duration_ns = int(round(config.duration_ms * 1_000_000))
        self.trace: list = []

        node_ids = set(topology.node_ids())
        link_ids = {l.id for l in topology.links}
        for f in self.flows:
            if f.source not in node_ids or f.destination not in node_ids:
                raise SimulationError(
                    "CONFIG_MISMATCH", f"flow {f.flow_id}: unknown endpoint")
            if f.period_ns is not None and f.period_ns <= 0:
                raise SimulationError(
                    "CONFIG_MISMATCH", f"flow {f.flow_id}: period must be > 0")
            for path in f.paths:
                for lid in path:
                    if lid not in link_ids:
                        raise SimulationError(
                            "CONFIG_MISMATCH",
                            f"flow {f.flow_id}: unknown link {lid}")

        eps_ns = int(round(config.clock_sync_error_us * 1000))
        self.clock_offset = {}
        for node in sorted(node_ids):
            rng = random.Random(_derive_seed(config.seed, node))
            self.clock_offset[node] = rng.randrange(-eps_ns, eps_ns + 1) if eps_ns else 0

        self.ports = {}
        self.can_bus = {}
        for link in topology.links:
            if link.medium is Medium.ETHERNET:
                for node in (link.endpoint_a, link.endpoint_b):
                    self.ports[(node, link.id)] = _Port(
                        node, link, self.clock_offset[node], config.queue_capacity)
            else:
                self.can_bus[link.id] = _CanBus(link)

        for gcl in gcls or []:
            key = (gcl.node, gcl.link)
            if key not in self.ports:
                raise SimulationError(
                    "CONFIG_MISMATCH", f"GCL references unknown port {key}")
            self.ports[key].gcl = _CompiledGcl(gcl)
        for params in cbs or []:
            key = (params.node, params.link)
            if key not in self.ports:
                raise SimulationError(
                    "CONFIG_MISMATCH", f"CBS references unknown port {key}")
            self.ports[key].cbs[params.queue] = _CbsState(
                params.idle_slope_bps, params.send_slope_bps)

        self.frer = {}
        for cfg in frer or []:
            self.frer[cfg.flow_id] = _RecoveryState(cfg.recovery_window)

        self.link_failures = {l.id: [] for l in topology.links}
        for failure in config.failures:
            self.inject_failure(failure.link_id, failure.fail_at_ms,
                                failure.restore_at_ms)

        self._heap = []
        self._serial = 0
        self._uid = 0
        self._emitted = set()
        self._terminal = set()
        self._can_frames = {}

    # -- public controls ----------------------------------------------------

    def inject_failure(self, link_id: str, at_ms: float,
                       restore_at_ms: Optional[float] = None) -> None:
        if link_id not in self.link_failures:
            raise SimulationError("UNKNOWN_LINK", f"unknown link {link_id!r}")
        start = int(round(at_ms * 1_000_000))
        end = (int(round(restore_at_ms * 1_000_000))
               if restore_at_ms is not None else None)
        self.link_failures[link_id].append((start, end))

    def inject_can_frames(self, link_id: str, src_node: str, frames) -> None:
        """Feed gateway frames onto a CAN bus; capture time is emission time."""
        if link_id not in self.can_bus:
            raise SimulationError("UNKNOWN_LINK", f"unknown CAN link {link_id!r}")
        bus = self.can_bus[link_id]
        if src_node not in (bus.link.endpoint_a, bus.link.endpoint_b):
            raise SimulationError("CONFIG_MISMATCH",
                                  f"{src_node} is not on CAN bus {link_id}")
        for gw in frames:
            frame = _Frame(self._next_uid(), None, gw.can_id, 0, (link_id,),
                           gw.capture_time_us * 1000, bus.link.other_end(src_node))
            frame.can_id = gw.can_id
            frame.can_bits = gw.can_wire_bits()
            self._can_frames[frame.uid] = frame
            self._push(frame.created_ns, src_node, link_id, _K_EMIT, 0,
                       frame.uid, ("can_emit", frame, src_node))

    # -- event plumbing -----------------------------------------------------

    def _next_uid(self) -> int:
        self._uid += 1
        return self._uid

    def _push(self, t_ns: int, node: str, link: str, kind: int, neg_prio: int,
              uid: int, action) -> None:
        self._serial += 1
        heapq.heappush(self._heap,
                       ((t_ns, node, link, kind, neg_prio, uid, self._serial),
                        action))

    def _link_failed(self, link_id: str, start_ns: int, end_ns: int) -> bool:
        for fail, restore in self.link_failures[link_id]:
            hi = restore if restore is not None else end_ns + 1
            if fail <= end_ns and start_ns < hi:
                return True
        return False

    # -- emission -----------------------------------------------------------

    def _schedule_emissions(self) -> None:
        for f in self.flows:
            src_offset = self.clock_offset[f.source]
            if f.period_ns is not None:
                seq = 0
                k = 0
                while True:
                    global_t = f.offset_ns + k * f.period_ns - src_offset
                    if global_t > self.duration_ns:
                        break
                    if global_t >= 0:
                        self._emit_flow_frame(f, seq, global_t)
                        seq += 1
                    k += 1
            else:
                rng = random.Random(_derive_seed(self.config.seed, f.flow_id))
                mean_ns = int(round(self.config.aperiodic_mean_interval_ms
                                    * 1_000_000))
                lo, hi = mean_ns // 2, mean_ns + mean_ns // 2
                local = f.offset_ns + rng.randrange(lo, hi + 1)
                seq = 0
                while True:
                    global_t = local - src_offset
                    if global_t > self.duration_ns:
                        break
                    if global_t >= 0:
                        self._emit_flow_frame(f, seq, global_t)
                        seq += 1
                    local += rng.randrange(lo, hi + 1)

    def _emit_flow_frame(self, f: PlannedFlow, seq: int, t_ns: int) -> None:
        for member, path in enumerate(f.paths):
            frame = _Frame(self._next_uid(), f, seq, member, path, t_ns,
                           f.destination)
            self._push(t_ns, f.source, path[0] if path else "", _K_EMIT,
                       -f.priority, frame.uid, ("emit", frame))

    # -- run ----------------------------------------------------------------

    def run(self) -> list:
        """Process all events up to the horizon; returns the trace."""
        self._schedule_emissions()
        dispatch = {
            "emit": self._do_emit,
            "enqueue": self._do_enqueue,
            "kick": self._do_kick,
            "tx_end": self._do_tx_end,
            "arrive": self._do_arrive,
            "can_emit": self._do_can_emit,
            "can_kick": self._do_can_kick,
            "can_free": self._do_can_free,
            "can_deliver": self._do_can_deliver,
        }
        while self._heap:
            key, action = heapq.heappop(self._heap)
            t = key[0]
            if t > self.duration_ns:
                break
            dispatch[action[0]](t, *action[1:])
        return self.trace

    # -- Ethernet data path ---------------------------------------------------

    def _do_emit(self, t: int, frame: _Frame) -> None:
        self._emitted.add(frame.uid)
        self.trace.append({
            "schema": TRACE_SCHEMA, "type": "emit", "frame": frame.uid,
            "flow": frame.flow_label, "seq": frame.seq, "member": frame.member,
            "node": frame.flow.source, "time": t, "payload": frame.flow.payload,
        })
        frame.arrival_ns = t
        if not frame.path:  # co-located endpoints: deliver immediately
            self._deliver(t, frame)
            return
        self._do_enqueue(t, frame, frame.flow.source, frame.path[0])

    def _do_enqueue(self, t: int, frame: _Frame, node: str, link_id: str) -> None:
        port = self.ports[(node, link_id)]
        queue = port.queues[frame.priority]
        if len(queue) >= port.cap:
            self._drop(t, frame, "queue_overflow", node=node, link=link_id)
            return
        state = port.cbs.get(frame.priority)
        if state is not None:
            state.advance(t, queue_nonempty=bool(queue))
        frame.hop_log.append({
            "node": node, "link": link_id, "arrival": frame.arrival_ns,
            "queue_enter": t, "tx_start": None, "tx_end": None,
        })
        queue.append(frame)
        self._do_kick(t, port)

    def _do_kick(self, t: int, port: _Port) -> None:
        if port.busy:
            return
        chosen = None
        wake_candidates = []
        for prio in range(7, -1, -1):
            queue = port.queues[prio]
            if not queue:
                continue
            if not port.gate_open(prio, t):
                nxt = port.next_gate_open(prio, t)
                if nxt is not None:
                    wake_candidates.append(nxt)
                continue
            state = port.cbs.get(prio)
            if state is not None:
                state.advance(t, queue_nonempty=True)
                if state.credit < 0:
                    wake = t + state.zero_credit_in()
                    gate_at_wake = port.next_gate_open(prio, wake)
                    if gate_at_wake is not None:
                        wake_candidates.append(max(wake, gate_at_wake))
                    continue
            chosen = prio
            break
        if chosen is None:
            if wake_candidates:
                wake = min(wake_candidates)
                if wake <= t:
                    wake = t + 1
                if port.scheduled_wake != wake:
                    port.scheduled_wake = wake
                    self._push(wake, port.node, port.link.id, _K_KICK, 0, 0,
                               ("kick", port))
            return

        frame = port.queues[chosen].popleft()
        state = port.cbs.get(chosen)
        if state is not None:
            state.advance(t, queue_nonempty=True)
            state.transmitting = True
        port.busy = True
        frame.hop_log[-1]["tx_start"] = t
        tx = tx_time_ns(frame.flow.payload, port.link.rate_bps)
        self._push(t + tx, port.node, port.link.id, _K_TX_END, -frame.priority,
                   frame.uid, ("tx_end", port, frame))

    def _do_tx_end(self, t: int, port: _Port, frame: _Frame) -> None:
        port.busy = False
        state = port.cbs.get(frame.priority)
        if state is not None:
            state.advance(t, queue_nonempty=True)
            state.transmitting = False
            if not port.queues[frame.priority]:
                state.on_queue_empty()
        frame.hop_log[-1]["tx_end"] = t
        self._flush_hop_record(frame)
        link = port.link
        arrival = t + link_prop_ns(link)
        nxt = link.other_end(port.node)
        frame.arrival_ns = arrival
        self._push(arrival, nxt, link.id, _K_ARRIVE, -frame.priority,
                   frame.uid, ("arrive", frame, nxt))
        self._do_kick(t, port)

    def _do_arrive(self, t: int, frame: _Frame, node: str) -> None:
        hop = frame.hop_log[-1]
        if self._link_failed(hop["link"], hop["tx_start"], t):
            self._drop(t, frame, "link_failure", link=hop["link"])
            return
        frame.hop_index += 1
        if frame.hop_index >= len(frame.path):
            self._deliver(t, frame)
            return
        delay = proc_ns(node, self.topology)
        next_link = frame.path[frame.hop_index]
        self._push(t + delay, node, next_link, _K_ENQUEUE, -frame.priority,
                   frame.uid, ("enqueue", frame, node, next_link))

    def _deliver(self, t: int, frame: _Frame) -> None:
        flow = frame.flow
        recovery = self.frer.get(flow.flow_id) if flow is not None else None
        if recovery is not None:
            verdict = recovery.submit(frame.seq)
            if verdict != "accept":
                self._drop(t, frame, f"frer_{verdict}", node=frame.dest)
                return
        self._terminal.add(frame.uid)
        self.trace.append({
            "schema": TRACE_SCHEMA, "type": "deliver", "frame": frame.uid,
            "flow": frame.flow_label, "seq": frame.seq, "member": frame.member,
            "node": frame.dest, "time": t, "created_at": frame.created_ns,
            "latency": t - frame.created_ns,
        })

    def _drop(self, t: int, frame: _Frame, reason: str, node: str = "",
              link: str = "") -> None:
        self._terminal.add(frame.uid)
        self.trace.append({
            "schema": TRACE_SCHEMA, "type": "drop", "frame": frame.uid,
            "flow": frame.flow_label, "seq": frame.seq, "member": frame.member,
            "reason": reason, "node": node, "link": link, "time": t,
        })

    def _flush_hop_record(self, frame: _Frame) -> None:
        hop = frame.hop_log[-1]
        self.trace.append({
            "schema": TRACE_SCHEMA, "type": "hop", "frame": frame.uid,
            "flow": frame.flow_label, "seq": frame.seq, "member": frame.member,
            "node": hop["node"], "link": hop["link"], "arrival": hop["arrival"],
            "queue_enter": hop["queue_enter"], "tx_start": hop["tx_start"],
            "tx_end": hop["tx_end"], "wire_bytes": frame.wire_b(),
        })

    # -- CAN data path --------------------------------------------------------

    def _do_can_emit(self, t: int, frame: _Frame, src_node: str) -> None:
        self._emitted.add(frame.uid)
        self.trace.append({
            "schema": TRACE_SCHEMA, "type": "emit", "frame": frame.uid,
            "flow": frame.flow_label, "seq": frame.seq, "member": 0,
            "node": src_node, "time": t, "payload": frame.can_bits // 8,
        })
        bus = self.can_bus[frame.path[0]]
        heapq.heappush(bus.pending, (frame.can_id, frame.uid, t, src_node))
        # defer arbitration one event so simultaneous emissions contend
        self._push(t, src_node, frame.path[0], _K_KICK, 0, 0, ("can_kick", bus))

    def _do_can_kick(self, t: int, bus: _CanBus) -> None:
        if bus.busy or not bus.pending:
            return
        _can_id, uid, enq_t, src_node = heapq.heappop(bus.pending)
        frame = self._can_frames[uid]
        if self._link_failed(bus.link.id, t, t):
            self._drop(t, frame, "link_failure", link=bus.link.id)
            self._do_can_kick(t, bus)
            return
        bus.busy = True
        tx = -(-frame.can_bits * 1_000_000_000 // bus.link.rate_bps)
        frame.hop_log.append({
            "node": src_node, "link": bus.link.id, "arrival": frame.created_ns,
            "queue_enter": enq_t, "tx_start": t, "tx_end": t + tx,
        })
        self._push(t + tx, src_node, bus.link.id, _K_TX_END, 0, uid,
                   ("can_free", bus))
        self._push(t + tx + link_prop_ns(bus.link), frame.dest, bus.link.id,
                   _K_ARRIVE, 0, uid, ("can_deliver", bus, frame))

    def _do_can_free(self, t: int, bus: _CanBus) -> None:
        bus.busy = False
        self._do_can_kick(t, bus)

    def _do_can_deliver(self, t: int, bus: _CanBus, frame: _Frame) -> None:
        self._flush_hop_record(frame)
        self._terminal.add(frame.uid)
        self.trace.append({
            "schema": TRACE_SCHEMA, "type": "deliver", "frame": frame.uid,
            "flow": frame.flow_label, "seq": frame.seq, "member": 0,
            "node": frame.dest, "time": t, "created_at": frame.created_ns,
            "latency": t - frame.created_ns,
        })


# ---------------------------------------------------------------------------
# metrics (trace-pure: derived from records plus flow metadata only)

def compute_metrics(trace: list, flows: list, duration_ns: int) -> MetricsReport:
    by_flow = {f.flow_id: f for f in flows}
    flow_metrics = {f.flow_id: FlowMetrics() for f in flows}
    emit_seqs = {}
    deliveries = {}
    hops_by_frame = {}
    emits = 0
    delivered = 0
    dropped = 0
    emitted_uids = set()
    terminal_uids = set()

    for rec in trace:
        kind = rec["type"]
        fid = rec.get("flow", "")
        if kind == "emit":
            emits += 1
            emitted_uids.add(rec["frame"])
            if fid in flow_metrics:
                emit_seqs.setdefault(fid, set()).add(rec["seq"])
        elif kind == "deliver":
            delivered += 1
            terminal_uids.add(rec["frame"])
            if fid in flow_metrics:
                deliveries.setdefault(fid, []).append(rec)
        elif kind == "drop":
            dropped += 1
            terminal_uids.add(rec["frame"])
            if fid in flow_metrics:
                m = flow_metrics[fid]
                if rec["reason"].startswith("frer_"):
                    m.frer_eliminated += 1
                else:
                    m.dropped += 1
        elif kind == "hop":
            hops_by_frame.setdefault(rec["frame"], []).append(rec)

    for fid, metrics in flow_metrics.items():
        flow = by_flow[fid]
        metrics.created = len(emit_seqs.get(fid, ()))
        recs = deliveries.get(fid, [])
        metrics.delivered = len(recs)
        if metrics.created:
            metrics.delivery_ratio = metrics.delivered / metrics.created
        if not recs:
            continue
        latencies = [r["latency"] for r in recs]
        metrics.latency_min_us = min(latencies) / 1000.0
        metrics.latency_max_us = max(latencies) / 1000.0
        metrics.latency_mean_us = sum(latencies) / len(latencies) / 1000.0
        metrics.jitter_us = (max(latencies) - min(latencies)) / 1000.0
        if flow.max_latency_ns is not None:
            metrics.deadline_misses = sum(
                1 for l in latencies if l > flow.max_latency_ns)
            metrics.miss_rate = metrics.deadline_misses / len(latencies)
        times = sorted(r["time"] for r in recs)
        gaps = [b - a for a, b in zip(times, times[1:])]
        if gaps:
            metrics.inter_frame_mean_us = sum(gaps) / len(gaps) / 1000.0
            metrics.inter_frame_max_us = max(gaps) / 1000.0
        metrics.observed_rate_hz = metrics.delivered * 1e9 / duration_ns

        worst = max(recs, key=lambda r: (r["latency"], r["frame"]))
        hops = hops_by_frame.get(worst["frame"], [])
        processing = sum(h["queue_enter"] - h["arrival"] for h in hops)
        queuing = sum(h["tx_start"] - h["queue_enter"] for h in hops)
        transmission = sum(h["tx_end"] - h["tx_start"] for h in hops)
        propagation = worst["latency"] - processing - queuing - transmission
        metrics.worst_frame = {
            "frame": worst["frame"], "seq": worst["seq"],
            "latency_us": worst["latency"] / 1000.0,
            "processing_us": processing / 1000.0,
            "queuing_us": queuing / 1000.0,
            "transmission_us": transmission / 1000.0,
            "propagation_us": propagation / 1000.0,
        }

    ports = {}
    per_port_events = {}
    per_port_bits = {}
    for recs in hops_by_frame.values():
        for h in recs:
            key = (h["node"], h["link"])
            # a frame occupies the transmission queue from entry to tx end
            per_port_events.setdefault(key, []).append((h["queue_enter"], 1))
            per_port_events.setdefault(key, []).append((h["tx_end"], -1))
            if h["tx_end"] <= duration_ns:
                per_port_bits[key] = per_port_bits.get(key, 0) \
                    + h["wire_bytes"] * 8
    for key, events in per_port_events.items():
        events.sort()
        qlen = 0
        area = 0
        last_t = 0
        max_len = 0
        for t, delta in events:
            area += qlen * (t - last_t)
            last_t = t
            qlen += delta
            max_len = max(max_len, qlen)
        area += qlen * max(0, duration_ns - last_t)
        ports[key] = PortMetrics(
            node=key[0], link=key[1], max_queue_len=max_len,
            mean_queue_len=area / duration_ns,
            throughput_bps=per_port_bits.get(key, 0) * 1e9 / duration_ns,
        )

    in_flight = len(emitted_uids - terminal_uids)
    return MetricsReport(flow_metrics, ports, emits, delivered, dropped, in_flight)


def run(flows: list, topology: TopologyDescriptor, config: SimConfig,
        gcls: Optional[list] = None, frer: Optional[list] = None,
        cbs: Optional[list] = None):
    """Run one scenario; returns (MetricsReport, trace records)."""
    engine = Engine(flows, topology, config, gcls=gcls, frer=frer, cbs=cbs)
    trace = engine.run()
    report = compute_metrics(trace, flows, engine.duration_ns)
    return report, trace
