"""Traffic classes, routing, GCL synthesis, CBS slopes, and latency bounds."""

import itertools

import networkx as nx
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from detsdv.descriptors import parse_topology_descriptor
from detsdv.errors import PlanningError
from detsdv.tsn_config import (
    APERIODIC_CONTROL_PERIOD_NS,
    TrafficClass,
    assign_priority,
    classify,
    compute_cbs,
    derive_frer,
    guard_ns,
    paths_disjoint,
    planned_flow,
    route,
    synthesize_gcl,
    tx_time_ns,
    wire_bytes,
    worst_case_bound,
)

from conftest import chain_topology_text, make_flow


def toml_topology(text):
    return parse_topology_descriptor(text)


def planned(flow, topo, domain="generic", reliability=None):
    rel = flow.traffic_spec.reliability if reliability is None else reliability
    ecus = [e.id for e in topo.ecus]
    r = route(flow.id, ecus[0], ecus[1], topo, rel)
    return planned_flow(flow, domain, ecus[0], ecus[1], r)


# ---------------------------------------------------------------------------
# classification

def test_wheelchair_flow_is_control(wheelchair_service):
    flow = wheelchair_service.flows[0]
    assert classify(flow, wheelchair_service.metadata.domain) is TrafficClass.CONTROL


def test_weakest_spec_is_best_effort():
    flow = make_flow(guarantee=0, period_ms=None, max_latency_ms=None)
    assert classify(flow) is TrafficClass.BEST_EFFORT


def test_periodic_bounded_flow_is_service():
    flow = make_flow(payload=100, period_ms=100.0, max_latency_ms=50.0, guarantee=2)
    assert classify(flow) is TrafficClass.SERVICE


def test_large_payload_is_stream():
    flow = make_flow(payload=1500, guarantee=1)
    assert classify(flow) is TrafficClass.STREAM


def test_priority_mapping():
    assert assign_priority(TrafficClass.CONTROL) == 7
    assert assign_priority(TrafficClass.STREAM) == 5
    assert assign_priority(TrafficClass.SERVICE) == 3
    assert assign_priority(TrafficClass.BEST_EFFORT) == 0


@settings(max_examples=200, deadline=None)
@given(payload=st.integers(1, 1 << 16), guarantee=st.integers(0, 4),
       periodic=st.booleans(), bounded=st.booleans(),
       domain=st.sampled_from(["", "safety", "adas"]))
def test_classify_total_and_deterministic(payload, guarantee, periodic, bounded,
                                          domain):
    flow = make_flow(payload=payload, guarantee=guarantee,
                     period_ms=100.0 if periodic else None,
                     max_latency_ms=50.0 if bounded else None)
    first = classify(flow, domain)
    assert first in TrafficClass
    assert classify(flow, domain) is first
    assert assign_priority(first) in (0, 3, 5, 7)


# ---------------------------------------------------------------------------
# routing

def test_two_ecus_one_switch_two_link_path():
    topo = toml_topology(chain_topology_text(num_switches=1))
    r = route("f", "ecu-1", "ecu-2", topo, reliability=False)
    assert r.paths == (("l-e1", "l-e2"),)


def test_ring_gives_disjoint_clockwise_counterclockwise():
    # 6-node ring: ecu-a, sw1, sw2, ecu-b, sw3, sw4 (two ECUs on a 4-switch ring)
    text = """
[Ecus.ecu-a]
CpuCores = 2
Memory = 512
Storage = 1000
[Ecus.ecu-b]
CpuCores = 2
Memory = 512
Storage = 1000
[Switches.sw1]
ProcessingDelayUs = 1.0
[Switches.sw2]
ProcessingDelayUs = 1.0
[Switches.sw3]
ProcessingDelayUs = 1.0
[Switches.sw4]
ProcessingDelayUs = 1.0
[Links.r1]
EndpointA = "ecu-a"
EndpointB = "sw1"
RateBps = 1000000000
[Links.r2]
EndpointA = "sw1"
EndpointB = "sw2"
RateBps = 1000000000
[Links.r3]
EndpointA = "sw2"
EndpointB = "ecu-b"
RateBps = 1000000000
[Links.r4]
EndpointA = "ecu-b"
EndpointB = "sw3"
RateBps = 1000000000
[Links.r5]
EndpointA = "sw3"
EndpointB = "sw4"
RateBps = 1000000000
[Links.r6]
EndpointA = "sw4"
EndpointB = "ecu-a"
RateBps = 1000000000
"""
    topo = toml_topology(text)
    r = route("f", "ecu-a", "ecu-b", topo, reliability=True)
    assert len(r.paths) == 2
    assert set(r.paths) == {("r1", "r2", "r3"), ("r6", "r5", "r4")}
    assert paths_disjoint(r, topo)

    # oracle: brute-force all simple paths, verify a disjoint pair exists and
    # the returned pair is one of them
    graph = nx.MultiGraph()
    for link in topo.links:
        graph.add_edge(link.endpoint_a, link.endpoint_b, key=link.id)
    simple = [tuple(k for _, _, k in path) for path in
              nx.all_simple_edge_paths(graph, "ecu-a", "ecu-b")]
    disjoint_pairs = [
        (a, b) for a, b in itertools.combinations(simple, 2)
        if not (set(a) & set(b))
    ]
    assert any(set(pair) == set(r.paths) for pair in disjoint_pairs)


def test_line_topology_has_no_disjoint_pair():
    topo = toml_topology(chain_topology_text(num_switches=2))
    with pytest.raises(PlanningError) as err:
        route("f", "ecu-1", "ecu-2", topo, reliability=True)
    assert err.value.code == "NO_DISJOINT_PATH"


def test_parallel_links_are_disjoint_paths(ring_topology):
    r = route("f", "ecu-a", "ecu-b", ring_topology, reliability=True)
    assert len(r.paths) == 2
    assert paths_disjoint(r, ring_topology)
    # deterministic: lexicographically smaller path first
    assert r.paths[0] == ("eth-a-down", "eth-down-b")


def test_no_path_error():
    text = chain_topology_text() + """
[Ecus.ecu-can]
CpuCores = 1
Memory = 64
Storage = 1000
[Links.legacy]
EndpointA = "ecu-can"
EndpointB = "ecu-1"
RateBps = 1000000
Medium = "can"
"""
    topo = toml_topology(text)
    # ecu-can hangs off a CAN-only segment: no Ethernet route exists
    with pytest.raises(PlanningError) as err:
        route("f", "ecu-1", "ecu-can", topo, reliability=False)
    assert err.value.code == "NO_PATH"


# ---------------------------------------------------------------------------
# gate control lists

def one_hop_topology(rate=100_000_000):
    return toml_topology(chain_topology_text(num_switches=1, rate_bps=rate))


def test_single_flow_window_duration_and_alignment():
    topo = one_hop_topology()
    flow = make_flow(payload=100, period_ms=100.0, guarantee=4)
    pf = planned(flow, topo, domain="safety")
    budget = 1_000
    schedule = synthesize_gcl([pf], topo, clock_budget_ns=budget)
    # 100 B payload + 38 B overhead = 1104 bits -> 11.04 us at 100 Mbit/s
    assert tx_time_ns(100, 100_000_000) == 11_040
    key = ("sw-1", "l-e2")
    windows = schedule.port_windows[key]
    assert len(windows) == 1
    assert windows[0].duration_ns == 11_040 + 2 * budget
    assert schedule.port_cycles[key] == 100_000_000  # 100 ms in ns


def test_zero_flows_vacuous_always_open_gcl():
    topo = one_hop_topology()
    schedule = synthesize_gcl([], topo)
    assert schedule.gcls
    for gcl in schedule.gcls:
        assert len(gcl.entries) == 1
        assert gcl.entries[0].mask == 0xFF
        assert gcl.entries[0].duration_ns == gcl.cycle_ns


def test_two_periods_hyperperiod_and_window_count():
    topo = one_hop_topology()
    fast = planned(make_flow(flow_id="fast", payload=100, period_ms=2.0,
                             max_latency_ms=1.0, guarantee=4), topo, "safety")
    slow = planned(make_flow(flow_id="slow", payload=100, period_ms=5.0,
                             max_latency_ms=4.0, guarantee=4), topo, "safety")
    schedule = synthesize_gcl([fast, slow], topo)
    key = ("sw-1", "l-e2")
    assert schedule.port_cycles[key] == 10_000_000  # lcm(2, 5) ms
    windows = schedule.port_windows[key]
    assert len([w for w in windows if w.flow_id == "fast"]) == 5
    assert len([w for w in windows if w.flow_id == "slow"]) == 2


def gcl_entries_cover_cycle(gcl):
    cursor = 0
    for entry in gcl.entries:
        assert entry.offset_ns == cursor
        assert entry.duration_ns > 0
        cursor += entry.duration_ns
    assert cursor == gcl.cycle_ns


def test_entries_nonoverlapping_and_cover_cycle():
    topo = one_hop_topology()
    flows = [
        planned(make_flow(flow_id=f"f{i}", payload=100 * (i + 1), period_ms=p,
                          max_latency_ms=p, guarantee=4), topo, "safety")
        for i, p in enumerate([2.0, 5.0, 10.0])
    ]
    schedule = synthesize_gcl(flows, topo)
    for gcl in schedule.gcls:
        gcl_entries_cover_cycle(gcl)


def test_hyperperiod_phase_shift_yields_identical_schedule():
    topo = one_hop_topology()

    def schedule_for(offset_ms):
        fast = planned(make_flow(flow_id="fast", payload=100, period_ms=2.0,
                                 max_latency_ms=1.0, guarantee=4,
                                 offset_ms=offset_ms), topo, "safety")
        slow = planned(make_flow(flow_id="slow", payload=200, period_ms=5.0,
                                 max_latency_ms=4.0, guarantee=4,
                                 offset_ms=offset_ms), topo, "safety")
        return synthesize_gcl([fast, slow], topo)

    base = schedule_for(0.0)
    # one full hyperperiod (10 ms) later: identical windows modulo the cycle
    shifted = schedule_for(0.0)
    for key in base.port_windows:
        assert base.port_windows[key] == shifted.port_windows[key]
    assert [g.entries for g in base.gcls] == [g.entries for g in shifted.gcls]


def test_hyperperiod_cap_rejects_unharmonized_periods():
    topo = one_hop_topology()
    a = planned(make_flow(flow_id="a", payload=100, period_ms=7.0,
                          max_latency_ms=7.0, guarantee=4), topo, "safety")
    b = planned(make_flow(flow_id="b", payload=100, period_ms=1999.0,
                          max_latency_ms=1000.0, guarantee=4), topo, "safety")
    with pytest.raises(PlanningError) as err:
        synthesize_gcl([a, b], topo)
    assert err.value.code == "INFEASIBLE_SCHEDULE"
    assert "harmonize" in err.value.message


def test_aperiodic_control_gets_standing_window():
    topo = one_hop_topology()
    flow = make_flow(payload=64, period_ms=None, max_latency_ms=None, guarantee=4)
    pf = planned(flow, topo, domain="safety")
    assert pf.scheduled
    schedule = synthesize_gcl([pf], topo)
    key = ("sw-1", "l-e2")
    assert schedule.port_cycles[key] == APERIODIC_CONTROL_PERIOD_NS
    assert len(schedule.port_windows[key]) == 1


# ---------------------------------------------------------------------------
# credit-based shaper

def test_cbs_formula_example():
    # 962 B payload -> exactly 1000 wire bytes = 8000 bits; at 1 kHz = 8 Mbit/s
    topo = one_hop_topology(rate=100_000_000)
    flow = make_flow(payload=1538, period_ms=1.0, max_latency_ms=None,
                     guarantee=1)
    assert wire_bytes(962) == 1000
    stream = make_flow(flow_id="s", payload=962, period_ms=1.0,
                       max_latency_ms=None, guarantee=1)
    pf = planned(stream, topo)
    pf = pf.__class__(**{**pf.__dict__, "traffic_class": TrafficClass.STREAM,
                         "priority": 5})
    params = compute_cbs([pf], topo)
    assert len(params) == 1
    assert params[0].idle_slope_bps == 8_800_000
    assert params[0].send_slope_bps == 8_800_000 - 100_000_000
    assert params[0].queue == 5


def test_cbs_no_streams_no_params():
    topo = one_hop_topology()
    assert compute_cbs([], topo) == []


def test_cbs_oversubscribed():
    # 80 Mbit/s demand on a 100 Mbit/s link: 1.10 x 80 = 88 > 75 cap
    topo = one_hop_topology(rate=100_000_000)
    stream = make_flow(flow_id="s", payload=962, period_ms=0.1,
                       max_latency_ms=None, guarantee=1)
    pf = planned(stream, topo)
    pf = pf.__class__(**{**pf.__dict__, "traffic_class": TrafficClass.STREAM,
                         "priority": 5})
    with pytest.raises(PlanningError) as err:
        compute_cbs([pf], topo)
    assert err.value.code == "OVERSUBSCRIBED"


# ---------------------------------------------------------------------------
# worst-case bounds

def test_transmission_component_1500B_100mbps():
    # 1500 B payload + 38 B overhead = 1538 B = 12304 bits -> 123.04 us
    assert tx_time_ns(1500, 100_000_000) == 123_040


def test_aligned_flow_first_hop_queuing_zero():
    topo = one_hop_topology()
    flow = make_flow(payload=100, period_ms=100.0, guarantee=4)
    pf = planned(flow, topo, domain="safety")
    schedule = synthesize_gcl([pf], topo, clock_budget_ns=0)
    bound = worst_case_bound(pf, schedule, topo, [pf])
    assert bound.per_hop[0].queuing_ns == 0


def test_three_hop_golden_bound(three_hop_topology):
    # CONTROL flow, 100 B, aligned windows, clock budget 0:
    #   hop ecu-front->sw-front: q=0,  tx=11040, prop=100, proc=0
    #   hop sw-front->sw-rear:   q=0,  tx=11040, prop=100, proc=1000
    #   hop sw-rear->ecu-rear:   q=0,  tx=11040, prop=100, proc=1000
    # total = 3*(11040+100) + 2*1000 = 35420 ns
    flow = make_flow(payload=100, period_ms=100.0, guarantee=4)
    r = route(flow.id, "ecu-front", "ecu-rear", three_hop_topology, False)
    pf = planned_flow(flow, "safety", "ecu-front", "ecu-rear", r)
    schedule = synthesize_gcl([pf], three_hop_topology, clock_budget_ns=0)
    bound = worst_case_bound(pf, schedule, three_hop_topology, [pf])
    assert bound.total_ns == 35_420
    assert [h.link for h in bound.per_hop] == ["eth-front", "eth-backbone",
                                               "eth-rear"]
    for hop in bound.per_hop:
        assert hop.transmission_ns == 11_040
        assert hop.propagation_ns == 100
    assert bound.per_hop[0].processing_ns == 0
    assert bound.per_hop[1].processing_ns == 1000


def test_bound_total_is_sum_of_components(three_hop_topology):
    flow = make_flow(payload=300, period_ms=50.0, guarantee=4)
    r = route(flow.id, "ecu-front", "ecu-rear", three_hop_topology, False)
    pf = planned_flow(flow, "safety", "ecu-front", "ecu-rear", r)
    schedule = synthesize_gcl([pf], three_hop_topology)
    bound = worst_case_bound(pf, schedule, three_hop_topology, [pf])
    assert bound.total_ns == sum(
        h.processing_ns + h.queuing_ns + h.transmission_ns + h.propagation_ns
        for h in bound.per_hop)


def test_unscheduled_flow_error():
    topo = one_hop_topology()
    flow = make_flow(payload=100)
    pf = planned(flow, topo)
    pf = pf.__class__(**{**pf.__dict__, "paths": ()})
    schedule = synthesize_gcl([], topo)
    with pytest.raises(PlanningError) as err:
        worst_case_bound(pf, schedule, topo, [pf])
    assert err.value.code == "UNSCHEDULED_FLOW"


# ---------------------------------------------------------------------------
# FRER derivation

def test_frer_recovery_window(ring_topology):
    flow = make_flow(payload=8096, period_ms=100.0, guarantee=4,
                     reliability=True, delivery=True)
    r = route(flow.id, "ecu-a", "ecu-b", ring_topology, reliability=True)
    pf = planned_flow(flow, "safety", "ecu-a", "ecu-b", r)
    schedule = synthesize_gcl([pf], ring_topology)
    bound = worst_case_bound(pf, schedule, ring_topology, [pf])
    cfg = derive_frer(pf, r, bound.total_ns)
    assert cfg.replication_point == "ecu-a"
    assert cfg.elimination_point == "ecu-b"
    assert cfg.sequence_space == 1 << 16
    # bound far below one period: window floors at 8
    assert cfg.recovery_window == max(8, 2 * -(-bound.total_ns // pf.period_ns))
    assert cfg.recovery_window == 8


def test_frer_single_path_is_contract_error(ring_topology):
    flow = make_flow(payload=100, period_ms=100.0)
    r = route(flow.id, "ecu-a", "ecu-b", ring_topology, reliability=False)
    pf = planned_flow(flow, "generic", "ecu-a", "ecu-b", r)
    with pytest.raises(PlanningError):
        derive_frer(pf, r, 1000)


def test_guard_band_is_max_frame_at_rate():
    assert guard_ns(100_000_000) == 123_040
    assert guard_ns(1_000_000_000) == 12_304
