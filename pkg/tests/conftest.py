"""Shared builders for descriptor/topology/flow test inputs."""

import pytest

from detsdv.descriptors import (
    DataSpec,
    FlowSpec,
    ServiceDescriptor,
    ServiceMetadata,
    TrafficSpec,
    TrafficTimeSpec,
    parse_service_descriptor,
    parse_topology_descriptor,
)
from detsdv.report import fixture_text

WHEELCHAIR_TOML = fixture_text("wheelchair_driver.service.toml")


def chain_topology_text(num_switches=1, rate_bps=100_000_000, proc_us=1.0,
                        prop_us=0.1, num_ecus=2, ecu_caps=None):
    """ecu-1 .. ecu-N all attached to sw-1; switches form a chain."""
    lines = []
    for i in range(1, num_ecus + 1):
        cpu, mem, storage, gpu, energy = (ecu_caps or {}).get(i, (8, 8192, 10**11, False, 1))
        lines += [
            f"[Ecus.ecu-{i}]",
            f"CpuCores = {cpu}",
            f"Memory = {mem}",
            f"Storage = {storage}",
            f"Gpu = {'true' if gpu else 'false'}",
            f"EnergyClass = {energy}",
            "",
        ]
    for s in range(1, num_switches + 1):
        lines += [f"[Switches.sw-{s}]", f"ProcessingDelayUs = {proc_us}", ""]

    def link(lid, a, b):
        return [f"[Links.{lid}]", f'EndpointA = "{a}"', f'EndpointB = "{b}"',
                f"RateBps = {rate_bps}", f"PropagationDelayUs = {prop_us}", ""]

    # ecu-1 on sw-1, every other ECU on the last switch; switch chain between.
    lines += link("l-e1", "ecu-1", "sw-1")
    for s in range(1, num_switches):
        lines += link(f"l-s{s}", f"sw-{s}", f"sw-{s + 1}")
    for i in range(2, num_ecus + 1):
        lines += link(f"l-e{i}", f"sw-{num_switches}", f"ecu-{i}")
    return "\n".join(lines)


def make_flow(flow_id="f1", payload=100, period_ms=100.0, max_latency_ms=50.0,
              guarantee=2, reliability=False, delivery=False, jitter_ms=None,
              offset_ms=0.0, replicas=1, cpu=1, memory=64, storage=0,
              gpu=False, criticality=None):
    node = {
        "Worker": __import__("detsdv.descriptors", fromlist=["NodeSpec"]).NodeSpec(
            image="img", image_type="docker", replicas=replicas, cpu=cpu,
            memory=memory, storage=storage, gpu=gpu, energy=1,
            offloading=False, criticality=criticality or {}),
    }
    time = TrafficTimeSpec(max_latency=max_latency_ms, periodicity=period_ms,
                           transmit_offset=offset_ms, jitter=jitter_ms)
    traffic = TrafficSpec(guarantee=guarantee, reliability=reliability,
                          delivery=delivery, wired=True, time=time)
    return FlowSpec(flow_id, node, DataSpec("json", payload), traffic)


def make_service(flows, title="svc", domain="generic"):
    return ServiceDescriptor(title, ServiceMetadata("t", "1.0", domain),
                             tuple(flows))


@pytest.fixture
def wheelchair_service():
    return parse_service_descriptor(WHEELCHAIR_TOML)


@pytest.fixture
def three_hop_topology():
    return parse_topology_descriptor(fixture_text("invehicle_3hop.topology.toml"))


@pytest.fixture
def ring_topology():
    return parse_topology_descriptor(fixture_text("ring.topology.toml"))
