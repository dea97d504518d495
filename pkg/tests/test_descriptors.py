"""Descriptor parsing, invariants, and round-trip serialization."""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from detsdv.descriptors import (
    CritLevel,
    Criticality,
    DeviceKind,
    Medium,
    NodeSpec,
    parse_service_descriptor,
    parse_topology_descriptor,
    serialize,
)
from detsdv.errors import DescriptorError

from conftest import WHEELCHAIR_TOML, chain_topology_text


def test_paper_listing_parses():
    svc = parse_service_descriptor(WHEELCHAIR_TOML)
    assert svc.title == "WheelchairDriver"
    assert svc.metadata.author == "TheWheelChairCompany"
    assert svc.metadata.domain == "safety"
    flow = svc.flows[0]
    assert flow.id == "Flow1"
    node = flow.node_specs["NodeA"]
    assert node.image == "thewheelchairservice"
    assert node.replicas == 2
    assert node.cpu == 2
    assert node.memory == 1024
    assert node.storage == 51200000000
    assert node.gpu is False
    assert node.energy == 1
    assert flow.data_spec.data_format == "json"
    assert flow.data_spec.data_size == 8096
    traffic = flow.traffic_spec
    assert traffic.guarantee == 4
    assert traffic.reliability and traffic.delivery and traffic.wired
    assert traffic.time.max_latency == 50
    assert traffic.time.periodicity == 100
    assert traffic.time.transmit_offset == 0
    assert traffic.time.jitter == 10


MINIMAL = """
title = "Mini"
[ServiceMetadata]
Author = "a"
Version = "1"
Domain = "d"
[Flows.only]
[Flows.only.NodeSpecs.n]
Image = "i"
ImageType = "docker"
Replicas = 1
CPU = 1
Memory = 64
Storage = 0
GPU = false
Energy = 0
Offloading = false
[Flows.only.DataSpecs]
DataFormat = "raw"
DataSize = 10
[Flows.only.TrafficSpecs]
Guarantee = 0
Reliability = false
Delivery = false
Wired = true
"""


def test_minimal_document_is_aperiodic_and_unbounded():
    svc = parse_service_descriptor(MINIMAL)
    time = svc.flows[0].traffic_spec.time
    assert time.max_latency is None
    assert time.periodicity is None
    assert time.jitter is None
    assert time.transmit_offset == 0.0


def test_zero_replicas_names_key_path():
    text = WHEELCHAIR_TOML.replace("Replicas = 2", "Replicas = 0")
    with pytest.raises(DescriptorError) as err:
        parse_service_descriptor(text)
    assert err.value.code == "INVARIANT"
    assert err.value.key_path == "Flows.Flow1.NodeSpecs.NodeA.Replicas"


def test_unknown_key_rejected():
    text = WHEELCHAIR_TOML.replace("Energy = 1", "Energy = 1\nTurbo = true")
    with pytest.raises(DescriptorError) as err:
        parse_service_descriptor(text)
    assert err.value.code == "SCHEMA"
    assert err.value.key_path.endswith("Turbo")


def test_syntax_error_is_structured():
    with pytest.raises(DescriptorError) as err:
        parse_service_descriptor("title = [unterminated")
    assert err.value.code == "SYNTAX"
    assert "code" in err.value.to_dict()


@pytest.mark.parametrize("needle,replacement,path", [
    ("CPU = 2", "CPU = 0", "Flows.Flow1.NodeSpecs.NodeA.CPU"),
    ("Memory = 1024", "Memory = 0", "Flows.Flow1.NodeSpecs.NodeA.Memory"),
    ("Storage = 51200000000", "Storage = -1", "Flows.Flow1.NodeSpecs.NodeA.Storage"),
    ("DataSize = 8096", "DataSize = 0", "Flows.Flow1.DataSpecs.DataSize"),
    ("Guarantee = 4", "Guarantee = 9", "Flows.Flow1.TrafficSpecs.Guarantee"),
    ("MaxLatency = 50", "MaxLatency = -1",
     "Flows.Flow1.TrafficSpecs.TrafficTimeSpecs.MaxLatency"),
    ("TransmitOffset = 0", "TransmitOffset = 100",
     "Flows.Flow1.TrafficSpecs.TrafficTimeSpecs.TransmitOffset"),
])
def test_rejection_completeness(needle, replacement, path):
    text = WHEELCHAIR_TOML.replace(needle, replacement)
    with pytest.raises(DescriptorError) as err:
        parse_service_descriptor(text)
    assert err.value.code == "INVARIANT"
    assert err.value.key_path == path


def test_title_must_be_nonempty():
    with pytest.raises(DescriptorError) as err:
        parse_service_descriptor(WHEELCHAIR_TOML.replace('"WheelchairDriver"', '""'))
    assert err.value.code == "INVARIANT"
    assert err.value.key_path == "title"


def test_wrong_type_is_schema_error():
    with pytest.raises(DescriptorError) as err:
        parse_service_descriptor(WHEELCHAIR_TOML.replace("CPU = 2", 'CPU = "two"'))
    assert err.value.code == "SCHEMA"


def test_criticality_table_parses_and_must_slack_rejected():
    text = WHEELCHAIR_TOML.replace(
        "Offloading = false",
        'Offloading = false\n[Flows.Flow1.NodeSpecs.NodeA.Criticality]\n'
        'Memory = {Level = "SHOULD", Slack = 0.25}',
    )
    svc = parse_service_descriptor(text)
    crit = svc.flows[0].node_specs["NodeA"].crit("memory")
    assert crit == Criticality(CritLevel.SHOULD, 0.25)
    # unspecified fields default to MUST
    assert svc.flows[0].node_specs["NodeA"].crit("cpu").level is CritLevel.MUST

    bad = text.replace('{Level = "SHOULD", Slack = 0.25}',
                       '{Level = "MUST", Slack = 0.25}')
    with pytest.raises(DescriptorError) as err:
        parse_service_descriptor(bad)
    assert err.value.code == "INVARIANT"


def test_parsing_is_total_on_garbage_bytes():
    for blob in (b"\x00\xff\xfe", b"[[", b"= = =", bytes(range(128))):
        with pytest.raises(DescriptorError):
            parse_service_descriptor(blob.decode("latin-1"))


# ---------------------------------------------------------------------------
# topology

def test_minimal_three_node_topology():
    topo = parse_topology_descriptor(chain_topology_text(num_switches=1))
    assert [e.id for e in topo.ecus] == ["ecu-1", "ecu-2"]
    assert topo.switches[0].processing_delay_us == 1.0
    # auto-generated one TSN port per incident Ethernet link, 8 queues each
    ports = topo.switches[0].ports
    assert {p.link_id for p in ports} == {"l-e1", "l-e2"}
    assert all(p.num_queues == 8 and p.tsn_capable for p in ports)


def test_dangling_link_endpoint():
    text = chain_topology_text().replace('EndpointB = "ecu-2"', 'EndpointB = "ecu-9"')
    with pytest.raises(DescriptorError) as err:
        parse_topology_descriptor(text)
    assert err.value.code == "SCHEMA"


def test_disconnected_islands_listed():
    text = chain_topology_text() + "\n[Ecus.island]\nCpuCores = 1\nMemory = 1\nStorage = 1\n"
    with pytest.raises(DescriptorError) as err:
        parse_topology_descriptor(text)
    assert err.value.code == "DISCONNECTED"
    assert "island" in err.value.message


def test_duplicate_identifier_across_spaces():
    text = chain_topology_text().replace("[Switches.sw-1]", "[Switches.ecu-1]") \
        .replace('EndpointB = "sw-1"', 'EndpointB = "ecu-1"') \
        .replace('EndpointA = "sw-1"', 'EndpointA = "ecu-1"')
    with pytest.raises(DescriptorError) as err:
        parse_topology_descriptor(text)
    assert err.value.code == "INVARIANT"


def test_device_bus_must_reference_link(three_hop_topology):
    assert three_hop_topology.devices[0].kind is DeviceKind.SENSOR
    from detsdv.report import fixture_text
    bad = fixture_text("invehicle_3hop.topology.toml").replace(
        'Bus = "can-front"', 'Bus = "no-such-bus"', 1)
    with pytest.raises(DescriptorError) as err:
        parse_topology_descriptor(bad)
    assert err.value.code == "SCHEMA"


def test_can_medium_parsed(three_hop_topology):
    can = three_hop_topology.link("can-front")
    assert can.medium is Medium.CAN
    assert can.rate_bps == 1_000_000


# ---------------------------------------------------------------------------
# round-trips

def test_listing_roundtrip():
    svc = parse_service_descriptor(WHEELCHAIR_TOML)
    assert parse_service_descriptor(serialize(svc)) == svc


def test_topology_roundtrip_empty_devices():
    topo = parse_topology_descriptor(chain_topology_text())
    again = parse_topology_descriptor(serialize(topo))
    assert again == topo
    assert again.devices == ()


_ident = st.from_regex(r"[A-Za-z][A-Za-z0-9_-]{0,7}", fullmatch=True)
_crit = st.one_of(
    st.just(Criticality(CritLevel.MUST, 0.0)),
    st.builds(Criticality,
              level=st.sampled_from([CritLevel.SHOULD, CritLevel.MAY]),
              slack=st.floats(0, 2, allow_nan=False, allow_infinity=False)),
)
_node_spec = st.builds(
    NodeSpec,
    image=_ident, image_type=st.sampled_from(["docker", "oci", "wasm"]),
    replicas=st.integers(1, 4), cpu=st.integers(1, 32),
    memory=st.integers(1, 1 << 16), storage=st.integers(0, 1 << 40),
    gpu=st.booleans(), energy=st.integers(0, 5), offloading=st.booleans(),
    criticality=st.dictionaries(
        st.sampled_from(["replicas", "cpu", "memory", "storage", "gpu",
                         "energy", "offloading"]),
        _crit, max_size=3),
)


@st.composite
def _time_spec(draw):
    from detsdv.descriptors import TrafficTimeSpec
    periodic = draw(st.booleans())
    periodicity = draw(st.floats(0.5, 10_000, allow_nan=False)) if periodic else None
    offset = draw(st.floats(0, 0.9, allow_nan=False)) * periodicity if periodic else \
        draw(st.floats(0, 100, allow_nan=False))
    return TrafficTimeSpec(
        max_latency=draw(st.none() | st.floats(0, 1e5, allow_nan=False)),
        periodicity=periodicity,
        transmit_offset=offset,
        jitter=draw(st.none() | st.floats(0, 1e3, allow_nan=False)),
    )


@st.composite
def _service(draw):
    from detsdv.descriptors import (DataSpec, FlowSpec, ServiceDescriptor,
                                    ServiceMetadata, TrafficSpec)
    flows = []
    for flow_id in sorted(draw(st.sets(_ident, min_size=1, max_size=3))):
        roles = sorted(draw(st.sets(_ident, min_size=1, max_size=2)))
        node_specs = {role: draw(_node_spec) for role in roles}
        traffic = TrafficSpec(
            guarantee=draw(st.integers(0, 4)),
            reliability=draw(st.booleans()), delivery=draw(st.booleans()),
            wired=draw(st.booleans()), time=draw(_time_spec()))
        flows.append(FlowSpec(flow_id, node_specs,
                              DataSpec(draw(_ident), draw(st.integers(1, 1 << 20))),
                              traffic))
    meta = ServiceMetadata(draw(_ident), draw(_ident), draw(_ident))
    return ServiceDescriptor(draw(_ident), meta, tuple(flows))


@settings(max_examples=80, deadline=None)
@given(_service())
def test_roundtrip_property(svc):
    assert parse_service_descriptor(serialize(svc)) == svc
