"""Service and topology descriptor parsing, validation, and serialization.

Descriptors are TOML documents. Service descriptors declare per-flow compute
requirements (NodeSpecs), payload characteristics (DataSpecs) and traffic
guarantees (TrafficSpecs); topology descriptors declare the ECU/switch/link
substrate a plan is computed against. Parsing is strict: unknown keys are
schema errors, and every invariant violation names the offending key path.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Optional

try:
    import tomllib as _toml_reader  # Python >= 3.11
except ModuleNotFoundError:  # pragma: no cover - depends on interpreter
    import tomli as _toml_reader

import toml as _toml_writer

from .errors import DescriptorError

# 802.1Q priority queues per egress port.
NUM_PRIORITY_QUEUES = 8
# Classic CAN: at most 8 payload bytes; descriptor invariant allows up to 64
# (CAN-FD framing) but the gateway record format is classic-CAN only.
CAN_MAX_PAYLOAD_BYTES = 64


class CritLevel(Enum):
    MUST = "MUST"
    SHOULD = "SHOULD"
    MAY = "MAY"


@dataclass(frozen=True)
class Criticality:
    level: CritLevel
    slack: float = 0.0


MUST = Criticality(CritLevel.MUST, 0.0)

# NodeSpec fields that may carry an explicit criticality entry.
_CRIT_FIELDS = {
    "Replicas": "replicas",
    "CPU": "cpu",
    "Memory": "memory",
    "Storage": "storage",
    "GPU": "gpu",
    "Energy": "energy",
    "Offloading": "offloading",
}


@dataclass(frozen=True)
class NodeSpec:
    image: str
    image_type: str
    replicas: int
    cpu: int
    memory: int  # MiB
    storage: int  # bytes
    gpu: bool
    energy: int  # opaque ordinal class, used only for tie-breaking
    offloading: bool  # recorded, unused by placement
    criticality: dict = field(default_factory=dict)  # field name -> Criticality

    def crit(self, field_name: str) -> Criticality:
        """Criticality for a field; MUST with zero slack when unspecified."""
        return self.criticality.get(field_name, MUST)


@dataclass(frozen=True)
class DataSpec:
    data_format: str
    data_size: int  # bytes per message


@dataclass(frozen=True)
class TrafficTimeSpec:
    max_latency: Optional[float] = None  # ms
    periodicity: Optional[float] = None  # ms; None = aperiodic/event-triggered
    transmit_offset: float = 0.0  # ms
    jitter: Optional[float] = None  # ms


@dataclass(frozen=True)
class TrafficSpec:
    guarantee: int  # 0..4, higher = stricter
    reliability: bool  # replication (FRER) required
    delivery: bool  # loss forbidden
    wired: bool
    time: TrafficTimeSpec


@dataclass(frozen=True)
class FlowSpec:
    id: str
    node_specs: dict  # role -> NodeSpec, declaration order preserved
    data_spec: DataSpec
    traffic_spec: TrafficSpec


@dataclass(frozen=True)
class ServiceMetadata:
    author: str
    version: str
    domain: str


@dataclass(frozen=True)
class ServiceDescriptor:
    title: str
    metadata: ServiceMetadata
    flows: tuple  # of FlowSpec


class Medium(Enum):
    ETHERNET = "ethernet"
    CAN = "can"


class DeviceKind(Enum):
    SENSOR = "sensor"
    ACTUATOR = "actuator"


@dataclass(frozen=True)
class Device:
    id: str
    kind: DeviceKind
    bus: str  # link id of the legacy bus the device hangs off


@dataclass(frozen=True)
class SwitchPort:
    port_id: str
    link_id: Optional[str]  # bound egress/ingress link; None = unused port
    tsn_capable: bool = True
    num_queues: int = NUM_PRIORITY_QUEUES


@dataclass(frozen=True)
class SwitchNode:
    id: str
    ports: tuple  # of SwitchPort
    processing_delay_us: float

    def port_for_link(self, link_id: str) -> Optional[SwitchPort]:
        for p in self.ports:
            if p.link_id == link_id:
                return p
        return None


@dataclass(frozen=True)
class EcuNode:
    id: str
    cpu_cores: int
    memory: int  # MiB
    storage: int  # bytes
    gpu: bool = False
    energy_class: int = 0
    attached_devices: tuple = ()


@dataclass(frozen=True)
class Link:
    id: str
    endpoint_a: str
    endpoint_b: str
    rate_bps: int
    propagation_delay_us: float
    medium: Medium = Medium.ETHERNET

    def other_end(self, node_id: str) -> str:
        return self.endpoint_b if node_id == self.endpoint_a else self.endpoint_a


@dataclass(frozen=True)
class TopologyDescriptor:
    ecus: tuple
    switches: tuple
    links: tuple
    devices: tuple

    def node_ids(self) -> list:
        return [e.id for e in self.ecus] + [s.id for s in self.switches]

    def ecu(self, ecu_id: str) -> EcuNode:
        for e in self.ecus:
            if e.id == ecu_id:
                return e
        raise KeyError(ecu_id)

    def switch(self, switch_id: str) -> SwitchNode:
        for s in self.switches:
            if s.id == switch_id:
                return s
        raise KeyError(switch_id)

    def is_switch(self, node_id: str) -> bool:
        return any(s.id == node_id for s in self.switches)

    def link(self, link_id: str) -> Link:
        for l in self.links:
            if l.id == link_id:
                return l
        raise KeyError(link_id)

    def links_at(self, node_id: str, medium: Optional[Medium] = None) -> list:
        out = []
        for l in self.links:
            if node_id in (l.endpoint_a, l.endpoint_b):
                if medium is None or l.medium == medium:
                    out.append(l)
        return out


# ---------------------------------------------------------------------------
# strict-table helpers

def _syntax(msg: str) -> DescriptorError:
    return DescriptorError("SYNTAX", msg)


def _schema(path: str, msg: str) -> DescriptorError:
    return DescriptorError("SCHEMA", msg, key_path=path)


def _invariant(path: str, msg: str) -> DescriptorError:
    return DescriptorError("INVARIANT", msg, key_path=path)


def _join(path: str, key: str) -> str:
    return f"{path}.{key}" if path else key


def _expect_table(value: Any, path: str) -> dict:
    if not isinstance(value, dict):
        raise _schema(path, f"expected a table, got {type(value).__name__}")
    return dict(value)  # shallow copy; consumed key by key


def _reject_extras(table: dict, path: str) -> None:
    if table:
        key = sorted(table)[0]
        raise _schema(_join(path, key), "unknown key")


def _take(table: dict, key: str, path: str, required: bool = True, default: Any = None) -> Any:
    if key not in table:
        if required:
            raise _schema(_join(path, key), "missing required key")
        return default
    return table.pop(key)


def _as_str(value: Any, path: str) -> str:
    if not isinstance(value, str):
        raise _schema(path, f"expected a string, got {type(value).__name__}")
    return value


def _as_bool(value: Any, path: str) -> bool:
    if not isinstance(value, bool):
        raise _schema(path, f"expected a boolean, got {type(value).__name__}")
    return value


def _as_int(value: Any, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise _schema(path, f"expected an integer, got {type(value).__name__}")
    return value


def _as_ms(value: Any, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise _schema(path, f"expected a number, got {type(value).__name__}")
    return float(value)


# ---------------------------------------------------------------------------
# service descriptors

def _parse_criticality(raw: Any, path: str) -> dict:
    table = _expect_table(raw, path)
    out = {}
    for key in list(table):
        if key not in _CRIT_FIELDS:
            raise _schema(_join(path, key), "unknown criticality field")
        entry_path = _join(path, key)
        entry = _expect_table(table.pop(key), entry_path)
        level_raw = _as_str(_take(entry, "Level", entry_path), _join(entry_path, "Level"))
        try:
            level = CritLevel(level_raw.upper())
        except ValueError:
            raise _schema(_join(entry_path, "Level"), f"unknown level {level_raw!r}")
        slack = _as_ms(_take(entry, "Slack", entry_path, required=False, default=0.0),
                       _join(entry_path, "Slack"))
        _reject_extras(entry, entry_path)
        if slack < 0:
            raise _invariant(_join(entry_path, "Slack"), "slack must be >= 0")
        if level is CritLevel.MUST and slack != 0:
            raise _invariant(_join(entry_path, "Slack"), "MUST implies slack = 0")
        out[_CRIT_FIELDS[key]] = Criticality(level, slack)
    return out


def _parse_node_spec(raw: Any, path: str) -> NodeSpec:
    table = _expect_table(raw, path)
    image = _as_str(_take(table, "Image", path), _join(path, "Image"))
    image_type = _as_str(_take(table, "ImageType", path), _join(path, "ImageType"))
    replicas = _as_int(_take(table, "Replicas", path), _join(path, "Replicas"))
    cpu = _as_int(_take(table, "CPU", path), _join(path, "CPU"))
    memory = _as_int(_take(table, "Memory", path), _join(path, "Memory"))
    storage = _as_int(_take(table, "Storage", path), _join(path, "Storage"))
    gpu = _as_bool(_take(table, "GPU", path), _join(path, "GPU"))
    energy = _as_int(_take(table, "Energy", path), _join(path, "Energy"))
    offloading = _as_bool(_take(table, "Offloading", path), _join(path, "Offloading"))
    crit_raw = _take(table, "Criticality", path, required=False)
    criticality = _parse_criticality(crit_raw, _join(path, "Criticality")) if crit_raw is not None else {}
    _reject_extras(table, path)

    if replicas < 1:
        raise _invariant(_join(path, "Replicas"), "replicas must be >= 1")
    if cpu < 1:
        raise _invariant(_join(path, "CPU"), "cpu must be >= 1")
    if memory <= 0:
        raise _invariant(_join(path, "Memory"), "memory must be > 0")
    if storage < 0:
        raise _invariant(_join(path, "Storage"), "storage must be >= 0")
    if energy < 0:
        raise _invariant(_join(path, "Energy"), "energy class must be >= 0")
    return NodeSpec(image, image_type, replicas, cpu, memory, storage, gpu,
                    energy, offloading, criticality)


def _parse_time_spec(raw: Any, path: str) -> TrafficTimeSpec:
    table = _expect_table(raw, path)
    max_latency = _take(table, "MaxLatency", path, required=False)
    periodicity = _take(table, "Periodicity", path, required=False)
    offset = _take(table, "TransmitOffset", path, required=False, default=0.0)
    jitter = _take(table, "Jitter", path, required=False)
    _reject_extras(table, path)

    def opt_ms(value, key):
        return None if value is None else _as_ms(value, _join(path, key))

    max_latency = opt_ms(max_latency, "MaxLatency")
    periodicity = opt_ms(periodicity, "Periodicity")
    jitter = opt_ms(jitter, "Jitter")
    offset = _as_ms(offset, _join(path, "TransmitOffset"))

    for key, value in (("MaxLatency", max_latency), ("Periodicity", periodicity),
                       ("TransmitOffset", offset), ("Jitter", jitter)):
        if value is not None and value < 0:
            raise _invariant(_join(path, key), "time values must be >= 0")
    if periodicity is not None and periodicity <= 0:
        raise _invariant(_join(path, "Periodicity"), "periodicity must be > 0")
    if periodicity is not None and offset >= periodicity:
        raise _invariant(_join(path, "TransmitOffset"),
                         "transmit offset must be < periodicity")
    return TrafficTimeSpec(max_latency, periodicity, offset, jitter)


def _parse_traffic_spec(raw: Any, path: str) -> TrafficSpec:
    table = _expect_table(raw, path)
    guarantee = _as_int(_take(table, "Guarantee", path), _join(path, "Guarantee"))
    reliability = _as_bool(_take(table, "Reliability", path), _join(path, "Reliability"))
    delivery = _as_bool(_take(table, "Delivery", path), _join(path, "Delivery"))
    wired = _as_bool(_take(table, "Wired", path), _join(path, "Wired"))
    time_raw = _take(table, "TrafficTimeSpecs", path, required=False)
    _reject_extras(table, path)

    if guarantee not in (0, 1, 2, 3, 4):
        raise _invariant(_join(path, "Guarantee"), "guarantee must be in 0..4")
    time_spec = (_parse_time_spec(time_raw, _join(path, "TrafficTimeSpecs"))
                 if time_raw is not None else TrafficTimeSpec())
    return TrafficSpec(guarantee, reliability, delivery, wired, time_spec)


def _parse_flow(flow_id: str, raw: Any, path: str) -> FlowSpec:
    table = _expect_table(raw, path)
    node_raw = _take(table, "NodeSpecs", path)
    data_raw = _take(table, "DataSpecs", path)
    traffic_raw = _take(table, "TrafficSpecs", path)
    _reject_extras(table, path)

    node_path = _join(path, "NodeSpecs")
    node_table = _expect_table(node_raw, node_path)
    if not node_table:
        raise _invariant(node_path, "flow must declare at least one node role")
    node_specs = {}
    for role in list(node_table):
        node_specs[role] = _parse_node_spec(node_table.pop(role), _join(node_path, role))

    data_path = _join(path, "DataSpecs")
    data_table = _expect_table(data_raw, data_path)
    data_format = _as_str(_take(data_table, "DataFormat", data_path), _join(data_path, "DataFormat"))
    data_size = _as_int(_take(data_table, "DataSize", data_path), _join(data_path, "DataSize"))
    _reject_extras(data_table, data_path)
    if data_size <= 0:
        raise _invariant(_join(data_path, "DataSize"), "data size must be > 0")

    traffic = _parse_traffic_spec(traffic_raw, _join(path, "TrafficSpecs"))
    return FlowSpec(flow_id, node_specs, DataSpec(data_format, data_size), traffic)


def parse_service_descriptor(text: str) -> ServiceDescriptor:
    """Parse and validate a service descriptor TOML document."""
    try:
        root = _toml_reader.loads(text)
    except _toml_reader.TOMLDecodeError as exc:
        raise _syntax(str(exc)) from exc

    table = _expect_table(root, "")
    title = _as_str(_take(table, "title", ""), "title")
    meta_raw = _take(table, "ServiceMetadata", "")
    flows_raw = _take(table, "Flows", "")
    _reject_extras(table, "")

    if not title:
        raise _invariant("title", "title must be non-empty")

    meta_table = _expect_table(meta_raw, "ServiceMetadata")
    author = _as_str(_take(meta_table, "Author", "ServiceMetadata"), "ServiceMetadata.Author")
    version = _as_str(_take(meta_table, "Version", "ServiceMetadata"), "ServiceMetadata.Version")
    domain = _as_str(_take(meta_table, "Domain", "ServiceMetadata"), "ServiceMetadata.Domain")
    _reject_extras(meta_table, "ServiceMetadata")

    flows_table = _expect_table(flows_raw, "Flows")
    if not flows_table:
        raise _invariant("Flows", "descriptor must declare at least one flow")
    flows = []
    for flow_id in list(flows_table):
        flows.append(_parse_flow(flow_id, flows_table.pop(flow_id), _join("Flows", flow_id)))

    return ServiceDescriptor(title, ServiceMetadata(author, version, domain), tuple(flows))


# ---------------------------------------------------------------------------
# topology descriptors

def _parse_ecu(ecu_id: str, raw: Any, path: str) -> EcuNode:
    table = _expect_table(raw, path)
    cpu = _as_int(_take(table, "CpuCores", path), _join(path, "CpuCores"))
    memory = _as_int(_take(table, "Memory", path), _join(path, "Memory"))
    storage = _as_int(_take(table, "Storage", path), _join(path, "Storage"))
    gpu = _as_bool(_take(table, "Gpu", path, required=False, default=False), _join(path, "Gpu"))
    energy = _as_int(_take(table, "EnergyClass", path, required=False, default=0),
                     _join(path, "EnergyClass"))
    devices_raw = _take(table, "Devices", path, required=False, default=[])
    _reject_extras(table, path)

    if not isinstance(devices_raw, list) or not all(isinstance(d, str) for d in devices_raw):
        raise _schema(_join(path, "Devices"), "expected an array of device ids")
    for key, value in (("CpuCores", cpu), ("Memory", memory), ("Storage", storage)):
        if value <= 0:
            raise _invariant(_join(path, key), "capacity must be > 0")
    if energy < 0:
        raise _invariant(_join(path, "EnergyClass"), "energy class must be >= 0")
    return EcuNode(ecu_id, cpu, memory, storage, gpu, energy, tuple(devices_raw))


def _parse_switch(switch_id: str, raw: Any, path: str) -> SwitchNode:
    table = _expect_table(raw, path)
    delay = _as_ms(_take(table, "ProcessingDelayUs", path), _join(path, "ProcessingDelayUs"))
    ports_raw = _take(table, "Ports", path, required=False)
    _reject_extras(table, path)

    if delay < 0:
        raise _invariant(_join(path, "ProcessingDelayUs"), "processing delay must be >= 0")
    ports = []
    if ports_raw is not None:
        ports_table = _expect_table(ports_raw, _join(path, "Ports"))
        for port_id in list(ports_table):
            port_path = _join(_join(path, "Ports"), port_id)
            port_table = _expect_table(ports_table.pop(port_id), port_path)
            link_id = _take(port_table, "Link", port_path, required=False)
            if link_id is not None:
                link_id = _as_str(link_id, _join(port_path, "Link"))
            tsn = _as_bool(_take(port_table, "TsnCapable", port_path, required=False, default=True),
                           _join(port_path, "TsnCapable"))
            _reject_extras(port_table, port_path)
            ports.append(SwitchPort(port_id, link_id, tsn))
    return SwitchNode(switch_id, tuple(ports), delay)


def _parse_link(link_id: str, raw: Any, path: str) -> Link:
    table = _expect_table(raw, path)
    a = _as_str(_take(table, "EndpointA", path), _join(path, "EndpointA"))
    b = _as_str(_take(table, "EndpointB", path), _join(path, "EndpointB"))
    rate = _as_int(_take(table, "RateBps", path), _join(path, "RateBps"))
    prop = _as_ms(_take(table, "PropagationDelayUs", path, required=False, default=0.0),
                  _join(path, "PropagationDelayUs"))
    medium_raw = _as_str(_take(table, "Medium", path, required=False, default="ethernet"),
                         _join(path, "Medium"))
    _reject_extras(table, path)

    try:
        medium = Medium(medium_raw.lower())
    except ValueError:
        raise _schema(_join(path, "Medium"), f"unknown medium {medium_raw!r}")
    if rate <= 0:
        raise _invariant(_join(path, "RateBps"), "link rate must be > 0")
    if prop < 0:
        raise _invariant(_join(path, "PropagationDelayUs"), "propagation delay must be >= 0")
    return Link(link_id, a, b, rate, prop, medium)


def _parse_device(dev_id: str, raw: Any, path: str) -> Device:
    table = _expect_table(raw, path)
    kind_raw = _as_str(_take(table, "Kind", path), _join(path, "Kind"))
    bus = _as_str(_take(table, "Bus", path), _join(path, "Bus"))
    _reject_extras(table, path)
    try:
        kind = DeviceKind(kind_raw.lower())
    except ValueError:
        raise _schema(_join(path, "Kind"), f"unknown device kind {kind_raw!r}")
    return Device(dev_id, kind, bus)


def _validate_topology(topo: TopologyDescriptor) -> None:
    ids = ([e.id for e in topo.ecus] + [s.id for s in topo.switches]
           + [l.id for l in topo.links] + [d.id for d in topo.devices])
    seen = set()
    for ident in ids:
        if ident in seen:
            raise _invariant(ident, "identifier is not unique")
        seen.add(ident)

    node_ids = set(topo.node_ids())
    link_ids = {l.id for l in topo.links}
    for link in topo.links:
        for end in (link.endpoint_a, link.endpoint_b):
            if end not in node_ids:
                raise _schema(f"Links.{link.id}", f"endpoint {end!r} names no node")

    device_ids = {d.id for d in topo.devices}
    for dev in topo.devices:
        if dev.bus not in link_ids:
            raise _schema(f"Devices.{dev.id}.Bus", f"bus {dev.bus!r} names no link")
    for ecu in topo.ecus:
        for dev_id in ecu.attached_devices:
            if dev_id not in device_ids:
                raise _schema(f"Ecus.{ecu.id}.Devices", f"device {dev_id!r} is not declared")

    for sw in topo.switches:
        incident = {l.id for l in topo.links_at(sw.id, Medium.ETHERNET)}
        bound = [p.link_id for p in sw.ports if p.link_id is not None]
        for link_id in bound:
            if link_id not in incident:
                raise _schema(f"Switches.{sw.id}.Ports",
                              f"port binds link {link_id!r} not incident to this switch")
        if len(bound) != len(set(bound)):
            raise _schema(f"Switches.{sw.id}.Ports", "two ports bind the same link")
        missing = incident - set(bound)
        if missing:
            raise _schema(f"Switches.{sw.id}.Ports",
                          f"incident links without a port: {sorted(missing)}")

    # Connectivity over ECUs and switches; devices hang off links.
    if node_ids:
        adjacency = {n: [] for n in node_ids}
        for link in topo.links:
            adjacency[link.endpoint_a].append(link.endpoint_b)
            adjacency[link.endpoint_b].append(link.endpoint_a)
        start = sorted(node_ids)[0]
        reached = {start}
        frontier = [start]
        while frontier:
            node = frontier.pop()
            for nxt in adjacency[node]:
                if nxt not in reached:
                    reached.add(nxt)
                    frontier.append(nxt)
        unreachable = sorted(node_ids - reached)
        if unreachable:
            raise DescriptorError(
                "DISCONNECTED",
                f"topology graph is not connected; unreachable: {unreachable}",
            )


def parse_topology_descriptor(text: str) -> TopologyDescriptor:
    """Parse and validate a topology descriptor TOML document."""
    try:
        root = _toml_reader.loads(text)
    except _toml_reader.TOMLDecodeError as exc:
        raise _syntax(str(exc)) from exc

    table = _expect_table(root, "")
    ecus_raw = _take(table, "Ecus", "", required=False, default={})
    switches_raw = _take(table, "Switches", "", required=False, default={})
    links_raw = _take(table, "Links", "", required=False, default={})
    devices_raw = _take(table, "Devices", "", required=False, default={})
    _reject_extras(table, "")

    ecus = [_parse_ecu(i, raw, _join("Ecus", i))
            for i, raw in _expect_table(ecus_raw, "Ecus").items()]
    switches = [_parse_switch(i, raw, _join("Switches", i))
                for i, raw in _expect_table(switches_raw, "Switches").items()]
    links = [_parse_link(i, raw, _join("Links", i))
             for i, raw in _expect_table(links_raw, "Links").items()]
    devices = [_parse_device(i, raw, _join("Devices", i))
               for i, raw in _expect_table(devices_raw, "Devices").items()]

    topo = TopologyDescriptor(tuple(ecus), tuple(switches), tuple(links), tuple(devices))

    # Auto-generate one TSN-capable port per incident Ethernet link for
    # switches that declare none.
    patched = []
    for sw in topo.switches:
        if not sw.ports:
            incident = sorted(l.id for l in topo.links_at(sw.id, Medium.ETHERNET))
            ports = tuple(SwitchPort(f"p-{lid}", lid, True) for lid in incident)
            sw = SwitchNode(sw.id, ports, sw.processing_delay_us)
        patched.append(sw)
    topo = TopologyDescriptor(topo.ecus, tuple(patched), topo.links, topo.devices)

    _validate_topology(topo)
    return topo


# ---------------------------------------------------------------------------
# serialization

def _crit_to_dict(criticality: dict) -> dict:
    inverse = {v: k for k, v in _CRIT_FIELDS.items()}
    out = {}
    for field_name, crit in criticality.items():
        out[inverse[field_name]] = {"Level": crit.level.value, "Slack": crit.slack}
    return out


def service_to_dict(svc: ServiceDescriptor) -> dict:
    flows = {}
    for flow in svc.flows:
        node_specs = {}
        for role, ns in flow.node_specs.items():
            entry = {
                "Image": ns.image,
                "ImageType": ns.image_type,
                "Replicas": ns.replicas,
                "CPU": ns.cpu,
                "Memory": ns.memory,
                "Storage": ns.storage,
                "GPU": ns.gpu,
                "Energy": ns.energy,
                "Offloading": ns.offloading,
            }
            if ns.criticality:
                entry["Criticality"] = _crit_to_dict(ns.criticality)
            node_specs[role] = entry
        time = flow.traffic_spec.time
        time_entry = {}
        if time.max_latency is not None:
            time_entry["MaxLatency"] = time.max_latency
        if time.periodicity is not None:
            time_entry["Periodicity"] = time.periodicity
        time_entry["TransmitOffset"] = time.transmit_offset
        if time.jitter is not None:
            time_entry["Jitter"] = time.jitter
        flows[flow.id] = {
            "NodeSpecs": node_specs,
            "DataSpecs": {
                "DataFormat": flow.data_spec.data_format,
                "DataSize": flow.data_spec.data_size,
            },
            "TrafficSpecs": {
                "Guarantee": flow.traffic_spec.guarantee,
                "Reliability": flow.traffic_spec.reliability,
                "Delivery": flow.traffic_spec.delivery,
                "Wired": flow.traffic_spec.wired,
                "TrafficTimeSpecs": time_entry,
            },
        }
    return {
        "title": svc.title,
        "ServiceMetadata": {
            "Author": svc.metadata.author,
            "Version": svc.metadata.version,
            "Domain": svc.metadata.domain,
        },
        "Flows": flows,
    }


def topology_to_dict(topo: TopologyDescriptor) -> dict:
    ecus = {}
    for e in topo.ecus:
        entry = {
            "CpuCores": e.cpu_cores,
            "Memory": e.memory,
            "Storage": e.storage,
            "Gpu": e.gpu,
            "EnergyClass": e.energy_class,
        }
        if e.attached_devices:
            entry["Devices"] = list(e.attached_devices)
        ecus[e.id] = entry
    switches = {}
    for s in topo.switches:
        ports = {}
        for p in s.ports:
            port = {"TsnCapable": p.tsn_capable}
            if p.link_id is not None:
                port["Link"] = p.link_id
            ports[p.port_id] = port
        switches[s.id] = {"ProcessingDelayUs": s.processing_delay_us, "Ports": ports}
    links = {}
    for l in topo.links:
        links[l.id] = {
            "EndpointA": l.endpoint_a,
            "EndpointB": l.endpoint_b,
            "RateBps": l.rate_bps,
            "PropagationDelayUs": l.propagation_delay_us,
            "Medium": l.medium.value,
        }
    devices = {}
    for d in topo.devices:
        devices[d.id] = {"Kind": d.kind.value, "Bus": d.bus}
    return {"Ecus": ecus, "Switches": switches, "Links": links, "Devices": devices}


def serialize(descriptor) -> str:
    """Serialize a descriptor back to TOML; parse(serialize(d)) == d."""
    if isinstance(descriptor, ServiceDescriptor):
        return _toml_writer.dumps(service_to_dict(descriptor))
    if isinstance(descriptor, TopologyDescriptor):
        return _toml_writer.dumps(topology_to_dict(descriptor))
    raise TypeError(f"cannot serialize {type(descriptor).__name__}")
