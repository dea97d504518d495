"""Interoperability mappings: 5G QoS, CAN-Ethernet gatewaying, data-layer QoS.

The 5QI mapping follows the flow-characteristics truth table (deadline /
jitter / bandwidth constrained -> resource type). The gateway implements the
three CAN-to-Ethernet strategies (periodic snapshot, 1:1 packing, all
packing) over a fixed self-delimiting record format so packing is exactly
invertible.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from enum import Enum
from typing import Optional

from .descriptors import FlowSpec, TrafficSpec, TrafficTimeSpec
from .errors import GatewayError
from .tsn_config import TrafficClass, classify

ETHERNET_MTU = 1500
# Classic CAN data frame: 44 framing bits + 8 bits per payload byte;
# dlc 8 gives the 108-bit maximum.
CAN_FRAME_OVERHEAD_BITS = 44
CAN_MAX_FRAME_BITS = 108

# Record layout: can_id u32 BE, dlc u8, payload dlc bytes, capture_time u64 BE (us).
_HEADER = struct.Struct(">IB")
_TIMESTAMP = struct.Struct(">Q")
RECORD_OVERHEAD = _HEADER.size + _TIMESTAMP.size  # 13 bytes + dlc


class ResourceType(Enum):
    GBR = "GBR"
    DC_GBR = "DC-GBR"
    NON_GBR = "non-GBR"


@dataclass(frozen=True)
class FlowConstraintVector:
    deadline: bool
    jitter: bool
    bandwidth: bool


@dataclass(frozen=True)
class FiveQiProfile:
    resource_type: ResourceType
    priority_level: int
    delay_budget_ms: Optional[float]  # None = unbounded (non-GBR sentinel)
    per_target: float  # packet error rate target


class QosReliability(Enum):
    RELIABLE = "RELIABLE"
    BEST_EFFORT = "BEST_EFFORT"


@dataclass(frozen=True)
class DataLayerQosProfile:
    flow_id: str
    reliability: QosReliability
    deadline_ms: Optional[float]
    latency_budget_ms: Optional[float]
    history_depth: int


def constraint_vector(flow: FlowSpec, domain: str = "") -> FlowConstraintVector:
    """Deadline/jitter/bandwidth constraint flags for a flow."""
    time = flow.traffic_spec.time
    bandwidth = (classify(flow, domain) is TrafficClass.STREAM
                 or flow.traffic_spec.guarantee == 1)
    return FlowConstraintVector(
        deadline=time.max_latency is not None,
        jitter=time.jitter is not None,
        bandwidth=bandwidth,
    )


def map_to_5qi(v: FlowConstraintVector, time: TrafficTimeSpec,
               traffic: TrafficSpec) -> FiveQiProfile:
    """Resource type per the 8-row truth table; budget and PER from the specs.

    Unconstrained flows (no deadline, no jitter) are non-GBR regardless of
    bandwidth; otherwise bandwidth-constrained flows are DC-GBR and the rest
    GBR.
    """
    if not v.deadline and not v.jitter:
        resource = ResourceType.NON_GBR
    elif v.bandwidth:
        resource = ResourceType.DC_GBR
    else:
        resource = ResourceType.GBR
    per = 1e-5 if traffic.delivery else 1e-2
    return FiveQiProfile(
        resource_type=resource,
        priority_level=10 - 2 * traffic.guarantee,
        delay_budget_ms=time.max_latency,
        per_target=per,
    )


def derive_data_layer_qos(flow: FlowSpec) -> DataLayerQosProfile:
    """Abstract pub/sub QoS profile of a flow for the data layer."""
    time = flow.traffic_spec.time
    periodic = time.periodicity is not None
    return DataLayerQosProfile(
        flow_id=flow.id,
        reliability=(QosReliability.RELIABLE if flow.traffic_spec.delivery
                     else QosReliability.BEST_EFFORT),
        deadline_ms=time.periodicity,
        latency_budget_ms=time.max_latency,
        history_depth=1 if periodic else 16,
    )


# ---------------------------------------------------------------------------
# CAN gateway

@dataclass(frozen=True)
class GatewayFrame:
    can_id: int  # 29-bit identifier
    dlc: int  # 0..8
    payload: bytes
    capture_time_us: int

    def __post_init__(self):
        if not 0 <= self.can_id < (1 << 29):
            raise ValueError(f"can_id {self.can_id} outside 29-bit range")
        if not 0 <= self.dlc <= 8:
            raise ValueError(f"dlc {self.dlc} outside 0..8")
        if len(self.payload) != self.dlc:
            raise ValueError("payload length must equal dlc")
        if self.capture_time_us < 0:
            raise ValueError("capture time must be >= 0")

    def can_wire_bits(self) -> int:
        return CAN_FRAME_OVERHEAD_BITS + 8 * self.dlc

    def record_size(self) -> int:
        return RECORD_OVERHEAD + self.dlc


def pack_record(frame: GatewayFrame) -> bytes:
    return (_HEADER.pack(frame.can_id, frame.dlc) + frame.payload
            + _TIMESTAMP.pack(frame.capture_time_us))


def pack_one_to_one(frame: GatewayFrame) -> bytes:
    """1:1 packing: exactly one record per Ethernet payload."""
    return pack_record(frame)


def pack_periodic_snapshot(frames, period_ms: float,
                           max_payload: int = ETHERNET_MTU) -> list:
    """Periodic snapshot: per period window, all captured frames serialized
    into one or more payloads; empty windows emit nothing."""
    if period_ms <= 0:
        raise ValueError("snapshot period must be > 0")
    period_us = int(round(period_ms * 1000))
    windows = {}
    for frame in frames:
        windows.setdefault(frame.capture_time_us // period_us, []).append(frame)
    payloads = []
    for window in sorted(windows):
        payloads.extend(pack_all(windows[window], max_payload=max_payload))
    return payloads


def pack_all(frames, max_payload: int = ETHERNET_MTU,
             flush_count: Optional[int] = None,
             flush_timeout_us: Optional[int] = None) -> list:
    """All-packing: append records until the next would exceed max_payload or
    a flush trigger (record count / capture-time window) fires."""
    if max_payload < RECORD_OVERHEAD + 8:
        raise ValueError(f"max_payload must be >= {RECORD_OVERHEAD + 8}")
    payloads = []
    buffer = bytearray()
    count = 0
    window_start = None
    for frame in frames:
        record = pack_record(frame)
        timed_out = (flush_timeout_us is not None and window_start is not None
                     and frame.capture_time_us - window_start >= flush_timeout_us)
        if buffer and (len(buffer) + len(record) > max_payload or timed_out):
            payloads.append(bytes(buffer))
            buffer = bytearray()
            count = 0
            window_start = None
        if window_start is None:
            window_start = frame.capture_time_us
        buffer += record
        count += 1
        if flush_count is not None and count >= flush_count:
            payloads.append(bytes(buffer))
            buffer = bytearray()
            count = 0
            window_start = None
    if buffer:
        payloads.append(bytes(buffer))
    return payloads


def unpack(payload: bytes) -> list:
    """Inverse of every packing strategy; exact frames, order preserved."""
    frames = []
    offset = 0
    size = len(payload)
    while offset < size:
        if size - offset < _HEADER.size:
            raise GatewayError("MALFORMED_RECORD",
                               f"truncated record header at offset {offset}")
        can_id, dlc = _HEADER.unpack_from(payload, offset)
        if dlc > 8:
            raise GatewayError("MALFORMED_RECORD",
                               f"dlc {dlc} > 8 at offset {offset}")
        if can_id >= (1 << 29):
            raise GatewayError("MALFORMED_RECORD",
                               f"can_id outside 29-bit range at offset {offset}")
        body = offset + _HEADER.size
        if size - body < dlc + _TIMESTAMP.size:
            raise GatewayError("MALFORMED_RECORD",
                               f"truncated record body at offset {offset}")
        data = payload[body:body + dlc]
        (capture,) = _TIMESTAMP.unpack_from(payload, body + dlc)
        frames.append(GatewayFrame(can_id, dlc, data, capture))
        offset = body + dlc + _TIMESTAMP.size
    return frames
