"""Shared domain vocabulary: protocols, information models, devices, chains."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from enum import Enum

from .errors import InvalidValue


class ProtocolKind(str, Enum):
    HTTP = "HttpLike"
    COAP = "CoapLike"
    LCP = "LcpLike"

    def __str__(self) -> str:
        return self.value


class InfoModelKind(str, Enum):
    RAW = "Raw"
    SENML = "SenmlLike"
    SENSORML = "SensormlLike"
    ROBOT = "RobotCmd"

    def __str__(self) -> str:
        return self.value


class Aggregation(str, Enum):
    NONE = "None"
    AVERAGE = "AverageData"
    THRESHOLD = "ThresholdData"

    def __str__(self) -> str:
        return self.value


class DeviceClass(str, Enum):
    A = "A"  # constrained, delegates to a type-B proxy
    B = "B"  # capable, may host VNFs and proxy type-A devices

    def __str__(self) -> str:
        return self.value


def parse_enum(enum_cls, text: str):
    """Look up an enum member by value; anything outside the closed set raises."""
    try:
        return enum_cls(text)
    except ValueError:
        raise InvalidValue(f"{text!r} is not a {enum_cls.__name__}") from None


@dataclass(frozen=True)
class CanonicalRecord:
    device_id: str
    quantity: str
    unit: str
    value: float
    timestamp: int

    def __post_init__(self):
        if not self.device_id:
            raise InvalidValue("device_id must be non-empty")
        object.__setattr__(self, "value", float(self.value))
        if not math.isfinite(self.value):
            raise InvalidValue("record value must be finite")
        object.__setattr__(self, "timestamp", int(self.timestamp))


@dataclass(frozen=True)
class AppRequirements:
    protocol: ProtocolKind
    info_model: InfoModelKind
    aggregation: Aggregation = Aggregation.NONE

    def __post_init__(self):
        if self.info_model is InfoModelKind.RAW:
            raise InvalidValue("applications consume structured models, not Raw")


@dataclass(frozen=True)
class DeviceProps:
    protocol: ProtocolKind
    info_model: InfoModelKind


@dataclass(frozen=True)
class Capabilities:
    energy_pct: float = 100.0
    location: tuple[float, float] = (0.0, 0.0)
    response_time: int = 0
    host_capacity: int = 0


@dataclass(frozen=True)
class DeviceDescriptor:
    id: str
    device_class: DeviceClass
    props: DeviceProps
    capabilities: Capabilities = field(default_factory=Capabilities)
    proxy: str | None = None


def validate_descriptor(d: DeviceDescriptor) -> list[str]:
    """Return every invariant violation of ``d``; an empty list means valid."""
    problems = []
    if not d.id:
        problems.append("id must be non-empty")
    caps = d.capabilities
    if not 0 <= caps.energy_pct <= 100:
        problems.append("energy_pct must be within 0-100")
    if caps.host_capacity < 0:
        problems.append("host_capacity must be non-negative")
    if caps.response_time < 0:
        problems.append("response_time must be non-negative")
    if d.device_class is DeviceClass.A:
        if caps.host_capacity != 0:
            problems.append("A must have capacity 0")
        if not d.proxy:
            problems.append("A must have a proxy")
    elif d.proxy is not None:
        problems.append("B must not have proxy")
    return problems


class VnfFamily(str, Enum):
    DA = "DA"
    IMC = "IMC"
    PC = "PC"
    LB = "LB"

    def __str__(self) -> str:
        return self.value


_KIND_RE = re.compile(r"^(DA|IMC|PC|LB)([1-9][0-9]*)$")


@dataclass(frozen=True, order=True)
class VnfKind:
    """A gateway function family plus variant index, written e.g. ``IMC2``."""

    family: VnfFamily
    variant: int = 1

    def __post_init__(self):
        object.__setattr__(self, "family", VnfFamily(self.family))
        if self.variant < 1:
            raise InvalidValue("variant index starts at 1")

    @classmethod
    def parse(cls, text: str) -> VnfKind:
        m = _KIND_RE.match(text.strip())
        if not m:
            raise InvalidValue(f"{text!r} is not a VNF kind label")
        return cls(VnfFamily(m.group(1)), int(m.group(2)))

    def __str__(self) -> str:
        return f"{self.family.value}{self.variant}"


@dataclass(frozen=True)
class ChainSpec:
    chain_id: str
    functions: tuple[VnfKind, ...]

    def __post_init__(self):
        object.__setattr__(self, "functions", tuple(self.functions))
        if not self.chain_id:
            raise InvalidValue("chain_id must be non-empty")
        # Empty chains are representable (nothing to convert); plan creation rejects them.
        if len(set(self.functions)) != len(self.functions):
            raise InvalidValue("duplicate function in chain")

    def reordered(self, order) -> ChainSpec:
        order = tuple(order)
        if sorted(order) != sorted(self.functions):
            raise InvalidValue(f"order {order} is not a permutation of {self.functions}")
        return ChainSpec(self.chain_id, order)

    def __str__(self) -> str:
        return f"{self.chain_id}:[{', '.join(map(str, self.functions))}]"
