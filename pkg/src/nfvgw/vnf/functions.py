"""Gateway function bodies: aggregation, model conversion, protocol conversion, balancing.

Everything here is pure. Model conversions go through ``CanonicalRecord`` as the hub,
so each encoding only needs a to/from pair.
"""

from __future__ import annotations

import json
import math
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from enum import Enum
from typing import Sequence
from urllib.parse import parse_qsl, quote, unquote, urlsplit

from ..envelope import (
    Body,
    EncodedText,
    Envelope,
    RawValues,
    Records,
    RobotCommand,
    body_model,
)
from ..errors import EmptyGroup, InfeasibleConversion, InvalidValue
from ..model import CanonicalRecord, InfoModelKind, ProtocolKind, VnfFamily, VnfKind

# Headers that carry raw-measurement metadata alongside a RawValues body.
META_DEVICE = "device_id"
META_QUANTITY = "quantity"
META_UNIT = "unit"
META_T0 = "t0"

ROBOT_VERBS = ("move", "grab")


# -- feasibility ------------------------------------------------------------------

@dataclass(frozen=True)
class ConversionPair:
    source: Enum
    target: Enum
    invertible: bool = True


class FeasibilityTable:
    """Static table of which IMC/PC variants exist and what each one converts."""

    def __init__(self, pairs: dict[VnfKind, ConversionPair] | None = None):
        self._pairs: dict[VnfKind, ConversionPair] = {}
        for kind, pair in (pairs or {}).items():
            self.declare(kind, pair)

    def declare(self, kind: VnfKind, pair: ConversionPair) -> None:
        if kind.family is VnfFamily.IMC:
            enum_cls = InfoModelKind
        elif kind.family is VnfFamily.PC:
            enum_cls = ProtocolKind
        else:
            raise InvalidValue(f"{kind} is not a conversion function")
        if not (isinstance(pair.source, enum_cls) and isinstance(pair.target, enum_cls)):
            raise InvalidValue(f"{kind} must convert between {enum_cls.__name__} values")
        if pair.source == pair.target:
            raise InvalidValue(f"{kind} converts {pair.source} to itself")
        self._pairs[kind] = pair

    def pair(self, kind: VnfKind) -> ConversionPair | None:
        return self._pairs.get(kind)

    def kinds(self) -> list[VnfKind]:
        return sorted(self._pairs)

    def variant_for(self, family: VnfFamily, source, target) -> VnfKind | None:
        """The variant converting ``source`` to ``target``, forward pairs first."""
        for kind in self.kinds():
            p = self._pairs[kind]
            if kind.family is family and (p.source, p.target) == (source, target):
                return kind
        for kind in self.kinds():
            p = self._pairs[kind]
            if kind.family is family and p.invertible and (p.target, p.source) == (source, target):
                return kind
        return None

    def allows(self, source, target) -> bool:
        family = VnfFamily.IMC if isinstance(source, InfoModelKind) else VnfFamily.PC
        return self.variant_for(family, source, target) is not None

    def items(self):
        return sorted(self._pairs.items())


def default_feasibility() -> FeasibilityTable:
    M, P = InfoModelKind, ProtocolKind
    return FeasibilityTable({
        VnfKind.parse("IMC1"): ConversionPair(M.RAW, M.SENML),
        VnfKind.parse("IMC2"): ConversionPair(M.RAW, M.SENSORML),
        VnfKind.parse("IMC3"): ConversionPair(M.SENML, M.ROBOT, invertible=False),
        VnfKind.parse("PC1"): ConversionPair(P.COAP, P.HTTP),
        VnfKind.parse("PC2"): ConversionPair(P.HTTP, P.LCP),
    })


# -- data aggregator -----------------------------------------------------------------

class DaMode(str, Enum):
    THRESHOLD = "Threshold"
    AVERAGE = "Average"


@dataclass(frozen=True)
class DaConfig:
    mode: DaMode
    threshold: float = 0.0
    window: int = 1

    def __post_init__(self):
        object.__setattr__(self, "mode", DaMode(self.mode))
        if self.window < 1:
            raise InvalidValue("window must be >= 1")
        if not math.isfinite(self.threshold):
            raise InvalidValue("threshold must be finite")


def da_process(records: Sequence[CanonicalRecord], cfg: DaConfig) -> list[CanonicalRecord]:
    if cfg.mode is DaMode.THRESHOLD:
        return [r for r in records if r.value > cfg.threshold]
    out = []
    for start in range(0, len(records), cfg.window):
        window = records[start:start + cfg.window]
        last = window[-1]
        mean = math.fsum(r.value for r in window) / len(window)
        out.append(CanonicalRecord(last.device_id, last.quantity, last.unit, mean, last.timestamp))
    return out


# -- information model encodings ----------------------------------------------------------

@dataclass(frozen=True)
class RecordMeta:
    """What a RawValues body does not carry itself."""

    device_id: str
    quantity: str = "value"
    unit: str = ""
    t0: int = 0

    @classmethod
    def from_envelope(cls, env: Envelope) -> RecordMeta:
        return cls(
            env.header(META_DEVICE) or env.src,
            env.header(META_QUANTITY, "value"),
            env.header(META_UNIT, ""),
            int(env.header(META_T0, "0")),
        )


def encode_senml(records: Sequence[CanonicalRecord]) -> str:
    pack = [
        {"bn": r.device_id, "n": r.quantity, "u": r.unit, "v": r.value, "t": r.timestamp}
        for r in records
    ]
    return json.dumps(pack, separators=(",", ":"))


def decode_senml(text: str) -> list[CanonicalRecord]:
    try:
        pack = json.loads(text)
        if not isinstance(pack, list):
            raise ValueError("SenML pack must be a list")
        return [
            CanonicalRecord(e["bn"], e["n"], e["u"], _number(e["v"]), _integer(e["t"]))
            for e in pack
        ]
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidValue(f"bad SenML-like text: {exc}") from None


def _number(v) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ValueError("v must be numeric")
    return float(v)


def _integer(v) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise ValueError("t must be an integer")
    return v


# XML 1.0 cannot carry most control characters, so text attributes are percent-encoded;
# printable ASCII other than "%" stays readable.
_XML_SAFE = "".join(chr(c) for c in range(0x20, 0x7F) if chr(c) != "%")


def _attr(text: str) -> str:
    return quote(text, safe=_XML_SAFE)


def encode_sensorml(records: Sequence[CanonicalRecord]) -> str:
    root = ET.Element("sml")
    for r in records:
        ET.SubElement(root, "obs", {
            "bn": _attr(r.device_id), "n": _attr(r.quantity), "u": _attr(r.unit),
            "v": repr(r.value), "t": str(r.timestamp),
        })
    return ET.tostring(root, encoding="unicode")


def decode_sensorml(text: str) -> list[CanonicalRecord]:
    try:
        root = ET.fromstring(text)
        if root.tag != "sml":
            raise ValueError("root element must be sml")
        return [
            CanonicalRecord(unquote(o.attrib["bn"], errors="strict"),
                            unquote(o.attrib["n"], errors="strict"),
                            unquote(o.attrib["u"], errors="strict"),
                            float(o.attrib["v"]), int(o.attrib["t"]))
            for o in root.iter("obs")
        ]
    except (ET.ParseError, KeyError, ValueError) as exc:
        raise InvalidValue(f"bad SensorML-like text: {exc}") from None


def decode_records(body: EncodedText) -> list[CanonicalRecord]:
    if body.model is InfoModelKind.SENML:
        return decode_senml(body.text)
    if body.model is InfoModelKind.SENSORML:
        return decode_sensorml(body.text)
    raise InvalidValue(f"{body.model} text does not hold measurements")


def to_records(body: Body, meta: RecordMeta | None = None) -> list[CanonicalRecord]:
    if isinstance(body, Records):
        return list(body.records)
    if isinstance(body, RawValues):
        if meta is None:
            raise InvalidValue("raw values need device metadata to become records")
        return [
            CanonicalRecord(meta.device_id, meta.quantity, meta.unit, v, meta.t0 + i)
            for i, v in enumerate(body.values)
        ]
    if isinstance(body, EncodedText):
        return decode_records(body)
    raise InvalidValue("robot commands are not measurements")


def from_records(records: Sequence[CanonicalRecord], model: InfoModelKind) -> Body:
    if model is InfoModelKind.RAW:
        return Records(tuple(records))
    if model is InfoModelKind.SENML:
        return EncodedText(model, encode_senml(records))
    if model is InfoModelKind.SENSORML:
        return EncodedText(model, encode_sensorml(records))
    raise InvalidValue("records cannot be expressed as robot commands")


def parse_robot_request(text: str) -> RobotCommand:
    """``/robots/lego-1/grab?object=ball`` -> RobotCommand("grab", ("object=ball",))."""
    parts = urlsplit(text.strip())
    segments = [s for s in parts.path.split("/") if s]
    if not segments:
        raise InvalidValue(f"robot request {text!r} has no resource path")
    verb = segments[-1]
    if verb not in ROBOT_VERBS:
        raise InvalidValue(f"unsupported robot verb {verb!r}")
    args = tuple(f"{k}={v}" for k, v in parse_qsl(parts.query, keep_blank_values=True))
    return RobotCommand(verb, args)


def format_robot_request(cmd: RobotCommand) -> str:
    query = "&".join(quote(a, safe="=") for a in cmd.args)
    return f"/{cmd.verb}" + (f"?{query}" if query else "")


def imc_convert(body: Body, target: InfoModelKind, meta: RecordMeta | None = None,
                table: FeasibilityTable | None = None) -> Body:
    table = table or default_feasibility()
    source = body_model(body)
    if source == target:
        return body
    if not table.allows(source, target):
        raise InfeasibleConversion(source, target)
    if target is InfoModelKind.ROBOT:
        if not isinstance(body, EncodedText):
            raise InfeasibleConversion(source, target)
        return parse_robot_request(body.text)
    if source is InfoModelKind.ROBOT:
        return EncodedText(target, format_robot_request(body))
    return from_records(to_records(body, meta), target)


# -- protocol conversion -----------------------------------------------------------------

# concept -> protocol -> (header key, {canonical value: protocol value})
HEADER_MAP: dict[str, dict[ProtocolKind, tuple[str, dict[str, str]]]] = {
    "method": {
        ProtocolKind.HTTP: ("method", {"GET": "GET", "POST": "POST", "PUT": "PUT", "DELETE": "DELETE"}),
        ProtocolKind.COAP: ("code", {"GET": "0.01", "POST": "0.02", "PUT": "0.03", "DELETE": "0.04"}),
        ProtocolKind.LCP: ("lcp_telegram", {"GET": "0x00", "POST": "0x80"}),
    },
    "content": {
        ProtocolKind.HTTP: ("content-type", {
            "text/plain": "text/plain",
            "application/json": "application/json",
            "application/xml": "application/xml",
            "application/senml+json": "application/senml+json",
            "application/x-robot-command": "application/x-robot-command",
        }),
        ProtocolKind.COAP: ("content-format", {
            "text/plain": "0",
            "application/json": "50",
            "application/xml": "41",
            "application/senml+json": "110",
        }),
        ProtocolKind.LCP: ("lcp_payload", {"application/x-robot-command": "direct"}),
    },
}

PROTOCOL_HEADER_KEYS = {
    proto: {spec[proto][0] for spec in HEADER_MAP.values()} for proto in ProtocolKind
}


def pc_convert(env: Envelope, target: ProtocolKind,
               table: FeasibilityTable | None = None) -> Envelope:
    table = table or default_feasibility()
    source = env.protocol
    if source == target:
        return env
    if not table.allows(source, target):
        raise InfeasibleConversion(source, target)
    if target is ProtocolKind.LCP and not isinstance(env.body, RobotCommand):
        raise InfeasibleConversion(source, target)
    foreign = set().union(*(PROTOCOL_HEADER_KEYS[p] for p in ProtocolKind if p != source))
    foreign -= PROTOCOL_HEADER_KEYS[source]
    headers = []
    for key, value in env.headers:
        if key in foreign:
            raise InvalidValue(f"{source} envelope carries foreign header {key!r}")
        for spec in HEADER_MAP.values():
            src_key, src_values = spec[source]
            if key != src_key:
                continue
            canonical = {v: c for c, v in src_values.items()}.get(value)
            dst_key, dst_values = spec[target]
            if canonical is None or canonical not in dst_values:
                raise InfeasibleConversion(f"{source}:{key}={value}", target)
            key, value = dst_key, dst_values[canonical]
            break
        headers.append((key, value))
    return Envelope(target, tuple(headers), env.body)


# -- load balancer ---------------------------------------------------------------------------

def lb_select(group: Sequence, seq: int) -> str:
    """Round-robin pick; ``group`` holds VnfInstance objects of one kind."""
    if not group:
        raise EmptyGroup("load balancer group is empty")
    kinds = {g.kind for g in group}
    if len(kinds) > 1:
        raise InvalidValue(f"mixed kinds in balanced group: {sorted(map(str, kinds))}")
    return group[seq % len(group)].instance_id
