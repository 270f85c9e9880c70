"""Envelopes: the protocol-tagged message unit, plus its line-oriented text codec.

Wire form, one ``key=value`` pair per line::

    protocol=CoapLike
    h:app_level_src=app-1
    h:app_level_dst=sensor-a
    body=raw:23.5
    <blank line>

Values percent-escape ``%``, ``=`` and newline. Header order is preserved.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from typing import Iterator, Union

from .errors import ChainIdOverwrite, GatewayError, InvalidValue, MalformedEnvelope
from .model import (
    Aggregation,
    AppRequirements,
    CanonicalRecord,
    DeviceProps,
    InfoModelKind,
    ProtocolKind,
    parse_enum,
)

APP_SRC = "app_level_src"
APP_DST = "app_level_dst"
CHAIN_ID = "chain_id"

APP_PROTOCOL = "app_protocol"
APP_MODEL = "app_info_model"
APP_AGGREGATION = "app_aggregation"
DEV_PROTOCOL = "dev_protocol"
DEV_MODEL = "dev_info_model"


@dataclass(frozen=True)
class RawValues:
    values: tuple[float, ...] = ()

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        if not all(math.isfinite(v) for v in vals):
            raise InvalidValue("raw values must be finite")
        object.__setattr__(self, "values", vals)


@dataclass(frozen=True)
class Records:
    records: tuple[CanonicalRecord, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))


@dataclass(frozen=True)
class EncodedText:
    model: InfoModelKind
    text: str


@dataclass(frozen=True)
class RobotCommand:
    verb: str
    args: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "args", tuple(self.args))
        if not self.verb:
            raise InvalidValue("robot command needs a verb")


Body = Union[RawValues, Records, EncodedText, RobotCommand]


def body_model(body: Body) -> InfoModelKind:
    """Information model a body is expressed in."""
    if isinstance(body, (RawValues, Records)):
        return InfoModelKind.RAW
    if isinstance(body, EncodedText):
        return body.model
    return InfoModelKind.ROBOT


def record_count(body: Body) -> int:
    """Number of measurement-sized units a VNF has to touch to process ``body``."""
    if isinstance(body, RawValues):
        return len(body.values)
    if isinstance(body, Records):
        return len(body.records)
    if isinstance(body, EncodedText):
        from .vnf.functions import decode_records  # local: vnf imports envelope

        try:
            return len(decode_records(body))
        except (GatewayError, ValueError):
            return 1  # not a measurement encoding, e.g. a robot request
    return 1


def _check_key(key: str) -> None:
    if not key or not key.isascii() or "=" in key or "\n" in key:
        raise InvalidValue(f"bad header key {key!r}")


@dataclass(frozen=True)
class Envelope:
    protocol: ProtocolKind
    headers: tuple[tuple[str, str], ...]
    body: Body

    def __post_init__(self):
        object.__setattr__(self, "protocol", ProtocolKind(self.protocol))
        hdrs = tuple((str(k), str(v)) for k, v in self.headers)
        object.__setattr__(self, "headers", hdrs)
        keys = [k for k, _ in hdrs]
        for k in keys:
            _check_key(k)
        if len(set(keys)) != len(keys):
            raise InvalidValue("duplicate header key")
        if APP_SRC not in keys or APP_DST not in keys:
            raise InvalidValue("app_level_src and app_level_dst are mandatory")
        if self.protocol is ProtocolKind.LCP and not isinstance(self.body, RobotCommand):
            raise InvalidValue("LcpLike carries robot commands only")

    @classmethod
    def make(cls, protocol, src: str, dst: str, body: Body, **extra: str) -> Envelope:
        headers = [(APP_SRC, src), (APP_DST, dst)]
        headers.extend((k, str(v)) for k, v in extra.items())
        return cls(protocol, tuple(headers), body)

    def header(self, key: str, default: str | None = None) -> str | None:
        for k, v in self.headers:
            if k == key:
                return v
        return default

    @property
    def src(self) -> str:
        return self.header(APP_SRC)

    @property
    def dst(self) -> str:
        return self.header(APP_DST)

    @property
    def chain_id(self) -> str | None:
        return self.header(CHAIN_ID)

    def with_header(self, key: str, value: str) -> Envelope:
        if key == CHAIN_ID:
            return self.with_chain_id(value)
        return self._set(key, value)

    def _set(self, key: str, value: str) -> Envelope:
        value = str(value)
        if any(k == key for k, _ in self.headers):
            hdrs = tuple((k, value if k == key else v) for k, v in self.headers)
        else:
            hdrs = self.headers + ((key, value),)
        return replace(self, headers=hdrs)

    def without_header(self, key: str) -> Envelope:
        if key in (APP_SRC, APP_DST, CHAIN_ID):
            raise InvalidValue(f"{key} cannot be removed")
        return replace(self, headers=tuple((k, v) for k, v in self.headers if k != key))

    def with_chain_id(self, chain_id: str) -> Envelope:
        """Stamp the chain id; re-stamping the same id is a no-op, a different id raises."""
        existing = self.chain_id
        if existing is not None:
            if existing != chain_id:
                raise ChainIdOverwrite(existing, chain_id)
            return self
        return self._set(CHAIN_ID, chain_id)

    def with_body(self, body: Body) -> Envelope:
        return replace(self, body=body)

    def with_protocol(self, protocol: ProtocolKind) -> Envelope:
        return replace(self, protocol=protocol)

    def with_headers(self, headers) -> Envelope:
        """Replace all headers; a chain id already present must survive unchanged."""
        new = Envelope(self.protocol, tuple(headers), self.body)
        if self.chain_id is not None and new.chain_id != self.chain_id:
            raise ChainIdOverwrite(self.chain_id, str(new.chain_id))
        return new

    def with_requirements(self, app: AppRequirements, dev: DeviceProps) -> Envelope:
        env = self
        for k, v in flatten_requirements(app, dev):
            env = env._set(k, v)
        return env

    @property
    def app_requirements(self) -> AppRequirements | None:
        proto = self.header(APP_PROTOCOL)
        if proto is None:
            return None
        return AppRequirements(
            parse_enum(ProtocolKind, proto),
            parse_enum(InfoModelKind, self.header(APP_MODEL, "")),
            parse_enum(Aggregation, self.header(APP_AGGREGATION, "None")),
        )

    @property
    def device_props(self) -> DeviceProps | None:
        proto = self.header(DEV_PROTOCOL)
        if proto is None:
            return None
        return DeviceProps(
            parse_enum(ProtocolKind, proto),
            parse_enum(InfoModelKind, self.header(DEV_MODEL, "")),
        )


def flatten_requirements(app: AppRequirements | None, dev: DeviceProps | None):
    out = []
    if app is not None:
        out += [
            (APP_PROTOCOL, app.protocol.value),
            (APP_MODEL, app.info_model.value),
            (APP_AGGREGATION, app.aggregation.value),
        ]
    if dev is not None:
        out += [(DEV_PROTOCOL, dev.protocol.value), (DEV_MODEL, dev.info_model.value)]
    return out


# -- text codec ---------------------------------------------------------------

def escape(value: str) -> str:
    return value.replace("%", "%25").replace("=", "%3D").replace("\n", "%0A")


_UNESCAPES = {"%25": "%", "%3D": "=", "%0A": "\n"}


def unescape(value: str, position: int = 0) -> str:
    out = []
    i = 0
    while i < len(value):
        ch = value[i]
        if ch == "%":
            code = value[i:i + 3]
            if code not in _UNESCAPES:
                raise MalformedEnvelope(position, f"bad escape {code!r}")
            out.append(_UNESCAPES[code])
            i += 3
        else:
            out.append(ch)
            i += 1
    return "".join(out)


def _fmt_float(v: float) -> str:
    return repr(float(v))


def _parse_float(text: str, position: int) -> float:
    try:
        v = float(text)
    except ValueError:
        raise MalformedEnvelope(position, f"not a number: {text!r}") from None
    if not math.isfinite(v):
        raise MalformedEnvelope(position, "non-finite number")
    return v


def encode_body(body: Body) -> str:
    if isinstance(body, RawValues):
        return "raw:" + ",".join(_fmt_float(v) for v in body.values)
    if isinstance(body, Records):
        rows = [[r.device_id, r.quantity, r.unit, r.value, r.timestamp] for r in body.records]
        return "records:" + json.dumps(rows, separators=(",", ":"))
    if isinstance(body, EncodedText):
        return f"text:{body.model.value}:{body.text}"
    if isinstance(body, RobotCommand):
        return "robot:" + json.dumps([body.verb, *body.args], separators=(",", ":"))
    raise TypeError(f"not a body: {body!r}")


def decode_body(text: str, position: int = 0) -> Body:
    tag, sep, rest = text.partition(":")
    if not sep:
        raise MalformedEnvelope(position, "body has no type tag")
    try:
        if tag == "raw":
            if rest == "":
                return RawValues(())
            return RawValues(tuple(_parse_float(p, position) for p in rest.split(",")))
        if tag == "records":
            rows = json.loads(rest)
            recs = []
            for row in rows:
                dev, qty, unit, value, ts = row
                if not all(isinstance(x, str) for x in (dev, qty, unit)):
                    raise ValueError("record text fields must be strings")
                if isinstance(value, bool) or not isinstance(value, (int, float)):
                    raise ValueError("record value must be numeric")
                if isinstance(ts, bool) or not isinstance(ts, int):
                    raise ValueError("record timestamp must be an integer")
                recs.append(CanonicalRecord(dev, qty, unit, value, ts))
            return Records(tuple(recs))
        if tag == "text":
            model, sep2, body_text = rest.partition(":")
            if not sep2:
                raise ValueError("encoded text needs a model tag")
            return EncodedText(parse_enum(InfoModelKind, model), body_text)
        if tag == "robot":
            parts = json.loads(rest)
            if not parts or not all(isinstance(p, str) for p in parts):
                raise ValueError("robot command must be a list of strings")
            return RobotCommand(parts[0], tuple(parts[1:]))
    except MalformedEnvelope:
        raise
    except (ValueError, TypeError, InvalidValue) as exc:
        raise MalformedEnvelope(position, f"bad {tag} body: {exc}") from None
    raise MalformedEnvelope(position, f"unknown body tag {tag!r}")


def encode_envelope(env: Envelope) -> str:
    lines = [f"protocol={env.protocol.value}"]
    lines += [f"h:{k}={escape(v)}" for k, v in env.headers]
    lines.append(f"body={escape(encode_body(env.body))}")
    return "\n".join(lines) + "\n\n"


def decode_envelope(text: str) -> Envelope:
    """Parse exactly one envelope block; trailing content after the blank line is an error."""
    envs = list(iter_envelopes(text))
    if len(envs) != 1:
        raise MalformedEnvelope(0, f"expected one envelope, found {len(envs)}")
    return envs[0]


def iter_envelopes(text: str) -> Iterator[Envelope]:
    lines = text.split("\n")
    i = 0
    start = 1
    protocol = None
    headers: list[tuple[str, str]] = []
    body = None
    for i, line in enumerate(lines, start=1):
        if line == "":
            if i == len(lines):
                # final split artefact: only legal right after a terminator
                if protocol is None and body is None and not headers:
                    return
                raise MalformedEnvelope(i, "block not terminated by a blank line")
            if protocol is None and body is None and not headers:
                raise MalformedEnvelope(i, "empty block")
            if protocol is None:
                raise MalformedEnvelope(start, "missing protocol line")
            if body is None:
                raise MalformedEnvelope(start, "missing body line")
            try:
                yield Envelope(protocol, tuple(headers), body)
            except InvalidValue as exc:
                raise MalformedEnvelope(start, str(exc)) from None
            protocol, headers, body = None, [], None
            start = i + 1
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise MalformedEnvelope(i, "expected key=value")
        if body is not None:
            raise MalformedEnvelope(i, "content after body line")
        if key == "protocol":
            if protocol is not None or headers:
                raise MalformedEnvelope(i, "protocol must be the first line")
            try:
                protocol = parse_enum(ProtocolKind, value)
            except InvalidValue:
                raise MalformedEnvelope(i, f"unknown protocol tag {value!r}") from None
        elif key.startswith("h:"):
            if protocol is None:
                raise MalformedEnvelope(i, "header before protocol line")
            name = key[2:]
            if not name or not name.isascii():
                raise MalformedEnvelope(i, f"bad header key {name!r}")
            headers.append((name, unescape(value, i)))
        elif key == "body":
            if protocol is None:
                raise MalformedEnvelope(i, "body before protocol line")
            body = decode_body(unescape(value, i), i)
        else:
            raise MalformedEnvelope(i, f"unknown key {key!r}")
    if protocol is not None or headers or body is not None:
        raise MalformedEnvelope(len(lines), "block not terminated by a blank line")
