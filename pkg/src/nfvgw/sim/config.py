"""Scenario files: sectioned ``key=value`` lines, values escaped like envelope values.

    [costs]            seed, hop_delay, proc_cost, c_join, retry_after
    [topology]         switches, links, classifier, fixed_node, app_host,
                       <switch>.host, attach.<node>, placement, pin.<kind>
    [devices]          <id>.class / .protocol / .model / .capacity / .proxy / ...
    [store]            packages
    [feasibility]      <kind>=<source>><target>[;oneway]   (absent: built-in table)
    [apps]             <app>.protocol / .model / .aggregation / .devices / ...
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

from ..envelope import unescape
from ..errors import GatewayError, ScenarioError
from ..model import (
    Aggregation,
    AppRequirements,
    Capabilities,
    DeviceClass,
    DeviceDescriptor,
    DeviceProps,
    InfoModelKind,
    ProtocolKind,
    VnfFamily,
    VnfKind,
    parse_enum,
    validate_descriptor,
)
from ..vnf import ConversionPair, FeasibilityTable, default_feasibility

BUILTIN = ("earthquake", "fire", "upgrade")


@dataclass(frozen=True)
class DeviceData:
    quantity: str = "value"
    unit: str = ""
    readings: tuple[float, ...] = ()


@dataclass(frozen=True)
class AppConfig:
    app_id: str
    requirements: AppRequirements
    devices: tuple[str, ...]
    threshold: float = 0.0
    window: int = 1
    replicas: int = 1
    order: tuple[VnfKind, ...] | None = None
    command: str | None = None   # request path sent towards an actuator


@dataclass(frozen=True)
class ScenarioConfig:
    name: str = "scenario"
    seed: int = 0
    hop_delay: int = 10
    proc_cost: int = 5
    c_join: int = 50
    retry_after: int = 100
    switches: tuple[str, ...] = ()
    links: tuple[tuple[str, str], ...] = ()
    classifier: str | None = None
    fixed_node: str = "fixed-node"
    app_host: str = "app-host"
    switch_hosts: tuple[tuple[str, str], ...] = ()
    attachments: tuple[tuple[str, str], ...] = ()
    devices: tuple[DeviceDescriptor, ...] = ()
    device_data: tuple[tuple[str, DeviceData], ...] = ()
    store: tuple[VnfKind, ...] = ()
    feasibility: FeasibilityTable = field(default_factory=default_feasibility, compare=False)
    apps: tuple[AppConfig, ...] = ()
    placement: str = "random"
    pins: tuple[tuple[str, tuple[str, ...]], ...] = ()
    scale_k: int | None = None

    def __post_init__(self):
        for name in ("hop_delay", "proc_cost", "c_join", "retry_after"):
            if getattr(self, name) < 0:
                raise ScenarioError(f"{name} must be >= 0")
        if self.scale_k is not None and self.scale_k < 1:
            raise ScenarioError("k must be >= 1")
        if self.placement not in ("random", "pinned"):
            raise ScenarioError(f"unknown placement strategy {self.placement!r}")
        for d in self.devices:
            problems = validate_descriptor(d)
            if problems:
                raise ScenarioError(f"device {d.id}: {'; '.join(problems)}")

    def with_costs(self, **costs) -> ScenarioConfig:
        return replace(self, **costs)

    def data_for(self, device_id: str) -> DeviceData:
        return dict(self.device_data).get(device_id, DeviceData())

    def app(self, app_id: str) -> AppConfig:
        for a in self.apps:
            if a.app_id == app_id:
                return a
        raise ScenarioError(f"no app {app_id!r}")


# -- parsing ------------------------------------------------------------------------------------

def parse_sections(text: str) -> dict[str, list[tuple[int, str, str]]]:
    sections: dict[str, list[tuple[int, str, str]]] = {}
    current = None
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip()
            if current in sections:
                raise ScenarioError(f"line {n}: section [{current}] repeated")
            sections[current] = []
            continue
        if current is None:
            raise ScenarioError(f"line {n}: key outside any section")
        key, sep, value = line.partition("=")
        if not sep:
            raise ScenarioError(f"line {n}: expected key=value")
        try:
            sections[current].append((n, key.strip(), unescape(value.strip(), n)))
        except GatewayError as exc:
            raise ScenarioError(f"line {n}: {exc}") from None
    return sections


def _csv(value: str) -> tuple[str, ...]:
    return tuple(v.strip() for v in value.split(",") if v.strip())


def _int(n: int, value: str) -> int:
    try:
        return int(value)
    except ValueError:
        raise ScenarioError(f"line {n}: {value!r} is not an integer") from None


def _float(n: int, value: str) -> float:
    try:
        return float(value)
    except ValueError:
        raise ScenarioError(f"line {n}: {value!r} is not a number") from None


def _grouped(entries) -> dict[str, dict[str, tuple[int, str]]]:
    """``id.field=value`` lines grouped by id, in first-appearance order."""
    out: dict[str, dict[str, tuple[int, str]]] = {}
    for n, key, value in entries:
        ident, dot, fld = key.rpartition(".")
        if not dot or not ident:
            raise ScenarioError(f"line {n}: expected <id>.<field>")
        out.setdefault(ident, {})[fld] = (n, value)
    return out


def _enum(enum_cls, n: int, value: str):
    try:
        return parse_enum(enum_cls, value)
    except GatewayError as exc:
        raise ScenarioError(f"line {n}: {exc}") from None


def _kind(n: int, value: str) -> VnfKind:
    try:
        return VnfKind.parse(value)
    except GatewayError as exc:
        raise ScenarioError(f"line {n}: {exc}") from None


def parse_scenario(text: str, name: str = "scenario") -> ScenarioConfig:
    sec = parse_sections(text)
    unknown = set(sec) - {"costs", "topology", "devices", "store", "feasibility", "apps"}
    if unknown:
        raise ScenarioError(f"unknown sections: {sorted(unknown)}")
    kw: dict = {"name": name}

    for n, key, value in sec.get("costs", []):
        if key not in ("seed", "hop_delay", "proc_cost", "c_join", "retry_after", "k"):
            raise ScenarioError(f"line {n}: unknown cost {key!r}")
        kw["scale_k" if key == "k" else key] = _int(n, value)

    hosts, attach, pins = [], [], []
    for n, key, value in sec.get("topology", []):
        if key == "switches":
            kw["switches"] = _csv(value)
        elif key == "links":
            links = []
            for pair in _csv(value):
                a, dash, b = pair.partition("-")
                if not dash:
                    raise ScenarioError(f"line {n}: link {pair!r} must be A-B")
                links.append((a, b))
            kw["links"] = tuple(links)
        elif key in ("classifier", "fixed_node", "app_host", "placement"):
            kw[key] = value
        elif key.endswith(".host"):
            hosts.append((key[:-5], value))
        elif key.startswith("attach."):
            attach.append((key[7:], value))
        elif key.startswith("pin."):
            pins.append((key[4:], _csv(value)))
        else:
            raise ScenarioError(f"line {n}: unknown topology key {key!r}")
    kw["switch_hosts"] = tuple(hosts)
    kw["attachments"] = tuple(attach)
    kw["pins"] = tuple(pins)

    devices, data = [], []
    for ident, f in _grouped(sec.get("devices", [])).items():
        get = lambda k, d=None: f[k][1] if k in f else d  # noqa: E731
        line = lambda k: f[k][0] if k in f else 0  # noqa: E731
        for required in ("class", "protocol", "model"):
            if required not in f:
                raise ScenarioError(f"device {ident}: missing .{required}")
        loc = _csv(get("location", "0,0"))
        caps = Capabilities(
            energy_pct=_float(line("energy"), get("energy", "100")),
            location=(_float(line("location"), loc[0]), _float(line("location"), loc[1])),
            response_time=_int(line("response_time"), get("response_time", "0")),
            host_capacity=_int(line("capacity"), get("capacity", "0")),
        )
        devices.append(DeviceDescriptor(
            ident, _enum(DeviceClass, line("class"), get("class")),
            DeviceProps(_enum(ProtocolKind, line("protocol"), get("protocol")),
                        _enum(InfoModelKind, line("model"), get("model"))),
            caps, get("proxy")))
        readings = tuple(_float(line("readings"), v) for v in _csv(get("readings", "")))
        data.append((ident, DeviceData(get("quantity", "value"), get("unit", ""), readings)))
    kw["devices"] = tuple(devices)
    kw["device_data"] = tuple(data)

    for n, key, value in sec.get("store", []):
        if key != "packages":
            raise ScenarioError(f"line {n}: unknown store key {key!r}")
        kw["store"] = tuple(_kind(n, v) for v in _csv(value))

    if "feasibility" in sec:
        table = FeasibilityTable()
        for n, key, value in sec["feasibility"]:
            kind = _kind(n, key)
            spec, _, flag = value.partition(";")
            src, arrow, dst = spec.partition(">")
            if not arrow:
                raise ScenarioError(f"line {n}: expected <source>><target>")
            enum_cls = InfoModelKind if kind.family is VnfFamily.IMC else ProtocolKind
            pair = ConversionPair(_enum(enum_cls, n, src.strip()), _enum(enum_cls, n, dst.strip()),
                                  invertible=flag.strip() != "oneway")
            try:
                table.declare(kind, pair)
            except GatewayError as exc:
                raise ScenarioError(f"line {n}: {exc}") from None
        kw["feasibility"] = table

    apps = []
    for ident, f in _grouped(sec.get("apps", [])).items():
        get = lambda k, d=None: f[k][1] if k in f else d  # noqa: E731
        line = lambda k: f[k][0] if k in f else 0  # noqa: E731
        for required in ("protocol", "model", "devices"):
            if required not in f:
                raise ScenarioError(f"app {ident}: missing .{required}")
        try:
            reqs = AppRequirements(_enum(ProtocolKind, line("protocol"), get("protocol")),
                                   _enum(InfoModelKind, line("model"), get("model")),
                                   _enum(Aggregation, line("aggregation"), get("aggregation", "None")))
        except GatewayError as exc:
            raise ScenarioError(f"app {ident}: {exc}") from None
        order = None
        if "order" in f:
            order = tuple(_kind(line("order"), v) for v in _csv(get("order")))
        apps.append(AppConfig(
            ident, reqs, _csv(get("devices")),
            _float(line("threshold"), get("threshold", "0")),
            _int(line("window"), get("window", "1")),
            _int(line("replicas"), get("replicas", "1")),
            order, get("command")))
    kw["apps"] = tuple(apps)
    return ScenarioConfig(**kw)


def load_scenario(path_or_name: str | Path) -> ScenarioConfig:
    """Read a scenario file, or one of the built-ins by bare name."""
    p = Path(path_or_name)
    if p.exists():
        return parse_scenario(p.read_text(encoding="utf-8"), p.stem)
    name = str(path_or_name)
    if name in BUILTIN:
        text = resources.files("nfvgw.data").joinpath(f"{name}.scn").read_text(encoding="utf-8")
        return parse_scenario(text, name)
    raise ScenarioError(f"no scenario file {path_or_name!r}")
