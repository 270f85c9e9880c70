"""Signaling endpoints: Application Agent, IoT Provider Agent and the VNF Agent."""

from __future__ import annotations

import itertools
import json
import string
from collections import Counter
from dataclasses import dataclass
from typing import Callable, Iterable, Union

from .envelope import Envelope, RawValues, decode_envelope, encode_envelope
from .errors import (
    GatewayError,
    InfeasibleConversion,
    InvalidValue,
    NoMatchingDevices,
)
from .fabric import DeviceRef, MatchPredicate
from .model import (
    Aggregation,
    AppRequirements,
    ChainSpec,
    DeviceDescriptor,
    DeviceProps,
    InfoModelKind,
    ProtocolKind,
    VnfFamily,
    VnfKind,
)
from .vnf import DaConfig, DaMode, FeasibilityTable, default_feasibility

# -- decomposition ----------------------------------------------------------------------------

SEEDED_ROWS = (
    (AppRequirements(ProtocolKind.HTTP, InfoModelKind.SENML, Aggregation.AVERAGE),
     DeviceProps(ProtocolKind.COAP, InfoModelKind.RAW)),
    (AppRequirements(ProtocolKind.HTTP, InfoModelKind.SENSORML, Aggregation.AVERAGE),
     DeviceProps(ProtocolKind.HTTP, InfoModelKind.RAW)),
)


def chain_labels():
    """A, B, ..., Z, AA, AB, ..."""
    for width in itertools.count(1):
        for letters in itertools.product(string.ascii_uppercase, repeat=width):
            yield "".join(letters)


class ChainIdRegistry:
    """Stable chain id per (app requirements, device props) pair."""

    def __init__(self, seed_rows: Iterable[tuple[AppRequirements, DeviceProps]] = SEEDED_ROWS):
        self._labels = chain_labels()
        self._ids: dict[tuple[AppRequirements, DeviceProps], str] = {}
        for app, dev in seed_rows:
            self.id_for(app, dev)

    def id_for(self, app: AppRequirements, dev: DeviceProps) -> str:
        key = (app, dev)
        if key not in self._ids:
            self._ids[key] = next(self._labels)
        return self._ids[key]

    def items(self):
        return list(self._ids.items())


def is_actuator(dev: DeviceProps) -> bool:
    return dev.info_model is InfoModelKind.ROBOT or dev.protocol is ProtocolKind.LCP


def vnf_agent_decompose(app: AppRequirements, dev: DeviceProps,
                        feasibility: FeasibilityTable | None = None,
                        registry: ChainIdRegistry | None = None) -> ChainSpec:
    """DA iff aggregation is requested, IMC iff models differ, PC iff protocols differ."""
    feasibility = feasibility or default_feasibility()
    registry = registry or ChainIdRegistry()
    # data moves device -> app, except towards actuators where commands move app -> device
    down = is_actuator(dev)
    functions: list[VnfKind] = []
    if app.aggregation is not Aggregation.NONE:
        functions.append(VnfKind(VnfFamily.DA, 1))
    for family, a, d in ((VnfFamily.IMC, app.info_model, dev.info_model),
                         (VnfFamily.PC, app.protocol, dev.protocol)):
        if a == d:
            continue
        src, dst = (a, d) if down else (d, a)
        kind = feasibility.variant_for(family, src, dst)
        if kind is None:
            raise InfeasibleConversion(src, dst)
        functions.append(kind)
    return ChainSpec(registry.id_for(app, dev), tuple(functions))


def classification_for(app: AppRequirements, dev: DeviceProps) -> MatchPredicate:
    return MatchPredicate(app_requirements=app, device_props=dev)


# -- messages ---------------------------------------------------------------------------------

@dataclass(frozen=True)
class ServiceRequest:
    app_id: str
    requirements: AppRequirements
    devices: tuple[str, ...]          # devices the application wants served
    threshold: float = 0.0            # for ThresholdData aggregation
    window: int = 1                   # for AverageData aggregation
    replicas: int = 1
    chain_order: tuple[VnfKind, ...] | None = None

    def da_config(self) -> DaConfig | None:
        agg = self.requirements.aggregation
        if agg is Aggregation.THRESHOLD:
            return DaConfig(DaMode.THRESHOLD, self.threshold)
        if agg is Aggregation.AVERAGE:
            return DaConfig(DaMode.AVERAGE, window=self.window)
        return None


@dataclass(frozen=True)
class GatewayRequest:
    service: ServiceRequest
    device_props: DeviceProps
    devices: tuple[DeviceDescriptor, ...]


@dataclass(frozen=True)
class ServiceAvailable:
    classifier: str
    chain_id: str
    plan_uri: str


@dataclass(frozen=True)
class ServiceUnavailable:
    retry_after: int
    reason: str = ""


Notification = Union[ServiceAvailable, ServiceUnavailable]


def notification_fields(n: Notification) -> dict[str, str]:
    if isinstance(n, ServiceAvailable):
        return {"status": "available", "classifier": n.classifier,
                "chain": n.chain_id, "plan": n.plan_uri}
    return {"status": "unavailable", "retry_after": str(n.retry_after), "reason": n.reason}


def notification_from(env: Envelope) -> Notification:
    if env.header("status") == "available":
        return ServiceAvailable(env.header("classifier"), env.header("chain"), env.header("plan"))
    return ServiceUnavailable(int(env.header("retry_after", "0")), env.header("reason", ""))


class ControlChannel:
    """Agent-to-agent signaling: real encoded envelopes, one hop delay per message."""

    def __init__(self, sim, hop_delay: int):
        self.sim = sim
        self.hop_delay = hop_delay
        self.counts: Counter[str] = Counter()
        self.bytes = 0

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def send(self, src: str, dst: str, msg: str, fields: dict[str, str],
             handler: Callable[[Envelope], None]) -> None:
        env = Envelope.make(ProtocolKind.HTTP, src, dst, RawValues(()), msg=msg, **fields)
        wire = encode_envelope(env)
        self.counts[msg] += 1
        self.bytes += len(wire)
        self.sim.emit(src, f"send {msg} -> {dst}")

        def arrive():
            received = decode_envelope(wire)
            self.sim.emit(dst, f"recv {msg} <- {src}")
            handler(received)

        self.sim.schedule(self.hop_delay, arrive)


# -- agents -----------------------------------------------------------------------------------

class DeviceRepository:
    """The IoT provider's device specifications."""

    def __init__(self, devices: Iterable[DeviceDescriptor]):
        self.devices = {d.id: d for d in devices}

    def select(self, ids: Iterable[str]) -> tuple[DeviceDescriptor, ...]:
        return tuple(self.devices[i] for i in ids if i in self.devices)


class ApplicationAgent:
    def __init__(self, name: str, channel: ControlChannel, provider: ProviderAgent):
        self.name = name
        self.channel = channel
        self.provider = provider
        self.notifications: dict[str, Notification] = {}
        self.requested_at: dict[str, int] = {}
        self.notified_at: dict[str, int] = {}
        self._callbacks: dict[str, Callable[[Notification], None]] = {}

    def request_service(self, req: ServiceRequest,
                        on_notify: Callable[[Notification], None] | None = None) -> None:
        self.requested_at[req.app_id] = self.channel.sim.now
        if on_notify is not None:
            self._callbacks[req.app_id] = on_notify
        self.channel.send(self.name, self.provider.name, "service_request",
                          {"app": req.app_id},
                          lambda env: self.provider.on_service_request(req, self))

    def on_notification(self, app_id: str, env: Envelope) -> None:
        note = notification_from(env)
        self.notifications[app_id] = note
        self.notified_at[app_id] = self.channel.sim.now
        cb = self._callbacks.pop(app_id, None)
        if cb is not None:
            cb(note)


class ProviderAgent:
    def __init__(self, name: str, channel: ControlChannel, repo: DeviceRepository,
                 vnf_agent: VnfAgent):
        self.name = name
        self.channel = channel
        self.repo = repo
        self.vnf_agent = vnf_agent

    def gateway_request(self, req: ServiceRequest) -> GatewayRequest:
        devices = self.repo.select(req.devices)
        if not devices:
            raise NoMatchingDevices(f"no device in the repository matches {list(req.devices)}")
        props = {d.props for d in devices}
        if len(props) != 1:
            raise NoMatchingDevices("requested devices disagree on protocol/info model")
        return GatewayRequest(req, props.pop(), devices)

    def on_service_request(self, req: ServiceRequest, app: ApplicationAgent) -> None:
        g = self.gateway_request(req)

        def reply(env: Envelope) -> None:
            self.channel.send(self.name, app.name, "notify", _fields_of(env),
                              lambda e: app.on_notification(req.app_id, e))

        self.vnf_agent.provider_name = self.name
        self.channel.send(self.name, self.vnf_agent.name, "gateway_request",
                          {"app": req.app_id, "dev_protocol": str(g.device_props.protocol),
                           "dev_info_model": str(g.device_props.info_model)},
                          lambda env: self.vnf_agent.on_gateway_request(g, reply))


def _fields_of(env: Envelope) -> dict[str, str]:
    skip = {"app_level_src", "app_level_dst", "msg"}
    return {k: v for k, v in env.headers if k not in skip}


class VnfAgent:
    """Decomposes gateway requests into chains and asks the orchestrator to deploy them."""

    def __init__(self, name: str, channel: ControlChannel, orchestrator, *,
                 feasibility: FeasibilityTable | None = None,
                 registry: ChainIdRegistry | None = None, retry_after: int = 100,
                 orchestrator_name: str = "orchestrator"):
        self.name = name
        self.channel = channel
        self.orchestrator = orchestrator
        self.orchestrator_name = orchestrator_name
        self.feasibility = feasibility or orchestrator.vnfm.feasibility
        self.registry = registry or ChainIdRegistry()
        self.retry_after = retry_after
        self.chains: dict[str, ChainSpec] = {}
        self.plan_uris: list[str] = []
        self.provider_name = "provider-agent"
        self._waiting: dict[tuple, list[Callable[[Envelope], None]]] = {}
        self._served: dict[tuple, Notification] = {}
        self.coalesced = 0

    def _unavailable(self, reason: str) -> ServiceUnavailable:
        return ServiceUnavailable(self.retry_after, reason)

    def _answer(self, reply, note: Notification) -> None:
        self.channel.send(self.name, self.provider_name, "notify", notification_fields(note), reply)

    def on_gateway_request(self, g: GatewayRequest, reply: Callable[[Envelope], None]) -> None:
        req = g.service
        key = (req.requirements, g.device_props, tuple(d.id for d in g.devices), req.chain_order)
        if key in self._served:
            self._answer(reply, self._served[key])
            return
        if key in self._waiting:
            self.coalesced += 1
            self.channel.sim.emit(self.name, f"coalesce {req.app_id}")
            self._waiting[key].append(reply)
            return
        try:
            chain = vnf_agent_decompose(req.requirements, g.device_props,
                                        self.feasibility, self.registry)
            if req.chain_order is not None:
                chain = chain.reordered(req.chain_order)
        except GatewayError as exc:
            self._answer(reply, self._unavailable(f"{type(exc).__name__}: {exc}"))
            return
        self.chains[chain.chain_id] = chain
        self.channel.sim.emit(self.name, f"decompose {chain}")
        self._waiting[key] = [reply]
        from .orchestrator import PlanRequest  # local: orchestrator sits above agents

        plan_req = PlanRequest(chain, classification_for(req.requirements, g.device_props),
                               self.orchestrator.fabric.classifier,
                               DeviceRef(g.devices[0].id), req.da_config(), req.replicas)
        self.channel.send(self.name, self.orchestrator_name, "plan_create",
                          {"plan": json.dumps(plan_req.to_dict(), sort_keys=True)},
                          lambda env: self._orchestrator_receive(key, env))

    def _orchestrator_receive(self, key, env: Envelope) -> None:
        # runs on the orchestrator side of the channel
        from .orchestrator import PlanRequest

        orch = self.orchestrator
        try:
            request = PlanRequest.from_dict(json.loads(env.header("plan")))
            uri = orch.plan_create(request, on_done=lambda plan: self._plan_finished(key, plan))
        except GatewayError as exc:
            note = self._unavailable(f"{type(exc).__name__}: {exc}")
            self.channel.send(self.orchestrator_name, self.name, "plan_status",
                              notification_fields(note), lambda e: self._resolve(key, e))
            return
        self.plan_uris.append(uri)

    def _plan_finished(self, key, plan) -> None:
        from .orchestrator import Status

        if plan.status is Status.DONE:
            note: Notification = ServiceAvailable(self.orchestrator.fabric.classifier,
                                                  plan.request.chain.chain_id, plan.uri)
        else:
            note = self._unavailable(plan.error or "plan failed")
        self.channel.send(self.orchestrator_name, self.name, "plan_status",
                          notification_fields(note), lambda e: self._resolve(key, e))

    def _resolve(self, key, env: Envelope) -> None:
        note = notification_from(env)
        if isinstance(note, ServiceAvailable):
            self._served[key] = note
        for reply in self._waiting.pop(key, []):
            self._answer(reply, note)


def app_contact_classifier(app_id: str, note: Notification, req: ServiceRequest,
                           dev: DeviceDescriptor, body=None, **headers: str) -> Envelope:
    """The envelope an application sends to the flow classifier once served."""
    if not isinstance(note, ServiceAvailable):
        raise InvalidValue(f"{app_id} has no available service: {note}")
    env = Envelope.make(req.requirements.protocol, app_id, dev.id,
                        body if body is not None else RawValues(()), **headers)
    return env.with_requirements(req.requirements, dev.props)
