"""Gateway Functions Store, VNF Catalogue and the VNF lifecycle manager."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Union

from ..envelope import Envelope, RawValues, body_model, record_count
from ..errors import (
    FunctionUnavailable,
    HostFull,
    HostNotCapable,
    InfeasibleConversion,
    InvalidValue,
    NoVnfAtHop,
    UnknownInstance,
)
from ..model import DeviceClass, DeviceDescriptor, VnfFamily, VnfKind
from .functions import (
    ConversionPair,
    DaConfig,
    FeasibilityTable,
    RecordMeta,
    da_process,
    from_records,
    imc_convert,
    lb_select,
    pc_convert,
    to_records,
)


@dataclass(frozen=True)
class VnfPackage:
    kind: VnfKind
    version: str = "1.0"
    metadata: tuple[tuple[str, str], ...] = ()


class GatewayFunctionsStore:
    def __init__(self, feasibility: FeasibilityTable,
                 packages: Iterable[VnfPackage] = ()):
        self.feasibility = feasibility
        self._packages: dict[tuple[VnfKind, str], VnfPackage] = {}
        for pkg in packages:
            self.onboard(pkg)

    def onboard(self, pkg: VnfPackage) -> None:
        key = (pkg.kind, pkg.version)
        if key in self._packages:
            raise InvalidValue(f"{pkg.kind} {pkg.version} already in the store")
        self._packages[key] = pkg

    def remove(self, kind: VnfKind) -> None:
        for key in [k for k in self._packages if k[0] == kind]:
            del self._packages[key]

    def kinds(self) -> list[VnfKind]:
        return sorted({k for k, _ in self._packages})

    def lookup(self, kind: VnfKind) -> VnfPackage:
        """Latest on-boarded package of ``kind``; conversion kinds must be feasible too."""
        if kind.family in (VnfFamily.IMC, VnfFamily.PC) and self.feasibility.pair(kind) is None:
            raise FunctionUnavailable(kind)
        matches = [p for (k, _), p in self._packages.items() if k == kind]
        if not matches:
            raise FunctionUnavailable(kind)
        return matches[-1]

    def lookup_conversion(self, family: VnfFamily, source, target) -> VnfPackage:
        kind = self.feasibility.variant_for(family, source, target)
        if kind is None:
            raise FunctionUnavailable(f"{family}({source}->{target})")
        return self.lookup(kind)


class InstanceState(str, Enum):
    INSTANTIATED = "Instantiated"
    ACTIVE = "Active"
    TERMINATED = "Terminated"


@dataclass(frozen=True)
class LbConfig:
    fronted: VnfKind
    members: tuple[str, ...]


VnfConfig = Union[DaConfig, LbConfig, ConversionPair, None]


@dataclass
class VnfInstance:
    instance_id: str
    kind: VnfKind
    host: str
    state: InstanceState
    config: VnfConfig = None
    calls: int = 0
    records: int = 0  # records the function was applied to

    @property
    def live(self) -> bool:
        return self.state is not InstanceState.TERMINATED


class HostPool:
    """Per-host VNF slot accounting over the class-B devices."""

    def __init__(self, devices: Iterable[DeviceDescriptor]):
        self.devices = {d.id: d for d in devices}
        self.used: dict[str, int] = {d.id: 0 for d in self.devices.values()}

    def capacity(self, host: str) -> int:
        return self.devices[host].capabilities.host_capacity

    def free(self, host: str) -> int:
        return self.capacity(host) - self.used[host]

    def occupy(self, host: str) -> None:
        dev = self.devices.get(host)
        if dev is None or dev.device_class is not DeviceClass.B:
            raise HostNotCapable(host)
        if self.free(host) <= 0:
            raise HostFull(host)
        self.used[host] += 1

    def release(self, host: str) -> None:
        self.used[host] -= 1


class Catalogue:
    """Index of the live (non-terminated) instances, by id, kind and host."""

    def __init__(self):
        self._live: dict[str, VnfInstance] = {}

    def add(self, inst: VnfInstance) -> None:
        self._live[inst.instance_id] = inst

    def remove(self, instance_id: str) -> None:
        del self._live[instance_id]

    def get(self, instance_id: str) -> VnfInstance | None:
        return self._live.get(instance_id)

    def __contains__(self, instance_id: str) -> bool:
        return instance_id in self._live

    def __iter__(self):
        return iter(sorted(self._live.values(), key=_creation_order))

    def __len__(self) -> int:
        return len(self._live)

    def by_kind(self, kind: VnfKind) -> list[VnfInstance]:
        return [i for i in self if i.kind == kind]

    def by_host(self, host: str) -> list[VnfInstance]:
        return [i for i in self if i.host == host]

    def check(self, kind: VnfKind, config: VnfConfig = None) -> VnfInstance | None:
        """A live instance of ``kind`` (with matching config, when one is given)."""
        for inst in self.by_kind(kind):
            if config is None or inst.config == config:
                return inst
        return None

    def snapshot(self) -> frozenset[tuple[str, str, str]]:
        return frozenset((i.instance_id, str(i.kind), i.host) for i in self)


def _creation_order(inst: VnfInstance) -> int:
    return int(inst.instance_id.rsplit("#", 1)[1])


@dataclass
class Invocation:
    """Outcome of pushing one envelope through one VNF (and any balanced member)."""

    env: Envelope | None
    work: int = 0          # records processed, summed over every function applied
    extra_hops: int = 0    # overlay hops beyond the switch<->VNF detour
    visited: list[str] = field(default_factory=list)


class VnfManager:
    """Lifecycle (instantiate/terminate) plus invocation of deployed instances."""

    def __init__(self, store: GatewayFunctionsStore, hosts: HostPool):
        self.store = store
        self.hosts = hosts
        self.catalogue = Catalogue()
        self.instances: dict[str, VnfInstance] = {}
        self._ids = itertools.count(1)
        self._lb_seq: dict[str, int] = {}

    @property
    def feasibility(self) -> FeasibilityTable:
        return self.store.feasibility

    def default_config(self, kind: VnfKind) -> VnfConfig:
        if kind.family in (VnfFamily.IMC, VnfFamily.PC):
            pair = self.feasibility.pair(kind)
            if pair is None:
                raise FunctionUnavailable(kind)
            return pair
        return None

    def instantiate(self, pkg: VnfPackage, host: str, config: VnfConfig = None) -> VnfInstance:
        if config is None:
            config = self.default_config(pkg.kind)
        if pkg.kind.family is VnfFamily.DA and not isinstance(config, DaConfig):
            raise InvalidValue("a DA instance needs a DaConfig")
        if pkg.kind.family is VnfFamily.LB and not isinstance(config, LbConfig):
            raise InvalidValue("an LB instance needs an LbConfig")
        self.hosts.occupy(host)
        inst = VnfInstance(f"{pkg.kind}#{next(self._ids)}", pkg.kind, host,
                           InstanceState.INSTANTIATED, config)
        self.instances[inst.instance_id] = inst
        inst.state = InstanceState.ACTIVE
        self.catalogue.add(inst)
        return inst

    def terminate(self, instance_id: str) -> None:
        inst = self.instances.get(instance_id)
        if inst is None or not inst.live:
            raise UnknownInstance(instance_id)
        inst.state = InstanceState.TERMINATED
        self.catalogue.remove(instance_id)
        self.hosts.release(inst.host)

    def is_active(self, instance_id: str) -> bool:
        inst = self.instances.get(instance_id)
        return inst is not None and inst.state is InstanceState.ACTIVE

    def invoke(self, instance_id: str, env: Envelope) -> Invocation:
        inst = self.instances.get(instance_id)
        if inst is None or inst.state is not InstanceState.ACTIVE:
            raise NoVnfAtHop(instance_id)
        inst.calls += 1
        if inst.kind.family is VnfFamily.LB:
            return self._balance(inst, env)
        work = record_count(env.body)
        inst.records += work
        out = self._apply(inst, env)
        return Invocation(out, work, 0, [instance_id])

    def _balance(self, lb: VnfInstance, env: Envelope) -> Invocation:
        members = [self.instances[m] for m in lb.config.members]
        live = [m for m in members if m.state is InstanceState.ACTIVE]
        seq = self._lb_seq.get(lb.instance_id, 0)
        self._lb_seq[lb.instance_id] = seq + 1
        chosen = lb_select(live, seq)
        inner = self.invoke(chosen, env)
        return Invocation(inner.env, inner.work, inner.extra_hops + 2,
                          [lb.instance_id] + inner.visited)

    def _apply(self, inst: VnfInstance, env: Envelope) -> Envelope | None:
        family = inst.kind.family
        if family is VnfFamily.DA:
            meta = RecordMeta.from_envelope(env)
            out = da_process(to_records(env.body, meta), inst.config)
            if not out:
                return None
            model = body_model(env.body)
            return env.with_body(from_records(out, model))
        pair: ConversionPair = inst.config
        if family is VnfFamily.IMC:
            current = body_model(env.body)
            target = _direction(pair, current)
            meta = RecordMeta.from_envelope(env) if isinstance(env.body, RawValues) else None
            return env.with_body(imc_convert(env.body, target, meta, self.feasibility))
        current = env.protocol
        return pc_convert(env, _direction(pair, current), self.feasibility)


def _direction(pair: ConversionPair, current):
    if current == pair.source:
        return pair.target
    if current == pair.target and pair.invertible:
        return pair.source
    raise InfeasibleConversion(current, pair.target)
