"""Logically centralized SDN controller: chain registration, compilation and push."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Union

from .errors import GatewayError, MissingVnf, NoPath, UnknownIngress
from .fabric import (
    AppAddr,
    DeviceRef,
    Fabric,
    FlowEntry,
    ForwardTo,
    InsertChainId,
    MatchPredicate,
    SwitchRef,
    VnfRef,
)
from .model import ChainSpec, VnfFamily, VnfKind

CONTROLLER = "sdn-controller"

# Chain-id matched entries outrank classification entries so that a stamped
# envelope crossing an ingress switch is never re-classified.
CLASSIFY_PRIORITY = 0
CHAIN_PRIORITY = 1


@dataclass(frozen=True)
class ChainRegistration:
    chain: ChainSpec
    classification: MatchPredicate
    ingress: str
    egress: Union[DeviceRef, AppAddr]
    bindings: tuple[tuple[VnfKind, str], ...] = ()  # kind -> instance id to steer through

    @property
    def chain_id(self) -> str:
        return self.chain.chain_id

    def binding(self, kind: VnfKind) -> str | None:
        return dict(self.bindings).get(kind)

    def to_dict(self) -> dict:
        m = self.classification
        return {
            "chain_id": self.chain_id,
            "functions": [str(k) for k in self.chain.functions],
            "ingress": self.ingress,
            "egress": str(self.egress),
            "classification": {
                "app_requirements": None if m.app_requirements is None else [
                    str(m.app_requirements.protocol), str(m.app_requirements.info_model),
                    str(m.app_requirements.aggregation)],
                "device_props": None if m.device_props is None else [
                    str(m.device_props.protocol), str(m.device_props.info_model)],
            },
            "bindings": {str(k): v for k, v in self.bindings},
        }


@dataclass(frozen=True)
class TopologyView:
    """Snapshot of what compilation needs to know about the fabric."""

    switches: frozenset[str]
    adjacency: dict[str, tuple[str, ...]]
    instance_switch: dict[str, str]          # active instance -> attachment switch
    instances_by_kind: dict[VnfKind, tuple[str, ...]]
    lb_for: dict[VnfKind, str]               # kind -> LB instance fronting its group
    egress_switch: dict[str, str] = field(default_factory=dict)  # str(target) -> switch

    @classmethod
    def from_fabric(cls, fabric: Fabric, egress=()) -> TopologyView:
        inst_sw: dict[str, str] = {}
        by_kind: dict[VnfKind, list[str]] = {}
        lb_for: dict[VnfKind, str] = {}
        if fabric.vnfm is not None:
            for inst in fabric.vnfm.catalogue:
                sw = fabric.attachment_of(VnfRef(inst.instance_id))
                if sw is None:
                    continue
                inst_sw[inst.instance_id] = sw
                by_kind.setdefault(inst.kind, []).append(inst.instance_id)
                if inst.kind.family is VnfFamily.LB:
                    lb_for.setdefault(inst.config.fronted, inst.instance_id)
        eg = {}
        for target in egress:
            sw = fabric.attachment_of(target)
            if sw is not None:
                eg[str(target)] = sw
        return cls(frozenset(fabric.switches),
                   {s: tuple(sorted(n)) for s, n in fabric.adjacency.items()},
                   inst_sw, {k: tuple(v) for k, v in by_kind.items()}, lb_for, eg)

    def shortest_path(self, a: str, b: str) -> list[str]:
        """Fewest hops; ties broken by the lexicographically smallest switch sequence."""
        if a == b:
            return [a]
        parent = {a: None}
        queue = deque([a])
        while queue:
            cur = queue.popleft()
            for nxt in self.adjacency.get(cur, ()):
                if nxt in parent:
                    continue
                parent[nxt] = cur
                if nxt == b:
                    path = [b]
                    while parent[path[-1]] is not None:
                        path.append(parent[path[-1]])
                    return path[::-1]
                queue.append(nxt)
        raise NoPath(f"{a} cannot reach {b}")

    def resolve(self, reg: ChainRegistration, kind: VnfKind) -> str:
        """Instance that steering for ``kind`` goes through."""
        bound = reg.binding(kind)
        if bound is not None:
            if bound not in self.instance_switch:
                raise MissingVnf(kind)
            return bound
        if kind in self.lb_for:
            return self.lb_for[kind]
        live = self.instances_by_kind.get(kind, ())
        if not live:
            raise MissingVnf(kind)
        return live[0]


@dataclass(frozen=True)
class CompiledChain:
    path: tuple[str, ...]
    entries: dict[str, list[FlowEntry]]  # insertion order follows the path
    hops: tuple[tuple[str, str], ...]    # (switch, instance) in visitation order


def compile_chain(reg: ChainRegistration, topo: TopologyView) -> CompiledChain:
    if reg.ingress not in topo.switches:
        raise UnknownIngress(reg.ingress)
    egress_sw = topo.egress_switch.get(str(reg.egress))
    if egress_sw is None:
        raise NoPath(f"{reg.egress} is not attached to any switch")
    path = [reg.ingress]
    detours: list[list[str]] = [[]]
    hops = []
    for kind in reg.chain.functions:
        inst = topo.resolve(reg, kind)
        sw = topo.instance_switch[inst]
        seg = topo.shortest_path(path[-1], sw)
        for s in seg[1:]:
            path.append(s)
            detours.append([])
        detours[-1].append(inst)
        hops.append((sw, inst))
    for s in topo.shortest_path(path[-1], egress_sw)[1:]:
        path.append(s)
        detours.append([])
    if len(set(path)) != len(path):
        # a chain_id match cannot tell two visits of one switch apart
        raise NoPath(f"chain {reg.chain_id} would revisit a switch: {path}")
    entries: dict[str, list[FlowEntry]] = {}
    for i, sw in enumerate(path):
        onward = SwitchRef(path[i + 1]) if i + 1 < len(path) else reg.egress
        actions = [ForwardTo(VnfRef(v)) for v in detours[i]] + [ForwardTo(onward)]
        if i == 0:
            entry = FlowEntry(reg.classification,
                              [InsertChainId(reg.chain_id)] + actions, CLASSIFY_PRIORITY)
        else:
            entry = FlowEntry(MatchPredicate(chain_id=reg.chain_id), actions, CHAIN_PRIORITY)
        entries[sw] = [entry]
    return CompiledChain(tuple(path), entries, tuple(hops))


class SdnController:
    """Sole writer of the fabric's flow tables."""

    def __init__(self, fabric: Fabric, name: str = CONTROLLER):
        self.fabric = fabric
        self.name = name
        fabric.bind_controller(name)
        self.registrations: dict[str, ChainRegistration] = {}
        self.compiled: dict[str, CompiledChain] = {}

    def topology(self, reg: ChainRegistration | None = None) -> TopologyView:
        return TopologyView.from_fabric(self.fabric, () if reg is None else (reg.egress,))

    def push_entries(self, entries: dict[str, list[FlowEntry]], tag: str | None = None) -> None:
        """Install egress-first; on any failure undo exactly what this push added."""
        added: list[tuple[str, FlowEntry]] = []
        try:
            for sw in reversed(list(entries)):
                for entry in entries[sw]:
                    if self.fabric.install_entry(sw, entry, writer=self.name, tag=tag):
                        added.append((sw, entry))
        except GatewayError:
            for sw, entry in reversed(added):
                self.fabric.remove_entry(sw, entry, writer=self.name)
            raise

    def register_chain(self, reg: ChainRegistration) -> CompiledChain:
        if reg.ingress not in self.fabric.switches:
            raise UnknownIngress(reg.ingress)
        if self.registrations.get(reg.chain_id) == reg:
            return self.compiled[reg.chain_id]
        compiled = compile_chain(reg, self.topology(reg))
        if reg.chain_id in self.registrations:
            self.unregister_chain(reg.chain_id)
        self.push_entries(compiled.entries, tag=reg.chain_id)
        self.registrations[reg.chain_id] = reg
        self.compiled[reg.chain_id] = compiled
        return compiled

    def unregister_chain(self, chain_id: str) -> int:
        self.registrations.pop(chain_id, None)
        self.compiled.pop(chain_id, None)
        return self.fabric.remove_tagged(chain_id, writer=self.name)

    def list_chains(self) -> list[dict]:
        return [r.to_dict() for r in self.registrations.values()]
