"""Application-level SDN switches: match/action flow tables over envelope headers."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Union

from .envelope import Envelope
from .errors import (
    DanglingTarget,
    ForeignWriter,
    InvalidValue,
    UnclassifiableRequest,
    UnknownSwitch,
)
from .model import AppRequirements, DeviceProps, ProtocolKind


@dataclass(frozen=True, order=True)
class SwitchRef:
    switch_id: str

    def __str__(self) -> str:
        return self.switch_id


@dataclass(frozen=True, order=True)
class VnfRef:
    instance_id: str

    def __str__(self) -> str:
        return f"vnf:{self.instance_id}"


@dataclass(frozen=True, order=True)
class DeviceRef:
    device_id: str

    def __str__(self) -> str:
        return f"device:{self.device_id}"


@dataclass(frozen=True, order=True)
class AppAddr:
    app_id: str

    def __str__(self) -> str:
        return f"app:{self.app_id}"


Target = Union[SwitchRef, VnfRef, DeviceRef, AppAddr]


@dataclass(frozen=True)
class MatchPredicate:
    """Exact-match constraints; ``None`` fields are wildcards."""

    app_level_src: str | None = None
    app_level_dst: str | None = None
    chain_id: str | None = None
    app_requirements: AppRequirements | None = None
    device_props: DeviceProps | None = None
    protocol: ProtocolKind | None = None

    def __post_init__(self):
        if all(getattr(self, f) is None for f in self.__dataclass_fields__):
            raise InvalidValue("a match needs at least one constraint")

    def matches(self, env: Envelope) -> bool:
        if self.app_level_src is not None and env.src != self.app_level_src:
            return False
        if self.app_level_dst is not None and env.dst != self.app_level_dst:
            return False
        if self.chain_id is not None and env.chain_id != self.chain_id:
            return False
        if self.protocol is not None and env.protocol != self.protocol:
            return False
        try:
            if self.app_requirements is not None and env.app_requirements != self.app_requirements:
                return False
            if self.device_props is not None and env.device_props != self.device_props:
                return False
        except InvalidValue:
            return False  # malformed requirement headers never match
        return True


@dataclass(frozen=True)
class InsertChainId:
    chain_id: str


@dataclass(frozen=True)
class ForwardTo:
    target: Target


Action = Union[InsertChainId, ForwardTo]


@dataclass(frozen=True)
class FlowEntry:
    match: MatchPredicate
    actions: tuple[Action, ...]
    priority: int = 0

    def __post_init__(self):
        object.__setattr__(self, "actions", tuple(self.actions))
        if not self.actions:
            raise InvalidValue("a flow entry needs at least one action")
        inserts = [i for i, a in enumerate(self.actions) if isinstance(a, InsertChainId)]
        if len(inserts) > 1:
            raise InvalidValue("at most one InsertChainId per entry")
        if inserts:
            first_fwd = next((i for i, a in enumerate(self.actions) if isinstance(a, ForwardTo)), None)
            if first_fwd is not None and inserts[0] > first_fwd:
                raise InvalidValue("InsertChainId must precede every ForwardTo")

    @property
    def inserted_chain_id(self) -> str | None:
        for a in self.actions:
            if isinstance(a, InsertChainId):
                return a.chain_id
        return None

    def targets(self) -> list[Target]:
        return [a.target for a in self.actions if isinstance(a, ForwardTo)]


class FlowTable:
    """Entries ordered by (priority desc, insertion order); first match wins."""

    def __init__(self):
        self._rows: list[tuple[FlowEntry, int, str | None]] = []
        self._seq = itertools.count()

    def install(self, entry: FlowEntry, tag: str | None = None) -> bool:
        """Add ``entry``; returns False when an identical entry is already present."""
        if any(e == entry for e, _, _ in self._rows):
            return False
        self._rows.append((entry, next(self._seq), tag))
        self._rows.sort(key=lambda row: (-row[0].priority, row[1]))
        return True

    def remove(self, entry: FlowEntry) -> None:
        self._rows = [row for row in self._rows if row[0] != entry]

    def remove_tagged(self, tag: str) -> list[FlowEntry]:
        gone = [e for e, _, t in self._rows if t == tag]
        self._rows = [row for row in self._rows if row[2] != tag]
        return gone

    @property
    def entries(self) -> list[FlowEntry]:
        return [e for e, _, _ in self._rows]

    def tagged(self, tag: str) -> list[FlowEntry]:
        return [e for e, _, t in self._rows if t == tag]

    def __len__(self) -> int:
        return len(self._rows)


def match_packet(table: FlowTable, env: Envelope) -> FlowEntry | None:
    for entry in table.entries:
        if entry.match.matches(env):
            return entry
    return None


@dataclass
class SwitchNode:
    id: str
    host: str | None = None
    table: FlowTable = field(default_factory=FlowTable)
    classifier: bool = False


@dataclass(frozen=True)
class TraceLine:
    tick: int
    switch_id: str
    chain_id: str
    action: str

    def __str__(self) -> str:
        return f"{self.tick},{self.switch_id},{self.chain_id},{self.action}"


@dataclass(frozen=True)
class Emission:
    target: Target
    env: Envelope
    delay: int  # ticks from arrival at the switch until arrival at the target


class Fabric:
    """All application-level switches plus what each one can reach.

    ``node_switch`` maps a network node (switch host, VNF host, device proxy) to the
    switch it is attached to; ``device_node`` maps a device to the node that represents
    it; ``app_switch`` maps application addresses to their attachment switch.
    """

    def __init__(self, switches: Iterable[str], links: Iterable[tuple[str, str]] = (),
                 *, classifier: str | None = None, switch_hosts: dict[str, str] | None = None,
                 node_switch: dict[str, str] | None = None,
                 device_node: dict[str, str] | None = None,
                 app_switch: dict[str, str] | None = None,
                 vnfm=None, hop_delay: int = 0, proc_cost: int = 0):
        switch_hosts = switch_hosts or {}
        self.switches: dict[str, SwitchNode] = {
            s: SwitchNode(s, switch_hosts.get(s)) for s in switches
        }
        self.adjacency: dict[str, set[str]] = {s: set() for s in self.switches}
        for a, b in links:
            for s in (a, b):
                if s not in self.switches:
                    raise UnknownSwitch(s)
            self.adjacency[a].add(b)
            self.adjacency[b].add(a)
        if classifier is None and self.switches:
            classifier = next(iter(self.switches))
        self.classifier = classifier
        if classifier is not None:
            self.switches[classifier].classifier = True
        self.node_switch = dict(node_switch or {})
        for sw, host in switch_hosts.items():
            self.node_switch.setdefault(host, sw)
        self.device_node = dict(device_node or {})
        self.app_switch = dict(app_switch or {})
        self.vnfm = vnfm
        self.hop_delay = hop_delay
        self.proc_cost = proc_cost
        self.trace: list[TraceLine] = []
        self.writes: list[tuple[str, str, str]] = []  # (writer, op, switch) provenance
        self._owner: str | None = None

    # -- ownership -------------------------------------------------------------------------

    def bind_controller(self, name: str) -> None:
        if self._owner is not None and self._owner != name:
            raise ForeignWriter(f"fabric already owned by {self._owner}")
        self._owner = name

    def _check_writer(self, writer: str | None) -> str:
        if self._owner is not None and writer != self._owner:
            raise ForeignWriter(f"{writer} may not write tables owned by {self._owner}")
        return writer or "-"

    # -- topology queries --------------------------------------------------------------------

    def switch(self, switch_id: str) -> SwitchNode:
        try:
            return self.switches[switch_id]
        except KeyError:
            raise UnknownSwitch(switch_id) from None

    def attachment_of(self, target: Target) -> str | None:
        """Switch a non-switch target hangs off, or None if it is not attached."""
        if isinstance(target, VnfRef):
            if self.vnfm is None or not self.vnfm.is_active(target.instance_id):
                return None
            return self.node_switch.get(self.vnfm.instances[target.instance_id].host)
        if isinstance(target, DeviceRef):
            node = self.device_node.get(target.device_id, target.device_id)
            return self.node_switch.get(node)
        if isinstance(target, AppAddr):
            return self.app_switch.get(target.app_id)
        return None

    def reaches(self, switch_id: str, target: Target) -> bool:
        if isinstance(target, SwitchRef):
            return target.switch_id in self.adjacency.get(switch_id, ())
        return self.attachment_of(target) == switch_id

    # -- southbound writes -------------------------------------------------------------------

    def install_entry(self, switch_id: str, entry: FlowEntry, *,
                      writer: str | None = None, tag: str | None = None) -> bool:
        who = self._check_writer(writer)
        sw = self.switch(switch_id)
        for target in entry.targets():
            if not self.reaches(switch_id, target):
                raise DanglingTarget(target)
        added = sw.table.install(entry, tag)
        if added:
            self.writes.append((who, "install", switch_id))
        return added

    def remove_entry(self, switch_id: str, entry: FlowEntry, *, writer: str | None = None) -> None:
        who = self._check_writer(writer)
        self.switch(switch_id).table.remove(entry)
        self.writes.append((who, "remove", switch_id))

    def remove_tagged(self, tag: str, *, writer: str | None = None) -> int:
        who = self._check_writer(writer)
        n = 0
        for sw in self.switches.values():
            gone = sw.table.remove_tagged(tag)
            if gone:
                self.writes.append((who, "remove", sw.id))
                n += len(gone)
        return n

    def table_snapshot(self) -> dict[str, tuple[FlowEntry, ...]]:
        return {s: tuple(sw.table.entries) for s, sw in self.switches.items()}

    # -- data path ---------------------------------------------------------------------------

    def _log(self, tick: int, switch_id: str, env: Envelope, action: str) -> None:
        self.trace.append(TraceLine(tick, switch_id, env.chain_id or "-", action))

    def process_packet(self, switch_id: str, env: Envelope, tick: int = 0) -> list[Emission]:
        sw = self.switch(switch_id)
        entry = match_packet(sw.table, env)
        if entry is None:
            self._log(tick, switch_id, env, "drop")
            return []
        elapsed = 0
        out: list[Emission] = []
        for action in entry.actions:
            if isinstance(action, InsertChainId):
                env = env.with_chain_id(action.chain_id)
                self._log(tick + elapsed, switch_id, env, f"insert:{action.chain_id}")
                continue
            target = action.target
            if isinstance(target, VnfRef):
                self._log(tick + elapsed, switch_id, env, str(target))
                result = self.vnfm.invoke(target.instance_id, env)
                elapsed += (self.hop_delay * (2 + result.extra_hops)
                            + self.proc_cost * result.work)
                if result.env is None:
                    self._log(tick + elapsed, switch_id, env, f"filtered:{target.instance_id}")
                    return out
                if result.env.chain_id != env.chain_id:
                    raise InvalidValue("a VNF altered the chain id")
                env = result.env
                continue
            self._log(tick + elapsed, switch_id, env, f"forward:{target}")
            out.append(Emission(target, env, elapsed + self.hop_delay))
        return out

    def classify(self, env: Envelope) -> str:
        """Chain id the classifier switch would stamp on ``env``."""
        try:
            if env.app_requirements is None or env.device_props is None:
                raise UnclassifiableRequest("request lacks requirement headers")
        except InvalidValue as exc:
            raise UnclassifiableRequest(str(exc)) from None
        if self.classifier is None:
            raise UnclassifiableRequest("no classifier switch")
        for entry in self.switch(self.classifier).table.entries:
            chain_id = entry.inserted_chain_id
            if chain_id is not None and entry.match.matches(env):
                return chain_id
        raise UnclassifiableRequest(
            f"no chain for {env.app_requirements} x {env.device_props}")
