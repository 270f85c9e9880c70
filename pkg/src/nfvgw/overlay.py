"""The IoT Gateway overlay and the Application overlay over a static MANET graph."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable

from .errors import (
    AlreadyCreated,
    InvalidValue,
    MasterLeft,
    NotCoLocated,
    NotMember,
    OverlayNotCreated,
    Unreachable,
)


class OverlayId(str, Enum):
    GATEWAY = "Gateway"
    APPLICATION = "Application"

    def __str__(self) -> str:
        return self.value

    @property
    def other(self) -> OverlayId:
        return OverlayId.APPLICATION if self is OverlayId.GATEWAY else OverlayId.GATEWAY


@dataclass
class MasterProfile:
    master: str
    address: str
    members: set[str] = field(default_factory=set)


@dataclass(frozen=True)
class OverlayMsg:
    overlay: OverlayId
    src: str
    dst: str
    payload: object
    trace: tuple[str, ...] = ()
    hops: int = 0


@dataclass(frozen=True)
class OverlayEvent:
    tick: int
    overlay: OverlayId
    event: str
    node: str

    def __str__(self) -> str:
        return f"{self.tick},{self.overlay},{self.event},{self.node}"


class OverlayNet:
    """Membership registries of both overlays plus addressed routing between members.

    ``links`` describes the MANET; when omitted every node can reach every other one.
    ``capable`` lists the nodes allowed to represent type-A devices (class B and the
    fixed node). ``relays`` optionally pins an intermediate-node path for a
    (src, dst) pair; otherwise delivery takes one logical hop.
    """

    def __init__(self, nodes: Iterable[str], links: Iterable[tuple[str, str]] | None = None,
                 *, capable: Iterable[str] = (), hop_delay: int = 0, c_join: int = 0,
                 relays: dict[tuple[str, str], tuple[str, ...]] | None = None):
        self.nodes = set(nodes)
        self.graph: dict[str, set[str]] | None = None
        if links is not None:
            self.graph = {n: set() for n in self.nodes}
            for a, b in links:
                self.graph.setdefault(a, set()).add(b)
                self.graph.setdefault(b, set()).add(a)
                self.nodes.update((a, b))
        self.capable = set(capable)
        self.hop_delay = hop_delay
        self.c_join = c_join
        self.relays = dict(relays or {})
        self.profiles: dict[OverlayId, MasterProfile] = {}
        self.represents: dict[str, list[str]] = {}
        self.log: list[OverlayEvent] = []

    def _record(self, tick: int, oid: OverlayId, event: str, node: str) -> None:
        self.log.append(OverlayEvent(tick, oid, event, node))

    def connected(self, a: str, b: str) -> bool:
        if a not in self.nodes or b not in self.nodes:
            return False
        if self.graph is None or a == b:
            return True
        seen, queue = {a}, deque([a])
        while queue:
            cur = queue.popleft()
            for n in self.graph.get(cur, ()):
                if n == b:
                    return True
                if n not in seen:
                    seen.add(n)
                    queue.append(n)
        return False

    def profile(self, oid: OverlayId) -> MasterProfile:
        try:
            return self.profiles[oid]
        except KeyError:
            raise OverlayNotCreated(str(oid)) from None

    def created(self, oid: OverlayId) -> bool:
        return oid in self.profiles

    def members(self, oid: OverlayId) -> frozenset[str]:
        return frozenset(self.profile(oid).members)

    def is_member(self, node: str, oid: OverlayId) -> bool:
        return oid in self.profiles and node in self.profiles[oid].members

    def co_located(self) -> list[str]:
        if len(self.profiles) < 2:
            return []
        both = self.profiles[OverlayId.GATEWAY].members & self.profiles[OverlayId.APPLICATION].members
        return sorted(both)

    # -- membership --------------------------------------------------------------------------

    def create_overlay(self, oid: OverlayId, master: str, tick: int = 0) -> None:
        if oid in self.profiles:
            raise AlreadyCreated(str(oid))
        if master not in self.nodes:
            raise Unreachable(master)
        self.profiles[oid] = MasterProfile(master, f"{oid}@{master}", {master})
        self._record(tick, oid, "create", master)

    def join(self, node: str, oid: OverlayId, tick: int = 0) -> int:
        """Register ``node``; returns the simulated cost (0 when already a member)."""
        prof = self.profile(oid)
        if node in prof.members:
            return 0
        if not self.connected(node, prof.master):
            raise Unreachable(node)
        prof.members.add(node)
        self._record(tick, oid, "join", node)
        return self.c_join

    def join_via_proxy(self, device: str, proxy: str, oid: OverlayId, tick: int = 0) -> None:
        """A type-A device is represented by a capable member instead of joining itself."""
        if not self.is_member(proxy, oid):
            raise NotMember(proxy, oid)
        if proxy not in self.capable:
            raise InvalidValue(f"{proxy} cannot represent other devices")
        reps = self.represents.setdefault(proxy, [])
        if device not in reps:
            reps.append(device)
            self._record(tick, oid, "represent", f"{proxy}:{device}")

    def leave(self, node: str, oid: OverlayId, tick: int = 0) -> None:
        prof = self.profile(oid)
        if node not in prof.members:
            raise NotMember(node, oid)
        if node == prof.master:
            raise MasterLeft(f"{node} masters the {oid} overlay")
        prof.members.discard(node)
        self._record(tick, oid, "leave", node)

    def node_for(self, address: str) -> str:
        """Overlay node answering for ``address``: its representing proxy, or itself."""
        for proxy in sorted(self.represents):
            if address in self.represents[proxy]:
                return proxy
        return address

    # -- routing ---------------------------------------------------------------------------

    def route(self, oid: OverlayId, src: str, dst: str, payload: object = None,
              trace: tuple[str, ...] = (), hops: int = 0) -> OverlayMsg:
        """Address a message inside one overlay; ``deliver`` must still accept it."""
        prof = self.profile(oid)
        for n in (src, dst):
            if n not in prof.members:
                raise NotMember(n, oid)
        via = self.relays.get((src, dst), ())
        for n in via:
            if n not in prof.members:
                raise NotMember(n, oid)
        path = (src, *via, dst) if src != dst else (src,)
        steps = tuple(f"{oid}:{a}->{b}" for a, b in zip(path, path[1:]))
        return OverlayMsg(oid, src, dst, payload, trace + steps, hops + len(path) - 1)

    def deliver(self, msg: OverlayMsg) -> OverlayMsg:
        """Delivery-time check: the destination may have left while the message flew."""
        if not self.is_member(msg.dst, msg.overlay):
            raise NotMember(msg.dst, msg.overlay)
        return msg

    def delay(self, msg: OverlayMsg) -> int:
        return msg.hops * self.hop_delay

    def bridge(self, msg: OverlayMsg, at: str) -> OverlayMsg:
        """Re-emit ``msg`` (already at the co-located node ``at``) into the other overlay."""
        if not (self.is_member(at, OverlayId.GATEWAY) and self.is_member(at, OverlayId.APPLICATION)):
            raise NotCoLocated(at)
        if msg.dst != at:
            raise InvalidValue(f"message is at {msg.dst}, not {at}")
        return OverlayMsg(msg.overlay.other, at, at, msg.payload,
                          msg.trace + (f"bridge@{at}",), msg.hops)

    def send(self, src: str, src_overlay: OverlayId, dst: str, dst_overlay: OverlayId,
             payload: object = None) -> OverlayMsg:
        """Route across overlays, bridging at the first co-located node if needed."""
        if src_overlay is dst_overlay:
            return self.route(src_overlay, src, dst, payload)
        if not self.is_member(src, src_overlay):
            raise NotMember(src, src_overlay)
        bridges = self.co_located()
        if not bridges:
            raise NotMember(dst, src_overlay)
        at = bridges[0]
        first = self.route(src_overlay, src, at, payload)
        crossed = self.bridge(first, at)
        return self.route(dst_overlay, at, dst, payload, crossed.trace, crossed.hops)
