"""MANO-lite: orchestration plans (deploy, chain, overlay-create) and their resource API."""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterable, Protocol, Union

from .control import ChainRegistration, SdnController
from .errors import (
    GatewayError,
    InvalidPlanRequest,
    InvalidValue,
    PlacementInfeasible,
    PlanAlreadyRunning,
    PlanNotFound,
)
from .fabric import AppAddr, DeviceRef, MatchPredicate
from .model import (
    AppRequirements,
    Aggregation,
    ChainSpec,
    DeviceClass,
    DeviceDescriptor,
    DeviceProps,
    InfoModelKind,
    ProtocolKind,
    VnfFamily,
    VnfKind,
    parse_enum,
)
from .overlay import OverlayId, OverlayNet
from .vnf import DaConfig, DaMode, LbConfig, VnfManager

PLAN_ROOT = "/OrchestrationPlan"


class PhaseName(str, Enum):
    DEPLOY = "Deploy"
    CHAIN = "Chain"
    OVERLAY = "OverlayCreate"

    def __str__(self) -> str:
        return self.value


class Status(str, Enum):
    PENDING = "Pending"
    RUNNING = "Running"
    DONE = "Done"
    FAILED = "Failed"

    def __str__(self) -> str:
        return self.value


@dataclass
class Phase:
    name: PhaseName
    status: Status = Status.PENDING
    start: int | None = None
    end: int | None = None
    count: int = 0  # instantiations for Deploy, joins for OverlayCreate

    @property
    def duration(self) -> int:
        if self.start is None or self.end is None:
            return 0
        return self.end - self.start


Egress = Union[DeviceRef, AppAddr]


def parse_target(text: str) -> Egress:
    kind, _, name = text.partition(":")
    if not name:
        raise InvalidValue(f"bad egress {text!r}")
    if kind == "device":
        return DeviceRef(name)
    if kind == "app":
        return AppAddr(name)
    raise InvalidValue(f"bad egress {text!r}")


@dataclass(frozen=True)
class PlanRequest:
    chain: ChainSpec
    classification: MatchPredicate
    ingress: str
    egress: Egress
    da_config: DaConfig | None = None
    replicas: int = 1

    def config_for(self, kind: VnfKind):
        return self.da_config if kind.family is VnfFamily.DA else None

    def to_dict(self) -> dict:
        m = self.classification
        out = {
            "chain_id": self.chain.chain_id,
            "functions": [str(k) for k in self.chain.functions],
            "ingress": self.ingress,
            "egress": str(self.egress),
            "replicas": self.replicas,
        }
        if m.app_requirements is not None:
            a = m.app_requirements
            out["app_requirements"] = [str(a.protocol), str(a.info_model), str(a.aggregation)]
        if m.device_props is not None:
            out["device_props"] = [str(m.device_props.protocol), str(m.device_props.info_model)]
        if self.da_config is not None:
            c = self.da_config
            out["da"] = {"mode": c.mode.value, "threshold": c.threshold, "window": c.window}
        return out

    @classmethod
    def from_dict(cls, data: dict) -> PlanRequest:
        try:
            chain = ChainSpec(str(data["chain_id"]),
                              tuple(VnfKind.parse(f) for f in data["functions"]))
            app = dev = None
            if data.get("app_requirements"):
                p, m, a = data["app_requirements"]
                app = AppRequirements(parse_enum(ProtocolKind, p), parse_enum(InfoModelKind, m),
                                      parse_enum(Aggregation, a))
            if data.get("device_props"):
                p, m = data["device_props"]
                dev = DeviceProps(parse_enum(ProtocolKind, p), parse_enum(InfoModelKind, m))
            da = None
            if data.get("da"):
                d = data["da"]
                da = DaConfig(DaMode(d["mode"]), float(d.get("threshold", 0.0)),
                              int(d.get("window", 1)))
            return cls(chain, MatchPredicate(app_requirements=app, device_props=dev),
                       str(data["ingress"]), parse_target(str(data["egress"])), da,
                       int(data.get("replicas", 1)))
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidPlanRequest(f"malformed plan request: {exc}") from None


@dataclass
class OrchestrationPlan:
    id: int
    request: PlanRequest
    phases: list[Phase] = field(default_factory=lambda: [Phase(n) for n in PhaseName])
    status: Status = Status.PENDING
    created: list[str] = field(default_factory=list)      # instances this plan instantiated
    bindings: dict[VnfKind, str] = field(default_factory=dict)
    registered: bool = False
    error: str | None = None

    @property
    def uri(self) -> str:
        return f"{PLAN_ROOT}/{self.id}"

    @property
    def required_functions(self) -> tuple[VnfKind, ...]:
        return self.request.chain.functions

    def phase(self, name: PhaseName) -> Phase:
        return next(p for p in self.phases if p.name is name)

    @property
    def instantiations(self) -> int:
        return self.phase(PhaseName.DEPLOY).count

    @property
    def orchestration_time(self) -> int:
        return sum(p.duration for p in self.phases)

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "uri": self.uri,
            "status": str(self.status),
            "request": self.request.to_dict(),
            "phases": [{"name": str(p.name), "status": str(p.status), "start": p.start,
                        "end": p.end, "count": p.count} for p in self.phases],
            "instances": sorted(self.created, key=_inst_no),
            "bindings": {str(k): v for k, v in sorted(self.bindings.items())},
            "error": self.error,
        }


def _inst_no(instance_id: str) -> int:
    return int(instance_id.rsplit("#", 1)[1])


# -- resources and placement -----------------------------------------------------------------

@dataclass(frozen=True)
class ResourceView:
    devices: tuple[DeviceDescriptor, ...]
    free: dict[str, int]

    def ids(self) -> list[str]:
        return [d.id for d in self.devices]


def discover_devices(devices: Iterable[DeviceDescriptor], hosts=None) -> ResourceView:
    """Class-B devices with their capability tuples and (when known) free VNF slots."""
    found = tuple(d for d in devices if d.device_class is DeviceClass.B)
    free = {d.id: (hosts.free(d.id) if hosts is not None else d.capabilities.host_capacity)
            for d in found}
    return ResourceView(found, free)


@dataclass(frozen=True)
class Slot:
    kind: VnfKind
    fixed_switch: str | None = None  # set when an existing instance is reused


@dataclass(frozen=True)
class GroupPlacement:
    members: tuple[str, ...]
    lb_host: str | None = None


@dataclass(frozen=True)
class PlacementContext:
    line: tuple[str, ...]            # ingress -> egress switch path
    host_switch: dict[str, str]      # host -> attachment switch
    replicas: int = 1

    def position(self, host: str) -> int | None:
        sw = self.host_switch.get(host)
        return self.line.index(sw) if sw in self.line else None


class PlacementStrategy(Protocol):
    def place(self, slots: list[Slot], view: ResourceView,
              ctx: PlacementContext) -> dict[VnfKind, GroupPlacement]: ...


class RandomPlacement:
    """Seeded uniform choice among hosts that keep the chain moving away from ingress."""

    def __init__(self, seed: int = 0):
        self.rng = random.Random(seed)

    def place(self, slots, view, ctx):
        free = dict(view.free)
        anchors: dict[VnfKind, str] = {}

        def dfs(i: int, lo: int) -> bool:
            if i == len(slots):
                return True
            slot = slots[i]
            if slot.fixed_switch is not None:
                p = ctx.line.index(slot.fixed_switch) if slot.fixed_switch in ctx.line else None
                return p is not None and p >= lo and dfs(i + 1, p)
            cands = [h for h in view.ids()
                     if free.get(h, 0) > 0 and (ctx.position(h) is not None and ctx.position(h) >= lo)]
            self.rng.shuffle(cands)
            for h in cands:
                free[h] -= 1
                anchors[slot.kind] = h
                if dfs(i + 1, ctx.position(h)):
                    return True
                free[h] += 1
                del anchors[slot.kind]
            return False

        if not dfs(0, 0):
            raise PlacementInfeasible("no monotone placement along the switch path")
        out = {}
        for kind, anchor in anchors.items():
            if ctx.replicas == 1:
                out[kind] = GroupPlacement((anchor,))
                continue
            pool = [h for h in view.ids() for _ in range(max(free.get(h, 0), 0))]
            if len(pool) < ctx.replicas:
                raise PlacementInfeasible(f"not enough slots for {ctx.replicas} x {kind}")
            chosen = self.rng.sample(pool, ctx.replicas)
            for h in chosen:
                free[h] -= 1
            out[kind] = GroupPlacement(tuple(chosen), anchor)
        return out


class PinnedPlacement:
    """Fixed hosts per kind (``"DA1"`` -> replica hosts, ``"LB:DA1"`` -> LB host)."""

    def __init__(self, pins: dict[str, tuple[str, ...]], fallback: PlacementStrategy | None = None):
        self.pins = {k: tuple(v) for k, v in pins.items()}
        self.fallback = fallback

    def place(self, slots, view, ctx):
        out = {}
        rest = []
        for slot in slots:
            if slot.fixed_switch is not None:
                rest.append(slot)
                continue
            hosts = self.pins.get(str(slot.kind))
            if hosts is None:
                if self.fallback is None:
                    raise PlacementInfeasible(f"no pin for {slot.kind}")
                rest.append(slot)
                continue
            lb = self.pins.get(f"LB:{slot.kind}", (None,))[0]
            out[slot.kind] = GroupPlacement(hosts[:ctx.replicas] if ctx.replicas > 1 else hosts[:1],
                                            lb if ctx.replicas > 1 else None)
            rest.append(Slot(slot.kind, ctx.host_switch.get(lb or hosts[0])))
        if any(s.fixed_switch is None for s in rest):
            out.update(self.fallback.place(rest, view, ctx))
        return out


@dataclass(frozen=True)
class OrchestratorCosts:
    hop_delay: int = 10
    c_join: int = 50

    def deploy(self, missing_groups: int) -> int:
        # discovery round trip, then one request/ack round trip per missing group
        # (replicas and their LB of one group are instantiated in parallel)
        return 2 * self.hop_delay + 2 * self.hop_delay * missing_groups

    def chain(self) -> int:
        return 2 * self.hop_delay  # entries pushed to all switches in parallel


# -- the orchestrator -------------------------------------------------------------------------

class Orchestrator:
    """Gateway Orchestrator driving the VNF manager, controller and overlay manager."""

    def __init__(self, vnfm: VnfManager, controller: SdnController, overlay: OverlayNet,
                 devices: Iterable[DeviceDescriptor], *, master: str,
                 costs: OrchestratorCosts = OrchestratorCosts(),
                 placement: PlacementStrategy | None = None, sim=None):
        self.vnfm = vnfm
        self.controller = controller
        self.overlay = overlay
        self.devices = {d.id: d for d in devices}
        self.master = master
        self.costs = costs
        self.placement = placement or RandomPlacement(0)
        self.sim = sim
        self.plans: dict[int, OrchestrationPlan] = {}
        self.oplog: list[tuple[str, int]] = []
        self._ids = itertools.count(1)
        self._listeners: dict[int, list[Callable[[OrchestrationPlan], None]]] = {}

    @property
    def fabric(self):
        return self.controller.fabric

    def _now(self) -> int:
        return self.sim.now if self.sim is not None else 0

    def _emit(self, event: str) -> None:
        if self.sim is not None:
            self.sim.emit("orchestrator", event)

    # -- resource API ----------------------------------------------------------------------

    def _validate(self, request: PlanRequest) -> None:
        if not request.chain.functions:
            raise InvalidPlanRequest("chain has no functions")
        if request.ingress not in self.fabric.switches:
            raise InvalidPlanRequest(f"unknown ingress {request.ingress}")
        if request.replicas < 1:
            raise InvalidPlanRequest("replicas must be >= 1")
        has_da = any(k.family is VnfFamily.DA for k in request.chain.functions)
        if has_da and request.da_config is None:
            raise InvalidPlanRequest("a DA function needs a DA configuration")
        if any(k.family is VnfFamily.LB for k in request.chain.functions):
            raise InvalidPlanRequest("load balancers are added by the orchestrator")

    def plan_create(self, request: PlanRequest, *, start: bool = True,
                    on_done: Callable[[OrchestrationPlan], None] | None = None) -> str:
        self._validate(request)
        plan = OrchestrationPlan(next(self._ids), request)
        self.plans[plan.id] = plan
        self.oplog.append(("create", plan.id))
        self._emit(f"plan_create {plan.uri} chain={request.chain}")
        if on_done is not None:
            self._listeners.setdefault(plan.id, []).append(on_done)
        if start:
            self.execute(plan.id)
        return plan.uri

    def plan_get(self, plan_id: int) -> OrchestrationPlan:
        try:
            return self.plans[int(plan_id)]
        except (KeyError, ValueError):
            raise PlanNotFound(str(plan_id)) from None

    def plan_get_all(self) -> list[OrchestrationPlan]:
        return [self.plans[i] for i in sorted(self.plans)]

    def plan_update(self, plan_id: int, request: PlanRequest) -> OrchestrationPlan:
        plan = self.plan_get(plan_id)
        if plan.status is not Status.PENDING:
            raise PlanAlreadyRunning(plan.uri)
        self._validate(request)
        plan.request = request
        self.oplog.append(("update", plan.id))
        return plan

    def plan_delete(self, plan_id: int) -> None:
        plan = self.plan_get(plan_id)
        del self.plans[plan.id]
        self.oplog.append(("delete", plan.id))
        self._release(plan)
        self._emit(f"plan_delete {plan.uri}")

    def add_listener(self, plan_id: int, fn: Callable[[OrchestrationPlan], None]) -> None:
        self._listeners.setdefault(plan_id, []).append(fn)

    # -- execution -------------------------------------------------------------------------

    def execute(self, plan_id: int) -> None:
        """Run the plan's phases; asynchronously on the simulator when one is attached."""
        plan = self.plan_get(plan_id)
        if plan.status is not Status.PENDING:
            raise PlanAlreadyRunning(plan.uri)
        if self.sim is None:
            t = 0
            for phase in plan.phases:
                if not self._start_phase(plan, phase, t):
                    return
                t = phase.end
                self._end_phase(plan, phase)
            return
        self.sim.schedule(0, self._step, plan.id, 0)

    def _step(self, plan_id: int, index: int) -> None:
        plan = self.plans.get(plan_id)
        if plan is None or plan.status is Status.FAILED:
            return  # deleted while queued
        phase = plan.phases[index]
        if self._start_phase(plan, phase, self.sim.now):
            self.sim.at(phase.end, self._finish, plan_id, index)

    def _finish(self, plan_id: int, index: int) -> None:
        plan = self.plans.get(plan_id)
        if plan is None:
            return
        self._end_phase(plan, plan.phases[index])
        if index + 1 < len(plan.phases):
            self._step(plan_id, index + 1)

    _RUNNERS = {
        PhaseName.DEPLOY: "run_deploy_phase",
        PhaseName.CHAIN: "run_chain_phase",
        PhaseName.OVERLAY: "run_overlay_phase",
    }

    def _start_phase(self, plan: OrchestrationPlan, phase: Phase, tick: int) -> bool:
        plan.status = Status.RUNNING
        phase.status = Status.RUNNING
        phase.start = tick
        self._emit(f"phase_start {plan.uri} {phase.name}")
        try:
            cost = getattr(self, self._RUNNERS[phase.name])(plan)
        except GatewayError as exc:
            phase.status = Status.FAILED
            phase.end = tick
            plan.status = Status.FAILED
            plan.error = f"{type(exc).__name__}: {exc}"
            self._emit(f"phase_failed {plan.uri} {phase.name} {plan.error}")
            self._release(plan)
            self._notify(plan)
            return False
        phase.end = tick + cost
        return True

    def _end_phase(self, plan: OrchestrationPlan, phase: Phase) -> None:
        phase.status = Status.DONE
        self._emit(f"phase_done {plan.uri} {phase.name} ticks={phase.duration} count={phase.count}")
        if all(p.status is Status.DONE for p in plan.phases):
            plan.status = Status.DONE
            self._notify(plan)

    def _notify(self, plan: OrchestrationPlan) -> None:
        for fn in self._listeners.pop(plan.id, []):
            fn(plan)

    # -- phases ----------------------------------------------------------------------------

    def discover_devices(self) -> ResourceView:
        return discover_devices(self.devices.values(), self.vnfm.hosts)

    def _reusable(self, kind: VnfKind, config) -> str | None:
        cat = self.vnfm.catalogue
        for lb in cat.by_kind(VnfKind(VnfFamily.LB)):
            members = [cat.get(m) for m in lb.config.members]
            if lb.config.fronted == kind and any(m is not None and (config is None or m.config == config)
                                                 for m in members):
                return lb.instance_id
        inst = cat.check(kind, config)
        return inst.instance_id if inst is not None else None

    def run_deploy_phase(self, plan: OrchestrationPlan) -> int:
        req = plan.request
        phase = plan.phase(PhaseName.DEPLOY)
        view = self.discover_devices()
        slots: list[Slot] = []
        missing: list[VnfKind] = []
        for kind in req.chain.functions:
            existing = self._reusable(kind, req.config_for(kind))
            if existing is not None:
                plan.bindings[kind] = existing
                host = self.vnfm.instances[existing].host
                slots.append(Slot(kind, self.fabric.node_switch.get(host)))
                self._emit(f"catalogue_hit {kind} -> {existing}")
            else:
                missing.append(kind)
                slots.append(Slot(kind))
                self._emit(f"catalogue_miss {kind}")
        packages = {kind: self.vnfm.store.lookup(kind) for kind in missing}  # before any instantiation
        if missing:
            reg = self._registration(plan)
            topo = self.controller.topology(reg)
            egress_sw = topo.egress_switch.get(str(req.egress))
            if egress_sw is None:
                raise PlacementInfeasible(f"{req.egress} is not attached to the fabric")
            line = tuple(topo.shortest_path(req.ingress, egress_sw))
            ctx = PlacementContext(line, dict(self.fabric.node_switch), req.replicas)
            groups = self.placement.place(slots, view, ctx)
            for kind in missing:
                g = groups[kind]
                members = []
                for host in g.members:
                    inst = self.vnfm.instantiate(packages[kind], host, req.config_for(kind))
                    plan.created.append(inst.instance_id)
                    members.append(inst.instance_id)
                    self._emit(f"instantiate {inst.instance_id} on {host}")
                if g.lb_host is not None:
                    lb_pkg = self.vnfm.store.lookup(VnfKind(VnfFamily.LB))
                    lb = self.vnfm.instantiate(lb_pkg, g.lb_host, LbConfig(kind, tuple(members)))
                    plan.created.append(lb.instance_id)
                    self._emit(f"instantiate {lb.instance_id} on {g.lb_host}")
                    plan.bindings[kind] = lb.instance_id
                else:
                    plan.bindings[kind] = members[0]
        phase.count = len(plan.created)
        return self.costs.deploy(len(missing))

    def _registration(self, plan: OrchestrationPlan) -> ChainRegistration:
        req = plan.request
        return ChainRegistration(req.chain, req.classification, req.ingress, req.egress,
                                 tuple(sorted(plan.bindings.items())))

    def run_chain_phase(self, plan: OrchestrationPlan) -> int:
        self.controller.register_chain(self._registration(plan))
        plan.registered = True
        self._emit(f"chain_registered {plan.request.chain}")
        return self.costs.chain()

    def plan_nodes(self, plan: OrchestrationPlan) -> list[str]:
        """Overlay members a plan needs: VNF hosts (LB members too) and path switch hosts."""
        nodes: list[str] = []
        for inst_id in plan.bindings.values():
            inst = self.vnfm.instances[inst_id]
            nodes.append(inst.host)
            if inst.kind.family is VnfFamily.LB:
                nodes.extend(self.vnfm.instances[m].host for m in inst.config.members)
        compiled = self.controller.compiled.get(plan.request.chain.chain_id)
        if compiled is not None:
            nodes.extend(self.fabric.switches[s].host for s in compiled.path
                         if self.fabric.switches[s].host)
        egress = plan.request.egress
        if isinstance(egress, DeviceRef):
            nodes.append(self.fabric.device_node.get(egress.device_id, egress.device_id))
        return list(dict.fromkeys(n for n in nodes if n))

    def run_overlay_phase(self, plan: OrchestrationPlan) -> int:
        tick = self._now()
        if not self.overlay.created(OverlayId.GATEWAY):
            self.overlay.create_overlay(OverlayId.GATEWAY, self.master, tick)
        cost = 0
        joins = 0
        for node in self.plan_nodes(plan):
            if self.overlay.is_member(node, OverlayId.GATEWAY):
                continue
            cost += self.overlay.join(node, OverlayId.GATEWAY, tick + cost)
            joins += 1
        egress = plan.request.egress
        if isinstance(egress, DeviceRef):
            dev = self.devices.get(egress.device_id)
            if dev is not None and dev.proxy is not None:
                self.overlay.join_via_proxy(dev.id, dev.proxy, OverlayId.GATEWAY, tick + cost)
        plan.phase(PhaseName.OVERLAY).count = joins
        return cost

    def _release(self, plan: OrchestrationPlan) -> None:
        """Undo a plan's footprint, sparing anything another live plan still uses."""
        in_use: dict[str, OrchestrationPlan] = {}  # instance -> a live plan still using it
        chains_in_use: set[str] = set()
        for other in self.plans.values():
            if other is plan or other.status is Status.FAILED:
                continue
            for inst_id in other.bindings.values():
                in_use.setdefault(inst_id, other)
                inst = self.vnfm.instances.get(inst_id)
                if inst is not None and inst.kind.family is VnfFamily.LB:
                    for m in inst.config.members:
                        in_use.setdefault(m, other)
            if other.registered:
                chains_in_use.add(other.request.chain.chain_id)
        if plan.registered and plan.request.chain.chain_id not in chains_in_use:
            self.controller.unregister_chain(plan.request.chain.chain_id)
        plan.registered = False
        for inst_id in reversed(plan.created):
            if inst_id in in_use:
                # the surviving user inherits it, so its own release cleans up later
                heir = in_use[inst_id]
                if inst_id not in heir.created:
                    heir.created.append(inst_id)
            elif self.vnfm.is_active(inst_id):
                self.vnfm.terminate(inst_id)
                self._emit(f"terminate {inst_id}")
        plan.created = []
