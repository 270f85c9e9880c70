"""Scenario runner: builds a simulated domain, provisions each application and pushes
its data through the chain, then reports simulated-time metrics."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, replace
from pathlib import Path

from ..agents import (
    ApplicationAgent,
    ControlChannel,
    DeviceRepository,
    ProviderAgent,
    ServiceAvailable,
    ServiceRequest,
    ServiceUnavailable,
    VnfAgent,
    app_contact_classifier,
    is_actuator,
)
from ..control import SdnController
from ..envelope import EncodedText, Envelope, RawValues, Records, RobotCommand
from ..errors import GatewayError, ScenarioError
from ..fabric import AppAddr, DeviceRef, Emission, Fabric, SwitchRef, VnfRef
from ..model import (
    Aggregation,
    AppRequirements,
    CanonicalRecord,
    Capabilities,
    DeviceClass,
    DeviceDescriptor,
    DeviceProps,
    InfoModelKind,
    ProtocolKind,
    VnfFamily,
    VnfKind,
)
from ..orchestrator import (
    Orchestrator,
    OrchestratorCosts,
    PhaseName,
    PinnedPlacement,
    RandomPlacement,
)
from ..overlay import OverlayId, OverlayNet
from ..vnf import GatewayFunctionsStore, HostPool, VnfManager, VnfPackage
from ..vnf.functions import META_DEVICE, META_QUANTITY, META_T0, META_UNIT, to_records
from .config import AppConfig, DeviceData, ScenarioConfig
from .engine import EventLog, Simulator

CSV_HEADER = ("metric", "phase", "value_ticks", "count")


# -- report -----------------------------------------------------------------------------------

@dataclass
class AppMetrics:
    app_id: str
    status: str = "pending"          # available / unavailable / error
    reason: str = ""
    chain_id: str | None = None
    plan_uri: str | None = None
    provisioning: int | None = None
    phases: dict[str, tuple[int, int]] = field(default_factory=dict)  # phase -> (ticks, count)
    e2e: int | None = None
    records: tuple[CanonicalRecord, ...] = ()
    commands: tuple[RobotCommand, ...] = ()

    @property
    def orchestration(self) -> int | None:
        if not self.phases:
            return None
        return sum(t for t, _ in self.phases.values())


@dataclass
class MetricsReport:
    scenario: str
    seed: int
    apps: list[AppMetrics]                # primary app first
    invocations: dict[str, int]           # kind -> records processed
    calls: dict[str, int]                 # kind -> invocations
    messages: dict[str, int]
    overlay_size: dict[str, int]
    instances_live: int = 0
    flow_entries: int = 0
    error: str | None = None

    @property
    def primary(self) -> AppMetrics:
        return self.apps[0]

    @property
    def provisioning_time(self) -> int | None:
        return self.primary.provisioning

    @property
    def orchestration_time(self) -> int | None:
        return self.primary.orchestration

    def phase_time(self, phase: PhaseName | str) -> int:
        return self.primary.phases.get(str(phase), (0, 0))[0]

    @property
    def instantiations(self) -> int:
        return self.primary.phases.get(str(PhaseName.DEPLOY), (0, 0))[1]

    @property
    def e2e_delay(self) -> int | None:
        return self.primary.e2e

    @property
    def final_records(self) -> tuple[CanonicalRecord, ...]:
        return self.primary.records

    def invocation(self, kind: str) -> int:
        return self.invocations.get(kind, 0)

    def rows(self) -> list[tuple[str, str, str, str]]:
        def cell(v):
            return "" if v is None else str(v)

        rows = []
        for i, app in enumerate(self.apps):
            pre = "" if i == 0 else f"{app.app_id}."
            rows.append((f"{pre}service", app.status, "", "1"))
            rows.append((f"{pre}provisioning", "total", cell(app.provisioning), ""))
            rows.append((f"{pre}orchestration", "total", cell(app.orchestration), ""))
            for name in PhaseName:
                if str(name) in app.phases:
                    ticks, count = app.phases[str(name)]
                    rows.append((f"{pre}orchestration", _phase_key(name), str(ticks), str(count)))
            rows.append((f"{pre}e2e", "total", cell(app.e2e),
                         str(len(app.records) or len(app.commands))))
        for kind in sorted(self.invocations):
            rows.append(("invocations", kind, "", str(self.invocations[kind])))
        for kind in sorted(self.calls):
            rows.append(("calls", kind, "", str(self.calls[kind])))
        for msg in sorted(self.messages):
            rows.append(("messages", msg, "", str(self.messages[msg])))
        for oid in sorted(self.overlay_size):
            rows.append(("overlay_size", oid, "", str(self.overlay_size[oid])))
        rows.append(("residual", "instances", "", str(self.instances_live)))
        rows.append(("residual", "flow_entries", "", str(self.flow_entries)))
        if self.error:
            rows.append(("error", self.error, "", "1"))
        return rows

    def csv_text(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        w.writerows(self.rows())
        return buf.getvalue()


def _phase_key(name: PhaseName) -> str:
    return {PhaseName.DEPLOY: "deploy", PhaseName.CHAIN: "chain",
            PhaseName.OVERLAY: "overlay"}[name]


def emit_report(report: MetricsReport, path: str | Path) -> None:
    if not report.apps:
        raise ScenarioError("refusing to write an empty report")
    Path(path).write_text(report.csv_text(), encoding="utf-8")


# -- the simulated domain ---------------------------------------------------------------------

class Domain:
    """Every module of one scenario run, wired together on one simulator."""

    def __init__(self, cfg: ScenarioConfig):
        self.cfg = cfg
        self.log = EventLog()
        self.sim = Simulator(self.log)
        d = cfg.hop_delay
        devices = list(cfg.devices)
        self.devices = {dev.id: dev for dev in devices}
        store = GatewayFunctionsStore(cfg.feasibility, [VnfPackage(k) for k in cfg.store])
        self.vnfm = VnfManager(store, HostPool(devices))

        switch_hosts = dict(cfg.switch_hosts)
        node_switch = dict(cfg.attachments)
        device_node = {}
        for dev in devices:
            device_node[dev.id] = dev.proxy or dev.id
        self.fabric = Fabric(cfg.switches, cfg.links, classifier=cfg.classifier,
                             switch_hosts=switch_hosts, node_switch=node_switch,
                             device_node=device_node, vnfm=self.vnfm,
                             hop_delay=d, proc_cost=cfg.proc_cost)
        self.controller = SdnController(self.fabric)

        nodes = {cfg.fixed_node, cfg.app_host, *self.devices, *switch_hosts.values()}
        capable = {dev.id for dev in devices if dev.device_class is DeviceClass.B}
        capable.add(cfg.fixed_node)
        self.overlay = OverlayNet(sorted(nodes), capable=capable, hop_delay=d, c_join=cfg.c_join)

        if cfg.placement == "pinned":
            placement = PinnedPlacement(dict(cfg.pins), RandomPlacement(cfg.seed))
        else:
            placement = RandomPlacement(cfg.seed)
        self.orchestrator = Orchestrator(self.vnfm, self.controller, self.overlay, devices,
                                         master=cfg.fixed_node,
                                         costs=OrchestratorCosts(d, cfg.c_join),
                                         placement=placement, sim=self.sim)
        self.channel = ControlChannel(self.sim, d)
        self.vnf_agent = VnfAgent("vnf-agent", self.channel, self.orchestrator,
                                  feasibility=cfg.feasibility, retry_after=cfg.retry_after)
        self.provider = ProviderAgent("provider-agent", self.channel,
                                      DeviceRepository(devices), self.vnf_agent)
        self.app_agent = ApplicationAgent("app-agent", self.channel, self.provider)
        self.metrics: dict[str, AppMetrics] = {}
        self.hops: dict[str, list[str]] = {}  # app -> forwarding-plane steps, in order
        self._batch: dict[str, str] = {}        # sensor batch step, logged after the push
        self.error: str | None = None

    # -- application lifecycle ----------------------------------------------------------------

    def start_app(self, app: AppConfig, then=None) -> None:
        m = self.metrics.setdefault(app.app_id, AppMetrics(app.app_id))
        ov = self.overlay
        delay = 0
        if not ov.created(OverlayId.APPLICATION):
            ov.create_overlay(OverlayId.APPLICATION, self.cfg.app_host, self.sim.now)
            delay = ov.join(self.cfg.fixed_node, OverlayId.APPLICATION, self.sim.now)
            self.sim.emit("overlay", f"application overlay up, bridge={self.cfg.fixed_node}")
        req = ServiceRequest(app.app_id, app.requirements, app.devices, app.threshold,
                             app.window, app.replicas, app.order)

        def notified(note) -> None:
            m.provisioning = self.sim.now - self.app_agent.requested_at[app.app_id]
            if isinstance(note, ServiceUnavailable):
                m.status, m.reason = "unavailable", note.reason
                self.sim.emit(app.app_id, f"service unavailable retry_after={note.retry_after}")
                if then:
                    then()
                return
            m.status, m.chain_id, m.plan_uri = "available", note.chain_id, note.plan_uri
            plan = self.orchestrator.plan_get(int(note.plan_uri.rsplit("/", 1)[1]))
            m.phases = {str(p.name): (p.duration, p.count) for p in plan.phases}
            self.sim.emit(app.app_id, f"service available chain={note.chain_id} via {note.classifier}")
            self.contact_classifier(app, note, req, then)

        self.sim.schedule(delay, self.app_agent.request_service, req, notified)

    def contact_classifier(self, app: AppConfig, note: ServiceAvailable, req, then) -> None:
        dev = self.devices[app.devices[0]]
        body = None
        if app.command is not None:
            body = EncodedText(app.requirements.info_model, app.command)
        env = app_contact_classifier(app.app_id, note, req, dev, body)
        self.sim.emit(app.app_id, f"request -> {note.classifier}")
        self.hops[app.app_id] = [f"{app.app_id}->{note.classifier}"]
        self.sim.schedule(self.cfg.hop_delay, self.at_classifier, app, env, then)

    def at_classifier(self, app: AppConfig, env: Envelope, then) -> None:
        dev = self.devices[app.devices[0]]
        if not is_actuator(dev.props):
            # the device's current batch travels with the request from the classifier on
            data = self.cfg.data_for(dev.id)
            env = (env.with_protocol(dev.props.protocol)
                   .with_body(RawValues(data.readings))
                   .with_header(META_DEVICE, dev.id)
                   .with_header(META_QUANTITY, data.quantity)
                   .with_header(META_UNIT, data.unit)
                   .with_header(META_T0, "0"))
            self.sim.emit(dev.id, f"batch of {len(data.readings)} joins request at {self.fabric.classifier}")
            self._batch[app.app_id] = f"{dev.id}=>{self.fabric.classifier}"
        started = self.sim.now
        self.at_switch(self.fabric.classifier, env, app, started, then)

    def at_switch(self, switch_id: str, env: Envelope, app: AppConfig, started: int, then) -> None:
        before = len(self.fabric.trace)
        out = self.fabric.process_packet(switch_id, env, self.sim.now)
        lines = self.fabric.trace[before:]
        self.sim.emit(switch_id, f"chain={env.chain_id or '-'} {';'.join(t.action for t in lines)}")
        self.hops[app.app_id].extend(self._hop_steps(switch_id, lines, app.app_id))
        if not out:
            self.finish(app, None, started, then)
            return
        for em in out:
            self.sim.schedule(em.delay, self.arrive, em, app, started, then)

    def _hop_steps(self, switch_id: str, lines, app_id: str) -> list[str]:
        steps = []
        for t in lines:
            verb, _, arg = t.action.partition(":")
            if verb == "insert":
                steps.append(f"{switch_id}:push {arg}")
                if app_id in self._batch:
                    steps.append(self._batch.pop(app_id))
            elif verb == "vnf":
                kind = self.vnfm.instances[arg].kind
                steps += [f"{switch_id}->{kind}", f"{kind}->{switch_id}"]
            elif verb == "filtered":
                steps.append(f"{self.vnfm.instances[arg].kind}:filtered")
            elif verb == "forward":
                steps.append(f"{switch_id}->{arg}")
            else:
                steps.append(f"{switch_id}:{verb}")
        return steps

    def arrive(self, em: Emission, app: AppConfig, started: int, then) -> None:
        target = em.target
        if isinstance(target, SwitchRef):
            self.at_switch(target.switch_id, em.env, app, started, then)
        elif isinstance(target, DeviceRef):
            node = self.overlay.node_for(target.device_id)
            self.sim.emit(node, f"reached {target.device_id} chain={em.env.chain_id}")
            if isinstance(em.env.body, RobotCommand):
                self.finish(app, em.env, started, then)
                return
            # the proxy answers through the gateway overlay, bridged into the application overlay
            msg = self.overlay.send(node, OverlayId.GATEWAY, self.cfg.app_host,
                                    OverlayId.APPLICATION, em.env)
            self.sim.emit(node, "reply " + " ".join(msg.trace))
            self.hops[app.app_id].extend(msg.trace)
            self.sim.schedule(self.overlay.delay(msg), self.deliver_app, msg, app, started, then)
        elif isinstance(target, AppAddr):
            self.finish(app, em.env, started, then)
        else:
            raise ScenarioError(f"stray emission to {target}")

    def deliver_app(self, msg, app: AppConfig, started: int, then) -> None:
        self.overlay.deliver(msg)
        self.hops[app.app_id].append(f"{msg.dst}->{app.app_id}")
        self.finish(app, msg.payload, started, then)

    def finish(self, app: AppConfig, env: Envelope | None, started: int, then) -> None:
        m = self.metrics[app.app_id]
        m.e2e = self.sim.now - started
        if env is not None:
            if isinstance(env.body, RobotCommand):
                m.commands = (env.body,)
            elif isinstance(env.body, (Records, EncodedText)):
                m.records = tuple(to_records(env.body))
        self.sim.emit(app.app_id, f"delivered records={len(m.records)} commands={len(m.commands)}")
        if then:
            then()

    # -- top level ----------------------------------------------------------------------------

    def run_apps(self, apps) -> None:
        queue = list(apps)

        def next_app():
            if queue:
                self.start_app(queue.pop(0), next_app)

        next_app()
        try:
            self.sim.run()
        except GatewayError as exc:
            self.error = f"{type(exc).__name__}: {exc}"
            self.sim.emit("harness", f"error {self.error}")
            for app in apps:
                m = self.metrics.setdefault(app.app_id, AppMetrics(app.app_id))
                if m.status == "pending":
                    m.status = "error"
                    m.reason = self.error

    def report(self, primary: str | None = None) -> MetricsReport:
        order = [a.app_id for a in self.cfg.apps if a.app_id in self.metrics]
        if primary is not None:
            order.remove(primary)
            order.insert(0, primary)
        invocations: dict[str, int] = {}
        calls: dict[str, int] = {}
        for inst in self.vnfm.instances.values():
            invocations[str(inst.kind)] = invocations.get(str(inst.kind), 0) + inst.records
            calls[str(inst.kind)] = calls.get(str(inst.kind), 0) + inst.calls
        sizes = {str(o): len(self.overlay.members(o)) for o in OverlayId if self.overlay.created(o)}
        entries = sum(len(sw.table) for sw in self.fabric.switches.values())
        return MetricsReport(self.cfg.name, self.cfg.seed, [self.metrics[a] for a in order],
                             invocations, calls, dict(self.channel.counts), sizes,
                             len(self.vnfm.catalogue), entries, self.error)

    def trace_text(self) -> str:
        return "".join(f"{line}\n" for line in self.fabric.trace)


def run_scenario(cfg: ScenarioConfig, primary: str | None = None,
                 domain: Domain | None = None) -> tuple[MetricsReport, EventLog]:
    if not cfg.apps:
        raise ScenarioError("scenario defines no application")
    dom = domain or Domain(cfg)
    dom.run_apps(cfg.apps)
    return dom.report(primary), dom.log


def run_upgrade_scenario(cfg: ScenarioConfig) -> tuple[MetricsReport, MetricsReport]:
    """Fresh arm: only the last app on an empty domain. Upgrade arm: earlier apps first."""
    if not cfg.apps:
        raise ScenarioError("scenario defines no application")
    target = cfg.apps[-1]
    fresh, _ = run_scenario(replace(cfg, apps=(target,)))
    upgrade, _ = run_scenario(cfg, primary=target.app_id)
    return fresh, upgrade


def da_last_order(cfg: ScenarioConfig, app: AppConfig) -> tuple[VnfKind, ...]:
    from ..agents import vnf_agent_decompose

    dev = cfg.devices[[d.id for d in cfg.devices].index(app.devices[0])]
    chain = vnf_agent_decompose(app.requirements, dev.props, cfg.feasibility)
    fns = list(chain.functions)
    da = [k for k in fns if k.family is VnfFamily.DA]
    imc = [k for k in fns if k.family is VnfFamily.IMC]
    if not da or not imc:
        raise ScenarioError("chain-order comparison needs both a DA and an IMC")
    fns.remove(da[0])
    fns.insert(fns.index(imc[0]) + 1, da[0])
    return tuple(fns)


def compare_chain_orders(cfg: ScenarioConfig) -> tuple[MetricsReport, MetricsReport]:
    """(DA before IMC, IMC before DA) for the first application of ``cfg``."""
    app = cfg.apps[0]
    da_first = replace(app, order=None)
    imc_first = replace(app, order=da_last_order(cfg, app))
    a, _ = run_scenario(replace(cfg, apps=(da_first,)))
    b, _ = run_scenario(replace(cfg, apps=(imc_first,)))
    return a, b


# -- generated scale family -------------------------------------------------------------------

def gen_scale_topology(k: int, *, hop_delay: int = 10, proc_cost: int = 5,
                       c_join: int = 50, seed: int = 0) -> ScenarioConfig:
    """k replicas each of DA and IMC on a line of 2k+1 switches, one LB per group when k >= 2.

    Every VNF, LB and switch sits on its own node, so the gateway overlay ends up with
    2k + LBs + (2k + 1) members (the classifier switch runs on the fixed node, the master).
    """
    if k < 1:
        raise ScenarioError("k must be >= 1")
    n_sw = 2 * k + 1
    switches = tuple(f"SW{i}" for i in range(1, n_sw + 1))
    links = tuple((switches[i], switches[i + 1]) for i in range(n_sw - 1))
    fixed = "fixed-node"
    switch_hosts = [("SW1", fixed)] + [(f"SW{i}", f"sw-host-{i}") for i in range(2, n_sw + 1)]
    http_raw = DeviceProps(ProtocolKind.HTTP, InfoModelKind.RAW)
    devices = [DeviceDescriptor(h, DeviceClass.B, http_raw, Capabilities(host_capacity=0))
               for _, h in switch_hosts[1:]]
    attach = []
    pins: dict[str, tuple[str, ...]] = {}
    for fam, first_sw in (("da", 2), ("imc", k + 2)):
        hosts = []
        for j in range(1, k + 1):
            h = f"{fam}-host-{j}"
            hosts.append(h)
            attach.append((h, f"SW{first_sw + j - 1}"))
            devices.append(DeviceDescriptor(h, DeviceClass.B, http_raw, Capabilities(host_capacity=1)))
        kind = "DA1" if fam == "da" else "IMC1"
        pins[kind] = tuple(hosts)
        if k >= 2:
            lb = f"lb-{fam}"
            attach.append((lb, f"SW{first_sw}"))
            devices.append(DeviceDescriptor(lb, DeviceClass.B, http_raw, Capabilities(host_capacity=1)))
            pins[f"LB:{kind}"] = (lb,)
    last_host = switch_hosts[-1][1]
    devices.append(DeviceDescriptor("sound-1", DeviceClass.A, http_raw, Capabilities(), last_host))
    app = AppConfig("scale-app",
                    AppRequirements(ProtocolKind.HTTP, InfoModelKind.SENML, Aggregation.THRESHOLD),
                    ("sound-1",), threshold=50.0, replicas=k)
    return ScenarioConfig(
        name=f"scale-k{k}", seed=seed, hop_delay=hop_delay, proc_cost=proc_cost, c_join=c_join,
        switches=switches, links=links, classifier="SW1", fixed_node=fixed,
        switch_hosts=tuple(switch_hosts), attachments=tuple(attach), devices=tuple(devices),
        device_data=(("sound-1", DeviceData("sound", "dB", (10.0, 20.0, 30.0, 40.0, 60.0))),),
        store=tuple(VnfKind.parse(s) for s in ("DA1", "IMC1", "LB1")),
        apps=(app,), placement="pinned", pins=tuple(pins.items()), scale_k=k)


def scale_node_count(cfg: ScenarioConfig) -> int:
    """Overlay nodes the generated family is built from: VNF/LB hosts plus switch hosts."""
    vnf_hosts = {h for _, hosts in cfg.pins for h in hosts}
    return len(vnf_hosts) + len(cfg.switches)


def write_outputs(report: MetricsReport, log: EventLog, out_dir: str | Path,
                  trace: str | None = None) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    emit_report(report, out / "metrics.csv")
    (out / "events.log").write_text(log.text(), encoding="utf-8")
    if trace is not None:
        (out / "trace.log").write_text(trace, encoding="utf-8")
    return out
