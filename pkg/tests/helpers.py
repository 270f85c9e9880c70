"""Small builders shared by the unit tests."""

from __future__ import annotations

from hypothesis import HealthCheck, settings

from nfvgw.agents import SEEDED_ROWS, classification_for, vnf_agent_decompose
from nfvgw.control import ChainRegistration, SdnController
from nfvgw.envelope import Envelope, RawValues
from nfvgw.fabric import DeviceRef, Fabric
from nfvgw.model import (
    Capabilities,
    DeviceClass,
    DeviceDescriptor,
    DeviceProps,
    InfoModelKind,
    ProtocolKind,
    VnfKind,
)
from nfvgw.orchestrator import PlanRequest
from nfvgw.vnf import (
    DaConfig,
    DaMode,
    GatewayFunctionsStore,
    HostPool,
    VnfManager,
    VnfPackage,
    default_feasibility,
)

# every property suite runs at least this many generated cases
PROPS = settings(max_examples=200, deadline=None,
                 suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large])

ROW1_APP, ROW1_DEV = SEEDED_ROWS[0]
ROW2_APP, ROW2_DEV = SEEDED_ROWS[1]

HTTP_RAW = DeviceProps(ProtocolKind.HTTP, InfoModelKind.RAW)
ALL_KINDS = ("DA1", "IMC1", "IMC2", "IMC3", "PC1", "PC2", "LB1")


def k(label: str) -> VnfKind:
    return VnfKind.parse(label)


def b_device(name: str, capacity: int = 1) -> DeviceDescriptor:
    return DeviceDescriptor(name, DeviceClass.B, HTTP_RAW, Capabilities(host_capacity=capacity))


def a_device(name: str, proxy: str, props: DeviceProps = ROW1_DEV) -> DeviceDescriptor:
    return DeviceDescriptor(name, DeviceClass.A, props, Capabilities(), proxy)


def make_vnfm(devices, kinds=ALL_KINDS) -> VnfManager:
    store = GatewayFunctionsStore(default_feasibility(), [VnfPackage(k(x)) for x in kinds])
    return VnfManager(store, HostPool(devices))


def linear_fabric(n: int = 4, *, vnfm=None, hop_delay: int = 10, proc_cost: int = 5,
                  device: str = "sensor-a", device_switch: str | None = None) -> Fabric:
    """SW1..SWn in a line; SWi (i >= 2) is hosted on rpi-(i-1); ``device`` hangs off the last."""
    switches = [f"SW{i}" for i in range(1, n + 1)]
    links = list(zip(switches, switches[1:]))
    hosts = {"SW1": "fixed-node", **{f"SW{i}": f"rpi-{i - 1}" for i in range(2, n + 1)}}
    last = device_switch or switches[-1]
    return Fabric(switches, links, classifier="SW1", switch_hosts=hosts,
                  device_node={device: f"proxy-{device}"},
                  node_switch={f"proxy-{device}": last},
                  vnfm=vnfm, hop_delay=hop_delay, proc_cost=proc_cost)


def chain_a_setup(hop_delay: int = 10, proc_cost: int = 5):
    """Chain A deployed DA->rpi-1 (SW2), IMC->rpi-2 (SW3), PC->rpi-3 (SW4), compiled and pushed."""
    devices = [b_device(f"rpi-{i}", 2) for i in (1, 2, 3)]
    vnfm = make_vnfm(devices)
    fabric = linear_fabric(4, vnfm=vnfm, hop_delay=hop_delay, proc_cost=proc_cost)
    ctl = SdnController(fabric)
    chain = vnf_agent_decompose(ROW1_APP, ROW1_DEV)
    da = vnfm.instantiate(vnfm.store.lookup(k("DA1")), "rpi-1", DaConfig(DaMode.AVERAGE, window=5))
    imc = vnfm.instantiate(vnfm.store.lookup(k("IMC1")), "rpi-2")
    pc = vnfm.instantiate(vnfm.store.lookup(k("PC1")), "rpi-3")
    reg = ChainRegistration(chain, classification_for(ROW1_APP, ROW1_DEV), "SW1",
                            DeviceRef("sensor-a"))
    compiled = ctl.register_chain(reg)
    return fabric, ctl, vnfm, reg, compiled, (da, imc, pc)


def row1_request(body=None, src: str = "fire-app", dst: str = "sensor-a") -> Envelope:
    env = Envelope.make(ProtocolKind.HTTP, src, dst, body if body is not None else RawValues(()))
    return env.with_requirements(ROW1_APP, ROW1_DEV)


def sensor_batch(env: Envelope, values, device: str = "sensor-a") -> Envelope:
    """The request as it leaves the classifier: device protocol, raw readings, metadata."""
    return (env.with_protocol(ROW1_DEV.protocol).with_body(RawValues(tuple(values)))
            .with_header("device_id", device).with_header("quantity", "temperature")
            .with_header("unit", "Cel").with_header("t0", "0"))


def chain_a_plan_request(window: int = 5, replicas: int = 1) -> PlanRequest:
    chain = vnf_agent_decompose(ROW1_APP, ROW1_DEV)
    return PlanRequest(chain, classification_for(ROW1_APP, ROW1_DEV), "SW1",
                       DeviceRef("sensor-a"), DaConfig(DaMode.AVERAGE, window=window), replicas)
