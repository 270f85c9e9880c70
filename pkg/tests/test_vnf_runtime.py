import pytest
from hypothesis import given
from hypothesis import strategies as st

from helpers import PROPS, a_device, b_device, k, make_vnfm
from nfvgw.envelope import Envelope, RawValues, Records
from nfvgw.errors import (
    FunctionUnavailable,
    HostFull,
    HostNotCapable,
    InvalidValue,
    NoVnfAtHop,
    UnknownInstance,
)
from nfvgw.model import CanonicalRecord, InfoModelKind, ProtocolKind, VnfFamily
from nfvgw.vnf import (
    DaConfig,
    DaMode,
    GatewayFunctionsStore,
    InstanceState,
    LbConfig,
    VnfPackage,
    default_feasibility,
)
from oracles import replay_catalogue

AVG = DaConfig(DaMode.AVERAGE, window=5)


def test_store_lookup():
    vnfm = make_vnfm([])
    assert vnfm.store.lookup(k("DA1")).kind == k("DA1")


def test_lookup_on_empty_store():
    store = GatewayFunctionsStore(default_feasibility())
    with pytest.raises(FunctionUnavailable):
        store.lookup(k("DA1"))


def test_lookup_of_an_infeasible_pair():
    vnfm = make_vnfm([])
    with pytest.raises(FunctionUnavailable):
        vnfm.store.lookup_conversion(VnfFamily.PC, ProtocolKind.LCP, ProtocolKind.COAP)
    assert vnfm.store.lookup_conversion(VnfFamily.PC, ProtocolKind.HTTP, ProtocolKind.COAP).kind \
        == k("PC1")
    with pytest.raises(FunctionUnavailable):
        vnfm.store.lookup(k("IMC9"))  # on-boarded or not, no declared pair


def test_store_versions_and_removal():
    store = GatewayFunctionsStore(default_feasibility(), [VnfPackage(k("DA1"), "1.0")])
    store.onboard(VnfPackage(k("DA1"), "2.0"))
    assert store.lookup(k("DA1")).version == "2.0"
    with pytest.raises(InvalidValue):
        store.onboard(VnfPackage(k("DA1"), "2.0"))
    store.remove(k("DA1"))
    with pytest.raises(FunctionUnavailable):
        store.lookup(k("DA1"))


def test_catalogue_check_after_chain_b():
    vnfm = make_vnfm([b_device("rpi-1", 2)])
    assert vnfm.catalogue.check(k("DA1")) is None
    vnfm.instantiate(vnfm.store.lookup(k("DA1")), "rpi-1", AVG)
    imc2 = vnfm.instantiate(vnfm.store.lookup(k("IMC2")), "rpi-1")
    assert vnfm.catalogue.check(k("IMC2")) is imc2
    vnfm.terminate(imc2.instance_id)
    assert vnfm.catalogue.check(k("IMC2")) is None


def test_check_can_require_a_config():
    vnfm = make_vnfm([b_device("rpi-1")])
    da = vnfm.instantiate(vnfm.store.lookup(k("DA1")), "rpi-1", AVG)
    assert vnfm.catalogue.check(k("DA1"), AVG) is da
    assert vnfm.catalogue.check(k("DA1"), DaConfig(DaMode.THRESHOLD, 50)) is None


def test_instantiate_uses_capacity():
    vnfm = make_vnfm([b_device("rpi-1", 1)])
    inst = vnfm.instantiate(vnfm.store.lookup(k("DA1")), "rpi-1", AVG)
    assert inst.state is InstanceState.ACTIVE
    assert vnfm.hosts.free("rpi-1") == 0
    with pytest.raises(HostFull):
        vnfm.instantiate(vnfm.store.lookup(k("IMC1")), "rpi-1")


def test_class_a_cannot_host():
    vnfm = make_vnfm([b_device("rpi-1"), a_device("sensor", "rpi-1")])
    with pytest.raises(HostNotCapable):
        vnfm.instantiate(vnfm.store.lookup(k("IMC1")), "sensor")
    with pytest.raises(HostNotCapable):
        vnfm.instantiate(vnfm.store.lookup(k("IMC1")), "nowhere")


def test_configs_are_checked():
    vnfm = make_vnfm([b_device("rpi-1", 3)])
    with pytest.raises(InvalidValue):
        vnfm.instantiate(vnfm.store.lookup(k("DA1")), "rpi-1")
    with pytest.raises(InvalidValue):
        vnfm.instantiate(vnfm.store.lookup(k("LB1")), "rpi-1")
    assert vnfm.hosts.free("rpi-1") == 3  # nothing leaked


def test_terminate_restores_capacity_and_is_not_repeatable():
    vnfm = make_vnfm([b_device("rpi-1", 1)])
    inst = vnfm.instantiate(vnfm.store.lookup(k("IMC1")), "rpi-1")
    vnfm.terminate(inst.instance_id)
    assert vnfm.hosts.free("rpi-1") == 1
    assert inst.state is InstanceState.TERMINATED
    with pytest.raises(UnknownInstance):
        vnfm.terminate(inst.instance_id)
    with pytest.raises(NoVnfAtHop):
        vnfm.invoke(inst.instance_id, Envelope.make(ProtocolKind.HTTP, "a", "b", RawValues(())))


def raw_env(values, protocol=ProtocolKind.COAP):
    return Envelope.make(protocol, "app", "sensor-a", RawValues(tuple(values)),
                         device_id="sensor-a", quantity="temperature", unit="Cel", t0="0")


def test_invoke_counts_calls_and_records():
    vnfm = make_vnfm([b_device("rpi-1", 3)])
    da = vnfm.instantiate(vnfm.store.lookup(k("DA1")), "rpi-1", AVG)
    imc = vnfm.instantiate(vnfm.store.lookup(k("IMC1")), "rpi-1")
    pc = vnfm.instantiate(vnfm.store.lookup(k("PC1")), "rpi-1")
    r1 = vnfm.invoke(da.instance_id, raw_env([61.5, 62, 63.5, 65, 68]))
    assert r1.work == 5 and r1.env.body.records[0].value == 64.0
    r2 = vnfm.invoke(imc.instance_id, r1.env)
    assert r2.env.body.model is InfoModelKind.SENML and r2.work == 1
    r3 = vnfm.invoke(pc.instance_id, r2.env)
    assert r3.env.protocol is ProtocolKind.HTTP
    assert (da.calls, da.records, imc.records, pc.records) == (1, 5, 1, 1)


def test_threshold_da_can_filter_everything():
    vnfm = make_vnfm([b_device("rpi-1")])
    da = vnfm.instantiate(vnfm.store.lookup(k("DA1")), "rpi-1", DaConfig(DaMode.THRESHOLD, 100))
    assert vnfm.invoke(da.instance_id, raw_env([1, 2])).env is None


def test_da_keeps_the_body_model():
    vnfm = make_vnfm([b_device("rpi-1", 2)])
    imc = vnfm.instantiate(vnfm.store.lookup(k("IMC1")), "rpi-1")
    da = vnfm.instantiate(vnfm.store.lookup(k("DA1")), "rpi-1", DaConfig(DaMode.THRESHOLD, 50))
    senml = vnfm.invoke(imc.instance_id, raw_env([10, 20, 30, 40, 60])).env
    out = vnfm.invoke(da.instance_id, senml).env
    assert out.body.model is InfoModelKind.SENML
    # IMC1 is invertible: SenML back to records
    assert vnfm.invoke(imc.instance_id, out).env.body == Records(
        (CanonicalRecord("sensor-a", "temperature", "Cel", 60.0, 4),))


def test_lb_spreads_over_its_members():
    vnfm = make_vnfm([b_device(f"h{i}") for i in range(4)])
    members = [vnfm.instantiate(vnfm.store.lookup(k("IMC1")), f"h{i}").instance_id for i in range(3)]
    lb = vnfm.instantiate(vnfm.store.lookup(k("LB1")), "h3", LbConfig(k("IMC1"), tuple(members)))
    visited = [vnfm.invoke(lb.instance_id, raw_env([1.0])).visited for _ in range(6)]
    assert all(v[0] == lb.instance_id for v in visited)
    chosen = [v[1] for v in visited]
    assert chosen == members + members
    res = vnfm.invoke(lb.instance_id, raw_env([1.0]))
    assert res.extra_hops == 2


@PROPS
@given(st.lists(st.tuples(st.sampled_from(["inst", "term"]), st.integers(0, 3),
                          st.sampled_from(["DA1", "IMC1", "IMC2", "PC1"])), max_size=40))
def test_catalogue_replay_and_capacity_conservation(ops):
    hosts = [b_device(f"h{i}", 2) for i in range(4)]
    vnfm = make_vnfm(hosts)
    total = sum(h.capabilities.host_capacity for h in hosts)
    log = []
    for op, h, kind in ops:
        if op == "inst":
            cfg = AVG if kind == "DA1" else None
            try:
                inst = vnfm.instantiate(vnfm.store.lookup(k(kind)), f"h{h}", cfg)
            except HostFull:
                assert vnfm.hosts.free(f"h{h}") == 0
                continue
            log.append(("inst", inst.instance_id, kind, inst.host))
        else:
            live = sorted(vnfm.catalogue.snapshot())
            if not live:
                with pytest.raises(UnknownInstance):
                    vnfm.terminate("DA1#999")
                continue
            victim = live[h % len(live)][0]
            vnfm.terminate(victim)
            log.append(("term", victim))
        assert vnfm.catalogue.snapshot() == replay_catalogue(log)
        free = sum(vnfm.hosts.free(d.id) for d in hosts)
        assert free + len(vnfm.catalogue) == total
        assert all(i.state is InstanceState.ACTIVE for i in vnfm.catalogue)
