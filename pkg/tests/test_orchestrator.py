from dataclasses import replace

import pytest
from hypothesis import given
from hypothesis import strategies as st

from helpers import PROPS, ROW1_APP, ROW1_DEV, chain_a_plan_request, k
from nfvgw.agents import classification_for
from nfvgw.errors import (
    InvalidPlanRequest,
    InvalidValue,
    PlanAlreadyRunning,
    PlanNotFound,
)
from nfvgw.fabric import AppAddr, DeviceRef
from nfvgw.model import ChainSpec, DeviceClass
from nfvgw.orchestrator import (
    Orchestrator,
    OrchestratorCosts,
    PhaseName,
    PinnedPlacement,
    PlanRequest,
    RandomPlacement,
    Status,
    discover_devices,
    parse_target,
)
from nfvgw.overlay import OverlayId
from nfvgw.sim import load_scenario
from nfvgw.sim.engine import Simulator
from nfvgw.sim.harness import Domain
from nfvgw.vnf import DaConfig, DaMode
from oracles import provisioning, replay_plans

D, C_JOIN = 10, 50
CHAIN_A_PINS = {"DA1": ("rpi-1",), "IMC1": ("rpi-2",), "PC1": ("rpi-3",)}


def make_orch(pins=CHAIN_A_PINS, sim=None, store=None):
    """The fire domain's modules under a standalone orchestrator."""
    cfg = load_scenario("fire")
    if store is not None:
        cfg = replace(cfg, store=tuple(k(x) for x in store))
    dom = Domain(cfg)
    orch = Orchestrator(dom.vnfm, dom.controller, dom.overlay, dom.devices.values(),
                        master=cfg.fixed_node, costs=OrchestratorCosts(D, C_JOIN),
                        placement=PinnedPlacement(pins, RandomPlacement(0)), sim=sim)
    return orch


def state(orch):
    vnfm = orch.vnfm
    return (vnfm.catalogue.snapshot(), orch.fabric.table_snapshot(),
            {h: vnfm.hosts.free(h) for h in ("rpi-1", "rpi-2", "rpi-3")})


def request_for(functions, chain_id="A", window=5, replicas=1):
    chain = ChainSpec(chain_id, tuple(k(f) for f in functions))
    da = DaConfig(DaMode.AVERAGE, window=window) if "DA1" in functions else None
    return PlanRequest(chain, classification_for(ROW1_APP, ROW1_DEV), "SW1",
                       DeviceRef("sensor-a"), da, replicas)


# -- resource API -----------------------------------------------------------------------------

def test_lifecycle():
    orch = make_orch()
    uri = orch.plan_create(chain_a_plan_request())
    assert uri == "/OrchestrationPlan/1"
    plan = orch.plan_get(1)
    assert plan.status is Status.DONE and plan.uri == uri
    assert [p.status for p in plan.phases] == [Status.DONE] * 3
    assert orch.plan_get_all() == [plan]
    with pytest.raises(PlanAlreadyRunning):
        orch.plan_update(1, chain_a_plan_request(window=3))
    with pytest.raises(PlanAlreadyRunning):
        orch.execute(1)
    orch.plan_delete(1)
    with pytest.raises(PlanNotFound):
        orch.plan_get(1)
    with pytest.raises(PlanNotFound):
        orch.plan_delete(1)
    with pytest.raises(PlanNotFound):
        orch.plan_get("nope")


def test_pending_plan_can_be_updated_then_run():
    orch = make_orch()
    orch.plan_create(chain_a_plan_request(), start=False)
    plan = orch.plan_update(1, chain_a_plan_request(window=3))
    assert plan.status is Status.PENDING and plan.request.da_config.window == 3
    orch.execute(1)
    da = orch.vnfm.instances[plan.bindings[k("DA1")]]
    assert da.config.window == 3


def test_delete_restores_the_pre_create_state():
    orch = make_orch()
    before = state(orch)
    orch.plan_create(chain_a_plan_request())
    assert state(orch) != before
    orch.plan_delete(1)
    assert state(orch) == before


def test_plan_document():
    orch = make_orch()
    orch.plan_create(chain_a_plan_request())
    doc = orch.plan_get(1).to_dict()
    assert [p["name"] for p in doc["phases"]] == ["Deploy", "Chain", "OverlayCreate"]
    assert doc["instances"] == ["DA1#1", "IMC1#2", "PC1#3"]
    assert doc["bindings"] == {"DA1": "DA1#1", "IMC1": "IMC1#2", "PC1": "PC1#3"}


def test_request_validation():
    orch = make_orch()
    good = chain_a_plan_request()
    bad = [
        request_for([]),
        PlanRequest(good.chain, good.classification, "SW9", good.egress, good.da_config),
        PlanRequest(good.chain, good.classification, "SW1", good.egress, good.da_config, 0),
        PlanRequest(good.chain, good.classification, "SW1", good.egress, None),
        request_for(["LB1", "IMC1"]),
    ]
    for req in bad:
        with pytest.raises(InvalidPlanRequest):
            orch.plan_create(req)
    assert orch.plans == {} and orch.oplog == []


def test_request_dict_round_trip():
    req = chain_a_plan_request(window=4, replicas=2)
    assert PlanRequest.from_dict(req.to_dict()) == req
    with pytest.raises(InvalidPlanRequest):
        PlanRequest.from_dict({"chain_id": "A"})
    with pytest.raises(InvalidPlanRequest):
        PlanRequest.from_dict({**req.to_dict(), "functions": ["XX1"]})
    with pytest.raises(InvalidPlanRequest):
        PlanRequest.from_dict({**req.to_dict(), "egress": "printer:x"})


def test_parse_target():
    assert parse_target("device:sensor-a") == DeviceRef("sensor-a")
    assert parse_target("app:fire") == AppAddr("fire")
    for bad in ("sensor-a", "device:", "switch:SW1"):
        with pytest.raises(InvalidValue):
            parse_target(bad)


# -- phases ----------------------------------------------------------------------------------

def test_fresh_plan_costs():
    orch = make_orch()
    orch.plan_create(chain_a_plan_request())
    plan = orch.plan_get(1)
    deploy, chain, overlay = plan.phases
    assert plan.instantiations == 3
    assert (deploy.duration, chain.duration, overlay.duration) == (80, 20, 150)
    assert overlay.count == 3
    # phases run back to back
    assert deploy.start == 0 and deploy.end == chain.start and chain.end == overlay.start
    assert plan.orchestration_time == 250
    # six signaling messages are not part of the plan; add them for provisioning
    assert 6 * D + plan.orchestration_time == provisioning(D, C_JOIN, 3, 3) == 310


def test_overlay_members_after_a_plan():
    orch = make_orch()
    orch.plan_create(chain_a_plan_request())
    assert orch.overlay.members(OverlayId.GATEWAY) == {"fixed-node", "rpi-1", "rpi-2", "rpi-3"}
    assert orch.overlay.represents["rpi-3"] == ["sensor-a"]


def test_deploy_counts_fresh_partial_and_full_reuse():
    orch = make_orch()
    orch.plan_create(request_for(["DA1"], chain_id="Z"))
    assert orch.plan_get(1).instantiations == 1
    orch.plan_create(chain_a_plan_request())
    second = orch.plan_get(2)
    assert second.instantiations == 2 and second.bindings[k("DA1")] == "DA1#1"
    assert second.phase(PhaseName.DEPLOY).duration == 2 * D + 2 * D * 2
    orch.plan_create(chain_a_plan_request())
    third = orch.plan_get(3)
    assert third.instantiations == 0
    assert third.phase(PhaseName.DEPLOY).duration == 2 * D
    # nothing new to join: the overlay phase is a no-op
    assert third.phase(PhaseName.OVERLAY).duration == 0
    assert third.phase(PhaseName.OVERLAY).status is Status.DONE


def test_da_with_another_config_is_not_reused():
    orch = make_orch()
    orch.plan_create(request_for(["DA1"], chain_id="Z", window=3))
    orch.plan_create(chain_a_plan_request(window=5))
    assert orch.plan_get(2).instantiations == 3


def test_chain_failure_releases_the_deploy():
    # DA behind IMC on the switch line: the chain would have to turn back
    orch = make_orch(pins={"DA1": ("rpi-2",), "IMC1": ("rpi-1",), "PC1": ("rpi-3",)})
    before = state(orch)
    orch.plan_create(chain_a_plan_request())
    plan = orch.plan_get(1)
    assert plan.status is Status.FAILED
    assert [p.status for p in plan.phases] == [Status.DONE, Status.FAILED, Status.PENDING]
    assert plan.error.startswith("NoPath")
    assert state(orch) == before


def test_missing_package_fails_before_instantiating():
    orch = make_orch(store=("DA1", "IMC1", "LB1"))
    before = state(orch)
    orch.plan_create(chain_a_plan_request())
    plan = orch.plan_get(1)
    assert plan.status is Status.FAILED and plan.error.startswith("FunctionUnavailable")
    assert plan.created == [] and state(orch) == before


def test_replicas_add_a_load_balancer():
    orch = make_orch(pins={"DA1": ("rpi-1", "rpi-2"), "LB:DA1": ("rpi-1",),
                           "IMC1": ("rpi-2",), "PC1": ("rpi-3",)})
    orch.plan_create(chain_a_plan_request(replicas=2))
    plan = orch.plan_get(1)
    assert plan.status is Status.DONE, plan.error
    lb = orch.vnfm.instances[plan.bindings[k("DA1")]]
    assert lb.kind == k("LB1") and len(lb.config.members) == 2


def test_discover_devices():
    orch = make_orch()
    view = orch.discover_devices()
    assert view.ids() == ["rpi-1", "rpi-2", "rpi-3"]
    assert all(d.device_class is DeviceClass.B for d in view.devices)
    assert view.free == {"rpi-1": 2, "rpi-2": 2, "rpi-3": 2}
    orch.plan_create(chain_a_plan_request())
    assert orch.discover_devices().free == {"rpi-1": 1, "rpi-2": 1, "rpi-3": 1}
    assert discover_devices([]).devices == ()


def test_runs_on_the_simulator():
    sim = Simulator()
    orch = make_orch(sim=sim)
    done = []
    orch.plan_create(chain_a_plan_request(), on_done=done.append)
    assert orch.plan_get(1).status is Status.PENDING
    sim.run()
    plan = orch.plan_get(1)
    assert done == [plan] and plan.status is Status.DONE
    assert [(p.start, p.end) for p in plan.phases] == [(0, 80), (80, 100), (100, 250)]
    events = [line.event.split()[0] for line in sim.log.find("orchestrator")]
    assert events[0] == "plan_create" and events.count("phase_done") == 3


def test_delete_while_queued():
    sim = Simulator()
    orch = make_orch(sim=sim)
    before = state(orch)
    orch.plan_create(chain_a_plan_request())
    orch.plan_delete(1)
    sim.run()
    assert state(orch) == before


# -- properties -----------------------------------------------------------------------------

@PROPS
@given(st.lists(st.tuples(st.sampled_from(["create", "delete", "get"]), st.integers(1, 6)),
                max_size=25))
def test_plan_registry_replays_from_its_log(ops):
    orch = make_orch()
    for op, pid in ops:
        if op == "create":
            orch.plan_create(chain_a_plan_request(), start=False)
        elif op == "delete":
            try:
                orch.plan_delete(pid)
            except PlanNotFound:
                assert pid not in orch.plans
        else:
            try:
                assert orch.plan_get(pid).id == pid
            except PlanNotFound:
                assert pid not in orch.plans
        assert set(orch.plans) == replay_plans(orch.oplog)


SUBCHAINS = [("DA1",), ("IMC1",), ("DA1", "IMC1"), ("IMC1", "PC1"), ("DA1", "IMC1", "PC1")]


@PROPS
@given(st.lists(st.tuples(st.sampled_from(SUBCHAINS), st.sampled_from([3, 5])),
                min_size=1, max_size=4),
       st.randoms(use_true_random=False))
def test_deleting_every_plan_is_a_full_inverse(plans, rnd):
    orch = make_orch()
    before = state(orch)
    for i, (fns, window) in enumerate(plans):
        orch.plan_create(request_for(fns, chain_id=f"C{i}", window=window))
    ids = list(orch.plans)
    rnd.shuffle(ids)
    for pid in ids:
        orch.plan_delete(pid)
        # shared instances survive as long as a live plan still binds them
        for other in orch.plans.values():
            if other.status is Status.DONE:
                assert all(orch.vnfm.is_active(i) for i in other.bindings.values())
    assert state(orch) == before
