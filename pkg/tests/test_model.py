import pytest

from nfvgw.errors import InvalidValue
from nfvgw.model import (
    Aggregation,
    AppRequirements,
    CanonicalRecord,
    Capabilities,
    ChainSpec,
    DeviceClass,
    DeviceDescriptor,
    DeviceProps,
    InfoModelKind,
    ProtocolKind,
    VnfFamily,
    VnfKind,
    parse_enum,
    validate_descriptor,
)

COAP_RAW = DeviceProps(ProtocolKind.COAP, InfoModelKind.RAW)


def test_enums_are_closed():
    assert {p.value for p in ProtocolKind} == {"HttpLike", "CoapLike", "LcpLike"}
    assert {m.value for m in InfoModelKind} == {"Raw", "SenmlLike", "SensormlLike", "RobotCmd"}
    assert parse_enum(ProtocolKind, "CoapLike") is ProtocolKind.COAP
    with pytest.raises(InvalidValue):
        parse_enum(ProtocolKind, "XmppLike")
    with pytest.raises(InvalidValue):
        parse_enum(InfoModelKind, "Json")


def test_enum_str_is_the_tag():
    assert str(ProtocolKind.HTTP) == "HttpLike"
    assert str(Aggregation.AVERAGE) == "AverageData"


def test_record_invariants():
    r = CanonicalRecord("t-1", "temperature", "Cel", 21, 3)
    assert r.value == 21.0 and isinstance(r.value, float)
    with pytest.raises(InvalidValue):
        CanonicalRecord("", "temperature", "Cel", 1.0, 0)
    with pytest.raises(InvalidValue):
        CanonicalRecord("t-1", "temperature", "Cel", float("nan"), 0)


def test_app_requirements_reject_raw():
    with pytest.raises(InvalidValue):
        AppRequirements(ProtocolKind.HTTP, InfoModelKind.RAW)
    assert AppRequirements(ProtocolKind.HTTP, InfoModelKind.SENML).aggregation is Aggregation.NONE


def test_class_a_with_proxy_and_no_capacity_is_ok():
    d = DeviceDescriptor("s", DeviceClass.A, COAP_RAW, Capabilities(), proxy="rpi-1")
    assert validate_descriptor(d) == []


def test_class_a_with_capacity_is_a_violation():
    d = DeviceDescriptor("s", DeviceClass.A, COAP_RAW, Capabilities(host_capacity=2), proxy="rpi-1")
    assert validate_descriptor(d) == ["A must have capacity 0"]


def test_class_b_with_proxy_is_a_violation():
    d = DeviceDescriptor("rpi", DeviceClass.B, COAP_RAW, Capabilities(host_capacity=1), proxy="x")
    assert validate_descriptor(d) == ["B must not have proxy"]


def test_validation_reports_every_violation():
    d = DeviceDescriptor("", DeviceClass.A, COAP_RAW,
                         Capabilities(energy_pct=140, host_capacity=3, response_time=-1))
    problems = validate_descriptor(d)
    assert len(problems) == 5
    assert "A must have a proxy" in problems and "A must have capacity 0" in problems


def test_vnf_kind_labels():
    assert VnfKind.parse("IMC2") == VnfKind(VnfFamily.IMC, 2)
    assert str(VnfKind(VnfFamily.PC, 1)) == "PC1"
    for bad in ("IMC0", "XX1", "DA", "da1"):
        with pytest.raises(InvalidValue):
            VnfKind.parse(bad)


def test_chain_spec_rejects_duplicates():
    with pytest.raises(InvalidValue):
        ChainSpec("A", (VnfKind.parse("DA1"), VnfKind.parse("DA1")))
    with pytest.raises(InvalidValue):
        ChainSpec("", ())


def test_chain_reorder_must_be_a_permutation():
    c = ChainSpec("A", tuple(map(VnfKind.parse, ("DA1", "IMC1"))))
    assert c.reordered(map(VnfKind.parse, ("IMC1", "DA1"))).functions == (
        VnfKind.parse("IMC1"), VnfKind.parse("DA1"))
    with pytest.raises(InvalidValue):
        c.reordered([VnfKind.parse("DA1")])
    assert str(c) == "A:[DA1, IMC1]"
