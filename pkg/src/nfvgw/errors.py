"""Exception hierarchy shared by every module of the gateway."""

from __future__ import annotations


class GatewayError(Exception):
    """Base class for all errors raised by nfvgw."""


# core model -----------------------------------------------------------------

class MalformedEnvelope(GatewayError):
    def __init__(self, position: int, reason: str):
        super().__init__(f"line {position}: {reason}")
        self.position = position
        self.reason = reason


class ChainIdOverwrite(GatewayError):
    def __init__(self, existing: str, attempted: str):
        super().__init__(f"chain_id already set to {existing!r}, refusing {attempted!r}")
        self.existing = existing
        self.attempted = attempted


class InvalidValue(GatewayError, ValueError):
    """A domain value violates one of its invariants."""


# vnf runtime ------------------------------------------------------------------

class FunctionUnavailable(GatewayError):
    def __init__(self, kind: object):
        super().__init__(f"gateway function {kind} is not available")
        self.kind = kind


class InfeasibleConversion(GatewayError):
    def __init__(self, source: object, target: object):
        super().__init__(f"no declared conversion {source} -> {target}")
        self.source = source
        self.target = target


class HostFull(GatewayError):
    def __init__(self, host: str):
        super().__init__(f"host {host} has no free VNF slot")
        self.host = host


class HostNotCapable(GatewayError):
    def __init__(self, host: str):
        super().__init__(f"host {host} cannot host VNFs")
        self.host = host


class UnknownInstance(GatewayError):
    def __init__(self, instance_id: str):
        super().__init__(f"no live VNF instance {instance_id}")
        self.instance_id = instance_id


class EmptyGroup(GatewayError):
    pass


class PlacementInfeasible(GatewayError):
    pass


# flow fabric ------------------------------------------------------------------

class UnknownSwitch(GatewayError):
    def __init__(self, switch_id: str):
        super().__init__(f"unknown switch {switch_id}")
        self.switch_id = switch_id


class DanglingTarget(GatewayError):
    def __init__(self, target: object):
        super().__init__(f"forward target {target} is not reachable from the switch")
        self.target = target


class NoVnfAtHop(GatewayError):
    def __init__(self, instance_id: str):
        super().__init__(f"VNF instance {instance_id} is not active")
        self.instance_id = instance_id


class UnclassifiableRequest(GatewayError):
    pass


class ForeignWriter(GatewayError):
    """A table write came from something other than the owning controller."""


# sdn control ------------------------------------------------------------------

class UnknownIngress(GatewayError):
    pass


class MissingVnf(GatewayError):
    def __init__(self, kind: object):
        super().__init__(f"no active instance of {kind}")
        self.kind = kind


class NoPath(GatewayError):
    pass


# overlay ------------------------------------------------------------------------

class AlreadyCreated(GatewayError):
    pass


class OverlayNotCreated(GatewayError):
    pass


class Unreachable(GatewayError):
    pass


class NotMember(GatewayError):
    def __init__(self, node: str, overlay: object):
        super().__init__(f"{node} is not a member of the {overlay} overlay")
        self.node = node
        self.overlay = overlay


class NotCoLocated(GatewayError):
    pass


class MasterLeft(GatewayError):
    pass


# orchestrator -------------------------------------------------------------------

class InvalidPlanRequest(GatewayError):
    pass


class PlanNotFound(GatewayError):
    pass


class PlanAlreadyRunning(GatewayError):
    pass


# agents -------------------------------------------------------------------------

class NoMatchingDevices(GatewayError):
    pass


# harness ------------------------------------------------------------------------

class ScenarioError(GatewayError):
    pass
