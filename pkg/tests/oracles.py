"""Independent reference computations the tests compare the implementation against.

Nothing here imports the code under test beyond plain data types, so a bug in a
module cannot hide by being mirrored in its oracle.
"""

from __future__ import annotations

import math
from collections import deque


# -- graphs ---------------------------------------------------------------------------------

def simple_paths(adj: dict[str, set[str]], a: str, b: str):
    """Every simple path from a to b, by exhaustive DFS."""
    stack = [(a, (a,))]
    while stack:
        node, path = stack.pop()
        if node == b:
            yield path
            continue
        for n in adj.get(node, ()):
            if n not in path:
                stack.append((n, path + (n,)))


def brute_shortest_path(adj: dict[str, set[str]], a: str, b: str) -> tuple[str, ...] | None:
    """Fewest hops, ties broken by the lexicographically smallest switch sequence."""
    best = None
    for p in simple_paths(adj, a, b):
        if best is None or (len(p), p) < (len(best), best):
            best = p
    return best


def waypoint_path(adj, points: list[str]) -> tuple[str, ...] | None:
    """Concatenate brute-force shortest paths through consecutive waypoints."""
    path = (points[0],)
    for nxt in points[1:]:
        seg = brute_shortest_path(adj, path[-1], nxt)
        if seg is None:
            return None
        path += seg[1:]
    return path


# -- flow tables -----------------------------------------------------------------------------

def _predicate_holds(match, headers: dict[str, str], protocol: str) -> bool:
    if match.app_level_src is not None and headers.get("app_level_src") != match.app_level_src:
        return False
    if match.app_level_dst is not None and headers.get("app_level_dst") != match.app_level_dst:
        return False
    if match.chain_id is not None and headers.get("chain_id") != match.chain_id:
        return False
    if match.protocol is not None and protocol != match.protocol.value:
        return False
    if match.app_requirements is not None:
        a = match.app_requirements
        want = (a.protocol.value, a.info_model.value, a.aggregation.value)
        got = (headers.get("app_protocol"), headers.get("app_info_model"),
               headers.get("app_aggregation"))
        if want != got:
            return False
    if match.device_props is not None:
        d = match.device_props
        if (d.protocol.value, d.info_model.value) != (headers.get("dev_protocol"),
                                                      headers.get("dev_info_model")):
            return False
    return True


def walk_tables(tables: dict[str, tuple], ingress: str, headers: dict[str, str],
                protocol: str, max_steps: int = 64):
    """Follow installed entries from ``ingress``; returns (switches, vnf visits, final target).

    Tables must already be in match order (the snapshot order). VNFs are treated as
    pass-through, which is all steering cares about.
    """
    headers = dict(headers)
    switches, visits = [], []
    sw = ingress
    for _ in range(max_steps):
        switches.append(sw)
        entry = next((e for e in tables[sw] if _predicate_holds(e.match, headers, protocol)), None)
        if entry is None:
            return switches, visits, None
        onward = None
        for act in entry.actions:
            name = type(act).__name__
            if name == "InsertChainId":
                if headers.get("chain_id", act.chain_id) != act.chain_id:
                    raise AssertionError("overwrite during walk")
                headers["chain_id"] = act.chain_id
            elif type(act.target).__name__ == "VnfRef":
                visits.append(act.target.instance_id)
            else:
                onward = act.target
        if type(onward).__name__ != "SwitchRef":
            return switches, visits, onward
        sw = onward.switch_id
    raise AssertionError("walk did not terminate")


# -- registries ------------------------------------------------------------------------------

def replay_catalogue(ops) -> frozenset:
    """ops: ("inst", id, kind, host) | ("term", id); returns live (id, kind, host)."""
    live = {}
    for op in ops:
        if op[0] == "inst":
            live[op[1]] = (op[1], op[2], op[3])
        else:
            live.pop(op[1], None)
    return frozenset(live.values())


def replay_membership(log) -> dict[str, set[str]]:
    """log of (overlay, event, node) with events create/join/leave."""
    members: dict[str, set[str]] = {}
    for overlay, event, node in log:
        if event == "create":
            members[overlay] = {node}
        elif event == "join":
            members[overlay].add(node)
        elif event == "leave":
            members[overlay].discard(node)
    return members


def replay_plans(oplog) -> set[int]:
    alive: set[int] = set()
    for op, pid in oplog:
        if op == "create":
            alive.add(pid)
        elif op == "delete":
            alive.discard(pid)
    return alive


def cross_overlay_reachable(gateway: set[str], application: set[str], src: str, dst: str) -> bool:
    """BFS over (node, overlay) states: move inside an overlay, or switch at a shared node."""
    members = {"G": gateway, "A": application}
    start, goal = (src, "G"), (dst, "A")
    if src not in gateway or dst not in application:
        return False
    seen, queue = {start}, deque([start])
    while queue:
        node, ov = queue.popleft()
        if (node, ov) == goal:
            return True
        nxt = [(m, ov) for m in members[ov]]
        other = "A" if ov == "G" else "G"
        if node in members[other]:
            nxt.append((node, other))
        for s in nxt:
            if s not in seen:
                seen.add(s)
                queue.append(s)
    return False


# -- arithmetic ------------------------------------------------------------------------------

def mean(values) -> float:
    values = list(values)
    return math.fsum(values) / len(values)


def chain_a_e2e(d: int, p: int, readings: int) -> int:
    """Hand-derived forwarding-plane delay of the fire request.

    SW1->SW2, SW2->SW3, SW3->SW4 and SW4->device are four hops; each of the three
    VNFs costs a 2-hop detour; DA touches every reading, IMC and PC the single
    averaged record; the reply crosses two overlay hops (proxy->bridge->app).
    """
    return 4 * d + 3 * 2 * d + p * (readings + 1 + 1) + 2 * d


def provisioning(d: int, c_join: int, missing_groups: int, joins: int) -> int:
    """Six control messages, deploy, chain push and the sequential overlay joins."""
    return 6 * d + (2 * d + 2 * d * missing_groups) + 2 * d + c_join * joins
