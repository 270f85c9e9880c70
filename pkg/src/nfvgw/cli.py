"""Command line entry point: ``nfvgw run|scale|compare-orders|upgrade``."""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from .errors import GatewayError
from .sim.config import load_scenario
from .sim.harness import (
    Domain,
    compare_chain_orders,
    gen_scale_topology,
    run_upgrade_scenario,
    write_outputs,
)


def _summary(label: str, report) -> str:
    return (f"{label}: status={report.primary.status} provisioning={report.provisioning_time} "
            f"orchestration={report.orchestration_time} instantiations={report.instantiations} "
            f"e2e={report.e2e_delay}")


def cmd_run(args) -> int:
    cfg = load_scenario(args.scenario)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    dom = Domain(cfg)
    dom.run_apps(cfg.apps)
    report = dom.report()
    if args.out:
        write_outputs(report, dom.log, args.out, dom.trace_text())
    print(_summary(cfg.name, report))
    for app in report.apps[1:]:
        print(f"  {app.app_id}: status={app.status} provisioning={app.provisioning} e2e={app.e2e}")
    if report.error:
        print(f"error: {report.error}", file=sys.stderr)
    if args.serve_plans is not None:
        from .sim.server import PlanApi, make_server

        server = make_server(PlanApi(dom.orchestrator, dom.controller), args.serve_plans)
        print(f"serving /OrchestrationPlan on http://127.0.0.1:{server.server_address[1]}")
        try:
            server.serve_forever()
        except KeyboardInterrupt:
            pass
        finally:
            server.server_close()
    return 1 if report.error else 0


def cmd_scale(args) -> int:
    cfg = gen_scale_topology(args.k)
    dom = Domain(cfg)
    dom.run_apps(cfg.apps)
    report = dom.report()
    write_outputs(report, dom.log, args.out, dom.trace_text())
    print(_summary(cfg.name, report) + f" overlay_nodes={report.overlay_size.get('Gateway')}")
    return 1 if report.error else 0


def cmd_compare(args) -> int:
    cfg = load_scenario(args.scenario)
    a, b = compare_chain_orders(cfg)
    print(_summary("DA-first", a) + f" IMC records={a.invocation('IMC1')}")
    print(_summary("IMC-first", b) + f" IMC records={b.invocation('IMC1')}")
    print(f"same final records: {a.final_records == b.final_records}")
    return 0


def cmd_upgrade(args) -> int:
    cfg = load_scenario(args.scenario)
    fresh, upgrade = run_upgrade_scenario(cfg)
    print(_summary("fresh", fresh))
    print(_summary("upgrade", upgrade))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nfvgw", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario file (or a built-in: earthquake, fire, upgrade)")
    run.add_argument("--scenario", required=True)
    run.add_argument("--seed", type=int)
    run.add_argument("--serve-plans", type=int, metavar="PORT")
    run.add_argument("--out", type=Path)
    run.set_defaults(fn=cmd_run)

    scale = sub.add_parser("scale", help="run the generated scale topology")
    scale.add_argument("--k", type=int, required=True)
    scale.add_argument("--out", type=Path, required=True)
    scale.set_defaults(fn=cmd_scale)

    cmp_ = sub.add_parser("compare-orders", help="DA-first vs IMC-first on one scenario")
    cmp_.add_argument("--scenario", required=True)
    cmp_.set_defaults(fn=cmd_compare)

    up = sub.add_parser("upgrade", help="fresh gateway vs upgraded gateway")
    up.add_argument("--scenario", required=True)
    up.set_defaults(fn=cmd_upgrade)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except GatewayError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
