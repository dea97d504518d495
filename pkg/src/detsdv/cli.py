"""Command-line driver: validate -> plan -> simulate -> report.

Exit codes are a stable contract: 0 success, 2 input error, 3 admission
rejection, 4 verdict failure. Validation errors print as JSON lines
({code, key_path, message}) so tooling can consume them.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import netsim, plan as plan_mod, report as report_mod
from .descriptors import parse_service_descriptor, parse_topology_descriptor
from .errors import DetsdvError
from .netsim import MetricsReport, SimConfig
from .report import FlowVerdict, Verdict, parse_sim_config, render

log = logging.getLogger("detsdv")

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_REJECTED = 3
EXIT_VERDICT = 4


def _print_error(exc: DetsdvError) -> None:
    print(exc.to_json())


def _read(path: str):
    try:
        return Path(path).read_text()
    except OSError as exc:
        print(json.dumps({"code": "IO", "key_path": path, "message": str(exc)}))
        return None


def _load_inputs(args):
    """Parse all descriptor inputs; returns (services, topology) or None."""
    ok = True
    services = []
    for path in args.service:
        text = _read(path)
        if text is None:
            ok = False
            continue
        try:
            services.append(parse_service_descriptor(text))
        except DetsdvError as exc:
            _print_error(exc)
            ok = False
    topology = None
    if args.topology:
        text = _read(args.topology)
        if text is None:
            ok = False
        else:
            try:
                topology = parse_topology_descriptor(text)
            except DetsdvError as exc:
                _print_error(exc)
                ok = False
    return (services, topology) if ok else None


def cmd_validate(args) -> int:
    loaded = _load_inputs(args)
    if loaded is None:
        return EXIT_INPUT
    services, topology = loaded
    log.info("validated %d service(s)%s", len(services),
             " and topology" if topology else "")
    return EXIT_OK


def cmd_plan(args) -> int:
    loaded = _load_inputs(args)
    if loaded is None or loaded[1] is None or not loaded[0]:
        if loaded is not None:
            print(json.dumps({"code": "SCHEMA", "key_path": "",
                              "message": "plan needs --service and --topology"}))
        return EXIT_INPUT
    services, topology = loaded
    try:
        deployment = plan_mod.build_plan(services, topology)
    except DetsdvError as exc:
        _print_error(exc)
        return EXIT_INPUT

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "placement.json", plan_mod.placement_json(deployment))
    _write_json(out / "tsn_config.json", plan_mod.tsn_json(deployment))
    _write_json(out / "interop.json", plan_mod.interop_json(deployment))
    log.info("plan written to %s", out)
    return EXIT_OK if deployment.all_admitted else EXIT_REJECTED


def cmd_simulate(args) -> int:
    out = Path(args.out)
    tsn_path = out / "tsn_config.json"
    if not tsn_path.exists():
        print(json.dumps({"code": "IO", "key_path": str(tsn_path),
                          "message": "plan artifacts missing; run plan first"}))
        return EXIT_INPUT
    text = _read(args.topology) if args.topology else None
    if text is None:
        print(json.dumps({"code": "SCHEMA", "key_path": "",
                          "message": "simulate needs --topology"}))
        return EXIT_INPUT
    try:
        topology = parse_topology_descriptor(text)
        tsn_doc = json.loads(tsn_path.read_text())
        if args.sim:
            sim_text = _read(args.sim)
            if sim_text is None:
                return EXIT_INPUT
            config = parse_sim_config(sim_text)
        else:
            config = SimConfig()
        if args.seed is not None:
            config.seed = args.seed

        flows = plan_mod.admitted_flows_from_tsn_json(tsn_doc)
        gcls = plan_mod.gcls_from_tsn_json(tsn_doc)
        cbs = plan_mod.cbs_from_tsn_json(tsn_doc)
        frer = plan_mod.frer_from_tsn_json(tsn_doc)
        report, trace = netsim.run(flows, topology, config,
                                   gcls=gcls, frer=frer, cbs=cbs)
    except DetsdvError as exc:
        _print_error(exc)
        return EXIT_INPUT

    with open(out / "trace.ndjson", "w") as fh:
        for record in trace:
            fh.write(json.dumps(record) + "\n")
    _write_json(out / "metrics.json", report.to_dict())

    verdict = _flow_verdicts(flows, report)
    _write_json(out / "verdicts.json",
                {"schema": "v1", "scenarios": [report_mod._verdict_dict(verdict)]})
    log.info("simulation artifacts written to %s", out)
    return EXIT_OK if verdict.passed else EXIT_VERDICT


def _flow_verdicts(flows, report: MetricsReport) -> Verdict:
    """Per-flow pass/fail against the flow's own declared constraints."""
    flow_verdicts = []
    for f in flows:
        m = report.flows.get(f.flow_id)
        observed = {}
        binding = None
        if m is None or (m.created > 0 and m.delivered == 0):
            binding = "no deliveries"
        else:
            observed = {
                "delivered": m.delivered,
                "delivery_ratio": m.delivery_ratio,
                "miss_rate": m.miss_rate,
                "latency_max_us": m.latency_max_us,
                "jitter_us": m.jitter_us,
            }
            if f.max_latency_ns is not None and m.deadline_misses > 0:
                binding = "MaxLatency"
            elif f.delivery and m.created > 0 and m.delivery_ratio < 1.0:
                binding = "Delivery"
            elif f.jitter_ns is not None and m.jitter_us * 1000 > f.jitter_ns:
                binding = "Jitter"
        flow_verdicts.append(FlowVerdict(f.flow_id, binding is None, binding,
                                         observed))
    passed = all(v.passed for v in flow_verdicts)
    return Verdict("run", passed, tuple(flow_verdicts))


def cmd_report(args) -> int:
    out = Path(args.out)
    verdicts_path = out / "verdicts.json"
    metrics_path = out / "metrics.json"
    if not verdicts_path.exists() or not metrics_path.exists():
        print(json.dumps({"code": "IO", "key_path": str(out),
                          "message": "simulation artifacts missing"}))
        return EXIT_INPUT
    doc = json.loads(verdicts_path.read_text())
    metrics_doc = json.loads(metrics_path.read_text())
    verdicts = []
    reports = {}
    for scenario in doc.get("scenarios", []):
        flow_verdicts = tuple(
            FlowVerdict(f["flow"], f["passed"], f.get("binding"),
                        f.get("observed", {}))
            for f in scenario.get("flows", [])
        )
        verdicts.append(Verdict(scenario["scenario"], scenario["passed"],
                                flow_verdicts))
        reports[scenario["scenario"]] = _metrics_from_dict(metrics_doc)
    try:
        sys.stdout.write(render(verdicts, reports, args.format))
    except DetsdvError as exc:
        _print_error(exc)
        return EXIT_INPUT
    return EXIT_OK


def _metrics_from_dict(doc: dict) -> MetricsReport:
    flows = {}
    for fid, m in doc.get("flows", {}).items():
        metrics = netsim.FlowMetrics(
            created=m["created"], delivered=m["delivered"], dropped=m["dropped"],
            deadline_misses=m["deadline_misses"], miss_rate=m["miss_rate"],
            latency_min_us=m["latency_us"]["min"],
            latency_mean_us=m["latency_us"]["mean"],
            latency_max_us=m["latency_us"]["max"],
            jitter_us=m["latency_us"]["jitter"],
            inter_frame_mean_us=m["inter_frame_us"]["mean"],
            inter_frame_max_us=m["inter_frame_us"]["max"],
            frer_eliminated=m["frer_eliminated"],
            delivery_ratio=m["delivery_ratio"],
            observed_rate_hz=m["observed_rate_hz"],
            worst_frame=m["worst_frame"],
        )
        flows[fid] = metrics
    g = doc.get("global", {})
    return MetricsReport(flows, {}, g.get("frames_created", 0),
                         g.get("delivered", 0), g.get("dropped", 0),
                         g.get("in_flight_at_end", 0))


def _write_json(path: Path, doc: dict) -> None:
    path.write_text(json.dumps(doc, indent=2) + "\n")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="detsdv",
        description="Deterministic SDV service planning and TSN simulation")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, topology_required=False):
        p.add_argument("--service", action="append", default=[],
                       help="service descriptor TOML (repeatable)")
        p.add_argument("--topology", required=topology_required,
                       help="topology descriptor TOML")
        p.add_argument("--out", default="out", help="artifact directory")

    p_validate = sub.add_parser("validate", help="validate descriptors")
    add_common(p_validate)
    p_validate.set_defaults(handler=cmd_validate)

    p_plan = sub.add_parser("plan", help="compute a deployment plan")
    add_common(p_plan)
    p_plan.set_defaults(handler=cmd_plan)

    p_sim = sub.add_parser("simulate", help="simulate a written plan")
    add_common(p_sim)
    p_sim.add_argument("--sim", help="simulation config TOML")
    p_sim.add_argument("--seed", type=int, default=None,
                       help="override the simulation seed")
    p_sim.set_defaults(handler=cmd_simulate)

    p_report = sub.add_parser("report", help="render simulation verdicts")
    p_report.add_argument("--out", default="out", help="artifact directory")
    p_report.add_argument("--format", choices=["json", "text", "csv"],
                          default="text")
    p_report.set_defaults(handler=cmd_report)

    args = parser.parse_args(argv)
    logging.basicConfig(level=os.environ.get("DETSDV_LOG", "WARNING").upper())
    return args.handler(args)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
