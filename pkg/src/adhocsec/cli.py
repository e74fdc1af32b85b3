"""Command line front end: ``adhocsec run|tree|validate SCENARIO``.

Exit codes: 0 success, 1 input error (unreadable or invalid scenario),
2 runtime error (partitioned topology).
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from typing import Optional

from .scenario import Scenario, ScenarioError, format_seconds, parse_scenario, parse_seconds
from .sim import Metrics, run, throughput_series
from .topology import PartitionError, build_mst, build_radio_graph, neighbor_table

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_RUNTIME = 2

CSV_HEADER = "window_start,sent_pkts,recv_pkts,sent_bytes,recv_bytes"


def emit_metrics_csv(metrics: Metrics, window: Optional[int] = None) -> str:
    lines = [CSV_HEADER]
    for r in throughput_series(metrics, window):
        lines.append(f"{format_seconds(r.window_start)},{r.sent_pkts},{r.recv_pkts},"
                     f"{r.sent_bytes},{r.recv_bytes}")
    return "\n".join(lines) + "\n"


def _load(path: str) -> Scenario:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ScenarioError(f"cannot read {path}: {exc.strerror or exc}") from None
    return parse_scenario(text)


def _write(path: str, text: str):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def cmd_run(args, out=sys.stdout) -> int:
    scenario = _load(args.scenario)
    if args.seed is not None:
        scenario = replace(scenario, seed=args.seed)
    window = parse_seconds(args.window)
    if window <= 0:
        raise ScenarioError("--window must be positive")
    result = run(scenario, window=window)
    # everything is rendered before any file is touched
    trace = result.trace_text()
    csv_text = emit_metrics_csv(result.metrics, window)
    if args.trace:
        _write(args.trace, trace)
    if args.metrics:
        _write(args.metrics, csv_text)
    s = result.summary()
    print(f"nodes: {s['nodes']} (departed {s['departed']})", file=out)
    print(f"tree edges: {s['tree_edges']}", file=out)
    print(f"sends: {s['sends']}", file=out)
    print(f"deliveries: {s['deliveries']}", file=out)
    print(f"drops: {s['drops']}", file=out)
    for reason, count in sorted(result.metrics.drops.items()):
        print(f"  {reason}: {count}", file=out)
    return EXIT_OK


def cmd_tree(args, out=sys.stdout) -> int:
    scenario = _load(args.scenario)
    graph = build_radio_graph({n.id: n.position for n in scenario.nodes}, scenario.range)
    tree = build_mst(graph)
    for i, j in tree.sorted_edges():
        print(f"edge {i} {j} {tree.weights[(i, j)]:.6f}", file=out)
    for n in sorted(tree.nodes):
        nbrs = " ".join(map(str, sorted(neighbor_table(tree, n).neighbors)))
        print(f"neighbors {n}: {nbrs}".rstrip(), file=out)
    print(f"total_weight {tree.total_weight:.6f}", file=out)
    return EXIT_OK


def cmd_validate(args, out=sys.stdout) -> int:
    scenario = _load(args.scenario)
    print(f"ok: {len(scenario.nodes)} nodes, {len(scenario.script)} actions", file=out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="adhocsec", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="simulate a scenario, write trace and metrics")
    p.add_argument("scenario")
    p.add_argument("--trace", metavar="PATH", help="write the event trace here")
    p.add_argument("--metrics", metavar="PATH", help="write the throughput CSV here")
    p.add_argument("--window", default="1", metavar="T", help="CSV window width in seconds (default 1)")
    p.add_argument("--seed", type=int, default=None, metavar="N", help="override the scenario seed")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("tree", help="print the spanning tree and neighbor tables")
    p.add_argument("scenario")
    p.set_defaults(func=cmd_tree)

    p = sub.add_parser("validate", help="parse and validate a scenario")
    p.add_argument("scenario")
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    args = build_parser().parse_args(argv)
    try:
        return args.func(args, out=out)
    except (ScenarioError, ValueError) as exc:
        if isinstance(exc, PartitionError):
            print(f"error: {exc}", file=err)
            return EXIT_RUNTIME
        print(f"error: {args.scenario}: {exc}", file=err)
        return EXIT_INPUT
    except OSError as exc:
        print(f"error: {exc}", file=err)
        return EXIT_RUNTIME


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
