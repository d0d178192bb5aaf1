"""Command-line driver: check, emit, dump-states, dump-enum, graph."""

import argparse
import hashlib
import json
import os
import sys
import time

from . import __version__
from .checker import build_state_graph, check_all, model_from_is
from .errors import DmcError, StateBudgetExceededError, ValidationFailure
from .formulas import render_formula
from .isbuilder import assemble, crosscheck, dump_is_json, translate_config
from .ispl import emit as emit_ispl
from .netspec import render_network
from .parser import load_network
from .semantics import DEFAULT_MAX_STATES, explore

EXIT_OK = 0
EXIT_FALSIFIED = 1
EXIT_COMPILE_ERROR = 2
EXIT_BUDGET = 3


def _parse_amplitudes(text):
    return tuple(complex(tok) for tok in text.split(","))


def _input_qubit_overrides(net, specs):
    """--input-qubit q1=a,b,...: replace the declaration containing q1."""
    out = {}
    for spec in specs or ():
        q, _, amps = spec.partition("=")
        q = q.strip()
        decl = next(
            (qi for qi in net.spec.qubits if q in qi.qubits), None
        )
        if decl is None:
            raise DmcError(f"--input-qubit: unknown qubit {q}")
        values = _parse_amplitudes(amps)
        if len(values) != 2 ** len(decl.qubits):
            raise DmcError(
                f"--input-qubit: {q} needs {2 ** len(decl.qubits)} amplitudes"
            )
        out[decl.qubits] = values
    return out


def _load(path):
    with open(path, encoding="utf-8") as fh:
        return load_network(fh.read())


def _pipeline(args):
    net = _load(args.file)
    overrides = _input_qubit_overrides(net, getattr(args, "input_qubit", None))
    t0 = time.perf_counter()
    graph = explore(
        net,
        max_states=args.max_states,
        initial_states=overrides or None,
        shuffle_seed=getattr(args, "seed_order", None),
    )
    t_explore = time.perf_counter() - t0
    return net, graph, t_explore


def cmd_check(args):
    net, graph, t_explore = _pipeline(args)

    t0 = time.perf_counter()
    is_ = assemble(net, graph)
    t_assemble = time.perf_counter() - t0

    xreport = None
    t_cross = 0.0
    if not args.no_crosscheck:
        t0 = time.perf_counter()
        xreport = crosscheck(graph, is_)
        t_cross = time.perf_counter() - t0

    t0 = time.perf_counter()
    sg = build_state_graph(is_, max_states=args.max_states)
    names = {}
    for i in range(len(graph.nodes)):
        names[translate_config(is_, graph, i)] = graph.node_name(i)
    state_names = [names.get(st, f"S{k}") for k, st in enumerate(sg.states)]
    model = model_from_is(is_, sg, state_names)
    report = check_all(model, net.spec.formulas)
    t_check = time.perf_counter() - t0

    if args.dump_is:
        with open(args.dump_is, "w", encoding="utf-8") as fh:
            fh.write(dump_is_json(is_))

    canonical = render_network(net.spec)
    run_report = {
        "schema": 1,
        "tool_version": __version__,
        "network": net.spec.name,
        "input_digest": hashlib.sha256(canonical.encode()).hexdigest(),
        "reachable_states": len(sg.states),
        "transitions": len(graph.edges),
        "initial_states": len(graph.initials),
        "quantum_registry_size": len(graph.registry),
        "quantum_registry": graph.registry.names(),
        "formulas": [
            {
                "text": render_formula(r.formula),
                "verdict": r.verdict,
                "satisfying_count": len(r.satisfying),
                "witness": r.witness,
                "seconds": round(r.seconds, 6),
            }
            for r in report.results
        ],
        "crosscheck": xreport.to_dict() if xreport else None,
        "timings": {
            "explore_s": round(t_explore, 6),
            "assemble_s": round(t_assemble, 6),
            "crosscheck_s": round(t_cross, 6),
            "check_s": round(t_check, 6),
        },
    }

    if args.report_dir:
        _write_report_dir(args.report_dir, net, graph, run_report)

    if args.json:
        print(json.dumps(run_report, indent=2))
    else:
        print(
            f"network {net.spec.name}: {len(sg.states)} states, "
            f"{len(graph.edges)} transitions, "
            f"{len(graph.registry)} quantum states"
        )
        if xreport:
            status = "ok" if xreport.ok else "MISMATCH"
            print(f"crosscheck: {status} "
                  f"({len(xreport.mismatches)} mismatches)")
        for r in report.results:
            mark = "T" if r.verdict else "F"
            print(f"  [{mark}] {render_formula(r.formula)}")
            if r.witness is not None:
                print(f"      witness: {json.dumps(r.witness)}")

    if xreport and not xreport.ok:
        print("crosscheck failed", file=sys.stderr)
        return EXIT_FALSIFIED
    return EXIT_OK if report.all_true else EXIT_FALSIFIED


def _write_report_dir(directory, net, graph, run_report):
    from .plotting import config_graph_figure

    os.makedirs(directory, exist_ok=True)
    with open(os.path.join(directory, "report.json"), "w",
              encoding="utf-8") as fh:
        json.dump(run_report, fh, indent=2)
        fh.write("\n")
    with open(os.path.join(directory, "registry.csv"), "w",
              encoding="utf-8") as fh:
        fh.write(graph.registry.to_csv())
    with open(os.path.join(directory, "graph.dot"), "w",
              encoding="utf-8") as fh:
        fh.write(graph.to_dot())
    config_graph_figure(
        graph, os.path.join(directory, "graph.png")
    )


def cmd_emit(args):
    net, graph, _ = _pipeline(args)
    is_ = assemble(net, graph)
    text = emit_ispl(is_)
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_dump_states(args):
    net, graph, _ = _pipeline(args)
    from .semantics import config_summary

    for i in range(len(graph.nodes)):
        star = "*" if i in graph.initials else " "
        print(f"{star}{graph.node_name(i)}: {config_summary(graph, i)}")
    return EXIT_OK


def cmd_dump_enum(args):
    net, graph, _ = _pipeline(args)
    text = graph.registry.to_csv()
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_graph(args):
    net, graph, _ = _pipeline(args)
    text = graph.to_dot()
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if args.fig:
        from .plotting import config_graph_figure

        config_graph_figure(graph, args.fig)
    return EXIT_OK


def build_arg_parser():
    p = argparse.ArgumentParser(
        prog="dmcverify",
        description="Compile and verify distributed measurement-based "
                    "quantum protocols.",
    )
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("file", help="protocol source file")
        sp.add_argument("--max-states", type=int, default=DEFAULT_MAX_STATES)
        sp.add_argument(
            "--input-qubit", action="append", metavar="Q=AMPS",
            help="override initial amplitudes, e.g. q1=0.6,0.8",
        )
        sp.add_argument(
            "--seed-order", type=int, default=None,
            help="shuffle exploration order (results must not change)",
        )

    sp = sub.add_parser("check", help="model-check the protocol's formulas")
    common(sp)
    sp.add_argument("--json", action="store_true", help="JSON report to stdout")
    sp.add_argument("--no-crosscheck", action="store_true")
    sp.add_argument("--dump-is", metavar="PATH",
                    help="write the interpreted system as JSON")
    sp.add_argument("--report-dir", metavar="DIR",
                    help="write report.json, registry.csv, graph.dot and "
                         "graph.png into DIR")
    sp.set_defaults(func=cmd_check)

    sp = sub.add_parser("emit", help="emit ISPL for the external checker")
    common(sp)
    sp.add_argument("-o", "--output")
    sp.set_defaults(func=cmd_emit)

    sp = sub.add_parser("dump-states", help="list reachable configurations")
    common(sp)
    sp.set_defaults(func=cmd_dump_states)

    sp = sub.add_parser("dump-enum", help="write the quantum-state registry CSV")
    common(sp)
    sp.add_argument("-o", "--output")
    sp.set_defaults(func=cmd_dump_enum)

    sp = sub.add_parser("graph", help="write the configuration graph as DOT")
    common(sp)
    sp.add_argument("-o", "--output")
    sp.add_argument("--fig", metavar="PNG", help="also render a figure")
    sp.set_defaults(func=cmd_graph)
    return p


def main(argv=None):
    parser = build_arg_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_COMPILE_ERROR
    except ValidationFailure as exc:
        for e in exc.errors:
            print(f"error: {e}", file=sys.stderr)
        return EXIT_COMPILE_ERROR
    except StateBudgetExceededError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except DmcError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_COMPILE_ERROR


if __name__ == "__main__":
    sys.exit(main())
