"""Command-line front end.

Exit codes: 0 success, 1 usage or configuration error, 2 infeasible input,
3 internal numeric failure, 130 interrupted.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .exceptions import (DisconnectedError, ModelError, OptimizationError, SimplificationError,
                         SimulationError, SingularSystemError)
from .io import (load_netlist, netlist_to_dict, read_json, read_waveform_csv, save_netlist, to_dot,
                 write_waveform_csv)
from .model import DesignModel, MetaTopology, generate_grid
from .netlist import ComponentGraph, as_component_graph
from .runner import resolve_config, run_design
from .simplify import SimplifyThresholds, simplify_fixpoint
from .simulator import SimConfig, transient

log = logging.getLogger("topoforge")

EXIT_OK, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_NUMERIC, EXIT_INTERRUPTED = 0, 1, 2, 3, 130


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


class UsageError(Exception):
    pass


def _topology_dot(topo: MetaTopology) -> str:
    lines = ['graph "topology" {']
    b = topo.boundary
    lines.append(f'  "{b.source_pos}" -- "{b.source_neg}" [label="Source"];')
    lines.append(f'  "{b.load_pos}" -- "{b.load_neg}" [label="Load"];')
    for eid, a, bb in topo.edges:
        lines.append(f'  "{a}" -- "{bb}" [label="U{eid}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def _circuit(path) -> ComponentGraph:
    obj = load_netlist(path)
    if isinstance(obj, MetaTopology):
        raise UsageError(f"{path} holds a bare topology without edge states")
    return as_component_graph(obj)


def cmd_gen_grid(args) -> int:
    topo = generate_grid(args.rows, args.cols)
    out = args.out or Path(args.out_dir or ".") / f"grid-{args.rows}x{args.cols}.json"
    save_netlist(topo, out)
    print(out)
    return EXIT_OK


def cmd_simulate(args) -> int:
    circuit = _circuit(args.netlist)
    cfg = SimConfig(t_end=args.t_end, dt=args.dt, integrator=args.integrator)
    wave = transient(circuit, cfg)
    if args.out:
        write_waveform_csv(wave, args.out)
    else:
        print("t,v")
        for t, v in zip(wave.times, wave.samples):
            print(f"{t!r},{v!r}")
    return EXIT_OK


def cmd_simplify(args) -> int:
    g = _circuit(args.netlist)
    eps = 1e-5
    src = load_netlist(args.netlist)
    if isinstance(src, DesignModel):
        eps = src.epsilon
    th = SimplifyThresholds.for_epsilon(eps)
    th = SimplifyThresholds(args.r_short_below or th.r_short_below, args.c_open_below or th.c_open_below,
                            args.g_open_below or th.g_open_below)
    out = simplify_fixpoint(g, th)
    if args.out:
        save_netlist(out, args.out)
    else:
        print(json.dumps(netlist_to_dict(out), indent=2))
    return EXIT_OK


def cmd_export_dot(args) -> int:
    obj = load_netlist(args.netlist)
    text = _topology_dot(obj) if isinstance(obj, MetaTopology) else to_dot(as_component_graph(obj),
                                                                            Path(args.netlist).stem)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_design(args) -> int:
    file_cfg = read_json(args.config) if args.config else {}
    flags = {
        "algorithm": args.algorithm,
        "runs": args.runs,
        "workers": args.workers,
        "seed": args.seed,
        "relax": {"max_outer": args.max_outer,
                  "inner": {"max_evaluations": args.max_evaluations} if args.max_evaluations else None},
        "search": {"n_s": args.n_s, "n_o": args.n_o, "c_th": args.c_th, "c_th_relative": args.c_th_relative,
                   "inner": {"max_evaluations": args.max_evaluations} if args.max_evaluations else None},
    }
    if args.algorithm != "search":
        flags.pop("search")
    if args.algorithm != "relax":
        flags.pop("relax")
    if args.c_th is not None and "c_th_relative" in file_cfg.get("search", {}):
        file_cfg["search"].pop("c_th_relative")
    cfg = resolve_config(file_cfg, flags)
    template = load_netlist(args.netlist) if args.netlist else None
    if isinstance(template, ComponentGraph):
        raise UsageError("design needs a grid netlist, not a component list")
    target = read_waveform_csv(args.target)
    out_dir = Path(args.out_dir or "design-out")
    report = run_design(cfg, template, target, out_dir, target_path=str(args.target),
                        workers=cfg.get("workers"), log=log.info)
    print(out_dir / "report.json")
    if report["best"] is not None:
        return EXIT_OK
    errors = [r["error"] for r in report["runs"] if r["error"]]
    log.warning("no run produced a design: %s", "; ".join(errors))
    return max((_exit_for(e) for e in errors), default=EXIT_OK)


def _exit_for(error: str) -> int:
    """Exit code for a run error recorded in the report."""
    kind = error.split(":", 1)[0]
    if kind in ("DisconnectedError", "SingularSystemError", "SearchError", "SimplificationError"):
        return EXIT_INFEASIBLE
    if kind in ("NonFiniteError", "KCLViolationError", "OptimizationError", "SimulationError"):
        return EXIT_NUMERIC
    # e.g. the search finished but no design met the threshold
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="topoforge", description="Analog circuit topology synthesis on switched grids.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="master seed (default 0)")
    common.add_argument("--workers", type=int, default=None, help="worker processes (default: all cores)")
    common.add_argument("--config", type=Path, default=None, help="JSON run configuration")
    common.add_argument("--out-dir", type=Path, default=None, help="output directory")

    g = sub.add_parser("gen-grid", parents=[common], help="write a rows x cols grid topology")
    g.add_argument("rows", type=int)
    g.add_argument("cols", type=int)
    g.add_argument("-o", "--out", type=Path)
    g.set_defaults(func=cmd_gen_grid)

    s = sub.add_parser("simulate", parents=[common], help="simulate a netlist, write a t,v CSV")
    s.add_argument("netlist", type=Path)
    s.add_argument("-o", "--out", type=Path)
    s.add_argument("--t-end", type=float, default=SimConfig.t_end)
    s.add_argument("--dt", type=float, default=SimConfig.dt)
    s.add_argument("--integrator", choices=("Trapezoidal", "BackwardEuler"), default="Trapezoidal")
    s.set_defaults(func=cmd_simulate)

    d = sub.add_parser("design", parents=[common], help="run relaxation or random search")
    d.add_argument("algorithm", choices=("relax", "search"))
    d.add_argument("netlist", type=Path, nargs="?", help="grid netlist (omit to use the config grid)")
    d.add_argument("--target", type=Path, required=True, help="target waveform CSV (t,v)")
    d.add_argument("--runs", type=int, default=None, help="independent relaxation runs")
    d.add_argument("--max-outer", type=int, default=None)
    d.add_argument("--max-evaluations", type=int, default=None, help="objective budget per inner optimization")
    d.add_argument("--n-s", type=int, default=None)
    d.add_argument("--n-o", type=int, default=None)
    d.add_argument("--c-th", type=float, default=None, help="absolute cost threshold")
    d.add_argument("--c-th-relative", type=float, default=None, help="threshold as a fraction of target power")
    d.set_defaults(func=cmd_design)

    m = sub.add_parser("simplify", parents=[common], help="simplify a netlist to a fixpoint")
    m.add_argument("netlist", type=Path)
    m.add_argument("-o", "--out", type=Path)
    m.add_argument("--r-short-below", type=float, default=None)
    m.add_argument("--c-open-below", type=float, default=None)
    m.add_argument("--g-open-below", type=float, default=None)
    m.set_defaults(func=cmd_simplify)

    x = sub.add_parser("export-dot", parents=[common], help="write a netlist as a DOT graph")
    x.add_argument("netlist", type=Path)
    x.add_argument("-o", "--out", type=Path)
    x.set_defaults(func=cmd_export_dot)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except KeyboardInterrupt:
        print("interrupted", file=sys.stderr)
        return EXIT_INTERRUPTED
    except (DisconnectedError, SingularSystemError) as exc:
        print(f"infeasible: {exc.reason}: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (SimulationError, OptimizationError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except SimplificationError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (UsageError, ModelError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
