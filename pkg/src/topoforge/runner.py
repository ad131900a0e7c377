"""Batch design runs: configuration, seeding, fan-out and reports.

All randomness comes from one integer seed. Relaxation run ``i`` draws its
initial parameters from ``SeedSequence(seed).spawn(runs)[i]``; the search
uses ``SeedSequence(seed)`` directly.
"""
from __future__ import annotations

import copy
import datetime as _dt
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from .exceptions import ModelError, SearchError, SimplificationError, TopoforgeError
from .io import (RELAX_TRACE_HEADER, REPORT_FORMAT, SEARCH_TRACE_HEADER, json_number, save_netlist,
                 validate, write_dot, write_json, write_rows_csv)
from .model import DesignModel, MetaTopology, ParameterBounds, generate_grid, initial_relaxed_model
from .netlist import as_component_graph
from .powell import OptimizerConfig
from .relaxation import RelaxationConfig, realize_switches, run_relaxation
from .search import SearchConfig, run_search
from .simplify import SimplifyThresholds, simplify_fixpoint
from .simulator import SimConfig, Waveform

DEFAULT_CONFIG = {
    "algorithm": "relax",
    "runs": 1,
    "seed": 0,
    "relax": {},
    "search": {},
}


def merge_config(base: dict, override: dict) -> dict:
    """Recursive dict merge; ``None`` values in ``override`` are skipped."""
    out = copy.deepcopy(base)
    for k, v in override.items():
        if v is None:
            continue
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = merge_config(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def resolve_config(file_cfg: dict | None = None, flags: dict | None = None) -> dict:
    """Defaults, then the config file, then command-line flags; validated."""
    cfg = merge_config(DEFAULT_CONFIG, file_cfg or {})
    cfg = merge_config(cfg, flags or {})
    validate(cfg, "config")
    return cfg


def _optimizer(d: dict | None, base: OptimizerConfig) -> OptimizerConfig:
    return replace(base, **(d or {}))


def _bounds(cfg: dict) -> ParameterBounds:
    return ParameterBounds(**{k: tuple(v) for k, v in cfg.get("bounds", {}).items()})


def _thresholds(cfg: dict, epsilon: float) -> SimplifyThresholds:
    base = SimplifyThresholds.for_epsilon(epsilon)
    return replace(base, **cfg.get("thresholds", {}))


def sim_config(cfg: dict, target: Waveform) -> SimConfig:
    """Simulation grid of the target unless the config overrides it."""
    d = {"t_end": target.t_end, "dt": target.dt}
    d.update(cfg.get("sim", {}))
    return SimConfig(**d)


def relaxation_config(cfg: dict, sim: SimConfig) -> RelaxationConfig:
    r = dict(cfg.get("relax", {}))
    inner = _optimizer(r.pop("inner", None), RelaxationConfig().inner)
    polish = _optimizer(r.pop("polish"), inner) if "polish" in r else None
    return RelaxationConfig(inner=inner, polish=polish, bounds=_bounds(cfg), sim=sim, **r)


def search_config(cfg: dict, sim: SimConfig, target: Waveform, epsilon: float) -> SearchConfig:
    s = dict(cfg.get("search", {}))
    inner = _optimizer(s.pop("inner", None), SearchConfig().inner)
    rel = s.pop("c_th_relative", None)
    if rel is not None:
        if "c_th" in s:
            raise ModelError("give either c_th or c_th_relative, not both")
        s["c_th"] = rel * target.mean_square()
    return SearchConfig(seed=int(cfg.get("seed", 0)), inner=inner, bounds=_bounds(cfg), sim=sim,
                        thresholds=_thresholds(cfg, epsilon), **s)


def _scenario(template) -> dict:
    if isinstance(template, DesignModel):
        return {"source": template.source, "load_resistance": template.load_resistance,
                "epsilon": template.epsilon}
    return {}


def _topology(template, cfg: dict) -> MetaTopology:
    if template is None:
        g = cfg.get("grid")
        if g is None:
            raise ModelError("no netlist given and no grid in the configuration")
        return generate_grid(g["rows"], g["cols"])
    if isinstance(template, DesignModel):
        return template.topology
    if isinstance(template, MetaTopology):
        return template
    raise ModelError("design needs a grid netlist (kind 'design'), not a component list")


def _counts(graph) -> dict:
    c = graph.counts()
    return {"R": c["R"], "L": c["L"], "C": c["C"]}


def _export_design(model, out: Path, thresholds) -> dict:
    out.mkdir(parents=True, exist_ok=True)
    realized = realize_switches(model) if model.is_relaxed else as_component_graph(model)
    try:
        simplified = simplify_fixpoint(realized, thresholds)
    except SimplificationError:
        # e.g. a near-zero resistor across the load; keep the unsimplified netlist
        simplified = realized
    save_netlist(model, out / "design.json")
    save_netlist(realized, out / "realized.json")
    save_netlist(simplified, out / "simplified.json")
    write_dot(simplified, out / "simplified.dot", name=out.name)
    return {"realized": realized, "simplified": simplified}


def _relax_task(args):
    i, child, topo, scenario, target, rcfg = args
    t0 = time.perf_counter()
    try:
        model0 = initial_relaxed_model(topo, np.random.default_rng(child), rcfg.bounds, **scenario)
        model, trace = run_relaxation(model0, target, rcfg)
        return {"run": i, "model": model, "trace": trace, "error": None,
                "wall_time": time.perf_counter() - t0, "nvars0": trace.nvars[0] if trace.nvars else 0}
    except TopoforgeError as exc:
        return {"run": i, "model": None, "trace": None, "error": f"{type(exc).__name__}: {exc}",
                "wall_time": time.perf_counter() - t0}


def run_design(cfg: dict, template, target: Waveform, out_dir, *, target_path: str = "",
               workers: int | None = None, log=None) -> dict:
    """Run the configured algorithm, write artifacts under ``out_dir`` and
    return the (already written and validated) report."""
    t_start = time.perf_counter()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if target.t0 != 0.0:
        raise ModelError("target waveform must start at t = 0")
    topo = _topology(template, cfg)
    scenario = _scenario(template)
    epsilon = scenario.get("epsilon", 1e-5)
    sim = sim_config(cfg, target)
    thresholds = _thresholds(cfg, epsilon)
    workers = workers or cfg.get("workers") or os.cpu_count() or 1
    log = log or (lambda msg: None)
    seed = int(cfg.get("seed", 0))
    runs = []
    interrupted = False
    if cfg["algorithm"] == "relax":
        rcfg = relaxation_config(cfg, sim)
        children = np.random.SeedSequence(seed).spawn(int(cfg.get("runs", 1)))
        tasks = [(i, ch, topo, scenario, target, rcfg) for i, ch in enumerate(children)]
        results = []
        pool = None
        try:
            if workers > 1 and len(tasks) > 1:
                pool = ProcessPoolExecutor(max_workers=min(workers, len(tasks)))
                results.extend(pool.map(_relax_task, tasks))
            else:
                for t in tasks:
                    results.append(_relax_task(t))
        except KeyboardInterrupt:
            interrupted = True
        finally:
            if pool is not None:
                pool.shutdown(wait=not interrupted, cancel_futures=True)
        done = {r["run"] for r in results}
        results += [{"run": i, "model": None, "trace": None, "error": "interrupted", "wall_time": 0.0}
                    for i in range(len(tasks)) if i not in done]
        for res in results:
            i = res["run"]
            entry = {"run": i, "seed": [seed, i], "status": "failed", "error": res["error"],
                     "trace_csv": None, "final_cost": None, "designs": [], "wall_time": res["wall_time"]}
            if res["error"] is None:
                run_dir = out / f"run-{i:03d}"
                trace = res["trace"]
                write_rows_csv(run_dir / "trace.csv", RELAX_TRACE_HEADER, trace.rows())
                ex = _export_design(res["model"], run_dir, thresholds)
                entry.update(status="ok", trace_csv=str((run_dir / "trace.csv").relative_to(out)),
                             initial_cost=json_number(trace.initial_cost),
                             final_cost=json_number(trace.final_cost),
                             nvars_initial=int(res["nvars0"]), nvars_final=int(trace.final_nvars),
                             outer_iterations=len(trace.records))
                entry["designs"] = [{
                    "design": str((run_dir / "design.json").relative_to(out)),
                    "cost": json_number(trace.final_cost),
                    "counts": _counts(ex["simplified"]),
                    "realized": str((run_dir / "realized.json").relative_to(out)),
                    "simplified": str((run_dir / "simplified.json").relative_to(out)),
                    "dot": str((run_dir / "simplified.dot").relative_to(out)),
                }]
                log(f"run {i}: cost {trace.final_cost:.3e}, {trace.final_nvars} variables")
            else:
                log(f"run {i} failed: {res['error']}")
            runs.append(entry)
    else:
        scfg = search_config(cfg, sim, target, epsilon)
        t0 = time.perf_counter()
        entry = {"run": 0, "seed": [seed], "status": "failed", "error": None, "trace_csv": None,
                 "final_cost": None, "designs": [], "wall_time": 0.0}
        result = None
        try:
            result = run_search(topo, target, scfg, workers=workers,
                                callback=lambda r: log(f"generation {r.gen}: best {r.best_cost:.3e}"),
                                **scenario)
        except (SearchError, TopoforgeError) as exc:
            entry["error"] = f"{type(exc).__name__}: {exc}"
        except KeyboardInterrupt:
            interrupted = True
            entry["error"] = "interrupted"
        else:
            write_rows_csv(out / "trace.csv", SEARCH_TRACE_HEADER, result.rows())
            ranked = sorted(result.accepted, key=lambda c: (c.cost, c.index))
            for rank, cand in enumerate(ranked):
                ddir = out / f"design-{rank:03d}"
                ex = _export_design(cand.model, ddir, thresholds)
                entry["designs"].append({
                    "design": str((ddir / "design.json").relative_to(out)),
                    "cost": json_number(cand.cost),
                    "parent_cost": json_number(cand.parent_cost),
                    "hash": cand.structural_hash,
                    "counts": _counts(ex["simplified"]),
                    "realized": str((ddir / "realized.json").relative_to(out)),
                    "simplified": str((ddir / "simplified.json").relative_to(out)),
                    "dot": str((ddir / "simplified.dot").relative_to(out)),
                })
            entry.update(status="ok" if ranked else "failed",
                         error=None if ranked else f"no design met the threshold ({result.reason})",
                         trace_csv="trace.csv",
                         final_cost=json_number(ranked[0].cost) if ranked else None,
                         generations=result.generations, exit_reason=result.reason,
                         sampler={k: int(v) for k, v in result.sampler.items()})
        entry["wall_time"] = time.perf_counter() - t0
        runs.append(entry)

    best = None
    for e in runs:
        for k, d in enumerate(e["designs"]):
            if d["cost"] is None:
                continue
            if best is None or d["cost"] < best["final_cost"]:
                best = {"run": e["run"], "design": k, "final_cost": d["cost"], "counts": d["counts"],
                        "simplified": d["simplified"]}
    report = {
        "format": REPORT_FORMAT,
        "algorithm": cfg["algorithm"],
        "created": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        "config": cfg,
        "target": {"path": str(target_path), "dt": target.dt, "t_end": target.t_end,
                   "n_samples": len(target), "mean_square": target.mean_square()},
        "runs": runs,
        "best": best,
        "total_wall_time": time.perf_counter() - t_start,
    }
    if interrupted:
        report["interrupted"] = True
    validate(report, "report")
    write_json(out / "report.json", report)
    if interrupted:
        # partial report is on disk; let the caller see the interrupt
        raise KeyboardInterrupt
    return report


__all__ = ["DEFAULT_CONFIG", "merge_config", "resolve_config", "sim_config", "relaxation_config",
           "search_config", "run_design"]
