"""Cost-guided random topology search over discrete universal-component modes.

Generation 0 is a batch of random feasible designs. Every generation is
simulated, the cheapest few get their parameters optimized, the designs under
the cost threshold are kept, and their children (each R/L/C edge set to Short
or to Open) form the next generation. The loop ends when no optimized design
meets the threshold or no children remain.
"""
from __future__ import annotations

import hashlib
import math
import time
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import networkx as nx
import numpy as np

from .exceptions import ModelError, SearchError, SimulationError
from .model import DesignModel, MetaTopology, Mode, ModeTag, ParameterBounds, sample_random_states
from .netlist import ComponentGraph, as_component_graph
from .objective import RequirementsObjective, VariableSpace, requirements_cost
from .powell import OptimizerConfig, minimize
from .simplify import SimplifyThresholds, simplify_fixpoint
from .simulator import SimConfig, Waveform, check_feasible, transient


@dataclass(frozen=True)
class SearchConfig:
    n_s: int = 2000
    n_o: int = 8
    c_th: float = 1e-3
    seed: int = 0
    inner: OptimizerConfig = field(default_factory=lambda: OptimizerConfig(max_iterations=150, max_evaluations=2000))
    max_generations: int = 100
    max_sample_attempts: int | None = None
    global_dedup: bool = False
    bounds: ParameterBounds = field(default_factory=ParameterBounds)
    sim: SimConfig = field(default_factory=SimConfig)
    thresholds: SimplifyThresholds | None = None

    def __post_init__(self):
        if self.n_s < 1 or self.n_o < 1:
            raise ModelError("n_s and n_o must be positive")
        if self.n_o > self.n_s:
            raise ModelError("n_o must not exceed n_s")
        if not self.c_th > 0:
            raise ModelError("c_th must be positive")
        if self.max_generations < 1:
            raise ModelError("max_generations must be positive")


@dataclass
class Candidate:
    model: DesignModel
    cost: float
    parent_cost: float
    structural_hash: str
    index: int = 0


@dataclass(frozen=True)
class GenerationRecord:
    gen: int
    best_cost: float
    best_ncomponents: int
    seconds: float
    n_candidates: int
    n_accepted: int


@dataclass
class SearchResult:
    accepted: list
    trace: list
    generations: int
    reason: str
    sampler: dict = field(default_factory=dict)

    def rows(self):
        """CSV rows ``gen, best_cost, best_ncomponents, seconds``."""
        return [(r.gen, r.best_cost, r.best_ncomponents, r.seconds) for r in self.trace]

    @property
    def best(self) -> Candidate | None:
        return min(self.accepted, key=lambda c: (c.cost, c.index)) if self.accepted else None


# --- structural hashing ----------------------------------------------------

def _digest(*parts) -> str:
    h = hashlib.blake2b(digest_size=16)
    for p in parts:
        h.update(str(p).encode())
        h.update(b"\x1f")
    return h.hexdigest()


def _edge_label(state) -> str:
    if isinstance(state, Mode):
        return state.tag.value
    return "Relaxed:" + "".join(state.active())


def _labeled_edges(obj):
    """``(a, b, label)`` triples plus boundary roles per vertex."""
    if isinstance(obj, DesignModel):
        topo = obj.topology
        edges = [(a, b, _edge_label(st)) for (_, a, b), st in zip(topo.edges, obj.states)
                 if not (isinstance(st, Mode) and st.tag is ModeTag.OPEN)]
        bd = topo.boundary
        edges.append((bd.source_pos, bd.source_neg, "Source"))
        edges.append((bd.load_pos, bd.load_neg, "Load"))
        terminals = bd
    elif isinstance(obj, ComponentGraph):
        edges = [(c.a, c.b, c.kind) for c in obj.components]
        s, ld = obj.source_component, obj.load_component
        terminals = (s.a, s.b, ld.a, ld.b)
    else:
        raise TypeError(f"cannot hash {type(obj).__name__}")
    roles: dict = {}
    for role, v in zip(("src+", "src-", "load+", "load-"), terminals):
        roles.setdefault(v, []).append(role)
    return edges, {v: "/".join(r) for v, r in roles.items()}


def canonical_hash(obj, iterations: int | None = None) -> str:
    """Parameter-blind structural digest of a mode-labeled design.

    Works on discrete (or relaxed) design models and on component graphs.
    Vertices start with their boundary role, edges carry their mode tag, and
    vertex labels are refined from the multiset of (edge label, neighbour
    label) pairs until the partition stops splitting. Open edges and
    vertices without edges do not take part.
    """
    edges, roles = _labeled_edges(obj)
    nbrs: dict = {}
    for a, b, lab in edges:
        nbrs.setdefault(a, []).append((lab, b))
        nbrs.setdefault(b, []).append((lab, a))
    labels = {v: _digest("v", roles.get(v, "")) for v in nbrs}
    rounds = len(nbrs) if iterations is None else iterations
    n_classes = len(set(labels.values()))
    history = [sorted(labels.values())]
    for _ in range(rounds):
        labels = {v: _digest(labels[v], sorted((lab, labels[u]) for lab, u in nbrs[v])) for v in nbrs}
        history.append(sorted(labels.values()))
        k = len(set(labels.values()))
        if iterations is None and k == n_classes:
            break
        n_classes = k
    edge_words = sorted(lab + ":" + "|".join(sorted((labels[a], labels[b]))) for a, b, lab in edges)
    return _digest(history, edge_words)


# --- mode-level mutation and clean-up ---------------------------------------

def mutate(model: DesignModel) -> list:
    """Children with one R/L/C edge set to Short and to Open, in edge order."""
    children = []
    for i, st in enumerate(model.states):
        if isinstance(st, Mode) and st.tag.has_param:
            for new in (Mode.short(), Mode.open()):
                states = list(model.states)
                states[i] = new
                children.append(model.with_states(states))
    return children


def prune_degenerate_modes(model: DesignModel, thresholds: SimplifyThresholds | None = None) -> DesignModel:
    """Map near-zero resistors to Short and negligible capacitors or huge resistors to Open."""
    th = thresholds or SimplifyThresholds.for_epsilon(model.epsilon)
    states = []
    for st in model.states:
        if isinstance(st, Mode) and st.tag is ModeTag.RESISTOR:
            if st.param < th.r_short_below:
                st = Mode.short()
            elif 1.0 / st.param < th.g_open_below:
                st = Mode.open()
        elif isinstance(st, Mode) and st.tag is ModeTag.CAPACITOR and st.param < th.c_open_below:
            st = Mode.open()
        states.append(st)
    return model.with_states(states)


def remove_dangling_modes(model: DesignModel) -> DesignModel:
    """Open every edge that is cut off from the boundary or lies on no cycle."""
    topo = model.topology
    bd = topo.boundary
    states = list(model.states)
    while True:
        g = nx.MultiGraph()
        g.add_edge(bd.source_pos, bd.source_neg, key="src")
        g.add_edge(bd.load_pos, bd.load_neg, key="load")
        for i, ((_, a, b), st) in enumerate(zip(topo.edges, states)):
            if not (isinstance(st, Mode) and st.tag is ModeTag.OPEN):
                g.add_edge(a, b, key=i)
        keep = nx.node_connected_component(g, bd.source_pos)
        bridges = {frozenset(e) for e in nx.bridges(g)}
        changed = False
        for i, (_, a, b) in enumerate(topo.edges):
            st = states[i]
            if isinstance(st, Mode) and st.tag is ModeTag.OPEN:
                continue
            if a not in keep or frozenset((a, b)) in bridges:
                states[i] = Mode.open()
                changed = True
        if not changed:
            return model.with_states(states)


def simplify_modes(model: DesignModel) -> DesignModel:
    return remove_dangling_modes(model)


def count_components(obj) -> int:
    """R/L/C elements of a netlist, or R/L/C-mode edges of a discrete model."""
    if isinstance(obj, ComponentGraph):
        return len(obj.elements)
    return obj.n_components()


# --- evaluation workers -----------------------------------------------------

def _sim_cost(model: DesignModel, target: Waveform, sim: SimConfig) -> float:
    try:
        c = requirements_cost(transient(model, sim), target)
    except SimulationError:
        return math.inf
    return c if math.isfinite(c) else math.inf


def _eval_task(args):
    model, target, sim = args
    return _sim_cost(model, target, sim)


def _optimize_task(args):
    model, target, sim, bounds, inner = args
    space = VariableSpace(model, bounds)
    if space.size == 0:
        return model, _sim_cost(model, target, sim)
    z0 = space.from_model()
    obj = RequirementsObjective(space, target, sim, 0.0)
    try:
        res = minimize(obj, z0, inner)
    except Exception:  # noqa: BLE001 - an optimizer failure leaves the design as it was
        return model, _sim_cost(model, target, sim)
    best = space.to_model(res.x_star)
    return best, _sim_cost(best, target, sim)


class _Mapper:
    """Ordered map over a process pool, or in-process when ``workers == 1``."""

    def __init__(self, workers: int = 1):
        self.workers = max(1, int(workers))
        self._pool = None

    def __enter__(self):
        if self.workers > 1:
            self._pool = ProcessPoolExecutor(max_workers=self.workers)
        return self

    def __exit__(self, *exc):
        if self._pool is not None:
            self._pool.shutdown(cancel_futures=True)

    def map(self, fn, items):
        items = list(items)
        if self._pool is None or len(items) < 2:
            return [fn(x) for x in items]
        chunk = max(1, len(items) // (4 * self.workers))
        return list(self._pool.map(fn, items, chunksize=chunk))


# --- the search loop --------------------------------------------------------

def _sample_generation0(meta, cfg, scenario, rng):
    attempts = cfg.max_sample_attempts or 50 * cfg.n_s
    reasons: Counter = Counter()
    seen: set = set()
    out = []
    for _ in range(attempts):
        if len(out) >= cfg.n_s:
            break
        m = sample_random_states(meta, rng, cfg.bounds, **scenario)
        feas = check_feasible(m, cfg.sim)
        reasons[feas.reason] += 1
        if not feas:
            continue
        h = canonical_hash(m)
        if h in seen:
            reasons["Duplicate"] += 1
            continue
        seen.add(h)
        out.append(Candidate(m, math.nan, math.nan, h, len(out)))
    return out, dict(reasons)


def _children(parents, cfg, seen_parents):
    out = []
    seen = set(seen_parents)
    for p in parents:
        base = prune_degenerate_modes(p.model, cfg.thresholds)
        for child in mutate(base):
            if not check_feasible(child, cfg.sim):
                continue
            child = simplify_modes(child)
            if not check_feasible(child, cfg.sim):
                continue
            h = canonical_hash(child)
            if h in seen:
                continue
            seen.add(h)
            out.append(Candidate(child, math.nan, p.cost, h, len(out)))
    return out


def run_search(meta: MetaTopology, target: Waveform, cfg: SearchConfig | None = None, *,
               workers: int = 1, callback=None, **scenario) -> SearchResult:
    """Run the search on ``meta``; ``scenario`` sets source, load and epsilon.

    Results do not depend on ``workers``: evaluations are gathered in
    candidate order and ties are broken by candidate index.
    """
    cfg = cfg or SearchConfig()
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed))
    T, sampler = _sample_generation0(meta, cfg, scenario, rng)
    if not T:
        raise SearchError(f"no feasible design among the sampled topologies: {sampler}")
    S: list = []
    trace: list = []
    global_seen: set = set()
    reason = "max_generations"
    gen = 0
    with _Mapper(workers) as pool:
        for gen in range(cfg.max_generations):
            t0 = time.perf_counter()
            costs = pool.map(_eval_task, [(c.model, target, cfg.sim) for c in T])
            for c, v in zip(T, costs):
                c.cost = v
                if gen == 0:
                    c.parent_cost = v
            ranked = sorted((c for c in T if math.isfinite(c.cost)), key=lambda c: (c.cost, c.index))
            top = ranked[:cfg.n_o]
            if not top:
                reason = "no_feasible_candidates"
                trace.append(GenerationRecord(gen, math.inf, 0, time.perf_counter() - t0, len(T), 0))
                break
            results = pool.map(_optimize_task, [(c.model, target, cfg.sim, cfg.bounds, cfg.inner) for c in top])
            optimized = [Candidate(m, v, c.parent_cost, c.structural_hash, c.index)
                         for c, (m, v) in zip(top, results)]
            best = min(optimized, key=lambda c: (c.cost, c.index))
            ncomp = _simplified_count(best.model, cfg) if math.isfinite(best.cost) else 0
            accepted = [c for c in optimized if c.cost <= cfg.c_th]
            rec = GenerationRecord(gen, best.cost, ncomp, time.perf_counter() - t0, len(T), len(accepted))
            trace.append(rec)
            if callback is not None:
                callback(rec)
            if best.cost > cfg.c_th:
                reason = "threshold"
                break
            S = accepted
            parents_seen = {c.structural_hash for c in S}
            if cfg.global_dedup:
                global_seen |= {c.structural_hash for c in T}
                parents_seen |= global_seen
            T = _children(S, cfg, parents_seen)
            if not T:
                reason = "exhausted"
                break
            if len(T) > cfg.n_s:
                T = sorted(T, key=lambda c: (c.parent_cost, c.index))[:cfg.n_s]
            for i, c in enumerate(T):
                c.index = i
    return SearchResult(S, trace, gen + 1, reason, sampler)


def _simplified_count(model: DesignModel, cfg: SearchConfig) -> int:
    th = cfg.thresholds or SimplifyThresholds.for_epsilon(model.epsilon)
    try:
        return count_components(simplify_fixpoint(as_component_graph(model), th))
    except Exception:  # noqa: BLE001 - fall back to the raw count on degenerate netlists
        return model.n_components()


def simplified_netlist(model: DesignModel, thresholds: SimplifyThresholds | None = None) -> ComponentGraph:
    th = thresholds or SimplifyThresholds.for_epsilon(model.epsilon)
    return simplify_fixpoint(as_component_graph(model), th)


__all__ = ["SearchConfig", "Candidate", "GenerationRecord", "SearchResult", "canonical_hash",
           "mutate", "prune_degenerate_modes", "remove_dangling_modes", "simplify_modes",
           "count_components", "run_search", "simplified_netlist"]
