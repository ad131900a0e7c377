"""Netlist simplification: isolated and dangling removal, degenerate-value
pruning and series/parallel merging, iterated to a fixpoint.

All passes take and return :class:`~topoforge.netlist.ComponentGraph`
values; the Source and Load components are never touched.
"""
from __future__ import annotations

from dataclasses import dataclass

import networkx as nx

from .exceptions import SimplificationError
from .netlist import Component, ComponentGraph


@dataclass(frozen=True)
class SimplifyThresholds:
    """Resistors below ``r_short_below`` are shorted, capacitors below
    ``c_open_below`` and resistors whose conductance is below
    ``g_open_below`` are opened."""

    r_short_below: float = 1e-4
    c_open_below: float = 1e-12
    g_open_below: float = 1e-4

    def __post_init__(self):
        if not (self.r_short_below > 0 and self.c_open_below > 0 and self.g_open_below > 0):
            raise SimplificationError("thresholds must be positive")

    @classmethod
    def for_epsilon(cls, epsilon: float) -> "SimplifyThresholds":
        return cls(r_short_below=10.0 * epsilon, g_open_below=10.0 * epsilon)


def _multigraph(components) -> nx.MultiGraph:
    g = nx.MultiGraph()
    for i, c in enumerate(components):
        g.add_edge(c.a, c.b, key=i)
    return g


def remove_isolated(g: ComponentGraph) -> ComponentGraph:
    """Keep only the connected part that holds the Source and the Load."""
    mg = _multigraph(g.components)
    src, load = g.source_component, g.load_component
    keep = nx.node_connected_component(mg, src.a)
    if load.a not in keep or load.b not in keep:
        raise SimplificationError("source and load lie in different connected components")
    return g.with_components(c for c in g.components if c.a in keep)


def remove_dangling(g: ComponentGraph) -> ComponentGraph:
    """Delete elements that lie on no cycle, repeating until none is left.

    A bridge is the only edge across some cut, so by current balance it
    carries no current.
    """
    comps = list(g.components)
    while True:
        mg = _multigraph(comps)
        bridges = {frozenset((u, v)) for u, v in nx.bridges(mg)}
        # a self-loop is never a bridge; bridges are single edges between their endpoints
        drop = {i for i, c in enumerate(comps)
                if not c.is_boundary and c.a != c.b and frozenset((c.a, c.b)) in bridges}
        if not drop:
            return g.with_components(comps)
        comps = [c for i, c in enumerate(comps) if i not in drop]


def _contract(comps, keep, gone):
    out = []
    for c in comps:
        a = keep if c.a == gone else c.a
        b = keep if c.b == gone else c.b
        out.append(Component(c.kind, c.value, a, b, c.name) if (a, b) != (c.a, c.b) else c)
    return out


def prune_degenerate(g: ComponentGraph, thresholds: SimplifyThresholds | None = None) -> ComponentGraph:
    """Short near-zero resistors, open negligible capacitors and huge resistors.

    Also drops self-loops and elements wired straight across the ideal source,
    neither of which can influence the load. Raises if a short would join the
    two terminals of the source or of the load.
    """
    th = thresholds or SimplifyThresholds()
    comps = list(g.components)
    boundary = g.boundary_vertices
    src, load = g.source_component, g.load_component
    while True:
        i = next((i for i, c in enumerate(comps)
                  if c.kind == "R" and c.value < th.r_short_below and c.a != c.b), None)
        if i is None:
            break
        c = comps.pop(i)
        keep, gone = (c.b, c.a) if (c.a not in boundary and c.b in boundary) else (c.a, c.b)
        if {keep, gone} in ({src.a, src.b}, {load.a, load.b}):
            raise SimplificationError(f"shorting {c.name or c.kind} would join the terminals of a boundary component")
        comps = _contract(comps, keep, gone)
        src, load = (next(x for x in comps if x.kind == k) for k in ("Source", "Load"))
    src_pair = {src.a, src.b}
    out = []
    for c in comps:
        if c.is_boundary:
            out.append(c)
            continue
        if c.a == c.b or {c.a, c.b} == src_pair:
            continue
        if c.kind == "C" and c.value < th.c_open_below:
            continue
        if c.kind == "R" and 1.0 / c.value < th.g_open_below:
            continue
        out.append(c)
    return g.with_components(out)


def _series(kind, x, y):
    return 1.0 / (1.0 / x + 1.0 / y) if kind == "C" else x + y


def _parallel(kind, x, y):
    return x + y if kind == "C" else 1.0 / (1.0 / x + 1.0 / y)


def _merge_once(comps, boundary):
    # parallel pairs
    seen = {}
    for i, c in enumerate(comps):
        if c.is_boundary:
            continue
        key = (c.kind, frozenset((c.a, c.b)))
        if key in seen:
            j = seen[key]
            d = comps[j]
            merged = Component(c.kind, _parallel(c.kind, d.value, c.value), d.a, d.b, f"{d.name}|{c.name}")
            return comps[:j] + [merged] + comps[j + 1:i] + comps[i + 1:]
        seen[key] = i
    # series pairs through an internal degree-2 vertex
    incident: dict = {}
    for i, c in enumerate(comps):
        incident.setdefault(c.a, []).append(i)
        if c.b != c.a:
            incident.setdefault(c.b, []).append(i)
    for v, idx in incident.items():
        if v in boundary or len(idx) != 2:
            continue
        i, j = idx
        c, d = comps[i], comps[j]
        if c.is_boundary or d.is_boundary or c.kind != d.kind or c.a == c.b or d.a == d.b:
            continue
        u = c.b if c.a == v else c.a
        w = d.b if d.a == v else d.a
        if u == w:
            continue
        merged = Component(c.kind, _series(c.kind, c.value, d.value), u, w, f"{c.name}+{d.name}")
        return [merged if k == i else x for k, x in enumerate(comps) if k != j]
    return None


def merge_series_parallel(g: ComponentGraph) -> ComponentGraph:
    """Merge same-type parallel pairs and same-type series pairs until none remain.

    Series merging only happens through a vertex with exactly two incident
    components that is not a Source or Load terminal.
    """
    comps = list(g.components)
    boundary = g.boundary_vertices
    while True:
        nxt = _merge_once(comps, boundary)
        if nxt is None:
            return g.with_components(comps)
        comps = nxt


def simplify_fixpoint(g: ComponentGraph, thresholds: SimplifyThresholds | None = None,
                      *, max_rounds: int = 10_000) -> ComponentGraph:
    """Apply every pass in turn until a full round changes nothing."""
    for _ in range(max_rounds):
        before = g.components
        g = remove_isolated(g)
        g = remove_dangling(g)
        g = prune_degenerate(g, thresholds)
        g = merge_series_parallel(g)
        if g.components == before:
            return g
    raise SimplificationError("simplification did not reach a fixpoint")


__all__ = ["SimplifyThresholds", "remove_isolated", "remove_dangling", "prune_degenerate",
           "merge_series_parallel", "simplify_fixpoint"]
