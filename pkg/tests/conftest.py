import numpy as np
import pytest

from topoforge.model import (DesignModel, EdgeState, Mode, ModeTag, ParameterBounds, generate_grid)
from topoforge.netlist import Component, ComponentGraph
from topoforge.relaxation import realize_switches
from topoforge.simulator import SimConfig, transient


def reference_lowpass(topo=None) -> ComponentGraph:
    """1 V step, 1 Ohm series, 10 mF shunt, 1 Ohm load on the 2x3 boundary."""
    topo = topo or generate_grid(2, 3)
    b = topo.boundary
    return ComponentGraph((
        Component("Source", 1.0, b.source_pos, b.source_neg, "source"),
        Component("Load", 1.0, b.load_pos, b.load_neg, "load"),
        Component("R", 1.0, b.source_pos, b.load_pos, "r1"),
        Component("C", 1e-2, b.load_pos, b.load_neg, "c1"),
    ))


def rc_circuit(r=1.0, c=1.0, load=1e12) -> ComponentGraph:
    """Source -> R -> node 2, C from node 2 to ground, load across C."""
    return ComponentGraph((
        Component("Source", 1.0, 1, 0, "source"),
        Component("Load", load, 2, 0, "load"),
        Component("R", r, 1, 2, "r"),
        Component("C", c, 2, 0, "c"),
    ))


def chain(*elements, load=1.0) -> ComponentGraph:
    """Elements in series from the source to the load; ``elements`` are (kind, value)."""
    comps = [Component("Source", 1.0, 1, 0, "source")]
    nodes = [1] + [("n", k) for k in range(1, len(elements))] + [2]
    for k, (kind, value) in enumerate(elements):
        comps.append(Component(kind, value, nodes[k], nodes[k + 1], f"x{k}"))
    comps.append(Component("Load", load, 2, 0, "load"))
    return ComponentGraph(tuple(comps))


def random_relaxed_model(topo, rng, bounds=None, **scenario) -> DesignModel:
    bounds = bounds or ParameterBounds()
    states = []
    for _ in topo.edges:
        r, l, c = (float(np.exp(rng.uniform(*np.log(bounds.for_branch(b))))) for b in "RLC")
        states.append(EdgeState(r, l, c, *rng.uniform(0.0, 1.0, 4)))
    return DesignModel(topo, tuple(states), **scenario)


SIMPLIFY_BOUNDS = ParameterBounds(r=(1.0, 1e3), l=(1e-4, 1e-1), c=(1e-6, 1e-3))


def random_realized_netlist(rng, topo, bounds=SIMPLIFY_BOUNDS) -> ComponentGraph:
    """Realized partly-relaxed grid design seeded with removable clutter.

    Clutter: 1e-5 Ohm resistors in series with large resistors, 1e-16 F and
    1e9 Ohm elements in parallel with existing ones, a dangling RC chain and
    an isolated RL loop.
    """
    states = []
    for _ in topo.edges:
        u = rng.random()
        if u < 0.2:
            states.append(Mode.open())
            continue
        if u < 0.3:
            states.append(Mode(ModeTag.RESISTOR, float(np.exp(rng.uniform(0, np.log(1e3))))))
            continue
        r, l, c = (float(np.exp(rng.uniform(*np.log(bounds.for_branch(b))))) for b in "RLC")
        s = rng.uniform(0.01, 0.99, 4)
        br = frozenset(b for b in "RLCS" if rng.random() < 0.6) or frozenset("R")
        states.append(EdgeState(r, l, c, *s, branches=br))
    g = realize_switches(DesignModel(topo, tuple(states)))
    out = []
    for k, c in enumerate(g.components):
        if c.is_boundary:
            out.append(c)
            continue
        v = rng.random()
        if v < 0.05 and c.kind == "R" and c.value >= 100:
            mid = ("x", k)
            out += [Component(c.kind, c.value, c.a, mid, c.name), Component("R", 1e-5, mid, c.b, c.name + ".tiny")]
        elif v < 0.08:
            out += [c, Component("C", 1e-16, c.a, c.b, c.name + ".ctiny")]
        elif v < 0.11:
            out += [c, Component("R", 1e9, c.a, c.b, c.name + ".rhuge")]
        else:
            out.append(c)
    n0 = topo.nodes[rng.integers(len(topo.nodes))]
    out += [Component("R", 10.0, n0, ("p", 1), "p1"), Component("C", 1e-4, ("p", 1), ("p", 2), "p2")]
    out += [Component("R", 5.0, ("i", 1), ("i", 2), "i1"), Component("L", 1e-3, ("i", 2), ("i", 1), "i2")]
    return g.with_components(out)


@pytest.fixture(scope="session")
def grid23():
    return generate_grid(2, 3)


@pytest.fixture(scope="session")
def reference_target(grid23):
    return transient(reference_lowpass(grid23), SimConfig())


def isomorphism_key(model) -> tuple:
    """Exact canonical form of a discrete design up to relabeling of non-boundary nodes.

    Brute force over all permutations of the non-boundary nodes; boundary
    terminals stay fixed. Open edges are ignored.
    """
    from itertools import permutations

    topo = model.topology
    fixed = set(topo.boundary)
    inner = sorted(set(topo.nodes) - fixed)
    edges = [(a, b, st.tag.value) for (_, a, b), st in zip(topo.edges, model.states)
             if st.tag is not ModeTag.OPEN]
    best = None
    for perm in permutations(inner):
        mp = dict(zip(inner, perm))
        key = tuple(sorted((min(mp.get(a, a), mp.get(b, b)), max(mp.get(a, a), mp.get(b, b)), lab)
                           for a, b, lab in edges))
        if best is None or key < best:
            best = key
    return best


ACCEPTANCE_LINES: list = []


def report_criterion(number: int, ok: bool, detail: str) -> None:
    """Record one acceptance line; printed in the terminal summary."""
    ACCEPTANCE_LINES.append(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
