"""Flat component graphs: ideal R/L/C elements plus the source and load.

Design models compile to this form for simulation; realized and simplified
designs live in it permanently. Vertices are arbitrary hashables (grid nodes
are ints, internal branch nodes are tuples).
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Hashable

import numpy as np

from .exceptions import ModelError
from .model import DesignModel, EdgeState, Mode, ModeTag, StepSource

ELEMENT_KINDS = ("R", "L", "C")
BOUNDARY_KINDS = ("Source", "Load")


@dataclass(frozen=True)
class Component:
    kind: str
    value: float
    a: Hashable
    b: Hashable
    name: str = ""

    def __post_init__(self):
        if self.kind not in ELEMENT_KINDS + BOUNDARY_KINDS:
            raise ModelError(f"unknown component kind {self.kind!r}")
        if self.kind != "Source" and not (np.isfinite(self.value) and self.value > 0):
            raise ModelError(f"{self.kind} {self.name!r} needs a positive value, got {self.value!r}")

    @property
    def is_boundary(self) -> bool:
        return self.kind in BOUNDARY_KINDS

    def endpoints(self) -> tuple:
        return (self.a, self.b)


@dataclass(frozen=True)
class ComponentGraph:
    """Multigraph whose edges are components.

    Exactly one ``Source`` (``a`` positive, ``b`` ground) and one ``Load``
    component are required. ``source`` describes the excitation waveform.
    """

    components: tuple
    source: object = field(default_factory=StepSource)

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(self.components))
        kinds = [c.kind for c in self.components]
        if kinds.count("Source") != 1 or kinds.count("Load") != 1:
            raise ModelError("a component graph needs exactly one Source and one Load")
        if self.source_component.a == self.source_component.b:
            raise ModelError("source terminals coincide")

    @property
    def source_component(self) -> Component:
        return next(c for c in self.components if c.kind == "Source")

    @property
    def load_component(self) -> Component:
        return next(c for c in self.components if c.kind == "Load")

    @property
    def ground(self) -> Hashable:
        return self.source_component.b

    @property
    def elements(self) -> tuple:
        return tuple(c for c in self.components if not c.is_boundary)

    @property
    def vertices(self) -> tuple:
        seen = {}
        for c in self.components:
            seen.setdefault(c.a, None)
            seen.setdefault(c.b, None)
        return tuple(seen)

    @property
    def boundary_vertices(self) -> frozenset:
        s, ld = self.source_component, self.load_component
        return frozenset((s.a, s.b, ld.a, ld.b))

    def counts(self) -> dict:
        """Element counts by kind, boundary excluded."""
        out = {k: 0 for k in ELEMENT_KINDS}
        for c in self.elements:
            out[c.kind] += 1
        return out

    def with_components(self, components) -> "ComponentGraph":
        return replace(self, components=tuple(components))


def switch_resistance(s: float, epsilon: float) -> float:
    """Equivalent resistance of a continuous switch at control value ``s``."""
    return ((1.0 - s) + epsilon * s) / (s + epsilon * (1.0 - s))


def to_component_graph(model: DesignModel) -> ComponentGraph:
    """Flatten a design model into ideal elements.

    A relaxed branch becomes its element in series with the switch's
    equivalent resistor, joined at an internal node ``(edge_id, branch)``;
    the short branch is the switch resistor alone. Discrete Short edges are a
    resistor of value epsilon (a switch at s = 1); Open edges vanish.
    """
    topo = model.topology
    eps = model.epsilon
    b = topo.boundary
    comps = [Component("Source", float(getattr(model.source, "amplitude", 1.0)),
                       b.source_pos, b.source_neg, "source"),
             Component("Load", model.load_resistance, b.load_pos, b.load_neg, "load")]
    for (eid, na, nb), st in zip(topo.edges, model.states):
        if isinstance(st, Mode):
            if st.tag is ModeTag.OPEN:
                continue
            if st.tag is ModeTag.SHORT:
                comps.append(Component("R", switch_resistance(1.0, eps), na, nb, f"e{eid}.S"))
            else:
                comps.append(Component(st.tag.branch, st.param, na, nb, f"e{eid}.{st.tag.branch}"))
            continue
        assert isinstance(st, EdgeState)
        for br in st.active():
            rsw = switch_resistance(st.switch(br), eps)
            if br == "S":
                comps.append(Component("R", rsw, na, nb, f"e{eid}.S.sw"))
                continue
            mid = (eid, br)
            comps.append(Component(br, st.param(br), na, mid, f"e{eid}.{br}"))
            comps.append(Component("R", rsw, mid, nb, f"e{eid}.{br}.sw"))
    return ComponentGraph(tuple(comps), model.source)


def as_component_graph(obj) -> ComponentGraph:
    if isinstance(obj, ComponentGraph):
        return obj
    if isinstance(obj, DesignModel):
        return to_component_graph(obj)
    raise TypeError(f"cannot interpret {type(obj).__name__} as a circuit")
