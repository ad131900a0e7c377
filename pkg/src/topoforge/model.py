"""Universal components, grid meta-topologies and design models.

A grid edge is a *universal component*: four switched branches (resistor,
inductor, capacitor, short) in parallel. In relaxed form every branch carries
a continuous switch value in [0, 1]; in discrete form the edge is in exactly
one :class:`Mode`.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Sequence, Union

import numpy as np

from .exceptions import ModelError

#: Branch keys of a universal component, in packing order.
BRANCHES = ("R", "L", "C", "S")
PARAM_BRANCHES = ("R", "L", "C")
_PARAM_ATTR = {"R": "r", "L": "l", "C": "c"}
_SWITCH_ATTR = {"R": "s_r", "L": "s_l", "C": "s_c", "S": "s_short"}


class ModeTag(str, enum.Enum):
    OPEN = "Open"
    SHORT = "Short"
    RESISTOR = "Resistor"
    INDUCTOR = "Inductor"
    CAPACITOR = "Capacitor"

    @property
    def has_param(self) -> bool:
        return self in (ModeTag.RESISTOR, ModeTag.INDUCTOR, ModeTag.CAPACITOR)

    @property
    def branch(self) -> str | None:
        return {ModeTag.RESISTOR: "R", ModeTag.INDUCTOR: "L",
                ModeTag.CAPACITOR: "C", ModeTag.SHORT: "S"}.get(self)


@dataclass(frozen=True)
class Mode:
    """Discrete universal-component mode."""

    tag: ModeTag
    param: float | None = None

    def __post_init__(self):
        tag = ModeTag(self.tag)
        object.__setattr__(self, "tag", tag)
        if tag.has_param:
            if self.param is None or not np.isfinite(self.param) or self.param <= 0:
                raise ModelError(f"{tag.value} mode needs a positive parameter, got {self.param!r}")
            object.__setattr__(self, "param", float(self.param))
        elif self.param is not None:
            raise ModelError(f"{tag.value} mode takes no parameter")

    @classmethod
    def open(cls) -> "Mode":
        return cls(ModeTag.OPEN)

    @classmethod
    def short(cls) -> "Mode":
        return cls(ModeTag.SHORT)


@dataclass(frozen=True)
class EdgeState:
    """Relaxed universal component.

    ``branches`` lists the branches still present in the model; eliminated
    branches keep their last values but contribute neither stamps nor
    optimization variables.
    """

    r: float
    l: float
    c: float
    s_r: float
    s_l: float
    s_c: float
    s_short: float
    branches: frozenset = field(default_factory=lambda: frozenset(BRANCHES))

    def __post_init__(self):
        object.__setattr__(self, "branches", frozenset(self.branches))
        if not self.branches <= set(BRANCHES) or not self.branches:
            raise ModelError(f"invalid branch set {sorted(self.branches)}")
        for name in ("r", "l", "c"):
            v = getattr(self, name)
            if not np.isfinite(v) or v <= 0:
                raise ModelError(f"parameter {name} must be positive and finite, got {v!r}")
        for name in ("s_r", "s_l", "s_c", "s_short"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ModelError(f"switch {name} must lie in [0, 1], got {v!r}")

    def param(self, branch: str) -> float:
        return getattr(self, _PARAM_ATTR[branch])

    def switch(self, branch: str) -> float:
        return getattr(self, _SWITCH_ATTR[branch])

    def active(self) -> tuple:
        """Active branches in canonical order."""
        return tuple(b for b in BRANCHES if b in self.branches)

    @property
    def n_variables(self) -> int:
        return sum(2 if b in _PARAM_ATTR else 1 for b in self.branches)


EdgeValue = Union[EdgeState, Mode]


class Boundary(NamedTuple):
    source_pos: int
    source_neg: int
    load_pos: int
    load_neg: int

    @property
    def ground(self) -> int:
        return self.source_neg


@dataclass(frozen=True)
class MetaTopology:
    """Graph of universal-component edges plus the boundary terminals."""

    nodes: tuple
    edges: tuple  # ((edge_id, a, b), ...)
    boundary: Boundary
    rows: int | None = None
    cols: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(int(n) for n in self.nodes))
        object.__setattr__(self, "edges", tuple((int(e), int(a), int(b)) for e, a, b in self.edges))
        object.__setattr__(self, "boundary", Boundary(*(int(n) for n in self.boundary)))
        node_set = set(self.nodes)
        if len(node_set) != len(self.nodes):
            raise ModelError("duplicate node ids")
        if any(n < 0 for n in self.nodes):
            raise ModelError("node ids must be non-negative")
        ids = [e for e, _, _ in self.edges]
        if len(set(ids)) != len(ids):
            raise ModelError("duplicate edge ids")
        for eid, a, b in self.edges:
            if a == b:
                raise ModelError(f"edge {eid} is a self-loop")
            if a not in node_set or b not in node_set:
                raise ModelError(f"edge {eid} references an unknown node")
        for n in self.boundary:
            if n not in node_set:
                raise ModelError(f"boundary node {n} is not in the topology")
        if self.boundary.source_pos == self.boundary.source_neg:
            raise ModelError("source terminals coincide")
        if self.boundary.load_pos == self.boundary.load_neg:
            raise ModelError("load terminals coincide")

    @property
    def edge_ids(self) -> tuple:
        return tuple(e for e, _, _ in self.edges)

    @property
    def ground(self) -> int:
        return self.boundary.ground

    @property
    def n_grid_nodes(self) -> int:
        """Nodes that are grid points (the off-grid ground of a 1-row grid is excluded)."""
        if self.rows is None:
            return len(self.nodes)
        return self.rows * self.cols

    def grid_node(self, row: int, col: int) -> int:
        if self.rows is None:
            raise ModelError("topology is not a grid")
        if not (0 <= row < self.rows and 0 <= col < self.cols):
            raise ModelError(f"grid position ({row}, {col}) out of range")
        offset = 1 if self.rows == 1 else 0
        return row * self.cols + col + offset


def generate_grid(rows: int, cols: int, *, source_row: int | None = None,
                  load_row: int | None = None) -> MetaTopology:
    """Full ``rows x cols`` grid with horizontal and vertical edges.

    Node ``r * cols + c`` is grid point ``(r, c)``; node 0, the corner
    ``(0, 0)``, is ground. The source drives grid point ``(source_row, 0)``
    and the load hangs off ``(load_row, cols - 1)``, both against ground; rows
    default to ``rows // 2``. A single-row grid has no spare corner, so there
    ground is an extra off-grid node 0 and grid ids start at 1.

    Edges are ordered row by row, horizontal edges of a row before its
    vertical edges.
    """
    rows, cols = int(rows), int(cols)
    if rows < 1 or cols < 1 or rows * cols < 2:
        raise ModelError(f"grid {rows}x{cols} needs rows >= 1, cols >= 1 and at least 2 points")
    if cols < 2:
        raise ModelError("grid needs at least 2 columns to separate source and load")
    source_row = rows // 2 if source_row is None else int(source_row)
    load_row = rows // 2 if load_row is None else int(load_row)
    offset = 1 if rows == 1 else 0

    def nid(r, c):
        return r * cols + c + offset

    nodes = ([0] if offset else []) + [nid(r, c) for r in range(rows) for c in range(cols)]
    edges = []
    for r in range(rows):
        for c in range(cols - 1):
            edges.append((len(edges), nid(r, c), nid(r, c + 1)))
        if r < rows - 1:
            for c in range(cols):
                edges.append((len(edges), nid(r, c), nid(r + 1, c)))
    ground = 0
    boundary = Boundary(nid(source_row, 0), ground, nid(load_row, cols - 1), ground)
    if boundary.source_pos == ground or boundary.load_pos == ground:
        raise ModelError("source or load row places a terminal on the ground corner")
    return MetaTopology(tuple(nodes), tuple(edges), boundary, rows=rows, cols=cols)


@dataclass(frozen=True)
class ParameterBounds:
    """Per-type box bounds; sampling and optimization work in log space."""

    r: tuple = (0.1, 1e5)
    l: tuple = (1e-6, 10.0)
    c: tuple = (1e-9, 1e-1)

    def __post_init__(self):
        for name in ("r", "l", "c"):
            lo, hi = (float(v) for v in getattr(self, name))
            if not (0 < lo <= hi and np.isfinite(hi)):
                raise ModelError(f"bad bounds for {name}: {(lo, hi)}")
            object.__setattr__(self, name, (lo, hi))

    def for_branch(self, branch: str) -> tuple:
        return getattr(self, _PARAM_ATTR[branch])

    def for_tag(self, tag: ModeTag) -> tuple:
        return self.for_branch(ModeTag(tag).branch)


@dataclass(frozen=True)
class StepSource:
    """Voltage step applied just after t = 0."""

    amplitude: float = 1.0

    def values(self, times: np.ndarray) -> np.ndarray:
        return np.where(times > 0, float(self.amplitude), 0.0)


@dataclass(frozen=True)
class DesignModel:
    """A simulatable design: topology, per-edge states and boundary scenario."""

    topology: MetaTopology
    states: tuple
    source: object = field(default_factory=StepSource)
    load_resistance: float = 1.0
    epsilon: float = 1e-5

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(self.states))
        if len(self.states) != len(self.topology.edges):
            raise ModelError(f"{len(self.states)} states for {len(self.topology.edges)} edges")
        for st in self.states:
            if not isinstance(st, (EdgeState, Mode)):
                raise ModelError(f"edge state must be EdgeState or Mode, got {type(st).__name__}")
        if not 0.0 < self.epsilon < 1.0:
            raise ModelError(f"epsilon must lie in (0, 1), got {self.epsilon!r}")
        if not (np.isfinite(self.load_resistance) and self.load_resistance > 0):
            raise ModelError("load resistance must be positive")

    def state(self, edge_id: int) -> EdgeValue:
        return self.states[self.topology.edge_ids.index(edge_id)]

    def with_states(self, states: Sequence[EdgeValue]) -> "DesignModel":
        return replace(self, states=tuple(states))

    @property
    def is_relaxed(self) -> bool:
        return any(isinstance(s, EdgeState) for s in self.states)

    @property
    def is_discrete(self) -> bool:
        return all(isinstance(s, Mode) for s in self.states)

    def n_components(self) -> int:
        """Number of R/L/C-mode edges of a discrete model."""
        return sum(1 for s in self.states if isinstance(s, Mode) and s.tag.has_param)


def variable_count(model: DesignModel, relaxed: bool | None = None) -> int:
    """Optimization variables of ``model``.

    Relaxed edges contribute one parameter and one switch per active R/L/C
    branch plus one switch for an active short branch (7 for a full edge);
    discrete edges contribute one parameter per R/L/C mode.
    """
    if relaxed is None:
        relaxed = not model.is_discrete
    total = 0
    for st in model.states:
        if isinstance(st, EdgeState):
            if not relaxed:
                raise ModelError("relaxed edge in a model counted as discrete")
            total += st.n_variables
        elif st.tag.has_param:
            total += 1
    return total


def _layout(model: DesignModel):
    """(edge index, kind, branch) triples in packing order."""
    out = []
    for i, st in enumerate(model.states):
        if isinstance(st, EdgeState):
            act = st.active()
            out.extend((i, "param", b) for b in act if b in _PARAM_ATTR)
            out.extend((i, "switch", b) for b in act)
        elif st.tag.has_param:
            out.append((i, "param", st.tag.branch))
    return out


def pack_variables(model: DesignModel) -> np.ndarray:
    """Physical parameter and switch values as a flat vector.

    Edges are visited in topology order; within a relaxed edge the active
    parameters (r, l, c) come first, then the active switches (R, L, C, short).
    """
    vals = []
    for i, kind, b in _layout(model):
        st = model.states[i]
        if isinstance(st, Mode):
            vals.append(st.param)
        elif kind == "param":
            vals.append(st.param(b))
        else:
            vals.append(st.switch(b))
    return np.asarray(vals, dtype=float)


def unpack_variables(model: DesignModel, vector) -> DesignModel:
    vector = np.asarray(vector, dtype=float).ravel()
    layout = _layout(model)
    if vector.shape[0] != len(layout):
        raise ModelError(f"vector has {vector.shape[0]} entries, model has {len(layout)} variables")
    updates: dict = {}
    for (i, kind, b), v in zip(layout, vector):
        key = _PARAM_ATTR[b] if kind == "param" else _SWITCH_ATTR[b]
        updates.setdefault(i, {})[key] = float(v)
    states = list(model.states)
    for i, upd in updates.items():
        st = states[i]
        if isinstance(st, Mode):
            states[i] = Mode(st.tag, upd[_PARAM_ATTR[st.tag.branch]])
        else:
            states[i] = replace(st, **upd)
    return model.with_states(states)


def variable_kinds(model: DesignModel) -> list:
    """Per-variable ``(kind, branch)`` pairs aligned with :func:`pack_variables`."""
    return [(kind, b) for _, kind, b in _layout(model)]


def _log_uniform(rng: np.random.Generator, lo: float, hi: float) -> float:
    if lo == hi:
        return lo
    return float(np.exp(rng.uniform(np.log(lo), np.log(hi))))


_TAGS = (ModeTag.OPEN, ModeTag.SHORT, ModeTag.RESISTOR, ModeTag.INDUCTOR, ModeTag.CAPACITOR)


def random_mode(rng: np.random.Generator, bounds: ParameterBounds) -> Mode:
    tag = _TAGS[rng.integers(len(_TAGS))]
    if tag.has_param:
        return Mode(tag, _log_uniform(rng, *bounds.for_tag(tag)))
    return Mode(tag)


def sample_random_states(topology: MetaTopology, seed, bounds: ParameterBounds | None = None,
                         **scenario) -> DesignModel:
    """Discrete model with every edge's mode drawn uniformly from the five tags.

    ``seed`` may be an int or a ``numpy.random.Generator``; extra keyword
    arguments (``source``, ``load_resistance``, ``epsilon``) set the scenario.
    """
    bounds = bounds or ParameterBounds()
    rng = np.random.default_rng(seed)
    states = [random_mode(rng, bounds) for _ in topology.edges]
    return DesignModel(topology, tuple(states), **scenario)


def initial_relaxed_model(topology: MetaTopology, seed, bounds: ParameterBounds | None = None,
                          switch: float = 0.5, **scenario) -> DesignModel:
    """Relaxed model with log-uniform random parameters and all switches at ``switch``."""
    bounds = bounds or ParameterBounds()
    rng = np.random.default_rng(seed)
    states = []
    for _ in topology.edges:
        r, l, c = (_log_uniform(rng, *bounds.for_branch(b)) for b in PARAM_BRANCHES)
        states.append(EdgeState(r, l, c, switch, switch, switch, switch))
    return DesignModel(topology, tuple(states), **scenario)
