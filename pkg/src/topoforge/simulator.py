"""Fixed-step transient simulation by modified nodal analysis.

Unknowns are the non-ground node voltages, the source branch current and one
current per inductor. Capacitors and inductors enter through the dynamic
matrix ``Cm`` of ``G x + Cm x' = b``; discretizing with Backward Euler or the
trapezoidal rule gives the usual resistive companion models. Every design
starts at rest (capacitor voltages and inductor currents zero) and the source
is applied from the first step on, so the sample at ``t0`` is the rest state.
The first step always uses Backward Euler, which absorbs the discontinuity of
a step input without trapezoidal ringing.
"""
from __future__ import annotations

import warnings
from collections import deque
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .exceptions import (DisconnectedError, KCLViolationError, ModelError,
                         NonFiniteError, SingularSystemError)
from .netlist import ComponentGraph, as_component_graph, switch_resistance

INTEGRATORS = ("BackwardEuler", "Trapezoidal")


@dataclass(frozen=True, eq=False)
class Waveform:
    """Uniformly sampled time series."""

    t0: float
    dt: float
    samples: np.ndarray

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float).ravel()
        if samples.size < 2:
            raise ModelError("a waveform needs at least 2 samples")
        if not np.all(np.isfinite(samples)):
            raise ModelError("waveform samples must be finite")
        if not (np.isfinite(self.dt) and self.dt > 0):
            raise ModelError("waveform dt must be positive")
        samples.flags.writeable = False
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "t0", float(self.t0))
        object.__setattr__(self, "dt", float(self.dt))

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.samples.size)

    @property
    def t_end(self) -> float:
        return self.t0 + self.dt * (self.samples.size - 1)

    def __len__(self):
        return self.samples.size

    def __eq__(self, other):
        if not isinstance(other, Waveform):
            return NotImplemented
        return (self.t0 == other.t0 and self.dt == other.dt
                and np.array_equal(self.samples, other.samples))

    def values(self, times) -> np.ndarray:
        """Linear interpolation, held constant outside the sampled range."""
        return np.interp(np.asarray(times, dtype=float), self.times, self.samples)

    def mean_square(self) -> float:
        return float(np.mean(self.samples ** 2))


@dataclass(frozen=True)
class SimConfig:
    t_end: float = 0.025
    dt: float = 2.5e-4
    integrator: str = "Trapezoidal"
    pivot_tolerance: float = 1e-13
    kcl_tolerance: float = 1e-9

    def __post_init__(self):
        if not (self.dt > 0 and self.t_end > 0 and self.dt < self.t_end):
            raise ModelError(f"need 0 < dt < t_end, got dt={self.dt}, t_end={self.t_end}")
        if self.integrator not in INTEGRATORS:
            raise ModelError(f"integrator must be one of {INTEGRATORS}")
        if not (self.pivot_tolerance > 0 and self.kcl_tolerance > 0):
            raise ModelError("tolerances must be positive")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.n_steps + 1)


def switch_conductance(s: float, epsilon: float) -> float:
    """Conductance of a continuous switch, ``((1-eps)s + eps) / ((eps-1)s + 1)``.

    s = 0 gives epsilon (nearly open), s = 1 gives 1/epsilon (nearly closed)
    and s = 0.5 gives exactly 1 for every epsilon.
    """
    if not 0.0 <= s <= 1.0:
        raise ModelError(f"switch value must lie in [0, 1], got {s!r}")
    if not 0.0 < epsilon < 1.0:
        raise ModelError(f"epsilon must lie in (0, 1), got {epsilon!r}")
    # same operation order in both halves, so s = 0.5 yields num == den exactly
    return (s + epsilon * (1.0 - s)) / ((1.0 - s) + epsilon * s)


# --- connectivity -----------------------------------------------------------

def _adjacency(components):
    adj: dict = {}
    for c in components:
        adj.setdefault(c.a, set()).add(c.b)
        adj.setdefault(c.b, set()).add(c.a)
    return adj


def _reachable(adj, start, blocked=()):
    seen = {start}
    todo = deque([start])
    while todo:
        v = todo.popleft()
        for w in adj.get(v, ()):
            if w not in seen and w not in blocked:
                seen.add(w)
                todo.append(w)
    return seen


def drives_load(graph: ComponentGraph) -> bool:
    """True iff elements connect the source's live terminal to the load's."""
    src, load = graph.source_component, graph.load_component
    gnd = src.b
    targets = {load.a, load.b} - {gnd}
    if src.a in targets:
        return True
    adj = _adjacency(graph.elements)
    return bool(_reachable(adj, src.a, blocked={gnd}) & targets)


# --- assembly ---------------------------------------------------------------

@dataclass(eq=False)
class StampedSystem:
    """MNA matrices of a circuit; rows follow ``index`` then branch currents."""

    G: np.ndarray
    Cm: np.ndarray
    index: dict
    source_row: int
    inductor_rows: dict
    load_pos: int | None
    load_neg: int | None
    dropped: tuple = field(default=())

    @property
    def size(self) -> int:
        return self.G.shape[0]

    def excitation(self) -> np.ndarray:
        e = np.zeros(self.size)
        e[self.source_row] = 1.0
        return e

    def step_matrices(self, dt: float, integrator: str):
        """``(A, B)`` with ``A x[n+1] = B x[n] + (input terms)``."""
        if integrator == "BackwardEuler":
            return self.G + self.Cm / dt, self.Cm / dt
        return self.G + 2.0 * self.Cm / dt, 2.0 * self.Cm / dt - self.G


def assemble_stamps(circuit, dt: float | None = None, integrator: str = "Trapezoidal") -> StampedSystem:
    """Stamp a design model or component graph into MNA matrices.

    Elements in islands not connected to ground carry no current and are
    left out (listed in ``dropped``). ``dt`` and ``integrator`` are accepted
    for symmetry with :meth:`StampedSystem.step_matrices`, which builds the
    per-step companion system from the returned template.
    """
    graph = as_component_graph(circuit)
    gnd = graph.ground
    adj = _adjacency(graph.components)
    live = _reachable(adj, gnd)
    nodes = [v for v in graph.vertices if v in live and v != gnd]
    index = {v: i for i, v in enumerate(nodes)}
    kept = [c for c in graph.components if c.a in live]
    dropped = tuple(c for c in graph.components if c.a not in live)
    inductors = [c for c in kept if c.kind == "L"]
    n = len(nodes)
    size = n + 1 + len(inductors)
    G = np.zeros((size, size))
    Cm = np.zeros((size, size))

    def stamp2(M, a, b, g):
        ia, ib = index.get(a), index.get(b)
        if ia is not None:
            M[ia, ia] += g
        if ib is not None:
            M[ib, ib] += g
        if ia is not None and ib is not None:
            M[ia, ib] -= g
            M[ib, ia] -= g

    def incidence(row, a, b):
        ia, ib = index.get(a), index.get(b)
        if ia is not None:
            G[ia, row] += 1.0
            G[row, ia] += 1.0
        if ib is not None:
            G[ib, row] -= 1.0
            G[row, ib] -= 1.0

    src_row = n
    inductor_rows = {}
    k = n + 1
    for c in kept:
        if c.kind in ("R", "Load"):
            stamp2(G, c.a, c.b, 1.0 / c.value)
        elif c.kind == "C":
            stamp2(Cm, c.a, c.b, c.value)
        elif c.kind == "L":
            incidence(k, c.a, c.b)
            Cm[k, k] -= c.value
            inductor_rows[c.name or k] = k
            k += 1
        elif c.kind == "Source":
            incidence(src_row, c.a, c.b)
    load = graph.load_component
    return StampedSystem(G, Cm, index, src_row, inductor_rows,
                         index.get(load.a), index.get(load.b), dropped)


def _factor(A: np.ndarray, pivot_tolerance: float):
    scale = np.abs(A).max()
    if not np.isfinite(scale):
        raise NonFiniteError("non-finite entries in the MNA matrix")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        lu, piv = scipy.linalg.lu_factor(A, check_finite=False)
    pivots = np.abs(np.diag(lu))
    if scale == 0 or pivots.min() <= pivot_tolerance * scale:
        raise SingularSystemError(
            f"pivot {pivots.min():.3e} below tolerance {pivot_tolerance:.1e} x {scale:.3e}")
    return lu, piv


# --- transient --------------------------------------------------------------

_worst_residual = [0.0]


def worst_kcl_residual() -> float:
    """Largest step residual seen by :func:`simulate` since the last reset."""
    return _worst_residual[0]


def reset_kcl_monitor() -> None:
    _worst_residual[0] = 0.0


@dataclass(eq=False)
class TransientResult:
    waveform: Waveform
    states: np.ndarray
    system: StampedSystem
    inputs: np.ndarray
    max_residual: float

    @property
    def source_current(self) -> np.ndarray:
        """Current delivered by the source out of its positive terminal."""
        return -self.states[:, self.system.source_row]

    def node_voltage(self, node) -> np.ndarray:
        i = self.system.index.get(node)
        if i is None:
            return np.zeros(self.states.shape[0])
        return self.states[:, i].copy()


def simulate(circuit, cfg: SimConfig | None = None) -> TransientResult:
    """Transient run with full state history; see :func:`transient`."""
    cfg = cfg or SimConfig()
    graph = as_component_graph(circuit)
    if not drives_load(graph):
        raise DisconnectedError("no element path from the source to the load")
    system = assemble_stamps(graph, cfg.dt, cfg.integrator)
    times = cfg.times
    u = np.asarray(graph.source.values(times), dtype=float)
    u[0] = 0.0
    if not np.all(np.isfinite(u)):
        raise NonFiniteError("source waveform is not finite")
    e = system.excitation()
    h = cfg.dt

    A1, B1 = system.step_matrices(h, "BackwardEuler")
    lu1 = _factor(A1, cfg.pivot_tolerance)
    if cfg.integrator == "Trapezoidal":
        A, B = system.step_matrices(h, "Trapezoidal")
        lu = _factor(A, cfg.pivot_tolerance)
        forcing = u[1:-1] + u[2:]
    else:
        A, B, lu = A1, B1, lu1
        forcing = u[2:]
    P = scipy.linalg.lu_solve(lu, B, check_finite=False)
    w = scipy.linalg.lu_solve(lu, e, check_finite=False)

    X = np.empty((times.size, system.size))
    X[0] = 0.0
    X[1] = scipy.linalg.lu_solve(lu1, e * u[1], check_finite=False)
    with np.errstate(all="ignore"):
        for k in range(forcing.size):
            X[k + 2] = P @ X[k + 1] + w * forcing[k]
    if not np.all(np.isfinite(X)):
        raise NonFiniteError("transient solution overflowed")

    with np.errstate(all="ignore"):
        r1 = A1 @ X[1] - e * u[1]
        rest = X[2:] @ A.T - X[1:-1] @ B.T - np.outer(forcing, e)
    residual = max(float(np.abs(r1).max()), float(np.abs(rest).max()) if rest.size else 0.0)
    if not residual <= cfg.kcl_tolerance:
        raise KCLViolationError(f"step residual {residual:.3e} exceeds {cfg.kcl_tolerance:.1e}")
    _worst_residual[0] = max(_worst_residual[0], residual)

    vp = X[:, system.load_pos] if system.load_pos is not None else 0.0
    vn = X[:, system.load_neg] if system.load_neg is not None else 0.0
    out = np.broadcast_to(vp - vn, (times.size,)).astype(float)
    return TransientResult(Waveform(0.0, h, out), X, system, u, residual)


def transient(circuit, cfg: SimConfig | None = None) -> Waveform:
    """Load-voltage waveform sampled every ``cfg.dt`` on ``[0, cfg.t_end]``.

    Raises a :class:`~topoforge.exceptions.SimulationError` subclass when the
    design is disconnected, singular, numerically unstable or violates the
    KCL residual bound.
    """
    return simulate(circuit, cfg).waveform


@dataclass(frozen=True)
class Feasibility:
    ok: bool
    reason: str

    def __bool__(self):
        return self.ok


def check_feasible(circuit, cfg: SimConfig | None = None) -> Feasibility:
    """Whether ``circuit`` can be simulated: reason ``Ok``, ``Disconnected`` or ``Singular``."""
    cfg = cfg or SimConfig()
    graph = as_component_graph(circuit)
    if not drives_load(graph):
        return Feasibility(False, "Disconnected")
    system = assemble_stamps(graph, cfg.dt, cfg.integrator)
    try:
        for integ in {"BackwardEuler", cfg.integrator}:
            _factor(system.step_matrices(cfg.dt, integ)[0], cfg.pivot_tolerance)
    except SingularSystemError:
        return Feasibility(False, "Singular")
    except NonFiniteError:
        return Feasibility(False, "Singular")
    return Feasibility(True, "Ok")


__all__ = [
    "Waveform", "SimConfig", "StampedSystem", "TransientResult", "Feasibility",
    "switch_conductance", "switch_resistance", "assemble_stamps", "simulate",
    "transient", "check_feasible", "drives_load", "worst_kcl_residual",
    "reset_kcl_monitor",
]
