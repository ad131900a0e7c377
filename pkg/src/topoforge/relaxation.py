"""Continuous-relaxation design loop with an L1 sparsity schedule.

Every branch switch of the universal components is a continuous variable in
[0, 1]. The loop minimizes ``C + lam * sum(s)`` for a growing ``lam``, drops
branches whose switch fell below a threshold after each accepted level, and
finishes with an unregularized polish. Fractional switches left at the end
are realized as ideal resistors.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace


from .exceptions import ModelError, OptimizationError, SimulationError
from .model import DesignModel, EdgeState, Mode, ParameterBounds, variable_count
from .netlist import ComponentGraph, to_component_graph
from .objective import RequirementsObjective, VariableSpace, requirements_cost
from .powell import OptimizerConfig, minimize
from .simulator import SimConfig, Waveform, check_feasible, transient


@dataclass(frozen=True)
class RelaxationConfig:
    """Hyperparameters of the relaxation loop.

    ``lambda0=None`` starts at ``lambda_scale`` times the initial
    requirements cost. ``solution_tolerance`` is the relative f-tolerance of
    each inner minimization.
    """

    lambda0: float | None = None
    lambda_scale: float = 1e-3
    delta: float = 2.0
    switch_zero_threshold: float = 1e-2
    max_outer: int = 30
    solution_tolerance: float = 1e-8
    inner: OptimizerConfig = field(default_factory=lambda: OptimizerConfig(max_evaluations=4000))
    polish: OptimizerConfig | None = None
    bounds: ParameterBounds = field(default_factory=ParameterBounds)
    sim: SimConfig = field(default_factory=SimConfig)

    def __post_init__(self):
        if self.lambda0 is not None and not self.lambda0 > 0:
            raise ModelError("lambda0 must be positive")
        if not self.lambda_scale > 0:
            raise ModelError("lambda_scale must be positive")
        if not self.delta > 1:
            raise ModelError("delta must exceed 1")
        if not 0 < self.switch_zero_threshold < 1:
            raise ModelError("switch_zero_threshold must lie in (0, 1)")
        if self.max_outer < 1:
            raise ModelError("max_outer must be positive")
        if not self.solution_tolerance > 0:
            raise ModelError("solution_tolerance must be positive")

    def inner_config(self) -> OptimizerConfig:
        return replace(self.inner, f_tolerance=self.solution_tolerance)


@dataclass(frozen=True)
class OuterRecord:
    outer: int
    lam: float
    cost: float
    nvars: int
    seconds: float
    accepted: bool
    restored: int = 0


@dataclass
class RelaxationTrace:
    records: list = field(default_factory=list)
    initial_cost: float = math.nan
    final_cost: float = math.nan
    final_nvars: int = 0
    polish_seconds: float = 0.0

    @property
    def lambdas(self) -> list:
        return [r.lam for r in self.records]

    @property
    def costs(self) -> list:
        return [r.cost for r in self.records]

    @property
    def nvars(self) -> list:
        return [r.nvars for r in self.records]

    def rows(self):
        """CSV rows ``outer, lambda, cost, nvars, seconds``."""
        return [(r.outer, r.lam, r.cost, r.nvars, r.seconds) for r in self.records]


def _cost(model: DesignModel, target: Waveform, sim: SimConfig) -> float:
    try:
        return requirements_cost(transient(model, sim), target)
    except SimulationError:
        return math.inf


def _drop_branches(st: EdgeState, drop) -> EdgeState | Mode:
    keep = st.branches - set(drop)
    if not keep:
        return Mode.open()
    return replace(st, branches=keep)


def eliminate_zero_switches(model: DesignModel, threshold: float = 1e-2,
                            sim: SimConfig | None = None, *, report: dict | None = None) -> DesignModel:
    """Remove every relaxed branch whose switch value is below ``threshold``.

    An edge that loses all its branches becomes Open. If the result cannot be
    simulated, removed branches are restored one at a time, largest switch
    first, until it can; the number restored goes into ``report["restored"]``.
    """
    if not 0 < threshold < 1:
        raise ModelError("threshold must lie in (0, 1)")
    doomed = []  # (switch value, edge index, branch)
    for i, st in enumerate(model.states):
        if isinstance(st, EdgeState):
            doomed.extend((st.switch(b), i, b) for b in st.active() if st.switch(b) < threshold)

    def build(removed):
        per_edge: dict = {}
        for _, i, b in removed:
            per_edge.setdefault(i, []).append(b)
        states = list(model.states)
        for i, bs in per_edge.items():
            states[i] = _drop_branches(states[i], bs)
        return model.with_states(states)

    out = build(doomed)
    restored = 0
    if doomed and not check_feasible(out, sim):
        pending = sorted(doomed, key=lambda d: (-d[0], d[1], d[2]))
        while pending and not check_feasible(out, sim):
            pending.pop(0)
            restored += 1
            out = build(pending)
    if report is not None:
        report["restored"] = restored
    return out


def realize_switches(model: DesignModel, hard_close_above: float = 1.0) -> ComponentGraph:
    """Ideal-element netlist equivalent to a relaxed model.

    Each surviving branch becomes its element in series with a resistor equal
    to the switch's equivalent resistance. Switch values at or above
    ``hard_close_above`` are snapped to 1 (resistance epsilon). With the
    default threshold nothing is snapped, so the netlist has exactly the
    stamps the model itself simulates with.
    """
    if hard_close_above < 1.0:
        states = []
        for st in model.states:
            if isinstance(st, EdgeState):
                upd = {k: 1.0 for k, b in (("s_r", "R"), ("s_l", "L"), ("s_c", "C"), ("s_short", "S"))
                       if b in st.branches and st.switch(b) >= hard_close_above}
                st = replace(st, **upd)
            states.append(st)
        model = model.with_states(states)
    return to_component_graph(model)


def _optimize(model, target, cfg, lam, opt_cfg):
    space = VariableSpace(model, cfg.bounds)
    if space.size == 0:
        return model, _cost(model, target, cfg.sim), 0
    obj = RequirementsObjective(space, target, cfg.sim, lam)
    res = minimize(obj, space.from_model(), opt_cfg)
    best = space.to_model(res.x_star)
    return best, _cost(best, target, cfg.sim), res.evaluations


def run_relaxation(model: DesignModel, target: Waveform, cfg: RelaxationConfig | None = None,
                   seed=None, *, callback=None):
    """Run the relaxation loop from ``model``; returns ``(model, trace)``.

    Each outer iteration minimizes the regularized loss at the current
    ``lam``. If the requirements cost did not get worse, ``lam`` grows by
    ``delta`` and near-zero switches are eliminated; otherwise, or once
    ``max_outer`` levels have run, a final minimization of the requirements
    cost alone is made from the current design and the loop ends. ``seed``
    is accepted for interface symmetry; the loop itself is deterministic.
    """
    cfg = cfg or RelaxationConfig()
    if model.is_discrete:
        raise ModelError("relaxation needs a model with relaxed edges")
    feas = check_feasible(model, cfg.sim)
    if not feas:
        raise ModelError(f"initial model is infeasible ({feas.reason})")
    trace = RelaxationTrace()
    c_init = _cost(model, target, cfg.sim)
    if not math.isfinite(c_init):
        raise ModelError("initial model cannot be simulated")
    trace.initial_cost = c_init
    lam = cfg.lambda0 if cfg.lambda0 is not None else cfg.lambda_scale * max(c_init, 1e-300)
    c_prev = math.inf
    current = model
    inner = cfg.inner_config()
    for outer in range(cfg.max_outer):
        t0 = time.perf_counter()
        nvars = variable_count(current)
        try:
            optimized, c_star, _ = _optimize(current, target, cfg, lam, inner)
        except OptimizationError:
            optimized, c_star = current, _cost(current, target, cfg.sim)
        accepted = c_star <= c_prev
        info = {"restored": 0}
        if accepted:
            c_prev = c_star
            current = eliminate_zero_switches(optimized, cfg.switch_zero_threshold, cfg.sim, report=info)
        else:
            current = optimized
        rec = OuterRecord(outer, lam, c_star, nvars, time.perf_counter() - t0, accepted, info["restored"])
        trace.records.append(rec)
        if callback is not None:
            callback(rec)
        if not accepted:
            break
        lam *= cfg.delta
    t0 = time.perf_counter()
    start_cost = _cost(current, target, cfg.sim)
    try:
        polished, c_final, _ = _optimize(current, target, cfg, 0.0, cfg.polish or inner)
    except OptimizationError:
        polished, c_final = current, start_cost
    if not c_final <= start_cost:
        polished, c_final = current, start_cost
    trace.polish_seconds = time.perf_counter() - t0
    trace.final_cost = c_final
    trace.final_nvars = variable_count(polished)
    return polished, trace


__all__ = ["RelaxationConfig", "RelaxationTrace", "OuterRecord", "run_relaxation",
           "eliminate_zero_switches", "realize_switches"]
