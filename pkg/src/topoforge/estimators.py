"""scikit-learn style front end.

``X`` is the column of sample times (uniform, starting at 0) and ``y`` the
target load voltage at those times. ``fit`` designs a circuit on a grid,
``predict`` simulates the fitted circuit at new times.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_times, check_waveform
from .exceptions import SearchError, SimplificationError
from .model import DesignModel, ParameterBounds, generate_grid, initial_relaxed_model
from .netlist import as_component_graph
from .powell import OptimizerConfig
from .relaxation import RelaxationConfig, realize_switches, run_relaxation
from .search import SearchConfig, run_search
from .simplify import SimplifyThresholds, simplify_fixpoint
from .simulator import SimConfig, Waveform, transient


class _DesignerMixin:
    def _topology(self):
        rows, cols = self.grid
        return generate_grid(rows, cols)

    def _scenario(self) -> dict:
        return {"load_resistance": self.load_resistance, "epsilon": self.epsilon}

    def _bounds(self) -> ParameterBounds:
        return self.bounds if self.bounds is not None else ParameterBounds()

    def _finish(self, model: DesignModel, target: Waveform, cost: float):
        self.design_ = model
        self.realized_ = realize_switches(model) if model.is_relaxed else as_component_graph(model)
        try:
            self.simplified_ = simplify_fixpoint(self.realized_, SimplifyThresholds.for_epsilon(model.epsilon))
        except SimplificationError:
            self.simplified_ = self.realized_
        self.cost_ = float(cost)
        self.target_power_ = target.mean_square()
        self.n_features_in_ = 1
        return self

    def predict(self, X) -> np.ndarray:
        """Load voltage of the fitted design at the sample times ``X``."""
        check_is_fitted(self, "design_")
        t = check_times(X)
        dt = float((t[-1] - t[0]) / (t.size - 1))
        wave = transient(self.simplified_, SimConfig(t_end=float(t[-1]), dt=dt))
        return wave.values(t)

    def counts(self) -> dict:
        """Component type counts of the simplified design."""
        check_is_fitted(self, "design_")
        c = self.simplified_.counts()
        return {k: c[k] for k in ("R", "L", "C")}


class RelaxationDesigner(_DesignerMixin, RegressorMixin, BaseEstimator):
    """Continuous relaxation with L1 pressure on the switches.

    One run from a random initial point drawn with ``random_state``.
    """

    def __init__(self, grid=(2, 3), *, lambda0=None, lambda_scale=1e-3, delta=2.0,
                 switch_zero_threshold=1e-2, max_outer=30, solution_tolerance=1e-8,
                 max_evaluations=4000, bounds=None, load_resistance=1.0, epsilon=1e-5,
                 random_state=None):
        self.grid = grid
        self.lambda0 = lambda0
        self.lambda_scale = lambda_scale
        self.delta = delta
        self.switch_zero_threshold = switch_zero_threshold
        self.max_outer = max_outer
        self.solution_tolerance = solution_tolerance
        self.max_evaluations = max_evaluations
        self.bounds = bounds
        self.load_resistance = load_resistance
        self.epsilon = epsilon
        self.random_state = random_state

    def fit(self, X, y):
        target = check_waveform(X, y)
        cfg = RelaxationConfig(
            lambda0=self.lambda0, lambda_scale=self.lambda_scale, delta=self.delta,
            switch_zero_threshold=self.switch_zero_threshold, max_outer=self.max_outer,
            solution_tolerance=self.solution_tolerance,
            inner=OptimizerConfig(max_evaluations=self.max_evaluations),
            bounds=self._bounds(), sim=SimConfig(t_end=target.t_end, dt=target.dt))
        rng = np.random.default_rng(self.random_state)
        model0 = initial_relaxed_model(self._topology(), rng, cfg.bounds, **self._scenario())
        model, trace = run_relaxation(model0, target, cfg)
        self.trace_ = trace
        return self._finish(model, target, trace.final_cost)


class RandomSearchDesigner(_DesignerMixin, RegressorMixin, BaseEstimator):
    """Cost-guided random search over discrete edge modes.

    ``c_th`` is an absolute cost threshold; when it is None the threshold is
    ``c_th_relative`` times the target's mean square.
    """

    def __init__(self, grid=(2, 3), *, n_s=2000, n_o=8, c_th=None, c_th_relative=1e-3,
                 max_generations=100, max_evaluations=2000, bounds=None, load_resistance=1.0,
                 epsilon=1e-5, n_jobs=1, random_state=0):
        self.grid = grid
        self.n_s = n_s
        self.n_o = n_o
        self.c_th = c_th
        self.c_th_relative = c_th_relative
        self.max_generations = max_generations
        self.max_evaluations = max_evaluations
        self.bounds = bounds
        self.load_resistance = load_resistance
        self.epsilon = epsilon
        self.n_jobs = n_jobs
        self.random_state = random_state

    def fit(self, X, y):
        target = check_waveform(X, y)
        c_th = self.c_th if self.c_th is not None else self.c_th_relative * target.mean_square()
        cfg = SearchConfig(
            n_s=self.n_s, n_o=self.n_o, c_th=c_th, seed=int(self.random_state or 0),
            inner=OptimizerConfig(max_iterations=150, max_evaluations=self.max_evaluations),
            max_generations=self.max_generations, bounds=self._bounds(),
            sim=SimConfig(t_end=target.t_end, dt=target.dt),
            thresholds=SimplifyThresholds.for_epsilon(self.epsilon))
        result = run_search(self._topology(), target, cfg, workers=self.n_jobs, **self._scenario())
        self.result_ = result
        self.trace_ = result.trace
        best = result.best
        if best is None:
            raise SearchError(f"no design met the threshold {c_th:.3e} ({result.reason})")
        return self._finish(best.model, target, best.cost)


__all__ = ["RelaxationDesigner", "RandomSearchDesigner"]
