"""Requirements cost, L1-regularized loss and box-constraint elimination."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import ModelError, SimulationError
from .model import DesignModel, EdgeState, ParameterBounds, pack_variables, unpack_variables, variable_kinds
from .simulator import SimConfig, Waveform, transient

INFEASIBLE = math.inf


def _aligned(predicted: Waveform, target: Waveform):
    if not math.isclose(predicted.t0, target.t0, rel_tol=0, abs_tol=1e-12 * max(1.0, predicted.dt)):
        raise ModelError(f"waveforms start at different times ({predicted.t0} vs {target.t0})")
    if predicted.dt == target.dt:
        n = min(len(predicted), len(target))
        return predicted.samples[:n], target.samples[:n]
    t = predicted.times
    keep = t <= target.t_end + 1e-9 * predicted.dt
    if not keep.any():
        raise ModelError("waveforms do not overlap")
    return predicted.samples[keep], target.values(t[keep])


def requirements_cost(predicted: Waveform, target: Waveform) -> float:
    """Mean squared error over the overlapping samples.

    If the sample spacings differ the target is linearly interpolated onto
    the predicted grid.
    """
    p, t = _aligned(predicted, target)
    if p.size == 0:
        raise ModelError("waveforms do not overlap")
    return float(np.mean((p - t) ** 2))


@dataclass(frozen=True)
class LossValue:
    requirements: float
    sparsity: float
    lam: float

    @property
    def total(self) -> float:
        return self.requirements + self.lam * self.sparsity

    @property
    def feasible(self) -> bool:
        return math.isfinite(self.requirements)


def switch_sum(model: DesignModel) -> float:
    """L1 norm of the active switch values (all switch values are non-negative)."""
    return float(sum(st.switch(b) for st in model.states if isinstance(st, EdgeState)
                     for b in st.active()))


def total_loss(model: DesignModel, target: Waveform, lam: float, cfg: SimConfig | None = None) -> LossValue:
    """Requirements cost plus ``lam`` times the switch L1 norm.

    A model that cannot be simulated gets an infinite requirements cost.
    """
    if lam < 0:
        raise ModelError("lambda must be non-negative")
    try:
        cost = requirements_cost(transient(model, cfg), target)
    except SimulationError:
        cost = INFEASIBLE
    if not math.isfinite(cost):
        cost = INFEASIBLE
    return LossValue(cost, switch_sum(model), float(lam))


def box_transform(x_tilde, a, b):
    """Map an unconstrained value onto ``[a, b]`` via ``a + (sin(x~) + 1)(b - a)/2``."""
    if not a < b:
        raise ModelError(f"need a < b, got [{a}, {b}]")
    return a + (np.sin(x_tilde) + 1.0) * (b - a) / 2.0


def inverse_box_transform(x, a, b):
    """Principal-branch inverse of :func:`box_transform`."""
    if not a < b:
        raise ModelError(f"need a < b, got [{a}, {b}]")
    x = np.asarray(x, dtype=float)
    if np.any(x < a) or np.any(x > b):
        raise ModelError(f"value outside [{a}, {b}]")
    ratio = np.clip(2.0 * (x - a) / (b - a) - 1.0, -1.0, 1.0)
    out = np.arcsin(ratio)
    return float(out) if out.ndim == 0 else out


class VariableSpace:
    """Unconstrained coordinates for the variables of a fixed model structure.

    Component parameters are boxed in log space (values span decades);
    switches are boxed on ``[0, 1]``. Degenerate boxes pin the variable.
    """

    def __init__(self, model: DesignModel, bounds: ParameterBounds | None = None):
        self.model = model
        self.bounds = bounds or ParameterBounds()
        kinds = variable_kinds(model)
        lo, hi, log = [], [], []
        for kind, branch in kinds:
            if kind == "param":
                a, b = self.bounds.for_branch(branch)
                lo.append(math.log(a))
                hi.append(math.log(b))
                log.append(True)
            else:
                lo.append(0.0)
                hi.append(1.0)
                log.append(False)
        self.lo = np.asarray(lo, dtype=float)
        self.hi = np.asarray(hi, dtype=float)
        self.log = np.asarray(log, dtype=bool)
        self._free = self.hi > self.lo

    @property
    def size(self) -> int:
        return self.lo.size

    def physical(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        y = self.lo + (np.sin(z) + 1.0) * (self.hi - self.lo) / 2.0
        y = np.where(self._free, y, self.lo)
        x = np.where(self.log, np.exp(y), y)
        # rounding in exp can step just outside the box
        return np.clip(x, np.where(self.log, np.exp(self.lo), self.lo),
                       np.where(self.log, np.exp(self.hi), self.hi))

    def unconstrained(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        y = np.where(self.log, np.log(np.maximum(x, 1e-300)), x)
        y = np.clip(y, self.lo, self.hi)
        span = np.where(self._free, self.hi - self.lo, 1.0)
        return np.arcsin(np.clip(2.0 * (y - self.lo) / span - 1.0, -1.0, 1.0))

    def to_model(self, z) -> DesignModel:
        return unpack_variables(self.model, self.physical(z))

    def from_model(self, model: DesignModel | None = None) -> np.ndarray:
        return self.unconstrained(pack_variables(model or self.model))


class RequirementsObjective:
    """Callable ``z -> C + lam * ||s||_1`` over a :class:`VariableSpace`."""

    def __init__(self, space: VariableSpace, target: Waveform, cfg: SimConfig, lam: float = 0.0):
        self.space = space
        self.target = target
        self.cfg = cfg
        self.lam = float(lam)

    def loss(self, z) -> LossValue:
        return total_loss(self.space.to_model(z), self.target, self.lam, self.cfg)

    def __call__(self, z) -> float:
        return self.loss(z).total
