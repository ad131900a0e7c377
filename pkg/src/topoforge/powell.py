"""Powell's conjugate-direction method with a Brent line search."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import OptimizationError

_GOLD = 0.3819660112501051  # 2 - golden ratio
_GROW = 1.618033988749895
_TINY = 1e-300


@dataclass(frozen=True)
class OptimizerConfig:
    max_iterations: int = 150
    f_tolerance: float = 1e-8
    max_evaluations: int = 100_000
    line_search_tolerance: float = 1e-6
    initial_step: float = 1.0

    def __post_init__(self):
        if self.max_iterations < 1 or self.max_evaluations < 1:
            raise OptimizationError("iteration and evaluation budgets must be positive")
        if not (self.f_tolerance > 0 and self.line_search_tolerance > 0 and self.initial_step > 0):
            raise OptimizationError("tolerances and initial step must be positive")


@dataclass
class OptimizerResult:
    x_star: np.ndarray
    f_star: float
    iterations: int
    evaluations: int
    converged: bool
    history: list = field(default_factory=list)


class _BudgetExhausted(Exception):
    pass


class _Counted:
    """Objective wrapper: budget, +inf for non-finite values, best-point tracking."""

    def __init__(self, f, max_evaluations):
        self.f = f
        self.max_evaluations = max_evaluations
        self.n = 0
        self.best_x = None
        self.best_f = math.inf

    def __call__(self, x):
        if self.n >= self.max_evaluations:
            raise _BudgetExhausted
        self.n += 1
        try:
            v = float(self.f(x))
        except (ArithmeticError, ValueError):
            v = math.inf
        if not math.isfinite(v):
            v = math.inf
        if v < self.best_f or self.best_x is None:
            self.best_f = v
            self.best_x = np.array(x, dtype=float, copy=True)
        return v


def _brent(phi, a, b, tol, x=None, fx=None, max_iter=200):
    """Brent's minimizer on ``[a, b]``; returns ``(x, f(x))``."""
    if a > b:
        a, b = b, a
    if x is None:
        x = a + _GOLD * (b - a)
        fx = phi(x)
    w = v = x
    fw = fv = fx
    d = e = 0.0
    for _ in range(max_iter):
        m = 0.5 * (a + b)
        tol1 = tol * abs(x) + 1e-12
        tol2 = 2.0 * tol1
        if abs(x - m) <= tol2 - 0.5 * (b - a):
            break
        golden = True
        if abs(e) > tol1 and math.isfinite(fx) and math.isfinite(fw) and math.isfinite(fv):
            r = (x - w) * (fx - fv)
            q = (x - v) * (fx - fw)
            p = (x - v) * q - (x - w) * r
            q = 2.0 * (q - r)
            if q > 0.0:
                p = -p
            q = abs(q)
            etemp, e = e, d
            if abs(p) < abs(0.5 * q * etemp) and q * (a - x) < p < q * (b - x):
                d = p / q
                u = x + d
                if u - a < tol2 or b - u < tol2:
                    d = tol1 if x < m else -tol1
                golden = False
        if golden:
            e = (b - x) if x < m else (a - x)
            d = _GOLD * e
        u = x + d if abs(d) >= tol1 else x + math.copysign(tol1, d)
        fu = phi(u)
        if fu <= fx:
            if u < x:
                b = x
            else:
                a = x
            v, fv, w, fw, x, fx = w, fw, x, fx, u, fu
        else:
            if u < x:
                a = u
            else:
                b = u
            if fu <= fw or w == x:
                v, fv, w, fw = w, fw, u, fu
            elif fu <= fv or v == x or v == w:
                v, fv = u, fu
    return x, fx


def line_minimize(phi, bracket, tol: float = 1e-6):
    """Minimize a scalar function on the interval ``bracket = (lo, hi)``.

    The endpoints are evaluated too, so a monotone function returns its
    lower endpoint. Non-finite values at the endpoints shrink the interval
    towards its finite end; if no finite value is found an
    :class:`OptimizationError` is raised.
    """
    lo, hi = float(bracket[0]), float(bracket[1])
    if lo > hi:
        lo, hi = hi, lo
    flo, fhi = phi(lo), phi(hi)
    for _ in range(60):
        if math.isfinite(flo) and math.isfinite(fhi):
            break
        if not math.isfinite(flo) and not math.isfinite(fhi):
            mid = 0.5 * (lo + hi)
            fmid = phi(mid)
            if not math.isfinite(fmid):
                raise OptimizationError("objective is non-finite throughout the bracket")
            return mid, fmid
        if not math.isfinite(flo):
            lo = lo + 0.5 * (hi - lo)
            flo = phi(lo)
        else:
            hi = hi - 0.5 * (hi - lo)
            fhi = phi(hi)
    x, fx = _brent(phi, lo, hi, tol)
    best = min((fx, x), (flo, lo), (fhi, hi))
    return best[1], best[0]


def _bracket(phi, f0, step, max_expand=60):
    """Golden expansion from 0; returns ``(a, b, c, fb)`` with ``f(b) <= f(a), f(c)``."""
    a, fa = 0.0, f0
    b = step
    fb = phi(b)
    shrink = 0
    while not math.isfinite(fb) and shrink < 20:
        b *= 0.1
        fb = phi(b)
        shrink += 1
    if fb > fa:
        a, b, fa, fb = b, a, fb, fa
    c = b + _GROW * (b - a)
    fc = phi(c)
    n = 0
    while fb > fc and n < max_expand:
        a, fa, b, fb = b, fb, c, fc
        c = b + _GROW * (b - a)
        fc = phi(c)
        n += 1
    return a, b, c, fb


def _line_search(f, x, direction, fx, step, tol):
    def phi(alpha):
        return f(x + alpha * direction)

    a, b, c, fb = _bracket(phi, fx, step)
    if b == 0.0 and not (fb < fx):
        alpha, fnew = _brent(phi, a, c, tol, x=0.0, fx=fx)
    else:
        alpha, fnew = _brent(phi, a, c, tol, x=b, fx=fb)
    if not fnew < fx:
        return 0.0, fx
    return alpha, fnew


def minimize(f, x0, cfg: OptimizerConfig | None = None) -> OptimizerResult:
    """Minimize ``f`` from ``x0`` without derivatives.

    Each iteration line-minimizes along every direction of the current set,
    then along the net displacement. The direction that gave the largest
    decrease is dropped and the displacement appended. The set is reset to
    the coordinate axes every ``2n`` iterations. Non-finite objective values
    count as +inf. Stops when an iteration improves f by less than
    ``f_tolerance`` relative, or when a budget runs out; the best point seen
    is returned.
    """
    cfg = cfg or OptimizerConfig()
    x = np.array(x0, dtype=float, copy=True).ravel()
    n = x.size
    counted = _Counted(f, cfg.max_evaluations)
    fx = counted(x)
    if not math.isfinite(fx):
        raise OptimizationError("objective is not finite at the starting point")
    history = [fx]
    if n == 0:
        return OptimizerResult(x, fx, 0, counted.n, True, history)
    directions = np.eye(n)
    steps = np.full(n, cfg.initial_step)
    iterations = 0
    converged = False
    tol = cfg.line_search_tolerance
    try:
        while iterations < cfg.max_iterations:
            if iterations and iterations % (2 * n) == 0:
                directions = np.eye(n)
                steps[:] = cfg.initial_step
            iterations += 1
            x_start, f_start = x.copy(), fx
            big_i, big_drop = 0, -1.0
            for i in range(n):
                alpha, f_new = _line_search(counted, x, directions[i], fx, steps[i], tol)
                if fx - f_new > big_drop:
                    big_i, big_drop = i, fx - f_new
                if alpha != 0.0:
                    steps[i] = abs(alpha)
                x = x + alpha * directions[i]
                fx = f_new
            d = x - x_start
            norm = float(np.linalg.norm(d))
            if norm > 0.0 and n > 1:
                u = d / norm
                alpha, f_new = _line_search(counted, x, u, fx, norm, tol)
                x = x + alpha * u
                fx = f_new
                directions = np.vstack([np.delete(directions, big_i, axis=0), u])
                steps = np.append(np.delete(steps, big_i), max(abs(alpha), norm, 1e-8))
            history.append(fx)
            if 2.0 * (f_start - fx) <= cfg.f_tolerance * (abs(f_start) + abs(fx)) + _TINY:
                converged = True
                break
    except _BudgetExhausted:
        history.append(counted.best_f)
    x_best = counted.best_x if counted.best_f < fx else x
    f_best = min(counted.best_f, fx)
    return OptimizerResult(np.asarray(x_best), float(f_best), iterations, counted.n, converged, history)
