"""Derivative-free minimization over boxes of periodic angles."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize as _scipy_minimize


@dataclass
class OptimizerConfig:
    """Settings for :func:`minimize`.

    ``strategy`` is ``"grid+simplex"``, ``"genetic"`` or ``"auto"`` (grid for
    at most two parameters, genetic above).
    """

    strategy: str = "auto"
    grid_points: int = 32
    grid_cap: int = 4096
    restarts: int = 8
    budget: int = 200_000
    seed: int = 0
    tolerance: float = 1e-6
    population: int = 64
    elite: int = 8
    mutation_sigma: float = 0.1
    generations: int = 200
    polish: int = 4

    def __post_init__(self):
        if self.budget <= 0:
            raise ValueError("budget must be positive")
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")
        if self.strategy not in ("auto", "grid+simplex", "genetic"):
            raise ValueError(f"unknown strategy {self.strategy!r}")

    @classmethod
    def default_for(cls, n_params: int, **overrides) -> "OptimizerConfig":
        return cls(**overrides)

    def resolved_strategy(self, n_params: int) -> str:
        if self.strategy != "auto":
            return self.strategy
        return "grid+simplex" if n_params <= 2 else "genetic"

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, data: dict | str) -> "OptimizerConfig":
        if isinstance(data, str):
            data = json.loads(data)
        return cls(**data)


@dataclass
class OptimizeResult:
    x: np.ndarray
    value: float
    sampled_value: float
    converged: bool
    evaluations: int
    trace: list = field(default_factory=list)
    restarts: list = field(default_factory=list)


class BudgetExhausted(Exception):
    pass


class _Counter:
    """Wraps the objective: wraps angles, counts calls, tracks best-so-far."""

    def __init__(self, fn, lo, hi, budget):
        self.fn = fn
        self.lo = lo
        self.span = hi - lo
        self.budget = budget
        self.calls = 0
        self.best_x = None
        self.best = math.inf
        self.trace: list[float] = []

    def wrap(self, x):
        return self.lo + np.mod(np.asarray(x, dtype=float) - self.lo, self.span)

    def __call__(self, x):
        if self.calls >= self.budget:
            raise BudgetExhausted
        x = self.wrap(x)
        val = float(self.fn(x))
        self.calls += 1
        if val < self.best or (val == self.best and tuple(x) < tuple(self.best_x)):
            self.best, self.best_x = val, x.copy()
        self.trace.append(self.best)
        return val


def grid_points(domain: Sequence[tuple[float, float]], per_axis: int) -> np.ndarray:
    axes = [lo + (hi - lo) * np.arange(per_axis) / per_axis for lo, hi in domain]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def _simplex(counter: _Counter, x0, tol, scale):
    d = len(x0)
    init = np.vstack([x0] + [x0 + scale * np.eye(d)[i] for i in range(d)])
    res = _scipy_minimize(
        counter,
        x0,
        method="Nelder-Mead",
        options={"xatol": tol, "fatol": tol, "initial_simplex": init, "maxfev": 4000 * d},
    )
    return counter.wrap(res.x), float(res.fun), bool(res.success)


def minimize(
    objective: Callable[[np.ndarray], float],
    domain: Sequence[tuple[float, float]],
    config: OptimizerConfig | None = None,
    seeds: Sequence[Sequence[float]] | None = None,
) -> OptimizeResult:
    """Minimize ``objective`` over a box whose axes are periodic.

    ``seeds`` are extra starting points; they are evaluated first and each
    one is polished alongside the heuristic's own starts.

    The returned value never exceeds any evaluated sample.  Ties between
    equal values are broken toward the lexicographically smallest point, so
    results are deterministic for a given seed.
    """
    config = config or OptimizerConfig()
    domain = [(float(a), float(b)) for a, b in domain]
    d = len(domain)
    lo = np.array([a for a, _ in domain])
    hi = np.array([b for _, b in domain])
    counter = _Counter(objective, lo, hi, config.budget)
    strategy = config.resolved_strategy(d)
    restarts = []
    converged = True
    sampled = math.inf
    seeds = [np.asarray(x, dtype=float) for x in (seeds or [])]
    for x in seeds:
        if x.shape != (d,):
            raise ValueError(f"seed has shape {x.shape}, expected ({d},)")
    try:
        seed_vals = [counter(x) for x in seeds]
        if strategy == "grid+simplex":
            per_axis = max(2, min(config.grid_points, int(math.floor(config.grid_cap ** (1.0 / d) + 1e-9))))
            pts = grid_points(domain, per_axis)
            vals = np.array([counter(p) for p in pts])
            sampled = float(vals.min())
            order = np.lexsort((*(pts[:, k] for k in reversed(range(d))), vals))
            starts = pts[order[: config.restarts]]
            scale = (hi - lo) / per_axis
        else:
            starts, sampled = _genetic(counter, lo, hi, config, seeds)
            scale = np.full(d, 0.05)
        if seed_vals:
            sampled = min(sampled, min(seed_vals))
        starts = list(starts) + [x for _, x in sorted(zip(seed_vals, seeds), key=lambda t: t[0])]
        for x0 in starts:
            x, val, ok = _simplex(counter, np.asarray(x0, dtype=float), config.tolerance, scale)
            restarts.append((x, val))
            converged &= ok
        # simplices collapse early near kinks of the objective; restart small from the champion
        if restarts:
            x, val, ok = _simplex(counter, counter.best_x.copy(), config.tolerance, np.asarray(scale) * 1e-2)
            restarts.append((x, val))
    except BudgetExhausted:
        converged = False
    if counter.best_x is None:
        raise RuntimeError("objective was never evaluated")
    return OptimizeResult(
        x=counter.best_x,
        value=counter.best,
        sampled_value=sampled if math.isfinite(sampled) else counter.best,
        converged=converged,
        evaluations=counter.calls,
        trace=counter.trace,
        restarts=restarts,
    )


def _genetic(counter: _Counter, lo, hi, cfg: OptimizerConfig, seeds=()):
    """Elitist real-coded GA; returns the best individuals for polishing."""
    rng = np.random.default_rng(cfg.seed)
    d = len(lo)
    pop = lo + (hi - lo) * rng.random((cfg.population, d))
    for i, x in enumerate(seeds[: cfg.population]):
        pop[i] = counter.wrap(x)
    fit = np.array([counter(x) for x in pop])
    for _ in range(cfg.generations):
        order = np.argsort(fit, kind="stable")
        pop, fit = pop[order], fit[order]
        children = []
        while len(children) < cfg.population - cfg.elite:
            a = pop[min(rng.integers(0, cfg.population, 3))]
            b = pop[min(rng.integers(0, cfg.population, 3))]
            mask = rng.random(d) < 0.5
            child = np.where(mask, a, b)
            child = child + cfg.mutation_sigma * rng.standard_normal(d)
            children.append(counter.wrap(child))
        children = np.array(children)
        child_fit = np.array([counter(x) for x in children])
        pop = np.vstack([pop[: cfg.elite], children])
        fit = np.concatenate([fit[: cfg.elite], child_fit])
    order = np.argsort(fit, kind="stable")
    return pop[order[: max(1, cfg.polish)]], float(fit[order[0]])
