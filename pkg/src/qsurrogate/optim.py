"""Bounded minimizers used on the surrogate."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

import numpy as np
from scipy.optimize import minimize


class NonFiniteObjective(FloatingPointError):
    pass


@dataclass(frozen=True)
class BoundBox:
    lower: tuple[float, ...]
    upper: tuple[float, ...]
    half_open: bool = False  # upper edge excluded, i.e. [lower, upper)

    def __post_init__(self):
        lower = tuple(float(v) for v in self.lower)
        upper = tuple(float(v) for v in self.upper)
        if len(lower) != len(upper) or not lower:
            raise ValueError("lower and upper must be non-empty and equally long")
        if any(lo >= hi for lo, hi in zip(lower, upper)):
            raise ValueError("every lower bound must be below its upper bound")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @property
    def d(self) -> int:
        return len(self.lower)

    @classmethod
    def maxcut(cls, p: int) -> "BoundBox":
        """gamma in [-pi/2, pi/2], beta in [-pi/4, pi/4]."""
        return cls((-np.pi / 2,) * p + (-np.pi / 4,) * p, (np.pi / 2,) * p + (np.pi / 4,) * p)

    @classmethod
    def heavy_hex(cls, p: int) -> "BoundBox":
        """All 2p angles in [-pi/2, pi/2)."""
        return cls((-np.pi / 2,) * (2 * p), (np.pi / 2,) * (2 * p), half_open=True)

    @property
    def lo(self) -> np.ndarray:
        return np.array(self.lower)

    @property
    def hi(self) -> np.ndarray:
        return np.array(self.upper)

    def clip(self, x: np.ndarray) -> np.ndarray:
        hi = self.hi
        if self.half_open:
            hi = np.nextafter(hi, -np.inf)
        return np.clip(x, self.lo, hi)

    def contains(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        upper_ok = np.all(x < self.hi) if self.half_open else np.all(x <= self.hi)
        return bool(np.all(x >= self.lo) and upper_ok)

    def sample(self, rng: np.random.Generator, m: int) -> np.ndarray:
        pts = self.lo + rng.random((m, self.d)) * (self.hi - self.lo)
        return self.clip(pts)

    def to_dict(self) -> dict:
        return {"lower": list(self.lower), "upper": list(self.upper), "half_open": self.half_open}

    @classmethod
    def from_dict(cls, data: dict) -> "BoundBox":
        return cls(tuple(data["lower"]), tuple(data["upper"]), bool(data.get("half_open", False)))


@dataclass(frozen=True)
class DeConfig:
    npop: int | None = None  # None -> 10 * d, i.e. 20p for d = 2p angles
    gtol: int = 500
    ftol: float = 5e-4
    max_gens: int = 5000
    mutation: float = 0.8
    crossover: float = 0.9
    seed: int = 0

    def __post_init__(self):
        if self.npop is not None and self.npop < 4:
            raise ValueError("npop must be >= 4")
        if not 0.0 < self.mutation < 2.0:
            raise ValueError("mutation factor must lie in (0, 2)")
        if not 0.0 <= self.crossover <= 1.0:
            raise ValueError("crossover rate must lie in [0, 1]")
        if self.gtol < 1 or self.max_gens < 1:
            raise ValueError("gtol and max_gens must be positive")

    def population(self, d: int) -> int:
        return self.npop if self.npop is not None else max(4, 10 * d)

    def with_seed(self, seed: int) -> "DeConfig":
        return replace(self, seed=int(seed))


@dataclass(frozen=True)
class OptimizerReport:
    best_theta: np.ndarray
    best_value: float
    generations: int
    evaluations: int
    terminated_by: str  # "ftol_gtol", "max_gens" or "simplex"
    history: tuple[float, ...] = ()


def _batch(objective: Callable) -> Callable[[np.ndarray], np.ndarray]:
    if getattr(objective, "vectorized", False):
        return lambda pts: np.asarray(objective(pts), dtype=float)
    return lambda pts: np.array([float(objective(x)) for x in pts])


def _check(values: np.ndarray, pts: np.ndarray) -> None:
    bad = ~np.isfinite(values)
    if bad.any():
        raise NonFiniteObjective(f"objective returned {values[bad][0]} at {pts[bad][0].tolist()}")


def differential_evolution(objective: Callable, bounds: BoundBox, cfg: DeConfig = DeConfig()) -> OptimizerReport:
    """rand/1/bin differential evolution with clipping and greedy selection.

    Stops once the best value has improved by no more than ``ftol`` over the
    last ``gtol`` generations, or after ``max_gens`` generations. Objectives
    with a truthy ``vectorized`` attribute are called once per generation
    with an (npop, d) array.
    """
    evaluate = _batch(objective)
    rng = np.random.default_rng(cfg.seed)
    d = bounds.d
    npop = cfg.population(d)
    pop = bounds.sample(rng, npop)
    fit = evaluate(pop)
    _check(fit, pop)
    history = [float(fit.min())]
    rows = np.arange(npop)
    terminated_by = "max_gens"
    gen = 0
    while gen < cfg.max_gens:
        gen += 1
        # three distinct donors per target, none equal to the target
        keys = rng.random((npop, npop))
        keys[rows, rows] = np.inf
        donors = np.argpartition(keys, 3, axis=1)[:, :3]
        mutant = pop[donors[:, 0]] + cfg.mutation * (pop[donors[:, 1]] - pop[donors[:, 2]])
        cross = rng.random((npop, d)) < cfg.crossover
        cross[rows, rng.integers(0, d, size=npop)] = True
        trial = bounds.clip(np.where(cross, mutant, pop))
        trial_fit = evaluate(trial)
        _check(trial_fit, trial)
        better = trial_fit <= fit
        pop[better] = trial[better]
        fit[better] = trial_fit[better]
        history.append(float(fit.min()))
        if gen >= cfg.gtol and history[gen - cfg.gtol] - history[gen] <= cfg.ftol:
            terminated_by = "ftol_gtol"
            break
    best = int(np.argmin(fit))
    return OptimizerReport(
        best_theta=pop[best].copy(),
        best_value=float(fit[best]),
        generations=gen,
        evaluations=npop * (gen + 1),
        terminated_by=terminated_by,
        history=tuple(history),
    )


def multistart_local(
    objective: Callable,
    bounds: BoundBox,
    n_starts: int = 10,
    seed: int = 0,
    xatol: float = 1e-8,
    fatol: float = 1e-10,
    maxiter: int | None = None,
) -> OptimizerReport:
    """Bounded Nelder-Mead from ``n_starts`` uniform random starts; best end point wins."""
    if n_starts < 1:
        raise ValueError("n_starts must be >= 1")
    rng = np.random.default_rng(seed)
    starts = bounds.sample(rng, n_starts)
    return _polish_from(objective, bounds, starts, xatol, fatol, maxiter)


def _polish_from(objective, bounds, starts, xatol=1e-8, fatol=1e-10, maxiter=None) -> OptimizerReport:
    scalar = _batch(objective)

    def f(x):
        value = scalar(bounds.clip(np.asarray(x))[None, :])[0]
        if not np.isfinite(value):
            raise NonFiniteObjective(f"objective returned {value} at {x.tolist()}")
        return value

    limits = list(zip(bounds.lower, bounds.upper))
    best_x, best_f, nfev, nit = None, np.inf, 0, 0
    for x0 in starts:
        res = minimize(
            f,
            x0,
            method="Nelder-Mead",
            bounds=limits,
            options={"xatol": xatol, "fatol": fatol, "maxiter": maxiter or 400 * bounds.d},
        )
        nfev += res.nfev
        nit += res.nit
        x = bounds.clip(res.x)
        value = f(x)
        if value < best_f:
            best_x, best_f = x, value
    return OptimizerReport(best_x, float(best_f), nit, nfev, "simplex")


def rescale_objective(objective: Callable, n: int) -> Callable:
    """theta -> objective(theta) / n, keeping the ``vectorized`` flag."""
    if n < 1:
        raise ValueError("n must be >= 1")

    def scaled(theta):
        return objective(theta) / n

    scaled.vectorized = getattr(objective, "vectorized", False)
    return scaled
