"""Box-constrained (mu/mu_w, lambda)-CMA-ES with batched evaluation."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigurationError, InvalidArgumentError, OptimizationFailedError


@dataclass(frozen=True)
class CmaesConfig:
    """``population`` defaults to ``4 + floor(3 ln d)``; ``sigma0`` is a
    fraction of the box width."""

    population: int | None = None
    sigma0: float = 0.3
    iterations: int = 100
    bounds: np.ndarray | None = None
    seed: int = 0
    sigma_floor: float = 1e-14

    def __post_init__(self):
        if self.population is not None and self.population < 4:
            raise ConfigurationError("population must be at least 4")
        if not self.sigma0 > 0:
            raise ConfigurationError("sigma0 must be positive")
        if self.iterations < 1:
            raise ConfigurationError("need at least one generation")
        if self.bounds is not None:
            b = np.asarray(self.bounds, dtype=float)
            if b.ndim != 2 or b.shape[1] != 2 or np.any(b[:, 0] >= b[:, 1]):
                raise ConfigurationError("bounds must be (d, 2) with min < max per dimension")
            object.__setattr__(self, "bounds", b)

    def population_for(self, d: int) -> int:
        if self.population is not None:
            return int(self.population)
        return max(4, 4 + int(math.floor(3.0 * math.log(max(d, 1)))))

    def to_dict(self) -> dict:
        return {
            "population": self.population,
            "sigma0": self.sigma0,
            "iterations": self.iterations,
            "seed": self.seed,
            "bounds": None if self.bounds is None else self.bounds.tolist(),
        }


@dataclass
class OptResult:
    x: np.ndarray
    value: float
    history: list = field(default_factory=list)  # (generation, best so far, generation mean)
    n_evaluations: int = 0
    sigma: float = 0.0

    def to_dict(self) -> dict:
        return {
            "x": self.x.tolist(),
            "value": self.value,
            "history": [list(h) for h in self.history],
            "n_evaluations": self.n_evaluations,
        }


def reflect_unit(u: np.ndarray) -> np.ndarray:
    """Fold arbitrary reals into [0, 1] by mirror reflection at the faces."""
    y = np.mod(u, 2.0)
    return np.where(y > 1.0, 2.0 - y, y)


def minimize(objective: Callable | None, x0, config: CmaesConfig,
             batch_objective: Callable[[np.ndarray], Sequence[float]] | None = None,
             callback: Callable | None = None) -> OptResult:
    """Minimise ``objective`` over the box ``config.bounds``.

    Search runs in unit-box coordinates.  Each generation samples all
    candidates before any evaluation, so results do not depend on how the
    batch is evaluated.  ``batch_objective`` (array ``(B, d)`` -> ``B``
    values) takes precedence over ``objective``.
    """
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    d = x0.size
    if config.bounds is None:
        raise ConfigurationError("CMA-ES needs box bounds")
    lo, hi = config.bounds[:, 0], config.bounds[:, 1]
    if lo.size != d:
        raise InvalidArgumentError(f"x0 has {d} entries, bounds have {lo.size}")
    if np.any(x0 < lo) or np.any(x0 > hi):
        raise InvalidArgumentError("x0 lies outside the bounds")
    width = hi - lo

    def evaluate(X):
        if batch_objective is not None:
            vals = np.asarray(batch_objective(X), dtype=float).reshape(-1)
        else:
            vals = np.array([objective(x) for x in X], dtype=float)
        if vals.size != X.shape[0]:
            raise OptimizationFailedError("objective returned the wrong number of values")
        return vals

    if d == 0:
        v = float(evaluate(x0[None])[0])
        return OptResult(x0, v, [(0, v, v)], 1, 0.0)

    rng = np.random.default_rng(config.seed)
    lam = config.population_for(d)
    mu = lam // 2
    w = math.log(mu + 0.5) - np.log(np.arange(1, mu + 1))
    w /= w.sum()
    mueff = 1.0 / np.sum(w ** 2)
    cc = (4.0 + mueff / d) / (d + 4.0 + 2.0 * mueff / d)
    cs = (mueff + 2.0) / (d + mueff + 5.0)
    c1 = 2.0 / ((d + 1.3) ** 2 + mueff)
    cmu = min(1.0 - c1, 2.0 * (mueff - 2.0 + 1.0 / mueff) / ((d + 2.0) ** 2 + mueff))
    damps = 1.0 + 2.0 * max(0.0, math.sqrt((mueff - 1.0) / (d + 1.0)) - 1.0) + cs
    chi_n = math.sqrt(d) * (1.0 - 1.0 / (4.0 * d) + 1.0 / (21.0 * d * d))

    mean = (x0 - lo) / width
    sigma = float(config.sigma0)
    C = np.eye(d)
    B = np.eye(d)
    D = np.ones(d)
    pc = np.zeros(d)
    ps = np.zeros(d)

    best_x = x0.copy()
    best_f = math.inf
    history = []
    n_evals = 0
    for gen in range(config.iterations):
        Z = rng.standard_normal((lam, d))
        U = reflect_unit(mean + sigma * (Z * D) @ B.T)
        X = lo + U * width
        f = evaluate(X)
        n_evals += lam
        finite = np.isfinite(f)
        if not finite.any():
            raise OptimizationFailedError(f"all {lam} candidates returned non-finite values in generation {gen}")
        ranked = np.where(finite, f, np.inf)
        order = np.argsort(ranked, kind="stable")
        if ranked[order[0]] < best_f:
            best_f = float(ranked[order[0]])
            best_x = X[order[0]].copy()
        history.append((gen, best_f, float(np.mean(f[finite]))))
        if callback is not None:
            callback(gen, best_x, best_f)

        # recombination on the repaired (reflected) samples
        sel = U[order[:mu]]
        old = mean
        mean = w @ sel
        Y = (sel - old) / sigma
        y_w = w @ Y
        inv_sqrt_c = B @ np.diag(1.0 / D) @ B.T
        ps = (1.0 - cs) * ps + math.sqrt(cs * (2.0 - cs) * mueff) * (inv_sqrt_c @ y_w)
        hsig = (np.linalg.norm(ps) / math.sqrt(1.0 - (1.0 - cs) ** (2 * (gen + 1))) / chi_n
                < 1.4 + 2.0 / (d + 1.0))
        pc = (1.0 - cc) * pc + hsig * math.sqrt(cc * (2.0 - cc) * mueff) * y_w
        rank_mu = (Y.T * w) @ Y
        C = ((1.0 - c1 - cmu) * C
             + c1 * (np.outer(pc, pc) + (1 - hsig) * cc * (2.0 - cc) * C)
             + cmu * rank_mu)
        sigma *= math.exp((cs / damps) * (np.linalg.norm(ps) / chi_n - 1.0))
        sigma = min(sigma, 2.0)
        C = np.triu(C) + np.triu(C, 1).T
        evals, B = np.linalg.eigh(C)
        D = np.sqrt(np.maximum(evals, 1e-30))
        if sigma * D.max() < config.sigma_floor:
            break
    return OptResult(best_x, best_f, history, n_evals, sigma)
