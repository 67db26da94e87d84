"""Primal-dual hybrid gradient for :class:`~structprior.problem.CompositeProblem`.

With ``L`` the (safety-inflated) norm of the stacked operator, step sizes are
``sigma = rho / L`` and ``tau = 0.999 / (rho L)``, and each iteration performs::

    x+ = prox_{tau G}(x - tau A^T y)
    y+ = prox_{sigma F^*}(y + sigma A (2 x+ - x))

starting from ``x = 0``, ``y = 0`` for a fixed number of iterations.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .fields import write_csv
from .problem import CompositeProblem, objective

__all__ = ["SolverConfig", "SolverResult", "DivergenceError", "run", "primal_dual_gap",
           "step_sizes", "write_history"]


class DivergenceError(RuntimeError):
    """A PDHG iterate became non-finite."""

    def __init__(self, iteration: int, component: str):
        super().__init__(f"non-finite {component} iterate at iteration {iteration}")
        self.iteration = iteration
        self.component = component


@dataclass(frozen=True)
class SolverConfig:
    rho: float = 1.0
    iterations: int = 3000
    norm_safety: float = 1.01
    log_every: int = 0
    seed: int = 0
    with_gap: bool = False

    def __post_init__(self):
        if not self.rho > 0:
            raise ValueError("rho must be positive")
        if self.iterations < 0:
            raise ValueError("iterations must be nonnegative")
        if self.norm_safety < 1:
            raise ValueError("norm_safety must be >= 1")


@dataclass
class SolverResult:
    x: tuple[np.ndarray, ...]
    y: list[np.ndarray]
    sigma: float
    tau: float
    opnorm: float
    history: list[dict] = field(default_factory=list)

    @property
    def u(self) -> np.ndarray:
        return self.x[0]


def step_sizes(opnorm: float, rho: float = 1.0) -> tuple[float, float]:
    return rho / opnorm, 0.999 / (rho * opnorm)


def _finite(arrays, k, what):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise DivergenceError(k, what)


def run(p: CompositeProblem, cfg: SolverConfig = SolverConfig(),
        x0=None, y0=None) -> SolverResult:
    """Run PDHG on ``p`` for ``cfg.iterations`` steps.

    History rows (every ``cfg.log_every`` iterations and at the end, when
    ``log_every > 0``) hold ``iteration``, ``objective``, ``best_objective``,
    ``gap`` (``nan`` unless ``cfg.with_gap``) and ``time`` in seconds.
    """
    opnorm = cfg.norm_safety * p.norm
    sigma, tau = step_sizes(opnorm, cfg.rho)
    x = p.zeros_primal() if x0 is None else tuple(np.array(c, dtype=float) for c in x0)
    y = p.zeros_dual() if y0 is None else [np.array(c, dtype=float) for c in y0]
    history: list[dict] = []
    best = np.inf
    t0 = time.perf_counter()

    for k in range(1, cfg.iterations + 1):
        aty = p.adjoint(y)
        x_new = tuple(G.prox(xi - tau * gi, tau)
                      for G, xi, gi in zip(p.simple_term, x, aty))
        _finite(x_new, k, "primal")
        x_ext = tuple(2.0 * a - b for a, b in zip(x_new, x))
        y = [F.conj_prox(yi + sigma * b.forward(x_ext), sigma)
             for F, b, yi in zip(p.functionals, p.blocks, y)]
        _finite(y, k, "dual")
        x = x_new

        if cfg.log_every and (k % cfg.log_every == 0 or k == cfg.iterations):
            obj = objective(p, x)
            best = min(best, obj)
            gap = primal_dual_gap(p, x, y) if cfg.with_gap else np.nan
            history.append({"iteration": k, "objective": obj, "best_objective": best,
                            "gap": gap, "time": time.perf_counter() - t0})

    return SolverResult(x, y, sigma, tau, opnorm, history)


def primal_dual_gap(p: CompositeProblem, x, y) -> float:
    """``P(x) - D(y)`` with ``D(y) = -sum_i F_i^*(y_i) - G^*(-A^T y)``.

    Returns ``inf`` when ``y`` violates a conjugate's domain (norm balls,
    sign constraints) by more than the tolerance of :mod:`structprior.prox`.
    Violations of the constraints from ``G^*`` that fall inside the
    tolerance are charged at ``x``, which keeps the gap nonnegative.
    """
    x = p.check(x)
    primal = objective(p, x)
    aty = p.adjoint(y)
    g_conj = sum(G.convex_conj_at(-c, xi) for G, c, xi in zip(p.simple_term, aty, x))
    f_conj = sum(F.convex_conj(yi) for F, yi in zip(p.functionals, y))
    dual = -f_conj - g_conj
    if not np.isfinite(dual) or not np.isfinite(primal):
        return np.inf
    return float(primal - dual)


def write_history(path, history: list[dict]) -> None:
    write_csv(path, ["iteration", "objective", "gap", "wall_time"],
              ([r["iteration"], repr(r["objective"]), repr(r["gap"]), f"{r['time']:.6f}"]
               for r in history))
