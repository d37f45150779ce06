"""Initial-terminal problem over a finite horizon.

Given a guess of the distribution sequence, the backward pass solves each
stage problem from ``U^N = G^N`` down to ``n = 0``; the forward pass then
re-evolves ``m0`` under the resulting strategies. A solution is a fixed point
of that map, located here by damped Picard iteration.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from socialmfg.core import (
    CostVector,
    Distribution,
    HorizonSolution,
    ProblemInstance,
    StrategyMatrix,
)
from socialmfg.errors import ConvergenceError, InvalidInputError
from socialmfg.simplex_opt import InnerSolverConfig, _solve

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class HorizonSolverConfig:
    damping: float = 0.5
    max_outer_iters: int = 1000
    fp_tol: float = 1e-8
    inner: InnerSolverConfig = field(default_factory=InnerSolverConfig)
    multistart_count: int = 5

    def __post_init__(self):
        if not 0 < self.damping <= 1:
            raise InvalidInputError("damping must lie in (0, 1]")
        if not self.fp_tol > 0:
            raise InvalidInputError("fp_tol must be positive")
        if self.max_outer_iters < 1:
            raise InvalidInputError("max_outer_iters must be positive")
        if self.multistart_count < 0:
            raise InvalidInputError("multistart_count must be non-negative")


def _stage_costs(m, P, U_next, model):
    c = model.costs(m, P)
    return ((c + U_next[None, :]) * P).sum(axis=1)


def _backward(m_seq: NDArray, instance: ProblemInstance, inner: InnerSolverConfig, warm=None):
    N, s = instance.N, instance.s
    model = instance.cost_model
    U = np.empty((N + 1, s))
    P = np.empty((N, s, s))
    U[N] = instance.terminal_cost.values
    for n in range(N - 1, -1, -1):
        try:
            P[n] = _solve(m_seq[n], U[n + 1], model, inner, None if warm is None else warm[n])[0]
        except ConvergenceError as exc:
            raise ConvergenceError(
                "stage solver failed", residual=exc.residual, best=exc.best, step=n
            ) from exc
        U[n] = _stage_costs(m_seq[n], P[n], U[n + 1], model)
    return U, P


def _forward(P: NDArray, m0: NDArray) -> NDArray:
    m = np.empty((P.shape[0] + 1, m0.size))
    m[0] = m0
    for n in range(P.shape[0]):
        m[n + 1] = m[n] @ P[n]
    return m


def _as_sequence(m_seq, instance: ProblemInstance) -> NDArray:
    arr = np.stack([np.asarray(x, dtype=float) for x in m_seq])
    if arr.shape != (instance.N + 1, instance.s):
        raise InvalidInputError(
            f"distribution sequence has shape {arr.shape}, "
            f"expected {(instance.N + 1, instance.s)}"
        )
    return arr


def backward_pass(
    m_seq, instance: ProblemInstance, cfg: HorizonSolverConfig | None = None
) -> tuple[tuple[CostVector, ...], tuple[StrategyMatrix, ...]]:
    """Optimal strategies and individual costs along a fixed distribution sequence.

    Returns ``(costs, strategies)`` with ``N + 1`` cost vectors (the last one is
    the terminal cost) and ``N`` strategy matrices.
    """
    cfg = cfg or HorizonSolverConfig()
    m = _as_sequence(m_seq, instance)
    if np.max(np.abs(m[0] - instance.m0.probs)) > 1e-12:
        raise InvalidInputError("m_seq[0] must equal the instance's initial distribution")
    U, P = _backward(m, instance, cfg.inner)
    return tuple(CostVector(u) for u in U), tuple(StrategyMatrix(p) for p in P)


def forward_pass(strategies, instance: ProblemInstance) -> tuple[Distribution, ...]:
    if len(strategies) != instance.N:
        raise InvalidInputError(f"expected {instance.N} strategies, got {len(strategies)}")
    P = np.stack([np.asarray(p, dtype=float) for p in strategies])
    if P.shape[1:] != (instance.s, instance.s):
        raise InvalidInputError(f"strategies have shape {P.shape[1:]}, expected s x s")
    return tuple(Distribution(x) for x in _forward(P, instance.m0.probs))


def solve_p1(
    instance: ProblemInstance,
    cfg: HorizonSolverConfig | None = None,
    initial=None,
) -> HorizonSolution:
    """Find a distribution/cost sequence satisfying both the backward cost
    recursion and the forward evolution.

    Iterates ``m <- (1 - theta) m + theta T(m)`` where ``T`` is a backward pass
    followed by a forward pass; the first step is taken undamped because the
    starting sequence is arbitrary. Stops once ``max_n |T(m)^n - m^n| <= fp_tol``.

    The returned distributions are ``T(m)`` itself and the costs are recomputed
    along them, so both equations hold to rounding; the strategies are optimal
    for a sequence within ``fp_tol`` of the stored one.

    Raises:
        ConvergenceError: outer cap reached; ``.history`` holds the residuals.
    """
    cfg = cfg or HorizonSolverConfig()
    model = instance.cost_model
    m0 = instance.m0.probs
    if initial is None:
        m = np.tile(m0, (instance.N + 1, 1))
    else:
        m = _as_sequence(initial, instance)
        m[0] = m0
    warm = None
    history: list[float] = []
    for k in range(cfg.max_outer_iters):
        U, P = _backward(m, instance, cfg.inner, warm)
        m_new = _forward(P, m0)
        r = float(np.max(np.abs(m_new - m)))
        history.append(r)
        log.debug("outer %d residual %.3e", k, r)
        if r <= cfg.fp_tol:
            for n in range(instance.N - 1, -1, -1):
                U[n] = _stage_costs(m_new[n], P[n], U[n + 1], model)
            return HorizonSolution(
                distributions=tuple(Distribution(x) for x in m_new),
                costs=tuple(CostVector(u) for u in U),
                strategies=tuple(StrategyMatrix(p) for p in P),
                fixed_point_residual=r,
                iterations=k + 1,
                residual_history=tuple(history),
            )
        theta = 1.0 if k == 0 else cfg.damping
        m = (1.0 - theta) * m + theta * m_new
        warm = P
    raise ConvergenceError(
        f"no fixed point within {cfg.max_outer_iters} outer iterations",
        residual=history[-1],
        best=m,
        history=history,
    )


def residual_p1(
    solution: HorizonSolution, instance: ProblemInstance, cfg: HorizonSolverConfig | None = None
) -> tuple[float, float]:
    """Re-check a claimed solution.

    Returns ``(max cost-recursion violation, max evolution violation)``, both
    as max-norms over all time steps, evaluated from the stored strategies.
    """
    m, U, P = solution.as_arrays()
    model = instance.cost_model
    cost_gap = float(np.max(np.abs(U[-1] - instance.terminal_cost.values)))
    evo_gap = float(np.max(np.abs(m[0] - instance.m0.probs)))
    for n in range(solution.N):
        cost_gap = max(cost_gap, float(np.max(np.abs(U[n] - _stage_costs(m[n], P[n], U[n + 1], model)))))
        evo_gap = max(evo_gap, float(np.max(np.abs(m[n + 1] - m[n] @ P[n]))))
    return cost_gap, evo_gap


def random_sequence(instance: ProblemInstance, rng: np.random.Generator) -> NDArray:
    """Uniform random simplex point at every time, pinned to ``m0`` at ``n = 0``."""
    m = rng.dirichlet(np.ones(instance.s), size=instance.N + 1)
    m[0] = instance.m0.probs
    return m


def solve_p1_multistart(
    instance: ProblemInstance,
    cfg: HorizonSolverConfig | None = None,
    rng: np.random.Generator | None = None,
) -> list[HorizonSolution]:
    """Run ``cfg.multistart_count`` solves from random initial sequences."""
    cfg = cfg or HorizonSolverConfig()
    rng = rng if rng is not None else np.random.default_rng(0)
    return [
        solve_p1(instance, cfg, random_sequence(instance, rng))
        for _ in range(cfg.multistart_count)
    ]


def trajectory_spread(solutions: list[HorizonSolution]) -> float:
    """Largest entrywise disagreement in ``m``, ``U`` or ``P`` across solutions."""
    if len(solutions) < 2:
        return 0.0
    ref = solutions[0].as_arrays()
    spread = 0.0
    for sol in solutions[1:]:
        for a, b in zip(ref, sol.as_arrays()):
            spread = max(spread, float(np.max(np.abs(a - b))))
    return spread
