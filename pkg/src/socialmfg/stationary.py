"""Stationary solutions ``(m, U, lambda)`` of the infinite-horizon problem.

A stationary solution satisfies

    U + lambda * 1 = Gamma_m(U)      (costs grow by lambda per step)
    m = m P                          (distribution invariant under P)

with ``P`` the socially optimal strategy at ``(m, U)``. The cost equation is
solved by relative value iteration with the first state as reference, so
every stored ``U`` has ``U[0] == 0``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike, NDArray

from socialmfg.core import CostVector, Distribution, StationarySolution, StrategyMatrix, as_vector
from socialmfg.cost_models import CostModel
from socialmfg.errors import ConvergenceError, InvalidInputError
from socialmfg.simplex_opt import InnerSolverConfig, _solve

log = logging.getLogger(__name__)

INTERIOR_FLOOR = 1e-6


@dataclass(frozen=True)
class StationaryConfig:
    damping_m: float = 0.5
    rvi_tol: float = 1e-10
    outer_tol: float = 1e-8
    max_outer: int = 2000
    max_rvi: int = 10_000
    # RVI residuals are measured through the inner solver, so it runs tighter
    inner: InnerSolverConfig = field(default_factory=lambda: InnerSolverConfig(grad_tol=1e-11))

    def __post_init__(self):
        if not 0 < self.damping_m <= 1:
            raise InvalidInputError("damping_m must lie in (0, 1]")
        if not (self.rvi_tol > 0 and self.outer_tol > 0):
            raise InvalidInputError("tolerances must be positive")
        if self.max_outer < 1 or self.max_rvi < 1:
            raise InvalidInputError("iteration caps must be positive")


def _gamma(m, U, model, inner, warm):
    P = _solve(m, U, model, inner, warm)[0]
    c = model.costs(m, P)
    return ((c + U[None, :]) * P).sum(axis=1), P


def _rvi(m: NDArray, U0: NDArray, model: CostModel, cfg: StationaryConfig, warm=None):
    U = U0 - U0[0]
    residual = np.inf
    for k in range(cfg.max_rvi):
        G, P = _gamma(m, U, model, cfg.inner, warm)
        lam = float(G[0])
        residual = float(np.max(np.abs(G - U - lam)))
        if residual <= cfg.rvi_tol:
            return U, lam, P, residual, k + 1
        U = G - lam
        warm = P
    raise ConvergenceError(
        f"relative value iteration reached {cfg.max_rvi} iterations", residual=residual, best=U
    )


def relative_value_iteration(
    m: ArrayLike,
    U0: ArrayLike,
    model: CostModel,
    cfg: StationaryConfig | None = None,
) -> tuple[CostVector, float]:
    """Solve ``U + lambda = Gamma_m(U)`` modulo constants for a fixed ``m``.

    Iterates ``U <- Gamma_m(U) - Gamma_m(U)[0]`` and reads ``lambda`` off the
    reference state. Returns ``(U, lambda)`` with ``U[0] == 0``.
    """
    cfg = cfg or StationaryConfig()
    m_ = as_vector(m, "distribution")
    U_ = as_vector(U0, "cost vector")
    if U_.shape != m_.shape:
        raise InvalidInputError("cost vector and distribution sizes differ")
    if np.min(m_) <= 0:
        raise InvalidInputError("relative value iteration needs a strictly positive m")
    U, lam, _, _, _ = _rvi(m_, U_, model, cfg)
    return CostVector(U), lam


def _guard_interior(m: NDArray) -> NDArray:
    if np.min(m) < INTERIOR_FLOOR:
        log.warning("distribution entry %.3e floored to %.0e", np.min(m), INTERIOR_FLOOR)
        m = np.maximum(m, INTERIOR_FLOOR)
        m = m / m.sum()
    return m


def solve_stationary(
    model: CostModel,
    cfg: StationaryConfig | None = None,
    m0_guess: ArrayLike | None = None,
    s: int | None = None,
) -> StationarySolution:
    """Alternate relative value iteration with a damped distribution update.

    ``m <- (1 - theta) m + theta m P`` after each inner solve; stops when both
    the cost-equation and the distribution-equation residuals are at most
    ``cfg.outer_tol``.

    Raises:
        ConvergenceError: outer cap reached; ``.history`` maps each equation
            to its residual history.
    """
    cfg = cfg or StationaryConfig()
    if m0_guess is None:
        if s is None:
            raise InvalidInputError("give either m0_guess or s")
        m0_guess = np.full(s, 1.0 / s)
    m = Distribution(m0_guess).probs.copy()
    if np.min(m) <= 0:
        raise InvalidInputError("initial guess must be strictly positive")
    U = np.zeros(m.size)
    warm = None
    hist_u: list[float] = []
    hist_m: list[float] = []
    for k in range(cfg.max_outer):
        U, lam, P, res_u, _ = _rvi(m, U, model, cfg, warm)
        res_m = float(np.max(np.abs(m @ P - m)))
        hist_u.append(res_u)
        hist_m.append(res_m)
        if res_u <= cfg.outer_tol and res_m <= cfg.outer_tol:
            return StationarySolution(
                m_bar=Distribution(m),
                u_bar=CostVector(U),
                lambda_bar=lam,
                strategy=StrategyMatrix(P),
                residuals=(res_u, res_m),
                outer_iterations=k + 1,
            )
        m = _guard_interior((1.0 - cfg.damping_m) * m + cfg.damping_m * (m @ P))
        warm = P
    raise ConvergenceError(
        f"stationary iteration reached {cfg.max_outer} outer iterations",
        residual=max(hist_u[-1], hist_m[-1]),
        best=(m, U),
        history={"cost_equation": hist_u, "distribution_equation": hist_m},
    )


def stationary_residuals(
    m: ArrayLike,
    U: ArrayLike,
    lam: float,
    model: CostModel,
    cfg: StationaryConfig | None = None,
    P: ArrayLike | None = None,
) -> tuple[float, float]:
    """Residuals ``(cost equation, distribution equation)`` as max-norms.

    With ``P`` given the equations are checked along that strategy, which is
    deterministic; otherwise the strategy is re-solved from scratch.
    """
    cfg = cfg or StationaryConfig()
    m_, U_ = as_vector(m), as_vector(U)
    if P is None:
        G, P_ = _gamma(m_, U_, model, cfg.inner, None)
    else:
        P_ = as_vector(P) if np.ndim(P) == 1 else np.asarray(P, dtype=float)
        G = ((model.costs(m_, P_) + U_[None, :]) * P_).sum(axis=1)
    return float(np.max(np.abs(G - U_ - lam))), float(np.max(np.abs(m_ @ P_ - m_)))


def critical_value(m: ArrayLike, P: ArrayLike, model: CostModel) -> float:
    """Population-weighted running cost ``sum_ij c_ij(m, P) m_i P_ij``."""
    m_ = as_vector(m)
    P_ = np.asarray(P, dtype=float)
    return float(np.sum(model.costs(m_, P_) * m_[:, None] * P_))


def quotient_norm(U: ArrayLike) -> float:
    """Euclidean norm of ``U`` modulo constant shifts (distance to the span of 1)."""
    u = as_vector(U)
    return float(np.linalg.norm(u - u.mean()))


def solve_stationary_multistart(
    model: CostModel,
    s: int,
    count: int = 5,
    cfg: StationaryConfig | None = None,
    rng: np.random.Generator | None = None,
    min_mass: float = 0.05,
) -> list[StationarySolution]:
    """Solve from ``count`` random interior guesses with every entry >= ``min_mass``."""
    rng = rng if rng is not None else np.random.default_rng(0)
    out = []
    for _ in range(count):
        guess = min_mass + (1.0 - s * min_mass) * rng.dirichlet(np.ones(s))
        out.append(solve_stationary(model, cfg, guess))
    return out
