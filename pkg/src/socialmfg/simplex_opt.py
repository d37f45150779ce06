"""Stage problem: minimize the social cost over row-stochastic matrices.

Projected gradient with Armijo backtracking. Each row lives on its own
simplex, so the projection is an exact sort-based projection applied row by
row. Models flagged ``interior_only`` are optimized over the shrunken box
``{P_ij >= eps, sum_j P_ij = 1}``, which is the same sort-based projection
after shifting by ``eps``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from numpy.typing import ArrayLike, NDArray

from socialmfg.core import CostVector, StrategyMatrix, as_matrix, as_vector, _check_dims
from socialmfg.cost_models import CostModel
from socialmfg.errors import ConvergenceError, InvalidInputError

log = logging.getLogger(__name__)

# rows with mass below this are scaled as if they carried this mass
_MASS_FLOOR = 1e-12
# boundary classification slack for KKT multipliers
_ACTIVE_TOL = 1e-12


@dataclass(frozen=True)
class InnerSolverConfig:
    max_iters: int = 5000
    grad_tol: float = 1e-8
    step_init: float = 1.0
    armijo_c: float = 1e-4
    armijo_shrink: float = 0.5
    interior_eps: float = 1e-9

    def __post_init__(self):
        if self.max_iters < 1:
            raise InvalidInputError("max_iters must be positive")
        for name in ("grad_tol", "step_init", "interior_eps"):
            if not getattr(self, name) > 0:
                raise InvalidInputError(f"{name} must be positive")
        for name in ("armijo_c", "armijo_shrink"):
            if not 0 < getattr(self, name) < 1:
                raise InvalidInputError(f"{name} must lie in (0, 1)")


@dataclass(frozen=True)
class KKTReport:
    """Recovered multipliers and optimality-condition violations.

    ``lam[i]`` pairs with the row-sum constraint of row ``i``; ``mu[i, j]`` with
    ``P_ij >= 0`` (or ``>= eps`` on the interior box). Stationarity reads
    ``dH/dP_ij - lam_i - mu_ij = 0``.
    """

    lam: NDArray[np.float64]
    mu: NDArray[np.float64]
    stationarity_residual: float
    complementarity_residual: float


class StageResult(NamedTuple):
    strategy: StrategyMatrix
    value: float
    kkt: KKTReport
    iterations: int
    residual: float


def project_row_to_simplex(v: ArrayLike) -> NDArray[np.float64]:
    """Euclidean projection of ``v`` onto the probability simplex."""
    v = np.asarray(v, dtype=float)
    if v.ndim != 1:
        raise InvalidInputError(f"expected a 1-D vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise InvalidInputError("cannot project a vector with non-finite entries")
    return project_rows(v[None, :])[0]


def project_rows(V: NDArray, lower: float = 0.0) -> NDArray:
    """Project every row of ``V`` onto ``{x : x >= lower, sum x = 1}``."""
    n = V.shape[-1]
    mass = 1.0 - n * lower
    if mass < 0:
        raise InvalidInputError(f"lower bound {lower} infeasible for {n} coordinates")
    Y = V - lower
    U = -np.sort(-Y, axis=-1)
    css = np.cumsum(U, axis=-1) - mass
    k = np.arange(1, n + 1)
    cond = U - css / k > 0
    rho = n - 1 - np.argmax(cond[..., ::-1], axis=-1)
    theta = np.take_along_axis(css, rho[..., None], axis=-1) / (rho[..., None] + 1)
    return np.maximum(Y - theta, 0.0) + lower


def stage_gradient(
    m: ArrayLike, P: ArrayLike, U_next: ArrayLike, model: CostModel
) -> NDArray[np.float64]:
    """``dH/dP_ij = sum_pq (dc_pq/dP_ij) m_p P_pq + c_ij m_i + U_j m_i``."""
    m_, P_, U_ = as_vector(m), as_matrix(P), as_vector(U_next)
    _check_dims(m_, P_, U_)
    return _gradient(m_, P_, U_, model)


def _gradient(m, P, U, model):
    return model.grad(m, P) + m[:, None] * U[None, :]


def _objective(m, P, U, model):
    c = model.costs(m, P)
    return float(np.sum((c + U[None, :]) * P * m[:, None]))


def kkt_residuals(
    m: ArrayLike,
    P: ArrayLike,
    U_next: ArrayLike,
    model: CostModel,
    lower: float | None = None,
) -> KKTReport:
    """Recover multipliers at ``P`` and report how far KKT is from holding.

    ``lam_i`` is the mean gradient over the free coordinates of row ``i``;
    coordinates sitting on their lower bound get ``mu_ij = max(0, g_ij - lam_i)``.
    ``lower`` defaults to the interior clamp of an ``interior_only`` model.
    """
    m_, P_, U_ = as_vector(m), as_matrix(P), as_vector(U_next)
    _check_dims(m_, P_, U_)
    if lower is None:
        lower = InnerSolverConfig.interior_eps if model.interior_only else 0.0
    g = _gradient(m_, P_, U_, model)
    active = P_ <= lower + _ACTIVE_TOL
    free = ~active
    lam = np.empty(P_.shape[0])
    for i in range(P_.shape[0]):
        lam[i] = g[i, free[i]].mean() if free[i].any() else g[i].min()
    mu = np.where(active, np.maximum(0.0, g - lam[:, None]), 0.0)
    stationarity = float(np.max(np.abs(g - lam[:, None] - mu)))
    complementarity = float(np.max(np.abs(mu * P_)))
    return KKTReport(lam, mu, stationarity, complementarity)


def _row_scale(m: NDArray) -> NDArray:
    # diagonal metric: row i's gradient carries a factor m_i for every model
    return np.where(m > 0, 1.0 / np.maximum(m, _MASS_FLOOR), 0.0)[:, None]


def _solve(
    m: NDArray,
    U: NDArray,
    model: CostModel,
    cfg: InnerSolverConfig,
    P0: NDArray | None = None,
    trace: list[float] | None = None,
) -> tuple[NDArray, float, int, float]:
    """Array-level solver; returns ``(P, H(P), iterations, residual)``."""
    s = m.size
    lower = cfg.interior_eps if model.interior_only else 0.0
    P = np.full((s, s), 1.0 / s) if P0 is None else project_rows(np.asarray(P0, float), lower)
    D = _row_scale(m)
    f = _objective(m, P, U, model)
    g = _gradient(m, P, U, model)
    t = cfg.step_init
    prev = None
    residual = np.inf
    if trace is not None:
        trace.append(f)
    for it in range(cfg.max_iters):
        dg = D * g
        residual = float(np.max(np.abs(P - project_rows(P - dg, lower))))
        if residual <= cfg.grad_tol:
            return P, f, it, residual
        if prev is not None:
            sP, sG = P - prev[0], D * (g - prev[1])
            sy = float(np.sum(sP * sG))
            t = float(np.sum(sP * sP)) / sy if sy > 0 else 2.0 * t
            t = min(max(t, 1e-12), 1e12)
        d = project_rows(P - t * dg, lower) - P
        slope = float(np.sum(g * d))
        slack = 1e-13 * max(1.0, abs(f))
        beta = 1.0
        for _ in range(80):
            Pn = P + beta * d
            fn = _objective(m, Pn, U, model)
            if fn <= f + cfg.armijo_c * beta * slope + slack:
                break
            beta *= cfg.armijo_shrink
        else:
            raise ConvergenceError(
                "line search failed", residual=residual, best=P
            )
        prev = (P, g)
        P, f = Pn, fn
        g = _gradient(m, P, U, model)
        if trace is not None:
            trace.append(f)
    dg = D * g
    residual = float(np.max(np.abs(P - project_rows(P - dg, lower))))
    if residual <= cfg.grad_tol:
        return P, f, cfg.max_iters, residual
    raise ConvergenceError(
        f"stage solver reached {cfg.max_iters} iterations", residual=residual, best=P
    )


def solve_stage(
    m: ArrayLike,
    U_next: ArrayLike,
    model: CostModel,
    cfg: InnerSolverConfig | None = None,
    P0: ArrayLike | None = None,
) -> StageResult:
    """Minimize ``H(m, ., U_next)`` over row-stochastic matrices.

    Rows with zero mass do not enter the objective and are returned at their
    starting point (uniform unless ``P0`` is given).

    Raises:
        ConvergenceError: ``cfg.max_iters`` reached before the projected-gradient
            residual dropped below ``cfg.grad_tol``; ``.best`` holds the last iterate.
    """
    cfg = cfg or InnerSolverConfig()
    m_, U_ = as_vector(m, "distribution"), as_vector(U_next, "cost vector")
    if U_.shape != m_.shape:
        raise InvalidInputError(f"cost vector shape {U_.shape} does not match {m_.size} states")
    P, f, iters, residual = _solve(m_, U_, model, cfg, None if P0 is None else as_matrix(P0))
    lower = cfg.interior_eps if model.interior_only else 0.0
    kkt = kkt_residuals(m_, P, U_, model, lower=lower)
    return StageResult(StrategyMatrix(P), f, kkt, iters, residual)


def optimal_social_cost(m, U_next, model, cfg=None, P0=None) -> float:
    """``Phi_m(U)``: the minimal stage social cost."""
    return solve_stage(m, U_next, model, cfg, P0).value


def gamma_operator(m, U_next, model, cfg=None, P0=None) -> CostVector:
    """``Gamma_m(U)``: individual costs along the socially optimal strategy."""
    from socialmfg.core import individual_costs

    res = solve_stage(m, U_next, model, cfg, P0)
    return individual_costs(m, res.strategy, U_next, model)


def theta_operator(m, U_next, model, cfg=None, P0=None):
    """``Theta_U(m)``: the distribution pushed by the optimal strategy."""
    from socialmfg.core import push_forward

    res = solve_stage(m, U_next, model, cfg, P0)
    return push_forward(m, res.strategy)
