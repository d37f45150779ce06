"""Independent oracles and sampled assumption probes.

Nothing here calls the projected-gradient path to produce the quantity it is
checking against: the grid oracle enumerates, the competitive-equivalence
oracle solves rows with SLSQP, and gradients are checked by central
differences of the objective.
"""

from __future__ import annotations

import itertools
import logging
import math
import warnings
from dataclasses import asdict, dataclass, field
from typing import Any

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.optimize import minimize

from socialmfg.core import StrategyMatrix, as_matrix, as_vector
from socialmfg.cost_models import CostModel
from socialmfg.errors import InvalidInputError, UnsupportedSizeError
from socialmfg.simplex_opt import InnerSolverConfig, solve_stage, stage_gradient

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class GridOracleConfig:
    resolution: float = 1e-3
    interior_eps: float = 1e-9
    max_points: int = 20_000_000
    chunk: int = 200_000

    def __post_init__(self):
        if not 0 < self.resolution < 1:
            raise InvalidInputError("resolution must lie in (0, 1)")
        if not self.interior_eps >= 0:
            raise InvalidInputError("interior_eps must be non-negative")


def _compositions(K: int, s: int) -> NDArray:
    rows = [c for c in itertools.product(range(K + 1), repeat=s - 1) if sum(c) <= K]
    return np.array([(*c, K - sum(c)) for c in rows], dtype=float) / K


def _objective_batch(m: NDArray, P: NDArray, U: NDArray, model: CostModel) -> NDArray:
    c = model.costs(m, P)
    return np.sum((c + U) * P * m[:, None], axis=(-2, -1))


def grid_oracle_min(
    m: ArrayLike, U_next: ArrayLike, model: CostModel, cfg: GridOracleConfig | None = None
) -> tuple[StrategyMatrix, float]:
    """Exhaustive minimum of the stage objective over a per-row simplex grid.

    Each row ranges over the compositions ``k / K`` (``K = round(1/resolution)``);
    for ``interior_only`` models the grid is mapped affinely into
    ``{P_ij >= eps}`` via ``eps + (1 - s eps) k / K``.
    """
    cfg = cfg or GridOracleConfig()
    m_, U_ = as_vector(m), as_vector(U_next)
    s = m_.size
    if s > 3:
        raise UnsupportedSizeError(f"grid oracle supports at most 3 states, got {s}")
    K = int(round(1.0 / cfg.resolution))
    rows = _compositions(K, s)
    if model.interior_only:
        rows = cfg.interior_eps + (1.0 - s * cfg.interior_eps) * rows
    G = rows.shape[0]
    total = G**s
    if total > cfg.max_points:
        raise UnsupportedSizeError(
            f"grid has {total:.3g} points (limit {cfg.max_points:.3g}); "
            f"coarsen the resolution for s={s}"
        )
    best_val, best_idx = math.inf, 0
    for start in range(0, total, cfg.chunk):
        flat = np.arange(start, min(start + cfg.chunk, total))
        idx = np.unravel_index(flat, (G,) * s)
        P = np.stack([rows[ix] for ix in idx], axis=1)
        vals = _objective_batch(m_, P, U_, model)
        k = int(np.argmin(vals))
        if vals[k] < best_val:
            best_val, best_idx = float(vals[k]), int(flat[k])
    idx = np.unravel_index(best_idx, (G,) * s)
    P = np.stack([rows[ix] for ix in idx])
    return StrategyMatrix(P), best_val


def check_a1(model: CostModel, m: ArrayLike, P1: ArrayLike, P2: ArrayLike) -> float:
    """Monotonicity quantity ``sum_ij (c_ij(m,P1) - c_ij(m,P2)) (P1_ij - P2_ij) m_i``."""
    m_, A, B = as_vector(m), as_matrix(P1), as_matrix(P2)
    diff = model.costs(m_, A) - model.costs(m_, B)
    return float(np.sum(diff * (A - B) * m_[:, None]))


def _phi_theta(model, m, U, inner):
    res = solve_stage(m, U, model, inner)
    return res.value, m @ res.strategy.rows


def check_lemma41(
    model: CostModel,
    m: ArrayLike,
    U1: ArrayLike,
    U2: ArrayLike,
    inner_cfg: InnerSolverConfig | None = None,
) -> float:
    """``Phi_m(U2) - Phi_m(U1) - (U2 - U1) . Theta_{U1}(m)``; should be ``<= 0``."""
    m_, u1, u2 = as_vector(m), as_vector(U1), as_vector(U2)
    phi1, theta1 = _phi_theta(model, m_, u1, inner_cfg)
    phi2, _ = _phi_theta(model, m_, u2, inner_cfg)
    return phi2 - phi1 - float((u2 - u1) @ theta1)


def _gamma(model, m, U, inner):
    res = solve_stage(m, U, model, inner)
    P = res.strategy.rows
    return ((model.costs(m, P) + U[None, :]) * P).sum(axis=1)


def check_a4_sample(
    model: CostModel,
    m1: ArrayLike,
    m2: ArrayLike,
    U1: ArrayLike,
    U2: ArrayLike,
    inner_cfg: InnerSolverConfig | None = None,
    gamma: float = 1.0,
) -> float:
    """Left side of the distribution-monotonicity inequality minus ``gamma |m1 - m2|^2``."""
    a, b = as_vector(m1), as_vector(m2)
    u1, u2 = as_vector(U1), as_vector(U2)
    lhs = float(
        a @ (_gamma(model, a, u2, inner_cfg) - _gamma(model, b, u2, inner_cfg))
        + b @ (_gamma(model, b, u1, inner_cfg) - _gamma(model, a, u1, inner_cfg))
    )
    return lhs - gamma * float(np.sum((a - b) ** 2))


def per_row_optimum(
    model: CostModel, m: ArrayLike, U_next: ArrayLike, P_other: ArrayLike, i: int, eps: float
) -> NDArray:
    """Best reply of a single agent in state ``i``, solved with SLSQP.

    Minimizes ``sum_j (c_ij(m, P) + U_j) q_j`` over the row simplex, with row
    ``i`` of ``P`` replaced by ``q`` and the other rows held at ``P_other``.
    """
    m_, U_ = as_vector(m), as_vector(U_next)
    base = np.array(as_matrix(P_other), dtype=float)
    s = m_.size
    lo = eps if model.interior_only else 0.0

    def f(q):
        P = base.copy()
        P[i] = q
        return float(np.sum((model.costs(m_, P)[i] + U_) * q))

    def df(q, h=1e-7):
        out = np.empty(s)
        for j in range(s):
            e = np.zeros(s)
            e[j] = h
            if q[j] - h > lo and q[j] + h < 1.0:
                out[j] = (f(q + e) - f(q - e)) / (2 * h)
            elif q[j] - h > lo:
                out[j] = (f(q) - f(q - e)) / h
            else:
                out[j] = (f(q + e) - f(q)) / h
        return out

    with warnings.catch_warnings():
        # SLSQP clips slightly out-of-bound trial points and says so
        warnings.simplefilter("ignore", RuntimeWarning)
        res = minimize(
            f,
            np.full(s, 1.0 / s),
            jac=df,
            method="SLSQP",
            bounds=[(lo, 1.0 - (s - 1) * lo)] * s,
            constraints=[{"type": "eq", "fun": lambda q: q.sum() - 1.0, "jac": lambda q: np.ones(s)}],
            options={"ftol": 1e-15, "maxiter": 500},
        )
    return res.x / res.x.sum()


def check_competitive_equivalence(
    model: CostModel,
    m: ArrayLike,
    U_next: ArrayLike,
    inner_cfg: InnerSolverConfig | None = None,
) -> float:
    """Max entrywise gap between the social optimum and per-row best replies."""
    if not model.row_decoupled:
        raise InvalidInputError(f"model {model.name!r} is not row-decoupled")
    inner_cfg = inner_cfg or InnerSolverConfig()
    m_, U_ = as_vector(m), as_vector(U_next)
    social = solve_stage(m_, U_, model, inner_cfg).strategy.rows
    gap = 0.0
    for i in range(m_.size):
        q = per_row_optimum(model, m_, U_, social, i, inner_cfg.interior_eps)
        gap = max(gap, float(np.max(np.abs(q - social[i]))))
    return gap


def row_swap_quantity(model: CostModel, m: ArrayLike, P: ArrayLike, p: int, p2: int) -> float:
    """``sum_j |c_pj(m, P) - c_p'j(m, P~)| P_pj`` where ``P~`` copies row ``p`` into row ``p'``."""
    m_, P_ = as_vector(m), as_matrix(P)
    Pt = P_.copy()
    Pt[p2] = P_[p]
    return float(np.sum(np.abs(model.costs(m_, P_)[p] - model.costs(m_, Pt)[p2]) * P_[p]))


def gamma_spread(
    model: CostModel, m: ArrayLike, U: ArrayLike, inner_cfg: InnerSolverConfig | None = None
) -> float:
    """``max_p Gamma_m(U)_p - min_p Gamma_m(U)_p``."""
    g = _gamma(model, as_vector(m), as_vector(U), inner_cfg)
    return float(g.max() - g.min())


def finite_difference_gradient(
    m: ArrayLike, P: ArrayLike, U_next: ArrayLike, model: CostModel, h: float = 1e-6
) -> NDArray:
    """Central differences of the stage objective, one entry of ``P`` at a time."""
    m_, P_, U_ = as_vector(m), as_matrix(P), as_vector(U_next)
    out = np.empty_like(P_)
    for i, j in np.ndindex(*P_.shape):
        E = np.zeros_like(P_)
        E[i, j] = h
        out[i, j] = (
            _objective_batch(m_, P_ + E, U_, model) - _objective_batch(m_, P_ - E, U_, model)
        ) / (2 * h)
    return out


def gradient_error(m, P, U_next, model: CostModel, h: float = 1e-6) -> float:
    """Max-norm relative gap between the analytic and finite-difference gradients."""
    g = stage_gradient(m, P, U_next, model)
    fd = finite_difference_gradient(m, P, U_next, model, h)
    return float(np.max(np.abs(g - fd)) / max(np.max(np.abs(fd)), 1e-12))


def row_deviation_gap(
    m: ArrayLike,
    P: ArrayLike,
    U_next: ArrayLike,
    model: CostModel,
    rng: np.random.Generator,
    samples: int = 200,
    eps: float = 1e-9,
) -> float:
    """Smallest ``H(P with one row replaced) - H(P)`` over random replacements.

    A negative value means some single-row deviation lowers the social cost.
    """
    m_, P_, U_ = as_vector(m), as_matrix(P), as_vector(U_next)
    s = m_.size
    base = float(_objective_batch(m_, P_, U_, model))
    worst = math.inf
    for _ in range(samples):
        i = int(rng.integers(s))
        q = rng.dirichlet(np.ones(s))
        if model.interior_only:
            q = eps + (1 - s * eps) * q
        Q = P_.copy()
        Q[i] = q
        worst = min(worst, float(_objective_batch(m_, Q, U_, model)) - base)
    return worst


# --- sampling helpers -------------------------------------------------------

def random_interior_distribution(rng: np.random.Generator, s: int, floor: float = 0.05) -> NDArray:
    return floor + (1.0 - s * floor) * rng.dirichlet(np.ones(s))


def random_interior_strategy(rng: np.random.Generator, s: int, floor: float = 0.02) -> NDArray:
    return floor + (1.0 - s * floor) * rng.dirichlet(np.ones(s), size=s)


# --- probe suite ------------------------------------------------------------

@dataclass
class ProbeResult:
    name: str
    passed: bool
    observed: float
    threshold: float
    comparison: str
    samples: int
    seed: int
    detail: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["observed"] = _jsonable(self.observed)
        d["threshold"] = _jsonable(self.threshold)
        return d


def _jsonable(x: float) -> float | str:
    return x if math.isfinite(x) else repr(x)


def run_probes(
    model: CostModel,
    s: int,
    seed: int = 0,
    samples: int = 200,
    inner_cfg: InnerSolverConfig | None = None,
    oracle_cfg: GridOracleConfig | None = None,
    gamma: float | None = None,
    a6_bound: float | None = None,
) -> list[ProbeResult]:
    """Run every probe applicable to ``model`` and return one result per probe.

    Each probe draws from its own generator seeded from ``seed`` so results
    do not depend on which other probes ran.
    """
    inner_cfg = inner_cfg or InnerSolverConfig()
    results: list[ProbeResult] = []

    def rng_for(k: int) -> np.random.Generator:
        return np.random.default_rng([seed, k])

    def U_draw(rng):
        return rng.uniform(-2.0, 2.0, size=s)

    # 0: gradient vs finite differences
    rng = rng_for(0)
    n_fd = min(samples, 100)
    worst = max(
        gradient_error(
            random_interior_distribution(rng, s), random_interior_strategy(rng, s), U_draw(rng), model
        )
        for _ in range(n_fd)
    )
    results.append(ProbeResult("gradient_finite_difference", worst <= 1e-5, worst, 1e-5, "<=", n_fd, seed))

    # 1: monotonicity of costs in the strategy
    rng = rng_for(1)
    vals = [
        check_a1(model, random_interior_distribution(rng, s), random_interior_strategy(rng, s),
                 random_interior_strategy(rng, s))
        for _ in range(samples)
    ]
    lo = min(vals)
    results.append(ProbeResult("cost_monotonicity", lo >= -1e-12, lo, -1e-12, ">=", samples, seed,
                               {"strictly_positive": bool(lo > 0)}))

    # 2: KKT certificate and single-row deviations at solver outputs
    rng = rng_for(2)
    n_kkt = min(samples, 50)
    stat = comp = 0.0
    dev = math.inf
    for _ in range(n_kkt):
        m, U = random_interior_distribution(rng, s), U_draw(rng)
        res = solve_stage(m, U, model, inner_cfg)
        stat = max(stat, res.kkt.stationarity_residual)
        comp = max(comp, res.kkt.complementarity_residual)
        dev = min(dev, row_deviation_gap(m, res.strategy, U, model, rng, 20, inner_cfg.interior_eps))
    kkt_obs = max(stat, comp)
    results.append(ProbeResult("kkt_certificate", kkt_obs <= 1e-6, kkt_obs, 1e-6, "<=", n_kkt, seed,
                               {"stationarity": stat, "complementarity": comp}))
    results.append(ProbeResult("row_deviation", dev >= -inner_cfg.grad_tol, dev, -inner_cfg.grad_tol,
                               ">=", n_kkt, seed))

    # 3: optimal-cost inequality against the linearization
    rng = rng_for(3)
    worst = max(
        check_lemma41(model, random_interior_distribution(rng, s), U_draw(rng), U_draw(rng), inner_cfg)
        for _ in range(samples)
    )
    results.append(ProbeResult("value_supergradient", worst <= 1e-8, worst, 1e-8, "<=", samples, seed))

    # 4: shift identities for the optimal cost and the individual-cost map
    rng = rng_for(4)
    n_shift = min(samples, 100)
    worst = 0.0
    for _ in range(n_shift):
        m, U, a = random_interior_distribution(rng, s), U_draw(rng), float(rng.uniform(-10, 10))
        r0, r1 = solve_stage(m, U, model, inner_cfg), solve_stage(m, U + a, model, inner_cfg)
        worst = max(worst, abs(r1.value - r0.value - a))
        worst = max(worst, float(np.max(np.abs(
            _gamma(model, m, U + a, inner_cfg) - _gamma(model, m, U, inner_cfg) - a))))
    results.append(ProbeResult("shift_identities", worst <= 1e-8, worst, 1e-8, "<=", n_shift, seed))

    # 5: bounded spread of individual costs (observed value logged)
    rng = rng_for(5)
    n_spread = min(samples, 50)
    spread = 0.0
    for _ in range(n_spread):
        U = U_draw(rng) * 5.0 / np.sqrt(s)
        spread = max(spread, gamma_spread(model, random_interior_distribution(rng, s), U, inner_cfg))
    log.info("gamma spread: observed max %.6g over %d samples", spread, n_spread)
    results.append(ProbeResult("gamma_spread", math.isfinite(spread), spread, math.inf, "finite",
                               n_spread, seed))

    if model.row_decoupled:
        rng = rng_for(6)
        n_ce = min(samples, 20)
        worst = max(
            check_competitive_equivalence(model, random_interior_distribution(rng, s), U_draw(rng), inner_cfg)
            for _ in range(n_ce)
        )
        results.append(ProbeResult("competitive_equivalence", worst <= 1e-6, worst, 1e-6, "<=", n_ce, seed))

    if gamma is not None:
        rng = rng_for(7)
        lo = min(
            check_a4_sample(model, random_interior_distribution(rng, s), random_interior_distribution(rng, s),
                            U_draw(rng), U_draw(rng), inner_cfg, gamma)
            for _ in range(samples)
        )
        results.append(ProbeResult("distribution_monotonicity", lo >= -1e-8, lo, -1e-8, ">=", samples, seed,
                                   {"gamma": gamma}))

    if a6_bound is not None:
        rng = rng_for(8)
        worst = 0.0
        n_a6 = min(samples, 50)
        for _ in range(n_a6):
            m = random_interior_distribution(rng, s)
            P = solve_stage(m, U_draw(rng), model, inner_cfg).strategy.rows
            for p, p2 in itertools.permutations(range(s), 2):
                worst = max(worst, row_swap_quantity(model, m, P, p, p2))
        results.append(ProbeResult("row_swap_bound", worst <= a6_bound, worst, a6_bound, "<=", n_a6, seed))

    if s <= 3:
        oracle_cfg = oracle_cfg or GridOracleConfig(resolution=1e-3 if s == 2 else 0.1)
        rng = rng_for(9)
        n_or = min(samples, 5 if s == 2 else 2)
        worst = -math.inf
        for _ in range(n_or):
            m, U = random_interior_distribution(rng, s), U_draw(rng)
            res = solve_stage(m, U, model, inner_cfg)
            _, grid_min = grid_oracle_min(m, U, model, oracle_cfg)
            worst = max(worst, res.value - grid_min)
        results.append(ProbeResult("grid_oracle", worst <= 1e-4, worst, 1e-4, "<=", n_or, seed,
                                   {"resolution": oracle_cfg.resolution}))
    return results
