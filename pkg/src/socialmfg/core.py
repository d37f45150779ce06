"""Domain types and the elementary forward/backward/cost evaluations.

Every solver in the package is built from three evaluations:

* ``push_forward``: distribution evolution ``m'_j = sum_i m_i P_ij``
* ``social_cost``: stage objective ``sum_ij (c_ij(m, P) + U_j) m_i P_ij``
* ``individual_costs``: per-state cost ``sum_j (c_ij(m, P) + U_j) P_ij``

The public functions accept the typed wrappers below or plain array-likes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from socialmfg.errors import InvalidInputError

if TYPE_CHECKING:
    from socialmfg.cost_models import CostModel

SIMPLEX_TOL = 1e-12


def _frozen(a: NDArray[np.float64]) -> NDArray[np.float64]:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


def _normalize_simplex(v: NDArray[np.float64], what: str) -> NDArray[np.float64]:
    """Snap ``v`` (last axis) onto the simplex if it is within tolerance."""
    if not np.all(np.isfinite(v)):
        raise InvalidInputError(f"{what} has non-finite entries")
    if np.min(v) < -SIMPLEX_TOL:
        raise InvalidInputError(f"{what} has a negative entry {np.min(v):.3e}")
    sums = v.sum(axis=-1)
    if np.max(np.abs(sums - 1.0)) > SIMPLEX_TOL:
        bad = sums.flat[int(np.argmax(np.abs(sums - 1.0)))]
        raise InvalidInputError(f"{what} sums to {bad!r}, expected 1")
    v = np.clip(v, 0.0, None)
    return v / v.sum(axis=-1, keepdims=True)


@dataclass(frozen=True, eq=False)
class Distribution:
    """Population distribution over ``s`` states."""

    probs: NDArray[np.float64]

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if p.ndim != 1:
            raise InvalidInputError(f"distribution must be 1-D, got shape {p.shape}")
        if p.size < 2:
            raise InvalidInputError("need at least 2 states")
        object.__setattr__(self, "probs", _frozen(_normalize_simplex(p, "distribution")))

    @property
    def s(self) -> int:
        return self.probs.size

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.probs, dtype=dtype)

    def __len__(self) -> int:
        return self.probs.size

    def tolist(self) -> list[float]:
        return self.probs.tolist()

    @classmethod
    def uniform(cls, s: int) -> "Distribution":
        return cls(np.full(s, 1.0 / s))


@dataclass(frozen=True, eq=False)
class StrategyMatrix:
    """Row-stochastic ``s x s`` transition matrix."""

    rows: NDArray[np.float64]

    def __post_init__(self):
        P = np.asarray(self.rows, dtype=float)
        if P.ndim != 2 or P.shape[0] != P.shape[1]:
            raise InvalidInputError(f"strategy must be square, got shape {P.shape}")
        if P.shape[0] < 2:
            raise InvalidInputError("need at least 2 states")
        object.__setattr__(self, "rows", _frozen(_normalize_simplex(P, "strategy row")))

    @property
    def s(self) -> int:
        return self.rows.shape[0]

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.rows, dtype=dtype)

    def tolist(self) -> list[list[float]]:
        return self.rows.tolist()

    @classmethod
    def uniform(cls, s: int) -> "StrategyMatrix":
        return cls(np.full((s, s), 1.0 / s))


@dataclass(frozen=True, eq=False)
class CostVector:
    """Per-state cost vector (``U`` at some time, or the terminal cost)."""

    values: NDArray[np.float64]

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1:
            raise InvalidInputError(f"cost vector must be 1-D, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise InvalidInputError("cost vector has non-finite entries")
        object.__setattr__(self, "values", _frozen(v))

    @property
    def s(self) -> int:
        return self.values.size

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)

    def __len__(self) -> int:
        return self.values.size

    def tolist(self) -> list[float]:
        return self.values.tolist()


@dataclass(frozen=True)
class ProblemInstance:
    """Data of the initial-terminal problem: ``m0``, ``G^N``, horizon and costs."""

    s: int
    N: int
    m0: Distribution
    terminal_cost: CostVector
    cost_model: "CostModel"

    def __post_init__(self):
        if int(self.s) != self.s or self.s < 2:
            raise InvalidInputError(f"state count must be an integer >= 2, got {self.s}")
        if int(self.N) != self.N or self.N < 1:
            raise InvalidInputError(f"horizon must be an integer >= 1, got {self.N}")
        m0 = self.m0 if isinstance(self.m0, Distribution) else Distribution(self.m0)
        g = (
            self.terminal_cost
            if isinstance(self.terminal_cost, CostVector)
            else CostVector(self.terminal_cost)
        )
        object.__setattr__(self, "m0", m0)
        object.__setattr__(self, "terminal_cost", g)
        if m0.s != self.s or g.s != self.s:
            raise InvalidInputError(
                f"m0 has {m0.s} states and terminal cost {g.s}, expected {self.s}"
            )


@dataclass(frozen=True)
class HorizonSolution:
    distributions: tuple[Distribution, ...]
    costs: tuple[CostVector, ...]
    strategies: tuple[StrategyMatrix, ...]
    fixed_point_residual: float
    iterations: int = 0
    residual_history: tuple[float, ...] = field(default=(), repr=False)

    @property
    def N(self) -> int:
        return len(self.strategies)

    def as_arrays(self) -> tuple[NDArray, NDArray, NDArray]:
        """``(m, U, P)`` stacked with shapes ``(N+1, s)``, ``(N+1, s)``, ``(N, s, s)``."""
        return (
            np.stack([d.probs for d in self.distributions]),
            np.stack([c.values for c in self.costs]),
            np.stack([p.rows for p in self.strategies]),
        )


@dataclass(frozen=True)
class StationarySolution:
    m_bar: Distribution
    u_bar: CostVector
    lambda_bar: float
    strategy: StrategyMatrix
    residuals: tuple[float, float]
    outer_iterations: int = 0


def as_vector(x: ArrayLike, what: str = "vector") -> NDArray[np.float64]:
    v = np.asarray(x, dtype=float)
    if v.ndim != 1:
        raise InvalidInputError(f"{what} must be 1-D, got shape {v.shape}")
    return v


def as_matrix(x: ArrayLike, what: str = "matrix") -> NDArray[np.float64]:
    P = np.asarray(x, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise InvalidInputError(f"{what} must be square, got shape {P.shape}")
    return P


def _check_dims(m: NDArray, P: NDArray, U: NDArray | None = None) -> None:
    s = m.shape[0]
    if P.shape != (s, s):
        raise InvalidInputError(f"strategy shape {P.shape} does not match {s} states")
    if U is not None and U.shape != (s,):
        raise InvalidInputError(f"cost vector shape {U.shape} does not match {s} states")


def push_forward(m: ArrayLike, P: ArrayLike) -> Distribution:
    """Evolve a distribution one step: ``result_j = sum_i m_i P_ij``."""
    m_, P_ = as_vector(m, "distribution"), as_matrix(P, "strategy")
    _check_dims(m_, P_)
    return Distribution(m_ @ P_)


def individual_costs(
    m: ArrayLike, P: ArrayLike, U_next: ArrayLike, model: "CostModel"
) -> CostVector:
    """Cost of an agent in each state: ``sum_j (c_ij(m, P) + U_j) P_ij``."""
    m_, P_, U_ = as_vector(m), as_matrix(P), as_vector(U_next)
    _check_dims(m_, P_, U_)
    c = model.costs(m_, P_)
    return CostVector(((c + U_[None, :]) * P_).sum(axis=1))


def social_cost(m: ArrayLike, P: ArrayLike, U_next: ArrayLike, model: "CostModel") -> float:
    """Stage social cost ``H(m, P, U) = sum_ij (c_ij(m, P) + U_j) m_i P_ij``."""
    m_, P_, U_ = as_vector(m), as_matrix(P), as_vector(U_next)
    _check_dims(m_, P_, U_)
    c = model.costs(m_, P_)
    return float(np.sum((c + U_[None, :]) * P_ * m_[:, None]))


def vectors_to_lists(seq: Sequence[Any]) -> list[Any]:
    return [x.tolist() for x in seq]
