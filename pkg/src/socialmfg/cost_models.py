"""Transition-cost families ``c_ij(m, P)``.

All models evaluate in batch: ``P`` may carry leading axes (``(..., s, s)``),
which the grid oracle relies on. ``grad`` returns the gradient of the
aggregated running cost ``g(P) = sum_pq c_pq(m, P) m_p P_pq`` with respect to
every ``P_ij``; adding ``U_j m_i`` gives the stage-objective gradient.
"""

from __future__ import annotations

import abc
import math
from typing import Any, Callable

import numpy as np
from numpy.typing import ArrayLike, NDArray

from socialmfg.errors import ConvergenceError, InvalidInputError, NumericDomainError

__all__ = [
    "CostModel",
    "ZeroCost",
    "ConstantCost",
    "Example1Params",
    "Example1Cost",
    "Example1VariantCost",
    "Example2Cost",
    "Example2VariantCost",
    "example1_cost",
    "example1_variant_cost",
    "example2_cost",
    "example2_variant_cost",
    "example2_closed_form",
    "MODELS",
    "make_model",
]


def _first_bad(mask: NDArray[np.bool_]) -> tuple[int, int]:
    idx = np.unravel_index(int(np.argmax(mask)), mask.shape)
    return int(idx[-2]), int(idx[-1])


def _pushed(m: NDArray, P: NDArray) -> NDArray:
    # (mP)_j, broadcast over leading axes of P
    return np.einsum("...i,...ij->...j", m, P)


class CostModel(abc.ABC):
    """Interface for a transition-cost family.

    Subclasses implement ``_costs`` and ``grad`` and set the structural flags:

    ``row_decoupled``
        ``c_ij`` depends on ``P`` only through row ``i``.
    ``interior_only``
        the cost is undefined on the simplex boundary (``P_ij`` in ``{0, 1}``).
    """

    name: str = "abstract"
    row_decoupled: bool = False
    interior_only: bool = False

    @property
    def params(self) -> dict[str, float]:
        return {}

    @abc.abstractmethod
    def _costs(self, m: NDArray, P: NDArray) -> NDArray: ...

    @abc.abstractmethod
    def grad(self, m: ArrayLike, P: ArrayLike) -> NDArray:
        """Gradient of ``sum_pq c_pq(m, P) m_p P_pq`` w.r.t. ``P``."""

    def costs(self, m: ArrayLike, P: ArrayLike) -> NDArray:
        """Full cost matrix ``c_ij(m, P)``; raises on domain violations."""
        m = np.asarray(m, dtype=float)
        P = np.asarray(P, dtype=float)
        if self.interior_only:
            outside = (P <= 0.0) | (P >= 1.0)
            if outside.any():
                raise NumericDomainError(
                    f"{self.name} cost is undefined for P_ij outside (0, 1)",
                    _first_bad(outside),
                )
        c = self._costs(m, P)
        finite = np.isfinite(c)
        if not finite.all():
            raise NumericDomainError(f"{self.name} cost is not finite", _first_bad(~finite))
        return c

    def eval(self, m: ArrayLike, P: ArrayLike, i: int, j: int) -> float:
        return float(self.costs(m, P)[i, j])

    def to_dict(self) -> dict[str, Any]:
        return {"name": self.name, "params": self.params}

    def __repr__(self) -> str:
        args = ", ".join(f"{k}={v!r}" for k, v in self.params.items())
        return f"{type(self).__name__}({args})"


class ZeroCost(CostModel):
    """``c_ij = 0``: only the continuation cost matters."""

    name = "zero"
    row_decoupled = True

    def _costs(self, m, P):
        return np.zeros_like(P)

    def grad(self, m, P):
        return np.zeros_like(np.asarray(P, dtype=float))


class ConstantCost(CostModel):
    """``c_ij = kappa`` for every transition."""

    name = "constant"
    row_decoupled = True

    def __init__(self, kappa: float = 1.0):
        self.kappa = float(kappa)
        if not math.isfinite(self.kappa):
            raise InvalidInputError("kappa must be finite")

    @property
    def params(self):
        return {"kappa": self.kappa}

    def _costs(self, m, P):
        return np.full_like(P, self.kappa)

    def grad(self, m, P):
        m = np.asarray(m, dtype=float)
        P = np.asarray(P, dtype=float)
        return np.broadcast_to(self.kappa * m[:, None], P.shape).copy()


def _positive(name: str, value: float) -> float:
    value = float(value)
    if not (math.isfinite(value) and value > 0):
        raise InvalidInputError(f"{name} must be a positive finite number, got {value!r}")
    return value


class Example1Params:
    """Positive weights of the congestion/entropy cost family."""

    __slots__ = ("alpha1", "alpha2", "alpha3")

    def __init__(self, alpha1: float = 1.0, alpha2: float = 1.0, alpha3: float = 1.0):
        self.alpha1 = _positive("alpha1", alpha1)
        self.alpha2 = _positive("alpha2", alpha2)
        self.alpha3 = _positive("alpha3", alpha3)

    def __repr__(self):
        return f"Example1Params({self.alpha1}, {self.alpha2}, {self.alpha3})"


def neg_x_over_log(x: NDArray) -> NDArray:
    """``-x / ln x``, strictly increasing on ``(0, 1)``."""
    return -x / np.log(x)


def _neg_x_over_log_times_x_prime(x: NDArray) -> NDArray:
    # d/dx [x * (-x/ln x)] = x (1 - 2 ln x) / (ln x)^2
    L = np.log(x)
    return x * (1.0 - 2.0 * L) / (L * L)


class Example1Cost(CostModel):
    """``c_ij = a1 m_i + a2 (mP)_j - a3 P_ij / ln P_ij``.

    The second term couples rows through the arrival mass at ``j``.
    """

    name = "example1"
    interior_only = True

    def __init__(self, params: Example1Params | None = None, **weights: float):
        self.p = params if params is not None else Example1Params(**weights)

    @property
    def params(self):
        return {"alpha1": self.p.alpha1, "alpha2": self.p.alpha2, "alpha3": self.p.alpha3}

    def _costs(self, m, P):
        a = self.p
        return (
            a.alpha1 * m[..., :, None]
            + a.alpha2 * _pushed(m, P)[..., None, :]
            + a.alpha3 * neg_x_over_log(P)
        )

    def grad(self, m, P):
        m = np.asarray(m, dtype=float)
        P = np.asarray(P, dtype=float)
        a = self.p
        inner = (
            a.alpha1 * m[:, None]
            + 2.0 * a.alpha2 * _pushed(m, P)[None, :]
            + a.alpha3 * _neg_x_over_log_times_x_prime(P)
        )
        return m[:, None] * inner


class Example1VariantCost(CostModel):
    """``c_ij = a1 m_i - a2 P_ij / ln P_ij`` (no cross-row coupling)."""

    name = "example1_variant"
    interior_only = True
    row_decoupled = True

    def __init__(self, alpha1: float = 1.0, alpha2: float = 1.0):
        self.alpha1 = _positive("alpha1", alpha1)
        self.alpha2 = _positive("alpha2", alpha2)

    @property
    def params(self):
        return {"alpha1": self.alpha1, "alpha2": self.alpha2}

    def _costs(self, m, P):
        return self.alpha1 * m[..., :, None] + self.alpha2 * neg_x_over_log(P)

    def grad(self, m, P):
        m = np.asarray(m, dtype=float)
        P = np.asarray(P, dtype=float)
        return m[:, None] * (
            self.alpha1 * m[:, None] + self.alpha2 * _neg_x_over_log_times_x_prime(P)
        )


class Example2Cost(CostModel):
    """``c_ij = m_i + sum_{p != i} m_p P_pj + ln(P_ij^2)``.

    The log term is read as ``ln(P_ij^2) = 2 ln P_ij``; with that reading the
    first-order conditions of the stage problem reproduce the softmax form
    solved by :func:`example2_closed_form`.
    """

    name = "example2"
    interior_only = True

    def _costs(self, m, P):
        mi = m[..., :, None]
        others = _pushed(m, P)[..., None, :] - mi * P
        return mi + others + 2.0 * np.log(P)

    def grad(self, m, P):
        m = np.asarray(m, dtype=float)
        P = np.asarray(P, dtype=float)
        mi = m[:, None]
        others = _pushed(m, P)[None, :] - mi * P
        return mi * (mi + 2.0 * others + 2.0 * np.log(P) + 2.0)


class Example2VariantCost(CostModel):
    """``c_ij = m_i + ln(P_ij^2)``."""

    name = "example2_variant"
    interior_only = True
    row_decoupled = True

    def _costs(self, m, P):
        return m[..., :, None] + 2.0 * np.log(P)

    def grad(self, m, P):
        m = np.asarray(m, dtype=float)
        P = np.asarray(P, dtype=float)
        return m[:, None] * (m[:, None] + 2.0 * np.log(P) + 2.0)


def example1_cost(params: Example1Params | None = None) -> Example1Cost:
    return Example1Cost(params or Example1Params())


def example1_variant_cost(alpha1: float = 1.0, alpha2: float = 1.0) -> Example1VariantCost:
    return Example1VariantCost(alpha1, alpha2)


def example2_cost() -> Example2Cost:
    return Example2Cost()


def example2_variant_cost() -> Example2VariantCost:
    return Example2VariantCost()


def example2_closed_form(
    m: ArrayLike,
    U_next: ArrayLike,
    tol: float = 1e-12,
    max_iters: int = 10_000,
    damping: float = 1.0,
):
    """Optimal strategy of the ``example2`` stage problem via its softmax form.

    Solves ``P_ij ∝ exp(-sum_{p != i} m_p P_pj - U_j / 2)`` by fixed-point
    iteration from the uniform matrix. Returns a ``StrategyMatrix``.
    """
    from socialmfg.core import StrategyMatrix

    if not tol > 0:
        raise InvalidInputError("tol must be positive")
    if not 0 < damping <= 1:
        raise InvalidInputError("damping must lie in (0, 1]")
    m = np.asarray(m, dtype=float)
    U = np.asarray(U_next, dtype=float)
    s = m.size
    if U.shape != (s,):
        raise InvalidInputError(f"cost vector shape {U.shape} does not match {s} states")
    P = np.full((s, s), 1.0 / s)
    residual = np.inf
    for _ in range(max_iters):
        expo = -(m @ P)[None, :] + m[:, None] * P - 0.5 * U[None, :]
        expo -= expo.max(axis=1, keepdims=True)
        Q = np.exp(expo)
        Q /= Q.sum(axis=1, keepdims=True)
        residual = float(np.max(np.abs(Q - P)))
        P = (1.0 - damping) * P + damping * Q
        if residual <= tol:
            return StrategyMatrix(P)
    raise ConvergenceError(
        "softmax fixed-point iteration did not converge", residual=residual, best=P
    )


MODELS: dict[str, Callable[..., CostModel]] = {
    "zero": ZeroCost,
    "constant": ConstantCost,
    "example1": lambda **kw: Example1Cost(Example1Params(**kw)),
    "example1_variant": Example1VariantCost,
    "example2": Example2Cost,
    "example2_variant": Example2VariantCost,
}


def make_model(name: str, params: dict[str, float] | None = None) -> CostModel:
    """Build a registered model by name; unknown names list the alternatives."""
    if name not in MODELS:
        raise InvalidInputError(
            f"unknown cost model {name!r}; available: {', '.join(sorted(MODELS))}"
        )
    try:
        return MODELS[name](**(params or {}))
    except TypeError as exc:
        raise InvalidInputError(f"bad parameters for model {name!r}: {exc}") from None
