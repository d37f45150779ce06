import math

import mpmath
import numpy as np
import pytest

from socialmfg import (
    MODELS,
    ConvergenceError,
    Example1Cost,
    Example1Params,
    Example1VariantCost,
    Example2Cost,
    Example2VariantCost,
    InvalidInputError,
    NumericDomainError,
    ZeroCost,
    example2_closed_form,
    make_model,
    solve_stage,
)
from socialmfg.simplex_opt import InnerSolverConfig
from socialmfg.verification import gradient_error, random_interior_strategy

UNIFORM2 = np.full((2, 2), 0.5)
LN2 = mpmath.log(2)


def test_example1_uniform_value_against_high_precision_ln2():
    expected = float(1 + mpmath.mpf("0.5") / LN2)
    c = Example1Cost().costs([0.5, 0.5], UNIFORM2)
    np.testing.assert_allclose(c, expected, rtol=0, atol=1e-15)
    assert expected == pytest.approx(1.7213475204444817, abs=1e-16)


def test_example1_eval_single_entry():
    model = Example1Cost(alpha1=2.0, alpha2=3.0, alpha3=0.5)
    m = np.array([0.2, 0.8])
    P = np.array([[0.3, 0.7], [0.6, 0.4]])
    pushed = m @ P
    expected = 2.0 * 0.8 + 3.0 * pushed[0] - 0.5 * 0.6 / math.log(0.6)
    assert model.eval(m, P, 1, 0) == pytest.approx(expected, abs=1e-14)


@pytest.mark.parametrize("model", [Example1Cost(), Example1VariantCost(), Example2Cost(), Example2VariantCost()],
                         ids=lambda m: m.name)
@pytest.mark.parametrize("entry", [0.0, 1.0])
def test_boundary_raises_numeric_domain(model, entry):
    P = np.array([[entry, 1 - entry], [0.5, 0.5]])
    with pytest.raises(NumericDomainError) as info:
        model.costs([0.5, 0.5], P)
    assert info.value.index[0] == 0


def test_example1_singularity_and_vanishing_entropy():
    model = Example1VariantCost(alpha1=1.0, alpha2=1.0)
    m = [0.5, 0.5]
    near_one = model.costs(m, [[1 - 1e-12, 1e-12], [0.5, 0.5]])[0, 0]
    assert near_one > 1e9
    row = [1e-300, 0.5, 0.5]
    near_zero = model.costs([0.5, 0.25, 0.25], [row, row, row])[0, 0]
    assert near_zero == pytest.approx(0.5, abs=1e-2)


def test_example1_params_must_be_positive():
    with pytest.raises(InvalidInputError):
        Example1Params(alpha1=0.0)
    with pytest.raises(InvalidInputError):
        Example1VariantCost(alpha2=-1.0)


def test_example1_variant_scalar_oracle():
    c = Example1VariantCost(1.0, 1.0).costs([1.0, 0.0], UNIFORM2)
    np.testing.assert_allclose(c[0], float(1 + mpmath.mpf("0.5") / LN2), atol=1e-15)


def test_example1_variant_rows_share_argmin():
    model = Example1VariantCost()
    res = solve_stage([0.2, 0.3, 0.5], [0.0, 1.0, 2.0], model)
    P = res.strategy.rows
    np.testing.assert_allclose(P - P[0], 0.0, atol=1e-7)


def test_example1_variant_uniform_row_for_constant_U():
    res = solve_stage([0.2, 0.3, 0.5], [4.0, 4.0, 4.0], Example1VariantCost())
    np.testing.assert_allclose(res.strategy.rows, 1 / 3, atol=1e-8)


def test_example2_scalar_oracle():
    expected = float(mpmath.mpf("0.75") + 2 * mpmath.log(mpmath.mpf("0.5")))
    c = Example2Cost().costs([0.5, 0.5], UNIFORM2)
    np.testing.assert_allclose(c, expected, atol=1e-15)


def test_example2_coupling_excludes_own_row():
    m = np.array([0.3, 0.7])
    P = np.array([[0.2, 0.8], [0.6, 0.4]])
    c = Example2Cost().costs(m, P)
    for j in range(2):
        assert c[0, j] == pytest.approx(0.3 + 0.7 * P[1, j] + math.log(P[0, j] ** 2), abs=1e-14)


def test_example2_variant_is_row_decoupled():
    m = np.array([0.3, 0.7])
    P = np.array([[0.2, 0.8], [0.6, 0.4]])
    Q = P.copy()
    Q[1] = [0.9, 0.1]
    model = Example2VariantCost()
    assert model.row_decoupled
    np.testing.assert_array_equal(model.costs(m, P)[0], model.costs(m, Q)[0])


def test_symmetric_inputs_equal_costs_across_columns():
    c = Example2Cost().costs([0.5, 0.5], UNIFORM2)
    assert c[0, 0] == c[0, 1]


def test_gradients_match_finite_differences(example_model, rng):
    for _ in range(10):
        m = rng.dirichlet(np.ones(3))
        P = random_interior_strategy(rng, 3)
        U = rng.uniform(-2, 2, 3)
        assert gradient_error(m, P, U, example_model) <= 1e-5


def test_costs_batch_over_leading_axes(example_model, rng):
    m = rng.dirichlet(np.ones(3))
    P = random_interior_strategy(rng, 3)
    Q = random_interior_strategy(rng, 3)
    batch = example_model.costs(m, np.stack([P, Q]))
    np.testing.assert_allclose(batch[0], example_model.costs(m, P), rtol=1e-14)
    np.testing.assert_allclose(batch[1], example_model.costs(m, Q), rtol=1e-14)


# --- closed form -------------------------------------------------------------

def _softmax_loop(m, U, tol=1e-15):
    s = len(m)
    P = [[1.0 / s] * s for _ in range(s)]
    for _ in range(100_000):
        Q = []
        for i in range(s):
            e = [-sum(m[p] * P[p][j] for p in range(s) if p != i) - U[j] / 2 for j in range(s)]
            z = sum(math.exp(x) for x in e)
            Q.append([math.exp(x) / z for x in e])
        r = max(abs(Q[i][j] - P[i][j]) for i in range(s) for j in range(s))
        P = Q
        if r < tol:
            return P
    raise AssertionError("oracle loop did not converge")


@pytest.mark.parametrize("u", [-3.0, 0.0, 2.5])
def test_closed_form_symmetric_fixed_point(u):
    P = example2_closed_form([0.5, 0.5], [u, u]).rows
    np.testing.assert_allclose(P, 0.5, atol=1e-14)


def test_closed_form_against_independent_loop():
    P = example2_closed_form([0.5, 0.5], [0.0, 2.0]).rows
    oracle = _softmax_loop([0.5, 0.5], [0.0, 2.0])
    np.testing.assert_allclose(P, oracle, atol=1e-12)
    np.testing.assert_allclose(P[:, 0], 0.6917388435551983, atol=1e-12)
    assert np.all(P[:, 0] > P[:, 1])


def test_closed_form_matches_generic_solver(rng):
    cfg = InnerSolverConfig(grad_tol=1e-10)
    for _ in range(10):
        m = rng.dirichlet(np.ones(3))
        U = rng.uniform(-2, 2, 3)
        generic = solve_stage(m, U, Example2Cost(), cfg).strategy.rows
        closed = example2_closed_form(m, U).rows
        np.testing.assert_allclose(generic, closed, atol=1e-6)


def test_closed_form_iteration_cap():
    with pytest.raises(ConvergenceError) as info:
        example2_closed_form([0.5, 0.5], [0.0, 2.0], max_iters=2)
    assert info.value.residual > 0


# --- registry ------------------------------------------------------------------

def test_make_model_builds_registered_models():
    assert make_model("example1", {"alpha1": 2.0}).params["alpha1"] == 2.0
    assert isinstance(make_model("zero"), ZeroCost)
    assert set(MODELS) >= {"example1", "example1_variant", "example2", "example2_variant"}


def test_make_model_unknown_lists_alternatives():
    with pytest.raises(InvalidInputError, match="example2_variant"):
        make_model("example9")


def test_make_model_bad_params():
    with pytest.raises(InvalidInputError):
        make_model("example2", {"alpha1": 1.0})
