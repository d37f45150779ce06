import json

import numpy as np
import pytest

from socialmfg import (
    ConstantCost,
    Example1Cost,
    Example1VariantCost,
    Example2Cost,
    Example2VariantCost,
    InvalidInputError,
    UnsupportedSizeError,
    ZeroCost,
    run_probes,
    solve_stage,
)
from socialmfg.verification import (
    GridOracleConfig,
    check_a1,
    check_a4_sample,
    check_competitive_equivalence,
    check_lemma41,
    grid_oracle_min,
    per_row_optimum,
    random_interior_distribution,
    random_interior_strategy,
    row_swap_quantity,
)

# --- grid oracle -----------------------------------------------------------------

def test_grid_oracle_zero_model():
    P, val = grid_oracle_min([0.5, 0.5], [0.0, 1.0], ZeroCost(), GridOracleConfig(resolution=0.1))
    eps = GridOracleConfig().interior_eps
    np.testing.assert_allclose(P.rows, [[1, 0], [1, 0]], atol=eps)
    assert val == pytest.approx(0.0, abs=1e-12)


def test_grid_oracle_flat_constant_model():
    _, val = grid_oracle_min([0.3, 0.7], [2.0, 2.0], ConstantCost(1.5), GridOracleConfig(resolution=0.1))
    assert val == pytest.approx(3.5, abs=1e-12)


def test_grid_oracle_agrees_with_solver_example1():
    m, U = [0.5, 0.5], [0.0, 0.0]
    _, val = grid_oracle_min(m, U, Example1Cost())
    res = solve_stage(m, U, Example1Cost())
    assert abs(res.value - val) <= 1e-4
    assert res.value <= val + 1e-12


def test_grid_oracle_three_states_coarse():
    m, U = [0.2, 0.3, 0.5], [0.0, 1.0, -1.0]
    _, val = grid_oracle_min(m, U, Example2Cost(), GridOracleConfig(resolution=0.1))
    assert solve_stage(m, U, Example2Cost()).value <= val + 1e-12


def test_grid_oracle_rejects_large_sizes():
    with pytest.raises(UnsupportedSizeError):
        grid_oracle_min(np.full(4, 0.25), np.zeros(4), ZeroCost())
    with pytest.raises(UnsupportedSizeError):
        grid_oracle_min(np.full(3, 1 / 3), np.zeros(3), ZeroCost(), GridOracleConfig(resolution=2e-2))


# --- inequality probes -----------------------------------------------------------

def test_cost_monotonicity_identical_pair_is_zero(rng):
    P = random_interior_strategy(rng, 3)
    assert check_a1(Example1Cost(), [0.2, 0.3, 0.5], P, P) == 0.0


def test_cost_monotonicity_strictly_positive_example1(rng):
    for _ in range(50):
        m = random_interior_distribution(rng, 3)
        assert check_a1(Example1Cost(), m, random_interior_strategy(rng, 3), random_interior_strategy(rng, 3)) > 0


def test_cost_monotonicity_zero_model(rng):
    assert check_a1(ZeroCost(), [0.5, 0.5], random_interior_strategy(rng, 2), random_interior_strategy(rng, 2)) == 0


def test_value_supergradient_equal_and_shifted(rng):
    m, U = random_interior_distribution(rng, 3), rng.uniform(-2, 2, 3)
    assert abs(check_lemma41(Example1Cost(), m, U, U)) <= 1e-12
    assert abs(check_lemma41(Example1Cost(), m, U, U + 3.0)) <= 1e-8


def test_value_supergradient_random(example_model, rng):
    for _ in range(20):
        m = random_interior_distribution(rng, 3)
        assert check_lemma41(example_model, m, rng.uniform(-2, 2, 3), rng.uniform(-2, 2, 3)) <= 1e-8


@pytest.mark.parametrize("model", [Example1VariantCost(), Example2VariantCost()], ids=lambda m: m.name)
def test_competitive_equivalence(model, rng):
    for _ in range(3):
        m = random_interior_distribution(rng, 3)
        assert check_competitive_equivalence(model, m, rng.uniform(-2, 2, 3)) <= 1e-6


def test_competitive_equivalence_zero_model():
    assert check_competitive_equivalence(ZeroCost(), [0.5, 0.5], [0.0, 1.0]) <= 1e-6


def test_competitive_equivalence_rejects_coupled_model():
    with pytest.raises(InvalidInputError):
        check_competitive_equivalence(Example2Cost(), [0.5, 0.5], [0.0, 1.0])


def test_per_row_optimum_is_on_simplex(rng):
    q = per_row_optimum(Example2VariantCost(), [0.3, 0.7], [0.0, 1.0], np.full((2, 2), 0.5), 0, 1e-9)
    assert abs(q.sum() - 1) <= 1e-12 and q.min() >= 0


def test_distribution_monotonicity_equal_distributions_is_zero(rng):
    m = random_interior_distribution(rng, 3)
    U1, U2 = rng.uniform(-2, 2, 3), rng.uniform(-2, 2, 3)
    assert check_a4_sample(Example1VariantCost(), m, m, U1, U2) == 0.0


def test_distribution_monotonicity_variant_with_gamma_alpha1(rng):
    model = Example1VariantCost(alpha1=1.0, alpha2=1.0)
    for _ in range(20):
        m1, m2 = random_interior_distribution(rng, 3), random_interior_distribution(rng, 3)
        val = check_a4_sample(model, m1, m2, rng.uniform(-2, 2, 3), rng.uniform(-2, 2, 3), gamma=1.0)
        assert val >= -1e-8


def test_distribution_monotonicity_boundary_probe_with_oversized_gamma():
    model = Example1VariantCost(alpha1=1.0, alpha2=1.0)
    m1 = np.array([0.3, 0.3, 0.4])
    m2 = np.array([0.3 + 1e-3, 0.3, 0.4 - 1e-3])
    U = np.array([0.0, 1.0, 2.0])
    assert check_a4_sample(model, m1, m2, U, U, gamma=1e3) < 0


def test_row_swap_bound_example2(rng):
    model = Example2Cost()
    for _ in range(50):
        m = random_interior_distribution(rng, 3)
        P = random_interior_strategy(rng, 3)
        p, p2 = rng.choice(3, size=2, replace=False)
        assert row_swap_quantity(model, m, P, int(p), int(p2)) <= 2.0


# --- probe suite -----------------------------------------------------------------

def test_run_probes_example1_all_pass():
    results = run_probes(Example1Cost(), 2, seed=0, samples=30)
    assert all(r.passed for r in results), [r.to_dict() for r in results if not r.passed]
    names = {r.name for r in results}
    assert {"gradient_finite_difference", "kkt_certificate", "cost_monotonicity", "grid_oracle"} <= names


def test_run_probes_deterministic_and_serializable():
    a = [r.to_dict() for r in run_probes(Example2VariantCost(), 2, seed=4, samples=10, gamma=0.5, a6_bound=2.0)]
    b = [r.to_dict() for r in run_probes(Example2VariantCost(), 2, seed=4, samples=10, gamma=0.5, a6_bound=2.0)]
    assert json.dumps(a) == json.dumps(b)
    assert all(d["seed"] == 4 for d in a)
