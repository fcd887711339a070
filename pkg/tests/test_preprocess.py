import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kdsp.errors import ConfigError
from kdsp.hamiltonian import EncodingConfig
from kdsp.instances import EXAMPLE_BASIS, gapped_basis, random_integer_basis, random_unimodular
from kdsp.lattice import (
    DEFAULT_DELTA,
    Basis,
    alpha_of,
    covolume_sq,
    dual_basis,
    find_gap,
    gram,
    is_lll_reduced,
    lll_reduce,
    same_lattice,
    solve_coefficients,
    svp_enumerate,
)
from kdsp.preprocess import (
    bits_for_bound,
    coefficient_bound,
    lift_solution,
    preprocess,
    qubit_budget,
    unimodular_transform,
)
from kdsp.solvers import brute_force_solve


def diag_basis(*d):
    return Basis.from_rows(np.diag(d).astype(int).tolist())


def exact_dsp_min(basis: Basis, k: int) -> Fraction:
    """Independent oracle for k = 1 (shortest vector) and k = N - 1 (shortest dual vector)."""
    if k == 1:
        return svp_enumerate(basis).norm_sq
    if k == basis.n - 1:
        return covolume_sq(basis) * svp_enumerate(dual_basis(basis)).norm_sq
    raise ValueError("oracle covers k = 1 and k = N - 1")


def solve_and_lift(b: Basis, k: int, m: int = 2) -> Basis:
    plan = preprocess(b, k)
    if not plan.needs_search:
        return lift_solution(plan)
    res = brute_force_solve(gram(plan.b_p), EncodingConfig(plan.k, plan.b_p.n, m))
    x = res.solutions[0]
    rows = [[sum(c * r[t] for c, r in zip(xi, plan.b_p.rows)) for t in range(plan.b_p.dim)] for xi in x]
    return lift_solution(plan, Basis.from_rows(rows))


# preprocess -----------------------------------------------------------------------

def test_example_is_direct():
    plan = preprocess(Basis.from_rows(EXAMPLE_BASIS), 2)
    assert plan.action == "direct"
    assert find_gap(plan.b_p).gap_index is None
    assert covolume_sq(plan.b_p) == 1 and same_lattice(plan.b_p, Basis.from_rows(EXAMPLE_BASIS))


def test_gap_equal_to_k_solves():
    plan = preprocess(diag_basis(1, 1, 100), 2)
    assert plan.action == "solved" and plan.p == 2
    assert sorted(tuple(abs(x) for x in r) for r in plan.solution.rows) == [(0, 1, 0), (1, 0, 0)]
    assert lift_solution(plan) == plan.solution


def test_gap_above_k_restricts():
    plan = preprocess(diag_basis(1, 1, 100), 1)
    assert plan.action == "restrict" and plan.p == 2
    assert plan.b_p.n == 2 and plan.k == 1


def test_project_and_lift():
    plan = preprocess(diag_basis(1, 1, 100, 100), 3)
    assert plan.action == "project" and plan.p == 2 and plan.k == 1
    sub = Basis.from_rows([plan.b_p.rows[0]])
    assert covolume_sq(sub) == 10 ** 4
    lifted = lift_solution(plan, sub)
    assert lifted.n == 3 and covolume_sq(lifted) == 10 ** 4
    assert exact_dsp_min(diag_basis(1, 1, 100, 100), 3) == 10 ** 4


def test_lift_direct_is_identity():
    b = Basis.from_rows(EXAMPLE_BASIS)
    plan = preprocess(b, 2)
    s = Basis.from_rows(b.rows[:2])
    assert lift_solution(plan, s) == s


def test_lift_shape_mismatch():
    plan = preprocess(Basis.from_rows(EXAMPLE_BASIS), 2)
    with pytest.raises(ConfigError):
        lift_solution(plan, Basis.from_rows([[1, 0, 0]]))
    with pytest.raises(ConfigError):
        lift_solution(plan)


@pytest.mark.parametrize("k", [0, 3, -1])
def test_k_range(k):
    with pytest.raises(ConfigError):
        preprocess(Basis.from_rows(EXAMPLE_BASIS), k)


def test_plan_json():
    out = preprocess(diag_basis(1, 1, 100, 100), 3).to_json()
    assert out["action"] == "project" and out["p"] == 2
    assert [s["step"] for s in out["trace"]][:2] == ["lll", "project"]


seeds = st.integers(0, 2 ** 32 - 1)


@settings(max_examples=25)
@given(seeds, st.integers(2, 5))
def test_plan_leaf_reduced_and_gap_free(seed, n):
    rng = np.random.default_rng(seed)
    b = random_integer_basis(rng, n)
    k = int(rng.integers(1, n))
    plan = preprocess(b, k)
    assert is_lll_reduced(plan.b_p, DEFAULT_DELTA)
    if plan.action != "solved":
        assert find_gap(plan.b_p).gap_index is None
    else:
        assert plan.solution.n == k


@settings(max_examples=15)
@given(seeds)
def test_lift_matches_exact_oracle_random(seed):
    rng = np.random.default_rng(seed)
    b = random_integer_basis(rng, 3)
    for k in (1, 2):
        lifted = solve_and_lift(b, k)
        assert lifted.n == k
        assert covolume_sq(lifted) == exact_dsp_min(b, k)
        for row in lifted.rows:
            assert all(c.denominator == 1 for c in solve_coefficients(b, row))


@settings(max_examples=15)
@given(seeds, st.integers(1, 2))
def test_lift_matches_exact_oracle_gapped(seed, p):
    rng = np.random.default_rng(seed)
    b = gapped_basis(rng, 3, p)
    for k in (1, 2):
        assert covolume_sq(solve_and_lift(b, k)) == exact_dsp_min(b, k)


# unimodular bound -------------------------------------------------------------------

@settings(max_examples=20)
@given(seeds, st.integers(2, 4))
def test_unimodular_transform_bound(seed, n):
    rng = np.random.default_rng(seed)
    while True:
        bp = lll_reduce(random_integer_basis(rng, n))
        if find_gap(bp).gap_index is None:
            break
    u0 = random_unimodular(rng, n, steps=3 * n, bound=3)
    c = Basis.from_rows((u0 @ np.array(bp.to_lists(), dtype=object)).tolist())
    c = lll_reduce(c)
    u = unimodular_transform(bp, c)
    assert abs(round(np.linalg.det(np.array(u, dtype=float)))) == 1
    assert max(abs(x) for row in u for x in row) <= n * alpha_of(DEFAULT_DELTA) ** (3 * (n - 1) / 4)


# budgets ------------------------------------------------------------------------------

def test_budget_lll_example():
    b = qubit_budget(3, 2, "LLL", delta=Fraction(1))
    assert alpha_of(1) == pytest.approx(4 / 3)
    assert b.coefficient_bound == pytest.approx(3 * (4 / 3) ** 1.5) == pytest.approx(4.6188, abs=1e-4)
    assert b.m == 3 and b.total_qubits == 24


def test_budget_hkz_example():
    b = qubit_budget(3, 2, "HKZ")
    assert b.coefficient_bound == pytest.approx(60.75)
    assert b.m == 6 and b.total_qubits == 42
    assert b.closed_form == pytest.approx(47.5, abs=0.1)


def test_budget_override():
    assert qubit_budget(3, 2, m_override=1).total_qubits == 12


@given(st.floats(0, 1e6))
def test_bits_cover_bound(bound):
    m = bits_for_bound(bound)
    assert -(2 ** m) <= -math.floor(bound) and math.floor(bound) <= 2 ** m - 1
    assert m == math.ceil(math.log2(bound + 1))


@pytest.mark.parametrize("n,k,mode", [(3, 0, "LLL"), (3, 3, "LLL"), (1, 1, "HKZ"), (3, 1, "BKZ")])
def test_budget_errors(n, k, mode):
    with pytest.raises(ConfigError):
        qubit_budget(n, k, mode)


def test_coefficient_bound_modes():
    assert coefficient_bound(4, "HKZ") == 4 ** 3 * (7 / 4) ** 2
    assert coefficient_bound(4, "LLL", Fraction(1)) == pytest.approx(4 * (4 / 3) ** (9 / 4))
