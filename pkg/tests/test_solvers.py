import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kdsp.errors import CapExceeded, ConfigError, NumericalError
from kdsp.hamiltonian import DiagonalCost, EncodingConfig, diagonal_vector, eval_cost_direct, encode_coefficients
from kdsp.instances import EXAMPLE_BASIS, identity_basis, random_integer_basis, scramble_matrix, scrambled_basis
from kdsp.lattice import Basis, GramMatrix, gram, lll_reduce, svp_enumerate
from kdsp.solvers import (
    amplify,
    brute_force_solve,
    default_iterations,
    grover_curve,
    grover_runtime_estimate,
    grover_simulate,
    grover_success_closed_form,
)

CFG = EncodingConfig(2, 3, 1)


def test_example_instance():
    res = brute_force_solve(gram(Basis.from_rows(EXAMPLE_BASIS)), CFG)
    assert res.min_vol_sq == 1
    assert res.states_scanned == 4096 and res.m_count >= len(res.solutions)


def test_identity_instance_count():
    res = brute_force_solve(gram(identity_basis(3)), CFG)
    assert res.min_vol_sq == 1 and res.m_count == 216


def test_listed_solutions_are_optimal_and_full_rank():
    g = gram(Basis.from_rows(EXAMPLE_BASIS))
    res = brute_force_solve(g, CFG, list_cap=10)
    assert len(res.solutions) == 10 and res.indices == sorted(res.indices)
    for z, x in zip(res.indices, res.solutions):
        assert eval_cost_direct(z, g, CFG) == res.min_vol_sq
        assert np.linalg.matrix_rank(np.array(x, dtype=float)) == 2


def test_no_nontrivial_sublattice():
    with pytest.raises(NumericalError, match="no nontrivial sub-lattice in box"):
        brute_force_solve(GramMatrix.from_entries([[1]]), EncodingConfig(2, 1, 1))


def test_brute_force_cap():
    with pytest.raises(CapExceeded):
        brute_force_solve(gram(identity_basis(3)), CFG, cap=8)


@settings(max_examples=10)
@given(st.integers(0, 2 ** 32 - 1))
def test_k1_matches_svp(seed):
    b = lll_reduce(random_integer_basis(np.random.default_rng(seed), 3, -4, 4))
    sv = svp_enumerate(b)
    if max(abs(c) for c in sv.coeffs) > 1:
        return
    res = brute_force_solve(gram(b), EncodingConfig(1, 3, 1))
    assert res.min_vol_sq == sv.norm_sq


def test_scramble_invariance_with_raised_box():
    good = brute_force_solve(gram(identity_basis(3)), CFG).min_vol_sq
    u = scramble_matrix(3)
    # X_good = X_bad U, so a wide enough box on the scrambled basis contains the optimum
    m = math.ceil(math.log2(np.abs(np.linalg.inv(u)).max() + 1))
    bad = brute_force_solve(gram(scrambled_basis(identity_basis(3))), EncodingConfig(2, 3, m))
    assert bad.min_vol_sq == good


def test_example_solution_value():
    b = Basis.from_rows(EXAMPLE_BASIS)
    x = [[1, 1, 1], [0, 1, 1]]
    assert eval_cost_direct(encode_coefficients(x, CFG), gram(b), CFG) == 1
    xb = (np.array(x) @ np.array(EXAMPLE_BASIS)).tolist()
    assert xb == [[1, 0, 0], [0, 1, 0]]


# Grover -----------------------------------------------------------------------------

def test_grover_all_marked():
    d = DiagonalCost(np.ones(8), 3)
    res = grover_simulate(d, threshold=1.0)
    assert res.iterations == 0 and res.success_prob == pytest.approx(1.0)


def test_grover_four_elements():
    d = DiagonalCost(np.array([0.0, 0.0, 1.0, 0.0]), 2)
    res = grover_simulate(d, iterations=1)
    assert res.success_prob == pytest.approx(1.0, abs=1e-12) and res.sample == 2


def test_grover_identity_instance():
    d = diagonal_vector(gram(identity_basis(3)), CFG)
    res = grover_simulate(d, seed=3)
    assert res.m_count == 216 and res.iterations == default_iterations(4096, 216)
    assert res.success_prob >= 0.9
    assert d.values[res.sample] == 1.0


@given(st.integers(1, 12), st.data())
def test_grover_closed_form(n, data):
    size = 2 ** n
    m = data.draw(st.integers(1, size))
    j = data.draw(st.integers(0, 12))
    marked = np.zeros(size, dtype=bool)
    marked[data.draw(st.permutations(range(size)))[:m]] = True
    psi = amplify(marked, j)
    assert abs(float((psi[marked] ** 2).sum()) - grover_success_closed_form(size, m, j)) < 1e-10


def test_grover_curve_starts_uniform():
    d = diagonal_vector(gram(identity_basis(3)), CFG)
    curve = grover_curve(d, max_iterations=4)
    assert curve[0] == (0, pytest.approx(216 / 4096))
    assert [j for j, _ in curve] == list(range(5))


def test_grover_empty_target():
    with pytest.raises(NumericalError):
        grover_simulate(DiagonalCost(np.zeros(4), 2), threshold=1.0)


def test_grover_cap():
    with pytest.raises(CapExceeded):
        grover_simulate(DiagonalCost(np.ones(2 ** 21), 21))


@pytest.mark.parametrize("n,k,m,expected", [(3, 2, 1, 15 * math.log2(3)), (3, 2, 4, 15 * math.log2(3) - 1)])
def test_runtime_estimate(n, k, m, expected):
    assert grover_runtime_estimate(n, k, m) == pytest.approx(expected)
    assert expected == pytest.approx(23.77 if m == 1 else 22.77, abs=5e-3)


def test_runtime_estimate_everything_marked():
    n, k = 3, 2
    m = 2 ** (5 * k * n * math.log2(n))
    assert grover_runtime_estimate(n, k, m) == pytest.approx(0.0, abs=1e-9)
    with pytest.raises(ConfigError):
        grover_runtime_estimate(n, k, 0)
