import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from invariant_sta.algebra import builtin_algebra
from invariant_sta.errors import (
    DimensionMismatchError,
    InconsistentSystemError,
    InfeasibleConstraintsError,
    StaError,
)
from invariant_sta.solver import (
    build_a_matrix,
    consistency_residual,
    gauss_solve,
    row_reduce,
    solve_constrained,
    solve_hamiltonian,
    spectral_decompose,
)

SC = {name: builtin_algebra(name)[0] for name in ("su2", "u3s3")}
FREE = {"su2": (1,), "u3s3": (1, 2)}

vectors3 = st.lists(st.floats(-3, 3), min_size=3, max_size=3)
vectors4 = st.lists(st.floats(-3, 3), min_size=4, max_size=4)


def test_su2_a_matrix_is_cross_product():
    f = np.array([0.3, -1.2, 0.7])
    h = np.array([1.1, 0.4, -0.5])
    a = build_a_matrix(SC["su2"], f)
    assert np.allclose(a @ h, np.cross(h, f))
    assert np.allclose(a, -a.T)


def test_u3s3_a_matrix_entries():
    f1, f2, f3, f4 = 0.2, -0.7, 1.3, 0.4
    g = f3 + f4
    expected = np.array([
        [0, g, -f2, -f2],
        [-g, 0, f1, f1],
        [f2, -f1, 0, 0],
        [0, 0, 0, 0],
    ])
    assert np.allclose(build_a_matrix(SC["u3s3"], [f1, f2, f3, f4]), expected)


@pytest.mark.parametrize("name", ["su2", "u3s3"])
def test_spectral_identities_random(name, rng):
    sc = SC[name]
    for _ in range(200):
        f = rng.normal(size=sc.n_generators)
        sp = spectral_decompose(build_a_matrix(sc, f))
        a, b, q, p = sp.a_matrix, sp.pseudoinverse, sp.q_projector, sp.p_projector
        assert np.allclose(a @ b @ a, a, atol=1e-12)
        assert np.allclose(b @ a @ b, b, atol=1e-12)
        assert np.allclose(q @ q, q, atol=1e-12)
        assert np.allclose(q @ a, 0, atol=1e-12) and np.allclose(a @ q, 0, atol=1e-12)
        assert np.allclose(p + q, np.eye(sc.n_generators))
        assert sp.null_dim == {"su2": 1, "u3s3": 2}[name]


def test_su2_null_space_is_f():
    f = np.array([0.6, -0.8, 0.0])
    sp = spectral_decompose(build_a_matrix(SC["su2"], f))
    (v,) = sp.null_basis
    # sign convention: largest entry positive
    assert np.allclose(v, -f / np.linalg.norm(f))
    # normal A: spectral projector equals the orthogonal one, B equals Moore-Penrose
    assert np.allclose(sp.pseudoinverse, np.linalg.pinv(sp.a_matrix))


def test_zero_matrix():
    sp = spectral_decompose(np.zeros((3, 3)))
    assert sp.null_dim == 3
    assert np.allclose(sp.q_projector, np.eye(3))
    assert np.allclose(sp.pseudoinverse, 0)


def test_jordan_block_rejected():
    with pytest.raises(StaError):
        spectral_decompose(np.array([[0.0, 1.0], [0.0, 0.0]]))


def test_inconsistent_rate_detected():
    f = np.array([0.0, 0.0, 1.0])
    sp = spectral_decompose(build_a_matrix(SC["su2"], f))
    # f_dot along f would change the Casimir
    assert consistency_residual(sp, [0, 0, 1.0]) == pytest.approx(1.0)
    with pytest.raises(InconsistentSystemError):
        solve_hamiltonian(sp, [0, 0, 1.0])


def test_null_coefficients_shift_solution():
    f = np.array([0.0, 0.0, 2.0])
    sp = spectral_decompose(build_a_matrix(SC["su2"], f))
    h = solve_hamiltonian(sp, [0.5, 0.0, 0.0], null_coeffs=[3.0])
    assert np.allclose(build_a_matrix(SC["su2"], f) @ h, [0.5, 0, 0])
    assert h[2] == pytest.approx(3.0)
    with pytest.raises(DimensionMismatchError):
        solve_hamiltonian(sp, [0.5, 0.0, 0.0], null_coeffs=[1.0, 2.0])


def test_fixed_component_outside_null_space_is_infeasible():
    # f along T3: the null direction has no T1 content, so h1 is not free
    f = np.array([0.0, 0.0, 1.0])
    sc = SC["su2"]
    a = build_a_matrix(sc, f)
    f_dot = a @ np.array([0.3, 0.2, 0.0])
    sp = spectral_decompose(a)
    with pytest.raises(InfeasibleConstraintsError):
        solve_constrained(sp, f_dot, {0: 5.0})
    with pytest.raises(InfeasibleConstraintsError):
        gauss_solve(sc, f, f_dot, {0: 5.0})


def test_gauss_inconsistent():
    with pytest.raises(InconsistentSystemError):
        gauss_solve(SC["su2"], [0, 0, 1.0], [0, 0, 1.0], {1: 0.0})


def test_row_reduce_echelon():
    aug = np.array([[0.0, 2, 1, 3], [1, 1, 0, 2], [2, 2, 0, 4]])
    red, piv = row_reduce(aug)
    assert [c for _, c in piv] == [0, 1]
    assert np.allclose(red[2], 0)
    red_np, piv_np = row_reduce(aug, pivoting=False)
    assert [c for _, c in piv_np] == [0, 1]


@settings(max_examples=200, deadline=None)
@given(vectors3, vectors3)
def test_su2_round_trip(f, h):
    f, h = np.array(f), np.array(h)
    if abs(f[1]) < 1e-2:
        return
    sc = SC["su2"]
    f_dot = build_a_matrix(sc, f) @ h
    sp = spectral_decompose(build_a_matrix(sc, f))
    got = solve_constrained(sp, f_dot, {1: h[1]})
    assert np.allclose(got, h, atol=1e-8 * (1 + np.abs(h).max()) / min(1, abs(f[1])))


@settings(max_examples=200, deadline=None)
@given(vectors4, vectors4)
def test_u3s3_general_solution_solves(f, h):
    f, h = np.array(f), np.array(h)
    sc = SC["u3s3"]
    a = build_a_matrix(sc, f)
    if np.linalg.norm(a) < 1e-3:
        return
    f_dot = a @ h
    sp = spectral_decompose(a)
    x = solve_hamiltonian(sp, f_dot, null_coeffs=[0.7, -1.1])
    assert np.allclose(a @ x, f_dot, atol=1e-9 * (1 + np.linalg.norm(f_dot)))


@pytest.mark.parametrize("name", ["su2", "u3s3"])
def test_gauss_matches_pseudoinverse(name, rng):
    sc = SC[name]
    free = FREE[name]
    worst = 0.0
    for _ in range(300):
        f = rng.uniform(-1, 1, sc.n_generators)
        if abs(f[1]) < 0.1:
            continue
        h = rng.uniform(-1, 1, sc.n_generators)
        f_dot = build_a_matrix(sc, f) @ h
        fixed = {k: h[k] for k in free}
        g = gauss_solve(sc, f, f_dot, fixed)
        p = solve_constrained(spectral_decompose(build_a_matrix(sc, f)), f_dot, fixed)
        worst = max(worst, np.max(np.abs(g - p)), np.max(np.abs(g - h)))
    assert worst < 1e-9
