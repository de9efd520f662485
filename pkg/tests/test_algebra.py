import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from invariant_sta.algebra import (
    GeneratorRep,
    StructureConstants,
    builtin_algebra,
    dump_rep,
    lie_invariant_directions,
    load_rep,
    resolve_algebra,
    verify_closure,
)
from invariant_sta.errors import (
    AlgebraError,
    DimensionMismatchError,
    NonHermitianGeneratorError,
    NotClosedError,
    UnsupportedAlgebraError,
)


@pytest.mark.parametrize("name", ["su2", "u3s3"])
def test_closure_reproduces_builtin_tensor(name):
    sc, rep = builtin_algebra(name)
    derived = verify_closure(rep)
    assert np.max(np.abs(derived.c - sc.c)) < 1e-12


@pytest.mark.parametrize("name", ["su2", "u3s3"])
def test_commutators_match_tensor(name):
    sc, rep = builtin_algebra(name)
    t = rep.matrices
    for b in range(sc.n_generators):
        for c in range(sc.n_generators):
            comm = t[b] @ t[c] - t[c] @ t[b]
            expected = 1j * np.einsum("a,aij->ij", sc.c[:, b, c], t)
            assert np.allclose(comm, expected, atol=1e-14)


@pytest.mark.parametrize("name", ["su2", "u3s3"])
def test_antisymmetry_and_jacobi(name):
    sc, _ = builtin_algebra(name)
    assert sc.antisymmetry_residual() == 0.0
    assert sc.jacobi_residual() < 1e-14


def test_su2_levi_civita():
    sc, _ = builtin_algebra("su2")
    eps = np.zeros((3, 3, 3))
    for (i, j, k), s in {(0, 1, 2): 1, (1, 2, 0): 1, (2, 0, 1): 1,
                         (0, 2, 1): -1, (2, 1, 0): -1, (1, 0, 2): -1}.items():
        eps[k, i, j] = s
    assert np.array_equal(sc.c, eps)


def test_u3s3_t4_brackets():
    _, rep = builtin_algebra("u3s3")
    t1, t2, t3, t4 = rep.matrices
    assert np.allclose(t4 @ t1 - t1 @ t4, 1j * t2)
    assert np.allclose(t2 @ t4 - t4 @ t2, 1j * t1)
    assert np.allclose(t4 @ t3 - t3 @ t4, 0)


def test_center():
    assert lie_invariant_directions(builtin_algebra("su2")[0]) == []
    (v,) = lie_invariant_directions(builtin_algebra("u3s3")[0])
    assert np.allclose(v, np.array([0, 0, -1, 1]) / np.sqrt(2))
    _, rep = builtin_algebra("u3s3")
    z = rep.assemble(v)
    for t in rep.matrices:
        assert np.allclose(z @ t, t @ z)


def test_non_hermitian_names_index():
    _, rep = builtin_algebra("su2")
    m = np.array(rep.matrices)
    m[1] = m[1] + np.array([[0, 1], [0, 0]])
    with pytest.raises(NonHermitianGeneratorError) as err:
        verify_closure(GeneratorRep(m))
    assert err.value.index == 1


def test_not_closed_names_pair():
    # sigma_x/2 and sigma_y/2 alone miss their commutator
    _, rep = builtin_algebra("su2")
    with pytest.raises(NotClosedError) as err:
        verify_closure(GeneratorRep(rep.matrices[:2]))
    assert err.value.pair == (0, 1)


def test_dependent_generators():
    _, rep = builtin_algebra("su2")
    m = np.array([rep.matrices[0], 2 * rep.matrices[0]])
    with pytest.raises(AlgebraError):
        verify_closure(GeneratorRep(m))


def test_bad_tensor_shape():
    with pytest.raises(AlgebraError):
        StructureConstants(np.zeros((2, 3, 3)))


def test_assemble_stack_and_mismatch():
    _, rep = builtin_algebra("su2")
    out = rep.assemble(np.eye(3))
    assert out.shape == (3, 2, 2)
    assert np.allclose(out, rep.matrices)
    with pytest.raises(DimensionMismatchError):
        rep.assemble([1.0, 2.0])


def test_rep_file_round_trip(tmp_path):
    _, rep = builtin_algebra("u3s3")
    path = tmp_path / "u3s3_copy.json"
    path.write_text(json.dumps(dump_rep(rep)))
    name, sc, rep2 = resolve_algebra(path)
    assert name == "u3s3_copy"
    assert np.array_equal(rep2.matrices, rep.matrices)
    assert np.max(np.abs(sc.c - builtin_algebra("u3s3")[0].c)) < 1e-12


def test_rep_file_rejects_extra_keys(tmp_path):
    path = tmp_path / "x.json"
    path.write_text(json.dumps({"dim": 2, "generators": [], "extra": 1}))
    with pytest.raises(AlgebraError):
        load_rep(path)


def test_unknown_name():
    with pytest.raises(UnsupportedAlgebraError):
        builtin_algebra("so5")


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_closure_is_basis_covariant(seed):
    # a real orthogonal change of basis keeps closure; the tensor transforms covariantly
    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    sc, rep = builtin_algebra("su2")
    new = GeneratorRep(np.einsum("ab,bij->aij", q, rep.matrices))
    c_new = verify_closure(new).c
    expected = np.einsum("ad,bk,cl,dkl->abc", q, q, q, sc.c)
    assert np.allclose(c_new, expected, atol=1e-10)
