"""Dynamical Lie algebras: structure constants and Hermitian matrix representations.

Conventions: generators are indexed from 0 in code, the structure tensor is real,

    [T_b, T_c] = i * sum_a c[a, b, c] * T_a,

so the factor ``i`` is kept out of the stored numbers.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    AlgebraError,
    DimensionMismatchError,
    NonHermitianGeneratorError,
    NotClosedError,
    UnsupportedAlgebraError,
)

RTOL = 1e-10
BUILTIN_NAMES = ("su2", "u3s3")


def _frozen(a):
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class StructureConstants:
    c: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float)
        if c.ndim != 3 or not (c.shape[0] == c.shape[1] == c.shape[2]) or c.shape[0] < 1:
            raise AlgebraError(f"structure tensor must be N x N x N, got shape {c.shape}")
        if not np.all(np.isfinite(c)):
            raise AlgebraError("structure tensor has non-finite entries")
        object.__setattr__(self, "c", _frozen(c))

    @property
    def n_generators(self) -> int:
        return self.c.shape[0]

    def antisymmetry_residual(self) -> float:
        return float(np.max(np.abs(self.c + self.c.transpose(0, 2, 1))))

    def jacobi_residual(self) -> float:
        c = self.c
        jac = (
            np.einsum("ebc,aed->abcd", c, c)
            + np.einsum("ecd,aeb->abcd", c, c)
            + np.einsum("edb,aec->abcd", c, c)
        )
        return float(np.max(np.abs(jac)))

    def nonzero_entries(self, tol=1e-12):
        """(a, b, c, value) for every |c[a,b,c]| > tol with b < c, 0-based."""
        out = []
        for a, b, cc in zip(*np.nonzero(np.abs(self.c) > tol)):
            if b < cc:
                out.append((int(a), int(b), int(cc), float(self.c[a, b, cc])))
        return out


@dataclass(frozen=True)
class GeneratorRep:
    """N complex d x d matrices, stored as an array of shape (N, d, d)."""

    matrices: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrices, dtype=complex)
        if m.ndim != 3 or m.shape[1] != m.shape[2] or m.shape[0] < 1:
            raise AlgebraError(f"generators must have shape (N, d, d), got {m.shape}")
        if not np.all(np.isfinite(m)):
            raise AlgebraError("generator matrices have non-finite entries")
        object.__setattr__(self, "matrices", _frozen(m))

    @property
    def n_generators(self) -> int:
        return self.matrices.shape[0]

    @property
    def dim(self) -> int:
        return self.matrices.shape[1]

    def assemble(self, coeffs) -> np.ndarray:
        """sum_a coeffs[..., a] T_a; works on a single vector or a stack of them."""
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape[-1] != self.n_generators:
            raise DimensionMismatchError(
                f"expected {self.n_generators} coefficients, got {coeffs.shape[-1]}"
            )
        return np.tensordot(coeffs, self.matrices, axes=([-1], [0]))


def _su2_matrices():
    t1 = np.array([[0, 1], [1, 0]]) / 2
    t2 = np.array([[0, -1j], [1j, 0]]) / 2
    t3 = np.array([[1, 0], [0, -1]]) / 2
    return np.array([t1, t2, t3], dtype=complex)


def _u3s3_matrices():
    r = 2 * np.sqrt(2)
    t1 = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]]) / r
    t2 = np.array([[0, -1j, 0], [1j, 0, 1j], [0, -1j, 0]]) / r
    t3 = np.array([[1, 0, 1], [0, -2, 0], [1, 0, 1]]) / 4
    t4 = np.diag([1.0, 0.0, 1.0])
    return np.array([t1, t2, t3, t4], dtype=complex)


def _tensor_from_brackets(n, brackets):
    # brackets: (b, c, a) meaning [T_b, T_c] = i T_a, 1-based as written in the literature
    c = np.zeros((n, n, n))
    for b, cc, a in brackets:
        c[a - 1, b - 1, cc - 1] = 1.0
        c[a - 1, cc - 1, b - 1] = -1.0
    return c


_SU2_BRACKETS = [(1, 2, 3), (2, 3, 1), (3, 1, 2)]
_U3S3_BRACKETS = _SU2_BRACKETS + [(4, 1, 2), (2, 4, 1)]


def builtin_algebra(name: str) -> tuple[StructureConstants, GeneratorRep]:
    """Structure constants and defining representation of a named algebra.

    ``su2``: spin-1/2 matrices (Pauli / 2), N=3, d=2.
    ``u3s3``: SU(2) plus T4 = diag(1, 0, 1) in the two-boson double-well basis
    {|2,0>, |1,1>, |0,2>}, N=4, d=3.
    """
    key = str(name).lower()
    if key == "su2":
        return StructureConstants(_tensor_from_brackets(3, _SU2_BRACKETS)), GeneratorRep(_su2_matrices())
    if key == "u3s3":
        return StructureConstants(_tensor_from_brackets(4, _U3S3_BRACKETS)), GeneratorRep(_u3s3_matrices())
    raise UnsupportedAlgebraError(f"unknown algebra {name!r}; built-ins are {', '.join(BUILTIN_NAMES)}")


def check_hermitian(rep: GeneratorRep, tol=RTOL):
    for a, t in enumerate(rep.matrices):
        dev = float(np.max(np.abs(t - t.conj().T)))
        if dev > tol * max(1.0, float(np.max(np.abs(t)))):
            raise NonHermitianGeneratorError(a, dev)


def _span_matrix(rep):
    return rep.matrices.reshape(rep.n_generators, -1).T  # (d*d, N)


def verify_closure(rep: GeneratorRep) -> StructureConstants:
    """Derive the structure constants of ``rep`` by projecting every commutator onto the span.

    Raises NonHermitianGeneratorError, AlgebraError (linear dependence) or
    NotClosedError naming the first offending pair.
    """
    check_hermitian(rep)
    m = _span_matrix(rep)
    sv = np.linalg.svd(m, compute_uv=False)
    if sv[-1] <= RTOL * sv[0]:
        raise AlgebraError("generators are linearly dependent")

    n = rep.n_generators
    t = rep.matrices
    norms = np.linalg.norm(t, axis=(1, 2))
    c = np.zeros((n, n, n))
    for b in range(n):
        for cc in range(b + 1, n):
            comm = (t[b] @ t[cc] - t[cc] @ t[b]) / 1j
            coef, *_ = np.linalg.lstsq(m, comm.ravel(), rcond=None)
            coef = coef.real
            resid = float(np.linalg.norm(m @ coef - comm.ravel()))
            if resid > RTOL * norms[b] * norms[cc]:
                raise NotClosedError((b, cc), resid)
            c[:, b, cc] = coef
            c[:, cc, b] = -coef
    return StructureConstants(c)


def lie_invariant_directions(sc: StructureConstants) -> list[np.ndarray]:
    """Orthonormal basis of the center: vectors v with sum_c c[a,b,c] v[c] = 0 for all a, b."""
    n = sc.n_generators
    stacked = sc.c.reshape(n * n, n)
    _, s, vt = np.linalg.svd(stacked)
    smax = s[0] if s.size else 0.0
    rank = int(np.sum(s > RTOL * smax)) if smax > 0 else 0
    basis = []
    for v in vt[rank:]:
        # sign convention: last nonzero entry positive
        nz = np.nonzero(np.abs(v) > 1e-12)[0]
        if nz.size and v[nz[-1]] < 0:
            v = -v
        basis.append(v.copy())
    return basis


def load_rep(path) -> GeneratorRep:
    """Read ``{"dim": d, "generators": [[[ [re, im], ...], ...], ...]}``."""
    with open(Path(path)) as fh:
        data = json.load(fh)
    if not isinstance(data, dict) or set(data) != {"dim", "generators"}:
        raise AlgebraError("representation file must have exactly the keys 'dim' and 'generators'")
    d = data["dim"]
    if not isinstance(d, int) or d < 1:
        raise AlgebraError("'dim' must be a positive integer")
    mats = []
    for a, g in enumerate(data["generators"]):
        arr = np.asarray(g, dtype=float)
        if arr.shape != (d, d, 2):
            raise AlgebraError(f"generator {a + 1} must be {d}x{d} [re, im] pairs, got shape {arr.shape}")
        mats.append(arr[..., 0] + 1j * arr[..., 1])
    if not mats:
        raise AlgebraError("no generators given")
    return GeneratorRep(np.array(mats))


def dump_rep(rep: GeneratorRep) -> dict:
    gens = [[[[float(z.real), float(z.imag)] for z in row] for row in t] for t in rep.matrices]
    return {"dim": rep.dim, "generators": gens}


def resolve_algebra(name_or_path) -> tuple[str, StructureConstants, GeneratorRep]:
    """Built-in name or a representation file; custom tensors always come from verify_closure."""
    key = str(name_or_path)
    if key.lower() in BUILTIN_NAMES:
        sc, rep = builtin_algebra(key)
        return key.lower(), sc, rep
    p = Path(key)
    if p.suffix == ".json" or p.exists():
        rep = load_rep(p)
        return p.stem, verify_closure(rep), rep
    raise UnsupportedAlgebraError(f"unknown algebra {key!r}")
