"""Per-instant inverse problem: given the invariant f and its rate f_dot, find h with f_dot = A(f) h.

With hbar = 1 the coefficient matrix is A[a, b] = sum_c c[a, b, c] f[c].  The
general solution is h = B f_dot + (anything in ker A), where B is the inverse of
A on the complement of its null space.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .algebra import StructureConstants
from .errors import (
    DimensionMismatchError,
    InconsistentSystemError,
    InfeasibleConstraintsError,
    StaError,
)

SV_RTOL = 1e-10
CONSISTENCY_RTOL = 1e-8
CONSTRAINT_RTOL = 1e-8


def _vec(x, n, what="vector"):
    x = np.asarray(x, dtype=float)
    if x.shape != (n,):
        raise DimensionMismatchError(f"{what} must have length {n}, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{what} has non-finite components")
    return x


def _frozen(a):
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


def build_a_matrix(sc: StructureConstants, f) -> np.ndarray:
    f = _vec(f, sc.n_generators, "f")
    return np.einsum("abc,c->ab", sc.c, f)


@dataclass(frozen=True)
class SpectralData:
    """Null space, spectral projectors and group inverse of one A matrix.

    ``q_projector`` projects onto ker A along range A (it commutes with A), and
    ``pseudoinverse`` is the inverse of A restricted to range A, extended by zero.
    Both reduce to the orthogonal projector and the Moore-Penrose inverse when A
    is normal, which is always the case for su2.
    """

    a_matrix: np.ndarray
    null_basis: tuple
    q_projector: np.ndarray
    p_projector: np.ndarray
    pseudoinverse: np.ndarray

    @property
    def n(self) -> int:
        return self.a_matrix.shape[0]

    @property
    def null_dim(self) -> int:
        return len(self.null_basis)

    @property
    def null_matrix(self) -> np.ndarray:
        """Null basis as columns, shape (N, Q)."""
        if not self.null_basis:
            return np.zeros((self.n, 0))
        return np.column_stack(self.null_basis)


def _canonical_sign(v):
    k = int(np.argmax(np.abs(v)))
    return -v if v[k] < 0 else v


def spectral_decompose(a_matrix) -> SpectralData:
    a = np.asarray(a_matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatchError(f"A must be square, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("A has non-finite entries")
    n = a.shape[0]
    u, s, vt = np.linalg.svd(a)
    smax = s[0] if n else 0.0
    rank = int(np.sum(s > SV_RTOL * smax)) if smax > 0 else 0

    right = vt[rank:].T  # ker A, orthonormal columns
    left = u[:, rank:]   # ker A^T
    null_basis = tuple(_frozen(_canonical_sign(v)) for v in right.T)
    right = np.column_stack(null_basis) if null_basis else np.zeros((n, 0))

    if rank == n:
        q = np.zeros((n, n))
    else:
        overlap = left.T @ right
        if np.linalg.svd(overlap, compute_uv=False)[-1] < 1e-8:
            # zero eigenvalue carries a Jordan block: no projector commuting with A exists
            raise StaError("A has a non-semisimple zero eigenvalue; spectral projector undefined")
        q = right @ np.linalg.solve(overlap, left.T)
    p = np.eye(n) - q
    # (A + Q) is invertible and its inverse is B + Q
    b = np.linalg.inv(a + q) - q if rank > 0 else np.zeros((n, n))
    b = p @ b @ p
    return SpectralData(_frozen(a), null_basis, _frozen(q), _frozen(p), _frozen(b))


def consistency_residual(spec: SpectralData, f_dot) -> float:
    """||Q f_dot||: zero exactly when f_dot = A h has a solution."""
    f_dot = _vec(f_dot, spec.n, "f_dot")
    return float(np.linalg.norm(spec.q_projector @ f_dot))


def _check_consistent(spec, f_dot, tol):
    resid = consistency_residual(spec, f_dot)
    if tol is None:
        # absolute floor for f_dot that cancels down to rounding level
        tol = CONSISTENCY_RTOL * float(np.linalg.norm(f_dot)) + 1e-14 * float(np.linalg.norm(spec.a_matrix))
    if resid > tol:
        raise InconsistentSystemError(resid)
    return resid


def solve_hamiltonian(spec: SpectralData, f_dot, null_coeffs=None, tol=None) -> np.ndarray:
    """h = B f_dot + sum_j null_coeffs[j] * null_basis[j]."""
    f_dot = _vec(f_dot, spec.n, "f_dot")
    _check_consistent(spec, f_dot, tol)
    h = spec.pseudoinverse @ f_dot
    if null_coeffs is None:
        null_coeffs = np.zeros(spec.null_dim)
    null_coeffs = np.atleast_1d(np.asarray(null_coeffs, dtype=float))
    if null_coeffs.shape != (spec.null_dim,):
        raise DimensionMismatchError(
            f"expected {spec.null_dim} null-space coefficients, got {null_coeffs.shape}"
        )
    return h + spec.null_matrix @ null_coeffs


def solve_constrained(spec: SpectralData, f_dot, fixed: dict, tol=None) -> np.ndarray:
    """Pick the null-space content so that h[k] == fixed[k] for every key (0-based).

    Exact or error: if the fixed values cannot be met to CONSTRAINT_RTOL the call
    raises InfeasibleConstraintsError. With fewer constraints than null
    directions the minimum-norm null content is used.
    """
    f_dot = _vec(f_dot, spec.n, "f_dot")
    _check_consistent(spec, f_dot, tol)
    h0 = spec.pseudoinverse @ f_dot
    if not fixed:
        return h0
    idx = sorted(int(k) for k in fixed)
    if idx[0] < 0 or idx[-1] >= spec.n:
        raise DimensionMismatchError(f"fixed index out of range 0..{spec.n - 1}: {idx}")
    target = np.array([float(fixed[k]) for k in idx])
    v = spec.null_matrix[idx, :]
    rhs = target - h0[idx]
    if v.shape[1] == 0:
        x = np.zeros(0)
    else:
        x, *_ = np.linalg.lstsq(v, rhs, rcond=None)
    resid = float(np.linalg.norm(v @ x - rhs))
    scale = max(1.0, float(np.linalg.norm(h0)), float(np.linalg.norm(target)))
    if resid > CONSTRAINT_RTOL * scale:
        raise InfeasibleConstraintsError(resid)
    h = h0 + spec.null_matrix @ x
    h[idx] = target
    return h


# -- Gauss elimination -------------------------------------------------------

def row_reduce(aug, n_cols=None, pivoting=True, tol=1e-12):
    """Forward elimination of an augmented matrix to row-echelon form.

    Only the first ``n_cols`` columns are candidates for pivots (default: all but
    the last).  With ``pivoting`` the largest remaining entry of each column is
    swapped into place; without it the first nonzero entry is used, which
    reproduces hand elimination in the given row order.

    Returns (reduced, pivots) where pivots lists (row, column) pairs.
    """
    r = np.array(aug, dtype=float, copy=True)
    m = r.shape[0]
    if n_cols is None:
        n_cols = r.shape[1] - 1
    scale = max(1.0, float(np.max(np.abs(r[:, :n_cols])))) if r.size else 1.0
    pivots = []
    row = 0
    for col in range(n_cols):
        if row >= m:
            break
        column = np.abs(r[row:, col])
        if pivoting:
            k = row + int(np.argmax(column))
        else:
            nz = np.nonzero(column > tol * scale)[0]
            k = row + int(nz[0]) if nz.size else row
        if abs(r[k, col]) <= tol * scale:
            continue
        if k != row:
            r[[row, k]] = r[[k, row]]
        below = r[row + 1:, col] / r[row, col]
        r[row + 1:] -= np.outer(below, r[row])
        r[row + 1:, col] = 0.0
        pivots.append((row, col))
        row += 1
    return r, pivots


def _back_substitute(r, pivots, n_unknowns):
    x = np.zeros(n_unknowns)
    for row, col in reversed(pivots):
        x[col] = (r[row, -1] - r[row, col + 1:n_unknowns] @ x[col + 1:]) / r[row, col]
    return x


def gauss_solve(sc: StructureConstants, f, f_dot, fixed: dict) -> np.ndarray:
    """Solve f_dot = A(f) h by elimination on the augmented matrix [A | f_dot].

    The fixed components (0-based keys) act as the free parameters: their
    columns are moved to the right-hand side before the remaining unknowns are
    eliminated and back-substituted.
    """
    n = sc.n_generators
    f = _vec(f, n, "f")
    f_dot = _vec(f_dot, n, "f_dot")
    a = build_a_matrix(sc, f)
    scale = max(1.0, float(np.max(np.abs(a)))) * max(1.0, float(np.linalg.norm(f_dot)))

    # solvability of the unconstrained system
    red, piv = row_reduce(np.column_stack([a, f_dot]))
    zero_rows = red[len(piv):, -1]
    resid = float(np.linalg.norm(zero_rows)) if zero_rows.size else 0.0
    if resid > CONSISTENCY_RTOL * scale:
        raise InconsistentSystemError(resid)

    idx = sorted(int(k) for k in fixed)
    if idx and (idx[0] < 0 or idx[-1] >= n):
        raise DimensionMismatchError(f"fixed index out of range 0..{n - 1}: {idx}")
    free = [k for k in range(n) if k not in idx]
    h_fixed = np.array([float(fixed[k]) for k in idx])
    rhs = f_dot - (a[:, idx] @ h_fixed if idx else 0.0)
    red, piv = row_reduce(np.column_stack([a[:, free], rhs]))
    leftover = red[len(piv):, -1]
    resid = float(np.linalg.norm(leftover)) if leftover.size else 0.0
    if resid > CONSTRAINT_RTOL * scale:
        raise InfeasibleConstraintsError(resid)
    if len(piv) < len(free):
        missing = sorted(set(range(len(free))) - {c for _, c in piv})
        raise InfeasibleConstraintsError(
            0.0,
            "fixed components leave h undetermined in component(s) "
            + ", ".join(str(free[c]) for c in missing),
        )
    x = _back_substitute(red, piv, len(free))
    h = np.zeros(n)
    h[free] = x
    h[idx] = h_fixed
    return h
