"""Independent checks of a designed shortcut by direct propagation in the matrix representation.

The control is taken to be the sampled h_traj, linearly interpolated between
grid points.  hbar = 1 throughout.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .algebra import GeneratorRep
from .errors import AmbiguousBranchError, DegenerateInvariantError, DimensionMismatchError

STEP_TOL = 1e-8
MAX_DOUBLINGS = 12
DEGENERACY_TOL = 1e-8


def assemble_operator(rep: GeneratorRep, coeffs) -> np.ndarray:
    return rep.assemble(coeffs)


def _expm_hermitian(h, dt):
    """exp(-i h dt) for a stack of Hermitian matrices."""
    w, v = np.linalg.eigh(h)
    phase = np.exp(-1j * w * dt[..., None])
    return (v * phase[..., None, :]) @ np.swapaxes(v.conj(), -1, -2)


def _interval_propagators(rep, times, h_traj, n_sub):
    """Product of n_sub midpoint exponentials on every grid interval, shape (M-1, d, d)."""
    dt = np.diff(times)
    frac = (np.arange(n_sub) + 0.5) / n_sub
    h0, h1 = h_traj[:-1], h_traj[1:]
    coeffs = h0[:, None, :] + frac[None, :, None] * (h1 - h0)[:, None, :]
    u = _expm_hermitian(rep.assemble(coeffs), np.repeat((dt / n_sub)[:, None], n_sub, axis=1))
    # multiply the substeps in time order: later factors on the left
    while u.shape[1] > 1:
        if u.shape[1] % 2:
            u = np.concatenate([u, np.broadcast_to(np.eye(rep.dim), u[:, :1].shape)], axis=1)
        u = u[:, 1::2] @ u[:, 0::2]
    return u[:, 0]


def _apply(props, psi0):
    out = np.empty((props.shape[0] + 1, psi0.size), dtype=complex)
    out[0] = psi0
    for k, u in enumerate(props):
        out[k + 1] = u @ out[k]
    return out


def propagate(rep: GeneratorRep, h_traj, psi0, times, tol=STEP_TOL) -> np.ndarray:
    """States on the grid, shape (M, d).

    Each grid interval is split into n equal midpoint-exponential substeps, n
    doubling until the final state moves by less than ``tol``.
    """
    times = np.asarray(times, dtype=float)
    h_traj = np.asarray(h_traj, dtype=float)
    psi0 = np.asarray(psi0, dtype=complex)
    if h_traj.shape != (times.size, rep.n_generators):
        raise DimensionMismatchError(
            f"h_traj must have shape ({times.size}, {rep.n_generators}), got {h_traj.shape}"
        )
    if psi0.shape != (rep.dim,):
        raise DimensionMismatchError(f"psi0 must have length {rep.dim}")
    if not np.all(np.isfinite(h_traj)):
        raise ValueError("h_traj has non-finite samples")
    if abs(np.linalg.norm(psi0) - 1) > 1e-9:
        raise ValueError("psi0 must be normalized")
    if times.size == 1:
        return psi0[None].copy()
    n = 1
    states = _apply(_interval_propagators(rep, times, h_traj, n), psi0)
    for _ in range(MAX_DOUBLINGS):
        n *= 2
        finer = _apply(_interval_propagators(rep, times, h_traj, n), psi0)
        change = np.linalg.norm(finer[-1] - states[-1])
        states = finer
        if change < tol:
            break
    return states


def _invariant_ops(rep, f_traj):
    return rep.assemble(np.asarray(f_traj, dtype=float))


def invariant_residual_profile(rep: GeneratorRep, f_traj, h_traj, times) -> np.ndarray:
    """||dI/dt + i[H, I]|| on interior points, dI/dt by centered differences (NaN at the ends)."""
    times = np.asarray(times, dtype=float)
    i_ops = _invariant_ops(rep, f_traj)
    h_ops = rep.assemble(np.asarray(h_traj, dtype=float))
    out = np.full(times.size, np.nan)
    if times.size < 3:
        return out
    di = (i_ops[2:] - i_ops[:-2]) / (times[2:] - times[:-2])[:, None, None]
    hm, im = h_ops[1:-1], i_ops[1:-1]
    r = di + 1j * (hm @ im - im @ hm)
    out[1:-1] = np.linalg.norm(r, axis=(1, 2))
    return out


def invariant_residual(rep: GeneratorRep, f_traj, h_traj, times) -> float:
    prof = invariant_residual_profile(rep, f_traj, h_traj, times)
    interior = prof[1:-1]
    return float(np.max(interior)) if interior.size else 0.0


@dataclass(frozen=True)
class InvariantSpectrum:
    eigenvalues: np.ndarray    # (M, d), branch order fixed at t = 0 (ascending there)
    eigenvectors: np.ndarray   # (M, d, d), column n is branch n

    def drift(self) -> float:
        return float(np.max(np.abs(self.eigenvalues - self.eigenvalues[0])))


def _fix_gauge(prev, cur):
    """Reorder and rephase columns of cur to follow prev by maximal overlap."""
    ov = prev.conj().T @ cur
    rows, cols = linear_sum_assignment(-np.abs(ov))
    order = cols[np.argsort(rows)]
    cur = cur[:, order]
    o = np.einsum("ij,ij->j", prev.conj(), cur)
    cur = cur * (o.conj() / np.maximum(np.abs(o), 1e-300))[None, :]
    return cur, order


def invariant_spectrum(rep: GeneratorRep, f_traj, check_gap=False, times=None) -> InvariantSpectrum:
    """Eigen-decomposition of I(t) with branches followed by continuity.

    Successive eigenvectors of a branch have real positive overlap.  With
    ``check_gap`` a DegenerateInvariantError is raised where two eigenvalues
    come closer than DEGENERACY_TOL * ||I||.
    """
    ops = _invariant_ops(rep, f_traj)
    w, v = np.linalg.eigh(ops)
    m, d = w.shape
    if check_gap and d > 1:
        gaps = np.min(np.diff(w, axis=1), axis=1)
        scale = np.maximum(np.linalg.norm(ops, axis=(1, 2)), 1e-300)
        bad = np.nonzero(gaps < DEGENERACY_TOL * scale)[0]
        if bad.size:
            k = int(bad[0])
            t = float(times[k]) if times is not None else float(k)
            raise DegenerateInvariantError(t, float(gaps[k]))
    vals = np.empty_like(w)
    vecs = np.empty_like(v)
    vals[0], vecs[0] = w[0], v[0]
    for k in range(1, m):
        cur, order = _fix_gauge(vecs[k - 1], v[k])
        vecs[k] = cur
        vals[k] = w[k][order]
    return InvariantSpectrum(vals, vecs)


def boundary_commutators(rep: GeneratorRep, solution) -> tuple:
    """Frobenius norms of [H, I] at t = 0 and t = t_f."""
    out = []
    for k in (0, -1):
        h = rep.assemble(solution.h_traj[k])
        i = rep.assemble(solution.f_traj[k])
        out.append(float(np.linalg.norm(h @ i - i @ h)))
    return tuple(out)


def boundary_commutator_scales(rep: GeneratorRep, solution) -> tuple:
    """||H|| ||I|| at both ends, the natural scale for boundary_commutators."""
    return tuple(
        float(np.linalg.norm(rep.assemble(solution.h_traj[k])) * np.linalg.norm(rep.assemble(solution.f_traj[k])))
        for k in (0, -1)
    )


def initial_branches(rep: GeneratorRep, solution) -> np.ndarray:
    """Invariant eigenvectors at t = 0 as columns, ordered by their H(0) energy.

    Since [H(0), I(0)] = 0 these are eigenvectors of H(0); using I(0) picks a
    definite basis when H(0) itself is degenerate.
    """
    _, v = np.linalg.eigh(rep.assemble(solution.f_traj[0]))
    h0 = rep.assemble(solution.h_traj[0])
    energies = np.einsum("ij,ik,kj->j", v.conj(), h0, v).real
    return v[:, np.argsort(energies, kind="stable")]


def _final_target(rep, solution, spectrum, psi0):
    """Eigenvector of H(t_f) matching the invariant branch carrying psi0."""
    b0 = int(np.argmax(np.abs(spectrum.eigenvectors[0].conj().T @ psi0)))
    phi_f = spectrum.eigenvectors[-1][:, b0]
    w, v = np.linalg.eigh(rep.assemble(solution.h_traj[-1]))
    j = int(np.argmax(np.abs(v.conj().T @ phi_f)))
    scale = max(1.0, float(np.max(np.abs(w))))
    close = np.nonzero(np.abs(w - w[j]) < DEGENERACY_TOL * scale)[0]
    if close.size > 1:
        raise AmbiguousBranchError(close.tolist())
    return v[:, j]


def eigenbranch_fidelity(rep: GeneratorRep, solution, branch: int, states=None) -> float:
    """|<eigenbranch of H(t_f)|Psi(t_f)>|^2 starting from branch ``branch`` of H(0).

    Branches are numbered by increasing H(0) energy.
    """
    psi0 = initial_branches(rep, solution)[:, branch]
    spectrum = invariant_spectrum(rep, solution.f_traj)
    target = _final_target(rep, solution, spectrum, psi0)
    if states is None:
        states = propagate(rep, solution.h_traj, psi0, solution.times)
    return min(1.0, float(abs(np.vdot(target, states[-1])) ** 2))


def branch_populations(spectrum: InvariantSpectrum, states) -> np.ndarray:
    """|<phi_n(t)|Psi(t)>|^2, shape (M, d)."""
    amps = np.einsum("tdn,td->tn", spectrum.eigenvectors.conj(), states)
    return np.abs(amps) ** 2


@dataclass(frozen=True)
class LRPhases:
    phases: np.ndarray            # (M, d), alpha_n(0) = 0
    mode_amplitudes: np.ndarray   # (d,)


def _time_derivative(x, times):
    return np.gradient(x, times, axis=0, edge_order=2)


def lr_phases_and_reconstruction(rep: GeneratorRep, solution, psi0, states=None):
    """Mode expansion Psi(t) = sum_n c_n exp(i alpha_n) phi_n(t) against direct propagation.

    Returns (LRPhases, max_t ||Psi_LR(t) - Psi(t)||).
    """
    times = solution.times
    psi0 = np.asarray(psi0, dtype=complex)
    spectrum = invariant_spectrum(rep, solution.f_traj, check_gap=True, times=times)
    phi = spectrum.eigenvectors                     # (M, d, n)
    dphi = _time_derivative(phi, times)
    h_ops = rep.assemble(solution.h_traj)
    geometric = np.einsum("tdn,tdn->tn", phi.conj(), 1j * dphi)
    energy = np.einsum("tdn,tde,ten->tn", phi.conj(), h_ops, phi)
    rate = (geometric - energy).real
    alpha = np.zeros_like(rate)
    alpha[1:] = np.cumsum(0.5 * (rate[1:] + rate[:-1]) * np.diff(times)[:, None], axis=0)
    c = phi[0].conj().T @ psi0
    recon = np.einsum("tdn,tn->td", phi, c[None, :] * np.exp(1j * alpha))
    if states is None:
        states = propagate(rep, solution.h_traj, psi0, times)
    resid = float(np.max(np.linalg.norm(recon - states, axis=1)))
    return LRPhases(alpha, c), resid


@dataclass(frozen=True)
class VerificationResult:
    fidelities: tuple             # None where the final H eigenspace is degenerate
    boundary_commutators: tuple
    boundary_scales: tuple
    invariant_residual: float
    eigenvalue_drift: float
    invariant_norm: float
    gamma_drift: float
    lr_residuals: tuple
    population_drift: float
    spectrum: InvariantSpectrum
    populations: np.ndarray       # (M, d) for the lowest branch
    residual_profile: np.ndarray
    fidelity_tol: float = 1e-6
    commutator_rtol: float = 1e-8
    drift_rtol: float = 1e-7

    def defined_fidelities(self) -> list:
        """Fidelities of branches whose final eigenstate is unambiguous."""
        return [f for f in self.fidelities if f is not None]

    @property
    def passed(self) -> bool:
        fids = self.defined_fidelities()
        return (
            bool(fids) and min(fids) >= 1 - self.fidelity_tol
            and all(c < self.commutator_rtol * max(s, 1e-300)
                    for c, s in zip(self.boundary_commutators, self.boundary_scales))
            and self.eigenvalue_drift < self.drift_rtol * self.invariant_norm
        )

    def failures(self) -> list:
        out = []
        fids = self.defined_fidelities()
        if not fids:
            out.append("no eigenbranch has an unambiguous final state")
        elif min(fids) < 1 - self.fidelity_tol:
            out.append(f"fidelity {min(fids):.10f} below 1 - {self.fidelity_tol:g}")
        for name, c, s in zip(("start", "end"), self.boundary_commutators, self.boundary_scales):
            if not c < self.commutator_rtol * max(s, 1e-300):
                out.append(f"[H, I] at {name} = {c:.3e}")
        if not self.eigenvalue_drift < self.drift_rtol * self.invariant_norm:
            out.append(f"invariant eigenvalue drift {self.eigenvalue_drift:.3e}")
        return out


def verify(rep: GeneratorRep, solution) -> VerificationResult:
    """Every check on one solution; all eigenbranches are propagated."""
    branches = initial_branches(rep, solution)
    spectrum = invariant_spectrum(rep, solution.f_traj, times=solution.times)
    fids, lr, pops_all = [], [], []
    for n in range(rep.dim):
        psi0 = branches[:, n]
        states = propagate(rep, solution.h_traj, psi0, solution.times)
        try:
            target = _final_target(rep, solution, spectrum, psi0)
            fids.append(min(1.0, float(abs(np.vdot(target, states[-1])) ** 2)))
        except AmbiguousBranchError:
            fids.append(None)
        pops_all.append(branch_populations(spectrum, states))
        try:
            lr.append(lr_phases_and_reconstruction(rep, solution, psi0, states)[1])
        except DegenerateInvariantError:
            lr.append(float("nan"))
    pop_drift = max(float(np.max(np.abs(p - p[0]))) for p in pops_all)
    gamma = solution.gamma()
    return VerificationResult(
        fidelities=tuple(fids),
        boundary_commutators=boundary_commutators(rep, solution),
        boundary_scales=boundary_commutator_scales(rep, solution),
        invariant_residual=invariant_residual(rep, solution.f_traj, solution.h_traj, solution.times),
        eigenvalue_drift=spectrum.drift(),
        invariant_norm=float(np.linalg.norm(rep.assemble(solution.f_traj[0]))),
        gamma_drift=float(np.max(np.abs(gamma - gamma[0]))),
        lr_residuals=tuple(lr),
        population_drift=pop_drift,
        spectrum=spectrum,
        populations=pops_all[0],
        residual_profile=invariant_residual_profile(rep, solution.f_traj, solution.h_traj, solution.times),
    )
