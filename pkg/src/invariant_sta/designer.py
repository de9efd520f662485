"""Shortcut design: boundary conditions, polynomial ansatz, closed-form pipelines, minimum time.

Both built-in pipelines reduce to the same three-component problem.  For su2
the components are (T1, T2, T3).  For u3s3, T4 = T3 + Z with Z = T4 - T3
central, so any element splits into an su2 part with third component
f3 + f4 (resp. h3 + h4) plus a multiple of Z.  The Z coefficient of the
invariant is f4, which is conserved, and it is fixed to the constant c2.

With h2 = 0 the invariant condition reads (hbar = 1, x/y/z = 1/2/3)

    f_x' = -f_y h_z,    f_y' = f_x h_z - f_z h_x,    f_z' = f_y h_x.

Case "x": h_x is imposed and f_z is interpolated, then
    f_y = f_z' / h_x,  f_x = +-sqrt(c1 - f_z^2 - f_y^2),  h_z = (f_y' + f_z h_x) / f_x.
Case "z": h_z is imposed and f_x is interpolated, then
    f_y = -f_x' / h_z, f_z = +-sqrt(c1 - f_x^2 - f_y^2),  h_x = (f_x h_z - f_y') / f_z.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Mapping, Union

import numpy as np

from .errors import (
    ConstraintConflictError,
    InfeasibleDesignError,
    NoFeasibleTimeError,
    PipelineNotAvailableError,
    ScenarioError,
)

N_GENERATORS = {"su2": 3, "u3s3": 4}
RADICAND_ATOL = 1e-12
ENDPOINT_OFFSET = 1e-6
MIN_TIME_RESOLUTION = 0.5


# -- imposed time profiles -----------------------------------------------------

@dataclass(frozen=True)
class LinearRamp:
    start: float
    end: float

    def value(self, t, t_f):
        t = np.asarray(t, dtype=float)
        return self.start + (self.end - self.start) * t / t_f

    def derivative(self, t, t_f):
        return np.full_like(np.asarray(t, dtype=float), (self.end - self.start) / t_f)

    def to_json(self):
        return {"type": "linear", "from": self.start, "to": self.end}


@dataclass(frozen=True)
class PolyProfile:
    """Polynomial in absolute time, coefficients in ascending powers of t."""

    coeffs: tuple

    def value(self, t, t_f):
        return np.polynomial.polynomial.polyval(np.asarray(t, dtype=float), self.coeffs)

    def derivative(self, t, t_f):
        d = np.polynomial.polynomial.polyder(self.coeffs) if len(self.coeffs) > 1 else [0.0]
        return np.polynomial.polynomial.polyval(np.asarray(t, dtype=float), d)

    def to_json(self):
        return {"type": "poly", "coeffs": list(self.coeffs)}


Profile = Union[LinearRamp, PolyProfile]


# -- scenario --------------------------------------------------------------------

@dataclass(frozen=True)
class ScenarioSpec:
    """Everything needed to design one shortcut.

    Component labels in ``forbidden``, ``imposed`` and ``ansatz_component`` are
    1-based (h_1 ... h_N), matching the scenario files.  Times and energies are
    dimensionless with hbar = 1.
    """

    algebra: str
    t_f: float
    h_initial: tuple
    h_final: tuple
    forbidden: frozenset = frozenset()
    imposed: Mapping[int, Profile] = field(default_factory=dict)
    ansatz_component: int | None = None
    ansatz_degree: int = 5
    grid_points: int = 2001
    c1: float | str = "auto"
    c2: float = 0.0
    name: str = "scenario"

    def __post_init__(self):
        object.__setattr__(self, "h_initial", tuple(float(x) for x in self.h_initial))
        object.__setattr__(self, "h_final", tuple(float(x) for x in self.h_final))
        object.__setattr__(self, "forbidden", frozenset(int(k) for k in self.forbidden))
        object.__setattr__(self, "imposed", dict(self.imposed))
        if not (self.t_f > 0 and math.isfinite(self.t_f)):
            raise ScenarioError(f"t_f must be positive, got {self.t_f}")
        if self.grid_points < 3:
            raise ScenarioError("grid_points must be at least 3")
        if self.ansatz_degree < 5:
            raise ScenarioError("ansatz_degree must be at least 5 (six boundary conditions)")
        if len(self.h_initial) != len(self.h_final):
            raise ScenarioError("h_initial and h_final differ in length")
        clash = self.forbidden & set(self.imposed)
        if clash:
            raise ConstraintConflictError(
                f"components {sorted(clash)} are both forbidden and imposed"
            )
        if not (self.c1 == "auto" or (isinstance(self.c1, (int, float)) and self.c1 > 0)):
            raise ScenarioError("c1 must be 'auto' or a positive number")

    @property
    def n_generators(self) -> int:
        return len(self.h_initial)

    def with_final_time(self, t_f) -> "ScenarioSpec":
        return replace(self, t_f=float(t_f))


# -- polynomial ansatz -------------------------------------------------------------

@dataclass(frozen=True)
class PolynomialAnsatz:
    """Polynomial on [0, t_f], stored in the scaled variable s = t / t_f for conditioning."""

    scaled_coeffs: tuple
    t_f: float

    @property
    def degree(self) -> int:
        return len(self.scaled_coeffs) - 1

    @property
    def coefficients(self) -> np.ndarray:
        """b_i with f(t) = sum_i b_i t^i."""
        a = np.asarray(self.scaled_coeffs)
        return a / self.t_f ** np.arange(a.size)

    def __call__(self, t, deriv=0):
        s = np.asarray(t, dtype=float) / self.t_f
        c = np.asarray(self.scaled_coeffs)
        if deriv:
            c = np.polynomial.polynomial.polyder(c, deriv)
        return np.polynomial.polynomial.polyval(s, c) / self.t_f ** deriv


def fit_polynomial(values, first, second, t_f, degree=5) -> PolynomialAnsatz:
    """Polynomial matching value, first and second derivative at t = 0 and t = t_f.

    ``values``, ``first``, ``second`` are pairs (at 0, at t_f).  Coefficients
    beyond the sixth are zero.
    """
    if not t_f > 0:
        raise ValueError("t_f must be positive")
    if degree < 5:
        raise ValueError("degree must be at least 5")
    # derivatives in s = t/t_f pick up powers of t_f
    rhs = np.array([values[0], first[0] * t_f, second[0] * t_f**2,
                    values[1], first[1] * t_f, second[1] * t_f**2], dtype=float)
    k = np.arange(6)
    m = np.zeros((6, 6))
    m[0, 0] = 1.0
    m[1, 1] = 1.0
    m[2, 2] = 2.0
    m[3] = 1.0
    m[4] = k
    m[5] = k * (k - 1)
    a = np.linalg.solve(m, rhs)
    coeffs = np.zeros(degree + 1)
    coeffs[:6] = a
    return PolynomialAnsatz(tuple(float(x) for x in coeffs), float(t_f))


# -- pipeline plan -------------------------------------------------------------------

@dataclass(frozen=True)
class _Plan:
    algebra: str
    case: str          # "x": h_x imposed, f_z interpolated; "z": the reverse
    x: int             # 0-based index of the x generator (always T1)
    z_h: tuple         # 0-based h indices summed into the effective h_z
    imposed_label: int
    ansatz_label: int


def _effective(h, plan):
    h = np.asarray(h, dtype=float)
    return h[plan.x], float(sum(h[i] for i in plan.z_h))


def _plan(spec: ScenarioSpec) -> _Plan:
    alg = str(spec.algebra).lower()
    if alg not in N_GENERATORS:
        raise PipelineNotAvailableError(
            f"no closed-form design pipeline for algebra {spec.algebra!r} (only su2 and u3s3)"
        )
    n = N_GENERATORS[alg]
    if spec.n_generators != n:
        raise ScenarioError(f"{alg} needs {n} Hamiltonian components, got {spec.n_generators}")
    imposed = set(spec.imposed)
    if alg == "su2":
        want_forbidden = {2}
        options = {1: ("x", 3), 3: ("z", 1)}
        z_h = (2,)
    else:
        want_forbidden = {2, 3}
        options = {4: ("z", 1), 1: ("x", 3)}
        z_h = (2, 3)
    if spec.forbidden != want_forbidden or len(imposed) != 1 or not imposed <= set(options):
        raise PipelineNotAvailableError(
            f"{alg} pipeline needs forbidden={sorted(want_forbidden)} and exactly one imposed "
            f"component among {sorted(options)}; got forbidden={sorted(spec.forbidden)}, "
            f"imposed={sorted(imposed)}"
        )
    label = imposed.pop()
    case, ansatz = options[label]
    if spec.ansatz_component is not None and spec.ansatz_component != ansatz:
        raise PipelineNotAvailableError(
            f"with h_{label} imposed the interpolated invariant component must be f_{ansatz}, "
            f"got f_{spec.ansatz_component}"
        )
    for h, where in ((spec.h_initial, "h_initial"), (spec.h_final, "h_final")):
        bad = [k for k in want_forbidden if abs(h[k - 1]) > 0]
        if bad:
            raise PipelineNotAvailableError(f"{where} has support on forbidden component(s) {bad}")
    return _Plan(alg, case, 0, z_h, label, ansatz)


def check_pipeline(spec: ScenarioSpec) -> str:
    """Raise PipelineNotAvailableError unless a closed-form pipeline covers ``spec``."""
    plan = _plan(spec)
    return f"{plan.algebra}:h{plan.imposed_label}-imposed:f{plan.ansatz_label}-interpolated"


def _constants(spec, plan):
    hx0, hz0 = _effective(spec.h_initial, plan)
    c1 = hx0**2 + hz0**2 if spec.c1 == "auto" else float(spec.c1)
    if c1 <= 0:
        raise ScenarioError("c1 = |h_initial|^2 vanishes; give c1 explicitly")
    c2 = float(spec.c2) if plan.algebra == "u3s3" else 0.0
    return c1, c2


@dataclass(frozen=True)
class BoundaryData:
    """Frictionless boundary data of the invariant.

    ``f_initial``/``f_final`` are full coefficient vectors; the interpolated
    component (0-based ``ansatz_index``) has the listed values and zero first and
    second derivatives at both ends.
    """

    f_initial: np.ndarray
    f_final: np.ndarray
    ansatz_index: int
    values: tuple
    first: tuple = (0.0, 0.0)
    second: tuple = (0.0, 0.0)
    c1: float = 1.0
    c2: float = 0.0


def _effective_boundary(h, plan, c1):
    hx, hz = _effective(h, plan)
    norm = math.hypot(hx, hz)
    if norm == 0:
        raise ScenarioError("boundary Hamiltonian vanishes; the invariant direction is undefined")
    r = math.sqrt(c1) / norm
    return hx * r, hz * r


def _full_f(plan, fx, fy, fz, c2):
    fx, fy, fz = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (fx, fy, fz)))
    if plan.algebra == "su2":
        return np.stack([fx, fy, fz], axis=-1)
    return np.stack([fx, fy, fz - c2, np.full_like(fx, c2)], axis=-1)


def boundary_invariant_values(spec: ScenarioSpec) -> BoundaryData:
    plan = _plan(spec)
    c1, c2 = _constants(spec, plan)
    f0 = _effective_boundary(spec.h_initial, plan, c1)
    ff = _effective_boundary(spec.h_final, plan, c1)
    k = 0 if plan.case == "z" else 1  # position of the interpolated one within (x, z)
    ansatz_index = plan.ansatz_label - 1
    values = (f0[k], ff[k])
    if plan.algebra == "u3s3" and plan.case == "x":
        values = (values[0] - c2, values[1] - c2)  # f3 = effective z - c2
    return BoundaryData(
        f_initial=_full_f(plan, f0[0], 0.0, f0[1], c2),
        f_final=_full_f(plan, ff[0], 0.0, ff[1], c2),
        ansatz_index=ansatz_index,
        values=values,
        c1=c1,
        c2=c2,
    )


# -- solution ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ShortcutSolution:
    times: np.ndarray
    f_traj: np.ndarray       # (M, N)
    h_traj: np.ndarray       # (M, N)
    f_dot_traj: np.ndarray   # (M, N), analytic rate of the invariant coefficients
    feasible: bool
    first_violation_time: float | None
    constants: tuple         # (c1, c2)
    algebra: str
    ansatz: PolynomialAnsatz
    diagnostics: dict = field(default_factory=dict)

    @property
    def t_f(self) -> float:
        return float(self.times[-1])

    def gamma(self) -> np.ndarray:
        """f1^2 + f2^2 + (effective third component)^2 along the grid."""
        f = self.f_traj
        z = f[:, 2] + f[:, 3] if f.shape[1] == 4 else f[:, 2]
        return f[:, 0] ** 2 + f[:, 1] ** 2 + z**2


def _evaluate(plan, spec, ansatz, sign, c1, t):
    """Closed-form pipeline at interior times t (no boundary substitution)."""
    profile = spec.imposed[plan.imposed_label]
    g, gd, gdd = ansatz(t), ansatz(t, 1), ansatz(t, 2)
    if plan.algebra == "u3s3" and plan.case == "x":
        g = g + spec.c2  # back to the effective z component
    hi = profile.value(t, spec.t_f)
    hid = profile.derivative(t, spec.t_f)
    with np.errstate(divide="ignore", invalid="ignore"):
        if plan.case == "x":
            fy = gd / hi
            fy_dot = (gdd - (hid / hi) * gd) / hi
            rad = c1 - g**2 - fy**2
            fx = sign * np.sqrt(np.clip(rad, 0.0, None))
            fz = g
            hx = hi
            hz = (fy_dot + fz * hx) / fx
            fz_dot = gd
            fx_dot = -fy * hz
        else:
            fy = -gd / hi
            fy_dot = -(gdd - (hid / hi) * gd) / hi
            rad = c1 - g**2 - fy**2
            fz = sign * np.sqrt(np.clip(rad, 0.0, None))
            fx = g
            hz = hi
            hx = (fx * hz - fy_dot) / fz
            fx_dot = gd
            fz_dot = fy * hx
    return dict(fx=fx, fy=fy, fz=fz, hx=hx, hz=hz,
                fx_dot=fx_dot, fy_dot=fy_dot, fz_dot=fz_dot, rad=rad)


def _sqrt_branch(plan, f0, ff):
    k = 0 if plan.case == "x" else 1  # the square-root component within (x, z)
    ends = [v for v in (f0[k], ff[k]) if abs(v) > 1e-14]
    signs = {1.0 if v > 0 else -1.0 for v in ends}
    if len(signs) > 1:
        raise PipelineNotAvailableError(
            "boundary data force a sign change of the square-root component; "
            "no continuous real branch exists"
        )
    return signs.pop() if signs else 1.0


def _check_profile(spec, plan):
    prof = spec.imposed[plan.imposed_label]
    i = plan.imposed_label - 1
    for t, h, where in ((0.0, spec.h_initial, "h_initial"), (spec.t_f, spec.h_final, "h_final")):
        v = float(prof.value(np.array([t]), spec.t_f)[0])
        if not math.isclose(v, h[i], rel_tol=1e-9, abs_tol=1e-12):
            raise ScenarioError(
                f"imposed h_{plan.imposed_label} profile gives {v:g} at t={t:g} but {where} has {h[i]:g}"
            )


def design(spec: ScenarioSpec, strict: bool = True) -> ShortcutSolution:
    """Run the closed-form pipeline for ``spec``.

    With ``strict`` an InfeasibleDesignError is raised when the square root has a
    negative argument on an interior grid point; otherwise a solution flagged
    ``feasible=False`` (NaN where undefined) is returned.
    """
    plan = _plan(spec)
    _check_profile(spec, plan)
    bd = boundary_invariant_values(spec)
    c1, c2 = bd.c1, bd.c2
    ansatz = fit_polynomial(bd.values, bd.first, bd.second, spec.t_f, spec.ansatz_degree)
    f0 = _effective_boundary(spec.h_initial, plan, c1)
    ff = _effective_boundary(spec.h_final, plan, c1)
    sign = _sqrt_branch(plan, f0, ff)

    times = np.linspace(0.0, spec.t_f, spec.grid_points)
    ev = _evaluate(plan, spec, ansatz, sign, c1, times[1:-1])

    derived = ev["hz"] if plan.case == "x" else ev["hx"]
    bad = (ev["rad"] < -RADICAND_ATOL * c1) | ~np.isfinite(ev["rad"]) | ~np.isfinite(derived)
    first_violation = float(times[1:-1][bad][0]) if bad.any() else None
    if first_violation is not None and strict:
        finite = ev["rad"][np.isfinite(ev["rad"])]
        worst = float(finite.min()) if finite.size else float("nan")
        raise InfeasibleDesignError(spec.t_f, first_violation, worst)

    m = spec.grid_points
    fx, fy, fz = (np.empty(m) for _ in range(3))
    hx, hz = np.empty(m), np.empty(m)
    fx_dot, fy_dot, fz_dot = (np.zeros(m) for _ in range(3))
    interior = slice(1, m - 1)
    for arr, key in ((fx, "fx"), (fy, "fy"), (fz, "fz"), (hx, "hx"), (hz, "hz"),
                     (fx_dot, "fx_dot"), (fy_dot, "fy_dot"), (fz_dot, "fz_dot")):
        vals = np.array(ev[key], dtype=float)
        if not strict:
            vals[bad] = np.nan
        arr[interior] = vals
    # endpoints: exact frictionless data, where A(t_b) h(t_b) = 0 makes f_dot vanish
    hx0, hz0 = _effective(spec.h_initial, plan)
    hxf, hzf = _effective(spec.h_final, plan)
    fx[0], fy[0], fz[0], hx[0], hz[0] = f0[0], 0.0, f0[1], hx0, hz0
    fx[-1], fy[-1], fz[-1], hx[-1], hz[-1] = ff[0], 0.0, ff[1], hxf, hzf

    n = spec.n_generators
    f_traj = _full_f(plan, fx, fy, fz, c2)
    f_dot = np.zeros((m, n))
    f_dot[:, 0], f_dot[:, 1], f_dot[:, 2] = fx_dot, fy_dot, fz_dot
    h_traj = np.zeros((m, n))
    h_traj[:, 0] = hx
    h_traj[:, plan.z_h[-1]] = hz
    h_traj[0] = spec.h_initial
    h_traj[-1] = spec.h_final
    # imposed component follows its profile exactly
    i = plan.imposed_label - 1
    h_traj[1:-1, i] = spec.imposed[plan.imposed_label].value(times[1:-1], spec.t_f)

    diagnostics = _endpoint_offsets(plan, spec, ansatz, sign, c1, h_traj)
    diagnostics["pipeline"] = check_pipeline(spec)
    diagnostics["min_interior_radicand"] = float(np.nanmin(ev["rad"])) if m > 2 else None

    return ShortcutSolution(
        times=times,
        f_traj=f_traj,
        h_traj=h_traj,
        f_dot_traj=f_dot,
        feasible=first_violation is None,
        first_violation_time=first_violation,
        constants=(c1, c2),
        algebra=plan.algebra,
        ansatz=ansatz,
        diagnostics=diagnostics,
    )


def _endpoint_offsets(plan, spec, ansatz, sign, c1, h_traj):
    """Derived component at t = eps and t_f - eps next to its boundary value."""
    eps = ENDPOINT_OFFSET * spec.t_f
    ev = _evaluate(plan, spec, ansatz, sign, c1, np.array([eps, spec.t_f - eps]))
    key = "hz" if plan.case == "x" else "hx"
    col = plan.z_h[-1] if plan.case == "x" else plan.x
    out = {}
    for j, (label, end) in enumerate((("start", h_traj[0, col]), ("end", h_traj[-1, col]))):
        val = float(ev[key][j]) if ev["rad"][j] >= 0 else float("nan")
        jump = abs(val - end) / max(abs(end), 1.0) if math.isfinite(val) else float("nan")
        out[f"offset_{label}"] = {"value": val, "boundary": float(end), "relative_jump": jump,
                                  "radicand": float(ev["rad"][j])}
    return out


def design_su2(spec: ScenarioSpec, strict: bool = True) -> ShortcutSolution:
    if str(spec.algebra).lower() != "su2":
        raise PipelineNotAvailableError("design_su2 needs the su2 algebra")
    return design(spec, strict)


def design_u3s3(spec: ScenarioSpec, strict: bool = True) -> ShortcutSolution:
    if str(spec.algebra).lower() != "u3s3":
        raise PipelineNotAvailableError("design_u3s3 needs the u3s3 algebra")
    return design(spec, strict)


def is_feasible(spec: ScenarioSpec) -> bool:
    try:
        design(spec)
    except InfeasibleDesignError:
        return False
    return True


def min_time_scan(spec: ScenarioSpec, t_low: float, t_high: float,
                  resolution: float = MIN_TIME_RESOLUTION) -> float:
    """Smallest feasible final time in [t_low, t_high], bracketed to ``resolution``.

    Feasibility is re-evaluated with the ansatz refitted at every trial t_f and
    the same number of grid points, so the answer depends on grid_points.
    """
    if not 0 < t_low < t_high:
        raise ValueError("need 0 < t_low < t_high")
    if not is_feasible(spec.with_final_time(t_high)):
        raise NoFeasibleTimeError(f"t_f = {t_high:g} is infeasible; no feasible time in [{t_low:g}, {t_high:g}]")
    if is_feasible(spec.with_final_time(t_low)):
        return float(t_low)
    lo, hi = float(t_low), float(t_high)
    while hi - lo > resolution:
        mid = 0.5 * (lo + hi)
        if is_feasible(spec.with_final_time(mid)):
            hi = mid
        else:
            lo = mid
    return hi
