"""Scenario files, end-to-end runs and their reports.

Scenario JSON fields (generator labels are 1-based):

    algebra          "su2" | "u3s3" | {"rep_file": path}
    t_f              final time
    h_initial, h_final
    forbidden        components held at zero, e.g. [2]
    imposed          {"1": {"type": "linear", "from": 0, "to": 0.4}}
                     or {"type": "poly", "coeffs": [...]} (ascending powers of t)
    ansatz_component interpolated invariant component
    ansatz_degree    default 5
    grid_points      default 2001
    c1               "auto" (= |h_initial|^2) or a positive number
    c2               default 0
    name             optional, defaults to the file stem
"""
from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .algebra import builtin_algebra, lie_invariant_directions, resolve_algebra
from .designer import (
    N_GENERATORS,
    LinearRamp,
    PolyProfile,
    ScenarioSpec,
    check_pipeline,
    design,
    min_time_scan,
)
from .errors import InfeasibleDesignError, NoFeasibleTimeError, ScenarioError
from .verifier import verify

EXIT_OK, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_VERIFY = 0, 1, 2, 3

_FIELDS = {
    "algebra", "t_f", "h_initial", "h_final", "forbidden", "imposed", "ansatz_component",
    "ansatz_degree", "grid_points", "c1", "c2", "name",
}
_REQUIRED = {"algebra", "t_f", "h_initial", "h_final"}


def _number(x, what):
    if isinstance(x, bool) or not isinstance(x, (int, float)) or not math.isfinite(x):
        raise ScenarioError(f"{what} must be a finite number, got {x!r}")
    return float(x)


def _int(x, what):
    if isinstance(x, bool) or not isinstance(x, int):
        raise ScenarioError(f"{what} must be an integer, got {x!r}")
    return x


def _vector(x, what):
    if not isinstance(x, list) or not x:
        raise ScenarioError(f"{what} must be a non-empty array of numbers")
    return tuple(_number(v, f"{what} entry") for v in x)


def _profile(obj, label):
    if not isinstance(obj, dict) or "type" not in obj:
        raise ScenarioError(f"imposed[{label}] must be an object with a 'type'")
    kind = obj["type"]
    if kind == "linear":
        if set(obj) != {"type", "from", "to"}:
            raise ScenarioError(f"imposed[{label}] linear profile needs exactly 'from' and 'to'")
        return LinearRamp(_number(obj["from"], "from"), _number(obj["to"], "to"))
    if kind == "poly":
        if set(obj) != {"type", "coeffs"}:
            raise ScenarioError(f"imposed[{label}] poly profile needs exactly 'coeffs'")
        return PolyProfile(_vector(obj["coeffs"], "coeffs"))
    raise ScenarioError(f"imposed[{label}] has unknown type {kind!r}")


def _label(key, n, what):
    try:
        k = int(key)
    except (TypeError, ValueError):
        raise ScenarioError(f"{what} index {key!r} is not an integer") from None
    if isinstance(key, bool) or not 1 <= k <= n:
        raise ScenarioError(f"{what} index {key!r} outside 1..{n}")
    return k


def spec_from_dict(data: dict, base_dir=".", default_name="scenario") -> ScenarioSpec:
    if not isinstance(data, dict):
        raise ScenarioError("scenario must be a JSON object")
    unknown = set(data) - _FIELDS
    if unknown:
        raise ScenarioError(f"unknown field(s): {', '.join(sorted(unknown))}")
    missing = _REQUIRED - set(data)
    if missing:
        raise ScenarioError(f"missing field(s): {', '.join(sorted(missing))}")

    alg = data["algebra"]
    if isinstance(alg, dict):
        if set(alg) != {"rep_file"} or not isinstance(alg["rep_file"], str):
            raise ScenarioError("algebra object must be {\"rep_file\": path}")
        p = Path(alg["rep_file"])
        algebra = str(p if p.is_absolute() else Path(base_dir) / p)
        _, sc, _ = resolve_algebra(algebra)
        n = sc.n_generators
    elif isinstance(alg, str):
        algebra = alg.lower()
        if algebra not in N_GENERATORS:
            raise ScenarioError(f"unknown algebra {alg!r}")
        n = N_GENERATORS[algebra]
    else:
        raise ScenarioError("algebra must be a name or {\"rep_file\": path}")

    h0 = _vector(data["h_initial"], "h_initial")
    h1 = _vector(data["h_final"], "h_final")
    if len(h0) != n or len(h1) != n:
        raise ScenarioError(f"h_initial and h_final must have {n} components")

    forbidden = data.get("forbidden", [])
    if not isinstance(forbidden, list):
        raise ScenarioError("forbidden must be an array")
    forbidden = frozenset(_label(_int(k, "forbidden entry"), n, "forbidden") for k in forbidden)
    imposed_raw = data.get("imposed", {})
    if not isinstance(imposed_raw, dict):
        raise ScenarioError("imposed must be an object")
    imposed = {_label(k, n, "imposed"): _profile(v, k) for k, v in imposed_raw.items()}

    ansatz = data.get("ansatz_component")
    if ansatz is not None:
        ansatz = _label(_int(ansatz, "ansatz_component"), n, "ansatz_component")
    c1 = data.get("c1", "auto")
    if c1 != "auto":
        c1 = _number(c1, "c1")
    name = data.get("name", default_name)
    if not isinstance(name, str) or not name:
        raise ScenarioError("name must be a non-empty string")

    spec = ScenarioSpec(
        algebra=algebra,
        t_f=_number(data["t_f"], "t_f"),
        h_initial=h0,
        h_final=h1,
        forbidden=forbidden,
        imposed=imposed,
        ansatz_component=ansatz,
        ansatz_degree=_int(data.get("ansatz_degree", 5), "ansatz_degree"),
        grid_points=_int(data.get("grid_points", 2001), "grid_points"),
        c1=c1,
        c2=_number(data.get("c2", 0.0), "c2"),
        name=name,
    )
    check_pipeline(spec)
    return spec


def parse_scenario(path) -> ScenarioSpec:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: not valid JSON ({exc})") from None
    return spec_from_dict(data, base_dir=path.parent, default_name=path.stem)


def spec_to_dict(spec: ScenarioSpec) -> dict:
    alg = spec.algebra if spec.algebra in N_GENERATORS else {"rep_file": spec.algebra}
    out = {
        "name": spec.name,
        "algebra": alg,
        "t_f": spec.t_f,
        "h_initial": list(spec.h_initial),
        "h_final": list(spec.h_final),
        "forbidden": sorted(spec.forbidden),
        "imposed": {str(k): p.to_json() for k, p in sorted(spec.imposed.items())},
        "ansatz_degree": spec.ansatz_degree,
        "grid_points": spec.grid_points,
        "c1": spec.c1,
        "c2": spec.c2,
    }
    if spec.ansatz_component is not None:
        out["ansatz_component"] = spec.ansatz_component
    return out


# -- reports -----------------------------------------------------------------------

@dataclass
class RunReport:
    name: str
    feasible: bool
    c1: float | None = None
    c2: float | None = None
    t_f: float | None = None
    grid_points: int | None = None
    first_violation_time: float | None = None
    verified: bool | None = None
    boundary_commutators: list | None = None
    invariant_residual: float | None = None
    eigenvalue_drift: float | None = None
    gamma_drift: float | None = None
    fidelities: list | None = None
    lr_residuals: list | None = None
    population_drift: float | None = None
    min_time: float | None = None
    failures: list = field(default_factory=list)
    notes: list = field(default_factory=list)
    wall_time: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)


def exit_code(report: RunReport) -> int:
    if not report.feasible:
        return EXIT_INFEASIBLE
    if report.verified is False:
        return EXIT_VERIFY
    return EXIT_OK


def _json_safe(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None
    if isinstance(x, dict):
        return {k: _json_safe(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_json_safe(v) for v in x]
    if isinstance(x, np.generic):
        return _json_safe(x.item())
    return x


def write_report(report: RunReport, path):
    Path(path).write_text(json.dumps(_json_safe(report.to_dict()), indent=2) + "\n")


def _write_csv(path, header, rows):
    # str(float) is the shortest repr that round-trips exactly
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([float(x) for x in row])


def write_trajectory_csv(solution, path):
    n = solution.h_traj.shape[1]
    header = ["t"] + [f"h_{a + 1}" for a in range(n)] + [f"f_{a + 1}" for a in range(n)]
    rows = np.column_stack([solution.times, solution.h_traj, solution.f_traj])
    _write_csv(path, header, rows)


def read_trajectory_csv(path):
    """(times, h_traj, f_traj) from a trajectory table."""
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        data = np.array([[float(x) for x in row] for row in r])
    n = (len(header) - 1) // 2
    return data[:, 0], data[:, 1:1 + n], data[:, 1 + n:]


def write_verify_csv(solution, result, path):
    d = result.spectrum.eigenvalues.shape[1]
    header = (["t"] + [f"lambda_{k + 1}" for k in range(d)]
              + [f"pop_{k + 1}" for k in range(d)] + ["invariant_residual_local"])
    rows = np.column_stack([solution.times, result.spectrum.eigenvalues,
                            result.populations, result.residual_profile])
    _write_csv(path, header, rows)


def _rep_for(spec):
    if spec.algebra in N_GENERATORS:
        return builtin_algebra(spec.algebra)[1]
    return resolve_algebra(spec.algebra)[2]


def run_design(spec: ScenarioSpec, output_dir) -> RunReport:
    """Design, verify, and write trajectory.csv, verify.csv and report.json to ``output_dir``."""
    start = time.perf_counter()
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    report = RunReport(name=spec.name, feasible=False, t_f=spec.t_f, grid_points=spec.grid_points)
    try:
        sol = design(spec)
    except InfeasibleDesignError as exc:
        report.first_violation_time = exc.first_violation_time
        report.failures.append(str(exc))
        report.wall_time = time.perf_counter() - start
        write_report(report, out / "report.json")
        return report
    report.feasible = True
    report.c1, report.c2 = (float(c) for c in sol.constants)
    write_trajectory_csv(sol, out / "trajectory.csv")

    result = verify(_rep_for(spec), sol)
    write_verify_csv(sol, result, out / "verify.csv")
    report.verified = result.passed
    report.failures = result.failures()
    report.boundary_commutators = list(result.boundary_commutators)
    report.invariant_residual = result.invariant_residual
    report.eigenvalue_drift = result.eigenvalue_drift
    report.gamma_drift = result.gamma_drift
    report.fidelities = list(result.fidelities)
    report.lr_residuals = list(result.lr_residuals)
    report.population_drift = result.population_drift
    if any(f is None for f in result.fidelities):
        report.notes.append("degenerate final Hamiltonian: some eigenbranches have no unique target")
    report.wall_time = time.perf_counter() - start
    write_report(report, out / "report.json")
    return report


def run_min_time(spec: ScenarioSpec, bracket) -> RunReport:
    lo, hi = (float(x) for x in bracket)
    if not 0 < lo < hi:
        raise ScenarioError("bracket must satisfy 0 < LO < HI")
    start = time.perf_counter()
    report = RunReport(name=spec.name, feasible=False, grid_points=spec.grid_points)
    try:
        t_min = min_time_scan(spec, lo, hi)
    except NoFeasibleTimeError as exc:
        report.failures.append(str(exc))
    else:
        report.feasible = True
        report.min_time = t_min
        report.t_f = t_min
        if t_min == lo:
            report.notes.append("whole bracket feasible; the minimum time lies at or below LO")
    report.wall_time = time.perf_counter() - start
    return report


def run_algebra_check(name_or_path) -> str:
    name, sc, rep = resolve_algebra(name_or_path)
    lines = [
        f"algebra: {name}",
        f"generators N = {sc.n_generators}, representation dimension d = {rep.dim}",
        "structure constants ([T_b, T_c] = i sum_a c_abc T_a, 1-based):",
    ]
    for a, b, c, v in sc.nonzero_entries():
        lines.append(f"  [T_{b + 1}, T_{c + 1}] -> {v:+.12g} i T_{a + 1}")
    lines.append(f"antisymmetry residual: {sc.antisymmetry_residual():.3e}")
    lines.append(f"Jacobi residual: {sc.jacobi_residual():.3e}")
    center = lie_invariant_directions(sc)
    if not center:
        lines.append("center: trivial")
    else:
        lines.append(f"center: dimension {len(center)}")
        for v in center:
            terms = [f"{x:+.6g} T_{k + 1}" for k, x in enumerate(v) if abs(x) > 1e-12]
            lines.append("  " + " ".join(terms))
    return "\n".join(lines)
