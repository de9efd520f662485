"""Invariant-based inverse engineering of shortcuts to adiabaticity on small Lie algebras."""
from importlib.resources import files

from .algebra import (
    GeneratorRep,
    StructureConstants,
    builtin_algebra,
    lie_invariant_directions,
    resolve_algebra,
    verify_closure,
)
from .designer import (
    LinearRamp,
    PolynomialAnsatz,
    PolyProfile,
    ScenarioSpec,
    ShortcutSolution,
    boundary_invariant_values,
    design,
    design_su2,
    design_u3s3,
    fit_polynomial,
    min_time_scan,
)
from .errors import *  # noqa: F401,F403
from .scenario import RunReport, parse_scenario, run_algebra_check, run_design, run_min_time
from .solver import (
    build_a_matrix,
    consistency_residual,
    gauss_solve,
    solve_constrained,
    solve_hamiltonian,
    spectral_decompose,
)
from .verifier import (
    boundary_commutators,
    eigenbranch_fidelity,
    invariant_residual,
    invariant_spectrum,
    lr_phases_and_reconstruction,
    propagate,
    verify,
)


def bundled_scenario(name: str):
    """Path of a scenario shipped with the package, e.g. ``bundled_scenario("fig1")``."""
    return files(__name__) / "scenarios" / f"{name}.json"
