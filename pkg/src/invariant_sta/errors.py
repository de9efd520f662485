"""Exception types raised across the package."""


class StaError(Exception):
    """Base class for all package errors."""


class DimensionMismatchError(StaError, ValueError):
    pass


# algebra
class AlgebraError(StaError):
    pass


class UnsupportedAlgebraError(AlgebraError):
    pass


class NonHermitianGeneratorError(AlgebraError):
    def __init__(self, index, deviation):
        self.index = index
        super().__init__(
            f"generator T_{index + 1} is not Hermitian (max |T - T^dag| = {deviation:.3e})"
        )


class NotClosedError(AlgebraError):
    def __init__(self, pair, residual):
        self.pair = pair
        self.residual = residual
        b, c = pair
        super().__init__(
            f"[T_{b + 1}, T_{c + 1}] leaves the generator span (residual {residual:.3e})"
        )


# linear solving
class InconsistentSystemError(StaError):
    def __init__(self, residual, message=None):
        self.residual = residual
        super().__init__(
            message or f"f_dot is not in the range of A (null-space residual {residual:.3e})"
        )


class InfeasibleConstraintsError(StaError):
    def __init__(self, residual, message=None):
        self.residual = residual
        super().__init__(
            message or f"fixed components cannot be met by null-space content (residual {residual:.3e})"
        )


# design
class PipelineNotAvailableError(StaError):
    pass


class InfeasibleDesignError(StaError):
    """The invariant ansatz has no real completion somewhere on the grid."""

    def __init__(self, t_f, first_violation_time, worst_radicand):
        self.t_f = t_f
        self.first_violation_time = first_violation_time
        self.worst_radicand = worst_radicand
        super().__init__(
            f"design infeasible for t_f={t_f:g}: real-root condition violated first at "
            f"t={first_violation_time:g} (most negative radicand {worst_radicand:.3e})"
        )


class NoFeasibleTimeError(StaError):
    pass


# verification
class AmbiguousBranchError(StaError):
    def __init__(self, indices):
        self.indices = tuple(indices)
        super().__init__(f"degenerate final spectrum, branches {list(self.indices)} are ambiguous")


class DegenerateInvariantError(StaError):
    def __init__(self, time, gap):
        self.time = time
        self.gap = gap
        super().__init__(f"invariant spectrum degenerate at t={time:g} (gap {gap:.3e})")


# scenario files
class ScenarioError(StaError, ValueError):
    pass


class ConstraintConflictError(ScenarioError):
    pass
