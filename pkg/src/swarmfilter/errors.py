"""Exception types shared across the package."""


class SwarmFilterError(Exception):
    """Base class for all errors raised by this package."""


class DimensionMismatch(SwarmFilterError):
    """An array argument has a shape incompatible with the problem."""


class DegreeTooLow(SwarmFilterError):
    """Polynomial degree too small to meet the boundary conditions."""


class TooFewSamples(SwarmFilterError):
    """A time grid needs at least two samples."""


class RankDeficient(SwarmFilterError):
    """The endpoint-condition rows are linearly dependent."""


class SingularKKT(SwarmFilterError):
    """The stationarity system could not be solved to tolerance."""


class SchemaMismatch(SwarmFilterError):
    """A JSON document does not match the expected layout."""


class ProblemValidationError(SwarmFilterError):
    """Aggregate of every invariant violated by a problem instance.

    ``violations`` holds one exception instance per violated invariant so
    callers can report all of them at once instead of fixing one field per
    attempt.
    """

    def __init__(self, violations):
        self.violations = list(violations)
        lines = [str(v) for v in self.violations]
        super().__init__(
            "invalid problem (%d violation%s):\n  %s"
            % (len(lines), "" if len(lines) == 1 else "s", "\n  ".join(lines))
        )


class NonPositiveGeometry(SwarmFilterError):
    """A semiaxis, duration, count, or sample number is not positive."""


class StartOutsideWorkspace(SwarmFilterError):
    """A robot's start position is not strictly inside the workspace."""

    def __init__(self, robot, margin):
        self.robot = robot
        self.margin = margin
        super().__init__(
            f"robot {robot}: start outside workspace (margin {margin:+.3e})"
        )


class GoalOutsideWorkspace(SwarmFilterError):
    """A robot's goal position is not strictly inside the workspace."""

    def __init__(self, robot, margin):
        self.robot = robot
        self.margin = margin
        super().__init__(
            f"robot {robot}: goal outside workspace (margin {margin:+.3e})"
        )


class EndpointCollision(SwarmFilterError):
    """Two robots start or end closer than the safety spheroid allows."""

    def __init__(self, pair, where, margin):
        self.pair = tuple(pair)
        self.where = where  # "start" or "goal"
        self.margin = margin
        super().__init__(
            f"robots {pair[0]} and {pair[1]}: {where} positions violate "
            f"pairwise clearance (margin {margin:+.3e})"
        )
