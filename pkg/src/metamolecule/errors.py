class GuardAbort(RuntimeError):
    """A run-time validity guard fired. ``guard`` names it for the CLI."""

    guard = "guard"

    def __init__(self, message: str, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics


class GridInstability(GuardAbort):
    guard = "finite_fields"


class BoundaryMassExceeded(GuardAbort):
    guard = "boundary_mass"


class WeightOverflow(GuardAbort):
    guard = "weight_bound"
