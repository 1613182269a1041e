"""Exception hierarchy shared by all modules."""


class GeometryError(ValueError):
    """Base class for failures of a geometric construction."""


class DegeneratePlaneError(GeometryError):
    """A basis that should span a space-like plane does not."""


class FrameDegeneracyError(GeometryError):
    """Normal completion produced a (near) null vector."""


class NotSpacelikeError(GeometryError):
    """Induced metric is not positive definite at a point."""

    def __init__(self, message, eigenvalue=None, point=None):
        super().__init__(message)
        self.eigenvalue = eigenvalue
        self.point = point


class NumericalDegeneracyError(GeometryError):
    """Angle data is numerically inconsistent (e.g. W^T W has eigenvalue < 1)."""


class ChartError(GeometryError):
    """A query or stencil left the region where a chart is valid."""


class IntegrationError(RuntimeError):
    """ODE integration failed; ``last_s`` is the last successfully reached arclength."""

    def __init__(self, message, last_s=None):
        super().__init__(message)
        self.last_s = last_s


class NotAShrinkerError(GeometryError):
    """A shrinker-conditional check was run on data that is not a self-shrinker."""

    def __init__(self, message, worst_residual=None):
        super().__init__(message)
        self.worst_residual = worst_residual


class FlowHalt(RuntimeError):
    """The rescaled flow stopped because the state left the admissible set."""

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state
