"""Exception hierarchy shared by all modules."""


class VectorHostError(Exception):
    """Base class for every error raised by the package."""


class ValidationError(VectorHostError, ValueError):
    """Invalid parameters, configuration or numerics."""


class DomainError(VectorHostError, ValueError):
    """A coefficient was evaluated outside the spatial domain."""


class AssemblyError(VectorHostError):
    """A discrete operator could not be assembled."""


class SingularSystemError(VectorHostError, ArithmeticError):
    """Zero pivot encountered during tridiagonal elimination."""


class UnsupportedConfigurationError(VectorHostError):
    """The requested model variant does not support this configuration."""


class SimulationError(VectorHostError):
    """Failure while time stepping."""


class PositivityError(SimulationError):
    """A density dropped below the negativity tolerance."""

    def __init__(self, component, node, time, value):
        self.component = component
        self.node = node
        self.time = time
        self.value = value
        super().__init__(
            f"component {component!r} became negative ({value:.3e}) "
            f"at node {node}, t={time:.6g}"
        )


class BoundednessError(SimulationError):
    """A density exceeded the a-priori logistic bound."""


class NonConvergenceError(VectorHostError):
    """An iteration hit its cap before meeting its tolerance."""

    def __init__(self, message, residual=float("nan"), iterations=0, kind="iteration"):
        self.residual = residual
        self.iterations = iterations
        self.kind = kind
        super().__init__(f"{message} (residual={residual:.3e}, iterations={iterations})")


class RootNotBracketedError(VectorHostError):
    """Bracket expansion failed to locate a sign change."""


class AnalyticDomainError(VectorHostError, ZeroDivisionError):
    """A closed form is undefined for the given parameters."""
