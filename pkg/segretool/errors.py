"""Exceptions raised by segretool."""


class SegreToolError(Exception):
    """Base class of every error raised by this package."""


class ConfigurationError(SegreToolError):
    """Bad user input: unknown names, malformed files or flags."""


class ExprError(SegreToolError):
    """Base class for expression parsing and evaluation failures."""


class ExprSyntaxError(ExprError):
    """The DSL source does not follow the grammar.

    :param offset: Byte offset into the UTF-8 encoded source.
    :param expected: Tokens that would have been accepted at the offset.
    """

    def __init__(self, message: str, offset: int, expected: frozenset[str] = frozenset()):
        self.offset = offset
        self.expected = frozenset(expected)
        detail = f" (expected one of: {', '.join(sorted(self.expected))})" if self.expected else ""
        super().__init__(f"{message} at offset {offset}{detail}")


class UnknownIdentifierError(ExprError):
    def __init__(self, name: str, offset: int):
        self.name = name
        self.offset = offset
        super().__init__(f"Unknown identifier '{name}' at offset {offset}")


class UnboundVariableError(ExprError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"Variable '{name}' has no value in the evaluation point")


class SingularEvaluationError(ExprError):
    """Evaluation hit a pole, a branch point or overflowed."""


class DomainError(SegreToolError):
    """A point lies outside the domain an operation is defined on."""


class SegreSolveError(SegreToolError):
    """Newton or path following did not converge on a Segre variety graph."""

    def __init__(self, message: str, z: tuple[complex, ...] | None = None):
        self.z = z
        super().__init__(message if z is None else f"{message} at z={z}")


class DegenerateError(SegreToolError):
    """A geometric object degenerates (collapses onto X or loses rank)."""


class OnExceptionalLocusError(DegenerateError):
    """The point lies on (or numerically too close to) X = {w = 0}."""


class LeviDegenerateError(DegenerateError):
    def __init__(self, eigenvalues):
        self.eigenvalues = eigenvalues
        super().__init__(f"Degenerate Levi form, eigenvalues {eigenvalues}")


class DegenerateConfigurationError(DegenerateError):
    """Fitting input spans too small a subspace to determine the answer."""


class FitError(SegreToolError):
    """A least-squares fit left a residual above tolerance."""

    def __init__(self, message: str, residual: float):
        self.residual = residual
        super().__init__(f"{message} (residual {residual:.3e})")


class EmptyIntersectionError(SegreToolError):
    """A Segre variety does not meet the polydisc of a germ."""


class ContinuationError(SegreToolError):
    """Analytic continuation failed at a given step."""

    def __init__(self, message: str, index: int):
        self.index = index
        super().__init__(f"{message} (step {index})")


class ChainNotFoundError(SegreToolError):
    def __init__(self, deepest: int, cloud_size: int):
        self.deepest = deepest
        self.cloud_size = cloud_size
        super().__init__(
            f"No Segre chain found; deepest depth reached {deepest} with {cloud_size} candidate waypoints"
        )


class ValidationError(SegreToolError):
    """A structural check on a surface, germ or k-root failed."""
