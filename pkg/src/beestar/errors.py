"""Exception hierarchy shared across the framework."""


class BeestarError(Exception):
    """Base class for every error raised by this package."""


# -- graph construction -------------------------------------------------------

class DuplicateName(BeestarError):
    pass


class UnknownKind(BeestarError):
    pass


class SchemaViolation(BeestarError):
    pass


class UnknownEntity(BeestarError):
    pass


class UnknownProperty(BeestarError):
    pass


class UnknownEdge(BeestarError):
    pass


class BadLabelGrammar(BeestarError):
    pass


class DanglingProperty(BeestarError):
    pass


class DuplicateEdge(BeestarError):
    pass


class ValidationError(BeestarError):
    """A document or structural operation failed validation.

    ``locus`` names the offending entity/edge when known.
    """

    def __init__(self, message: str, locus: str = ""):
        super().__init__(message if not locus else f"{message} (at {locus})")
        self.locus = locus


# -- propagation ---------------------------------------------------------------

class PropertyTypeError(BeestarError):
    """A value's tag does not match the property's declared type."""

    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report


class CycleError(BeestarError):
    """An (entity, property) pair was staged twice inside one wave."""

    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report


class ChainDepthExceeded(BeestarError):
    """An agent-trigger chain ran past the configured depth limit."""

    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report


class UnknownScope(BeestarError):
    pass


# -- agents and deployment -----------------------------------------------------

class UnknownAgent(BeestarError):
    pass


class MissingSourceCode(BeestarError):
    pass


class ExecutorFailure(BeestarError):
    pass


class RegistrationFailure(BeestarError):
    pass


class SpawnFailure(BeestarError):
    pass


class RegistrationTimeout(BeestarError):
    pass


class AgentUnreachable(BeestarError):
    pass
