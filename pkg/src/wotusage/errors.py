"""Exception hierarchy shared by every layer.

The CLI maps these onto exit codes, so each family has a single base class.
"""

from __future__ import annotations


class WotError(Exception):
    """Base class for all errors raised by this package."""


# -- graphs and documents ----------------------------------------------------


class GraphError(WotError):
    """A graph was built from an ill-formed triple."""


class PatternError(WotError):
    """A match pattern puts a literal in subject or predicate position."""


class UpdateError(WotError):
    """A DELETE/INSERT request is not well formed."""


class ParseError(WotError):
    def __init__(self, message: str, line: int = 0, column: int = 0):
        self.line = line
        self.column = column
        self.reason = message
        super().__init__(f"{message} (line {line}, column {column})")


class FetchError(WotError):
    def __init__(self, origin: str, cause: str):
        self.origin = origin
        self.cause = cause
        super().__init__(f"cannot fetch {origin}: {cause}")


class TdError(WotError):
    """A Thing Description is missing something it cannot do without."""


# -- bindings ---------------------------------------------------------------


class BindingError(WotError):
    """Anything that goes wrong between a form and a device."""


class NoBindingError(BindingError):
    def __init__(self, scheme: str):
        self.scheme = scheme
        super().__init__(f"no protocol binding registered for scheme {scheme!r}")


class TransportError(BindingError):
    def __init__(self, cause: int | str, detail: str = ""):
        self.cause = cause
        self.status = cause if isinstance(cause, int) else None
        msg = f"transport failure: {cause}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class UnsupportedMediaType(BindingError):
    pass


class MissingInput(BindingError):
    pass


class ResponseSchemaMismatch(BindingError):
    pass


# -- artifacts --------------------------------------------------------------


class ArtifactError(WotError):
    pass


class UnknownArtifact(ArtifactError):
    pass


class UnknownOperation(ArtifactError):
    def __init__(self, artifact: str, operation: str, available: list[str]):
        self.artifact = artifact
        self.operation = operation
        self.available = sorted(available)
        super().__init__(
            f"{artifact!r} has no operation {operation!r}; available: {', '.join(self.available) or '-'}"
        )


class UnknownProperty(ArtifactError):
    pass


class UnknownEvent(ArtifactError):
    pass


class SchemaMismatch(ArtifactError):
    pass


class NotReadable(ArtifactError):
    pass


class NameMismatch(ArtifactError):
    pass


class InstantiationError(ArtifactError):
    """Initial property reads failed. The instance is still usable."""

    def __init__(self, instance, causes: dict[str, Exception]):
        self.instance = instance
        self.causes = causes
        names = ", ".join(sorted(causes))
        super().__init__(f"initial read failed for {instance.name}: {names}")


# -- usage knowledge base ---------------------------------------------------


class ValidationError(WotError):
    def __init__(self, axiom: str, message: str, subject: str | None = None):
        self.axiom = axiom
        self.subject = subject
        where = f" [{subject}]" if subject else ""
        super().__init__(f"{axiom}: {message}{where}")


class TypeMismatch(WotError):
    pass


# -- planning ---------------------------------------------------------------


class PlanningError(WotError):
    pass


class NotApplicable(PlanningError):
    pass


class NoPlanFound(PlanningError):
    def __init__(self, explored: int, coverage: tuple[int, int], at_index: int | None = None):
        self.explored = explored
        self.coverage = coverage
        self.at_index = at_index
        covered, total = coverage
        where = f" for goal #{at_index}" if at_index is not None else ""
        super().__init__(
            f"no plan found{where}: explored {explored} states, best partial coverage {covered}/{total} goal triples"
        )


class LimitExceeded(PlanningError):
    def __init__(self, explored: int, limit: int):
        self.explored = explored
        self.limit = limit
        super().__init__(f"expansion limit {limit} reached after {explored} states")


# -- simulator --------------------------------------------------------------


class WorldSpecError(WotError):
    def __init__(self, message: str, path: str = "<world>", line: int = 0):
        self.path = path
        self.line = line
        super().__init__(f"{path}:{line}: {message}")


class UnknownDevice(WotError):
    pass


class BindError(WotError):
    pass


class ExecutionError(PlanningError):
    """A plan step failed on the device, or the goal did not hold afterwards."""

    def __init__(self, message: str, step: int | None = None, cause: Exception | None = None):
        self.step = step
        self.cause = cause
        super().__init__(message)


class ScriptError(WotError):
    """A scenario script is malformed."""
