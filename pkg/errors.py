from typing import Optional


class CoverEngineError(Exception):
    """Base error; carries the process exit code used by the command line."""

    exit_code = 1
    kind = "error"

    def __init__(self, detail: str, *, exit_code: Optional[int] = None):
        super().__init__(detail)
        self.detail = detail
        if exit_code is not None:
            self.exit_code = exit_code


# Exit 2
class SpecParseError(CoverEngineError):
    exit_code = 2
    kind = "parse"


# Exit 3
class ValidationError(CoverEngineError):
    exit_code = 3
    kind = "validation"


class UnknownAttribute(ValidationError):
    pass


class SchemaNotCovered(ValidationError):
    pass


class UncoverableNode(ValidationError):
    pass


class InvalidDecomposition(ValidationError):
    pass


class MalformedOrder(ValidationError):
    pass


class BadMapping(ValidationError):
    pass


class MalformedSignature(ValidationError):
    pass


class SchemaMismatch(ValidationError):
    pass


class EmptyIntersection(ValidationError):
    pass


class TooLarge(ValidationError):
    pass


# Exit 4
class UnsoundPlan(CoverEngineError):
    exit_code = 4
    kind = "unsound plan"


# Exit 5
class VerificationError(CoverEngineError):
    exit_code = 5
    kind = "verification"


class InconsistentInputs(VerificationError):
    kind = "inconsistency"


class NotACover(VerificationError):
    pass
