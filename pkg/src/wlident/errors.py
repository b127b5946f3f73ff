"""Error hierarchy and the exit codes it maps to."""

from enum import Enum


class ErrorKind(Enum):
    """Stable error codes."""

    SYNTAX = "syntax"
    VALIDATION = "validation"
    SIGNATURE_MISMATCH = "signature_mismatch"
    ARITY_EXCEEDS_K = "arity_exceeds_k"
    MEMORY_BUDGET = "memory_budget"
    ORACLE_SIZE = "oracle_size"
    NOT_A_RAINBOW = "not_a_rainbow"
    NOT_A_STAR = "not_a_star"
    NOT_AN_EQUIVALENCE = "not_an_equivalence"
    NOT_FUNCTIONAL = "not_functional"
    COHERENCE_VIOLATION = "coherence_violation"
    FIBER_TOO_LARGE = "fiber_too_large"
    UNKNOWN_FIBER_TYPE = "unknown_fiber_type"
    SEARCH_BUDGET = "search_budget"
    EXTENSION_INCONSISTENT = "extension_inconsistent"
    WITNESS_VERIFICATION = "witness_verification"
    CLASS_BOUND = "class_bound"
    PRECONDITION = "precondition"
    DEGREE_TOO_LARGE = "degree_too_large"
    CIRCUIT_INVALID = "circuit_invalid"
    TOO_LARGE = "too_large"

    @property
    def exit_code(self) -> int:
        """CLI exit code for this kind of failure."""
        if self in _INPUT_ERRORS:
            return 2
        if self in _BUDGET_ERRORS:
            return 3
        if self in _PRECONDITION_ERRORS:
            return 4
        return 70


_INPUT_ERRORS = frozenset(
    {
        ErrorKind.SYNTAX,
        ErrorKind.VALIDATION,
        ErrorKind.SIGNATURE_MISMATCH,
        ErrorKind.ARITY_EXCEEDS_K,
        ErrorKind.CIRCUIT_INVALID,
        ErrorKind.NOT_A_RAINBOW,
        ErrorKind.NOT_A_STAR,
        ErrorKind.NOT_AN_EQUIVALENCE,
        ErrorKind.NOT_FUNCTIONAL,
    }
)
_BUDGET_ERRORS = frozenset(
    {
        ErrorKind.MEMORY_BUDGET,
        ErrorKind.ORACLE_SIZE,
        ErrorKind.SEARCH_BUDGET,
        ErrorKind.TOO_LARGE,
        ErrorKind.DEGREE_TOO_LARGE,
    }
)
_PRECONDITION_ERRORS = frozenset(
    {ErrorKind.CLASS_BOUND, ErrorKind.PRECONDITION, ErrorKind.FIBER_TOO_LARGE}
)


class PreconditionReason(Enum):
    """Which bound an input violated."""

    NON_ABELIAN_CLASS = "non-abelian color class"
    NON_THIN_FIBER = "non-thin fiber"
    CLASS_BOUND = "color class larger than k"
    ARITY_BOUND = "relation arity larger than k"
    K_RANGE = "k outside the supported range"


class WLIdentError(Exception):
    """Base class for all errors raised by wlident."""

    kind: ErrorKind = ErrorKind.VALIDATION

    def __init__(self, message: str) -> None:
        super().__init__(message)
        self.message = message

    @property
    def exit_code(self) -> int:
        return self.kind.exit_code


class StructureSyntaxError(WLIdentError):
    """A structure or circuit file line could not be parsed."""

    kind = ErrorKind.SYNTAX

    def __init__(self, line: int, message: str) -> None:
        super().__init__(f"line {line}: {message}")
        self.line = line


class ValidationError(WLIdentError):
    kind = ErrorKind.VALIDATION


class SignatureMismatch(WLIdentError):
    kind = ErrorKind.SIGNATURE_MISMATCH


class ArityExceedsK(WLIdentError):
    kind = ErrorKind.ARITY_EXCEEDS_K


class MemoryBudgetExceeded(WLIdentError):
    """A refinement table would not fit into the configured memory budget."""

    kind = ErrorKind.MEMORY_BUDGET

    def __init__(self, estimate: int, budget: int) -> None:
        super().__init__(
            f"estimated {estimate} bytes exceeds the memory budget of {budget} bytes"
        )
        self.estimate = estimate
        self.budget = budget


class OracleSizeExceeded(WLIdentError):
    kind = ErrorKind.ORACLE_SIZE


class NotARainbow(WLIdentError):
    kind = ErrorKind.NOT_A_RAINBOW


class NotAStar(WLIdentError):
    kind = ErrorKind.NOT_A_STAR


class NotAnEquivalence(WLIdentError):
    kind = ErrorKind.NOT_AN_EQUIVALENCE


class NotFunctional(WLIdentError):
    kind = ErrorKind.NOT_FUNCTIONAL


class CoherenceViolation(WLIdentError):
    kind = ErrorKind.COHERENCE_VIOLATION


class FiberTooLarge(WLIdentError):
    kind = ErrorKind.FIBER_TOO_LARGE


class UnknownFiberType(WLIdentError):
    kind = ErrorKind.UNKNOWN_FIBER_TYPE


class SearchBudgetExceeded(WLIdentError):
    """The individualization-refinement search visited too many nodes."""

    kind = ErrorKind.SEARCH_BUDGET

    def __init__(self, budget: int) -> None:
        super().__init__(f"search exceeded the node budget of {budget}")
        self.budget = budget


class ExtensionInconsistent(WLIdentError):
    kind = ErrorKind.EXTENSION_INCONSISTENT


class WitnessVerificationFailed(WLIdentError):
    kind = ErrorKind.WITNESS_VERIFICATION


class ClassBoundExceeded(WLIdentError):
    kind = ErrorKind.CLASS_BOUND


class PreconditionViolated(WLIdentError):
    """An input lies outside the class a decision procedure is correct for."""

    kind = ErrorKind.PRECONDITION

    def __init__(self, reason: PreconditionReason, detail: str = "") -> None:
        message = reason.value if not detail else f"{reason.value}: {detail}"
        super().__init__(message)
        self.reason = reason


class DegreeTooLarge(WLIdentError):
    kind = ErrorKind.DEGREE_TOO_LARGE


class CircuitInvalid(WLIdentError):
    kind = ErrorKind.CIRCUIT_INVALID


class TooLarge(WLIdentError):
    kind = ErrorKind.TOO_LARGE
