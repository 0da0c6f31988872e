"""
Error hierarchy and retry helpers for the numerical pipeline.
Maps every failure mode onto a severity and a CLI exit code.
"""
from typing import Optional, Any, Dict, Tuple, Type
from tenacity import (
    Retrying,
    stop_after_attempt,
    wait_none,
    retry_if_exception_type,
)
import logging
from enum import Enum


logger = logging.getLogger(__name__)


class ErrorSeverity(Enum):
    """Error severity levels"""
    LOW = "low"
    MEDIUM = "medium"
    HIGH = "high"
    CRITICAL = "critical"


class SemistabError(Exception):
    """Base exception for all numerical and configuration errors"""
    def __init__(self, message: str, severity: ErrorSeverity = ErrorSeverity.MEDIUM):
        self.message = message
        self.severity = severity
        super().__init__(message)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "error": type(self).__name__,
            "message": self.message,
            "severity": self.severity.value,
        }


class DomainError(SemistabError):
    """Argument outside the mathematical domain (cut points, m <= 0, xi = 1/6)"""
    def __init__(self, message: str, field: Optional[str] = None):
        super().__init__(message, ErrorSeverity.MEDIUM)
        self.field = field


class ConfigValidationError(SemistabError):
    """Invalid run configuration or malformed input file"""
    def __init__(self, message: str, field: Optional[str] = None):
        super().__init__(message, ErrorSeverity.MEDIUM)
        self.field = field


class QuadratureError(SemistabError):
    """Quadrature missed its certified tolerance"""
    def __init__(self, message: str, estimate: Optional[float] = None):
        super().__init__(message, ErrorSeverity.HIGH)
        self.estimate = estimate


class RootFindingError(SemistabError):
    """Root counts disagree, zeros degenerate, or retry budget exhausted"""
    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message, ErrorSeverity.HIGH)
        self.details = details or {}


class HypothesisError(SemistabError):
    """Input outside the hypotheses of an inversion or positivity statement"""
    def __init__(self, message: str, offending: Optional[float] = None):
        super().__init__(message, ErrorSeverity.MEDIUM)
        self.offending = offending


class RouteInvalidError(SemistabError):
    """Pole route requested while a zero sits on or near the cut"""
    def __init__(self, message: str):
        super().__init__(message, ErrorSeverity.HIGH)


class ConvergenceError(SemistabError):
    """Dyson iteration failed to converge"""
    def __init__(self, message: str, increments: Optional[list] = None):
        super().__init__(message, ErrorSeverity.HIGH)
        self.increments = increments or []


class ValidationFailure(SemistabError):
    """One or more invariant checks failed"""
    def __init__(self, message: str, report: Optional[Dict[str, Any]] = None):
        super().__init__(message, ErrorSeverity.CRITICAL)
        self.report = report or {}


EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_VALIDATION = 4


def exit_code_for(exc: BaseException) -> int:
    """Map an exception onto the CLI exit code"""
    if isinstance(exc, ConfigValidationError):
        return EXIT_CONFIG
    if isinstance(exc, ValidationFailure):
        return EXIT_VALIDATION
    if isinstance(exc, SemistabError):
        return EXIT_SOLVER
    return EXIT_SOLVER


def retrying_attempts(
    max_attempts: int,
    exceptions: Tuple[Type[BaseException], ...] = (RootFindingError,),
) -> Retrying:
    """
    Attempt iterator for loops that adjust their own inputs between tries.

    Usage:
        for attempt in retrying_attempts(5):
            with attempt:
                n = attempt.retry_state.attempt_number
                ...
    """
    return Retrying(
        stop=stop_after_attempt(max_attempts),
        wait=wait_none(),
        retry=retry_if_exception_type(exceptions),
        reraise=True,
    )
