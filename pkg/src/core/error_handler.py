"""
Error types and central error handling for the derived-brackets toolkit
Provides typed exceptions and structured diagnostics for the CLI
"""

import logging
import traceback
from typing import Dict, List, Optional, Any
from dataclasses import dataclass, field
from enum import Enum

logger = logging.getLogger(__name__)


class ErrorSeverity(Enum):
    """Error severity levels"""
    ERROR = "error"
    CRITICAL = "critical"


class ErrorCategory(Enum):
    """Error categories"""
    PARSE = "parse"
    VALIDATION = "validation"
    PRECONDITION = "precondition"
    TRUNCATION = "truncation"
    COMPUTATION = "computation"
    CONFIGURATION = "configuration"
    IO = "io"


class DerivedBracketsError(Exception):
    """Base class of every error raised by the library"""
    category = ErrorCategory.COMPUTATION


class BundleParseError(DerivedBracketsError):
    """Malformed algebra bundle; `path` names the offending JSON field"""
    category = ErrorCategory.PARSE

    def __init__(self, message: str, path: str = ""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


class ValidationError(DerivedBracketsError):
    category = ErrorCategory.VALIDATION


class PreconditionError(DerivedBracketsError):
    category = ErrorCategory.PRECONDITION


class TruncationError(DerivedBracketsError):
    """A value was requested outside the arity or t-degree window"""
    category = ErrorCategory.TRUNCATION


class NonTerminatingSumError(PreconditionError):
    """Twisting or curvature sum without a finiteness certificate"""


class BracketsIOError(DerivedBracketsError):
    """A bundle could not be read or a report could not be written"""
    category = ErrorCategory.IO

    def __init__(self, message: str, path: str = ""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


@dataclass
class ErrorInfo:
    """Structured error information"""
    error_id: str
    severity: ErrorSeverity
    category: ErrorCategory
    message: str
    details: str = ""
    context: Dict[str, Any] = field(default_factory=dict)
    suggestions: List[str] = field(default_factory=list)
    traceback_info: str = ""

    def to_diagnostic(self, verbose: bool = False) -> Dict[str, Any]:
        """Deterministic subset used in CLI output (no ids); `details` only when verbose"""
        diagnostic = {
            "category": self.category.value,
            "message": self.message,
            "suggestions": self.suggestions,
        }
        if verbose:
            diagnostic["details"] = self.details
        return diagnostic


class ErrorHandler:
    """Logs handled errors and turns them into diagnostics"""

    def __init__(self):
        self._counter = 0

    def handle_error(self, error: Exception, context: Dict[str, Any] = None,
                     severity: ErrorSeverity = ErrorSeverity.ERROR,
                     category: Optional[ErrorCategory] = None) -> ErrorInfo:
        """Handle an error and create structured error information"""
        self._counter += 1
        if category is None:
            category = getattr(error, "category", ErrorCategory.COMPUTATION)
        context = dict(context or {})
        if isinstance(error, BundleParseError) and error.path:
            context.setdefault("field", error.path)

        error_info = ErrorInfo(
            error_id=f"err_{self._counter:04d}",
            severity=severity,
            category=category,
            message=str(error),
            details=self._get_error_details(error),
            context=context,
            suggestions=self._get_suggestions(error, category),
            traceback_info=traceback.format_exc(),
        )

        self._log_error(error_info)

        return error_info

    def _get_error_details(self, error: Exception) -> str:
        details = f"Error Type: {type(error).__name__}\n"
        details += f"Error Message: {error}\n"
        if getattr(error, "path", ""):
            label = "Path" if isinstance(error, BracketsIOError) else "Field"
            details += f"{label}: {error.path}\n"
        return details.strip()

    def _get_suggestions(self, error: Exception, category: ErrorCategory) -> List[str]:
        """Get suggestions for resolving the error"""
        suggestions = []
        if category == ErrorCategory.PARSE:
            suggestions.extend([
                "Check the bundle against the documented JSON schema",
                "Write rationals as \"p/q\" strings or integers",
            ])
        elif category == ErrorCategory.VALIDATION:
            suggestions.append("Run the validate command to list every violated axiom")
        elif category == ErrorCategory.PRECONDITION:
            suggestions.append("Provide the missing splitting, differential or derivation")
            if "closed" in str(error).lower():
                suggestions.append("Use --via-transfer when the complement is not a subalgebra")
        elif category == ErrorCategory.TRUNCATION:
            suggestions.append("Lower --arity or raise polyform.t_degree_factor in the config")
        elif category == ErrorCategory.CONFIGURATION:
            suggestions.append("Check brackets_config.json")
        elif category == ErrorCategory.IO:
            suggestions.append("Check that the input path exists and the output path is writable")
        return suggestions

    def _log_error(self, error_info: ErrorInfo):
        """Log the error with appropriate level"""
        log_message = f"[{error_info.error_id}] {error_info.message}"
        if error_info.context:
            log_message += f" | Context: {error_info.context}"

        if error_info.severity == ErrorSeverity.CRITICAL:
            logger.critical(log_message)
        else:
            logger.error(log_message)
        logger.debug(f"Traceback for {error_info.error_id}:\n{error_info.traceback_info}")


# Global error handler instance
error_handler = ErrorHandler()
