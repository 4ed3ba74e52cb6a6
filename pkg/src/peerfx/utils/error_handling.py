"""
Error handling utilities for peerfx
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Tuple


class ErrorSeverity(Enum):
    """Error severity levels"""
    LOW = "low"           # Informational, result unaffected
    MEDIUM = "medium"     # Part of a result is unavailable
    HIGH = "high"         # Command cannot produce a result
    CRITICAL = "critical" # Internal inconsistency


class ErrorCategory(Enum):
    """Error categories"""
    VALIDATION = "validation"
    CONFIGURATION = "configuration"
    DESIGN = "design"
    ESTIMATION = "estimation"
    TESTING = "testing"
    OPTIMIZATION = "optimization"
    ORACLE = "oracle"
    FILE_IO = "file_io"
    UNKNOWN = "unknown"


class PeerfxError(Exception):
    """Base class for all peerfx errors; carries the CLI exit code"""
    exit_code = 2
    category = ErrorCategory.UNKNOWN


class ValidationError(PeerfxError, ValueError):
    """Invalid input data, design or arguments"""
    exit_code = 1
    category = ErrorCategory.VALIDATION


class ConfigurationError(ValidationError):
    """Invalid or unreadable configuration"""
    category = ErrorCategory.CONFIGURATION


class ComputationError(PeerfxError):
    """A requested quantity cannot be computed from valid inputs"""
    exit_code = 2
    category = ErrorCategory.ESTIMATION


class UndefinedCellError(ComputationError):
    """One or more (attribute, peer set) cells are unavailable"""

    def __init__(self, message: str, cells: Sequence[Tuple[int, int]] = ()):
        super().__init__(message)
        self.cells = list(cells)


class EnumerationLimitError(ComputationError):
    """Exhaustive enumeration would exceed the configured cap"""
    category = ErrorCategory.ORACLE


class OracleCheckFailure(PeerfxError):
    """An oracle property did not hold"""
    exit_code = 3
    category = ErrorCategory.ORACLE


@dataclass
class ErrorReport:
    """Diagnostic collected during a run"""
    error_id: str
    severity: ErrorSeverity = ErrorSeverity.LOW
    category: ErrorCategory = ErrorCategory.UNKNOWN
    message: str = ""
    context: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        """Convert error report to dictionary"""
        return {
            'error_id': self.error_id,
            'severity': self.severity.value,
            'category': self.category.value,
            'message': self.message,
            'context': self.context,
        }


class ErrorManager:
    """Collects diagnostics for one run and logs them"""

    _LOG_LEVELS = {
        ErrorSeverity.LOW: logging.INFO,
        ErrorSeverity.MEDIUM: logging.WARNING,
        ErrorSeverity.HIGH: logging.ERROR,
        ErrorSeverity.CRITICAL: logging.CRITICAL,
    }

    def __init__(self, logger_name: str = 'peerfx.diagnostics', max_history: int = 1000):
        self.logger = logging.getLogger(logger_name)
        self.max_history = max_history
        self._reports: List[ErrorReport] = []
        self._issued = 0

    def report(
        self,
        message: str,
        severity: ErrorSeverity = ErrorSeverity.MEDIUM,
        category: ErrorCategory = ErrorCategory.UNKNOWN,
        context: Optional[Dict[str, Any]] = None,
    ) -> ErrorReport:
        """Record and log a diagnostic"""
        # Sequential ids keep JSON output reproducible
        error_report = ErrorReport(
            error_id=f"D{self._issued + 1:04d}",
            severity=severity,
            category=category,
            message=message,
            context=context or {},
        )
        self._issued += 1
        self._reports.append(error_report)
        if len(self._reports) > self.max_history:
            self._reports = self._reports[-self.max_history:]

        log_message = f"[{error_report.error_id}] {category.value.upper()}: {message}"
        if error_report.context:
            log_message += f" | Context: {error_report.context}"
        self.logger.log(self._LOG_LEVELS[severity], log_message)
        return error_report

    def warn(self, message: str, category: ErrorCategory, **context: Any) -> ErrorReport:
        """Shorthand for a MEDIUM-severity diagnostic"""
        return self.report(message, ErrorSeverity.MEDIUM, category, context)

    def get_reports(
        self,
        severity: Optional[ErrorSeverity] = None,
        category: Optional[ErrorCategory] = None,
    ) -> List[ErrorReport]:
        """Get filtered diagnostics in the order they were raised"""
        reports = self._reports
        if severity:
            reports = [r for r in reports if r.severity == severity]
        if category:
            reports = [r for r in reports if r.category == category]
        return list(reports)

    def to_list(self) -> List[Dict[str, Any]]:
        return [r.to_dict() for r in self._reports]

    def clear(self) -> int:
        """Drop collected diagnostics"""
        count = len(self._reports)
        self._reports.clear()
        self._issued = 0
        return count


_default_error_manager: Optional[ErrorManager] = None


def get_error_manager() -> ErrorManager:
    """Module-level manager used when a caller does not supply one"""
    global _default_error_manager
    if _default_error_manager is None:
        _default_error_manager = ErrorManager()
    return _default_error_manager


def resolve_error_manager(manager: Optional[ErrorManager]) -> ErrorManager:
    return manager if manager is not None else get_error_manager()
