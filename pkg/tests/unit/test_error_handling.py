"""Tests for the error hierarchy and the diagnostics collector"""

import logging

from peerfx.utils.error_handling import (
    ComputationError, ConfigurationError, EnumerationLimitError, ErrorCategory, ErrorManager,
    ErrorSeverity, OracleCheckFailure, PeerfxError, UndefinedCellError, ValidationError,
    get_error_manager, resolve_error_manager,
)


def test_exit_codes():
    assert ValidationError("x").exit_code == 1
    assert ConfigurationError("x").exit_code == 1
    assert ComputationError("x").exit_code == 2
    assert EnumerationLimitError("x").exit_code == 2
    assert OracleCheckFailure("x").exit_code == 3
    assert isinstance(ValidationError("x"), ValueError)
    assert issubclass(UndefinedCellError, PeerfxError)


def test_undefined_cells_are_kept():
    error = UndefinedCellError("empty", [(1, 2)])
    assert error.cells == [(1, 2)]


def test_reports_are_numbered_and_logged(caplog):
    manager = ErrorManager('peerfx.tests.errors')
    with caplog.at_level(logging.INFO, logger='peerfx.tests.errors'):
        first = manager.warn("cell too small", ErrorCategory.ESTIMATION, attribute=1)
        second = manager.report("note", ErrorSeverity.LOW, ErrorCategory.DESIGN)
    assert (first.error_id, second.error_id) == ("D0001", "D0002")
    assert "ESTIMATION: cell too small" in caplog.text
    assert manager.to_list()[0]['context'] == {'attribute': 1}


def test_filtering_and_clear():
    manager = ErrorManager('peerfx.tests.errors')
    manager.warn("a", ErrorCategory.ESTIMATION)
    manager.report("b", ErrorSeverity.LOW, ErrorCategory.TESTING)
    assert len(manager.get_reports(category=ErrorCategory.TESTING)) == 1
    assert len(manager.get_reports(severity=ErrorSeverity.MEDIUM)) == 1
    assert manager.clear() == 2
    assert manager.to_list() == []


def test_default_manager():
    assert resolve_error_manager(None) is get_error_manager()
    local = ErrorManager()
    assert resolve_error_manager(local) is local


def test_history_is_capped_and_ids_keep_counting():
    manager = ErrorManager('peerfx.tests.errors', max_history=3)
    manager.logger.disabled = True
    for k in range(5):
        manager.warn(f"note {k}", ErrorCategory.TESTING)
    reports = manager.get_reports()
    assert [r.message for r in reports] == ["note 2", "note 3", "note 4"]
    assert reports[-1].error_id == "D0005"
    manager.logger.disabled = False
    manager.clear()
    assert manager.warn("fresh", ErrorCategory.TESTING).error_id == "D0001"
