"""
Shared fixtures for the peerfx test suite
"""

import logging
import sys
from pathlib import Path

import numpy as np
import pytest

# Add src to path for imports
sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from peerfx.models.design import Design  # noqa: E402
from peerfx.models.population import Assignment, OutcomeData, Population  # noqa: E402
from peerfx.oracle.suite import random_integer_table  # noqa: E402
from peerfx.utils.error_handling import ErrorManager  # noqa: E402


@pytest.fixture
def eight_students() -> Population:
    """Five type-1 and three type-2 students in rooms of four"""
    units = [(f"s{i}", 1) for i in range(1, 6)] + [(f"s{i}", 2) for i in range(6, 9)]
    return Population.from_units(units, K=3, attribute_labels=("gaokao", "recommended"))


@pytest.fixture
def eight_students_rooms() -> Assignment:
    """Rooms {1,1,1,2} and {1,1,2,2}: composition (0, 1, 1, 0, 0)"""
    return Assignment(((0, 1, 2, 5), (3, 4, 6, 7)))


@pytest.fixture
def toy_population() -> Population:
    """n=4, K=1, attributes (1, 1, 2, 2)"""
    return Population.from_units([("u1", 1), ("u2", 1), ("u3", 2), ("u4", 2)], K=1)


@pytest.fixture
def toy_data(toy_population) -> OutcomeData:
    """Every type-1 unit paired with a type-2 unit, outcomes (1, 2, 3, 4)"""
    return OutcomeData(toy_population, Assignment(((0, 2), (1, 3))), (1.0, 2.0, 3.0, 4.0))


@pytest.fixture
def toy_cr_design() -> Design:
    return Design.complete_randomization((0, 2, 0))


@pytest.fixture
def six_population() -> Population:
    """n=6, K=1, four type-1 and two type-2 units"""
    return Population.from_counts((4, 2), K=1)


@pytest.fixture
def random_table(six_population):
    return random_integer_table(six_population, seed=7)


@pytest.fixture
def errors() -> ErrorManager:
    return ErrorManager('peerfx.tests')


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240601)


@pytest.fixture
def write_csv(tmp_path):
    """Write rows under tmp_path and return the file path"""
    def _write(name, rows, header=("unit_id", "attribute", "group_id", "outcome")) -> Path:
        path = tmp_path / name
        lines = [",".join(header)] + [",".join(str(v) for v in row) for row in rows]
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return path

    return _write


@pytest.fixture(autouse=True)
def restore_peerfx_logger():
    """CLI runs reconfigure the package logger; put it back for caplog-based tests"""
    logger = logging.getLogger('peerfx')
    saved = (list(logger.handlers), logger.level, logger.propagate)
    yield
    logger.handlers[:] = saved[0]
    logger.setLevel(saved[1])
    logger.propagate = saved[2]
