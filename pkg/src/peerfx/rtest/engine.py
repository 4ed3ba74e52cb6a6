"""
Randomization test engine: exhaustive or Monte Carlo reference distributions
"""

import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..core.spaces import TreatmentSpace, composition_vector
from ..design.sampler import sample_groups, support_size
from ..models.design import Design
from ..models.population import OutcomeData
from ..oracle.ensemble import iter_support
from ..utils.error_handling import ErrorCategory, ErrorManager, ValidationError, resolve_error_manager
from ..utils.helpers import derive_rng
from ..utils.performance import map_chunks
from .statistics import NullHypothesis, Statistic, TestSpec, evaluate, statistic_value

logger = logging.getLogger(__name__)

REFERENCE_QUANTILES = (0.5, 0.9, 0.95, 0.99)


def tie_tolerance(observed: float) -> float:
    """Reference values within this distance below the observed value count as ties"""
    return 1e-9 * max(1.0, abs(observed)) if math.isfinite(observed) else 0.0


@dataclass
class RandomizationTestResult:
    """p-value and reference distribution summary for one test"""
    spec: TestSpec
    observed: float
    p_value: float
    method: str                 # 'exhaustive' or 'monte_carlo'
    reference_size: int
    incomplete_draws: int       # reference assignments with an empty cell the statistic uses
    reference: Optional[np.ndarray] = None

    def quantiles(self) -> Dict[str, Optional[float]]:
        if self.reference is None or self.reference.size == 0:
            return {}
        return {f"q{int(q * 100)}": float(np.quantile(self.reference, q)) for q in REFERENCE_QUANTILES}

    def to_dict(self, attribute_labels: Sequence[str]) -> Dict[str, Any]:
        return {
            'null': self.spec.null.label(attribute_labels),
            'statistic': self.spec.statistic.value,
            'attribute': None if self.spec.attribute is None else attribute_labels[self.spec.attribute],
            'observed': self.observed,
            'p_value': self.p_value,
            'method': self.method,
            'reference_size': self.reference_size,
            'incomplete_draws': self.incomplete_draws,
            'seed': self.spec.seed if self.method == 'monte_carlo' else None,
            'reference_quantiles': self.quantiles(),
        }


def _check_design(data: OutcomeData, design: Design) -> None:
    if design.is_complete:
        observed = composition_vector(data.assignment, data.population)
        if observed != design.composition:
            raise ValidationError(
                f"Observed composition {observed} is outside the support of the design {design.composition}")


def tail_probability(reference: np.ndarray, observed: float, exhaustive: bool) -> float:
    """Share of the reference at or above the observed statistic.

    Exhaustive references cover an equally likely support, so p = count / size;
    sampled ones add the observed assignment, p = (1 + count) / (1 + draws).
    """
    extreme = int(np.sum(reference >= observed - tie_tolerance(observed)))
    if exhaustive:
        return extreme / reference.size
    return (1 + extreme) / (1 + reference.size)


def randomization_test(data: OutcomeData, design: Design, spec: TestSpec,
                       enumeration_limit: int = 100_000, workers: int = 1,
                       keep_reference: bool = True,
                       errors: Optional[ErrorManager] = None) -> RandomizationTestResult:
    """Test a null of no peer effect holding observed outcomes fixed.

    When the design's support has at most ``enumeration_limit`` assignments the
    reference distribution is the full support and p is exact; otherwise
    ``spec.draws`` assignments are sampled and p = (1 + #{T* >= T}) / (1 + draws).
    Ties count toward the tail.
    """
    errors = resolve_error_manager(errors)
    _check_design(data, design)
    population = data.population
    space = TreatmentSpace.for_population(population)
    attributes_1 = np.asarray(population.attributes, dtype=np.int64)
    attributes_0 = attributes_1 - 1
    outcomes = np.asarray(data.outcomes, dtype=float)

    observed = statistic_value(data, spec)

    def evaluate_groups(groups: np.ndarray) -> Tuple[float, bool]:
        peer_sets = space.peer_indices_from_groups(groups, attributes_1)
        return evaluate(spec.statistic, spec.attribute, attributes_0, peer_sets, outcomes,
                        population.H, space.R)

    size = support_size(design, population)
    if size <= enumeration_limit:
        logger.debug("Exhaustive reference distribution over %d assignments", size)
        results = [evaluate_groups(np.asarray(groups, dtype=np.int64))
                   for groups in iter_support(design, population)]
        reference = np.array([value for value, _ in results])
        method = 'exhaustive'
    else:
        logger.debug("Monte Carlo reference distribution with %d draws on %d workers", spec.draws, workers)

        def run_chunk(start: int, stop: int) -> List[Tuple[float, bool]]:
            return [evaluate_groups(sample_groups(design, population, derive_rng(spec.seed, index)))
                    for index in range(start, stop)]

        results = [item for chunk in map_chunks(run_chunk, spec.draws, workers) for item in chunk]
        reference = np.array([value for value, _ in results])
        method = 'monte_carlo'
    p_value = tail_probability(reference, observed, exhaustive=method == 'exhaustive')

    incomplete = sum(1 for _, complete in results if not complete)
    if incomplete:
        errors.report(
            f"{incomplete} reference assignments left cells used by {spec.statistic.value} empty; "
            "the statistic was computed over nonempty cells only",
            category=ErrorCategory.TESTING,
            context={'statistic': spec.statistic.value, 'incomplete_draws': incomplete},
        )
    return RandomizationTestResult(spec, observed, float(p_value), method, int(reference.size),
                                   incomplete, reference if keep_reference else None)


def randomization_test_table(data: OutcomeData, design: Design, draws: int, seed: int,
                             enumeration_limit: int = 100_000, workers: int = 1,
                             nulls: Optional[Sequence[NullHypothesis]] = None,
                             statistics: Optional[Sequence[Statistic]] = None,
                             errors: Optional[ErrorManager] = None) -> List[Dict[str, Any]]:
    """Rows H0, H0[1], ..., H0[H]; columns T, F, max T_a, max F_a.

    On subgroup rows the T and F columns hold T_a and F_a, and the max columns are empty.
    """
    population = data.population
    labels = population.attribute_labels
    if nulls is None:
        nulls = [NullHypothesis()] + [NullHypothesis(a) for a in range(population.H)]
    columns = list(statistics) if statistics is not None else [
        Statistic.CONTRAST, Statistic.ANOVA,
        Statistic.MAX_SUBGROUP_CONTRAST, Statistic.MAX_SUBGROUP_ANOVA,
    ]
    subgroup_version = {Statistic.CONTRAST: Statistic.SUBGROUP_CONTRAST,
                        Statistic.ANOVA: Statistic.SUBGROUP_ANOVA}

    rows = []
    for null in nulls:
        row: Dict[str, Any] = {'null': null.label(labels), 'tests': {}}
        for column in columns:
            statistic = column if null.is_sharp else subgroup_version.get(column)
            if statistic is None or (null.is_sharp and statistic.per_attribute):
                row['tests'][column.value] = None
                continue
            spec = TestSpec(null, statistic, draws=draws, seed=seed)
            result = randomization_test(data, design, spec, enumeration_limit, workers,
                                        keep_reference=True, errors=errors)
            row['tests'][column.value] = result.to_dict(labels)
        rows.append(row)
    return rows
