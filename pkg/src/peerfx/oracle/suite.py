"""
Oracle suite: closed-form kernels, estimators and variances against exhaustive enumeration
"""

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..core.spaces import TreatmentSpace, n_ar_matrix, peer_set_indices
from ..design.compositions import feasible_compositions
from ..design.kernel import ProbabilityKernel, kernel
from ..design.sampler import support_size
from ..estimation.estimator import (
    all_contrasts, cell_estimates, variance_components, variance_estimate,
)
from ..models.design import Design
from ..models.population import OutcomeData, Population
from ..rtest.engine import randomization_test
from ..rtest.statistics import NullHypothesis, Statistic, TestSpec
from ..science.potential import PotentialTable, true_variance
from ..utils.error_handling import (
    ErrorManager, OracleCheckFailure, PeerfxError, ValidationError,
)
from ..utils.helpers import make_rng
from .ensemble import (
    AssignmentEnsemble, enumerate_ensemble, stratified_treatment_distribution, treatment_distribution,
)
from .moments import exact_moment, scaled_difference, table_outcomes

logger = logging.getLogger(__name__)

TOLERANCE = 1e-10
SIZE_GRID = tuple(k / 100 for k in range(1, 100))


@dataclass(frozen=True)
class OracleInstance:
    """Small population given by its group size and attribute counts"""
    K: int
    counts: Tuple[int, ...]

    @property
    def n(self) -> int:
        return sum(self.counts)

    @property
    def H(self) -> int:
        return len(self.counts)

    @property
    def label(self) -> str:
        return f"n={self.n},K={self.K},H={self.H}"

    def population(self) -> Population:
        return Population.from_counts(self.counts, self.K)


STANDARD_SUITE = (
    OracleInstance(1, (2, 2)),
    OracleInstance(1, (4, 2)),
    OracleInstance(2, (3, 3)),
    OracleInstance(3, (4, 4)),
    OracleInstance(1, (2, 2, 2)),
)
QUICK_SUITE = STANDARD_SUITE[:2]
SUITES = {'standard': STANDARD_SUITE, 'quick': QUICK_SUITE}


def random_integer_table(population: Population, seed: int, high: int = 10) -> PotentialTable:
    space = TreatmentSpace.for_population(population)
    return PotentialTable(population, make_rng(seed).integers(0, high, size=(population.n, space.R)))


def additive_table(population: Population, seed: int, high: int = 10) -> PotentialTable:
    """Y_i(r) = alpha_i + beta_[a](r): constant individual peer effects within each attribute"""
    space = TreatmentSpace.for_population(population)
    rng = make_rng(seed)
    alpha = rng.integers(0, high, size=population.n)
    beta = rng.integers(0, high, size=(population.H, space.R))
    attributes = np.asarray(population.attributes) - 1
    return PotentialTable(population, alpha[:, None] + beta[attributes])


def null_table(population: Population, seed: int, high: int = 10) -> PotentialTable:
    """Outcomes that ignore the peers entirely"""
    space = TreatmentSpace.for_population(population)
    base = make_rng(seed).integers(0, high, size=population.n)
    return PotentialTable(population, np.repeat(base[:, None], space.R, axis=1))


def representative_composition(population: Population) -> Tuple[int, ...]:
    """Feasible l with the most cells of two or more units, then the most nonempty cells"""
    space = TreatmentSpace.for_population(population)
    best, best_score = None, None
    for l in feasible_compositions(population):
        counts = n_ar_matrix(l, space)
        score = (int(np.sum(counts >= 2)), int(np.sum(counts >= 1)))
        if best_score is None or score > best_score:
            best, best_score = l, score
    if best is None:
        raise ValidationError(f"No feasible composition for counts {population.counts}")
    return best


@dataclass
class CheckResult:
    instance: str
    design: str
    table: Optional[str]
    check: str
    difference: float
    tolerance: float
    detail: Optional[str] = None

    @property
    def passed(self) -> bool:
        return self.difference <= self.tolerance

    def to_dict(self) -> Dict[str, Any]:
        return {
            'instance': self.instance,
            'design': self.design,
            'table': self.table,
            'check': self.check,
            'difference': self.difference,
            'tolerance': self.tolerance,
            'passed': self.passed,
            'detail': self.detail,
        }


@dataclass
class OracleReport:
    suite: str
    checks: List[CheckResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    @property
    def failures(self) -> List[CheckResult]:
        return [check for check in self.checks if not check.passed]

    def to_dict(self) -> Dict[str, Any]:
        return {
            'suite': self.suite,
            'passed': self.passed,
            'check_count': len(self.checks),
            'failure_count': len(self.failures),
            'checks': [check.to_dict() for check in self.checks],
        }

    def raise_on_failure(self) -> None:
        if not self.passed:
            names = sorted({f"{c.instance}/{c.design}/{c.check}" for c in self.failures})
            raise OracleCheckFailure(f"{len(self.failures)} oracle checks failed: {', '.join(names)}")


# Exact probabilities from enumeration

def enumerated_probabilities(ensemble: AssignmentEnsemble) -> Tuple[np.ndarray, np.ndarray, float]:
    """Per-attribute averages of P(R_i = r) and P(R_i = r, R_j = r'), plus the largest spread across units.

    Both designs treat units of one attribute symmetrically, so the spread should be zero.
    """
    population = ensemble.population
    space = TreatmentSpace.for_population(population)
    n, H, R = population.n, population.H, space.R
    single = [[Fraction(0)] * R for _ in range(n)]
    joint: Dict[Tuple[int, int, int, int], Fraction] = {}
    for assignment, probability in ensemble:
        peer_sets = [int(k) for k in peer_set_indices(assignment, population)]
        for i in range(n):
            single[i][peer_sets[i]] += probability
            for j in range(n):
                if i != j:
                    key = (i, j, peer_sets[i], peer_sets[j])
                    joint[key] = joint.get(key, Fraction(0)) + probability

    pi1 = np.full((H, R), np.nan)
    pi2 = np.full((H, H, R, R), np.nan)
    spread = Fraction(0)
    for a in range(H):
        units_a = population.units_with(a + 1)
        for k in range(R):
            values = [single[i][k] for i in units_a]
            spread = max(spread, max(values) - min(values))
            pi1[a, k] = float(values[0])
        for a2 in range(H):
            pairs = [(i, j) for i in units_a for j in population.units_with(a2 + 1) if i != j]
            if not pairs:
                continue
            for k in range(R):
                for k2 in range(R):
                    values = [joint.get((i, j, k, k2), Fraction(0)) for i, j in pairs]
                    spread = max(spread, max(values) - min(values))
                    pi2[a, a2, k, k2] = float(values[0])
    return pi1, pi2, float(spread)


def _nan_aware_difference(observed: np.ndarray, expected: np.ndarray) -> float:
    if not np.array_equal(np.isnan(observed), np.isnan(expected)):
        return float('inf')
    mask = ~np.isnan(expected)
    return scaled_difference(observed[mask], expected[mask])


# Functionals over observed data

def _effects_vector(data: OutcomeData, prob: ProbabilityKernel,
                    contrasts: Sequence[Tuple[int, int]]) -> np.ndarray:
    yhat = cell_estimates(data, prob)
    weights = np.asarray(prob.counts, dtype=float) / prob.n
    values = []
    for k, k2 in contrasts:
        subgroup = yhat[:, k] - yhat[:, k2]
        values.extend(subgroup)
        values.append(float(weights @ subgroup))
    return np.array(values)


def _true_effects(table: PotentialTable, contrasts: Sequence[Tuple[int, int]]) -> np.ndarray:
    values = []
    for k, k2 in contrasts:
        values.extend(table.subgroup_effect(a, k, k2) for a in range(table.population.H))
        values.append(table.overall_effect(k, k2))
    return np.array(values)


def _true_variances(table: PotentialTable, prob: ProbabilityKernel,
                    contrasts: Sequence[Tuple[int, int]]) -> np.ndarray:
    values = []
    for k, k2 in contrasts:
        variances = true_variance(table, prob, k, k2)
        values.extend(variances[a] for a in range(prob.H))
        values.append(variances[None])
    return np.array(values)


def _variance_gaps(table: PotentialTable, prob: ProbabilityKernel,
                   contrasts: Sequence[Tuple[int, int]]) -> np.ndarray:
    """Expected minus true variance: S^2_[a](r - r') / n_[a], weighted for the overall effect"""
    weights = np.asarray(prob.counts, dtype=float) / prob.n
    values = []
    for k, k2 in contrasts:
        dropped = np.array([table.s2_difference(a, k, k2) for a in range(prob.H)])
        values.extend(dropped / np.asarray(prob.counts, dtype=float))
        values.append(float(weights @ dropped) / prob.n)
    return np.array(values)


def _variance_estimates_vector(data: OutcomeData, prob: ProbabilityKernel,
                               contrasts: Sequence[Tuple[int, int]]) -> np.ndarray:
    estimates = variance_estimate(data, prob, contrasts)
    values = []
    for k, k2 in contrasts:
        values.extend(estimates[(a, k, k2)] for a in range(prob.H))
        values.append(estimates[(None, k, k2)])
    return np.array(values)


def _components_vector(data: OutcomeData, prob: ProbabilityKernel) -> np.ndarray:
    components = variance_components(data, prob)
    return np.concatenate([components.s2.ravel(), components.mean_square.ravel(),
                           components.pair_product.ravel(), components.cross_product.ravel()])


def _true_components(table: PotentialTable) -> np.ndarray:
    return np.concatenate([table.s2().ravel(), (table.subgroup_means() ** 2).ravel(),
                           table.pair_products().ravel(), table.cross_products().ravel()])


class _Sweep:
    """Checks for one (instance, design) pair"""

    def __init__(self, instance: OracleInstance, design: Design, cap: int, report: OracleReport,
                 scratch: ErrorManager):
        self.instance = instance
        self.design = design
        self.report = report
        self.scratch = scratch
        self.population = instance.population()
        self.kernel = kernel(design, self.population)
        self.ensemble = enumerate_ensemble(design, self.population, cap)
        self.contrasts = all_contrasts(self.kernel.R)

    @property
    def design_label(self) -> str:
        return self.design.kind.value

    def record(self, check: str, difference: float, table: Optional[str] = None,
               tolerance: float = TOLERANCE, detail: Optional[str] = None) -> None:
        result = CheckResult(self.instance.label, self.design_label, table, check,
                             float(difference), tolerance, detail)
        if not result.passed:
            logger.warning("Oracle check %s failed on %s/%s (difference %.3g)",
                           check, result.instance, result.design, result.difference)
        self.report.checks.append(result)

    def realize(self, table: PotentialTable, assignment) -> OutcomeData:
        return table_outcomes(table)(assignment)

    def defined_mask(self, table: PotentialTable,
                     raw: Callable[[OutcomeData], np.ndarray]) -> np.ndarray:
        # Availability is fixed by the design, so one support point decides it
        first, _ = next(iter(self.ensemble))
        return np.isfinite(raw(self.realize(table, first)))

    def check_ensemble(self) -> None:
        total = self.ensemble.total_probability
        expected = support_size(self.design, self.population)
        self.record('ensemble_total_probability', abs(float(total - 1)), tolerance=0.0,
                    detail=f"{len(self.ensemble)} assignments, expected {expected}")
        self.record('ensemble_size', abs(len(self.ensemble) - expected), tolerance=0.0)

    def check_kernel(self) -> None:
        pi1, pi2, spread = enumerated_probabilities(self.ensemble)
        self.record('kernel_marginal_probabilities', _nan_aware_difference(self.kernel.pi1, pi1),
                    tolerance=1e-12)
        self.record('kernel_joint_probabilities', _nan_aware_difference(self.kernel.pi2, pi2),
                    tolerance=1e-12)
        self.record('kernel_unit_symmetry', spread, tolerance=0.0)

    def check_stratified(self) -> None:
        if not self.design.is_complete:
            return
        enumerated = treatment_distribution(self.ensemble)
        stratified = stratified_treatment_distribution(self.population, self.design.composition)
        keys = set(enumerated) | set(stratified)
        distance = sum((abs(enumerated.get(k, Fraction(0)) - stratified.get(k, Fraction(0))) for k in keys),
                       Fraction(0)) / 2
        self.record('stratified_equivalence', float(distance), tolerance=0.0)

    def check_table(self, name: str, table: PotentialTable) -> None:
        prob, contrasts = self.kernel, self.contrasts

        def effects(data: OutcomeData) -> np.ndarray:
            return _effects_vector(data, prob, contrasts)

        mask = self.defined_mask(table, effects)
        moments = exact_moment(self.ensemble, table, lambda data: effects(data)[mask])
        self.record('unbiased_effects',
                    scaled_difference(moments.mean, _true_effects(table, contrasts)[mask]), name)
        self.record('variance_identity',
                    scaled_difference(moments.variance, _true_variances(table, prob, contrasts)[mask]), name)

        def cells(data: OutcomeData) -> np.ndarray:
            return cell_estimates(data, prob).ravel()

        cell_mask = self.defined_mask(table, cells)
        cell_moments = exact_moment(self.ensemble, table, lambda data: cells(data)[cell_mask],
                                    covariance=False)
        self.record('unbiased_cell_means',
                    scaled_difference(cell_moments.mean, table.subgroup_means().ravel()[cell_mask]), name)

        def components(data: OutcomeData) -> np.ndarray:
            return _components_vector(data, prob)

        truth = _true_components(table)
        component_mask = self.defined_mask(table, components) & np.isfinite(truth)
        component_moments = exact_moment(self.ensemble, table,
                                         lambda data: components(data)[component_mask], covariance=False)
        self.record('unbiased_variance_components',
                    scaled_difference(component_moments.mean, truth[component_mask]), name)

        def variance_estimates(data: OutcomeData) -> np.ndarray:
            return _variance_estimates_vector(data, prob, contrasts)

        estimate_mask = self.defined_mask(table, variance_estimates) & mask
        estimate_moments = exact_moment(self.ensemble, table,
                                        lambda data: variance_estimates(data)[estimate_mask],
                                        covariance=False)
        true_var = _true_variances(table, prob, contrasts)[estimate_mask]
        gaps = _variance_gaps(table, prob, contrasts)[estimate_mask]
        self.record('conservative_variance_gap',
                    scaled_difference(estimate_moments.mean - true_var, gaps), name)

    def check_test_size(self, table: PotentialTable) -> None:
        """Exact size of the exhaustive randomization test under a true sharp null"""
        for statistic in (Statistic.CONTRAST, Statistic.ANOVA):
            spec = TestSpec(NullHypothesis(), statistic)
            rejection = {alpha: Fraction(0) for alpha in SIZE_GRID}
            for assignment, probability in self.ensemble:
                data = self.realize(table, assignment)
                result = randomization_test(data, self.design, spec, enumeration_limit=len(self.ensemble),
                                            keep_reference=False, errors=self.scratch)
                for alpha in SIZE_GRID:
                    if result.p_value <= alpha:
                        rejection[alpha] += probability
            excess = max(float(rejection[alpha]) - alpha for alpha in SIZE_GRID)
            self.record('randomization_test_size', max(excess, 0.0), 'null', tolerance=0.0,
                        detail=f"statistic {statistic.value}")


def run_oracle_suite(name: str = 'standard', tables: int = 3, cap: int = 1_000_000,
                     include_tests: Optional[bool] = None) -> OracleReport:
    """Run every oracle check on the named suite and collect the differences"""
    if name not in SUITES:
        raise ValidationError(f"Unknown oracle suite {name!r}; choose from {sorted(SUITES)}")
    if tables < 1:
        raise ValidationError(f"Need at least one random table, got {tables}")
    if include_tests is None:
        include_tests = name == 'standard'
    report = OracleReport(name)
    # Reference assignments routinely leave cells empty; those notes are not run diagnostics
    scratch = ErrorManager('peerfx.oracle.scratch')
    scratch.logger.disabled = True

    for instance in SUITES[name]:
        population = instance.population()
        designs = [Design.random_partition(),
                   Design.complete_randomization(representative_composition(population))]
        for design in designs:
            try:
                sweep = _Sweep(instance, design, cap, report, scratch)
                sweep.check_ensemble()
                sweep.check_kernel()
                sweep.check_stratified()
                named = [(f"random_{seed}", random_integer_table(population, seed)) for seed in range(tables)]
                named.append(('additive', additive_table(population, tables)))
                for table_name, table in named:
                    sweep.check_table(table_name, table)
                if include_tests:
                    sweep.check_test_size(null_table(population, tables + 1))
            except PeerfxError as e:
                report.checks.append(CheckResult(instance.label, design.kind.value, None, 'evaluation',
                                                 float('inf'), TOLERANCE, str(e)))
                logger.warning("Oracle sweep %s/%s aborted: %s", instance.label, design.kind.value, e)
            scratch.clear()
        logger.debug("Oracle instance %s done", instance.label)
    return report
