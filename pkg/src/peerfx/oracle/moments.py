"""
Exact moments of estimators over an enumerated assignment ensemble
"""

import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..core.spaces import TreatmentSpace, peer_set_indices
from ..models.population import Assignment, OutcomeData
from ..science.potential import PotentialTable
from ..utils.error_handling import ComputationError, PeerfxError
from .ensemble import AssignmentEnsemble

logger = logging.getLogger(__name__)

Functional = Callable[[OutcomeData], Union[float, np.ndarray]]
# Y_i as a function of the unit position and the positions of its peers
IdentityOutcome = Callable[[int, Tuple[int, ...]], float]


@dataclass
class ExactMoments:
    """Probability-weighted moments of a vector-valued functional, kept as rationals"""
    exact_mean: Tuple[Fraction, ...]
    exact_covariance: Optional[Tuple[Tuple[Fraction, ...], ...]] = None

    @property
    def mean(self) -> np.ndarray:
        return np.array([float(x) for x in self.exact_mean])

    @property
    def covariance(self) -> np.ndarray:
        if self.exact_covariance is None:
            raise ComputationError("Covariance was not requested for these moments")
        return np.array([[float(x) for x in row] for row in self.exact_covariance])

    @property
    def variance(self) -> np.ndarray:
        return np.diag(self.covariance)


def table_outcomes(table: PotentialTable) -> Callable[[Assignment], OutcomeData]:
    """Observed data under each assignment when outcomes follow a potential table"""
    population = table.population

    def realize(assignment: Assignment) -> OutcomeData:
        peer_sets = peer_set_indices(assignment, population)
        return OutcomeData(population, assignment, tuple(float(y) for y in table.observed(peer_sets)))

    return realize


def identity_outcomes(ensemble: AssignmentEnsemble,
                      outcome: IdentityOutcome) -> Callable[[Assignment], OutcomeData]:
    """Observed data when outcomes depend on who the peers are, not only their attributes"""
    population = ensemble.population

    def realize(assignment: Assignment) -> OutcomeData:
        values = tuple(float(outcome(i, assignment.peers(i))) for i in range(population.n))
        return OutcomeData(population, assignment, values)

    return realize


def _evaluate(functional: Functional, data: OutcomeData) -> List[Fraction]:
    try:
        values = np.atleast_1d(np.asarray(functional(data), dtype=float))
    except PeerfxError as e:
        raise ComputationError(
            f"Functional is undefined under assignment {data.assignment.groups}: {e}") from e
    if not np.all(np.isfinite(values)):
        bad = [int(i) for i in np.flatnonzero(~np.isfinite(values))]
        raise ComputationError(
            f"Functional is undefined under assignment {data.assignment.groups} at positions {bad}")
    # Fractions of floats are exact
    return [Fraction(float(v)) for v in values]


def moments_of(ensemble: AssignmentEnsemble, realize: Callable[[Assignment], OutcomeData],
               functional: Functional, covariance: bool = True) -> ExactMoments:
    samples = [(_evaluate(functional, realize(assignment)), probability)
               for assignment, probability in ensemble]
    size = len(samples[0][0])
    if any(len(values) != size for values, _ in samples):
        raise ComputationError("Functional returned vectors of different lengths across assignments")

    mean = tuple(sum((p * values[j] for values, p in samples), Fraction(0)) for j in range(size))
    if not covariance:
        return ExactMoments(mean)
    deviations = [([v - m for v, m in zip(values, mean)], p) for values, p in samples]
    cov = tuple(
        tuple(sum((p * dev[i] * dev[j] for dev, p in deviations), Fraction(0)) for j in range(size))
        for i in range(size)
    )
    return ExactMoments(mean, cov)


def exact_moment(ensemble: AssignmentEnsemble, table: PotentialTable,
                 functional: Functional, covariance: bool = True) -> ExactMoments:
    """Exact mean and covariance of functional(observed data) under the ensemble's design"""
    return moments_of(ensemble, table_outcomes(table), functional, covariance)


def design_dependent_means(ensemble: AssignmentEnsemble, outcome: IdentityOutcome) -> np.ndarray:
    """(H, R) attribute averages of E[Y_i | R_i = r] when outcomes depend on peer identities.

    With anonymous interaction this is the ordinary cell mean; otherwise it is the
    quantity the cell estimator is unbiased for. Cells with R_i = r impossible are nan.
    """
    population = ensemble.population
    space = TreatmentSpace.for_population(population)
    n, R = population.n, space.R
    weighted = [[Fraction(0)] * R for _ in range(n)]
    mass = [[Fraction(0)] * R for _ in range(n)]
    for assignment, probability in ensemble:
        peer_sets = peer_set_indices(assignment, population)
        for i in range(n):
            k = int(peer_sets[i])
            weighted[i][k] += probability * Fraction(float(outcome(i, assignment.peers(i))))
            mass[i][k] += probability

    result = np.full((population.H, R), np.nan)
    for a in range(1, population.H + 1):
        units = population.units_with(a)
        for k in range(R):
            if all(mass[i][k] > 0 for i in units):
                total = sum((weighted[i][k] / mass[i][k] for i in units), Fraction(0))
                result[a - 1, k] = float(total / len(units))
    return result


def scaled_difference(observed: Sequence[float], expected: Sequence[float]) -> float:
    """max |observed - expected| / max(1, |expected|)"""
    observed = np.asarray(observed, dtype=float)
    expected = np.asarray(expected, dtype=float)
    if observed.shape != expected.shape:
        raise ComputationError(f"Shape mismatch {observed.shape} vs {expected.shape}")
    if observed.size == 0:
        return 0.0
    scale = np.maximum(1.0, np.abs(expected))
    return float(np.max(np.abs(observed - expected) / scale))
