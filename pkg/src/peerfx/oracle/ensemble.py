"""
Exact assignment distributions by exhaustive enumeration
"""

import logging
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations, permutations
from typing import Dict, Iterator, List, Sequence, Tuple

from ..core.spaces import TreatmentSpace, n_ar_matrix, peer_set_indices
from ..design.compositions import require_feasible
from ..design.sampler import exact_assignment_probability, support_size
from ..models.design import Design
from ..models.population import AttrMultiset, Assignment, Population
from ..utils.error_handling import EnumerationLimitError

logger = logging.getLogger(__name__)

Groups = Tuple[Tuple[int, ...], ...]


def iter_partitions(n: int, group_size: int) -> Iterator[Groups]:
    """Every partition of 0..n-1 into groups of ``group_size``, each exactly once.

    The group holding the smallest unplaced unit is always built next, so groups
    come out sorted by their smallest member.
    """
    def build(remaining: Tuple[int, ...]) -> Iterator[Groups]:
        if not remaining:
            yield ()
            return
        first, rest = remaining[0], remaining[1:]
        for others in combinations(rest, group_size - 1):
            taken = set(others)
            left = tuple(u for u in rest if u not in taken)
            for tail in build(left):
                yield ((first,) + others,) + tail

    yield from build(tuple(range(n)))


def iter_complete_randomization(population: Population, composition: Sequence[int]) -> Iterator[Groups]:
    """Partitions whose composition vector equals ``composition``.

    Branches are pruned as soon as some group type would exceed its count.
    """
    require_feasible(composition, population)
    space = TreatmentSpace.for_population(population)
    attributes = population.attributes
    size = population.group_size
    remaining_types = list(composition)

    def build(remaining: Tuple[int, ...]) -> Iterator[Groups]:
        if not remaining:
            yield ()
            return
        first, rest = remaining[0], remaining[1:]
        for others in combinations(rest, size - 1):
            group = (first,) + others
            t = space.group_index(AttrMultiset.from_labels((attributes[u] for u in group), population.H))
            if remaining_types[t] == 0:
                continue
            remaining_types[t] -= 1
            taken = set(others)
            left = tuple(u for u in rest if u not in taken)
            for tail in build(left):
                yield (group,) + tail
            remaining_types[t] += 1

    yield from build(tuple(range(population.n)))


def iter_support(design: Design, population: Population) -> Iterator[Groups]:
    if design.is_complete:
        return iter_complete_randomization(population, design.composition)
    return iter_partitions(population.n, population.group_size)


@dataclass(frozen=True, eq=False)
class AssignmentEnsemble:
    """Complete support of a design with exact probabilities"""
    design: Design
    population: Population
    assignments: Tuple[Assignment, ...]
    probabilities: Tuple[Fraction, ...]

    def __len__(self) -> int:
        return len(self.assignments)

    def __iter__(self) -> Iterator[Tuple[Assignment, Fraction]]:
        return iter(zip(self.assignments, self.probabilities))

    @property
    def total_probability(self) -> Fraction:
        return sum(self.probabilities, Fraction(0))


def check_enumeration_size(design: Design, population: Population, cap: int) -> int:
    size = support_size(design, population)
    if size > cap:
        raise EnumerationLimitError(
            f"Design support has {size} assignments, above the enumeration cap of {cap}")
    return size


def enumerate_ensemble(design: Design, population: Population, cap: int = 1_000_000) -> AssignmentEnsemble:
    """Every assignment in the design's support with its exact probability"""
    expected = check_enumeration_size(design, population, cap)
    assignments: List[Assignment] = []
    probabilities: List[Fraction] = []
    for groups in iter_support(design, population):
        assignment = Assignment(groups)
        assignments.append(assignment)
        probabilities.append(exact_assignment_probability(design, population, assignment))
    logger.debug("Enumerated %d of %d expected %s assignments", len(assignments), expected,
                 design.kind.value)
    return AssignmentEnsemble(design, population, tuple(assignments), tuple(probabilities))


def stratified_treatment_distribution(population: Population,
                                      composition: Sequence[int]) -> Dict[Tuple[int, ...], Fraction]:
    """Exact distribution of (R_1..R_n) in a stratified experiment with n_[a]r units on r.

    Computed without reference to groups: within each attribute stratum every
    arrangement of the treatment multiset is equally likely, independently
    across strata.
    """
    space = TreatmentSpace.for_population(population)
    n_ar = n_ar_matrix(composition, space)
    strata = []
    for a in range(1, population.H + 1):
        units = population.units_with(a)
        labels = [k for k in range(space.R) for _ in range(int(n_ar[a - 1, k]))]
        arrangements = sorted(set(permutations(labels)))
        strata.append((units, arrangements))

    distribution: Dict[Tuple[int, ...], Fraction] = {}

    def combine(index: int, partial: Dict[int, int], probability: Fraction) -> None:
        if index == len(strata):
            key = tuple(partial[i] for i in range(population.n))
            distribution[key] = distribution.get(key, Fraction(0)) + probability
            return
        units, arrangements = strata[index]
        for arrangement in arrangements:
            for unit, k in zip(units, arrangement):
                partial[unit] = k
            combine(index + 1, partial, probability / len(arrangements))

    combine(0, {}, Fraction(1))
    return distribution


def treatment_distribution(ensemble: AssignmentEnsemble) -> Dict[Tuple[int, ...], Fraction]:
    """Exact distribution of (R_1..R_n) implied by an ensemble"""
    distribution: Dict[Tuple[int, ...], Fraction] = {}
    for assignment, probability in ensemble:
        key = tuple(int(k) for k in peer_set_indices(assignment, ensemble.population))
        distribution[key] = distribution.get(key, Fraction(0)) + probability
    return distribution

