"""
Sampling assignments and exact assignment probabilities
"""

from fractions import Fraction
from math import factorial, prod

import numpy as np

from ..core.spaces import TreatmentSpace, composition_vector
from ..models.design import Design
from ..models.population import Assignment, Population
from .compositions import require_feasible


def sample(design: Design, population: Population, rng: np.random.Generator) -> Assignment:
    """Draw one assignment from the design"""
    return Assignment(tuple(tuple(int(u) for u in row)
                            for row in sample_groups(design, population, rng)))


def sample_groups(design: Design, population: Population, rng: np.random.Generator) -> np.ndarray:
    """Draw one assignment as an (m, K+1) array of unit positions"""
    if design.is_complete:
        return _sample_complete(design, population, rng)
    # Random permutation cut into consecutive blocks of K+1
    return rng.permutation(population.n).reshape(population.m, population.group_size)


def complete_slot_attributes(design: Design, population: Population) -> np.ndarray:
    """(m, K+1) attribute of every group slot when groups are laid out in canonical G order"""
    require_feasible(design.composition, population)
    space = TreatmentSpace.for_population(population)
    rows = [g.labels() for g, l_t in zip(space.group_sets, design.composition) for _ in range(l_t)]
    return np.array(rows, dtype=np.int64)


def _sample_complete(design: Design, population: Population, rng: np.random.Generator) -> np.ndarray:
    # Stratified construction: shuffle each attribute stratum into its slots,
    # then shuffle the group order
    slots = complete_slot_attributes(design, population)
    groups = np.empty_like(slots)
    for a in range(1, population.H + 1):
        groups[slots == a] = rng.permutation(np.asarray(population.units_with(a), dtype=np.int64))
    return groups[rng.permutation(population.m)]


def partition_count(n: int, group_size: int) -> int:
    """Number of partitions of n units into unordered groups of equal size"""
    m = n // group_size
    return factorial(n) // (factorial(m) * factorial(group_size) ** m)


def complete_randomization_count(design: Design, population: Population) -> int:
    """Number of partitions with L(z) == l"""
    space = TreatmentSpace.for_population(population)
    denominator = prod(factorial(l_t) for l_t in design.composition)
    for g, l_t in zip(space.group_sets, design.composition):
        for a in range(1, population.H + 1):
            denominator *= factorial(g.count(a)) ** l_t
    return prod(factorial(c) for c in population.counts) // denominator


def support_size(design: Design, population: Population) -> int:
    if design.is_complete:
        return complete_randomization_count(design, population)
    return partition_count(population.n, population.group_size)


def exact_assignment_probability(design: Design, population: Population,
                                 assignment: Assignment) -> Fraction:
    """pr(Z = z) as an exact rational"""
    assignment.check_population(population)
    m, size = population.m, population.group_size
    if not design.is_complete:
        return Fraction(factorial(m) * factorial(size) ** m, factorial(m * size))

    require_feasible(design.composition, population)
    if composition_vector(assignment, population) != design.composition:
        return Fraction(0)
    space = TreatmentSpace.for_population(population)
    numerator = prod(factorial(l_t) for l_t in design.composition)
    for g, l_t in zip(space.group_sets, design.composition):
        for a in range(1, population.H + 1):
            numerator *= factorial(g.count(a)) ** l_t
    return Fraction(numerator, prod(factorial(c) for c in population.counts))


def assignment_probability(design: Design, population: Population, assignment: Assignment) -> float:
    return float(exact_assignment_probability(design, population, assignment))
