"""
Treatment and group-composition spaces, and assignment bookkeeping
"""

from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from itertools import combinations_with_replacement
from math import comb
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..models.population import AttrMultiset, Assignment, Population
from ..utils.error_handling import ValidationError


def _multisets(H: int, size: int) -> List[AttrMultiset]:
    # combinations_with_replacement yields sorted label tuples in lexicographic
    # order, i.e. count vectors in descending lexicographic order: 111, 112, 122, 222
    return [AttrMultiset.from_labels(labels, H)
            for labels in combinations_with_replacement(range(1, H + 1), size)]


def enumerate_peer_sets(H: int, K: int) -> List[AttrMultiset]:
    """All size-K multisets over 1..H (the treatment space R)"""
    return _multisets(H, K)


def enumerate_group_sets(H: int, K: int) -> List[AttrMultiset]:
    """All size-(K+1) multisets over 1..H (the group-composition space G)"""
    return _multisets(H, K + 1)


def peer_space_size(H: int, K: int) -> int:
    return comb(K + H - 1, H - 1)


def group_space_size(H: int, K: int) -> int:
    return comb(H + K, H - 1)


@dataclass(frozen=True)
class TreatmentSpace:
    """Canonical orderings of R and G for fixed (H, K), with index lookups"""
    H: int
    K: int
    peer_sets: Tuple[AttrMultiset, ...] = field(init=False)
    group_sets: Tuple[AttrMultiset, ...] = field(init=False)
    _peer_index: Dict[AttrMultiset, int] = field(init=False, repr=False, compare=False)
    _group_index: Dict[AttrMultiset, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.H < 1 or self.K < 1:
            raise ValidationError(f"Need H >= 1 and K >= 1, got H={self.H}, K={self.K}")
        peer_sets = tuple(enumerate_peer_sets(self.H, self.K))
        group_sets = tuple(enumerate_group_sets(self.H, self.K))
        object.__setattr__(self, 'peer_sets', peer_sets)
        object.__setattr__(self, 'group_sets', group_sets)
        object.__setattr__(self, '_peer_index', {r: k for k, r in enumerate(peer_sets)})
        object.__setattr__(self, '_group_index', {g: t for t, g in enumerate(group_sets)})

    @classmethod
    def for_population(cls, population: Population) -> 'TreatmentSpace':
        return cached_space(population.H, population.K)

    @property
    def R(self) -> int:
        return len(self.peer_sets)

    @property
    def T(self) -> int:
        return len(self.group_sets)

    def peer_index(self, r: AttrMultiset) -> int:
        try:
            return self._peer_index[r]
        except KeyError:
            raise ValidationError(f"{r} is not a peer set for H={self.H}, K={self.K}") from None

    def group_index(self, g: AttrMultiset) -> int:
        try:
            return self._group_index[g]
        except KeyError:
            raise ValidationError(f"{g} is not a group set for H={self.H}, K={self.K}") from None

    def group_of_peer_set(self, a: int, r_index: int) -> int:
        """t such that g_t == {a} ∪ r"""
        return self._group_index[self.peer_sets[r_index].add(a)]

    def peer_set_of_group(self, t: int, a: int) -> Optional[int]:
        """Index of g_t minus one copy of a, or None if a is not in g_t"""
        reduced = self.group_sets[t].remove(a)
        return None if reduced is None else self._peer_index[reduced]

    @property
    def group_count_matrix(self) -> np.ndarray:
        """(H, T) matrix of g_t(a)"""
        return np.array([[g.count(a) for g in self.group_sets] for a in range(1, self.H + 1)],
                        dtype=np.int64)

    @cached_property
    def _peer_code_table(self) -> np.ndarray:
        # Peer-set counts read as base-(K+1) digits map to canonical positions
        table = np.full((self.K + 1) ** self.H, -1, dtype=np.int64)
        for k, r in enumerate(self.peer_sets):
            table[self.peer_code(np.asarray(r.counts))] = k
        return table

    def peer_code(self, counts: np.ndarray) -> np.ndarray:
        """Base-(K+1) code of peer-set count vectors along the last axis"""
        return counts @ ((self.K + 1) ** np.arange(self.H, dtype=np.int64))

    def peer_indices_from_groups(self, groups: np.ndarray, attributes: np.ndarray) -> np.ndarray:
        """Canonical R_i position per unit from an (m, K+1) array of unit positions.

        ``attributes`` holds 1-based attributes in population order.
        """
        member_attributes = attributes[groups] - 1
        group_counts = np.zeros((groups.shape[0], self.H), dtype=np.int64)
        np.add.at(group_counts, (np.repeat(np.arange(groups.shape[0]), groups.shape[1]),
                                 member_attributes.ravel()), 1)
        peer_counts = group_counts[:, None, :] - np.eye(self.H, dtype=np.int64)[member_attributes]
        indices = np.empty(attributes.shape[0], dtype=np.int64)
        indices[groups.ravel()] = self._peer_code_table[self.peer_code(peer_counts).ravel()]
        return indices

    def render_peer_sets(self, names: Optional[Sequence[str]] = None) -> List[str]:
        return [r.render(names) for r in self.peer_sets]

    def render_group_sets(self, names: Optional[Sequence[str]] = None) -> List[str]:
        return [g.render(names) for g in self.group_sets]


@lru_cache(maxsize=64)
def cached_space(H: int, K: int) -> TreatmentSpace:
    return TreatmentSpace(H, K)


def group_attribute_set(assignment: Assignment, population: Population, group: int) -> AttrMultiset:
    return AttrMultiset.from_labels(
        (population.attributes[j] for j in assignment.groups[group]), population.H)


def units_treatment(assignment: Assignment, population: Population, unit_id: str) -> AttrMultiset:
    """R_i: multiset of the attributes of the unit's K peers"""
    unit = population.position(unit_id)
    return AttrMultiset.from_labels(
        (population.attributes[j] for j in assignment.peers(unit)), population.H)


def composition_vector(assignment: Assignment, population: Population) -> Tuple[int, ...]:
    """L(z): number of groups per element of G, in canonical order"""
    assignment.check_population(population)
    space = TreatmentSpace.for_population(population)
    counts = [0] * space.T
    for group in range(assignment.m):
        counts[space.group_index(group_attribute_set(assignment, population, group))] += 1
    return tuple(counts)


def peer_set_indices(assignment: Assignment, population: Population) -> np.ndarray:
    """Canonical index of R_i for every unit, in population order"""
    assignment.check_population(population)
    space = TreatmentSpace.for_population(population)
    indices = np.empty(population.n, dtype=np.int64)
    for group in range(assignment.m):
        g = group_attribute_set(assignment, population, group)
        for unit in assignment.groups[group]:
            indices[unit] = space.peer_index(g.remove(population.attributes[unit]))
    return indices


def treatment_counts(assignment: Assignment, population: Population) -> np.ndarray:
    """(H, |R|) matrix of n_[a]r observed under the assignment"""
    space = TreatmentSpace.for_population(population)
    counts = np.zeros((population.H, space.R), dtype=np.int64)
    attributes = np.asarray(population.attributes) - 1
    np.add.at(counts, (attributes, peer_set_indices(assignment, population)), 1)
    return counts


def n_ar_from_l(l: Sequence[int], a: int, r: AttrMultiset, H: int, K: int) -> int:
    """n_[a]r implied by a composition vector l"""
    space = cached_space(H, K)
    if len(l) != space.T:
        raise ValidationError(f"Composition vector has length {len(l)}, expected {space.T}")
    target = r.add(a)
    return sum(int(l_t) * g.count(a) for g, l_t in zip(space.group_sets, l) if g == target)


def n_ar_matrix(l: Sequence[int], space: TreatmentSpace) -> np.ndarray:
    """(H, |R|) matrix of n_[a]r implied by l"""
    if len(l) != space.T:
        raise ValidationError(f"Composition vector has length {len(l)}, expected {space.T}")
    counts = np.zeros((space.H, space.R), dtype=np.int64)
    for t, g in enumerate(space.group_sets):
        if l[t] == 0:
            continue
        for a in range(1, space.H + 1):
            r_index = space.peer_set_of_group(t, a)
            if r_index is not None:
                counts[a - 1, r_index] += int(l[t]) * g.count(a)
    return counts
