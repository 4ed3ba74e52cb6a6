"""
Population, assignment and outcome data models for peerfx
"""

from dataclasses import dataclass, field
from typing import Dict, Iterable, Mapping, Optional, Sequence, Tuple
import math

from ..utils.error_handling import ValidationError


@dataclass(frozen=True)
class AttrMultiset:
    """Unordered multiset of attribute labels 1..H, stored as a count vector"""
    counts: Tuple[int, ...]

    def __post_init__(self):
        if any(c < 0 for c in self.counts):
            raise ValidationError(f"Multiset multiplicities must be non-negative, got {self.counts}")

    @classmethod
    def from_labels(cls, labels: Iterable[int], H: int) -> 'AttrMultiset':
        """Build from attribute labels in 1..H (any order, repeats allowed)"""
        counts = [0] * H
        for a in labels:
            if not 1 <= a <= H:
                raise ValidationError(f"Attribute {a} outside 1..{H}")
            counts[a - 1] += 1
        return cls(tuple(counts))

    @property
    def H(self) -> int:
        return len(self.counts)

    @property
    def size(self) -> int:
        return sum(self.counts)

    def count(self, a: int) -> int:
        """Multiplicity r(a) of attribute a"""
        return self.counts[a - 1]

    def __contains__(self, a: int) -> bool:
        return 1 <= a <= self.H and self.counts[a - 1] > 0

    def add(self, a: int) -> 'AttrMultiset':
        counts = list(self.counts)
        counts[a - 1] += 1
        return AttrMultiset(tuple(counts))

    def remove(self, a: int) -> Optional['AttrMultiset']:
        """Multiset with one copy of a removed, or None when a is absent"""
        if a not in self:
            return None
        counts = list(self.counts)
        counts[a - 1] -= 1
        return AttrMultiset(tuple(counts))

    def labels(self) -> Tuple[int, ...]:
        """Sorted attribute labels with repetition"""
        return tuple(a for a in range(1, self.H + 1) for _ in range(self.counts[a - 1]))

    def render(self, names: Optional[Sequence[str]] = None) -> str:
        """Comma-separated labels, e.g. '1,1,2' or 'gaokao,gaokao,rec'"""
        if names is None:
            return ",".join(str(a) for a in self.labels())
        return ",".join(names[a - 1] for a in self.labels())

    def __str__(self) -> str:
        return "{" + self.render() + "}"


@dataclass(frozen=True)
class Population:
    """n = m(K+1) units with attributes in 1..H"""
    unit_ids: Tuple[str, ...]
    attributes: Tuple[int, ...]
    K: int
    attribute_labels: Tuple[str, ...] = ()
    _index: Dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        """Validate population structure"""
        if self.K < 1:
            raise ValidationError(f"Each unit needs at least one peer, got K={self.K}")
        if len(self.unit_ids) != len(self.attributes):
            raise ValidationError("unit_ids and attributes must have equal length")
        n = len(self.unit_ids)
        if n == 0 or n % (self.K + 1) != 0:
            raise ValidationError(f"Population size {n} is not a positive multiple of group size {self.K + 1}")

        index: Dict[str, int] = {}
        for position, unit_id in enumerate(self.unit_ids):
            if unit_id in index:
                raise ValidationError(f"Duplicate unit id: {unit_id!r}")
            index[unit_id] = position
        object.__setattr__(self, '_index', index)

        H = max(self.attributes)
        if min(self.attributes) < 1 or set(self.attributes) != set(range(1, H + 1)):
            raise ValidationError(f"Attributes must cover 1..{H} with every value present")
        if not self.attribute_labels:
            object.__setattr__(self, 'attribute_labels', tuple(str(a) for a in range(1, H + 1)))
        elif len(self.attribute_labels) != H:
            raise ValidationError(f"Expected {H} attribute labels, got {len(self.attribute_labels)}")

    @classmethod
    def from_units(cls, units: Sequence[Tuple[str, int]], K: int,
                   attribute_labels: Sequence[str] = ()) -> 'Population':
        return cls(
            unit_ids=tuple(str(u) for u, _ in units),
            attributes=tuple(int(a) for _, a in units),
            K=K,
            attribute_labels=tuple(attribute_labels),
        )

    @classmethod
    def from_counts(cls, counts: Sequence[int], K: int) -> 'Population':
        """Synthetic population u1, u2, ... with the given attribute counts"""
        attributes = [a for a, count in enumerate(counts, start=1) for _ in range(count)]
        return cls.from_units([(f"u{i + 1}", a) for i, a in enumerate(attributes)], K)

    @property
    def n(self) -> int:
        return len(self.unit_ids)

    @property
    def m(self) -> int:
        return self.n // (self.K + 1)

    @property
    def H(self) -> int:
        return len(self.attribute_labels)

    @property
    def group_size(self) -> int:
        return self.K + 1

    @property
    def counts(self) -> Tuple[int, ...]:
        """n_[a] for a = 1..H"""
        counts = [0] * self.H
        for a in self.attributes:
            counts[a - 1] += 1
        return tuple(counts)

    def n_attr(self, a: int) -> int:
        return self.counts[a - 1]

    def weight(self, a: int) -> float:
        """w_[a] = n_[a] / n"""
        return self.n_attr(a) / self.n

    def position(self, unit_id: str) -> int:
        try:
            return self._index[unit_id]
        except KeyError:
            raise ValidationError(f"Unknown unit id: {unit_id!r}") from None

    def units_with(self, a: int) -> Tuple[int, ...]:
        """Positions of units with attribute a"""
        return tuple(i for i, attr in enumerate(self.attributes) if attr == a)


@dataclass(frozen=True)
class Assignment:
    """Partition of unit positions 0..n-1 into m groups of equal size"""
    groups: Tuple[Tuple[int, ...], ...]
    _group_of: Tuple[int, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        """Canonicalize and validate the partition"""
        if not self.groups:
            raise ValidationError("An assignment needs at least one group")
        canonical = tuple(sorted(tuple(sorted(g)) for g in self.groups))
        object.__setattr__(self, 'groups', canonical)

        sizes = {len(g) for g in canonical}
        if len(sizes) != 1 or 0 in sizes:
            raise ValidationError(f"Groups must share one positive size, got sizes {sorted(sizes)}")
        n = sum(len(g) for g in canonical)
        group_of = [-1] * n
        for index, group in enumerate(canonical):
            for unit in group:
                if not 0 <= unit < n or group_of[unit] != -1:
                    raise ValidationError("Groups do not partition the population")
                group_of[unit] = index
        object.__setattr__(self, '_group_of', tuple(group_of))

    @classmethod
    def from_group_ids(cls, population: Population, labels: Mapping[str, str]) -> 'Assignment':
        """Build from a unit_id -> group_id mapping"""
        members: Dict[str, list] = {}
        for unit_id, group_id in labels.items():
            members.setdefault(group_id, []).append(population.position(unit_id))
        assignment = cls(tuple(tuple(g) for g in members.values()))
        assignment.check_population(population)
        return assignment

    @property
    def n(self) -> int:
        return len(self._group_of)

    @property
    def m(self) -> int:
        return len(self.groups)

    @property
    def group_size(self) -> int:
        return len(self.groups[0])

    def group_of(self, unit: int) -> int:
        return self._group_of[unit]

    def peers(self, unit: int) -> Tuple[int, ...]:
        """Z_i: the unit's K peers"""
        return tuple(j for j in self.groups[self._group_of[unit]] if j != unit)

    def check_population(self, population: Population) -> None:
        if self.n != population.n:
            raise ValidationError(f"Assignment covers {self.n} units, population has {population.n}")
        if self.group_size != population.group_size:
            raise ValidationError(
                f"Groups have size {self.group_size}, population expects {population.group_size}")

    def group_ids(self, population: Population) -> Tuple[Tuple[str, ...], ...]:
        return tuple(tuple(population.unit_ids[i] for i in g) for g in self.groups)


@dataclass(frozen=True)
class OutcomeData:
    """Observed outcomes Y_i for a population under one realized assignment"""
    population: Population
    assignment: Assignment
    outcomes: Tuple[float, ...]

    def __post_init__(self):
        self.assignment.check_population(self.population)
        if len(self.outcomes) != self.population.n:
            raise ValidationError(
                f"Expected {self.population.n} outcomes, got {len(self.outcomes)}")
        if not all(math.isfinite(y) for y in self.outcomes):
            raise ValidationError("Outcomes must be finite real numbers")

    @classmethod
    def from_mapping(cls, population: Population, assignment: Assignment,
                     outcomes: Mapping[str, float]) -> 'OutcomeData':
        missing = [u for u in population.unit_ids if u not in outcomes]
        if missing:
            raise ValidationError(f"Missing outcomes for units: {missing[:5]}")
        extra = set(outcomes) - set(population.unit_ids)
        if extra:
            raise ValidationError(f"Outcomes given for unknown units: {sorted(extra)[:5]}")
        return cls(population, assignment, tuple(float(outcomes[u]) for u in population.unit_ids))

    def with_assignment(self, assignment: Assignment) -> 'OutcomeData':
        """Same outcomes under another assignment (sharp-null imputation)"""
        return OutcomeData(self.population, assignment, self.outcomes)
