"""
Test statistics for sharp and subgroup null hypotheses of no peer effect
"""

from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple

import numpy as np

from ..core.spaces import TreatmentSpace, peer_set_indices
from ..models.population import OutcomeData
from ..utils.error_handling import ValidationError


class Statistic(Enum):
    """Statistic families; the subgroup ones are computed for one attribute"""
    SUBGROUP_CONTRAST = "T_a"        # max_r Yhat_[a](r) - min_r Yhat_[a](r)
    SUBGROUP_ANOVA = "F_a"           # one-way ANOVA of Y on R within attribute a
    CONTRAST = "T"                   # max minus min of the population-weighted means
    ANOVA = "F"                      # ANOVA over all (attribute, peer set) cells
    MAX_SUBGROUP_CONTRAST = "max_T_a"
    MAX_SUBGROUP_ANOVA = "max_F_a"

    @property
    def per_attribute(self) -> bool:
        return self in (Statistic.SUBGROUP_CONTRAST, Statistic.SUBGROUP_ANOVA)


@dataclass(frozen=True)
class NullHypothesis:
    """Sharp null of no peer effect for anyone, or for attribute-a units only"""
    attribute: Optional[int] = None   # 0-based; None for the sharp null

    @property
    def is_sharp(self) -> bool:
        return self.attribute is None

    def label(self, attribute_labels) -> str:
        return "H0" if self.is_sharp else f"H0[{attribute_labels[self.attribute]}]"


@dataclass(frozen=True)
class TestSpec:
    """Null, statistic and Monte Carlo settings for one randomization test"""
    null: NullHypothesis
    statistic: Statistic
    attribute: Optional[int] = None   # attribute of a subgroup statistic under the sharp null
    draws: int = 10000
    seed: int = 0

    __test__ = False  # not a pytest test class

    def __post_init__(self):
        if self.draws < 1:
            raise ValidationError(f"draws must be at least 1, got {self.draws}")
        if not self.null.is_sharp:
            # Under a subgroup null only attribute-a outcomes are known under every assignment
            if not self.statistic.per_attribute:
                raise ValidationError(
                    f"Statistic {self.statistic.value} uses outcomes outside attribute "
                    f"{self.null.attribute + 1}; subgroup nulls need T_a or F_a")
            if self.attribute not in (None, self.null.attribute):
                raise ValidationError("Subgroup statistic attribute must match the null")
            object.__setattr__(self, 'attribute', self.null.attribute)
        elif self.statistic.per_attribute and self.attribute is None:
            raise ValidationError(f"Statistic {self.statistic.value} needs an attribute")

    @property
    def column(self) -> str:
        return self.statistic.value


def _cell_summaries(attributes: np.ndarray, peer_sets: np.ndarray, outcomes: np.ndarray,
                    H: int, R: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(H, R) counts, sums and sums of squares; attributes are 0-based"""
    flat = attributes * R + peer_sets
    counts = np.bincount(flat, minlength=H * R).reshape(H, R)
    sums = np.bincount(flat, weights=outcomes, minlength=H * R).reshape(H, R)
    squares = np.bincount(flat, weights=outcomes ** 2, minlength=H * R).reshape(H, R)
    return counts, sums, squares


def _anova(counts: np.ndarray, sums: np.ndarray, squares: np.ndarray) -> float:
    """One-way ANOVA F over the nonempty cells given flat cell summaries.

    Zero when fewer than two cells are available or all outcomes agree; inf when
    cells differ but have no within-cell spread.
    """
    present = counts > 0
    groups = int(present.sum())
    total = int(counts.sum())
    if groups < 2:
        return 0.0
    means = np.divide(sums, counts, out=np.zeros_like(sums), where=present)
    grand = sums.sum() / total
    between = float(np.sum(counts[present] * (means[present] - grand) ** 2))
    within = float(max(np.sum(squares[present] - counts[present] * means[present] ** 2), 0.0))
    # Rounding noise below this scale counts as no variation
    scale = 1e-12 * max(1.0, float(np.sum(squares)))
    if between <= scale:
        return 0.0
    if total - groups < 1 or within <= scale:
        return float('inf')
    return (between / (groups - 1)) / (within / (total - groups))


def _range(means: np.ndarray, present: np.ndarray) -> float:
    if int(present.sum()) < 2:
        return 0.0
    values = means[present]
    return float(values.max() - values.min())


def evaluate(statistic: Statistic, attribute: Optional[int], attributes: np.ndarray,
             peer_sets: np.ndarray, outcomes: np.ndarray, H: int, R: int) -> Tuple[float, bool]:
    """Statistic value and whether every cell it looks at was nonempty.

    Empty cells are skipped: maxima and minima run over available cells and ANOVA
    over available groups.
    """
    counts, sums, squares = _cell_summaries(attributes, peer_sets, outcomes, H, R)
    present = counts > 0
    means = np.divide(sums, counts, out=np.zeros_like(sums), where=present)

    if statistic is Statistic.SUBGROUP_CONTRAST:
        return _range(means[attribute], present[attribute]), bool(present[attribute].all())
    if statistic is Statistic.SUBGROUP_ANOVA:
        return (_anova(counts[attribute], sums[attribute], squares[attribute]),
                bool(present[attribute].all()))
    if statistic is Statistic.CONTRAST:
        weights = counts.sum(axis=1) / counts.sum()
        complete = present.all(axis=0)
        return _range(weights @ means, complete), bool(complete.all())
    if statistic is Statistic.ANOVA:
        return _anova(counts.ravel(), sums.ravel(), squares.ravel()), bool(present.all())
    if statistic is Statistic.MAX_SUBGROUP_CONTRAST:
        return max(_range(means[a], present[a]) for a in range(H)), bool(present.all())
    if statistic is Statistic.MAX_SUBGROUP_ANOVA:
        return max(_anova(counts[a], sums[a], squares[a]) for a in range(H)), bool(present.all())
    raise ValidationError(f"Unknown statistic {statistic}")


def statistic_value(data: OutcomeData, spec: TestSpec) -> float:
    """Observed value of the test statistic"""
    population = data.population
    space = TreatmentSpace.for_population(population)
    value, _ = evaluate(spec.statistic, spec.attribute,
                        np.asarray(population.attributes, dtype=np.int64) - 1,
                        peer_set_indices(data.assignment, population),
                        np.asarray(data.outcomes, dtype=float), population.H, space.R)
    return value
