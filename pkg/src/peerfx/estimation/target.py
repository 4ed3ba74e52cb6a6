"""
Peer effects for a target subpopulation: one attribute-a unit drawn from each group
"""

import logging
import math
from dataclasses import dataclass, field
from itertools import product
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..core.spaces import TreatmentSpace, composition_vector, peer_set_indices
from ..models.design import Design
from ..models.population import OutcomeData
from ..utils.error_handling import (
    EnumerationLimitError, ErrorManager, ValidationError, resolve_error_manager,
)
from .estimator import Contrast, ContrastEstimate, all_contrasts, attach_interval, check_contrasts

logger = logging.getLogger(__name__)


@dataclass
class TargetEstimate:
    """Difference-in-means over one selected target subpopulation"""
    attribute: int                 # 0-based
    selected: Tuple[int, ...]      # unit positions, one per eligible group
    counts: np.ndarray             # (R,) selected units per peer set
    means: np.ndarray              # (R,) nan for empty peer sets
    variances: np.ndarray          # (R,) sample variances, nan below 2 units
    effects: List[ContrastEstimate] = field(default_factory=list)

    def to_dict(self, data: OutcomeData, peer_labels: Sequence[str]) -> Dict[str, Any]:
        population = data.population
        labels = population.attribute_labels
        return {
            'attribute': labels[self.attribute],
            'selected_units': [population.unit_ids[i] for i in self.selected],
            'counts': self.counts.tolist(),
            'means': self.means.tolist(),
            'effects': [e.to_dict(peer_labels, labels) for e in self.effects],
        }


def _eligible_groups(data: OutcomeData, a: int) -> List[Tuple[int, ...]]:
    """Attribute-a members of every group that has at least one"""
    attributes = data.population.attributes
    groups = [tuple(i for i in g if attributes[i] == a + 1) for g in data.assignment.groups]
    return [g for g in groups if g]


def check_complete_design(data: OutcomeData, design: Design) -> None:
    """Selections are only comparable under complete randomization with the observed l"""
    if not design.is_complete:
        raise ValidationError("Target-subpopulation inference requires a complete-randomization design")
    observed = composition_vector(data.assignment, data.population)
    if tuple(design.composition) != observed:
        raise ValidationError(
            f"Observed composition {observed} differs from the design's vector {tuple(design.composition)}")


def _summarize(data: OutcomeData, a: int, selected: Sequence[int], peer_sets: np.ndarray,
               R: int) -> TargetEstimate:
    outcomes = np.asarray(data.outcomes, dtype=float)
    chosen = np.asarray(selected, dtype=np.int64)
    counts = np.bincount(peer_sets[chosen], minlength=R)
    means = np.full(R, np.nan)
    variances = np.full(R, np.nan)
    for k in range(R):
        values = outcomes[chosen[peer_sets[chosen] == k]]
        if values.size:
            means[k] = math.fsum(values) / values.size
        if values.size >= 2:
            variances[k] = math.fsum((values - means[k]) ** 2) / (values.size - 1)
    return TargetEstimate(a, tuple(int(i) for i in selected), counts, means, variances)


def target_subpop_estimate(data: OutcomeData, design: Design, a: int, rng: np.random.Generator,
                           contrasts: Optional[Sequence[Contrast]] = None,
                           alpha: float = 0.05,
                           errors: Optional[ErrorManager] = None) -> TargetEstimate:
    """Randomly pick one attribute-a unit per group and estimate by difference in means.

    The selected units' treatments are their usual peer attribute sets R_i.
    Variance is the conservative s^2(r)/m_r + s^2(r')/m_r'.
    """
    errors = resolve_error_manager(errors)
    check_complete_design(data, design)
    if not 0 <= a < data.population.H:
        raise ValidationError(f"Attribute index {a + 1} outside 1..{data.population.H}")
    space = TreatmentSpace.for_population(data.population)
    contrasts = check_contrasts(contrasts if contrasts is not None else all_contrasts(space.R), space.R)
    groups = _eligible_groups(data, a)
    selected = [int(g[rng.integers(len(g))]) for g in groups]

    estimate = _summarize(data, a, selected, peer_set_indices(data.assignment, data.population), space.R)
    for k, k2 in contrasts:
        value = float(estimate.means[k] - estimate.means[k2])
        effect = ContrastEstimate(a, k, k2, value,
                                  note=None if math.isfinite(value) else 'empty target cell')
        variance = estimate.variances[k] / estimate.counts[k] + estimate.variances[k2] / estimate.counts[k2] \
            if math.isfinite(value) else float('nan')
        attach_interval(effect, float(variance), alpha, errors)
        estimate.effects.append(effect)
    logger.debug("Target subpopulation for attribute %d has %d units", a + 1, len(selected))
    return estimate


def enumerate_target_configurations(data: OutcomeData, a: int,
                                    contrasts: Optional[Sequence[Contrast]] = None,
                                    limit: int = 1_000_000) -> Dict[Contrast, float]:
    """Average of the target difference-in-means over every possible selection"""
    space = TreatmentSpace.for_population(data.population)
    contrasts = check_contrasts(contrasts if contrasts is not None else all_contrasts(space.R), space.R)
    groups = _eligible_groups(data, a)
    total = math.prod(len(g) for g in groups)
    if total > limit:
        raise EnumerationLimitError(f"{total} target configurations exceed the limit of {limit}")

    peer_sets = peer_set_indices(data.assignment, data.population)
    sums = {contrast: [] for contrast in contrasts}
    for selected in product(*groups):
        estimate = _summarize(data, a, selected, peer_sets, space.R)
        for k, k2 in contrasts:
            sums[(k, k2)].append(estimate.means[k] - estimate.means[k2])
    return {contrast: math.fsum(values) / total for contrast, values in sums.items()}
