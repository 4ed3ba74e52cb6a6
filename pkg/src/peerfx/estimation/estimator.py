"""
Horvitz-Thompson peer-effect estimators, variance components and Wald intervals
"""

import logging
import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import norm

from ..core.spaces import composition_vector, peer_set_indices
from ..design.kernel import ProbabilityKernel
from ..models.population import OutcomeData
from ..utils.error_handling import (
    ErrorCategory, ErrorManager, ValidationError, resolve_error_manager,
)

logger = logging.getLogger(__name__)

Contrast = Tuple[int, int]


def all_contrasts(R: int) -> List[Contrast]:
    """Every unordered pair of peer-set positions, (k, k') with k < k'"""
    return list(combinations(range(R), 2))


def check_contrasts(contrasts: Sequence[Contrast], R: int) -> List[Contrast]:
    checked = []
    for k, k2 in contrasts:
        if not (0 <= k < R and 0 <= k2 < R):
            raise ValidationError(f"Contrast ({k + 1}, {k2 + 1}) refers to a peer set outside 1..{R}")
        if k == k2:
            raise ValidationError(f"Contrast compares peer set {k + 1} with itself")
        checked.append((int(k), int(k2)))
    return checked


@dataclass(frozen=True)
class ObservedCells:
    """Observed outcomes grouped by (attribute, peer set)"""
    attributes: np.ndarray   # 0-based attribute per unit
    peer_sets: np.ndarray    # canonical peer-set position per unit
    outcomes: np.ndarray
    counts: np.ndarray       # (H, R) observed n_[a]r

    @classmethod
    def from_data(cls, data: OutcomeData, R: int) -> 'ObservedCells':
        population = data.population
        attributes = np.asarray(population.attributes, dtype=np.int64) - 1
        peer_sets = peer_set_indices(data.assignment, population)
        counts = np.zeros((population.H, R), dtype=np.int64)
        np.add.at(counts, (attributes, peer_sets), 1)
        return cls(attributes, peer_sets, np.asarray(data.outcomes, dtype=float), counts)

    def cell_values(self, a: int, k: int) -> np.ndarray:
        return self.outcomes[(self.attributes == a) & (self.peer_sets == k)]

    def cell_sums(self, power: int = 1) -> np.ndarray:
        """(H, R) exactly rounded sums of Y**power per cell"""
        H, R = self.counts.shape
        sums = np.zeros((H, R))
        for a in range(H):
            for k in range(R):
                sums[a, k] = math.fsum(self.cell_values(a, k) ** power)
        return sums


def _check_design(data: OutcomeData, kernel: ProbabilityKernel) -> None:
    if tuple(data.population.counts) != tuple(kernel.counts) or data.population.K != kernel.K:
        raise ValidationError("Kernel was built for a different population")
    if kernel.design.is_complete:
        observed = composition_vector(data.assignment, data.population)
        if observed != kernel.design.composition:
            raise ValidationError(
                f"Observed composition {observed} does not match the design vector "
                f"{kernel.design.composition}")


def _ht_denominators(kernel: ProbabilityKernel) -> np.ndarray:
    # n_[a] * pi_[a](r) taken from the exact rationals, so CR gives n_[a]r exactly
    return np.array([[float(n_a * p) if p else np.nan for p in row]
                     for n_a, row in zip(kernel.counts, kernel.pi1_exact)])


def cell_estimates(data: OutcomeData, kernel: ProbabilityKernel,
                   cells: Optional[ObservedCells] = None) -> np.ndarray:
    """(H, R) array of Yhat_[a](r); nan where pi_[a](r) == 0"""
    _check_design(data, kernel)
    cells = cells or ObservedCells.from_data(data, kernel.R)
    return cells.cell_sums() / _ht_denominators(kernel)


@dataclass
class VarianceComponents:
    """Unbiased estimates of the finite-population quantities in the variance formulas"""
    s2: np.ndarray               # (H, R) S^2_[a](r)
    mean_square: np.ndarray      # (H, R) Ybar^2_[a](r)
    pair_product: np.ndarray     # (H, R, R) average of Y_i(r) Y_j(r') over pairs i != j within a
    cross_product: np.ndarray    # (H, H, R, R) Ybar_[a](r) Ybar_[a'](r') for a != a'

    def to_dict(self) -> Dict[str, Any]:
        return {
            's2': self.s2.tolist(),
            'mean_square': self.mean_square.tolist(),
        }


def _pairwise_ratio(kernel: ProbabilityKernel) -> np.ndarray:
    """pi_[a](r) pi_[a'](r') / pi_[a][a'](r, r'), nan where the joint probability is 0"""
    product = kernel.pi1[:, None, :, None] * kernel.pi1[None, :, None, :]
    with np.errstate(divide='ignore', invalid='ignore'):
        return np.where(kernel.pi2 > 0, product / kernel.pi2, np.nan)


def variance_components(data: OutcomeData, kernel: ProbabilityKernel,
                        cells: Optional[ObservedCells] = None,
                        yhat: Optional[np.ndarray] = None) -> VarianceComponents:
    """Unbiased estimators of S^2_[a](r), Ybar^2_[a](r) and the pair and cross products.

    A component is nan when the design makes it inestimable, i.e. when the joint
    probability it divides by is zero (under complete randomization: n_[a]r < 2).
    """
    cells = cells or ObservedCells.from_data(data, kernel.R)
    if yhat is None:
        yhat = cell_estimates(data, kernel, cells)
    H, R = kernel.H, kernel.R
    n_a = np.asarray(kernel.counts, dtype=float)[:, None]
    attr = np.arange(H)
    diag = np.arange(R)
    pi = kernel.pi1
    pi_same = kernel.pi2[attr, attr]                 # (H, R, R)
    pi_rr = pi_same[:, diag, diag]                   # (H, R)
    c_rr = kernel.c[attr, attr][:, diag, diag]

    with np.errstate(divide='ignore', invalid='ignore'):
        if kernel.design.is_complete:
            # Reduces to the within-cell sample variance
            s2 = np.full((H, R), np.nan)
            for a in range(H):
                for k in range(R):
                    values = cells.cell_values(a, k)
                    if values.size >= 2:
                        s2[a, k] = math.fsum((values - yhat[a, k]) ** 2) / (values.size - 1)
        else:
            lead = np.where((pi_rr > 0) & (n_a > 1), n_a * pi ** 2 / ((n_a - 1) * pi_rr), np.nan)
            inner = (n_a + c_rr) / (n_a ** 2 * pi) * cells.cell_sums(2) - yhat ** 2
            s2 = lead * inner
        mean_square = (n_a * yhat ** 2 - (kernel.b - 1) * s2) / (n_a + c_rr)

        ratio = _pairwise_ratio(kernel)
        ratio_same = ratio[attr, attr]
        pair_product = (n_a[:, :, None] / (n_a[:, :, None] - 1)) * ratio_same \
            * yhat[:, :, None] * yhat[:, None, :]
        pair_product[:, diag, diag] = np.nan
        cross_product = ratio * yhat[:, None, :, None] * yhat[None, :, None, :]
        cross_product[attr, attr] = np.nan

    return VarianceComponents(s2, mean_square, pair_product, cross_product)


def _term(coefficient: float, value: float) -> float:
    # Terms whose design coefficient is exactly zero drop out even if the component is nan
    return 0.0 if coefficient == 0 else coefficient * value


def subgroup_bracket(kernel: ProbabilityKernel, a: int, k: int, k2: int,
                     s2: np.ndarray, mean_square: np.ndarray, pair_product: np.ndarray,
                     s2_difference: float = 0.0) -> float:
    """n_[a] * Var(tau_[a](r, r')) from the given components"""
    b, c = kernel.b, kernel.c
    return (
        b[a, k] * s2[a, k] + b[a, k2] * s2[a, k2] - s2_difference
        + _term(c[a, a, k, k], mean_square[a, k])
        + _term(c[a, a, k2, k2], mean_square[a, k2])
        - 2 * _term(c[a, a, k, k2], pair_product[a, k, k2])
    )


def cross_bracket(kernel: ProbabilityKernel, a: int, a2: int, k: int, k2: int,
                  cross_product: np.ndarray) -> float:
    c = kernel.c[a, a2]
    x = cross_product[a, a2]
    return (_term(c[k, k], x[k, k]) + _term(c[k2, k2], x[k2, k2])
            - _term(c[k, k2], x[k, k2]) - _term(c[k2, k], x[k2, k]))


def subgroup_variance(kernel: ProbabilityKernel, a: int, k: int, k2: int,
                      s2: np.ndarray, mean_square: np.ndarray, pair_product: np.ndarray,
                      s2_difference: float = 0.0) -> float:
    return subgroup_bracket(kernel, a, k, k2, s2, mean_square, pair_product,
                            s2_difference) / kernel.counts[a]


def overall_variance(kernel: ProbabilityKernel, k: int, k2: int,
                     s2: np.ndarray, mean_square: np.ndarray, pair_product: np.ndarray,
                     cross_product: np.ndarray,
                     s2_difference: Optional[Sequence[float]] = None) -> float:
    n = kernel.n
    weights = np.asarray(kernel.counts, dtype=float) / n
    total = 0.0
    for a in range(kernel.H):
        dropped = 0.0 if s2_difference is None else s2_difference[a]
        total += weights[a] * subgroup_bracket(kernel, a, k, k2, s2, mean_square,
                                               pair_product, dropped)
        for a2 in range(kernel.H):
            if a2 != a:
                total += math.sqrt(weights[a] * weights[a2]) * cross_bracket(
                    kernel, a, a2, k, k2, cross_product)
    return total / n


def wald_interval(estimate: float, variance: float, alpha: float) -> Tuple[float, float]:
    """estimate +/- z_{1-alpha/2} * sqrt(variance), normal quantile"""
    if not 0 < alpha < 1:
        raise ValidationError(f"alpha must lie in (0, 1), got {alpha}")
    if variance < 0:
        raise ValidationError(f"Variance must be non-negative, got {variance}")
    half_width = norm.ppf(1 - alpha / 2) * math.sqrt(variance)
    return estimate - half_width, estimate + half_width


@dataclass
class ContrastEstimate:
    """One peer effect tau_[a](r, r') (attribute set) or tau(r, r') (attribute None)"""
    attribute: Optional[int]   # 0-based; None for the population-weighted effect
    r: int
    r2: int
    estimate: float
    variance: Optional[float] = None
    lower: Optional[float] = None
    upper: Optional[float] = None
    note: Optional[str] = None

    def to_dict(self, peer_labels: Sequence[str], attribute_labels: Sequence[str]) -> Dict[str, Any]:
        return {
            'attribute': None if self.attribute is None else attribute_labels[self.attribute],
            'r': peer_labels[self.r],
            'r_prime': peer_labels[self.r2],
            'r_index': self.r + 1,
            'r_prime_index': self.r2 + 1,
            'estimate': self.estimate,
            'variance': self.variance,
            'std_error': math.sqrt(self.variance) if self.variance is not None and self.variance >= 0 else None,
            'lower': self.lower,
            'upper': self.upper,
            'note': self.note,
        }


@dataclass
class EstimateReport:
    """Point estimates, variance estimates and intervals for one dataset"""
    kernel: ProbabilityKernel
    alpha: float
    yhat: np.ndarray
    observed_counts: np.ndarray
    subgroup: List[ContrastEstimate] = field(default_factory=list)
    overall: List[ContrastEstimate] = field(default_factory=list)
    components: Optional[VarianceComponents] = None

    @property
    def weights(self) -> np.ndarray:
        return np.asarray(self.kernel.counts, dtype=float) / self.kernel.n

    def effect(self, attribute: Optional[int], r: int, r2: int) -> ContrastEstimate:
        pool = self.overall if attribute is None else self.subgroup
        for item in pool:
            if item.attribute == attribute and (item.r, item.r2) == (r, r2):
                return item
        raise KeyError((attribute, r, r2))

    def to_dict(self, peer_labels: Sequence[str], attribute_labels: Sequence[str]) -> Dict[str, Any]:
        cells = []
        for a in range(self.kernel.H):
            for k in range(self.kernel.R):
                cells.append({
                    'attribute': attribute_labels[a],
                    'r': peer_labels[k],
                    'r_index': k + 1,
                    'n_obs': int(self.observed_counts[a, k]),
                    'pi': float(self.kernel.pi1[a, k]),
                    'estimate': float(self.yhat[a, k]),
                    's2': None if self.components is None else float(self.components.s2[a, k]),
                })
        return {
            'design': self.kernel.design.to_dict(),
            'alpha': self.alpha,
            'weights': self.weights.tolist(),
            'cells': cells,
            'subgroup_effects': [e.to_dict(peer_labels, attribute_labels) for e in self.subgroup],
            'overall_effects': [e.to_dict(peer_labels, attribute_labels) for e in self.overall],
        }


def point_estimates(data: OutcomeData, kernel: ProbabilityKernel,
                    contrasts: Optional[Sequence[Contrast]] = None,
                    alpha: float = 0.05,
                    errors: Optional[ErrorManager] = None) -> EstimateReport:
    """Yhat_[a](r), tau_[a](r, r') and tau(r, r') without variances"""
    errors = resolve_error_manager(errors)
    contrasts = check_contrasts(contrasts if contrasts is not None else all_contrasts(kernel.R), kernel.R)
    cells = ObservedCells.from_data(data, kernel.R)
    yhat = cell_estimates(data, kernel, cells)
    report = EstimateReport(kernel, alpha, yhat, cells.counts)

    undefined = [(a, k) for a in range(kernel.H) for k in range(kernel.R) if np.isnan(yhat[a, k])]
    if undefined:
        errors.warn(
            f"{len(undefined)} (attribute, peer set) cells have zero assignment probability; "
            "contrasts touching them are undefined",
            ErrorCategory.ESTIMATION,
            cells=[[a + 1, k + 1] for a, k in undefined],
        )

    weights = report.weights
    for k, k2 in contrasts:
        per_attribute = []
        for a in range(kernel.H):
            value = float(yhat[a, k] - yhat[a, k2])
            per_attribute.append(value)
            report.subgroup.append(ContrastEstimate(
                a, k, k2, value, note=None if math.isfinite(value) else 'undefined cell'))
        overall = math.fsum(w * v for w, v in zip(weights, per_attribute)) \
            if all(math.isfinite(v) for v in per_attribute) else float('nan')
        report.overall.append(ContrastEstimate(
            None, k, k2, overall, note=None if math.isfinite(overall) else 'undefined cell'))
    return report


def attach_interval(effect: ContrastEstimate, variance: float, alpha: float,
                     errors: ErrorManager) -> None:
    if not math.isfinite(effect.estimate):
        return
    if not math.isfinite(variance):
        effect.note = 'variance unavailable'
        errors.warn("Variance estimate unavailable (cell too small); interval suppressed",
                    ErrorCategory.ESTIMATION, attribute=_label(effect.attribute),
                    r=effect.r + 1, r_prime=effect.r2 + 1)
        return
    effect.variance = float(variance)
    if variance < 0:
        effect.note = 'negative variance estimate; interval suppressed'
        errors.warn("Negative variance estimate; interval suppressed", ErrorCategory.ESTIMATION,
                    attribute=_label(effect.attribute), r=effect.r + 1, r_prime=effect.r2 + 1,
                    variance=float(variance))
        return
    effect.lower, effect.upper = wald_interval(effect.estimate, variance, alpha)


def _label(attribute: Optional[int]) -> Optional[int]:
    return None if attribute is None else attribute + 1


def variance_estimate(data: OutcomeData, kernel: ProbabilityKernel,
                      contrasts: Optional[Sequence[Contrast]] = None,
                      components: Optional[VarianceComponents] = None
                      ) -> Dict[Tuple[Optional[int], int, int], float]:
    """Conservative plug-in variance estimates keyed by (attribute or None, r, r').

    The unidentifiable S^2_[a](r - r') terms are dropped; all other terms use the
    unbiased component estimators, so a realized value may be negative.
    """
    contrasts = check_contrasts(contrasts if contrasts is not None else all_contrasts(kernel.R), kernel.R)
    if components is None:
        components = variance_components(data, kernel)
    result: Dict[Tuple[Optional[int], int, int], float] = {}
    for k, k2 in contrasts:
        for a in range(kernel.H):
            result[(a, k, k2)] = float(subgroup_variance(
                kernel, a, k, k2, components.s2, components.mean_square, components.pair_product))
        result[(None, k, k2)] = float(overall_variance(
            kernel, k, k2, components.s2, components.mean_square, components.pair_product,
            components.cross_product))
    return result


def estimate_effects(data: OutcomeData, kernel: ProbabilityKernel,
                     contrasts: Optional[Sequence[Contrast]] = None,
                     alpha: float = 0.05,
                     errors: Optional[ErrorManager] = None) -> EstimateReport:
    """Point estimates with conservative variances and Wald intervals"""
    errors = resolve_error_manager(errors)
    report = point_estimates(data, kernel, contrasts, alpha, errors)
    cells = ObservedCells.from_data(data, kernel.R)
    report.components = variance_components(data, kernel, cells, report.yhat)
    variances = variance_estimate(data, kernel, [(e.r, e.r2) for e in report.overall],
                                  report.components)
    for effect in report.subgroup + report.overall:
        attach_interval(effect, variances[(effect.attribute, effect.r, effect.r2)], alpha, errors)
    logger.debug("Estimated %d contrasts under %s design", len(report.overall),
                 kernel.design.kind.value)
    return report
