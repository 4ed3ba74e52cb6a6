"""
Fiducial distribution of the optimal composition vector
"""

import logging
from collections import Counter
from dataclasses import dataclass
from typing import Any, Dict, List, Sequence, Tuple

import numpy as np
from scipy import linalg

from ..core.spaces import cached_space
from ..estimation.joint import JointReport
from ..utils.error_handling import ComputationError, ValidationError
from ..utils.helpers import derive_rng, validate_seed
from ..utils.performance import map_chunks
from .solver import DEFAULT_ENUMERATION_LIMIT, Composition, CompositionSolver, objective_coefficients

logger = logging.getLogger(__name__)

DEFAULT_PSD_TOLERANCE = 1e-8


def covariance_root(covariance: np.ndarray, tolerance: float = DEFAULT_PSD_TOLERANCE) -> np.ndarray:
    """Symmetric square root of a PSD matrix, clipping slightly negative eigenvalues.

    The projected covariance is rank deficient, so exact zeros show up as tiny
    negatives after rounding.
    """
    symmetric = (covariance + covariance.T) / 2
    eigenvalues, eigenvectors = linalg.eigh(symmetric)
    scale = float(np.max(np.abs(eigenvalues))) if eigenvalues.size else 0.0
    if eigenvalues.size and eigenvalues.min() < -tolerance * scale:
        raise ComputationError(
            f"Covariance estimate is not positive semidefinite (smallest eigenvalue "
            f"{eigenvalues.min():.3g}, norm {scale:.3g})")
    return eigenvectors * np.sqrt(np.clip(eigenvalues, 0.0, None))


@dataclass
class FiducialRow:
    composition: Composition
    probability: float
    outcome: float
    is_point_estimate: bool

    def to_dict(self) -> Dict[str, Any]:
        return {
            'probability': self.probability,
            'outcome': self.outcome,
            'composition': list(self.composition),
            'is_point_estimate': self.is_point_estimate,
        }


@dataclass
class FiducialResult:
    """Maximizer frequencies over fiducial draws, most frequent first"""
    rows: List[FiducialRow]
    draws: int
    seed: int
    point_estimate: Composition
    method: str

    @property
    def total_probability(self) -> float:
        return float(sum(row.probability for row in self.rows))

    def to_dict(self, group_labels: Sequence[str]) -> Dict[str, Any]:
        return {
            'draws': self.draws,
            'seed': self.seed,
            'method': self.method,
            'group_sets': list(group_labels),
            'point_estimate': list(self.point_estimate),
            'rows': [row.to_dict() for row in self.rows],
        }


def fiducial_distribution(joint: JointReport, new_counts: Sequence[int], K: int,
                          draws: int = 10000, seed: int = 0, workers: int = 1,
                          psd_tolerance: float = DEFAULT_PSD_TOLERANCE,
                          enumeration_limit: int = DEFAULT_ENUMERATION_LIMIT) -> FiducialResult:
    """Tally the maximizer of the objective over draws of the centered cell means.

    Each draw samples theta_[a] ~ N(theta_hat_[a], Cov_[a]) independently over
    attributes and solves the integer program with the draw in place of the cell
    estimates. Centering does not move the maximizer because every feasible l
    places the same number of units of each attribute. Ties within a draw are
    broken uniformly at random.
    """
    if draws < 1:
        raise ValidationError(f"draws must be at least 1, got {draws}")
    seed = validate_seed(seed)
    space = cached_space(joint.H, K)
    if space.R != joint.R:
        raise ValidationError(f"Joint report has {joint.R} peer sets, expected {space.R} for K={K}")

    solver = CompositionSolver(new_counts, K, enumeration_limit)
    point = solver.solve(joint.yhat)
    roots = np.stack([covariance_root(joint.covariance[a], psd_tolerance) for a in range(joint.H)])

    def run_chunk(start: int, stop: int) -> List[Composition]:
        winners = []
        for index in range(start, stop):
            rng = derive_rng(seed, index)
            noise = rng.standard_normal((joint.H, joint.R))
            theta = joint.theta_hat + np.einsum('hij,hj->hi', roots, noise)
            coefficients = objective_coefficients(theta, space)
            l, _, _ = solver.solve_coefficients(coefficients, rng)
            winners.append(l)
        return winners

    tally: Counter = Counter()
    for chunk in map_chunks(run_chunk, draws, workers):
        tally.update(chunk)
    logger.debug("Fiducial draws produced %d distinct maximizers", len(tally))

    def outcome(l: Composition) -> float:
        return float(np.dot(point.coefficients, l))

    ordered: List[Tuple[Composition, int]] = sorted(tally.items(), key=lambda item: (-item[1], item[0]))
    rows = [FiducialRow(l, count / draws, outcome(l), l == point.composition) for l, count in ordered]
    return FiducialResult(rows, draws, seed, point.composition, solver.method)
