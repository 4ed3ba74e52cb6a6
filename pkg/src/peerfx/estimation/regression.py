"""
Least-squares fit of the fully interacted attribute-by-peer-set model
"""

from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from ..design.kernel import ProbabilityKernel
from ..models.population import OutcomeData
from ..utils.error_handling import ComputationError, UndefinedCellError, ValidationError
from .estimator import Contrast, ObservedCells, all_contrasts, cell_estimates, check_contrasts

AGREEMENT_TOLERANCE = 1e-9


@dataclass
class RegressionFit:
    """Constrained coefficients, fitted cell values and Huber-White variances"""
    intercept: float
    attribute_effects: np.ndarray    # (H,) sum to zero
    peer_effects: np.ndarray         # (R,) sum to zero
    interactions: np.ndarray         # (H, R) rows and columns sum to zero
    fitted: np.ndarray               # (H, R) mu_hat_[a]r
    robust_cell_variance: np.ndarray  # (H, R) HW variance of each fitted cell value
    contrasts: List[Dict[str, Any]]
    max_gap: float = 0.0             # largest |least-squares - design-based| cell difference

    def to_dict(self, peer_labels: Sequence[str], attribute_labels: Sequence[str]) -> Dict[str, Any]:
        return {
            'intercept': self.intercept,
            'attribute_effects': dict(zip(attribute_labels, self.attribute_effects.tolist())),
            'peer_set_effects': dict(zip(peer_labels, self.peer_effects.tolist())),
            'interactions': self.interactions.tolist(),
            'fitted': self.fitted.tolist(),
            'max_gap': self.max_gap,
            'contrasts': [
                {**c, 'attribute': attribute_labels[c['attribute']],
                 'r': peer_labels[c['r']], 'r_prime': peer_labels[c['r_prime']]}
                for c in self.contrasts
            ],
        }


def indicator_matrix(cells: ObservedCells) -> np.ndarray:
    """(n, H*R) design matrix with one indicator per (attribute, peer set) cell"""
    H, R = cells.counts.shape
    columns = cells.attributes * R + cells.peer_sets
    return np.eye(H * R)[columns]


def sandwich_covariance(X: np.ndarray, residuals: np.ndarray) -> np.ndarray:
    """Huber-White (HC0) covariance (X'X)^-1 X' diag(e^2) X (X'X)^-1"""
    bread = np.linalg.inv(X.T @ X)
    meat = X.T @ (residuals[:, None] ** 2 * X)
    return bread @ meat @ bread


def regression_check(data: OutcomeData, kernel: ProbabilityKernel,
                     contrasts: Optional[Sequence[Contrast]] = None) -> RegressionFit:
    """Least-squares fit of Y ~ attribute * peer set with robust contrast variances.

    With one indicator per (attribute, peer set) cell the least-squares solution
    is the vector of cell means, so fitted differences equal the subgroup effect
    estimates. The fit is checked against the design-based cell estimates.
    """
    if not kernel.design.is_complete:
        raise ValidationError("The regression equivalence holds for complete-randomization kernels only")
    cells = ObservedCells.from_data(data, kernel.R)
    empty = [(a + 1, k + 1) for a in range(kernel.H) for k in range(kernel.R) if cells.counts[a, k] == 0]
    if empty:
        raise UndefinedCellError(f"Regression needs every cell nonempty; {len(empty)} cells are empty",
                                 empty)
    contrasts = check_contrasts(contrasts if contrasts is not None else all_contrasts(kernel.R), kernel.R)

    X = indicator_matrix(cells)
    solution, _, rank, _ = np.linalg.lstsq(X, cells.outcomes, rcond=None)
    if rank < X.shape[1]:
        raise ComputationError(f"Indicator design has rank {rank} < {X.shape[1]}")
    fitted = solution.reshape(kernel.H, kernel.R)
    design_based = cell_estimates(data, kernel, cells)
    gap = float(np.max(np.abs(fitted - design_based)))
    scale = max(1.0, float(np.max(np.abs(design_based))))
    if gap > AGREEMENT_TOLERANCE * scale:
        raise ComputationError(
            f"Least-squares cell values differ from the design-based estimates by {gap:.3g}")

    intercept = float(fitted.mean())
    attribute_effects = fitted.mean(axis=1) - intercept
    peer_effects = fitted.mean(axis=0) - intercept
    interactions = fitted - (intercept + attribute_effects[:, None] + peer_effects[None, :])

    residuals = cells.outcomes - X @ solution
    covariance = sandwich_covariance(X, residuals)
    robust = np.diag(covariance).reshape(kernel.H, kernel.R)

    rows = []
    for k, k2 in contrasts:
        for a in range(kernel.H):
            i, j = a * kernel.R + k, a * kernel.R + k2
            rows.append({
                'attribute': a,
                'r': k,
                'r_prime': k2,
                'estimate': float(fitted[a, k] - fitted[a, k2]),
                'robust_variance': float(covariance[i, i] + covariance[j, j] - 2 * covariance[i, j]),
            })
    return RegressionFit(intercept, attribute_effects, peer_effects, interactions, fitted, robust, rows,
                         gap)
