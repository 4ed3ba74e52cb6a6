"""
Joint inference on the centered subgroup means under complete randomization
"""

import logging
from dataclasses import dataclass
from typing import Any, Dict, Sequence

import numpy as np

from ..design.kernel import ProbabilityKernel
from ..models.population import OutcomeData
from ..utils.error_handling import UndefinedCellError, ValidationError
from .estimator import ObservedCells, cell_estimates, variance_components

logger = logging.getLogger(__name__)


def projection_matrix(R: int) -> np.ndarray:
    """Gamma = I - 11'/R, the projection orthogonal to the constant vector"""
    return np.eye(R) - np.full((R, R), 1.0 / R)


@dataclass
class JointReport:
    """theta_hat_[a] = Gamma Yhat_[a] and its conservative covariance estimate, per attribute"""
    gamma: np.ndarray          # (R, R)
    yhat: np.ndarray           # (H, R)
    theta_hat: np.ndarray      # (H, R)
    covariance: np.ndarray     # (H, R, R)
    cell_counts: np.ndarray    # (H, R) n_[a]r

    @property
    def H(self) -> int:
        return self.theta_hat.shape[0]

    @property
    def R(self) -> int:
        return self.theta_hat.shape[1]

    def to_dict(self, attribute_labels: Sequence[str]) -> Dict[str, Any]:
        return {
            'gamma': self.gamma.tolist(),
            'blocks': [
                {
                    'attribute': attribute_labels[a],
                    'theta_hat': self.theta_hat[a].tolist(),
                    'covariance': self.covariance[a].tolist(),
                }
                for a in range(self.H)
            ],
        }


def joint_inference(data: OutcomeData, kernel: ProbabilityKernel) -> JointReport:
    """Centered estimates and the projected diagonal covariance estimator.

    Blocks are independent across attributes because complete randomization
    stratifies on the attribute.
    """
    if not kernel.design.is_complete:
        raise ValidationError("Joint inference requires a complete-randomization kernel")
    cells = ObservedCells.from_data(data, kernel.R)
    small = [(a + 1, k + 1) for a in range(kernel.H) for k in range(kernel.R) if cells.counts[a, k] < 2]
    if small:
        raise UndefinedCellError(
            f"Joint inference needs at least 2 units in every (attribute, peer set) cell; "
            f"{len(small)} cells are smaller", small)

    yhat = cell_estimates(data, kernel, cells)
    components = variance_components(data, kernel, cells, yhat)
    gamma = projection_matrix(kernel.R)
    theta_hat = yhat @ gamma   # gamma is symmetric
    covariance = np.stack([gamma @ np.diag(components.s2[a] / cells.counts[a]) @ gamma
                           for a in range(kernel.H)])
    logger.debug("Joint inference over %d attributes and %d peer sets", kernel.H, kernel.R)
    return JointReport(gamma, yhat, theta_hat, covariance, cells.counts.copy())
