"""
Analysis context: configuration, diagnostics and the command workflows for peerfx
"""

import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

from .core.spaces import TreatmentSpace, cached_space, composition_vector
from .data.dataset import Dataset, read_dataset
from .design.kernel import ProbabilityKernel
from .design.kernel import kernel as build_kernel
from .design.sampler import sample
from .estimation.estimator import EstimateReport, estimate_effects
from .estimation.joint import JointReport, joint_inference
from .estimation.regression import regression_check
from .estimation.target import target_subpop_estimate
from .models.config import RunConfig
from .models.design import Design, DesignKind
from .models.population import Assignment, OutcomeData, Population
from .optimize.fiducial import fiducial_distribution
from .optimize.solver import optimal_composition
from .oracle.suite import OracleReport, run_oracle_suite
from .reporting.report_writer import build_envelope, plot_data
from .rtest.engine import randomization_test, randomization_test_table
from .rtest.statistics import NullHypothesis, Statistic, TestSpec
from .utils.config import ConfigManager
from .utils.error_handling import (
    ErrorCategory, ErrorManager, ErrorSeverity, UndefinedCellError, ValidationError,
)
from .utils.helpers import derive_rng, parse_contrasts
from .utils.performance import RunMonitor, recommended_workers

# Stream index reserved for random unit selection in target-subpopulation estimates
TARGET_STREAM = 2 ** 32


class AnalysisContext:
    """Holds the resolved configuration and diagnostics for one command run"""

    def __init__(self, config: Optional[RunConfig] = None, config_manager: Optional[ConfigManager] = None,
                 overrides: Optional[Dict[str, Any]] = None):
        self.logger = logging.getLogger(__name__)
        self.config_manager = config_manager or ConfigManager()
        self.config = config or self.config_manager.load(overrides)
        self.error_manager = ErrorManager()
        self.logger.debug("Analysis context ready with configuration %s", self.config.to_dict())

    # Configuration views

    @property
    def alpha(self) -> float:
        return self.config.inference.alpha

    @property
    def seed(self) -> int:
        return self.config.simulation.seed

    @property
    def workers(self) -> int:
        return recommended_workers(self.config.simulation.workers)

    def contrasts(self) -> Optional[List[Tuple[int, int]]]:
        """Configured contrasts as 0-based pairs, None for all"""
        return parse_contrasts(self.config.inference.contrasts)

    def envelope(self, command: str, result: Any, population: Optional[Population] = None,
                 space: Optional[TreatmentSpace] = None) -> Dict[str, Any]:
        if space is None and population is not None:
            space = TreatmentSpace.for_population(population)
        labels = population.attribute_labels if population is not None else ()
        return build_envelope(command, self.config.echo(), result, space, labels, self.error_manager)

    # Designs

    def assignment_design(self, population: Population) -> Design:
        """Design used to draw new assignments"""
        inference = self.config.inference
        if inference.design is DesignKind.COMPLETE_RANDOMIZATION:
            if inference.composition is None:
                raise ValidationError("Design 'cr' needs a composition vector (--composition)")
            return Design.complete_randomization(inference.composition)
        return Design.random_partition()

    def analysis_design(self, data: OutcomeData, require_complete: bool = False) -> Design:
        """Design whose kernel drives estimation.

        Random-partition data are analysed conditionally on the observed composition
        unless the configuration asks for unconditional kernels.
        """
        inference = self.config.inference
        observed = composition_vector(data.assignment, data.population)
        if inference.design is DesignKind.COMPLETE_RANDOMIZATION:
            composition = inference.composition if inference.composition is not None else observed
            if tuple(composition) != observed:
                raise ValidationError(
                    f"Observed composition {observed} differs from the configured vector {tuple(composition)}")
            return Design.complete_randomization(composition)
        if inference.unconditional and not require_complete:
            return Design.random_partition()
        if inference.unconditional:
            self.error_manager.report(
                "Joint inference needs complete-randomization kernels; conditioning on the observed composition",
                ErrorSeverity.LOW, ErrorCategory.DESIGN, {'composition': list(observed)})
        else:
            self.error_manager.report(
                "Random-partition data analysed conditionally on the observed composition",
                ErrorSeverity.LOW, ErrorCategory.DESIGN, {'composition': list(observed)})
        return Design.complete_randomization(observed, conditioned=True)

    def test_design(self, data: OutcomeData) -> Design:
        """Reference design for randomization tests: the design that produced the data"""
        inference = self.config.inference
        if inference.design is DesignKind.COMPLETE_RANDOMIZATION:
            return self.analysis_design(data)
        return Design.random_partition()

    # Commands

    def load(self, path: Path, K: Optional[int] = None) -> Dataset:
        return read_dataset(path, K)

    def enumerate_spaces(self, H: int, K: int) -> Dict[str, Any]:
        space = cached_space(H, K)
        return {
            'H': H,
            'K': K,
            'peer_set_count': space.R,
            'group_set_count': space.T,
        }

    def assign(self, dataset: Dataset) -> Assignment:
        population = dataset.population
        design = self.assignment_design(population)
        with RunMonitor('assign'):
            assignment = sample(design, population, derive_rng(self.seed, 0))
        self.logger.debug("Drew a %s assignment of %d groups", design.kind.value, assignment.m)
        return assignment

    def probabilities(self, population: Population) -> ProbabilityKernel:
        return build_kernel(self.assignment_design(population), population)

    def estimate(self, data: OutcomeData, target_attribute: Optional[int] = None) -> Dict[str, Any]:
        """Effect estimates plus the complete-randomization extras when they are available"""
        population = data.population
        space = TreatmentSpace.for_population(population)
        peer_labels = space.render_peer_sets(population.attribute_labels)
        labels = population.attribute_labels
        with RunMonitor('estimate'):
            prob = build_kernel(self.analysis_design(data), population)
            contrasts = self.contrasts()
            report = estimate_effects(data, prob, contrasts, self.alpha, self.error_manager)
            result: Dict[str, Any] = {'estimates': report.to_dict(peer_labels, labels)}

            if prob.design.is_complete:
                result['joint'] = self._optional(lambda: joint_inference(data, prob).to_dict(labels), 'joint inference')
                result['regression'] = self._optional(
                    lambda: regression_check(data, prob, contrasts).to_dict(peer_labels, labels), 'regression')
            if target_attribute is not None:
                rng = derive_rng(self.seed, TARGET_STREAM)
                target = target_subpop_estimate(data, prob.design, target_attribute, rng, contrasts, self.alpha,
                                                self.error_manager)
                result['target'] = target.to_dict(data, peer_labels)
            if self.config.output.emit_plot_data:
                result['plot_data'] = plot_data(report, labels, peer_labels, self.alpha)
        return result

    def _optional(self, build, name: str) -> Optional[Dict[str, Any]]:
        try:
            return build()
        except UndefinedCellError as e:
            self.error_manager.warn(f"{name} skipped: {e}", ErrorCategory.ESTIMATION, cells=e.cells)
            return None

    def estimate_report(self, data: OutcomeData) -> EstimateReport:
        prob = build_kernel(self.analysis_design(data), data.population)
        return estimate_effects(data, prob, self.contrasts(), self.alpha, self.error_manager)

    def test(self, data: OutcomeData, null: Optional[NullHypothesis] = None,
             statistic: Optional[Statistic] = None, attribute: Optional[int] = None) -> Dict[str, Any]:
        """One randomization test, or the full table when neither null nor statistic is given"""
        design = self.test_design(data)
        simulation = self.config.simulation
        labels = data.population.attribute_labels
        with RunMonitor('test'):
            if null is None and statistic is None:
                rows = randomization_test_table(data, design, simulation.draws, self.seed,
                                                simulation.enumeration_limit, self.workers,
                                                errors=self.error_manager)
                return {'design': design.to_dict(), 'table': rows}
            null = null or NullHypothesis()
            if statistic is None:
                statistic = Statistic.CONTRAST if null.is_sharp else Statistic.SUBGROUP_CONTRAST
            spec = TestSpec(null, statistic, attribute, simulation.draws, self.seed)
            result = randomization_test(data, design, spec, simulation.enumeration_limit, self.workers,
                                        keep_reference=True, errors=self.error_manager)
        return {'design': design.to_dict(), 'test': result.to_dict(labels)}

    def optimize(self, data: OutcomeData, new_counts: Sequence[int]) -> Dict[str, Any]:
        population = data.population
        space = TreatmentSpace.for_population(population)
        with RunMonitor('optimize'):
            report = self.estimate_report(data)
            result = optimal_composition(report.yhat, new_counts, population.K,
                                         self.config.optimization.solver_enumeration_limit)
        return {
            'new_counts': list(new_counts),
            'optimum': result.to_dict(space.render_group_sets(population.attribute_labels)),
        }

    def joint(self, data: OutcomeData) -> JointReport:
        prob = build_kernel(self.analysis_design(data, require_complete=True), data.population)
        return joint_inference(data, prob)

    def fiducial(self, data: OutcomeData, new_counts: Sequence[int]) -> Dict[str, Any]:
        population = data.population
        space = TreatmentSpace.for_population(population)
        with RunMonitor('fiducial'):
            joint = self.joint(data)
            result = fiducial_distribution(
                joint, new_counts, population.K,
                draws=self.config.simulation.draws,
                seed=self.seed,
                workers=self.workers,
                psd_tolerance=self.config.optimization.psd_tolerance,
                enumeration_limit=self.config.optimization.solver_enumeration_limit,
            )
        return {
            'new_counts': list(new_counts),
            'fiducial': result.to_dict(space.render_group_sets(population.attribute_labels)),
        }

    def oracle_check(self, suite: str) -> OracleReport:
        with RunMonitor('oracle-check'):
            return run_oracle_suite(suite, cap=self.config.simulation.oracle_cap)
