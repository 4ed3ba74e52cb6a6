"""Tests for joint inference, the regression decomposition and target subpopulations."""

import numpy as np
import pytest

from peerfx.core.spaces import composition_vector
from peerfx.design.kernel import kernel
from peerfx.estimation.estimator import estimate_effects
from peerfx.estimation.joint import joint_inference, projection_matrix
from peerfx.estimation.estimator import ObservedCells
from peerfx.estimation.regression import indicator_matrix, regression_check, sandwich_covariance
from peerfx.estimation.target import enumerate_target_configurations, target_subpop_estimate
from peerfx.models.design import Design
from peerfx.models.population import Assignment, OutcomeData, Population
from peerfx.utils.error_handling import UndefinedCellError, ValidationError


def balanced_data(outcomes=(1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0)) -> OutcomeData:
    population = Population.from_counts((4, 4), K=1)
    return OutcomeData(population, Assignment(((0, 1), (2, 4), (3, 5), (6, 7))), tuple(outcomes))


def cr_design(data: OutcomeData) -> Design:
    return Design.complete_randomization(composition_vector(data.assignment, data.population))


def cr_kernel(data: OutcomeData):
    return kernel(cr_design(data), data.population)


class TestProjection:
    def test_two_peer_sets(self):
        assert projection_matrix(2).tolist() == [[0.5, -0.5], [-0.5, 0.5]]

    def test_annihilates_constants(self):
        assert np.allclose(projection_matrix(5) @ np.ones(5), 0.0)


class TestJointInference:
    def test_centered_estimates(self):
        data = balanced_data()
        report = joint_inference(data, cr_kernel(data))
        assert report.theta_hat.tolist() == [[-1.0, 1.0], [-1.0, 1.0]]
        assert np.allclose(report.theta_hat.sum(axis=1), 0.0)

    def test_covariance_is_projected_diagonal(self):
        data = balanced_data()
        report = joint_inference(data, cr_kernel(data))
        expected = np.array([[0.125, -0.125], [-0.125, 0.125]])
        for a in range(2):
            assert np.allclose(report.covariance[a], expected)
            assert np.allclose(report.covariance[a].sum(axis=1), 0.0)

    def test_small_cells(self, toy_data, toy_cr_design):
        with pytest.raises(UndefinedCellError) as info:
            joint_inference(toy_data, kernel(toy_cr_design, toy_data.population))
        assert (1, 1) in info.value.cells

    def test_requires_complete_randomization(self):
        data = balanced_data()
        with pytest.raises(ValidationError):
            joint_inference(data, kernel(Design.random_partition(), data.population))

    def test_to_dict(self):
        data = balanced_data()
        document = joint_inference(data, cr_kernel(data)).to_dict(["A", "B"])
        assert [block['attribute'] for block in document['blocks']] == ["A", "B"]


class TestRegression:
    def test_point_estimates_match(self, rng):
        outcomes = tuple(float(y) for y in rng.normal(size=8))
        data = balanced_data(outcomes)
        prob = cr_kernel(data)
        fit = regression_check(data, prob)
        report = estimate_effects(data, prob)
        for row in fit.contrasts:
            expected = report.effect(row['attribute'], row['r'], row['r_prime']).estimate
            assert row['estimate'] == pytest.approx(expected, rel=1e-12, abs=1e-12)
        assert fit.max_gap < 1e-12

    def test_robust_variance_cell_factors(self):
        data = balanced_data()
        fit = regression_check(data, cr_kernel(data))
        # ((n0 - 1) / n0^2 + (n1 - 1) / n1^2) * s^2 with n0 = n1 = 2 and s^2 = 0.5
        assert fit.contrasts[0]['robust_variance'] == pytest.approx(0.25)

    def test_constrained_coefficients(self):
        data = balanced_data()
        fit = regression_check(data, cr_kernel(data))
        assert fit.intercept == pytest.approx(4.5)
        assert fit.attribute_effects.sum() == pytest.approx(0.0)
        assert fit.peer_effects.sum() == pytest.approx(0.0)
        assert np.allclose(fit.interactions.sum(axis=0), 0.0)
        assert np.allclose(fit.intercept + fit.attribute_effects[:, None] + fit.peer_effects[None, :]
                           + fit.interactions, fit.fitted)

    def test_indicator_matrix(self):
        data = balanced_data()
        X = indicator_matrix(ObservedCells.from_data(data, 2))
        assert X.shape == (8, 4)
        assert X.sum(axis=1).tolist() == [1.0] * 8
        assert X.sum(axis=0).tolist() == [2.0, 2.0, 2.0, 2.0]

    def test_least_squares_fit_is_cell_means(self):
        data = balanced_data()
        fit = regression_check(data, cr_kernel(data))
        assert np.allclose(fit.fitted, [[1.5, 3.5], [5.5, 7.5]])
        assert fit.max_gap == pytest.approx(0.0, abs=1e-12)

    def test_sandwich_of_orthogonal_indicators_is_diagonal(self):
        X = np.eye(2)[[0, 0, 1, 1, 1]]
        residuals = np.array([1.0, -1.0, 2.0, 0.0, -2.0])
        covariance = sandwich_covariance(X, residuals)
        assert np.allclose(covariance, np.diag([2.0 / 4, 8.0 / 9]))

    def test_empty_cell(self, toy_data, toy_cr_design):
        with pytest.raises(UndefinedCellError):
            regression_check(toy_data, kernel(toy_cr_design, toy_data.population))

    def test_matches_statsmodels_hc0(self, rng):
        sm = pytest.importorskip("statsmodels.api")
        outcomes = tuple(float(y) for y in rng.normal(size=8))
        data = balanced_data(outcomes)
        fit = regression_check(data, cr_kernel(data))
        # One indicator per (attribute, peer set) cell in canonical order
        cells = np.array([0, 0, 1, 1, 2, 2, 3, 3])
        design_matrix = np.eye(4)[cells]
        model = sm.OLS(np.array(outcomes), design_matrix).fit(cov_type='HC0')
        covariance = model.cov_params()
        robust = covariance[0, 0] + covariance[1, 1] - 2 * covariance[0, 1]
        assert fit.contrasts[0]['robust_variance'] == pytest.approx(robust, rel=1e-12)


class TestTargetSubpopulation:
    @staticmethod
    def one_per_group() -> OutcomeData:
        # Each group holds exactly one attribute-1 unit
        population = Population.from_counts((3, 3, 3), K=2)
        assignment = Assignment(((0, 3, 4), (1, 5, 6), (2, 7, 8)))
        return OutcomeData(population, assignment, (1.0, 4.0, 9.0, 0.0, 2.0, 5.0, 3.0, 8.0, 6.0))

    def test_deterministic_selection_matches_subgroup_estimate(self, rng, errors):
        data = self.one_per_group()
        prob = cr_kernel(data)
        report = estimate_effects(data, prob, errors=errors)
        target = target_subpop_estimate(data, cr_design(data), 0, rng, errors=errors)
        assert target.selected == (0, 1, 2)
        for effect in target.effects:
            if np.isfinite(effect.estimate):
                assert effect.estimate == pytest.approx(report.effect(0, effect.r, effect.r2).estimate)

    def test_constant_outcomes(self, rng, errors):
        data = balanced_data((5.0,) * 8)
        target = target_subpop_estimate(data, cr_design(data), 0, rng, errors=errors)
        assert all(e.estimate == 0.0 for e in target.effects)

    def test_configuration_average_equals_subgroup_effect(self):
        data = balanced_data()
        averages = enumerate_target_configurations(data, 0)
        report = estimate_effects(data, cr_kernel(data))
        assert averages[(0, 1)] == pytest.approx(report.effect(0, 0, 1).estimate, abs=1e-10)

    def test_one_unit_per_group(self, rng, errors):
        data = balanced_data()
        target = target_subpop_estimate(data, cr_design(data), 1, rng, errors=errors)
        groups = [data.assignment.group_of(i) for i in target.selected]
        assert len(groups) == len(set(groups))
        assert all(data.population.attributes[i] == 2 for i in target.selected)

    def test_unknown_attribute(self, rng):
        data = balanced_data()
        with pytest.raises(ValidationError):
            target_subpop_estimate(data, cr_design(data), 3, rng)

    def test_random_partition_rejected(self, rng):
        with pytest.raises(ValidationError, match="complete-randomization"):
            target_subpop_estimate(balanced_data(), Design.random_partition(), 0, rng)

    def test_composition_must_match(self, rng):
        with pytest.raises(ValidationError, match="differs"):
            target_subpop_estimate(balanced_data(), Design.complete_randomization((2, 0, 2)), 0, rng)
