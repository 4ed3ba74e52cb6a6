"""Tests for the subgroup estimators, variance components and intervals."""

import math

import numpy as np
import pytest

from peerfx.design.kernel import kernel
from peerfx.estimation.estimator import (
    all_contrasts, cell_estimates, check_contrasts, estimate_effects, point_estimates,
    variance_components, variance_estimate, wald_interval,
)
from peerfx.models.design import Design
from peerfx.models.population import Assignment, OutcomeData, Population
from peerfx.utils.error_handling import ErrorCategory, ValidationError


def balanced_data(outcomes=(1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0)) -> OutcomeData:
    """n=8, K=1, four units of each attribute; every cell holds two units"""
    population = Population.from_counts((4, 4), K=1)
    assignment = Assignment(((0, 1), (2, 4), (3, 5), (6, 7)))
    return OutcomeData(population, assignment, tuple(outcomes))


def balanced_kernel(data: OutcomeData):
    return kernel(Design.complete_randomization((1, 2, 1)), data.population)


class TestPointEstimates:
    def test_complete_randomization_sample_means(self, toy_data, toy_cr_design, errors):
        prob = kernel(toy_cr_design, toy_data.population)
        yhat = cell_estimates(toy_data, prob)
        assert yhat[0, 1] == 1.5
        assert yhat[1, 0] == 3.5

    def test_zero_probability_cells_are_undefined(self, toy_data, toy_cr_design, errors):
        report = point_estimates(toy_data, kernel(toy_cr_design, toy_data.population), errors=errors)
        assert np.isnan(report.yhat[0, 0]) and np.isnan(report.yhat[1, 1])
        assert all(e.note == 'undefined cell' for e in report.subgroup)
        assert errors.get_reports(category=ErrorCategory.ESTIMATION)

    def test_constant_outcomes_give_zero_effects(self):
        data = balanced_data((3.0,) * 8)
        report = point_estimates(data, balanced_kernel(data))
        assert all(e.estimate == 0.0 for e in report.subgroup + report.overall)

    def test_horvitz_thompson_weights_under_random_partition(self, toy_data):
        prob = kernel(Design.random_partition(), toy_data.population)
        yhat = cell_estimates(toy_data, prob)
        # Both type-1 units see {2}, which has probability 2/3
        assert yhat[0, 1] == pytest.approx((1.0 + 2.0) / (2 * 2 / 3))
        assert yhat[0, 0] == 0.0

    def test_overall_effect_is_weighted(self):
        data = balanced_data()
        report = point_estimates(data, balanced_kernel(data))
        assert report.effect(0, 0, 1).estimate == -2.0
        assert report.effect(None, 0, 1).estimate == -2.0

    def test_kernel_for_other_composition(self):
        data = balanced_data()
        with pytest.raises(ValidationError):
            cell_estimates(data, kernel(Design.complete_randomization((2, 0, 2)), data.population))


class TestVarianceComponents:
    def test_complete_randomization_sample_variance(self):
        data = balanced_data()
        components = variance_components(data, balanced_kernel(data))
        assert components.s2.tolist() == [[0.5, 0.5], [0.5, 0.5]]

    def test_constant_outcomes(self):
        data = balanced_data((2.0,) * 8)
        components = variance_components(data, balanced_kernel(data))
        assert np.allclose(components.s2, 0.0)
        assert np.allclose(components.mean_square, 4.0)

    def test_small_cells_are_unavailable(self, toy_data, toy_cr_design):
        components = variance_components(toy_data, kernel(toy_cr_design, toy_data.population))
        assert components.s2[0, 1] == 0.5
        assert np.isnan(components.s2[0, 0])


class TestVarianceEstimate:
    def test_balanced_cells(self):
        data = balanced_data()
        variances = variance_estimate(data, balanced_kernel(data))
        assert variances[(0, 0, 1)] == pytest.approx(0.5, abs=1e-12)
        assert variances[(1, 0, 1)] == pytest.approx(0.5, abs=1e-12)
        # sum of w^2 times subgroup variances
        assert variances[(None, 0, 1)] == pytest.approx(0.25, abs=1e-12)

    def test_intervals_attached(self, errors):
        data = balanced_data()
        report = estimate_effects(data, balanced_kernel(data), alpha=0.05, errors=errors)
        effect = report.effect(0, 0, 1)
        assert effect.lower == pytest.approx(-2.0 - 1.959963984540054 * math.sqrt(0.5))
        assert effect.upper == pytest.approx(-2.0 + 1.959963984540054 * math.sqrt(0.5))

    def test_unavailable_variance_is_flagged(self, errors):
        population = Population.from_counts((3, 3), K=1)
        # Attribute 1 has a single unit on peer set {2}
        data = OutcomeData(population, Assignment(((0, 1), (2, 3), (4, 5))),
                           (1.0, 2.0, 3.0, 4.0, 5.0, 6.0))
        prob = kernel(Design.complete_randomization((1, 1, 1)), population)
        report = estimate_effects(data, prob, errors=errors)
        effect = report.effect(0, 0, 1)
        assert effect.estimate == pytest.approx(1.5 - 3.0)
        assert effect.note == 'variance unavailable'
        assert effect.variance is None and effect.lower is None
        assert errors.get_reports(category=ErrorCategory.ESTIMATION)

    def test_report_to_dict(self):
        data = balanced_data()
        report = estimate_effects(data, balanced_kernel(data))
        document = report.to_dict(["{1}", "{2}"], ["A", "B"])
        assert len(document['cells']) == 4
        assert document['subgroup_effects'][0]['attribute'] == "A"
        assert document['overall_effects'][0]['std_error'] == pytest.approx(0.5)


class TestWaldInterval:
    def test_standard_normal(self):
        lower, upper = wald_interval(0.0, 1.0, 0.05)
        assert lower == pytest.approx(-1.959963984540054)
        assert upper == pytest.approx(1.959963984540054)

    def test_degenerate(self):
        assert wald_interval(1.25, 0.0, 0.05) == (1.25, 1.25)

    def test_published_effect_excludes_zero(self):
        lower, upper = wald_interval(-0.313, 0.071 ** 2, 0.05)
        assert lower == pytest.approx(-0.452, abs=1e-3)
        assert upper == pytest.approx(-0.174, abs=1e-3)
        assert upper < 0

    def test_negative_variance(self):
        with pytest.raises(ValidationError):
            wald_interval(0.0, -1.0, 0.05)


class TestContrasts:
    def test_all_contrasts(self):
        assert all_contrasts(3) == [(0, 1), (0, 2), (1, 2)]

    def test_out_of_range(self):
        with pytest.raises(ValidationError):
            check_contrasts([(0, 4)], 4)

    def test_self_contrast(self):
        with pytest.raises(ValidationError):
            check_contrasts([(1, 1)], 3)
