"""Statistical properties checked across randomly generated instances"""

import numpy as np
import pytest

from peerfx.core.spaces import cached_space, composition_vector
from peerfx.design.kernel import kernel
from peerfx.design.sampler import sample
from peerfx.estimation.estimator import estimate_effects, point_estimates
from peerfx.estimation.joint import JointReport, joint_inference, projection_matrix
from peerfx.estimation.regression import regression_check
from peerfx.estimation.target import enumerate_target_configurations
from peerfx.models.design import Design
from peerfx.models.population import OutcomeData, Population
from peerfx.optimize.fiducial import fiducial_distribution
from peerfx.optimize.solver import branch_and_bound, objective_coefficients, optimal_composition
from peerfx.oracle.ensemble import enumerate_ensemble
from peerfx.oracle.moments import exact_moment, table_outcomes
from peerfx.oracle.suite import SIZE_GRID, additive_table, null_table, random_integer_table
from peerfx.rtest.engine import randomization_test
from peerfx.rtest.statistics import NullHypothesis, Statistic, TestSpec
from peerfx.science.potential import true_joint_covariance
from peerfx.utils.error_handling import ErrorManager
from peerfx.utils.helpers import derive_rng, make_rng


def random_data(counts, K, seed) -> OutcomeData:
    population = Population.from_counts(counts, K)
    rng = make_rng(seed)
    assignment = sample(Design.random_partition(), population, rng)
    return OutcomeData(population, assignment, tuple(float(y) for y in rng.normal(size=population.n)))


def conditioned_kernel(data: OutcomeData):
    observed = composition_vector(data.assignment, data.population)
    return kernel(Design.complete_randomization(observed, conditioned=True), data.population)


@pytest.mark.parametrize("seed", range(6))
def test_target_average_equals_subgroup_estimate(seed):
    data = random_data((6, 6), 2, seed)
    report = point_estimates(data, conditioned_kernel(data), errors=ErrorManager())
    for a in range(2):
        averages = enumerate_target_configurations(data, a)
        for (k, k2), value in averages.items():
            expected = report.effect(a, k, k2).estimate
            if np.isfinite(expected):
                assert value == pytest.approx(expected, abs=1e-10)
            else:
                assert not np.isfinite(value)


@pytest.mark.parametrize("seed", range(6))
def test_regression_reproduces_estimates(seed):
    data = random_data((10, 10), 1, seed)
    prob = conditioned_kernel(data)
    if np.any(prob.expected_counts() < 1):
        pytest.skip("observed composition leaves a cell empty")
    fit = regression_check(data, prob)
    report = estimate_effects(data, prob, errors=ErrorManager())
    counts = report.observed_counts
    s2 = report.components.s2
    for row in fit.contrasts:
        a, k, k2 = row['attribute'], row['r'], row['r_prime']
        assert row['estimate'] == pytest.approx(report.effect(a, k, k2).estimate, rel=1e-12, abs=1e-12)
        if counts[a, k] >= 2 and counts[a, k2] >= 2:
            # Each cell term of the plug-in variance shrinks by (n_[a]r - 1) / n_[a]r
            expected = sum((counts[a, j] - 1) / counts[a, j] * s2[a, j] / counts[a, j] for j in (k, k2))
            assert row['robust_variance'] == pytest.approx(expected, rel=1e-12)


def shifted_tables(seed):
    rng = np.random.default_rng(seed)
    space = cached_space(3, 2)
    table = rng.normal(size=(space.H, space.R))
    return table, 2.5 * table + rng.normal(size=(space.H, 1))


@pytest.mark.parametrize("seed", range(10))
def test_optimum_invariant_to_scale_and_attribute_shift(seed):
    table, shifted = shifted_tables(seed)
    counts = (5, 2, 2)
    assert optimal_composition(table, counts, 2).composition == \
        optimal_composition(shifted, counts, 2).composition


@pytest.mark.slow
@pytest.mark.parametrize("seed", range(20))
def test_argmax_set_invariant_to_scale_and_attribute_shift(seed):
    table, shifted = shifted_tables(seed)
    counts = (5, 2, 2)
    assert optimal_composition(table, counts, 2).argmax_set == \
        optimal_composition(shifted, counts, 2).argmax_set


@pytest.mark.slow
@pytest.mark.parametrize("seed", range(50))
def test_branch_and_bound_agrees_with_enumeration(seed):
    rng = np.random.default_rng(1000 + seed)
    space = cached_space(3, 2)
    table = rng.normal(size=(space.H, space.R))
    counts = (4, 3, 2)
    enumerated = optimal_composition(table, counts, K=2)
    l, value, tied = branch_and_bound(objective_coefficients(table, space), counts, space)
    assert tied == enumerated.argmax_set
    assert l == enumerated.composition
    assert value == pytest.approx(enumerated.objective)


def symmetric_report() -> JointReport:
    covariance = np.stack([0.5 * projection_matrix(2)] * 2)
    gamma = projection_matrix(2)
    return JointReport(gamma, np.zeros((2, 2)), np.zeros((2, 2)), covariance, np.full((2, 2), 5))


def test_fiducial_symmetric_case():
    result = fiducial_distribution(symmetric_report(), (2, 2), K=1, draws=4000, seed=2024)
    probabilities = {row.composition: row.probability for row in result.rows}
    assert set(probabilities) == {(0, 2, 0), (1, 0, 1)}
    assert probabilities[(1, 0, 1)] == pytest.approx(0.5, abs=0.04)


@pytest.mark.slow
def test_fiducial_symmetric_case_at_full_size():
    draws = 100_000
    result = fiducial_distribution(symmetric_report(), (2, 2), K=1, draws=draws, seed=2024)
    probabilities = {row.composition: row.probability for row in result.rows}
    assert set(probabilities) == {(0, 2, 0), (1, 0, 1)}
    assert probabilities[(1, 0, 1)] == pytest.approx(0.5, abs=4 * np.sqrt(0.25 / draws))


@pytest.mark.parametrize("design", [Design.random_partition(), Design.complete_randomization((1, 2, 0))])
def test_randomization_test_is_valid_under_the_null(six_population, design):
    table = null_table(six_population, seed=3)
    ensemble = enumerate_ensemble(design, six_population)
    realize = table_outcomes(table)
    spec = TestSpec(NullHypothesis(), Statistic.ANOVA)
    p_values = np.array([randomization_test(realize(assignment), design, spec, keep_reference=False,
                                            errors=ErrorManager()).p_value
                         for assignment, _ in ensemble])
    for alpha in SIZE_GRID:
        assert np.mean(p_values <= alpha) <= alpha + 1e-12


@pytest.mark.slow
@pytest.mark.parametrize("design", [Design.random_partition(), Design.complete_randomization((1, 2, 0))])
def test_monte_carlo_test_is_valid_under_the_null(six_population, design):
    table = null_table(six_population, seed=3)
    realize = table_outcomes(table)
    datasets = 1000
    p_values = np.empty(datasets)
    for index in range(datasets):
        data = realize(sample(design, six_population, derive_rng(5, index)))
        spec = TestSpec(NullHypothesis(), Statistic.ANOVA, draws=99, seed=index)
        result = randomization_test(data, design, spec, enumeration_limit=0, keep_reference=False,
                                    errors=ErrorManager())
        assert result.method == 'monte_carlo'
        p_values[index] = result.p_value
    for alpha in SIZE_GRID:
        bound = alpha + 3 * np.sqrt(alpha * (1 - alpha) / datasets)
        assert np.mean(p_values <= alpha) <= bound


@pytest.mark.parametrize("counts,composition", [((4, 4), (1, 2, 1)), ((6, 6), (2, 2, 2))])
@pytest.mark.parametrize("make_table", [random_integer_table, additive_table])
def test_expected_joint_covariance_is_conservative(counts, composition, make_table):
    population = Population.from_counts(counts, K=1)
    design = Design.complete_randomization(composition)
    prob = kernel(design, population)
    ensemble = enumerate_ensemble(design, population)
    table = make_table(population, seed=11)
    H, R = prob.H, prob.R
    moments = exact_moment(ensemble, table, lambda data: joint_inference(data, prob).covariance.ravel(),
                           covariance=False)
    expected = moments.mean.reshape(H, R, R)
    cell_counts = joint_inference(table_outcomes(table)(ensemble.assignments[0]), prob).cell_counts
    for a, truth in enumerate(true_joint_covariance(table, cell_counts)):
        assert np.linalg.eigvalsh(expected[a] - truth).min() >= -1e-9


@pytest.mark.slow
@pytest.mark.parametrize("make_table", [additive_table, random_integer_table])
def test_wald_interval_coverage(make_table):
    population = Population.from_counts((200, 200), K=1)
    table = make_table(population, seed=17)
    design = Design.complete_randomization((50, 100, 50))
    prob = kernel(design, population)
    realize = table_outcomes(table)
    truth = table.subgroup_effect(0, 0, 1)
    draws = 10_000
    covered = 0
    for index in range(draws):
        data = realize(sample(design, population, derive_rng(99, index)))
        effect = estimate_effects(data, prob, errors=ErrorManager()).effect(0, 0, 1)
        covered += effect.lower <= truth <= effect.upper
    assert covered / draws >= 0.95 - 3 * np.sqrt(0.95 * 0.05 / draws)
