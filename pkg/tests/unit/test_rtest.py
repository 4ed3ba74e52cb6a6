"""Tests for randomization test statistics and the reference-distribution engine"""

import numpy as np
import pytest

from peerfx.models.design import Design
from peerfx.models.population import Assignment, OutcomeData, Population
from peerfx.rtest.engine import randomization_test, randomization_test_table, tail_probability, tie_tolerance
from peerfx.rtest.statistics import NullHypothesis, Statistic, TestSpec, statistic_value
from peerfx.utils.error_handling import ErrorCategory, ValidationError


def balanced_data(outcomes=(1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0)) -> OutcomeData:
    population = Population.from_counts((4, 4), K=1)
    return OutcomeData(population, Assignment(((0, 1), (2, 4), (3, 5), (6, 7))), tuple(outcomes))


def six_data(outcomes=(1.0, 2.0, 3.0, 4.0, 5.0, 6.0)) -> OutcomeData:
    population = Population.from_counts((4, 2), K=1)
    return OutcomeData(population, Assignment(((0, 1), (2, 4), (3, 5))), tuple(outcomes))


SHARP = NullHypothesis()


class TestSpecValidation:
    def test_subgroup_null_needs_subgroup_statistic(self):
        with pytest.raises(ValidationError):
            TestSpec(NullHypothesis(0), Statistic.CONTRAST)

    def test_subgroup_statistic_takes_null_attribute(self):
        spec = TestSpec(NullHypothesis(1), Statistic.SUBGROUP_ANOVA)
        assert spec.attribute == 1

    def test_mismatched_attribute(self):
        with pytest.raises(ValidationError):
            TestSpec(NullHypothesis(1), Statistic.SUBGROUP_ANOVA, attribute=0)

    def test_sharp_subgroup_statistic_needs_attribute(self):
        with pytest.raises(ValidationError):
            TestSpec(SHARP, Statistic.SUBGROUP_CONTRAST)

    def test_draws_positive(self):
        with pytest.raises(ValidationError):
            TestSpec(SHARP, Statistic.ANOVA, draws=0)

    def test_null_labels(self):
        assert SHARP.label(["x", "y"]) == "H0"
        assert NullHypothesis(1).label(["x", "y"]) == "H0[y]"


class TestStatistics:
    def test_subgroup_contrast(self):
        spec = TestSpec(SHARP, Statistic.SUBGROUP_CONTRAST, attribute=0)
        assert statistic_value(balanced_data(), spec) == pytest.approx(2.0)

    def test_subgroup_anova_matches_scipy(self):
        stats = pytest.importorskip("scipy.stats")
        spec = TestSpec(SHARP, Statistic.SUBGROUP_ANOVA, attribute=0)
        expected = stats.f_oneway([1.0, 2.0], [3.0, 4.0]).statistic
        assert statistic_value(balanced_data(), spec) == pytest.approx(expected)
        assert expected == pytest.approx(8.0)

    def test_anova_over_all_cells_matches_scipy(self):
        stats = pytest.importorskip("scipy.stats")
        expected = stats.f_oneway([1.0, 2.0], [3.0, 4.0], [5.0, 6.0], [7.0, 8.0]).statistic
        assert statistic_value(balanced_data(), TestSpec(SHARP, Statistic.ANOVA)) == pytest.approx(expected)

    def test_weighted_contrast(self):
        # Weighted means 3.5 and 5.5
        assert statistic_value(balanced_data(), TestSpec(SHARP, Statistic.CONTRAST)) == pytest.approx(2.0)

    def test_max_over_attributes(self):
        spec = TestSpec(SHARP, Statistic.MAX_SUBGROUP_CONTRAST)
        assert statistic_value(balanced_data(), spec) == pytest.approx(2.0)

    @pytest.mark.parametrize("statistic", list(Statistic))
    def test_constant_outcomes(self, statistic):
        attribute = 0 if statistic.per_attribute else None
        spec = TestSpec(SHARP, statistic, attribute=attribute)
        assert statistic_value(balanced_data((3.0,) * 8), spec) == 0.0

    def test_single_available_cell(self, toy_data):
        spec = TestSpec(SHARP, Statistic.SUBGROUP_CONTRAST, attribute=0)
        assert statistic_value(toy_data, spec) == 0.0


class TestEngine:
    def test_tie_tolerance(self):
        assert tie_tolerance(0.0) == 1e-9
        assert tie_tolerance(float('inf')) == 0.0

    def test_constant_outcomes_give_p_one(self):
        spec = TestSpec(SHARP, Statistic.ANOVA, draws=20)
        result = randomization_test(six_data((2.0,) * 6), Design.random_partition(), spec)
        assert result.method == 'exhaustive'
        assert result.p_value == 1.0

    def test_exhaustive_random_partition(self):
        spec = TestSpec(SHARP, Statistic.ANOVA)
        result = randomization_test(six_data(), Design.random_partition(), spec)
        assert result.reference_size == 15
        assert 0 < result.p_value <= 1
        assert result.p_value * 15 == pytest.approx(round(result.p_value * 15))

    def test_exhaustive_complete_randomization(self):
        data = balanced_data()
        result = randomization_test(data, Design.complete_randomization((1, 2, 1)),
                                    TestSpec(SHARP, Statistic.SUBGROUP_CONTRAST, attribute=0))
        assert result.method == 'exhaustive'
        assert result.reference_size == 72
        assert result.observed == pytest.approx(2.0)

    def test_observed_composition_must_be_in_support(self):
        with pytest.raises(ValidationError):
            randomization_test(balanced_data(), Design.complete_randomization((2, 0, 2)),
                               TestSpec(SHARP, Statistic.ANOVA))

    def test_monte_carlo_is_reproducible_across_workers(self):
        spec = TestSpec(SHARP, Statistic.ANOVA, draws=600, seed=42)
        serial = randomization_test(balanced_data(), Design.random_partition(), spec,
                                    enumeration_limit=0, workers=1)
        threaded = randomization_test(balanced_data(), Design.random_partition(), spec,
                                      enumeration_limit=0, workers=3)
        assert serial.method == 'monte_carlo'
        assert serial.p_value == threaded.p_value
        assert np.array_equal(serial.reference, threaded.reference)
        assert serial.p_value >= 1 / 601

    def test_monte_carlo_seed_changes_draws(self):
        design = Design.random_partition()
        first = randomization_test(balanced_data(), design, TestSpec(SHARP, Statistic.ANOVA, draws=300, seed=1),
                                   enumeration_limit=0)
        second = randomization_test(balanced_data(), design, TestSpec(SHARP, Statistic.ANOVA, draws=300, seed=2),
                                    enumeration_limit=0)
        assert not np.array_equal(first.reference, second.reference)

    def test_incomplete_reference_draws_reported(self, errors):
        result = randomization_test(balanced_data(), Design.random_partition(),
                                    TestSpec(SHARP, Statistic.ANOVA), errors=errors)
        assert result.incomplete_draws > 0
        assert errors.get_reports(category=ErrorCategory.TESTING)

    def test_to_dict(self):
        result = randomization_test(six_data(), Design.random_partition(), TestSpec(SHARP, Statistic.ANOVA),
                                    keep_reference=False)
        document = result.to_dict(["1", "2"])
        assert document['null'] == "H0"
        assert document['seed'] is None
        assert document['reference_quantiles'] == {}

    def test_table_layout(self):
        rows = randomization_test_table(balanced_data(), Design.complete_randomization((1, 2, 1)),
                                        draws=50, seed=3)
        assert [row['null'] for row in rows] == ["H0", "H0[1]", "H0[2]"]
        assert set(rows[0]['tests']) == {"T", "F", "max_T_a", "max_F_a"}
        assert rows[1]['tests']['T']['statistic'] == "T_a"
        assert rows[1]['tests']['max_T_a'] is None


class TestTailProbability:
    @pytest.fixture
    def reference(self):
        spec = TestSpec(SHARP, Statistic.ANOVA)
        reference = randomization_test(balanced_data(), Design.random_partition(), spec).reference
        return reference[np.isfinite(reference)]

    @pytest.mark.parametrize("exhaustive", [True, False])
    def test_p_value_never_increases_with_the_statistic(self, reference, exhaustive):
        grid = np.linspace(reference.min() - 1.0, reference.max() + 1.0, 301)
        observed = np.sort(np.concatenate([grid, reference]))
        p_values = np.array([tail_probability(reference, value, exhaustive) for value in observed])
        assert np.all(np.diff(p_values) <= 0)

    def test_bounds(self, reference):
        below, above = reference.min() - 1.0, reference.max() + 1.0
        assert tail_probability(reference, below, exhaustive=True) == 1.0
        assert tail_probability(reference, above, exhaustive=True) == 0.0
        assert tail_probability(reference, below, exhaustive=False) == 1.0
        assert tail_probability(reference, above, exhaustive=False) == 1 / (1 + reference.size)

    def test_engine_reports_the_tail_of_its_reference(self):
        result = randomization_test(balanced_data(), Design.random_partition(), TestSpec(SHARP, Statistic.ANOVA))
        assert result.p_value == tail_probability(result.reference, result.observed, exhaustive=True)
