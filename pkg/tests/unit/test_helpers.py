"""Tests for parsing, seeding and serialization helpers"""

import math

import numpy as np
import pytest

from peerfx.utils.helpers import (
    chunk_ranges, derive_rng, json_safe, make_rng, parse_contrasts, parse_int_list, validate_seed,
)
from peerfx.utils.error_handling import ValidationError


class TestSeeds:
    @pytest.mark.parametrize("seed", [-1, 2 ** 64, 1.5, "7", True])
    def test_invalid(self, seed):
        with pytest.raises(ValidationError):
            validate_seed(seed)

    def test_largest_seed(self):
        assert validate_seed(2 ** 64 - 1) == 2 ** 64 - 1

    def test_streams_depend_only_on_seed_and_index(self):
        first = derive_rng(5, 17).integers(0, 1 << 30, size=4)
        again = derive_rng(5, 17).integers(0, 1 << 30, size=4)
        other = derive_rng(5, 18).integers(0, 1 << 30, size=4)
        assert first.tolist() == again.tolist()
        assert first.tolist() != other.tolist()

    def test_make_rng_reproducible(self):
        assert make_rng(9).random() == make_rng(9).random()


def test_chunk_ranges():
    assert list(chunk_ranges(5, 2)) == [(0, 2), (2, 4), (4, 5)]
    assert list(chunk_ranges(0, 3)) == []


class TestParsing:
    def test_int_list(self):
        assert parse_int_list("0, 1,1,0,0") == (0, 1, 1, 0, 0)
        assert parse_int_list([2, 3]) == (2, 3)
        assert parse_int_list(None) is None

    @pytest.mark.parametrize("text", ["", "1,a", ","])
    def test_int_list_invalid(self, text):
        with pytest.raises(ValidationError):
            parse_int_list(text)

    def test_contrasts(self):
        assert parse_contrasts("all") is None
        assert parse_contrasts(" ALL ") is None
        assert parse_contrasts("R1-R2, r1-r3") == [(0, 1), (0, 2)]
        assert parse_contrasts([(2, 1)]) == [(1, 0)]

    @pytest.mark.parametrize("text", ["R1", "R1-R2-R3", "Ra-R2"])
    def test_contrasts_invalid(self, text):
        with pytest.raises(ValidationError):
            parse_contrasts(text)


def test_json_safe():
    value = json_safe({1: np.array([1.5, np.nan]), 'n': np.int64(3), 'flag': np.bool_(True),
                       'inf': math.inf, 'items': (np.float32(0.5),)})
    assert value == {'1': [1.5, None], 'n': 3, 'flag': True, 'inf': None, 'items': [0.5]}
    assert type(value['n']) is int
