import math

import numpy as np
import pytest

from tailcouple.errors import (
    EmptyInput,
    InputError,
    MalformedInput,
    NegativeValue,
    NonFiniteValue,
    ProbabilityOutOfRange,
    RankOutOfRange,
    TooFewObservations,
)
from tailcouple.services.sample_core import (
    build_sample,
    empirical_quantile,
    order_statistic,
    read_csv,
    write_csv,
)


class TestBuildSample:
    def test_sorts_and_keeps_ties(self):
        s = build_sample([3.0, 2.0, 1.0, 2.0])
        assert list(s.values) == [1.0, 2.0, 2.0, 3.0]
        assert s.n == 4

    def test_three_values_are_too_few(self):
        with pytest.raises(TooFewObservations):
            build_sample([3, 1, 2])

    def test_negative_value_reports_index(self):
        with pytest.raises(NegativeValue) as info:
            build_sample([1, -1, 2, 3])
        assert info.value.index == 1

    def test_non_finite_value_reports_index(self):
        with pytest.raises(NonFiniteValue) as info:
            build_sample([1.0, 2.0, math.inf, math.nan, 3.0])
        assert info.value.index == 2

    def test_empty(self):
        with pytest.raises(EmptyInput):
            build_sample([])

    def test_input_errors_are_value_errors(self):
        with pytest.raises(ValueError):
            build_sample([1, 2])
        assert issubclass(NegativeValue, InputError)

    def test_idempotent(self, rng):
        s = build_sample(rng.pareto(1.5, size=200))
        assert build_sample(s.values) == s

    def test_values_are_read_only(self, small_sample):
        with pytest.raises(ValueError):
            small_sample.values[0] = 10.0


class TestOrderStatistics:
    @pytest.mark.parametrize("j, expected", [(1, 1.0), (3, 2.0), (4, 3.0)])
    def test_order_statistic(self, j, expected):
        assert order_statistic(build_sample([1, 2, 2, 3]), j) == expected

    @pytest.mark.parametrize("j", [0, 5])
    def test_rank_out_of_range(self, j):
        with pytest.raises(RankOutOfRange):
            order_statistic(build_sample([1, 2, 2, 3]), j)

    @pytest.mark.parametrize("u, expected", [(0.5, 2.0), (0.51, 3.0), (0.999, 4.0), (0.25, 1.0)])
    def test_empirical_quantile(self, small_sample, u, expected):
        assert empirical_quantile(small_sample, u) == expected

    @pytest.mark.parametrize("u", [0.0, 1.0, -0.1, 1.5])
    def test_probability_out_of_range(self, small_sample, u):
        with pytest.raises(ProbabilityOutOfRange):
            empirical_quantile(small_sample, u)

    def test_quantile_at_grid_points_is_order_statistic(self, rng):
        for n in rng.integers(4, 2000, size=50):
            s = build_sample(rng.standard_exponential(int(n)))
            for j in range(1, int(n)):
                assert empirical_quantile(s, j / n) == order_statistic(s, j)

    def test_quantile_is_monotone(self, rng):
        s = build_sample(rng.standard_exponential(333))
        us = np.sort(rng.uniform(1e-9, 1 - 1e-9, size=2000))
        qs = [empirical_quantile(s, float(u)) for u in us]
        assert all(a <= b for a, b in zip(qs, qs[1:]))


class TestCsv:
    def test_header_and_blank_lines(self, tmp_path):
        path = tmp_path / "losses.csv"
        path.write_text("loss\n4\n\n1.5\n3\n\n2\n", encoding="utf-8")
        s = read_csv(path)
        assert list(s.values) == [1.5, 2.0, 3.0, 4.0]
        assert s.source == str(path)

    def test_without_header(self, tmp_path):
        path = tmp_path / "losses.csv"
        path.write_text("1\n2\n3\n4\n5\n", encoding="utf-8")
        assert read_csv(path).n == 5

    def test_malformed_line_is_named(self, tmp_path):
        lines = ["loss"] + [str(i) for i in range(1, 16)] + ["1,5"]
        path = tmp_path / "losses.csv"
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        with pytest.raises(MalformedInput, match="line 17") as info:
            read_csv(path)
        assert info.value.line == 17

    def test_write_then_read_is_exact(self, tmp_path, rng):
        s = build_sample(rng.pareto(1.6, size=500) * np.pi)
        path = tmp_path / "out.csv"
        write_csv(s, path)
        assert np.array_equal(read_csv(path).values, s.values)
