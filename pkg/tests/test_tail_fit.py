import math

import numpy as np
import pytest

from tailcouple.errors import (
    ProbabilityOutOfRange,
    RankOutOfRange,
    SpecStringError,
    ZeroThreshold,
)
from tailcouple.services.measure_spec import Transform
from tailcouple.services.sample_core import build_sample
from tailcouple.services.tail_fit import (
    KPolicy,
    KPolicyKind,
    TailFit,
    hill,
    hill_trajectory,
    select_k,
    weissman_quantile,
)
from tests.conftest import quantile_grid


class TestHill:
    def test_ties_are_counted(self):
        s = build_sample([0.5, 0.7, 1.0, math.e, math.e, math.e])
        fit = hill(s, None, 3)
        assert fit.gamma_hat == pytest.approx(1.0)
        assert fit.tied_top == 2
        assert fit.threshold_value == 1.0
        assert not fit.degenerate

    def test_degenerate_tail(self):
        fit = hill(build_sample([1, 2, 5, 5, 5, 5]), None, 3)
        assert fit.gamma_hat == 0.0
        assert fit.degenerate
        assert not fit.in_theory_range

    def test_zero_threshold(self):
        with pytest.raises(ZeroThreshold):
            hill(build_sample([0, 0, 0, 1, 2]), None, 2)

    @pytest.mark.parametrize("k", [0, 4])
    def test_rank_range(self, small_sample, k):
        with pytest.raises(RankOutOfRange):
            hill(small_sample, None, k)

    def test_grid_075(self, grid_075):
        fit = hill(grid_075, None, 50)
        assert fit.gamma_hat == pytest.approx(0.75, abs=0.08)
        assert fit.in_theory_range
        assert fit.tail_mass == 0.05

    def test_grid_06(self, grid_06):
        assert hill(grid_06, None, 63).gamma_hat == pytest.approx(0.581, abs=0.01)

    def test_power_transform_scales_gamma(self, grid_06):
        plain = hill(grid_06, None, 63).gamma_hat
        squared = hill(grid_06, Transform.power(2.0), 63).gamma_hat
        assert squared == pytest.approx(2.0 * plain, rel=1e-12)

    def test_scale_invariance(self, grid_06):
        scaled = build_sample(grid_06.values * 7.5)
        assert hill(scaled, None, 100).gamma_hat == pytest.approx(hill(grid_06, None, 100).gamma_hat, rel=1e-12)

    def test_scale_invariance_on_random_samples(self):
        rng = np.random.default_rng(17)
        for _ in range(1_000):
            n = int(rng.integers(20, 400))
            values = rng.pareto(rng.uniform(1.0, 3.0), size=n) + rng.uniform(0.1, 2.0)
            c = 10.0 ** rng.uniform(-3.0, 3.0)
            k = int(rng.integers(1, n))
            base = hill(build_sample(values), None, k).gamma_hat
            scaled = hill(build_sample(values * c), None, k).gamma_hat
            assert scaled == pytest.approx(base, rel=1e-9, abs=1e-12)

    @pytest.mark.slow
    @pytest.mark.parametrize("gamma", [0.55, 0.6, 0.75, 0.9])
    def test_pareto_samples_center_on_gamma(self, gamma):
        k = math.floor(5000 ** 0.45)
        gammas = []
        for r in range(500):
            u = np.random.default_rng([11, r]).uniform(size=5000)
            gammas.append(hill(build_sample((1.0 - u) ** -gamma), None, k).gamma_hat)
        assert np.mean(gammas) == pytest.approx(gamma, abs=0.05)


class TestTrajectory:
    def test_median_near_gamma(self, grid_075):
        fits = hill_trajectory(grid_075, None, range(10, 201))
        assert len(fits) == 191
        assert [f.k for f in fits] == list(range(10, 201))
        assert np.median([f.gamma_hat for f in fits]) == pytest.approx(0.75, abs=0.1)

    def test_matches_single_fits(self, grid_075):
        fits = hill_trajectory(grid_075, None, [40, 20, 20])
        assert [f.k for f in fits] == [20, 40]
        assert fits[1] == hill(grid_075, None, 40)

    def test_range_checked(self, small_sample):
        with pytest.raises(RankOutOfRange):
            hill_trajectory(small_sample, None, range(1, 5))

    def test_empty_range(self, small_sample):
        assert hill_trajectory(small_sample, None, []) == []


class TestWeissman:
    def test_extrapolation(self):
        fit = TailFit(gamma_hat=0.5, k=1, n=100, threshold_value=10.0)
        assert weissman_quantile(fit, 0.9975) == pytest.approx(20.0)

    def test_left_endpoint_is_threshold(self):
        fit = TailFit(gamma_hat=0.7, k=5, n=100, threshold_value=3.25)
        assert weissman_quantile(fit, 1.0 - 5 / 100) == 3.25

    def test_increasing(self):
        fit = TailFit(gamma_hat=0.7, k=5, n=100, threshold_value=3.25)
        qs = [weissman_quantile(fit, s) for s in np.linspace(0.951, 0.9999, 50)]
        assert all(a < b for a, b in zip(qs, qs[1:]))

    @pytest.mark.parametrize("s", [0.9, 1.0])
    def test_window(self, s):
        fit = TailFit(gamma_hat=0.7, k=5, n=100, threshold_value=3.25)
        with pytest.raises(ProbabilityOutOfRange):
            weissman_quantile(fit, s)


class TestSelectK:
    def test_power_law_default(self, grid_06):
        assert select_k(grid_06, KPolicy.auto()) == 63

    def test_fraction(self):
        s = build_sample(np.arange(1, 101, dtype=float))
        assert select_k(s, KPolicy.fraction(0.1)) == 10

    def test_clamped_on_tiny_samples(self):
        s = build_sample([1.0, 2.0, 3.0, 4.0, 5.0])
        for policy in (KPolicy.auto(), KPolicy.fraction(0.01), KPolicy.fraction(0.99), KPolicy.scan()):
            assert 2 <= select_k(s, policy) <= 3

    def test_fixed_is_validated(self, small_sample):
        assert select_k(small_sample, KPolicy.fixed(2)) == 2
        with pytest.raises(RankOutOfRange):
            select_k(small_sample, KPolicy.fixed(3))

    def test_scan_falls_back_on_short_range(self):
        s = quantile_grid(0.6, 20)
        assert select_k(s, KPolicy.scan()) == 3

    def test_scan_stays_inside_its_range(self, grid_06):
        k = select_k(grid_06, KPolicy.scan())
        assert 15 + 5 <= k <= 251 - 4

    def test_default_exponent_from_settings(self, monkeypatch, grid_06):
        monkeypatch.setenv("TAILCOUPLE_DEFAULT_K_EXPONENT", "0.5")
        assert select_k(grid_06, KPolicy.auto()) == 100


class TestKPolicyParse:
    @pytest.mark.parametrize(
        "text, kind, value",
        [
            ("auto", KPolicyKind.POWER, 0.45),
            ("25", KPolicyKind.FIXED, 25),
            ("fraction:0.1", KPolicyKind.FRACTION, 0.1),
            ("fraction:c=0.2", KPolicyKind.FRACTION, 0.2),
            ("power:a=0.5", KPolicyKind.POWER, 0.5),
            ("scan", KPolicyKind.SCAN, 1.0),
        ],
    )
    def test_parse(self, text, kind, value):
        policy = KPolicy.parse(text)
        assert policy.kind is kind
        assert policy.value == value

    @pytest.mark.parametrize("text", ["fraction:2", "power:b=0.4", "bogus", "scan:1", ""])
    def test_bad(self, text):
        with pytest.raises(SpecStringError):
            KPolicy.parse(text)

    def test_describe(self):
        assert KPolicy.fixed(25).describe() == "25"
        assert KPolicy.power_law(0.45).describe() == "power:0.45"
