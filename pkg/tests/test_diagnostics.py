"""Tests for balance metrics, weight summaries, outcomes, and plot data."""

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rebalance import (
    WeightVector,
    apply_transforms,
    asmd,
    build_sample,
    effective_sample_size,
    kish_deff,
    outcome_report,
    pair_with_target,
    plot_data,
    poststratify,
    weighted_mean,
    weighted_mean_ci,
    weighted_mean_variance,
    weights_summary,
)
from rebalance.diagnostics import MEAN_ROW, weighted_kde
from rebalance.errors import DegenerateVariableError, UnknownColumnError

from helpers import make_pair


class TestKishDeff:
    def test_equal_weights_exactly_one(self):
        assert kish_deff(WeightVector(np.ones(7))) == 1.0

    def test_hand_example(self):
        assert kish_deff(WeightVector(np.array([1.0, 1.0, 1.0, 3.0]))) == pytest.approx(
            4.0 / 3.0, rel=1e-15
        )

    def test_scale_invariance(self):
        w = np.array([0.5, 2.0, 1.25, 3.0])
        assert kish_deff(WeightVector(w)) == pytest.approx(
            kish_deff(WeightVector(7.0 * w)), rel=1e-13
        )

    @given(st.lists(st.floats(0.01, 100.0), min_size=2, max_size=40))
    @settings(max_examples=100, deadline=None)
    def test_at_least_one(self, values):
        v = np.array(values)
        deff = kish_deff(WeightVector(v))
        assert deff >= 1.0 - 1e-12
        if np.ptp(v) > 1e-9 * v.mean():
            assert deff > 1.0


class TestEffectiveSampleSize:
    def test_paper_style_relation(self):
        w = np.array([1.0, 1.0, 1.0, 3.0])
        essp, ess = effective_sample_size(WeightVector(w))
        deff = kish_deff(WeightVector(w))
        assert essp == pytest.approx(1.0 / deff, rel=1e-15)
        assert ess == pytest.approx(4.0 / deff, rel=1e-15)

    def test_equal_weights(self):
        essp, ess = effective_sample_size(WeightVector(np.ones(50)))
        assert essp == 1.0 and ess == 50.0

    def test_one_unit_dominates(self):
        w = np.zeros(10)
        w[0] = 5.0
        w[1:] = 1e-12
        essp, ess = effective_sample_size(WeightVector(w))
        assert ess == pytest.approx(1.0, abs=1e-6)

    def test_explicit_n(self):
        w = WeightVector(np.ones(4) * 2.5)
        _, ess = effective_sample_size(w, n=1000)
        assert ess == 1000.0


class TestWeightsSummary:
    def test_equal_weights(self):
        s = weights_summary(WeightVector(np.full(8, 3.0)))
        assert s.design_effect == 1.0
        assert s.min == s.max == 1.0
        assert s.prop_below[0.5] == 0.0
        assert s.prop_below[1.0] == 0.0
        assert s.prop_at_or_above[2.0] == 0.0

    def test_threshold_props_by_hand(self):
        s = weights_summary(WeightVector(np.array([0.25, 0.5, 1.0, 2.25])))
        assert s.prop_below[0.5] == 0.25
        assert s.prop_below[1.0] == 0.5
        assert s.prop_at_or_above[2.0] == 0.25
        assert s.prop_at_or_above[10.0] == 0.0

    def test_normalized_to_mean_one(self):
        s = weights_summary(WeightVector(np.array([10.0, 30.0])))
        assert s.mean == pytest.approx(1.0, rel=1e-15)
        assert s.min == 0.5 and s.max == 1.5


class TestWeightedMean:
    def test_equal_weights(self):
        assert weighted_mean(np.array([0.0, 10.0]), WeightVector(np.ones(2))) == 5.0

    def test_unequal(self):
        assert weighted_mean(
            np.array([0.0, 10.0]), WeightVector(np.array([1.0, 3.0]))
        ) == pytest.approx(7.5)

    def test_rescale_invariant(self):
        y = np.array([1.0, 2.0, 5.0])
        w = np.array([1.0, 2.0, 3.0])
        assert weighted_mean(y, WeightVector(w)) == pytest.approx(
            weighted_mean(y, WeightVector(4.4 * w)), rel=1e-14
        )

    def test_missing_excluded_pairwise(self):
        y = np.array([1.0, np.nan, 5.0])
        w = np.array([1.0, 100.0, 1.0])
        assert weighted_mean(y, WeightVector(w)) == 3.0

    def test_all_missing_errors(self):
        with pytest.raises(DegenerateVariableError):
            weighted_mean(np.array([np.nan, np.nan]), WeightVector(np.ones(2)))


class TestWeightedMeanVariance:
    def test_equal_weights_mle_form(self):
        y = np.array([1.0, 2.0, 3.0, 4.0])
        v = weighted_mean_variance(y, WeightVector(np.ones(4)))
        assert v == pytest.approx(0.3125, rel=1e-15)

    def test_constant_outcome(self):
        assert weighted_mean_variance(np.full(5, 3.3), WeightVector(np.ones(5))) == 0.0

    def test_hand_example(self):
        y = np.array([0.0, 0.0, 3.0])
        w = np.array([1.0, 1.0, 2.0])
        v = weighted_mean_variance(y, WeightVector(w))
        assert v == pytest.approx(0.84375, rel=1e-15)

    def test_single_observation_warns_zero(self):
        with pytest.warns(UserWarning, match="single observation"):
            v = weighted_mean_variance(np.array([5.0]), WeightVector(np.ones(1)))
        assert v == 0.0


class TestWeightedMeanCI:
    def test_degenerate_interval(self):
        y = np.full(4, 2.0)
        lo, hi = weighted_mean_ci(y, WeightVector(np.ones(4)), 0.05)
        assert lo == hi == 2.0

    def test_z_value(self):
        y = np.array([1.0, 2.0, 3.0, 4.0])
        lo, hi = weighted_mean_ci(y, WeightVector(np.ones(4)), 0.05)
        half = 1.959964 * np.sqrt(0.3125)
        assert hi - 2.5 == pytest.approx(half, abs=1e-5)
        assert 2.5 - lo == pytest.approx(half, abs=1e-5)

    def test_narrower_at_higher_alpha(self):
        y = np.array([1.0, 2.0, 3.0, 4.0])
        w = WeightVector(np.ones(4))
        lo1, hi1 = weighted_mean_ci(y, w, 0.05)
        lo2, hi2 = weighted_mean_ci(y, w, 0.32)
        assert (hi2 - lo2) < (hi1 - lo1)

    def test_alpha_validated(self):
        with pytest.raises(ValueError):
            weighted_mean_ci(np.ones(3), WeightVector(np.ones(3)), 1.5)


def numeric_pair_frames(s_vals, t_vals):
    s = pd.DataFrame({"id": [str(i) for i in range(len(s_vals))], "v": s_vals})
    t = pd.DataFrame({"id": [str(i + 10**6) for i in range(len(t_vals))], "v": t_vals})
    return pair_with_target(build_sample(s, "id"), build_sample(t, "id"))


class TestAsmd:
    def test_direct_formula(self):
        # sample mean 0, target mean 1, target SD 2 -> 0.5
        rng = np.random.default_rng(0)
        t_vals = rng.normal(1.0, 2.0, size=200000)
        t_vals = 1.0 + (t_vals - t_vals.mean()) * (2.0 / t_vals.std())
        s_vals = np.array([-1.0, 1.0, 0.0, 0.0])
        pair = numeric_pair_frames(list(s_vals), list(t_vals))
        table = asmd(pair)
        assert table.rows[0].unadjusted == pytest.approx(0.5, abs=1e-9)

    def test_uniform_weights_adjusted_equals_unadjusted(self):
        rng = np.random.default_rng(1)
        pair = make_pair(
            {"g": rng.choice(["a", "b"], 50), "h": rng.choice(["x", "y"], 50)},
            {"g": rng.choice(["a", "b"], 300), "h": rng.choice(["x", "y"], 300)},
        )
        table = asmd(pair, WeightVector(np.full(50, 2.0)))
        for row in table.rows:
            assert row.adjusted == row.unadjusted
            assert row.diff == 0.0

    def test_poststratified_weights_zero_asmd(self):
        rng = np.random.default_rng(2)
        pair = make_pair(
            {"g": rng.choice(["a", "b"], 100, p=[0.8, 0.2])},
            {"g": rng.choice(["a", "b"], 500, p=[0.5, 0.5])},
        )
        res = poststratify(pair, ["g"])
        table = asmd(pair, res.weights)
        for row in table.rows:
            assert row.adjusted == pytest.approx(0.0, abs=1e-12)
            assert row.diff >= 0.0

    def test_aggregated_averages_dummies(self):
        rng = np.random.default_rng(3)
        pair = make_pair(
            {"g": rng.choice(["a", "b", "c"], 200)},
            {"g": rng.choice(["a", "b", "c"], 800)},
        )
        per_dummy = asmd(pair)
        agg = asmd(pair, aggregate_by_main_covar=True)
        assert len(agg.rows) == 1
        expected = np.mean([r.unadjusted for r in per_dummy.rows])
        assert agg.rows[0].unadjusted == pytest.approx(expected, rel=1e-12)

    def test_mean_row_in_records(self):
        rng = np.random.default_rng(4)
        pair = make_pair(
            {"g": rng.choice(["a", "b"], 50), "h": rng.choice(["x", "y"], 50)},
            {"g": rng.choice(["a", "b"], 200), "h": rng.choice(["x", "y"], 200)},
        )
        table = asmd(pair, aggregate_by_main_covar=True)
        records = table.to_records()
        assert records[-1]["name"] == MEAN_ROW
        assert records[-1]["unadjusted"] == pytest.approx(
            np.mean([r.unadjusted for r in table.rows]), rel=1e-12
        )

    def test_all_missing_numeric_column_excluded(self):
        s = pd.DataFrame({"id": ["1", "2"], "g": ["a", "b"], "v": [np.nan, np.nan]})
        t = pd.DataFrame({"id": ["5", "6"], "g": ["a", "b"], "v": [1.0, 2.0]})
        pair = pair_with_target(build_sample(s, "id"), build_sample(t, "id"))
        with pytest.warns(UserWarning, match="no non-missing values"):
            table = asmd(pair)
        assert all(r.main_covar != "v" for r in table.rows)

    def test_zero_sd_column_excluded(self):
        pair = make_pair(
            {"g": ["a", "b", "a", "b"], "c": ["k", "k", "k", "j"]},
            {"g": ["a", "b", "b", "a"], "c": ["k", "k", "k", "k"]},
        )
        with pytest.warns(UserWarning, match="zero target SD"):
            table = asmd(pair)
        names = [r.name for r in table.rows]
        assert "c=k" not in names and "c=j" not in names


class TestOutcomeReport:
    def make_outcome_pair(self, with_target_outcome=True):
        s = pd.DataFrame(
            {
                "id": ["1", "2", "3", "4"],
                "g": ["a", "a", "b", "b"],
                "y": [1.0, 2.0, 3.0, 4.0],
            }
        )
        t = pd.DataFrame(
            {
                "id": ["11", "12", "13", "14"],
                "g": ["a", "b", "a", "b"],
                "y": [2.0, 3.0, 4.0, 5.0],
            }
        )
        return pair_with_target(
            build_sample(s, "id", outcome_cols=["y"]),
            build_sample(t, "id", outcome_cols=["y"] if with_target_outcome else None),
        )

    def test_uniform_weights_self_equals_unadjusted(self):
        pair = self.make_outcome_pair()
        report = outcome_report(pair, WeightVector(np.full(4, 3.0)))
        row = report.rows[0]
        assert row.self_mean == row.unadjusted_mean
        assert row.self_ci == row.unadjusted_ci

    def test_target_row_present_when_available(self):
        report = outcome_report(self.make_outcome_pair(True), None)
        assert report.rows[0].target_mean == pytest.approx(3.5)

    def test_target_row_absent_without_outcome(self):
        report = outcome_report(self.make_outcome_pair(False), None)
        assert report.rows[0].target_mean is None
        assert report.rows[0].target_ci is None

    def test_weighted_self_moves(self):
        pair = self.make_outcome_pair()
        report = outcome_report(pair, WeightVector(np.array([1.0, 1.0, 3.0, 3.0])))
        assert report.rows[0].self_mean > report.rows[0].unadjusted_mean


class TestPlotData:
    def test_bar_proportions_sum_to_one(self):
        rng = np.random.default_rng(5)
        pair = make_pair(
            {"g": rng.choice(["a", "b", "c"], 100)},
            {"g": rng.choice(["a", "b", "c"], 400)},
        )
        series = plot_data(pair, None, "g")
        assert series.kind == "bar"
        for source, points in series.series.items():
            assert sum(p for _, p in points) == pytest.approx(1.0, abs=1e-9)

    def test_uniform_weights_series_equal(self):
        rng = np.random.default_rng(6)
        pair = make_pair(
            {"g": rng.choice(["a", "b"], 60)}, {"g": rng.choice(["a", "b"], 200)}
        )
        series = plot_data(pair, WeightVector(np.ones(60)), "g")
        assert series.series["unadjusted_sample"] == series.series["weighted_sample"]

    def test_poststratified_bar_matches_target(self):
        rng = np.random.default_rng(7)
        pair = make_pair(
            {"g": rng.choice(["a", "b"], 100, p=[0.75, 0.25])},
            {"g": rng.choice(["a", "b"], 500, p=[0.5, 0.5])},
        )
        res = poststratify(pair, ["g"])
        series = plot_data(pair, res.weights, "g")
        weighted = dict(series.series["weighted_sample"])
        target = dict(series.series["target"])
        for level in weighted:
            assert weighted[level] == pytest.approx(target[level], abs=1e-12)

    def test_kde_integrates_to_one(self):
        rng = np.random.default_rng(8)
        pair = numeric_pair_frames(
            list(rng.normal(0, 1, 300)), list(rng.normal(0.5, 1.2, 900))
        )
        series = plot_data(pair, None, "v")
        assert series.kind == "kde"
        for source, points in series.series.items():
            grid = np.array([x for x, _ in points])
            dens = np.array([d for _, d in points])
            assert np.all(dens >= 0)
            assert np.trapezoid(dens, grid) == pytest.approx(1.0, abs=1e-3)

    def test_constant_numeric_degenerate(self):
        pair = numeric_pair_frames([2.0, 2.0, 2.0], [2.0] * 10)
        with pytest.raises(DegenerateVariableError):
            plot_data(pair, None, "v")

    def test_unknown_variable(self):
        pair = numeric_pair_frames([1.0, 2.0], [1.0, 2.0, 3.0])
        with pytest.raises(UnknownColumnError):
            plot_data(pair, None, "bogus")

    def test_outcome_without_target_column(self):
        s = pd.DataFrame({"id": ["1", "2"], "g": ["a", "b"], "y": [1.0, 2.0]})
        t = pd.DataFrame({"id": ["5", "6"], "g": ["a", "b"]})
        pair = pair_with_target(
            build_sample(s, "id", outcome_cols=["y"]), build_sample(t, "id")
        )
        series = plot_data(pair, None, "y")
        assert "target" not in series.series

    def test_weighted_kde_respects_weights(self):
        x = np.array([0.0] * 50 + [10.0] * 50)
        w_left = np.array([9.0] * 50 + [1.0] * 50)
        grid, dens = weighted_kde(x, w_left)
        mass_left = np.trapezoid(dens[grid < 5], grid[grid < 5])
        assert mass_left == pytest.approx(0.9, abs=0.02)
