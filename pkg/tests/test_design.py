"""Tests for transforms, the formula language, and the model matrix."""

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rebalance import (
    TransformConfig,
    apply_transforms,
    build_model_matrix,
    build_sample,
    pair_with_target,
    parse_formula,
)
from rebalance.design import weighted_quantile
from rebalance.errors import FormulaError, KindMismatchError, TransformError
from rebalance.sample import LUMPED_LEVEL, MISSING_LEVEL

from helpers import make_pair


def numeric_pair(sample_values, target_values, **kwargs):
    s = pd.DataFrame({"id": [str(i) for i in range(len(sample_values))], "v": sample_values})
    t = pd.DataFrame(
        {"id": [str(i + 10000) for i in range(len(target_values))], "v": target_values}
    )
    return pair_with_target(build_sample(s, "id"), build_sample(t, "id"))


class TestTransforms:
    def test_ten_near_equal_buckets(self):
        rng = np.random.default_rng(7)
        pair = numeric_pair(rng.normal(size=200), rng.normal(size=5000))
        out = apply_transforms(pair)
        levels = out.target.levels("v")
        assert levels == tuple(f"q{i:02d}" for i in range(1, 11))
        props = np.array([(out.target.covariates["v"] == lv).mean() for lv in levels])
        assert np.all(np.abs(props - 0.1) < 0.02)

    def test_missing_gender_gets_na_level(self):
        rng = np.random.default_rng(1)
        g_sample = rng.choice(["Male", "Female", None], size=100, p=[0.5, 0.4, 0.1])
        g_target = rng.choice(["Male", "Female", None], size=400, p=[0.45, 0.45, 0.1])
        pair = make_pair({"gender": g_sample}, {"gender": g_target})
        out = apply_transforms(pair)
        assert set(out.sample.levels("gender")) == {"Male", "Female", MISSING_LEVEL}

    def test_constant_covariate_dropped(self):
        pair = numeric_pair([5.0] * 10, [5.0] * 40)
        with pytest.warns(UserWarning, match="single level"):
            out = apply_transforms(pair)
        assert out.common_covariates == ()

    def test_rare_level_lumped(self):
        g_sample = np.array(["a"] * 50 + ["b"] * 45 + ["c"] * 5)
        g_target = np.array(["a"] * 250 + ["b"] * 245 + ["c"] * 5)  # c: 1% of target
        pair = make_pair({"g": g_sample}, {"g": g_target})
        out = apply_transforms(pair)
        assert set(out.sample.levels("g")) == {"a", "b", LUMPED_LEVEL}

    def test_sample_only_level_lumped(self):
        pair = make_pair(
            {"g": ["a"] * 40 + ["zzz"] * 10}, {"g": ["a"] * 100 + ["b"] * 100}
        )
        out = apply_transforms(pair)
        assert LUMPED_LEVEL in out.sample.levels("g")
        assert "zzz" not in out.sample.levels("g")

    def test_missing_numeric_excluded_from_bucketing(self):
        pair = numeric_pair([1.0, np.nan, 3.0], list(np.arange(100.0)))
        out = apply_transforms(pair)
        assert out.sample.covariates["v"][1] == MISSING_LEVEL
        assert out.sample.covariates["v"][0].startswith("q")

    def test_all_missing_target_numeric_errors(self):
        pair = numeric_pair([1.0, 2.0], [np.nan, np.nan, np.nan])
        with pytest.raises(TransformError):
            apply_transforms(pair)

    def test_missing_disallowed_when_indicators_off(self):
        pair = numeric_pair([1.0, np.nan], list(np.arange(50.0)))
        with pytest.raises(TransformError):
            apply_transforms(pair, TransformConfig(add_missing_indicators=False))

    def test_deterministic(self):
        rng = np.random.default_rng(3)
        pair = numeric_pair(rng.normal(size=50), rng.normal(size=300))
        a = apply_transforms(pair)
        b = apply_transforms(pair)
        assert (a.sample.covariates["v"] == b.sample.covariates["v"]).all()
        assert (a.target.covariates["v"] == b.target.covariates["v"]).all()

    def test_tie_heavy_collapses_buckets(self):
        # half the target mass sits on one value: duplicate edges collapse
        target = [1.0] * 500 + list(np.linspace(2, 3, 500))
        pair = numeric_pair([1.0, 2.5], target)
        out = apply_transforms(pair, TransformConfig(rare_level_min_prop=0.0))
        n_levels = len(set(out.target.covariates["v"]))
        assert 2 <= n_levels < 10

    @given(st.lists(st.floats(-100, 100), min_size=2, max_size=40))
    @settings(max_examples=60, deadline=None)
    def test_bucket_monotone(self, values):
        rng = np.random.default_rng(0)
        target = list(rng.normal(scale=50, size=200))
        pair = numeric_pair(values, target)
        out = apply_transforms(pair, TransformConfig(rare_level_min_prop=0.0))
        if "v" not in out.common_covariates:
            return
        labels = out.sample.covariates["v"]
        order = np.argsort(np.array(values))
        sorted_labels = [labels[i] for i in order]
        assert sorted_labels == sorted(sorted_labels)


class TestWeightedQuantile:
    def test_unweighted_matches_inverse_ecdf(self):
        v = np.arange(1.0, 11.0)
        w = np.ones(10)
        assert weighted_quantile(v, w, [0.1])[0] == 1.0
        assert weighted_quantile(v, w, [0.5])[0] == 5.0
        assert weighted_quantile(v, w, [1.0])[0] == 10.0

    def test_weights_shift_quantiles(self):
        v = np.array([1.0, 2.0, 3.0])
        w = np.array([8.0, 1.0, 1.0])
        assert weighted_quantile(v, w, [0.5])[0] == 1.0


class TestFormula:
    COVARS = ["gender", "age_group", "income"]

    def test_additive(self):
        ast = parse_formula("gender + age_group", self.COVARS)
        assert ast.terms == (("gender",), ("age_group",))

    def test_star_expansion(self):
        ast = parse_formula("gender * age_group", self.COVARS)
        assert ast.terms == (("gender",), ("age_group",), ("gender", "age_group"))

    def test_dedup(self):
        ast = parse_formula("gender + gender", self.COVARS)
        assert ast.terms == (("gender",),)

    def test_interaction_order_insensitive_dedup(self):
        ast = parse_formula("gender:age_group + age_group:gender", self.COVARS)
        assert len(ast.terms) == 1

    def test_parentheses_distribute(self):
        ast = parse_formula("(gender + age_group):income", self.COVARS)
        assert ast.terms == (("gender", "income"), ("age_group", "income"))

    def test_default_formula(self):
        ast = parse_formula(None, self.COVARS)
        assert ast.terms == (("gender",), ("age_group",), ("income",))

    def test_unknown_name(self):
        with pytest.raises(FormulaError, match="unknown covariate"):
            parse_formula("gender + bogus", self.COVARS)

    def test_syntax_error_position(self):
        with pytest.raises(FormulaError) as err:
            parse_formula("gender + + age_group", self.COVARS)
        assert err.value.position is not None

    def test_unbalanced_paren(self):
        with pytest.raises(FormulaError):
            parse_formula("(gender + age_group", self.COVARS)

    def test_self_interaction_collapses(self):
        ast = parse_formula("gender:gender", self.COVARS)
        assert ast.terms == (("gender",),)


class TestModelMatrix:
    def test_two_level_drop_first(self):
        pair = make_pair(
            {"gender": ["Male", "Female"] * 5}, {"gender": ["Male", "Female"] * 20}
        )
        mm = build_model_matrix(pair)
        assert mm.columns == ("gender=Male",)  # Female is the reference
        assert mm.sample_block[:, 0].tolist() == [1.0, 0.0] * 5

    def test_interaction_columns_by_hand(self):
        pair = make_pair(
            {"gender": ["F", "F", "M", "M"], "ab": ["a", "b", "a", "b"]},
            {"gender": ["F", "M", "F", "M"], "ab": ["b", "a", "a", "b"]},
        )
        ast = parse_formula("gender * ab", ["gender", "ab"])
        mm = build_model_matrix(pair, ast)
        assert mm.columns == ("gender=M", "ab=b", "gender=M:ab=b")
        expected = np.array(
            [[0, 0, 0], [0, 1, 0], [1, 0, 0], [1, 1, 1]], dtype=float
        )
        assert np.array_equal(mm.sample_block, expected)
        assert mm.column_to_main_covar["gender=M:ab=b"] == "gender:ab"

    def test_constant_column_removed(self):
        # level "c" only ever co-occurs entirely: interaction column all-zero
        pair = make_pair(
            {"g": ["a", "b", "a", "b"], "h": ["x", "x", "y", "y"]},
            {"g": ["a", "b", "a", "b"], "h": ["x", "x", "y", "y"]},
        )
        ast = parse_formula("g:h", ["g", "h"])
        mm = build_model_matrix(pair, ast)
        for j in range(mm.k):
            stacked = np.concatenate([mm.sample_block[:, j], mm.target_block[:, j]])
            assert stacked.min() != stacked.max()

    def test_requires_categorical(self):
        pair = numeric_pair([1.0, 2.0], [1.0, 2.0, 3.0])
        with pytest.raises(KindMismatchError):
            build_model_matrix(pair)

    def test_formula_references_dropped_covariate(self):
        pair = numeric_pair([5.0] * 5, [5.0] * 20)
        with pytest.warns(UserWarning):
            out = apply_transforms(pair)
        ast = parse_formula("v", ["v"])  # parsed against the pre-drop names
        with pytest.raises(FormulaError):
            build_model_matrix(out, ast)

    def test_column_space_identical_random_schemas(self):
        rng = np.random.default_rng(11)
        for _ in range(10):
            n_levels = int(rng.integers(2, 5))
            levels = [f"l{i}" for i in range(n_levels)]
            pair = make_pair(
                {"g": rng.choice(levels, size=50)},
                {"g": rng.choice(levels, size=200)},
            )
            mm = build_model_matrix(pair)
            assert mm.sample_block.shape[1] == mm.target_block.shape[1] == mm.k

    def test_every_unit_hits_one_column_or_reference(self):
        pair = make_pair(
            {"g": ["a", "b", "c", "a"]}, {"g": ["a", "b", "c", "c"]}
        )
        mm = build_model_matrix(pair)
        # two non-reference levels -> each row has at most one hot column
        assert (mm.sample_block.sum(axis=1) <= 1).all()
        ref_rows = mm.sample_block.sum(axis=1) == 0
        assert (pair.sample.covariates["g"][ref_rows] == "a").all()
