"""
Step 1: measure how unrepresentative a sample is
================================================

A simulated survey sample over-represents men, younger respondents, and
lower incomes relative to its target population. Before fitting any
weights, quantify that imbalance: per-covariate ASMD (mean gaps in target
standard-deviation units) and distribution data for plotting.
"""

import numpy as np

from rebalance import (
    asmd,
    build_sample,
    pair_with_target,
    plot_data,
    simulate_survey_data,
)

sample_df, target_df = simulate_survey_data(seed=0)
print("sample head:")
print(sample_df.head(), "\n")

sample = build_sample(sample_df, id_col="id", outcome_cols=["happiness"])
target = build_sample(target_df, id_col="id", outcome_cols=["happiness"])
pair = pair_with_target(sample, target)
print(pair, "\n")

# Aggregated ASMD: one row per covariate, averaging the one-hot levels of
# categorical covariates so wide covariates don't dominate the mean row.
table = asmd(pair, weights=None, aggregate_by_main_covar=True)
print("pre-adjustment imbalance (ASMD, aggregated by covariate):")
print(table.to_frame().round(3), "\n")

# Per-level detail shows which categories drive the imbalance.
detail = asmd(pair, weights=None)
print("per-level detail:")
print(detail.to_frame().round(3), "\n")

# Bar data for a categorical covariate: proportions per source.
bars = plot_data(pair, None, "gender")
print("gender proportions by source:")
for source, points in bars.series.items():
    line = ", ".join(f"{level}={prop:.3f}" for level, prop in points)
    print(f"  {source:18s} {line}")

# KDE data for a numeric covariate: (grid, density) pairs per source,
# ready for any plotting library.
kde = plot_data(pair, None, "income")
for source, points in kde.series.items():
    xs = np.array([x for x, _ in points])
    ds = np.array([d for _, d in points])
    mode = xs[np.argmax(ds)]
    print(f"income KDE mode for {source}: {mode:.1f}")
