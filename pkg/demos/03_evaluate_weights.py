"""
Step 3: evaluate what the weights bought and what they cost
===========================================================

After fitting, three questions matter: did covariate balance improve, how
much effective sample size was spent, and did the outcome estimate move
toward the population truth? The simulation carries the target outcome, so
the last check is directly observable here (it never is in production).
"""

from rebalance import (
    IpwConfig,
    asmd,
    build_sample,
    effective_sample_size,
    ipw,
    outcome_report,
    pair_with_target,
    simulate_survey_data,
    weights_summary,
)

sample_df, target_df = simulate_survey_data(seed=0)
pair = pair_with_target(
    build_sample(sample_df, id_col="id", outcome_cols=["happiness"]),
    build_sample(target_df, id_col="id", outcome_cols=["happiness"]),
)
res = ipw(pair, IpwConfig(seed=0))

# Covariate balance, before vs after.
table = asmd(pair, res.weights, aggregate_by_main_covar=True)
print("ASMD after weighting (self) vs before (unadjusted):")
print(table.to_frame().round(3), "\n")

# Weight distribution: the price of the adjustment. Weights are shown
# normalized to mean 1, so values below 1 mark down-weighted respondents.
summary = weights_summary(res.weights)
print(f"design effect:              {summary.design_effect:.3f}")
print(f"effective sample proportion {summary.effective_sample_proportion:.3f}")
print(f"effective sample size       {summary.effective_sample_size:.1f} of {pair.n}")
print(f"weight range                [{summary.min:.2f}, {summary.max:.2f}]")
print(f"prop(w < 1)                 {summary.prop_below[1.0]:.2f}")
print(f"prop(w >= 2)                {summary.prop_at_or_above[2.0]:.2f}\n")

essp, ess = effective_sample_size(res.weights)
assert abs(ess - summary.effective_sample_size) < 1e-9

# Outcome movement: weighted sample mean vs the unweighted one, with
# normal-approximation confidence intervals.
report = outcome_report(pair, res.weights, alpha=0.05)
row = report.rows[0]
print("happiness estimates:")
print(f"  self (weighted)  {row.self_mean:7.3f}  CI ({row.self_ci[0]:.3f}, {row.self_ci[1]:.3f})")
print(f"  target           {row.target_mean:7.3f}  CI ({row.target_ci[0]:.3f}, {row.target_ci[1]:.3f})")
print(f"  unadjusted       {row.unadjusted_mean:7.3f}  CI ({row.unadjusted_ci[0]:.3f}, {row.unadjusted_ci[1]:.3f})")

bias_before = abs(row.unadjusted_mean - row.target_mean)
bias_after = abs(row.self_mean - row.target_mean)
print(f"\nbias: {bias_before:.2f} points before, {bias_after:.2f} after "
      f"({100 * (1 - bias_after / bias_before):.0f}% removed)")
