"""
Step 2: fit survey weights four ways
====================================

The same biased sample weighted by each estimator:

* post-stratification on the joint gender x age cross,
* raking to the gender / age / bucketed-income margins,
* inverse propensity weighting (lasso-penalized logistic model),
* covariate balancing propensity scores (exact first-moment balance).

Weights always sum to the target population size, so each weight reads as
"how many population units this respondent stands for".
"""

import numpy as np

from rebalance import (
    CbpsConfig,
    IpwConfig,
    apply_transforms,
    asmd,
    build_sample,
    cbps,
    ipw,
    kish_deff,
    pair_with_target,
    poststratify,
    rake,
    simulate_survey_data,
)

sample_df, target_df = simulate_survey_data(seed=0)
pair = pair_with_target(
    build_sample(sample_df, id_col="id", outcome_cols=["happiness"]),
    build_sample(target_df, id_col="id", outcome_cols=["happiness"]),
)

# Post-stratification and raking need all-categorical covariates, which is
# what the shared pre-processing produces (income becomes decile buckets).
tpair = apply_transforms(pair)

results = {
    "poststratify": poststratify(tpair, ["gender", "age_group"]),
    "rake": rake(tpair, ["gender", "age_group", "income"]),
    "ipw": ipw(pair, IpwConfig(seed=0)),
    "ipw (max_de=1.5)": ipw(pair, IpwConfig(max_de=1.5, seed=0)),
    "cbps": cbps(pair, CbpsConfig(seed=0)),
}

before = asmd(pair, None, aggregate_by_main_covar=True).mean_unadjusted
print(f"mean ASMD before weighting: {before:.3f}\n")
print(f"{'method':18s} {'deff':>6s} {'mean ASMD':>10s} {'reduction':>10s}  notes")
for name, res in results.items():
    after = asmd(pair, res.weights, aggregate_by_main_covar=True).mean_adjusted
    deff = kish_deff(res.weights)
    reduction = 100 * (before - after) / before
    if res.method == "ipw":
        note = f"lambda={res.fit_meta['lambda']:.3g}"
    elif res.method == "cbps":
        note = f"residual={res.fit_meta['balance_residual_norm']:.1e}"
    elif res.method == "rake":
        note = f"stopped: {res.fit_meta['stopping_criterion']}"
    else:
        note = f"{res.fit_meta['n_strata']} strata"
    print(f"{name:18s} {deff:6.3f} {after:10.3f} {reduction:9.1f}%  {note}")

print("\nweights sum to the population size for every method:")
for name, res in results.items():
    print(f"  {name:18s} sum={res.weights.values.sum():.1f}")

# The design-effect budget trades balance for variance: compare the two
# ipw fits above. A tighter budget keeps weights closer to uniform.
w_free = results["ipw"].weights.values
w_tight = results["ipw (max_de=1.5)"].weights.values
print(f"\nweight ranges: unbounded ipw [{w_free.min():.2f}, {w_free.max():.2f}],"
      f" bounded [{w_tight.min():.2f}, {w_tight.max():.2f}]")
