"""Simulated survey data with a known selection bias.

The generator produces a target population and a self-selected sample over
three covariates (gender, age_group, income) and one outcome (happiness).
The sample over-represents men, younger respondents, and lower incomes,
and the outcome depends on all three covariates through the same
structural equation in both populations, so weighting on the covariates
recovers most of the outcome bias. A small share of gender values is
missing in both populations.
"""

from __future__ import annotations

import numpy as np
import pandas as pd

_AGE_LEVELS = ("18-24", "25-34", "35-44", "45+")

_TARGET_GENDER_P = (0.46, 0.46, 0.08)  # Male, Female, missing
_SAMPLE_GENDER_P = (0.64, 0.28, 0.08)
_TARGET_AGE_P = (0.20, 0.30, 0.30, 0.20)
_SAMPLE_AGE_P = (0.38, 0.32, 0.19, 0.11)


def _happiness(rng, gender, age_group, income):
    base = rng.normal(40.0, 10.0, size=len(income))
    return (
        base
        + 10.0 * (gender == "Female")
        + 5.0 * (age_group == "35-44")
        + 12.0 * (age_group == "45+")
        + 0.3 * income
    )


def _frame(rng, n, id_start, gender_p, age_p, income_mu, income_sd):
    gender = rng.choice(["Male", "Female", None], size=n, p=gender_p)
    age_group = rng.choice(_AGE_LEVELS, size=n, p=age_p)
    income = rng.normal(income_mu, income_sd, size=n) ** 2
    return pd.DataFrame(
        {
            "id": [str(i) for i in range(id_start, id_start + n)],
            "gender": [g if g is not None else np.nan for g in gender],
            "age_group": age_group,
            "income": income,
            "happiness": _happiness(rng, gender, age_group, income),
        }
    )


def simulate_survey_data(
    seed: int = 0, n_sample: int = 1000, n_target: int = 10000
) -> tuple[pd.DataFrame, pd.DataFrame]:
    """Return ``(sample_df, target_df)`` with a biased sample.

    Both frames carry columns id, gender, age_group, income, happiness.
    The target outcome is included so demos and tests can compare the
    weighted sample estimate against the population truth.
    """
    rng = np.random.default_rng(seed)
    target = _frame(rng, n_target, 100_000, _TARGET_GENDER_P, _TARGET_AGE_P, 3.0, 2.0)
    sample = _frame(rng, n_sample, 0, _SAMPLE_GENDER_P, _SAMPLE_AGE_P, 2.0, 1.6)
    return sample, target
