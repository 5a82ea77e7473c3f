"""Covariate balance, weight distribution, and outcome diagnostics.

ASMD compares weighted sample means to target means in target
standard-deviation units, per one-hot level for categorical covariates and
directly for numeric ones. Weight summaries report Kish's design effect,
the implied effective sample size, and the shape of the sample-sum
normalized weight distribution. Outcome summaries give weighted means with
normal-approximation confidence intervals. ``plot_data`` emits bar or
weighted-KDE series for external rendering; nothing here draws figures.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from statistics import NormalDist

import numpy as np

from .design import weighted_quantile
from .errors import DegenerateVariableError, UnknownColumnError
from .sample import ColumnKind, PairedSample, WeightVector

_WEIGHT_THRESHOLDS_BELOW = (0.5, 1.0)
_WEIGHT_THRESHOLDS_AT_OR_ABOVE = (2.0, 10.0)

MEAN_ROW = "mean(asmd)"


# --------------------------------------------------------------------------
# Weight formulas
# --------------------------------------------------------------------------


def kish_deff(w: WeightVector) -> float:
    """Kish's design effect ``n * sum(w^2) / sum(w)^2``; scale-invariant."""
    v = w.values
    return float(len(v) * (v @ v) / v.sum() ** 2)


def effective_sample_size(w: WeightVector, n: int | None = None) -> tuple[float, float]:
    """(effective sample proportion, effective sample size) = (1, n) / Deff."""
    if n is None:
        n = len(w)
    deff = kish_deff(w)
    return 1.0 / deff, n / deff


@dataclass(frozen=True)
class WeightSummary:
    """Distribution summary of sample-sum normalized weights."""

    design_effect: float
    effective_sample_proportion: float
    effective_sample_size: float
    min: float
    q25: float
    median: float
    q75: float
    max: float
    mean: float
    std: float
    prop_below: dict[float, float]
    prop_at_or_above: dict[float, float]

    def to_dict(self) -> dict:
        out = {
            "design_effect": self.design_effect,
            "effective_sample_proportion": self.effective_sample_proportion,
            "effective_sample_size": self.effective_sample_size,
            "describe_min": self.min,
            "describe_25%": self.q25,
            "describe_median": self.median,
            "describe_75%": self.q75,
            "describe_max": self.max,
            "describe_mean": self.mean,
            "describe_std": self.std,
        }
        for t, v in self.prop_below.items():
            out[f"prop(w < {t:g})"] = v
        for t, v in self.prop_at_or_above.items():
            out[f"prop(w >= {t:g})"] = v
        return out


def weights_summary(w: WeightVector) -> WeightSummary:
    """Summarize weights after normalizing them to mean 1."""
    v = w.values / w.values.mean()
    deff = float(len(v) * (v @ v) / v.sum() ** 2)
    q25, med, q75 = np.quantile(v, [0.25, 0.5, 0.75])  # linear interpolation
    return WeightSummary(
        design_effect=deff,
        effective_sample_proportion=1.0 / deff,
        effective_sample_size=len(v) / deff,
        min=float(v.min()),
        q25=float(q25),
        median=float(med),
        q75=float(q75),
        max=float(v.max()),
        mean=float(v.mean()),
        std=float(v.std(ddof=1)) if len(v) > 1 else 0.0,
        prop_below={t: float((v < t).mean()) for t in _WEIGHT_THRESHOLDS_BELOW},
        prop_at_or_above={
            t: float((v >= t).mean()) for t in _WEIGHT_THRESHOLDS_AT_OR_ABOVE
        },
    )


# --------------------------------------------------------------------------
# Outcome estimators
# --------------------------------------------------------------------------


def _drop_missing(y: np.ndarray, w: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    ok = ~np.isnan(y)
    if not ok.any():
        raise DegenerateVariableError("all outcome values are missing")
    return y[ok], w[ok]


def weighted_mean(y: np.ndarray, w: WeightVector) -> float:
    """Ratio-form weighted mean; missing outcomes drop with their weights."""
    y = np.asarray(y, dtype=float)
    yy, ww = _drop_missing(y, w.values)
    return float(ww @ yy / ww.sum())


def weighted_mean_variance(y: np.ndarray, w: WeightVector) -> float:
    """Linearization variance of the weighted mean (fixed-weights form)."""
    y = np.asarray(y, dtype=float)
    yy, ww = _drop_missing(y, w.values)
    if len(yy) == 1:
        warnings.warn("single observation; variance of the mean is 0", stacklevel=2)
        return 0.0
    ybar = ww @ yy / ww.sum()
    return float((ww**2 @ (yy - ybar) ** 2) / ww.sum() ** 2)


def weighted_mean_ci(
    y: np.ndarray, w: WeightVector, alpha: float = 0.05
) -> tuple[float, float]:
    """Normal-approximation confidence interval for the weighted mean."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must be in (0, 1)")
    mean = weighted_mean(y, w)
    half = NormalDist().inv_cdf(1.0 - alpha / 2.0) * math.sqrt(
        weighted_mean_variance(y, w)
    )
    return mean - half, mean + half


# --------------------------------------------------------------------------
# ASMD
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class AsmdRow:
    name: str
    main_covar: str
    adjusted: float
    unadjusted: float

    @property
    def diff(self) -> float:
        return self.unadjusted - self.adjusted


@dataclass(frozen=True)
class AsmdTable:
    """Per-column (or per-covariate) ASMD values plus a mean row."""

    rows: tuple[AsmdRow, ...]
    aggregated: bool

    @property
    def mean_adjusted(self) -> float:
        return float(np.mean([r.adjusted for r in self.rows]))

    @property
    def mean_unadjusted(self) -> float:
        return float(np.mean([r.unadjusted for r in self.rows]))

    def to_records(self) -> list[dict]:
        recs = [
            {
                "name": r.name,
                "self": r.adjusted,
                "unadjusted": r.unadjusted,
                "unadjusted - self": r.diff,
            }
            for r in self.rows
        ]
        recs.append(
            {
                "name": MEAN_ROW,
                "self": self.mean_adjusted,
                "unadjusted": self.mean_unadjusted,
                "unadjusted - self": self.mean_unadjusted - self.mean_adjusted,
            }
        )
        return recs

    def to_frame(self):
        import pandas as pd

        return pd.DataFrame(self.to_records()).set_index("name")


def _asmd_columns(pair: PairedSample) -> tuple[list[str], list[str], np.ndarray, np.ndarray]:
    """Encode the raw pair for balance checks.

    Categorical covariates expand to one column per level (full one-hot, no
    reference drop); numeric covariates stay as single columns. Returns
    (column names, owning covariate per column, sample block, target block
    with NaN kept for missing numeric cells).
    """
    names: list[str] = []
    owners: list[str] = []
    s_cols: list[np.ndarray] = []
    t_cols: list[np.ndarray] = []
    for covar in pair.common_covariates:
        kind = pair.sample.covariate_kinds[covar]
        s = pair.sample.covariates[covar]
        t = pair.target.covariates[covar]
        if kind is ColumnKind.NUMERIC:
            names.append(covar)
            owners.append(covar)
            s_cols.append(s.astype(float))
            t_cols.append(t.astype(float))
        else:
            levels = sorted(set(s) | set(t))
            for level in levels:
                names.append(f"{covar}={level}")
                owners.append(covar)
                s_cols.append((s == level).astype(float))
                t_cols.append((t == level).astype(float))
    return names, owners, np.column_stack(s_cols), np.column_stack(t_cols)


def _informative_weights(fitted: np.ndarray, design: np.ndarray) -> np.ndarray:
    """Fitted weights, or the design weights when they carry no information.

    Every diagnostic here is scale-invariant in the weights, so weights
    exactly proportional to the design weights must reproduce the
    unadjusted numbers bit for bit; reusing the design array guarantees
    that through floating point.
    """
    ratio = fitted / design
    if np.all(ratio == ratio[0]):
        return design
    return fitted


def _column_mean(col: np.ndarray, w: np.ndarray) -> float:
    ok = ~np.isnan(col)
    return float(w[ok] @ col[ok] / w[ok].sum())


def _column_sd(col: np.ndarray, w: np.ndarray) -> float:
    ok = ~np.isnan(col)
    mu = w[ok] @ col[ok] / w[ok].sum()
    return float(np.sqrt(w[ok] @ (col[ok] - mu) ** 2 / w[ok].sum()))


def asmd(
    pair: PairedSample,
    weights: WeightVector | None = None,
    aggregate_by_main_covar: bool = False,
) -> AsmdTable:
    """Absolute standardized mean deviation per encoded column.

    Each column's gap between the weighted sample mean and the target mean
    is scaled by the target standard deviation (design-weighted, population
    convention). The ``unadjusted`` side always uses design weights; with
    ``weights=None`` the adjusted side equals it. Aggregation averages the
    one-hot columns of each covariate so every covariate counts once in the
    mean row. Columns with zero target SD are excluded with a warning.
    """
    names, owners, s_block, t_block = _asmd_columns(pair)
    dw = pair.sample.design_weights
    tw = pair.target.design_weights
    fw = _informative_weights(weights.values, dw) if weights is not None else dw

    rows: list[AsmdRow] = []
    for name, owner, j in zip(names, owners, range(len(names))):
        if np.isnan(t_block[:, j]).all() or np.isnan(s_block[:, j]).all():
            warnings.warn(
                f"column {name!r} has no non-missing values on one side; "
                "excluded from ASMD",
                stacklevel=2,
            )
            continue
        sd = _column_sd(t_block[:, j], tw)
        if sd == 0.0:
            warnings.warn(
                f"column {name!r} has zero target SD; excluded from ASMD",
                stacklevel=2,
            )
            continue
        t_mean = _column_mean(t_block[:, j], tw)
        adj = abs(_column_mean(s_block[:, j], fw) - t_mean) / sd
        unadj = abs(_column_mean(s_block[:, j], dw) - t_mean) / sd
        rows.append(AsmdRow(name=name, main_covar=owner, adjusted=adj, unadjusted=unadj))

    if aggregate_by_main_covar:
        by_covar: dict[str, list[AsmdRow]] = {}
        for r in rows:
            by_covar.setdefault(r.main_covar, []).append(r)
        rows = [
            AsmdRow(
                name=covar,
                main_covar=covar,
                adjusted=float(np.mean([r.adjusted for r in group])),
                unadjusted=float(np.mean([r.unadjusted for r in group])),
            )
            for covar, group in by_covar.items()
        ]
    return AsmdTable(rows=tuple(rows), aggregated=aggregate_by_main_covar)


# --------------------------------------------------------------------------
# Outcome report
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class OutcomeRow:
    outcome: str
    self_mean: float
    self_ci: tuple[float, float]
    unadjusted_mean: float
    unadjusted_ci: tuple[float, float]
    target_mean: float | None
    target_ci: tuple[float, float] | None


@dataclass(frozen=True)
class OutcomeReport:
    rows: tuple[OutcomeRow, ...]
    alpha: float


def outcome_report(
    pair: PairedSample, weights: WeightVector | None, alpha: float = 0.05
) -> OutcomeReport:
    """Weighted, unweighted, and (when available) target outcome means.

    Covers numeric outcomes of the sample; the target row appears only for
    outcomes the target also carries.
    """
    rows = []
    for name in pair.sample.outcome_names:
        if pair.sample.outcome_kinds[name] is not ColumnKind.NUMERIC:
            continue
        y = pair.sample.outcomes[name]
        dw = WeightVector(pair.sample.design_weights)
        fw = dw
        if weights is not None:
            fw = WeightVector(
                _informative_weights(weights.values, dw.values), weights.scale
            )
        t_mean = t_ci = None
        if (
            name in pair.target.outcomes
            and pair.target.outcome_kinds[name] is ColumnKind.NUMERIC
        ):
            ty = pair.target.outcomes[name]
            tw = WeightVector(pair.target.design_weights)
            t_mean = weighted_mean(ty, tw)
            t_ci = weighted_mean_ci(ty, tw, alpha)
        rows.append(
            OutcomeRow(
                outcome=name,
                self_mean=weighted_mean(y, fw),
                self_ci=weighted_mean_ci(y, fw, alpha),
                unadjusted_mean=weighted_mean(y, dw),
                unadjusted_ci=weighted_mean_ci(y, dw, alpha),
                target_mean=t_mean,
                target_ci=t_ci,
            )
        )
    return OutcomeReport(rows=tuple(rows), alpha=alpha)


# --------------------------------------------------------------------------
# Plot data
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class PlotSeries:
    """Numbers behind one diagnostic plot; rendering is the caller's job.

    For ``kind="bar"`` each source maps to (level, proportion) pairs; for
    ``kind="kde"`` each source maps to (grid, density) arrays.
    """

    variable: str
    kind: str
    series: dict[str, list[tuple]]


def _silverman_bandwidth(x: np.ndarray, w: np.ndarray) -> float:
    wn = w / w.sum()
    mu = wn @ x
    sd = math.sqrt(wn @ (x - mu) ** 2)
    q25, q75 = weighted_quantile(x, w, [0.25, 0.75])
    iqr = float(q75 - q25)
    spread = min(sd, iqr / 1.34) if iqr > 0 else sd
    n_eff = 1.0 / float(wn @ wn)  # effective count under the weights
    return 0.9 * spread * n_eff ** (-0.2)


def weighted_kde(
    x: np.ndarray, w: np.ndarray, grid_size: int = 512
) -> tuple[np.ndarray, np.ndarray]:
    """Gaussian KDE with per-point weights on a Silverman-bandwidth grid."""
    ok = ~np.isnan(x)
    x, w = x[ok], w[ok]
    if len(x) == 0:
        raise DegenerateVariableError("no non-missing values for KDE")
    h = _silverman_bandwidth(x, w)
    if h <= 0.0:
        raise DegenerateVariableError(
            "zero KDE bandwidth: variable has no spread (constant values)"
        )
    grid = np.linspace(x.min() - 3.0 * h, x.max() + 3.0 * h, grid_size)
    z = (grid[:, None] - x[None, :]) / h
    kernel = np.exp(-0.5 * z**2) / math.sqrt(2.0 * math.pi)
    density = kernel @ (w / w.sum()) / h
    return grid, density


def plot_data(
    pair: PairedSample,
    weights: WeightVector | None,
    variable: str,
    kind: str = "auto",
) -> PlotSeries:
    """Bar proportions or KDE curves per source for one variable.

    Sources are the design-weighted sample (``unadjusted_sample``), the
    sample under the fitted weights (``weighted_sample``), and the target
    under its design weights. Outcomes missing from the target simply omit
    the target series.
    """
    in_covars = variable in pair.common_covariates
    in_outcomes = variable in pair.sample.outcome_names
    if not in_covars and not in_outcomes:
        raise UnknownColumnError(
            f"variable {variable!r} is neither a common covariate nor an outcome"
        )
    if in_covars:
        s_vals = pair.sample.covariates[variable]
        col_kind = pair.sample.covariate_kinds[variable]
        t_vals = pair.target.covariates[variable]
    else:
        s_vals = pair.sample.outcomes[variable]
        col_kind = pair.sample.outcome_kinds[variable]
        t_vals = pair.target.outcomes.get(variable)
        if t_vals is not None and pair.target.outcome_kinds[variable] is not col_kind:
            t_vals = None

    if kind == "auto":
        kind = "bar" if col_kind is ColumnKind.CATEGORICAL else "kde"
    if kind not in ("bar", "kde"):
        raise ValueError(f"unknown plot kind {kind!r}")

    dw = pair.sample.design_weights
    fw = _informative_weights(weights.values, dw) if weights is not None else dw
    tw = pair.target.design_weights

    sources = [("unadjusted_sample", s_vals, dw), ("weighted_sample", s_vals, fw)]
    if t_vals is not None:
        sources.append(("target", t_vals, tw))

    series: dict[str, list[tuple]] = {}
    if kind == "bar":
        if col_kind is not ColumnKind.CATEGORICAL:
            raise DegenerateVariableError(
                f"bar plot requested for numeric variable {variable!r}"
            )
        levels = sorted(set(s_vals) | (set(t_vals) if t_vals is not None else set()))
        for label, vals, w in sources:
            total = w.sum()
            series[label] = [
                (level, float(w[vals == level].sum() / total)) for level in levels
            ]
    else:
        if col_kind is not ColumnKind.NUMERIC:
            raise DegenerateVariableError(
                f"kde plot requested for categorical variable {variable!r}"
            )
        for label, vals, w in sources:
            grid, density = weighted_kde(vals.astype(float), w)
            series[label] = list(zip(grid.tolist(), density.tolist()))
    return PlotSeries(variable=variable, kind=kind, series=series)
