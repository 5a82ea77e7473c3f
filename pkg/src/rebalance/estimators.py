"""The four weighting methods: post-stratification, raking, IPW, CBPS.

Every estimator returns a :class:`WeightResult` whose weights are aligned
one-to-one with the sample's units and scaled so they sum to the target
population size. IPW and CBPS go through the shared pre-processing pipeline
(quantile bucketing, missing levels, rare-level lumping, one-hot model
matrix) and also report per-unit propensity scores.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import diagnostics
from .design import (
    ModelMatrix,
    TransformConfig,
    apply_transforms,
    build_model_matrix,
    parse_formula,
)
from .errors import (
    DeBoundInfeasibleError,
    EmptySampleCellError,
    EmptyTargetCellError,
    KindMismatchError,
    SolverError,
    UnknownColumnError,
)
from .lasso import (
    Coefficients,
    GlmProblem,
    cv_lambda_path,
    fit_lasso_path,
    predict_proba,
    weighted_deviance,
)
from .sample import (
    ColumnKind,
    PairedSample,
    WeightScale,
    WeightVector,
    normalize_weights,
)


@dataclass(frozen=True)
class WeightResult:
    """Fitted weights plus method metadata.

    ``propensity`` holds the per-sample-unit estimated inclusion
    probability for the propensity-based methods and is ``None`` for
    post-stratification and raking.
    """

    weights: WeightVector
    method: str
    propensity: np.ndarray | None
    fit_meta: dict


@dataclass(frozen=True)
class RakeConfig:
    max_iterations: int = 50
    marginal_tol: float = 1e-3
    weight_change_tol: float = 1e-4

    def __post_init__(self):
        if self.max_iterations <= 0 or self.marginal_tol <= 0 or self.weight_change_tol <= 0:
            raise ValueError("rake configuration values must be positive")


@dataclass(frozen=True)
class IpwConfig:
    max_de: float | None = None
    formula: str | None = None
    penalty_factors: dict[str, float] | None = None
    cv_folds: int = 10
    n_lambdas: int = 100
    seed: int = 0
    trim_ratio_cap: float = 20.0
    transform: TransformConfig = field(default_factory=TransformConfig)

    def __post_init__(self):
        if self.max_de is not None and self.max_de <= 1.0:
            raise ValueError("max_de must exceed 1")
        if self.trim_ratio_cap <= 1.0:
            raise ValueError("trim_ratio_cap must exceed 1")


@dataclass(frozen=True)
class CbpsConfig:
    formula: str | None = None
    cv_folds: int = 10
    n_lambdas: int = 100
    seed: int = 0
    trim_ratio_cap: float = 20.0
    residual_tol: float = 1e-8
    max_iterations: int = 200
    transform: TransformConfig = field(default_factory=TransformConfig)


# --------------------------------------------------------------------------
# Weight trimming
# --------------------------------------------------------------------------


def trim_weights(w: WeightVector, ratio_cap: float) -> WeightVector:
    """Clip weights above ``ratio_cap * mean(w)``, then restore the sum.

    A single clip-and-rescale pass: the sum and mean are preserved, so the
    population-count interpretation of the weights survives trimming. A
    no-op when nothing exceeds the cap.
    """
    if ratio_cap <= 1.0:
        raise ValueError("ratio_cap must exceed 1")
    values = w.values
    cap = ratio_cap * values.mean()
    if values.max() <= cap:
        return w
    clipped = np.minimum(values, cap)
    return WeightVector(clipped * (values.sum() / clipped.sum()), w.scale)


def _trim_count(values: np.ndarray, ratio_cap: float) -> int:
    return int((values > ratio_cap * values.mean()).sum())


# --------------------------------------------------------------------------
# Post-stratification
# --------------------------------------------------------------------------


def _stratum_keys(sample, names) -> list[tuple]:
    cols = [sample.covariates[name] for name in names]
    return [tuple(col[i] for col in cols) for i in range(sample.n)]


def _check_categorical(pair: PairedSample, names, role: str) -> None:
    for name in names:
        if name not in pair.common_covariates:
            raise UnknownColumnError(f"{role} variable {name!r} is not a common covariate")
        if pair.sample.covariate_kinds[name] is not ColumnKind.CATEGORICAL:
            raise KindMismatchError(
                f"{role} variable {name!r} is numeric; apply transforms first"
            )


def poststratify(pair: PairedSample, strata_vars: list[str]) -> WeightResult:
    """Cell-ratio weights over the joint cross of ``strata_vars``.

    Each unit gets its design weight times (target cell mass / sample cell
    design mass), which makes weighted cell proportions match the target
    exactly. Every sample cell must have target mass and vice versa.
    """
    if not strata_vars:
        raise UnknownColumnError("strata_vars must name at least one covariate")
    _check_categorical(pair, strata_vars, "strata")

    s_keys = _stratum_keys(pair.sample, strata_vars)
    t_keys = _stratum_keys(pair.target, strata_vars)
    dw, tw = pair.sample.design_weights, pair.target.design_weights

    t_mass: dict = {}
    for key, w in zip(t_keys, tw):
        t_mass[key] = t_mass.get(key, 0.0) + w
    s_mass = {}
    for key, w in zip(s_keys, dw):
        s_mass[key] = s_mass.get(key, 0.0) + w

    missing_target = sorted(set(s_mass) - set(t_mass))
    if missing_target:
        raise EmptyTargetCellError(
            f"sample strata with zero target mass: {missing_target[:10]}",
            cells=missing_target,
        )
    missing_sample = sorted(set(t_mass) - set(s_mass))
    if missing_sample:
        raise EmptySampleCellError(
            f"target strata with no sample units: {missing_sample[:10]}",
            cells=missing_sample,
        )

    ratio = {key: t_mass[key] / s_mass[key] for key in s_mass}
    values = dw * np.array([ratio[key] for key in s_keys])
    weights = normalize_weights(WeightVector(values), WeightScale.POPULATION_SUM, pair)
    return WeightResult(
        weights=weights,
        method="poststratify",
        propensity=None,
        fit_meta={"strata_vars": list(strata_vars), "n_strata": len(s_mass)},
    )


# --------------------------------------------------------------------------
# Raking
# --------------------------------------------------------------------------


def rake(
    pair: PairedSample,
    margin_vars: list[str],
    cfg: RakeConfig | None = None,
) -> WeightResult:
    """Iterative proportional fitting against target marginal shares.

    Starting from the sample design weights, cycles over ``margin_vars`` in
    the given order, each time applying the one-variable post-stratification
    ratio update. Stops at whichever fires first: the iteration cap, all
    marginal gaps within ``marginal_tol``, or a max relative weight change
    within ``weight_change_tol``. Hitting the cap is not an error; the
    stopping criterion lands in ``fit_meta``.
    """
    cfg = cfg or RakeConfig()
    if not margin_vars:
        raise UnknownColumnError("margin_vars must name at least one covariate")
    _check_categorical(pair, margin_vars, "margin")

    dw, tw = pair.sample.design_weights, pair.target.design_weights
    t_total = tw.sum()

    target_share: dict[str, dict[str, float]] = {}
    masks: dict[str, dict[str, np.ndarray]] = {}
    for var in margin_vars:
        t_col = pair.target.covariates[var]
        s_col = pair.sample.covariates[var]
        shares = {}
        for level in sorted(set(t_col) | set(s_col)):
            shares[level] = float(tw[t_col == level].sum() / t_total)
        bad = [lv for lv in sorted(set(s_col)) if shares[lv] == 0.0]
        if bad:
            raise EmptyTargetCellError(
                f"margin {var!r} has sample levels with zero target mass: {bad}",
                cells=[(var, lv) for lv in bad],
            )
        target_share[var] = shares
        masks[var] = {level: s_col == level for level in sorted(set(s_col))}

    def max_gap(w: np.ndarray) -> float:
        total = w.sum()
        gap = 0.0
        for var in margin_vars:
            for level, share in target_share[var].items():
                mask = masks[var].get(level)
                observed = float(w[mask].sum() / total) if mask is not None else 0.0
                gap = max(gap, abs(observed - share))
        return gap

    w = dw.astype(float).copy()
    criterion = "max_iterations"
    iterations = cfg.max_iterations
    gap = max_gap(w)
    rel_change = np.inf
    for it in range(1, cfg.max_iterations + 1):
        w_prev = w.copy()
        for var in margin_vars:
            total = w.sum()
            for level, mask in masks[var].items():
                current = w[mask].sum()
                if current > 0.0:
                    w[mask] *= target_share[var][level] * total / current
        gap = max_gap(w)
        rel_change = float(np.max(np.abs(w - w_prev) / w_prev))
        if gap <= cfg.marginal_tol:
            criterion, iterations = "marginal_tolerance", it
            break
        if rel_change <= cfg.weight_change_tol:
            criterion, iterations = "weight_change", it
            break

    weights = normalize_weights(WeightVector(w), WeightScale.POPULATION_SUM, pair)
    return WeightResult(
        weights=weights,
        method="rake",
        propensity=None,
        fit_meta={
            "margin_vars": list(margin_vars),
            "stopping_criterion": criterion,
            "iterations": iterations,
            "max_marginal_gap": gap,
            "max_weight_rel_change": rel_change if np.isfinite(rel_change) else None,
        },
    )


# --------------------------------------------------------------------------
# Shared propensity-pipeline pieces
# --------------------------------------------------------------------------


def _propensity_problem(
    pair: PairedSample,
    formula: str | None,
    penalty_factors: dict[str, float] | None,
    transform: TransformConfig,
) -> tuple[GlmProblem, ModelMatrix, PairedSample]:
    """Transform, encode, and stack sample (y=1) over target (y=0).

    Target case weights are rescaled so both classes carry equal total
    weight, which keeps the fitted prevalence away from degenerate corners.
    """
    tpair = apply_transforms(pair, transform)
    ast = parse_formula(formula, tpair.common_covariates)
    mm = build_model_matrix(tpair, ast)

    dw, tw = pair.sample.design_weights, pair.target.design_weights
    X = np.vstack([mm.sample_block, mm.target_block])
    y = np.concatenate([np.ones(pair.n), np.zeros(pair.target_n)])
    cw = np.concatenate([dw, tw * (dw.sum() / tw.sum())])

    pf = np.ones(mm.k)
    if penalty_factors:
        unknown = set(penalty_factors) - {mm.column_to_main_covar[c] for c in mm.columns}
        if unknown:
            raise UnknownColumnError(
                f"penalty factors name unknown formula terms: {sorted(unknown)}"
            )
        for j, col in enumerate(mm.columns):
            pf[j] = penalty_factors.get(mm.column_to_main_covar[col], 1.0)
    return GlmProblem(X=X, y=y, case_weights=cw, penalty_factors=pf), mm, tpair


def _odds_weights(p_sample: np.ndarray) -> np.ndarray:
    return (1.0 - p_sample) / p_sample


def _deviance_explained(problem: GlmProblem, coeffs: Coefficients) -> float:
    p = predict_proba(coeffs, problem.X)
    dev = weighted_deviance(problem.y, p, problem.case_weights)
    pbar = float(problem.case_weights @ problem.y / problem.case_weights.sum())
    null = weighted_deviance(
        problem.y, np.full(problem.m, pbar), problem.case_weights
    )
    return 1.0 - dev / null


def _deff_of(values: np.ndarray) -> float:
    return float(len(values) * (values @ values) / values.sum() ** 2)


# --------------------------------------------------------------------------
# IPW
# --------------------------------------------------------------------------


def ipw(pair: PairedSample, cfg: IpwConfig | None = None) -> WeightResult:
    """Inverse propensity weights from the L1-penalized logistic model.

    With no design-effect bound the penalty is the cross-validated
    one-standard-error choice. With ``max_de`` set, the ten eligible path
    penalties pressing hardest against the bound (largest design effects
    still under it) compete on mean aggregated ASMD reduction, ties going
    to the larger penalty. Weights are odds ``(1 - p) / p``, trimmed, then
    scaled to the population size.
    """
    cfg = cfg or IpwConfig()
    problem, mm, _ = _propensity_problem(
        pair, cfg.formula, cfg.penalty_factors, cfg.transform
    )
    cv = cv_lambda_path(problem, folds=cfg.cv_folds, n_lambdas=cfg.n_lambdas, seed=cfg.seed)

    path = cv.lambda_path
    if cfg.max_de is None:
        upto = int(np.flatnonzero(path == cv.lambda_1se)[0]) + 1
        fits = fit_lasso_path(problem, path[:upto])
        coeffs = fits[-1]
        lam_grid_meta = None
    else:
        fits = fit_lasso_path(problem, path)
        deffs = np.empty(len(path))
        for i, c in enumerate(fits):
            w = _odds_weights(predict_proba(c, mm.sample_block))
            deffs[i] = _deff_of(w)
        eligible = np.flatnonzero(deffs <= cfg.max_de)
        if len(eligible) == 0:
            raise DeBoundInfeasibleError(
                f"no lambda on the path meets design effect <= {cfg.max_de:g}; "
                f"smallest achievable is {deffs.min():.6g}",
                smallest_deff=float(deffs.min()),
            )
        # grid over the eligible penalties pressing hardest against the
        # bound: the ten smallest eligible lambdas (largest design effects)
        candidates = eligible[-10:][::-1]  # ascending lambda order
        best_i, best_reduction = None, -np.inf
        for i in candidates:
            w = _odds_weights(predict_proba(fits[i], mm.sample_block))
            table = diagnostics.asmd(pair, WeightVector(w), aggregate_by_main_covar=True)
            reduction = table.mean_unadjusted - table.mean_adjusted
            if reduction > best_reduction or (
                reduction == best_reduction and path[i] > path[best_i]
            ):
                best_i, best_reduction = int(i), reduction
        coeffs = fits[best_i]
        lam_grid_meta = {
            "candidates": [float(path[i]) for i in candidates],
            "chosen_index": best_i,
            "mean_asmd_reduction": float(best_reduction),
        }

    p_sample = predict_proba(coeffs, mm.sample_block)
    raw = _odds_weights(p_sample)
    n_clipped = _trim_count(raw, cfg.trim_ratio_cap)
    trimmed = trim_weights(WeightVector(raw), cfg.trim_ratio_cap)
    weights = normalize_weights(trimmed, WeightScale.POPULATION_SUM, pair)

    fit_meta = {
        "lambda": coeffs.lam,
        "lambda_1se": cv.lambda_1se,
        "lambda_min": cv.lambda_min,
        "max_de": cfg.max_de,
        "design_effect_untrimmed": _deff_of(raw),
        "design_effect": _deff_of(weights.values),
        "deviance_explained": _deviance_explained(problem, coeffs),
        "converged": coeffs.converged,
        "n_iter": coeffs.n_iter,
        "model_columns": mm.k,
        "nonzero_coefficients": int(np.count_nonzero(coeffs.beta)),
        "trim_ratio_cap": cfg.trim_ratio_cap,
        "n_trimmed": n_clipped,
        "seed": cfg.seed,
    }
    if lam_grid_meta is not None:
        fit_meta["de_grid_search"] = lam_grid_meta
    return WeightResult(
        weights=weights, method="ipw", propensity=p_sample, fit_meta=fit_meta
    )


# --------------------------------------------------------------------------
# CBPS (just-identified: first-moment balance)
# --------------------------------------------------------------------------


def cbps(pair: PairedSample, cfg: CbpsConfig | None = None) -> WeightResult:
    """Propensity coefficients solving exact first-moment balance.

    Finds ``beta`` such that the odds-weighted sample mean of every model
    matrix column equals its target design-weighted mean (the weights are
    ``exp(-x @ beta)`` up to the intercept, which cancels in the ratio).
    Solved by damped Newton on the moment residuals, warm-started at the
    cross-validated lasso coefficients; the Jacobian is the negated
    weighted covariance of the columns.
    """
    cfg = cfg or CbpsConfig()
    problem, mm, _ = _propensity_problem(pair, cfg.formula, None, cfg.transform)
    if mm.k >= pair.n:
        raise SolverError(
            f"model matrix has {mm.k} columns but the sample has only {pair.n} units"
        )
    cv = cv_lambda_path(problem, folds=cfg.cv_folds, n_lambdas=cfg.n_lambdas, seed=cfg.seed)
    upto = int(np.flatnonzero(cv.lambda_path == cv.lambda_1se)[0]) + 1
    init = fit_lasso_path(problem, cv.lambda_path[:upto])[-1]

    X = mm.sample_block
    tw = pair.target.design_weights
    target_mean = tw @ mm.target_block / tw.sum()

    def residual(beta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        eta = X @ beta
        eta = eta - eta.mean()  # weights are scale-free; keep exp() in range
        w = np.exp(-eta)
        w /= w.sum()
        mean = w @ X
        return mean - target_mean, w

    beta = init.beta.copy()
    r, w = residual(beta)
    norm = float(np.linalg.norm(r))
    converged = norm <= cfg.residual_tol
    mu = 0.0
    it = 0
    while not converged and it < cfg.max_iterations:
        it += 1
        centered = X - w @ X
        cov = (centered * w[:, None]).T @ centered
        step = None
        solve_failed = 0
        mu_try = mu
        for _ in range(60):
            try:
                step = np.linalg.solve(cov + mu_try * np.eye(mm.k), r)
            except np.linalg.LinAlgError:
                step = None
                solve_failed += 1
            if step is not None and np.isfinite(step).all():
                beta_new = beta + step
                r_new, w_new = residual(beta_new)
                norm_new = float(np.linalg.norm(r_new))
                if np.isfinite(norm_new) and norm_new < norm:
                    break
            mu_try = max(mu_try * 10.0, 1e-10)
        else:
            if solve_failed >= 60:
                raise SolverError(
                    "balance Newton step failed: Jacobian stayed singular "
                    f"through the damping ladder (residual norm {norm:.3g})"
                )
            # no productive step exists (balance infeasible from here);
            # stop and report non-convergence with the residual reached
            break
        mu = mu_try / 10.0 if mu_try > 1e-10 else 0.0
        beta, r, w, norm = beta_new, r_new, w_new, norm_new
        if norm <= cfg.residual_tol:
            converged = True

    # pin the intercept so raw odds weights sum to the population size;
    # center the linear predictor before exponentiating, as in the solve
    eta = X @ beta
    shifted = np.exp(-(eta - eta.mean()))
    raw = shifted * (pair.population_size / shifted.sum())
    p_sample = 1.0 / (1.0 + raw)

    n_clipped = _trim_count(raw, cfg.trim_ratio_cap)
    trimmed = trim_weights(WeightVector(raw), cfg.trim_ratio_cap)
    weights = normalize_weights(trimmed, WeightScale.POPULATION_SUM, pair)
    return WeightResult(
        weights=weights,
        method="cbps",
        propensity=p_sample,
        fit_meta={
            "converged": converged,
            "iterations": it,
            "balance_residual_norm": norm,
            "lambda_init": init.lam,
            "model_columns": mm.k,
            "trim_ratio_cap": cfg.trim_ratio_cap,
            "n_trimmed": n_clipped,
            "seed": cfg.seed,
        },
    )
