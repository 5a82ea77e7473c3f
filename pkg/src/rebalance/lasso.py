"""Weighted L1-penalized logistic regression via cyclic coordinate descent.

Minimizes ``sum_i v_i * [log(1 + exp(eta_i)) - y_i * eta_i]
+ lambda * sum_j pf_j * |gamma_j|`` where ``eta = gamma0 + Z gamma`` and
``Z`` holds the predictors standardized to weighted mean 0 / variance 1.
The intercept is never penalized. An outer loop refreshes the IRLS
quadratic approximation at the current iterate; cyclic coordinate passes
solve each quadratic in Gram form; a step-halving guard keeps the true
penalized objective non-increasing. Coefficients are reported on the
original predictor scale.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import TooFewPerClassError
from .parallel import map_jobs

#: Convergence tolerance on the max standardized-coefficient change.
TOL = 1e-7

#: Hard cap on coordinate-descent sweeps.
MAX_SWEEPS = 10_000

#: Probability clamp applied to predictions; keeps odds weights finite.
PROB_CLIP = 1e-12

# |standardized intercept| beyond which the fit is flagged as separated.
_SEPARATION_BOUND = 30.0

_PQ_FLOOR = 1e-10


@dataclass
class GlmProblem:
    """A weighted binary classification problem for the lasso solver.

    ``y`` must contain both classes; ``case_weights`` must be positive and
    finite. ``penalty_factors`` (default all ones) scale the L1 penalty per
    column; a factor of zero leaves that column unpenalized.
    """

    X: np.ndarray
    y: np.ndarray
    case_weights: np.ndarray
    penalty_factors: np.ndarray | None = None

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        self.case_weights = np.asarray(self.case_weights, dtype=float)
        if self.X.ndim != 2:
            raise ValueError("X must be 2-dimensional")
        m, k = self.X.shape
        if self.y.shape != (m,) or self.case_weights.shape != (m,):
            raise ValueError("X, y, and case_weights have inconsistent shapes")
        if not np.isin(self.y, (0.0, 1.0)).all():
            raise ValueError("y must be binary (0/1)")
        if not ((self.y == 1).any() and (self.y == 0).any()):
            raise ValueError("both classes must be present")
        if not (np.isfinite(self.case_weights).all() and (self.case_weights > 0).all()):
            raise ValueError("case_weights must be positive and finite")
        if self.penalty_factors is None:
            self.penalty_factors = np.ones(k)
        else:
            self.penalty_factors = np.asarray(self.penalty_factors, dtype=float)
            if self.penalty_factors.shape != (k,):
                raise ValueError("penalty_factors length must match columns")
            if (self.penalty_factors < 0).any():
                raise ValueError("penalty_factors must be non-negative")

    @property
    def m(self) -> int:
        return self.X.shape[0]

    @property
    def k(self) -> int:
        return self.X.shape[1]


@dataclass
class Coefficients:
    """Fit result on the original predictor scale."""

    intercept: float
    beta: np.ndarray
    lam: float
    converged: bool
    n_iter: int
    separated: bool = False
    objective_trace: list[float] | None = None


@dataclass
class CVResult:
    """Cross-validation curve over a decreasing lambda path."""

    lambda_path: np.ndarray
    cv_error_mean: np.ndarray
    cv_error_se: np.ndarray
    lambda_min: float
    lambda_1se: float
    fold_ids: np.ndarray


def _expit(eta: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-np.clip(eta, -700, 700)))


@dataclass
class _StdProblem:
    Z: np.ndarray
    y: np.ndarray
    ws: np.ndarray
    pf: np.ndarray
    mu: np.ndarray
    sd: np.ndarray
    active: np.ndarray  # columns with positive weighted variance


def _standardize(problem: GlmProblem) -> _StdProblem:
    ws = problem.case_weights
    total = ws.sum()
    mu = (ws @ problem.X) / total
    centered = problem.X - mu
    var = (ws @ centered**2) / total
    active = var > 0
    sd = np.where(active, np.sqrt(var), 1.0)
    Z = centered / sd
    Z[:, ~active] = 0.0
    # column-major layout: the solver walks columns
    return _StdProblem(
        Z=np.asfortranarray(Z),
        y=problem.y,
        ws=ws,
        pf=problem.penalty_factors,
        mu=mu,
        sd=sd,
        active=active,
    )


def _objective(std: _StdProblem, g0: float, g: np.ndarray, lam: float) -> float:
    eta = g0 + std.Z @ g
    nll = float(std.ws @ (np.logaddexp(0.0, eta) - std.y * eta))
    return nll + lam * float(std.pf @ np.abs(g))


def _null_intercept(std: _StdProblem) -> float:
    pbar = float(std.ws @ std.y) / float(std.ws.sum())
    pbar = min(max(pbar, PROB_CLIP), 1.0 - PROB_CLIP)
    return float(np.log(pbar / (1.0 - pbar)))


def _soft(x: float, t: float) -> float:
    if x > t:
        return x - t
    if x < -t:
        return x + t
    return 0.0


def _fit_std(
    std: _StdProblem,
    lam: float,
    init: tuple[float, np.ndarray] | None = None,
    track_objective: bool = False,
):
    """Outer loop refreshes the IRLS quadratic, inner cyclic passes solve it.

    ``sweep`` counts inner cyclic passes against the global cap. A
    step-halving guard keeps the true penalized objective non-increasing
    between refreshes.
    """
    Z, y, ws, pf = std.Z, std.y, std.ws, std.pf
    k = Z.shape[1]
    if init is None:
        g0, g = _null_intercept(std), np.zeros(k)
    else:
        g0, g = init[0], init[1].copy()
    cols = np.flatnonzero(std.active)
    obj = _objective(std, g0, g, lam)
    trace = [obj] if track_objective else None
    converged = False
    separated = False
    sweep = 0
    while sweep < MAX_SWEEPS:
        g0_prev, g_prev = g0, g.copy()

        eta = g0 + Z @ g
        p = _expit(eta)
        pq = np.maximum(p * (1.0 - p), _PQ_FLOOR)
        w = ws * pq
        u = eta + (y - p) / pq  # IRLS working response
        w_sum = w.sum()
        # Gram form of the quadratic: inner updates run in k-space
        WZ = Z * w[:, None]
        A = WZ.T @ Z
        b = Z.T @ (w * u)
        s = WZ.sum(axis=0)
        m0 = float(w @ u)
        Ag = A @ g

        # solve this quadratic by cyclic coordinate descent
        while sweep < MAX_SWEEPS:
            sweep += 1
            inner_delta = 0.0
            for j in cols:
                denom = A[j, j]
                if denom <= 0.0:
                    continue
                num = b[j] - g0 * s[j] - Ag[j] + denom * g[j]
                g_new = _soft(num, lam * pf[j]) / denom
                d = g_new - g[j]
                if d != 0.0:
                    Ag += d * A[:, j]
                    g[j] = g_new
                    inner_delta = max(inner_delta, abs(d))
            g0_new = (m0 - float(s @ g)) / w_sum
            if g0_new != g0:
                inner_delta = max(inner_delta, abs(g0_new - g0))
                g0 = g0_new
            if inner_delta < TOL:
                break

        # back off if the refreshed objective went up (IRLS overshoot)
        new_obj = _objective(std, g0, g, lam)
        if new_obj > obj + 1e-10:
            hi0, hi = g0, g.copy()
            t = 0.5
            for _ in range(40):
                g0 = g0_prev + t * (hi0 - g0_prev)
                g = g_prev + t * (hi - g_prev)
                new_obj = _objective(std, g0, g, lam)
                if new_obj <= obj + 1e-10:
                    break
                t *= 0.5
            else:
                g0, g = g0_prev, g_prev.copy()
                new_obj = obj
        obj = new_obj
        if track_objective:
            trace.append(obj)

        # diverging intercept or linear predictor: (quasi-)separation
        if abs(g0) > _SEPARATION_BOUND or np.max(np.abs(eta)) > _SEPARATION_BOUND:
            separated = True

        outer_delta = max(
            abs(g0 - g0_prev), float(np.max(np.abs(g - g_prev), initial=0.0))
        )
        if outer_delta < TOL:
            converged = True
            break

    # at the soft-threshold boundary (lambda == lambda_max) rounding can
    # leave ~1e-17 residue on coefficients that are exactly zero
    g[np.abs(g) < 1e-12] = 0.0
    return g0, g, converged, sweep, separated, trace


def _to_original(std: _StdProblem, g0: float, g: np.ndarray) -> tuple[float, np.ndarray]:
    beta = g / std.sd
    beta[~std.active] = 0.0
    intercept = g0 - float(beta @ std.mu)
    return intercept, beta


def fit_logistic_lasso(
    problem: GlmProblem, lam: float, track_objective: bool = False
) -> Coefficients:
    """Fit the penalized weighted logistic model at a single lambda."""
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    std = _standardize(problem)
    g0, g, converged, n_iter, separated, trace = _fit_std(
        std, lam, track_objective=track_objective
    )
    intercept, beta = _to_original(std, g0, g)
    return Coefficients(
        intercept=intercept,
        beta=beta,
        lam=lam,
        converged=converged,
        n_iter=n_iter,
        separated=separated,
        objective_trace=trace,
    )


def fit_lasso_path(problem: GlmProblem, lambdas: np.ndarray) -> list[Coefficients]:
    """Fit a decreasing lambda sequence with warm starts."""
    std = _standardize(problem)
    fits: list[Coefficients] = []
    init = None
    for lam in lambdas:
        g0, g, converged, n_iter, separated, _ = _fit_std(std, float(lam), init=init)
        init = (g0, g)
        intercept, beta = _to_original(std, g0, g)
        fits.append(
            Coefficients(
                intercept=intercept,
                beta=beta,
                lam=float(lam),
                converged=converged,
                n_iter=n_iter,
                separated=separated,
            )
        )
    return fits


def predict_proba(coeffs: Coefficients, X: np.ndarray) -> np.ndarray:
    """Logistic probabilities of the linear predictor, clamped away from 0/1."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != len(coeffs.beta):
        raise ValueError(
            f"X has {X.shape[1] if X.ndim == 2 else 'wrong'} columns, "
            f"expected {len(coeffs.beta)}"
        )
    p = _expit(coeffs.intercept + X @ coeffs.beta)
    return np.clip(p, PROB_CLIP, 1.0 - PROB_CLIP)


def weighted_deviance(y: np.ndarray, p: np.ndarray, case_weights: np.ndarray) -> float:
    """-2 * weighted binomial log-likelihood."""
    p = np.clip(p, PROB_CLIP, 1.0 - PROB_CLIP)
    ll = case_weights @ (y * np.log(p) + (1.0 - y) * np.log1p(-p))
    return -2.0 * float(ll)


def weighted_nll(problem: GlmProblem, intercept: float, beta: np.ndarray) -> float:
    """Weighted negative log-likelihood on the original scale."""
    eta = intercept + problem.X @ beta
    return float(problem.case_weights @ (np.logaddexp(0.0, eta) - problem.y * eta))


def weighted_nll_gradient(
    problem: GlmProblem, intercept: float, beta: np.ndarray
) -> tuple[float, np.ndarray]:
    """Gradient of :func:`weighted_nll` in (intercept, beta)."""
    p = _expit(intercept + problem.X @ beta)
    resid = problem.case_weights * (p - problem.y)
    return float(resid.sum()), problem.X.T @ resid


def standardized_gradient(
    problem: GlmProblem, intercept: float, beta: np.ndarray
) -> np.ndarray:
    """Per-column NLL gradient in the standardized space the penalty acts on.

    At an optimum the KKT conditions read ``|grad_j| <= lam * pf_j`` for
    zero coefficients and ``grad_j == -lam * pf_j * sign(beta_j)`` otherwise.
    """
    std = _standardize(problem)
    p = _expit(intercept + problem.X @ beta)
    resid = problem.case_weights * (p - problem.y)
    return std.Z.T @ resid


def lambda_max(problem: GlmProblem) -> float:
    """Smallest lambda that zeroes every penalized coefficient."""
    std = _standardize(problem)
    pbar = float(std.ws @ std.y) / float(std.ws.sum())
    grad = std.Z.T @ (std.ws * (pbar - std.y))
    penalized = std.active & (std.pf > 0)
    if not penalized.any():
        return 1.0
    lmax = float(np.max(np.abs(grad[penalized]) / std.pf[penalized]))
    return max(lmax, 1e-10)


def default_lambda_path(problem: GlmProblem, n_lambdas: int = 100) -> np.ndarray:
    """Log-spaced decreasing path from lambda_max down four decades."""
    lmax = lambda_max(problem)
    if n_lambdas == 1:
        return np.array([lmax])
    return np.geomspace(lmax, lmax * 1e-4, n_lambdas)


def _stratified_folds(y: np.ndarray, folds: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    fold_id = np.empty(len(y), dtype=int)
    for cls in (0.0, 1.0):
        idx = np.flatnonzero(y == cls)
        perm = rng.permutation(idx)
        fold_id[perm] = np.arange(len(perm)) % folds
    return fold_id


def cv_lambda_path(
    problem: GlmProblem,
    folds: int = 10,
    n_lambdas: int = 100,
    seed: int = 0,
) -> CVResult:
    """Cross-validate the lambda path with class-stratified folds.

    The error metric is the weighted mean binomial deviance on held-out
    folds. ``lambda_1se`` is the largest path value whose mean error is
    within one standard error of the minimum.
    """
    if folds < 2:
        raise ValueError("folds must be at least 2")
    counts = {cls: int((problem.y == cls).sum()) for cls in (0.0, 1.0)}
    short = {cls: c for cls, c in counts.items() if c < folds}
    if short:
        raise TooFewPerClassError(
            f"classes with fewer members than folds={folds}: "
            + ", ".join(f"y={int(cls)} has {c}" for cls, c in short.items())
        )

    path = default_lambda_path(problem, n_lambdas)
    fold_id = _stratified_folds(problem.y, folds, seed)

    def fit_fold(f: int) -> np.ndarray:
        train = fold_id != f
        test = ~train
        sub = GlmProblem(
            X=problem.X[train],
            y=problem.y[train],
            case_weights=problem.case_weights[train],
            penalty_factors=problem.penalty_factors,
        )
        fits = fit_lasso_path(sub, path)
        X_test, y_test = problem.X[test], problem.y[test]
        ws_test = problem.case_weights[test]
        devs = np.empty(len(path))
        for i, coeffs in enumerate(fits):
            p = predict_proba(coeffs, X_test)
            devs[i] = weighted_deviance(y_test, p, ws_test) / ws_test.sum()
        return devs

    # fold-level (grouped) curve: mean and SE over the fold mean deviances
    per_fold = np.vstack(map_jobs(fit_fold, range(folds)))
    mean = per_fold.mean(axis=0)
    se = per_fold.std(axis=0, ddof=1) / np.sqrt(folds)

    i_min = int(np.argmin(mean))  # ties resolve toward the larger lambda
    threshold = mean[i_min] + se[i_min]
    i_1se = int(np.flatnonzero(mean <= threshold)[0])
    return CVResult(
        lambda_path=path,
        cv_error_mean=mean,
        cv_error_se=se,
        lambda_min=float(path[i_min]),
        lambda_1se=float(path[i_1se]),
        fold_ids=fold_id,
    )
