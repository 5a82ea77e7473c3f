"""Independent oracles and small data generators for the test suite.

The oracles deliberately avoid the package's own code paths: the logistic
MLE uses plain Newton-Raphson on the full Hessian, and the raking oracle
runs iterative proportional fitting directly on contingency tables.
"""

from __future__ import annotations

import itertools

import numpy as np
import pandas as pd

from rebalance import build_sample, pair_with_target


def newton_logistic(X, y, case_weights=None, max_iter=200, tol=1e-12):
    """Unregularized weighted logistic MLE via Newton-Raphson.

    Returns (intercept, beta). Solves the full (k+1)-dimensional system
    each step; assumes the MLE exists (no separation).
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    m = len(y)
    w = np.ones(m) if case_weights is None else np.asarray(case_weights, dtype=float)
    D = np.column_stack([np.ones(m), X])
    theta = np.zeros(D.shape[1])
    for _ in range(max_iter):
        eta = D @ theta
        p = 1.0 / (1.0 + np.exp(-eta))
        grad = D.T @ (w * (y - p))
        H = (D * (w * p * (1 - p))[:, None]).T @ D
        step = np.linalg.solve(H, grad)
        theta = theta + step
        if np.max(np.abs(step)) < tol:
            break
    return theta[0], theta[1:]


def brute_force_ipf(table, margins, max_iter=10000, tol=1e-10):
    """Direct IPF on an n-dimensional contingency table.

    ``table`` holds sample cell masses; ``margins`` is a list of 1-d target
    marginal mass arrays, one per axis. Iterates axis scalings until every
    marginal residual is below ``tol``. Returns the fitted table.
    """
    fitted = np.asarray(table, dtype=float).copy()
    margins = [np.asarray(m, dtype=float) for m in margins]
    ndim = fitted.ndim
    for _ in range(max_iter):
        for axis in range(ndim):
            other = tuple(a for a in range(ndim) if a != axis)
            current = fitted.sum(axis=other)
            factor = np.where(current > 0, margins[axis] / np.where(current > 0, current, 1.0), 1.0)
            shape = [1] * ndim
            shape[axis] = len(factor)
            fitted = fitted * factor.reshape(shape)
        residual = 0.0
        for axis in range(ndim):
            other = tuple(a for a in range(ndim) if a != axis)
            residual = max(residual, np.max(np.abs(fitted.sum(axis=other) - margins[axis])))
        if residual < tol:
            break
    return fitted


def categorical_frame(columns: dict[str, np.ndarray], start_id: int = 0) -> pd.DataFrame:
    n = len(next(iter(columns.values())))
    frame = {"id": [str(i) for i in range(start_id, start_id + n)]}
    frame.update({k: list(v) for k, v in columns.items()})
    return pd.DataFrame(frame)


def make_pair(sample_cols: dict, target_cols: dict, sample_kwargs=None, target_kwargs=None):
    """Build a PairedSample from raw column dicts."""
    s = build_sample(
        categorical_frame(sample_cols), "id", **(sample_kwargs or {})
    )
    t = build_sample(
        categorical_frame(target_cols, start_id=10_000), "id", **(target_kwargs or {})
    )
    return pair_with_target(s, t)


def random_categorical_pair(rng, n_sample=200, n_target=1000, n_covars=2, max_levels=3):
    """Random all-categorical pair where every joint cell is populated."""
    level_counts = rng.integers(2, max_levels + 1, size=n_covars)
    names = [f"c{i}" for i in range(n_covars)]

    def draw(n):
        cols = {}
        for name, levels in zip(names, level_counts):
            probs = rng.dirichlet(np.ones(levels) * 5.0)
            cols[name] = rng.choice([f"v{j}" for j in range(levels)], size=n, p=probs)
        return cols

    # loop until all joint cells occur on both sides (cheap at these sizes)
    for _ in range(100):
        s_cols, t_cols = draw(n_sample), draw(n_target)
        combos = list(itertools.product(*[[f"v{j}" for j in range(c)] for c in level_counts]))

        def covered(cols):
            seen = set(zip(*[cols[name] for name in names]))
            return all(combo in seen for combo in combos)

        if covered(s_cols) and covered(t_cols):
            return make_pair(s_cols, t_cols), names
    raise RuntimeError("could not populate all cells; loosen the generator")
