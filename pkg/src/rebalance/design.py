"""Pre-processing transforms and model-matrix construction.

Transforms are fitted on the target population and applied identically to
sample and target: numeric covariates are bucketed at weighted target
quantiles, missing cells become an explicit ``_NA`` level, and rare levels
(by target proportion) are merged into ``_lumped_other``. The resulting
all-categorical pair is encoded into a shared-column-space model matrix via
drop-first one-hot encoding, with optional interaction terms from a small
formula language (operators ``+``, ``:``, ``*``, and parentheses).
"""

from __future__ import annotations

import itertools
import re
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import FormulaError, KindMismatchError, TransformError
from .sample import LUMPED_LEVEL, MISSING_LEVEL, ColumnKind, PairedSample


@dataclass(frozen=True)
class TransformConfig:
    """Knobs for the fit-on-target covariate transforms."""

    quantile_buckets: int = 10
    rare_level_min_prop: float = 0.05
    add_missing_indicators: bool = True

    def __post_init__(self):
        if self.quantile_buckets < 2:
            raise ValueError("quantile_buckets must be at least 2")
        if not 0.0 <= self.rare_level_min_prop < 1.0:
            raise ValueError("rare_level_min_prop must be in [0, 1)")


def weighted_quantile(values: np.ndarray, weights: np.ndarray, probs) -> np.ndarray:
    """Inverse weighted ECDF: smallest value with cumulative share >= p."""
    order = np.argsort(values, kind="stable")
    v = values[order]
    cum = np.cumsum(weights[order])
    total = cum[-1]
    probs = np.atleast_1d(np.asarray(probs, dtype=float))
    idx = np.searchsorted(cum, probs * total, side="left")
    idx = np.clip(idx, 0, len(v) - 1)
    return v[idx]


def _bucket_label(index: int) -> str:
    return f"q{index + 1:02d}"


@dataclass(frozen=True)
class _NumericBucketer:
    """Maps numeric values to quantile-bucket labels using fixed edges."""

    edges: np.ndarray  # strictly increasing interior edges

    def apply(self, values: np.ndarray, allow_missing: bool) -> np.ndarray:
        out = np.empty(len(values), dtype=object)
        missing = np.isnan(values)
        if missing.any() and not allow_missing:
            raise TransformError(
                "missing numeric values present but missing indicators are disabled"
            )
        # values equal to an edge fall in the lower bucket
        idx = np.searchsorted(self.edges, values[~missing], side="left")
        labels = [_bucket_label(i) for i in idx]
        out[~missing] = labels
        out[missing] = MISSING_LEVEL
        return out


def _fit_bucketer(target_values: np.ndarray, target_weights: np.ndarray,
                  buckets: int, name: str) -> _NumericBucketer:
    ok = ~np.isnan(target_values)
    if not ok.any():
        raise TransformError(
            f"numeric covariate {name!r} has no non-missing target values to bucket on"
        )
    probs = np.arange(1, buckets) / buckets
    edges = weighted_quantile(target_values[ok], target_weights[ok], probs)
    # collapse duplicate edges from tie-heavy data: fewer, non-empty buckets
    return _NumericBucketer(edges=np.unique(edges))


def _fit_lumping(levels: np.ndarray, weights: np.ndarray, min_prop: float) -> set[str]:
    """Levels to keep, judged by target proportion; the rest get lumped.

    Levels never seen in the target have proportion zero, so sample-only
    levels are lumped as well (when the threshold is positive). The
    explicit missing level is never lumped: missingness stays its own
    category regardless of how rare it is.
    """
    total = weights.sum()
    kept = {MISSING_LEVEL}
    for level in set(levels):
        prop = weights[levels == level].sum() / total
        if prop >= min_prop:
            kept.add(level)
    return kept


def apply_transforms(pair: PairedSample, cfg: TransformConfig | None = None) -> PairedSample:
    """Return a pair whose common covariates are all categorical.

    Fitted on the target, applied identically to both sides: missing cells
    become ``_NA``, numeric covariates become weighted-quantile bucket
    labels, and levels below the rare-level threshold merge into
    ``_lumped_other``. Covariates left with a single level across both
    sides are dropped with a warning.
    """
    cfg = cfg or TransformConfig()
    sample, target = pair.sample, pair.target
    tw = target.design_weights

    new_sample: dict[str, np.ndarray] = {}
    new_target: dict[str, np.ndarray] = {}
    kinds: dict[str, ColumnKind] = {}
    for name in pair.common_covariates:
        kind = sample.covariate_kinds[name]
        s_col = sample.covariates[name]
        t_col = target.covariates[name]
        if kind is ColumnKind.NUMERIC:
            bucketer = _fit_bucketer(t_col, tw, cfg.quantile_buckets, name)
            s_lab = bucketer.apply(s_col, cfg.add_missing_indicators)
            t_lab = bucketer.apply(t_col, cfg.add_missing_indicators)
        else:
            s_lab = s_col.copy()
            t_lab = t_col.copy()

        if cfg.rare_level_min_prop > 0.0:
            kept = _fit_lumping(t_lab, tw, cfg.rare_level_min_prop)
            s_lab = np.array(
                [lv if lv in kept else LUMPED_LEVEL for lv in s_lab], dtype=object
            )
            t_lab = np.array(
                [lv if lv in kept else LUMPED_LEVEL for lv in t_lab], dtype=object
            )

        union_levels = set(s_lab) | set(t_lab)
        if len(union_levels) <= 1:
            warnings.warn(
                f"covariate {name!r} has a single level after transforms; dropped",
                stacklevel=2,
            )
            continue
        new_sample[name] = s_lab
        new_target[name] = t_lab
        kinds[name] = ColumnKind.CATEGORICAL

    return PairedSample(
        sample=sample.with_covariates(new_sample, kinds),
        target=target.with_covariates(new_target, kinds),
        common_covariates=tuple(kinds),
    )


# --------------------------------------------------------------------------
# Formula language: names combined with +, :, * and parentheses.
# Precedence (loosest to tightest): +, *, :. "a*b" expands to a + b + a:b.
# --------------------------------------------------------------------------

Term = tuple[str, ...]


@dataclass(frozen=True)
class FormulaAST:
    """Expanded, duplicate-free term list of a model formula."""

    terms: tuple[Term, ...]

    def labels(self) -> tuple[str, ...]:
        return tuple(":".join(t) for t in self.terms)


_TOKEN_RE = re.compile(r"\s*(?:([+*:()])|([^+*:()\s]+))")


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None or m.end() == pos:
            raise FormulaError(f"unexpected character {text[pos]!r}", position=pos)
        op, name = m.groups()
        if op is not None:
            tokens.append(("op", op, m.start(1)))
        elif name is not None:
            tokens.append(("name", name, m.start(2)))
        pos = m.end()
    return tokens


def _dedupe(terms: list[Term]) -> list[Term]:
    seen: set[frozenset[str]] = set()
    out = []
    for t in terms:
        key = frozenset(t)
        if key not in seen:
            seen.add(key)
            out.append(t)
    return out


def _cross(left: list[Term], right: list[Term]) -> list[Term]:
    out = []
    for a in left:
        for b in right:
            merged = list(a)
            for name in b:
                if name not in merged:
                    merged.append(name)
            out.append(tuple(merged))
    return _dedupe(out)


class _Parser:
    """Recursive-descent parser producing expanded term lists."""

    def __init__(self, tokens: list[tuple[str, str, int]], text_len: int):
        self.tokens = tokens
        self.i = 0
        self.text_len = text_len

    def _peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def _take(self):
        tok = self._peek()
        if tok is None:
            raise FormulaError("unexpected end of formula", position=self.text_len)
        self.i += 1
        return tok

    def parse(self) -> list[Term]:
        terms = self._sum()
        tok = self._peek()
        if tok is not None:
            raise FormulaError(f"unexpected token {tok[1]!r}", position=tok[2])
        return terms

    def _sum(self) -> list[Term]:
        terms = self._product()
        while True:
            tok = self._peek()
            if tok is None or tok[1] != "+":
                return terms
            self._take()
            terms = _dedupe(terms + self._product())

    def _product(self) -> list[Term]:
        terms = self._interaction()
        while True:
            tok = self._peek()
            if tok is None or tok[1] != "*":
                return terms
            self._take()
            right = self._interaction()
            terms = _dedupe(terms + right + _cross(terms, right))

    def _interaction(self) -> list[Term]:
        terms = self._atom()
        while True:
            tok = self._peek()
            if tok is None or tok[1] != ":":
                return terms
            self._take()
            terms = _cross(terms, self._atom())

    def _atom(self) -> list[Term]:
        kind, value, pos = self._take()
        if kind == "name":
            return [(value,)]
        if value == "(":
            terms = self._sum()
            tok = self._peek()
            if tok is None or tok[1] != ")":
                raise FormulaError("unbalanced parenthesis", position=pos)
            self._take()
            return terms
        raise FormulaError(f"unexpected token {value!r}", position=pos)


def parse_formula(text: str | None, covariates: Sequence[str]) -> FormulaAST:
    """Parse a formula into expanded terms, validated against covariates.

    ``None`` or an empty string gives the default additive model over all
    provided covariates.
    """
    if text is None or not text.strip():
        return FormulaAST(terms=tuple((c,) for c in covariates))
    tokens = _tokenize(text)
    if not tokens:
        raise FormulaError("empty formula", position=0)
    terms = _Parser(tokens, len(text)).parse()
    known = set(covariates)
    for kind, value, pos in tokens:
        if kind == "name" and value not in known:
            raise FormulaError(f"unknown covariate {value!r}", position=pos)
    return FormulaAST(terms=tuple(terms))


# --------------------------------------------------------------------------
# Model matrix
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ModelMatrix:
    """Sample and target blocks encoded into one shared column space."""

    columns: tuple[str, ...]
    sample_block: np.ndarray
    target_block: np.ndarray
    column_to_main_covar: dict[str, str]

    @property
    def k(self) -> int:
        return len(self.columns)


def _level_columns(pair: PairedSample, name: str) -> tuple[list[str], dict[str, int]]:
    """Union level set of a categorical covariate, lexically sorted."""
    levels = sorted(
        set(pair.sample.covariates[name]) | set(pair.target.covariates[name])
    )
    return levels, {lv: i for i, lv in enumerate(levels)}


def build_model_matrix(pair: PairedSample, formula: FormulaAST | None = None) -> ModelMatrix:
    """One-hot encode a transformed pair into a numeric design matrix.

    Main effects drop the lexically first level as reference; interaction
    columns are products of the constituent one-hot columns. Columns that
    are constant across the stacked sample and target are removed.
    """
    for name in pair.common_covariates:
        if pair.sample.covariate_kinds[name] is not ColumnKind.CATEGORICAL:
            raise KindMismatchError(
                f"covariate {name!r} is not categorical; apply transforms first"
            )
    if formula is None:
        formula = parse_formula(None, pair.common_covariates)
    known = set(pair.common_covariates)
    for term in formula.terms:
        for name in term:
            if name not in known:
                raise FormulaError(
                    f"formula references covariate {name!r} that is not available "
                    "(it may have been dropped by the transforms)"
                )

    # per-covariate one-hot indicator columns for non-reference levels
    onehots: dict[str, dict[str, tuple[np.ndarray, np.ndarray]]] = {}
    for name in {n for term in formula.terms for n in term}:
        levels, _ = _level_columns(pair, name)
        cols = {}
        for level in levels[1:]:
            s = (pair.sample.covariates[name] == level).astype(float)
            t = (pair.target.covariates[name] == level).astype(float)
            cols[level] = (s, t)
        onehots[name] = cols

    columns: list[str] = []
    col_main: dict[str, str] = {}
    sample_cols: list[np.ndarray] = []
    target_cols: list[np.ndarray] = []
    for term in formula.terms:
        label = ":".join(term)
        level_sets = [sorted(onehots[name]) for name in term]
        for combo in itertools.product(*level_sets):
            s_col = np.ones(pair.n)
            t_col = np.ones(pair.target_n)
            parts = []
            for name, level in zip(term, combo):
                s_ind, t_ind = onehots[name][level]
                s_col = s_col * s_ind
                t_col = t_col * t_ind
                parts.append(f"{name}={level}")
            col_name = ":".join(parts)
            stacked_min = min(s_col.min(), t_col.min())
            stacked_max = max(s_col.max(), t_col.max())
            if stacked_min == stacked_max:
                continue  # constant across sample and target
            columns.append(col_name)
            col_main[col_name] = label
            sample_cols.append(s_col)
            target_cols.append(t_col)

    sample_block = (
        np.column_stack(sample_cols) if sample_cols else np.empty((pair.n, 0))
    )
    target_block = (
        np.column_stack(target_cols) if target_cols else np.empty((pair.target_n, 0))
    )
    return ModelMatrix(
        columns=tuple(columns),
        sample_block=sample_block,
        target_block=target_block,
        column_to_main_covar=col_main,
    )
