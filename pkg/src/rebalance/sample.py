"""Core data model: samples, sample/target pairing, and weight vectors.

A :class:`Sample` is an immutable snapshot of a tabular dataset: unique unit
ids, typed covariate columns, strictly positive design weights, and optional
outcome columns. A :class:`PairedSample` binds a sample to its target
population and records the covariates they share. Unit order of the input
table is preserved everywhere so weights stay aligned to ids by position.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np
import pandas as pd

from .errors import (
    DuplicateIdError,
    EmptyTableError,
    InvalidWeightError,
    KindMismatchError,
    NoCommonCovariatesError,
    UnknownColumnError,
)

#: Explicit level used for missing categorical cells.
MISSING_LEVEL = "_NA"

#: Label that rare categorical levels are merged into by the transforms.
LUMPED_LEVEL = "_lumped_other"

# Strings treated as missing markers (case-insensitive, after stripping).
_MISSING_STRINGS = frozenset({"", "nan", "na"})


class ColumnKind(Enum):
    NUMERIC = "numeric"
    CATEGORICAL = "categorical"
    ID = "id"
    WEIGHT = "weight"
    OUTCOME = "outcome"


class WeightScale(Enum):
    RAW = "raw"
    SAMPLE_SUM = "sample_sum"
    POPULATION_SUM = "population_sum"


def _is_missing(value) -> bool:
    if value is None:
        return True
    if isinstance(value, float):
        return math.isnan(value)
    if isinstance(value, str):
        return value.strip().lower() in _MISSING_STRINGS
    try:
        return bool(pd.isna(value))
    except (TypeError, ValueError):
        return False


def _parse_covariate(values: pd.Series) -> tuple[ColumnKind, np.ndarray]:
    """Detect a column's kind and return its canonical storage array.

    A column is numeric iff every non-missing cell parses as a finite
    decimal; otherwise it is categorical with missing cells mapped to the
    explicit ``_NA`` level. Boolean columns are treated as categorical.
    """
    if pd.api.types.is_bool_dtype(values.dtype):
        levels = np.array([str(bool(v)) for v in values], dtype=object)
        return ColumnKind.CATEGORICAL, levels
    if pd.api.types.is_numeric_dtype(values.dtype):
        arr = values.to_numpy(dtype=float)
        if not np.isinf(arr).any():
            return ColumnKind.NUMERIC, arr

    parsed = np.full(len(values), np.nan)
    numeric = True
    for i, cell in enumerate(values):
        if _is_missing(cell):
            continue
        try:
            x = float(str(cell).strip())
        except ValueError:
            numeric = False
            break
        if not math.isfinite(x):
            numeric = False
            break
        parsed[i] = x
    if numeric:
        return ColumnKind.NUMERIC, parsed

    levels = np.array(
        [MISSING_LEVEL if _is_missing(cell) else str(cell) for cell in values],
        dtype=object,
    )
    return ColumnKind.CATEGORICAL, levels


@dataclass(frozen=True)
class Sample:
    """An immutable unit-level dataset with typed columns.

    Numeric covariates are float arrays with NaN for missing cells;
    categorical covariates are string arrays where missing cells already
    carry the explicit ``_NA`` level.
    """

    ids: np.ndarray
    covariates: dict[str, np.ndarray]
    covariate_kinds: dict[str, ColumnKind]
    design_weights: np.ndarray
    outcomes: dict[str, np.ndarray]
    outcome_kinds: dict[str, ColumnKind]
    id_column: str = "id"
    weight_column: str | None = None

    @property
    def n(self) -> int:
        return len(self.ids)

    @property
    def covariate_names(self) -> tuple[str, ...]:
        return tuple(self.covariates)

    @property
    def outcome_names(self) -> tuple[str, ...]:
        return tuple(self.outcomes)

    @property
    def design_total(self) -> float:
        """Sum of design weights; equals the unit count when all are 1."""
        return float(self.design_weights.sum())

    @property
    def column_kinds(self) -> dict[str, ColumnKind]:
        """Role of every column: id, weight, outcomes, then covariates."""
        kinds = {self.id_column: ColumnKind.ID}
        if self.weight_column is not None:
            kinds[self.weight_column] = ColumnKind.WEIGHT
        for name in self.outcomes:
            kinds[name] = ColumnKind.OUTCOME
        kinds.update(self.covariate_kinds)
        return kinds

    def levels(self, covariate: str) -> tuple[str, ...]:
        """Sorted distinct levels of a categorical covariate."""
        if self.covariate_kinds[covariate] is not ColumnKind.CATEGORICAL:
            raise KindMismatchError(f"covariate {covariate!r} is not categorical")
        return tuple(sorted(set(self.covariates[covariate])))

    def with_covariates(
        self,
        covariates: dict[str, np.ndarray],
        kinds: dict[str, ColumnKind],
    ) -> "Sample":
        """Copy of this sample with the covariate block replaced."""
        return Sample(
            ids=self.ids,
            covariates=dict(covariates),
            covariate_kinds=dict(kinds),
            design_weights=self.design_weights,
            outcomes=self.outcomes,
            outcome_kinds=self.outcome_kinds,
            id_column=self.id_column,
            weight_column=self.weight_column,
        )

    def __repr__(self) -> str:  # keep prints short in notebooks
        return (
            f"Sample(n={self.n}, covariates={list(self.covariates)}, "
            f"outcomes={list(self.outcomes)})"
        )


def build_sample(
    records: pd.DataFrame,
    id_col: str,
    weight_col: str | None = None,
    outcome_cols: Sequence[str] | None = None,
) -> Sample:
    """Build a :class:`Sample` from a tabular dataset.

    Columns other than the id, weight, and outcome columns become
    covariates. Ids are normalized to strings and must be unique. A missing
    weight column means every unit gets design weight 1.0.
    """
    outcome_cols = list(outcome_cols or [])
    if len(records) == 0:
        raise EmptyTableError("input table has no rows")
    if records.columns.duplicated().any():
        dupes = sorted(set(records.columns[records.columns.duplicated()]))
        raise UnknownColumnError(f"table has duplicate column labels: {dupes}")

    named = [id_col] + ([weight_col] if weight_col else []) + outcome_cols
    for name in named:
        if name not in records.columns:
            raise UnknownColumnError(f"column {name!r} not found in table")
    if len(set(named)) != len(named):
        raise UnknownColumnError(
            f"id, weight, and outcome column names must be distinct, got {named}"
        )

    raw_ids = records[id_col]
    if raw_ids.isna().any():
        raise DuplicateIdError(f"id column {id_col!r} contains missing values")
    ids = np.array([str(v) for v in raw_ids], dtype=object)
    if len(set(ids)) != len(ids):
        seen, dupes = set(), []
        for v in ids:
            if v in seen:
                dupes.append(v)
            seen.add(v)
        raise DuplicateIdError(f"duplicate id values: {sorted(set(dupes))[:10]}")

    if weight_col is not None:
        kind, weights = _parse_covariate(records[weight_col])
        if kind is not ColumnKind.NUMERIC:
            raise InvalidWeightError(f"weight column {weight_col!r} is not numeric")
        if np.isnan(weights).any() or (weights <= 0).any():
            raise InvalidWeightError(
                f"design weights in {weight_col!r} must be strictly positive and finite"
            )
    else:
        weights = np.ones(len(records))

    covariates: dict[str, np.ndarray] = {}
    kinds: dict[str, ColumnKind] = {}
    for name in records.columns:
        if name in named:
            continue
        kind, values = _parse_covariate(records[name])
        covariates[name] = values
        kinds[name] = kind

    outcomes: dict[str, np.ndarray] = {}
    outcome_kinds: dict[str, ColumnKind] = {}
    for name in outcome_cols:
        kind, values = _parse_covariate(records[name])
        outcomes[name] = values
        outcome_kinds[name] = kind

    return Sample(
        ids=ids,
        covariates=covariates,
        covariate_kinds=kinds,
        design_weights=weights,
        outcomes=outcomes,
        outcome_kinds=outcome_kinds,
        id_column=id_col,
        weight_column=weight_col,
    )


@dataclass(frozen=True)
class PairedSample:
    """A sample bound to its target population.

    ``common_covariates`` lists the shared covariate names in the sample's
    column order; covariates present on only one side are ignored by all
    downstream estimation.
    """

    sample: Sample
    target: Sample
    common_covariates: tuple[str, ...]

    @property
    def n(self) -> int:
        return self.sample.n

    @property
    def target_n(self) -> int:
        return self.target.n

    @property
    def population_size(self) -> float:
        """Total target design weight; the scale fitted weights sum to."""
        return self.target.design_total

    def __repr__(self) -> str:
        return (
            f"PairedSample(n={self.n}, N={self.target_n}, "
            f"common={list(self.common_covariates)})"
        )


def pair_with_target(sample: Sample, target: Sample) -> PairedSample:
    """Bind a sample to its target, keeping only shared covariates."""
    common = [c for c in sample.covariate_names if c in target.covariates]
    if not common:
        raise NoCommonCovariatesError(
            "sample and target share no covariate names; nothing to balance on"
        )
    mismatched = [
        c for c in common if sample.covariate_kinds[c] is not target.covariate_kinds[c]
    ]
    if mismatched:
        details = ", ".join(
            f"{c}: sample={sample.covariate_kinds[c].value} "
            f"target={target.covariate_kinds[c].value}"
            for c in mismatched
        )
        raise KindMismatchError(f"covariate kind mismatch on shared names ({details})")
    return PairedSample(sample=sample, target=target, common_covariates=tuple(common))


@dataclass(frozen=True)
class WeightVector:
    """Per-unit weights aligned (by position) to a sample's ids."""

    values: np.ndarray
    scale: WeightScale = WeightScale.RAW

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", values)
        if values.ndim != 1 or len(values) == 0:
            raise InvalidWeightError("weights must be a non-empty 1-d vector")
        if not np.isfinite(values).all():
            raise InvalidWeightError("weights must all be finite")
        if (values < 0).any():
            raise InvalidWeightError("weights must be non-negative")
        if not (values > 0).any():
            raise InvalidWeightError("at least one weight must be positive")

    def __len__(self) -> int:
        return len(self.values)


def normalize_weights(
    w: WeightVector,
    target_scale: WeightScale,
    reference: PairedSample,
) -> WeightVector:
    """Rescale weights by a single constant to satisfy a scale convention.

    ``SAMPLE_SUM`` forces the mean weight to 1 (sum equals the unit count);
    ``POPULATION_SUM`` forces the sum to the target's total design weight.
    Relative proportions of the weights are unchanged.
    """
    if len(w) != reference.n:
        raise InvalidWeightError(
            f"weight vector length {len(w)} does not match sample size {reference.n}"
        )
    values = w.values
    if target_scale is WeightScale.RAW:
        return WeightVector(values.copy(), WeightScale.RAW)
    if target_scale is WeightScale.SAMPLE_SUM:
        factor = len(values) / values.sum()
    elif target_scale is WeightScale.POPULATION_SUM:
        factor = reference.population_size / values.sum()
    else:  # pragma: no cover - enum is closed
        raise ValueError(f"unknown scale {target_scale}")
    return WeightVector(values * factor, target_scale)
