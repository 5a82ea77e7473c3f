"""CSV ingestion and weight-file round-tripping."""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd

from .errors import EmptyTableError, InvalidWeightError, RebalanceError, WeightAlignmentError
from .sample import Sample, build_sample


class MalformedCsvError(RebalanceError):
    """The CSV file could not be parsed."""


def load_csv(
    path: str | Path,
    id_col: str,
    weight_col: str | None = None,
    outcome_cols: Sequence[str] | None = None,
) -> Sample:
    """Read an RFC 4180 CSV (UTF-8, header row) into a :class:`Sample`.

    All cells are read as text; numeric detection and missing-marker
    handling follow the sample-building rules, so a file round-trips the
    same way a DataFrame does.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")
    try:
        # utf-8-sig reads plain UTF-8 and also strips a leading BOM
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8-sig")
    except pd.errors.EmptyDataError as exc:
        raise EmptyTableError(f"{path}: file has no header or rows") from exc
    except pd.errors.ParserError as exc:
        raise MalformedCsvError(f"{path}: {exc}") from exc
    if len(frame) == 0:
        raise EmptyTableError(f"{path}: file has a header but no data rows")
    return build_sample(frame, id_col=id_col, weight_col=weight_col, outcome_cols=outcome_cols)


def write_weights_csv(path: str | Path, ids: np.ndarray, weights: np.ndarray) -> None:
    """Write an (id, weight) CSV; weights printed with 17 significant digits."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["id", "weight"])
        for unit_id, w in zip(ids, weights):
            writer.writerow([unit_id, format(float(w), ".17g")])


def read_weights_csv(path: str | Path, sample: Sample) -> np.ndarray:
    """Read fitted weights and align them to the sample's unit order.

    The id sets must match exactly and every weight must be positive and
    finite.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")
    by_id: dict[str, float] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "id" not in reader.fieldnames or "weight" not in reader.fieldnames:
            raise MalformedCsvError(f"{path}: expected header with 'id' and 'weight' columns")
        for row in reader:
            unit_id = row["id"]
            if unit_id in by_id:
                raise WeightAlignmentError(f"{path}: duplicate id {unit_id!r}")
            try:
                value = float(row["weight"])
            except (TypeError, ValueError):
                raise InvalidWeightError(
                    f"{path}: weight for id {unit_id!r} is not numeric: {row['weight']!r}"
                ) from None
            by_id[unit_id] = value

    sample_ids = set(sample.ids)
    file_ids = set(by_id)
    missing = sorted(sample_ids - file_ids)
    extra = sorted(file_ids - sample_ids)
    if missing or extra:
        parts = []
        if missing:
            parts.append(f"ids missing from weights file: {missing[:10]}")
        if extra:
            parts.append(f"ids not in the sample: {extra[:10]}")
        raise WeightAlignmentError("; ".join(parts), missing=missing, extra=extra)

    values = np.array([by_id[i] for i in sample.ids], dtype=float)
    if not np.isfinite(values).all() or (values <= 0).any():
        bad = [i for i, v in zip(sample.ids, values) if not (np.isfinite(v) and v > 0)]
        raise InvalidWeightError(
            f"weights must be positive and finite; offending ids: {bad[:10]}"
        )
    return values
