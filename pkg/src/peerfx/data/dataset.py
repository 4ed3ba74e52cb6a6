"""
CSV dataset ingestion: unit_id, attribute, group_id, outcome
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np
import pandas as pd

from ..models.population import Assignment, OutcomeData, Population
from ..utils.error_handling import ValidationError

logger = logging.getLogger(__name__)

REQUIRED_COLUMNS = ('unit_id', 'attribute')
OPTIONAL_COLUMNS = ('group_id', 'outcome')


@dataclass(frozen=True)
class Dataset:
    """A population with whatever assignment and outcomes the file supplied"""
    population: Population
    assignment: Optional[Assignment] = None
    outcomes: Optional[Tuple[float, ...]] = None
    source: Optional[str] = None

    @property
    def has_groups(self) -> bool:
        return self.assignment is not None

    @property
    def has_outcomes(self) -> bool:
        return self.outcomes is not None

    def outcome_data(self) -> OutcomeData:
        if self.assignment is None:
            raise ValidationError(f"{self.source or 'Dataset'} has no group_id column")
        if self.outcomes is None:
            raise ValidationError(f"{self.source or 'Dataset'} has no outcome column")
        return OutcomeData(self.population, self.assignment, self.outcomes)


def _blank(series: pd.Series) -> pd.Series:
    return series.isna() | (series.astype(str).str.strip() == '')


def _infer_group_size(group_ids: pd.Series) -> int:
    sizes = group_ids.value_counts()
    if sizes.nunique() != 1:
        detail = ", ".join(f"{g}: {s}" for g, s in sizes.sort_index().items())
        raise ValidationError(f"Groups must all have the same size; got {detail}")
    size = int(sizes.iloc[0])
    if size < 2:
        raise ValidationError("Groups need at least two members")
    return size


def dataset_from_frame(frame: pd.DataFrame, K: Optional[int] = None,
                       source: Optional[str] = None) -> Dataset:
    """Validate a data frame and build the population, assignment and outcomes.

    Attribute labels are numbered 1..H in order of first appearance. K comes from
    the group sizes when a group_id column is present, otherwise it must be given.
    """
    name = source or 'dataset'
    frame = frame.rename(columns=lambda c: str(c).strip())
    missing = [c for c in REQUIRED_COLUMNS if c not in frame.columns]
    if missing:
        raise ValidationError(f"{name} is missing required columns: {missing}")
    if frame.empty:
        raise ValidationError(f"{name} has no rows")

    for column in REQUIRED_COLUMNS:
        blank = _blank(frame[column])
        if blank.any():
            raise ValidationError(f"{name}: column {column} is empty on rows {_rows(blank)}")
    unit_ids = frame['unit_id'].astype(str).str.strip()
    duplicated = unit_ids[unit_ids.duplicated()].unique().tolist()
    if duplicated:
        raise ValidationError(f"{name}: duplicate unit_id values {duplicated[:5]}")

    raw_attributes = frame['attribute'].astype(str).str.strip()
    labels = list(dict.fromkeys(raw_attributes))
    codes = raw_attributes.map({label: a for a, label in enumerate(labels, start=1)})

    group_ids = None
    if 'group_id' in frame.columns and not _blank(frame['group_id']).all():
        blank = _blank(frame['group_id'])
        if blank.any():
            raise ValidationError(f"{name}: group_id is empty on rows {_rows(blank)}")
        group_ids = frame['group_id'].astype(str).str.strip()
        size = _infer_group_size(group_ids)
        if K is not None and K != size - 1:
            raise ValidationError(f"{name}: groups have size {size} but K={K} was requested")
        K = size - 1
    if K is None:
        raise ValidationError(f"{name} has no group_id column; the number of peers K must be given")

    population = Population.from_units(list(zip(unit_ids, codes.astype(int))), int(K), labels)
    assignment = None
    if group_ids is not None:
        assignment = Assignment.from_group_ids(population, dict(zip(unit_ids, group_ids)))

    outcomes = None
    if 'outcome' in frame.columns and not _blank(frame['outcome']).all():
        values = pd.to_numeric(frame['outcome'].astype(str).str.strip(), errors='coerce')
        bad = values.isna() | ~np.isfinite(values.to_numpy(dtype=float, na_value=np.nan))
        if bad.any():
            raise ValidationError(f"{name}: outcome is missing or not a finite number on rows {_rows(bad)}")
        outcomes = tuple(float(v) for v in values)

    logger.debug("Loaded %s: n=%d, H=%d, K=%d, groups=%s, outcomes=%s", name, population.n,
                 population.H, population.K, assignment is not None, outcomes is not None)
    return Dataset(population, assignment, outcomes, source)


def _rows(mask: pd.Series) -> List[int]:
    # 1-based data rows, header excluded
    return [int(i) + 1 for i in np.flatnonzero(mask.to_numpy())][:5]


def read_dataset(path: Union[str, Path], K: Optional[int] = None) -> Dataset:
    """Read a dataset CSV; every column is read as text and validated here"""
    path = Path(path)
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True)
    except FileNotFoundError:
        raise ValidationError(f"Dataset file not found: {path}") from None
    except (pd.errors.EmptyDataError, pd.errors.ParserError, UnicodeDecodeError) as e:
        raise ValidationError(f"Could not parse dataset {path}: {e}") from None
    return dataset_from_frame(frame, K, source=str(path))
