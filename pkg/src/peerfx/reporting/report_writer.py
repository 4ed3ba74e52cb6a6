"""
JSON and CSV output for peerfx commands
"""

import csv
import io
import json
import math
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, TextIO, Union

from .. import __version__
from ..core.spaces import TreatmentSpace
from ..estimation.estimator import EstimateReport, wald_interval
from ..models.population import Assignment, Population
from ..utils.error_handling import ErrorManager, ValidationError
from ..utils.helpers import ensure_directory_exists, json_safe


class EnvelopeField(Enum):
    """Top-level keys of every JSON document"""
    VERSION = "peerfx_version"
    COMMAND = "command"
    CONFIG = "config"
    ATTRIBUTE_LABELS = "attribute_labels"
    PEER_SETS = "peer_sets"
    GROUP_SETS = "group_sets"
    RESULT = "result"
    DIAGNOSTICS = "diagnostics"


class AssignmentField(Enum):
    """Columns of the assignment CSV"""
    UNIT_ID = "unit_id"
    GROUP_ID = "group_id"


def build_envelope(command: str, config: Dict[str, Any], result: Any,
                   space: Optional[TreatmentSpace] = None,
                   attribute_labels: Sequence[str] = (),
                   errors: Optional[ErrorManager] = None) -> Dict[str, Any]:
    """Wrap a command result with provenance: version, config echo and canonical orderings"""
    names = list(attribute_labels) or None
    return {
        EnvelopeField.VERSION.value: __version__,
        EnvelopeField.COMMAND.value: command,
        EnvelopeField.CONFIG.value: config,
        EnvelopeField.ATTRIBUTE_LABELS.value: {str(a): label for a, label in enumerate(attribute_labels, start=1)},
        EnvelopeField.PEER_SETS.value: _ordering(space.render_peer_sets(names)) if space else [],
        EnvelopeField.GROUP_SETS.value: _ordering(space.render_group_sets(names)) if space else [],
        EnvelopeField.RESULT.value: result,
        EnvelopeField.DIAGNOSTICS.value: errors.to_list() if errors is not None else [],
    }


def _ordering(labels: Sequence[str]) -> List[Dict[str, Any]]:
    return [{'index': index, 'members': label} for index, label in enumerate(labels, start=1)]


def dumps_json(document: Any) -> str:
    """Sorted keys, two-space indent, shortest round-trip floats, non-finite numbers as null"""
    return json.dumps(json_safe(document), sort_keys=True, indent=2, allow_nan=False, ensure_ascii=False) + "\n"


def write_json(document: Any, target: Union[TextIO, str, Path]) -> None:
    text = dumps_json(document)
    if isinstance(target, (str, Path)):
        path = Path(target)
        ensure_directory_exists(path.parent)
        path.write_text(text, encoding='utf-8')
    else:
        target.write(text)


def assignment_rows(assignment: Assignment, population: Population,
                    prefix: str = "g") -> List[Dict[str, str]]:
    """unit_id/group_id rows in population order; groups numbered in canonical order"""
    group_width = len(str(assignment.m))
    return [
        {
            AssignmentField.UNIT_ID.value: unit_id,
            AssignmentField.GROUP_ID.value: f"{prefix}{assignment.group_of(i) + 1:0{group_width}d}",
        }
        for i, unit_id in enumerate(population.unit_ids)
    ]


def write_assignment_csv(assignment: Assignment, population: Population,
                         target: Union[TextIO, str, Path, None] = None) -> str:
    """Write the assignment as CSV and return the text"""
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=[f.value for f in AssignmentField], lineterminator="\n")
    writer.writeheader()
    writer.writerows(assignment_rows(assignment, population))
    text = buffer.getvalue()
    if isinstance(target, (str, Path)):
        path = Path(target)
        ensure_directory_exists(path.parent)
        path.write_text(text, encoding='utf-8')
    elif target is not None:
        target.write(text)
    return text


def plot_data(report: EstimateReport, attribute_labels: Sequence[str], peer_labels: Sequence[str],
              alpha: float) -> List[Dict[str, Any]]:
    """Rows for a bar chart of subgroup means with Wald intervals.

    Intervals use the within-stratum variance of each cell mean given the observed
    cell sizes; cells whose variance is unavailable get no interval.
    """
    rows = []
    counts = report.observed_counts
    cell_variances = _cell_mean_variances(report)
    for a, attribute in enumerate(attribute_labels):
        for k, peer in enumerate(peer_labels):
            estimate = float(report.yhat[a, k])
            variance = float(cell_variances[a][k])
            lower = upper = None
            if math.isfinite(estimate) and math.isfinite(variance) and variance >= 0:
                lower, upper = wald_interval(estimate, variance, alpha)
            rows.append({
                'attribute': attribute,
                'peer_set': peer,
                'estimate': estimate,
                'lower': lower,
                'upper': upper,
                'n': int(counts[a, k]),
            })
    return rows


def _cell_mean_variances(report: EstimateReport) -> List[List[float]]:
    # Neyman-type variance of a cell mean: (1 - n_[a]r/n_[a]) s^2 / n_[a]r, nan when unavailable
    components = report.components
    if components is None:
        raise ValidationError("Plot data needs variance components; run the full estimate first")
    counts = report.observed_counts
    totals = counts.sum(axis=1)
    result = []
    for a in range(counts.shape[0]):
        row = []
        for k in range(counts.shape[1]):
            n_ar, n_a = int(counts[a, k]), int(totals[a])
            s2 = float(components.s2[a, k])
            row.append((1 - n_ar / n_a) * s2 / n_ar if n_ar > 0 and math.isfinite(s2) else float('nan'))
        result.append(row)
    return result
