"""
Treatment assignment design models for peerfx
"""

from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, Optional, Sequence, Tuple

from ..utils.error_handling import ValidationError


class DesignKind(Enum):
    """Assignment mechanisms"""
    RANDOM_PARTITION = "rp"
    COMPLETE_RANDOMIZATION = "cr"


@dataclass(frozen=True)
class Design:
    """Random partitioning, or complete randomization with composition vector l"""
    kind: DesignKind
    composition: Optional[Tuple[int, ...]] = None
    conditioned: bool = False  # CR obtained by conditioning an RP experiment on L(Z)

    def __post_init__(self):
        """Validate the composition vector against the design kind"""
        if self.kind is DesignKind.COMPLETE_RANDOMIZATION:
            if self.composition is None:
                raise ValidationError("Complete randomization needs a composition vector l")
            if any(int(x) != x or x < 0 for x in self.composition):
                raise ValidationError(f"Composition entries must be non-negative integers, got {self.composition}")
            object.__setattr__(self, 'composition', tuple(int(x) for x in self.composition))
        elif self.composition is not None:
            raise ValidationError("Random partitioning takes no composition vector")

    @classmethod
    def random_partition(cls) -> 'Design':
        return cls(DesignKind.RANDOM_PARTITION)

    @classmethod
    def complete_randomization(cls, composition: Sequence[int], conditioned: bool = False) -> 'Design':
        return cls(DesignKind.COMPLETE_RANDOMIZATION, tuple(composition), conditioned)

    @property
    def is_complete(self) -> bool:
        return self.kind is DesignKind.COMPLETE_RANDOMIZATION

    def to_dict(self) -> Dict[str, Any]:
        return {
            'kind': self.kind.value,
            'composition': list(self.composition) if self.composition is not None else None,
            'conditioned_on_observed_composition': self.conditioned,
        }
