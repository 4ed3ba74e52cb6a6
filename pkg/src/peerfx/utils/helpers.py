"""
General utility functions for peerfx
"""

import math
from pathlib import Path
from typing import Any, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from .error_handling import ValidationError

SEED_LIMIT = 2 ** 64


def validate_seed(seed: int) -> int:
    """Check that a seed fits in 64 unsigned bits"""
    if not isinstance(seed, (int, np.integer)) or isinstance(seed, bool):
        raise ValidationError(f"Seed must be an integer, got {seed!r}")
    if not 0 <= int(seed) < SEED_LIMIT:
        raise ValidationError(f"Seed must satisfy 0 <= seed < 2^64, got {seed}")
    return int(seed)


def make_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(validate_seed(seed)))


def derive_rng(seed: int, index: int) -> np.random.Generator:
    """Generator for draw ``index`` of a run seeded with ``seed``.

    The stream depends only on (seed, index), never on which worker runs the draw.
    """
    return np.random.default_rng(np.random.SeedSequence([validate_seed(seed), int(index)]))


def chunk_ranges(total: int, chunk_size: int) -> Iterator[Tuple[int, int]]:
    """Consecutive [start, stop) ranges covering 0..total"""
    for start in range(0, total, chunk_size):
        yield start, min(start + chunk_size, total)


def parse_int_list(text: Union[str, Sequence[int], None], name: str = "value") -> Optional[Tuple[int, ...]]:
    """Parse '0,1,1,0,0' (or pass through a sequence) into a tuple of integers"""
    if text is None:
        return None
    if not isinstance(text, str):
        items = list(text)
    else:
        items = [part.strip() for part in text.split(',') if part.strip()]
    try:
        values = tuple(int(item) for item in items)
    except (TypeError, ValueError):
        raise ValidationError(f"{name} must be comma-separated integers, got {text!r}") from None
    if not values:
        raise ValidationError(f"{name} must not be empty")
    return values


def parse_contrasts(text: Union[str, Sequence[Sequence[int]], None]) -> Optional[List[Tuple[int, int]]]:
    """Parse 'all' or 'R1-R2,R1-R4' (1-based canonical peer-set positions) to 0-based pairs.

    Returns None for 'all'.
    """
    if text is None or (isinstance(text, str) and text.strip().lower() == 'all'):
        return None
    if not isinstance(text, str):
        return [(int(a) - 1, int(b) - 1) for a, b in text]
    pairs = []
    for part in text.split(','):
        part = part.strip().upper().replace('R', '')
        pieces = part.split('-')
        if len(pieces) != 2:
            raise ValidationError(f"Contrast {part!r} must look like R1-R2")
        try:
            first, second = int(pieces[0]), int(pieces[1])
        except ValueError:
            raise ValidationError(f"Contrast {part!r} must look like R1-R2") from None
        pairs.append((first - 1, second - 1))
    return pairs


def json_safe(value: Any) -> Any:
    """Recursively convert numpy scalars and arrays to plain Python; non-finite floats become None"""
    if isinstance(value, dict):
        return {str(k): json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [json_safe(v) for v in value]
    if isinstance(value, np.ndarray):
        return json_safe(value.tolist())
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    if isinstance(value, Path):
        return str(value)
    return value


def ensure_directory_exists(dir_path: Union[str, Path]) -> Path:
    """Ensure directory exists, create if necessary"""
    path = Path(dir_path)
    path.mkdir(parents=True, exist_ok=True)
    return path
