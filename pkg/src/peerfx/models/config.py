"""
Run configuration models for peerfx
"""

import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

from ..utils.error_handling import ConfigurationError, ValidationError
from ..utils.helpers import SEED_LIMIT, parse_contrasts, parse_int_list
from .design import DesignKind

MAX_WORKERS = 64


@dataclass
class InferenceSettings:
    """Design and estimation settings"""
    design: DesignKind = DesignKind.RANDOM_PARTITION
    composition: Optional[Tuple[int, ...]] = None
    alpha: float = 0.05
    contrasts: str = "all"
    unconditional: bool = False

    def __post_init__(self):
        """Validate inference settings"""
        if not (0.0 < self.alpha < 1.0):
            raise ConfigurationError(f"alpha must satisfy 0 < alpha < 1, got {self.alpha}")
        if self.composition is not None and any(x < 0 for x in self.composition):
            raise ConfigurationError(f"composition entries must be non-negative, got {self.composition}")
        if self.design is DesignKind.RANDOM_PARTITION and self.composition is not None:
            raise ConfigurationError("composition only applies to design 'cr'")
        try:
            parse_contrasts(self.contrasts)
        except ValidationError as e:
            raise ConfigurationError(f"contrasts: {e}") from None


@dataclass
class SimulationSettings:
    """Randomness and resampling settings"""
    seed: int = 0
    draws: int = 10000
    workers: int = 0
    enumeration_limit: int = 100000
    oracle_cap: int = 1000000

    def __post_init__(self):
        """Validate simulation settings"""
        if not (0 <= self.seed < SEED_LIMIT):
            raise ConfigurationError(f"seed must satisfy 0 <= seed < 2^64, got {self.seed}")
        if self.draws < 1:
            raise ConfigurationError(f"draws must be at least 1, got {self.draws}")
        if not (0 <= self.workers <= MAX_WORKERS):
            raise ConfigurationError(f"workers must be between 0 and {MAX_WORKERS}, got {self.workers}")
        if self.enumeration_limit < 0:
            raise ConfigurationError(f"enumeration_limit must be non-negative, got {self.enumeration_limit}")
        if self.oracle_cap < 1:
            raise ConfigurationError(f"oracle_cap must be positive, got {self.oracle_cap}")


@dataclass
class OptimizationSettings:
    """Integer program and fiducial settings"""
    solver_enumeration_limit: int = 1000000
    psd_tolerance: float = 1e-8

    def __post_init__(self):
        """Validate optimization settings"""
        if self.solver_enumeration_limit < 1:
            raise ConfigurationError(
                f"solver_enumeration_limit must be positive, got {self.solver_enumeration_limit}")
        if not (0.0 <= self.psd_tolerance < 1.0) or math.isnan(self.psd_tolerance):
            raise ConfigurationError(f"psd_tolerance must be in [0, 1), got {self.psd_tolerance}")


@dataclass
class OutputSettings:
    emit_plot_data: bool = False


def _integer(data: Dict[str, Any], key: str, default: int) -> int:
    value = data.get(key, default)
    if isinstance(value, bool) or (isinstance(value, float) and not value.is_integer()):
        raise ConfigurationError(f"{key} must be an integer, got {value!r}")
    try:
        return int(value)
    except (TypeError, ValueError):
        raise ConfigurationError(f"{key} must be an integer, got {value!r}") from None


def _number(data: Dict[str, Any], key: str, default: float) -> float:
    value = data.get(key, default)
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ConfigurationError(f"{key} must be a number, got {value!r}") from None


def _flag(data: Dict[str, Any], key: str, default: bool) -> bool:
    value = data.get(key, default)
    if not isinstance(value, bool):
        raise ConfigurationError(f"{key} must be true or false, got {value!r}")
    return value


@dataclass
class RunConfig:
    """Complete run configuration; its to_dict() is echoed into every output"""
    config_version: str = "1.0.0"
    inference: InferenceSettings = field(default_factory=InferenceSettings)
    simulation: SimulationSettings = field(default_factory=SimulationSettings)
    optimization: OptimizationSettings = field(default_factory=OptimizationSettings)
    output: OutputSettings = field(default_factory=OutputSettings)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'RunConfig':
        """Create configuration from a flat dictionary of keys"""
        if not isinstance(data, dict):
            raise ConfigurationError("Configuration must be a mapping of keys to values")
        known = set(cls().to_dict())
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigurationError(f"Unknown configuration keys: {unknown}")

        try:
            design = DesignKind(str(data.get('design', 'rp')).lower())
        except ValueError:
            raise ConfigurationError(f"design must be 'rp' or 'cr', got {data.get('design')!r}") from None
        try:
            composition = parse_int_list(data.get('composition'), 'composition')
        except ValidationError as e:
            raise ConfigurationError(str(e)) from None
        contrasts = data.get('contrasts', 'all')
        if not isinstance(contrasts, str):
            raise ConfigurationError(f"contrasts must be a string like 'all' or 'R1-R2,R1-R3', got {contrasts!r}")

        return cls(
            config_version=str(data.get('config_version', '1.0.0')),
            inference=InferenceSettings(
                design=design,
                composition=composition,
                alpha=_number(data, 'alpha', 0.05),
                contrasts=contrasts,
                unconditional=_flag(data, 'unconditional', False),
            ),
            simulation=SimulationSettings(
                seed=_integer(data, 'seed', 0),
                draws=_integer(data, 'draws', 10000),
                workers=_integer(data, 'workers', 0),
                enumeration_limit=_integer(data, 'enumeration_limit', 100000),
                oracle_cap=_integer(data, 'oracle_cap', 1000000),
            ),
            optimization=OptimizationSettings(
                solver_enumeration_limit=_integer(data, 'solver_enumeration_limit', 1000000),
                psd_tolerance=_number(data, 'psd_tolerance', 1e-8),
            ),
            output=OutputSettings(emit_plot_data=_flag(data, 'emit_plot_data', False)),
        )

    def to_dict(self) -> Dict[str, Any]:
        """Convert configuration to a flat dictionary"""
        return {
            'config_version': self.config_version,
            'design': self.inference.design.value,
            'composition': list(self.inference.composition) if self.inference.composition is not None else None,
            'alpha': self.inference.alpha,
            'contrasts': self.inference.contrasts,
            'unconditional': self.inference.unconditional,
            'seed': self.simulation.seed,
            'draws': self.simulation.draws,
            'workers': self.simulation.workers,
            'enumeration_limit': self.simulation.enumeration_limit,
            'oracle_cap': self.simulation.oracle_cap,
            'solver_enumeration_limit': self.optimization.solver_enumeration_limit,
            'psd_tolerance': self.optimization.psd_tolerance,
            'emit_plot_data': self.output.emit_plot_data,
        }

    def echo(self) -> Dict[str, Any]:
        """Settings that determine a result; the thread count does not"""
        settings = self.to_dict()
        del settings['workers']
        return settings


class ConfigPaths:
    """Configuration file paths management"""

    def __init__(self, config_dir: Optional[Union[str, Path]] = None):
        self.config_dir = Path(config_dir) if config_dir else self._get_default_config_dir()

    def _get_default_config_dir(self) -> Path:
        """Get default configuration directory"""
        # Try XDG_CONFIG_HOME first, then fallback to ~/.config
        xdg_config = os.environ.get('XDG_CONFIG_HOME')
        if xdg_config:
            return Path(xdg_config) / "peerfx"
        return Path.home() / ".config" / "peerfx"

    @property
    def user_config_file(self) -> Path:
        return self.config_dir / "config.yaml"

    @property
    def local_config_file(self) -> Path:
        return self.config_dir / "local.yaml"
